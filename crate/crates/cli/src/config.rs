//! Run configuration: argument parsing helpers and validation. Config and
//! spec problems map to exit code 2, compute problems to 3, failed checks
//! to 4.

use std::path::{Path, PathBuf};

use infharm::grid::Axis;
use infharm::{Grid, MapInstance, MapSpec};

/// Failure category carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or map spec (exit 2).
    Config(String),
    /// Evaluation or I/O failure during or after compute (exit 3).
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Compute(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Exit code for runs whose checks did not pass.
pub const EXIT_CHECKS_FAILED: i32 = 4;

pub fn load_map(path: &Path) -> CliResult<(MapSpec, MapInstance)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read map spec {}: {e}", path.display())))?;
    let spec: MapSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid map spec {}: {e}", path.display())))?;
    let map = spec
        .build()
        .map_err(|e| CliError::Config(format!("invalid map spec {}: {e}", path.display())))?;
    Ok((spec, map))
}

/// Parse `x0,x1,y0,y1,...` (2 per axis) into per-axis bounds.
pub fn parse_domain(text: &str) -> CliResult<Vec<(f64, f64)>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad domain value {s:?}: {e}")))
        })
        .collect::<CliResult<_>>()?;
    if values.is_empty() || !values.len().is_multiple_of(2) {
        return Err(CliError::Config(format!(
            "domain needs an even number of bounds, got {}",
            values.len()
        )));
    }
    Ok(values.chunks(2).map(|c| (c[0], c[1])).collect())
}

/// Parse `N0xN1x...` node counts.
pub fn parse_grid_counts(text: &str) -> CliResult<Vec<usize>> {
    text.split('x')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Config(format!("bad grid count {s:?}: {e}")))
        })
        .collect()
}

pub fn build_grid(domain: &str, counts: &str) -> CliResult<Grid> {
    let bounds = parse_domain(domain)?;
    let counts = parse_grid_counts(counts)?;
    if bounds.len() != counts.len() {
        return Err(CliError::Config(format!(
            "domain has {} axes but grid has {}",
            bounds.len(),
            counts.len()
        )));
    }
    let axes: Vec<Axis> = bounds
        .iter()
        .zip(&counts)
        .map(|(&(min, max), &count)| Axis { min, max, count })
        .collect();
    Grid::new(axes).map_err(|e| CliError::Config(e.to_string()))
}

/// Parse a comma-separated point.
pub fn parse_point(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad coordinate {s:?}: {e}")))
        })
        .collect()
}

/// Parse and normalize a direction; the zero vector is rejected.
pub fn parse_direction(text: &str) -> CliResult<Vec<f64>> {
    let mut v = parse_point(text)?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm <= 0.0 {
        return Err(CliError::Config(
            "direction must be a nonzero vector".into(),
        ));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Output directories must exist before compute starts.
pub fn check_writable(paths: &[Option<&PathBuf>]) -> CliResult<()> {
    for path in paths.iter().flatten() {
        let parent = match path.parent() {
            Some(p) if p.as_os_str().is_empty() => Path::new("."),
            Some(p) => p,
            None => Path::new("."),
        };
        if !parent.is_dir() {
            return Err(CliError::Config(format!(
                "output directory {} does not exist",
                parent.display()
            )));
        }
    }
    Ok(())
}

pub fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))
}
