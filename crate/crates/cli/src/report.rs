//! Report types serialized to JSON, with all floating-point values printed
//! at 17 significant digits (round-trip exact).

use std::collections::BTreeMap;
use std::io;

use serde::Serialize;

use infharm::flow::Termination;
use infharm::MapSpec;

#[derive(Debug, Serialize)]
pub struct GridEcho {
    pub domain: Vec<(f64, f64)>,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct Thresholds {
    pub tau_abs: f64,
    pub tau_rel: f64,
    pub margin_floor: f64,
    pub residual_tol: f64,
}

#[derive(Debug, Serialize)]
pub struct ResidualSummary {
    pub sup_full: f64,
    pub sup_full_component: f64,
    pub sup_tangential: f64,
    pub sup_normal: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct ComponentSummary {
    pub id: usize,
    pub label: usize,
    pub nodes: usize,
    pub boundary_truncated: bool,
    pub adjacent: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct PhaseInventory {
    pub component_count_by_rank: BTreeMap<usize, usize>,
    pub node_count_by_rank: BTreeMap<usize, usize>,
    pub interface_nodes: usize,
    pub low_confidence_nodes: usize,
    pub components: Vec<ComponentSummary>,
}

#[derive(Debug, Serialize)]
pub struct EikonalVerdict {
    pub component: usize,
    pub c_sq: f64,
    pub max_dev: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct RankOneVerdict {
    pub component: usize,
    pub degenerate: bool,
    pub direction: Vec<f64>,
    pub offset: Vec<f64>,
    pub max_residual: f64,
    pub line_fit_distance: f64,
    /// Sup of the fitted scalar's residual; absent when not checkable.
    pub scalar_residual_sup: Option<f64>,
    pub not_checkable: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct InterfaceSetSummary {
    pub nodes: usize,
    pub du_norm_sq_mean: f64,
    pub du_norm_sq_max_dev: f64,
    pub dominant_rank: usize,
    pub adjacent_components: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize)]
pub struct InterfaceSummary {
    pub sets: Vec<InterfaceSetSummary>,
    pub junction_nodes: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct FlowSummary {
    pub starts: usize,
    pub max_du_norm_sq_drift: f64,
    pub max_affinity_defect: f64,
    pub monotonicity_violations: usize,
    pub pass: bool,
}

/// Aggregate verification report; `overall_pass` holds iff every individual
/// check passes or is not checkable.
#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub tool_version: String,
    pub map: MapSpec,
    pub grid: GridEcho,
    pub thresholds: Thresholds,
    pub eikonal_dev_tol: f64,
    pub fit_tol: f64,
    pub line_tol: f64,
    pub scalar_tol: f64,
    pub residual: ResidualSummary,
    pub phases: PhaseInventory,
    pub eikonal: Vec<EikonalVerdict>,
    pub rank_one: Vec<RankOneVerdict>,
    pub interface: InterfaceSummary,
    pub flows: Option<FlowSummary>,
    pub overall_pass: bool,
    pub wall_time_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct ResidualRunReport {
    pub tool_version: String,
    pub map: MapSpec,
    pub grid: GridEcho,
    pub thresholds: Thresholds,
    pub residual: ResidualSummary,
    pub wall_time_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct ClassifyRunReport {
    pub tool_version: String,
    pub map: MapSpec,
    pub grid: GridEcho,
    pub thresholds: Thresholds,
    pub phases: PhaseInventory,
    pub interface: InterfaceSummary,
    pub wall_time_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct FlowRunReport {
    pub tool_version: String,
    pub map: MapSpec,
    pub variant: String,
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub dt: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub eps_stop: f64,
    pub samples: usize,
    pub termination: String,
    pub max_du_norm_sq_drift: f64,
    pub max_second_difference_over_dt_sq: f64,
    pub monotonicity_violations: usize,
    pub max_energy_rate_defect: f64,
    pub pass: bool,
    pub wall_time_ms: f64,
}

pub fn termination_name(t: Termination) -> String {
    match t {
        Termination::Completed => "completed".into(),
        Termination::StoppedSingular => "stopped-singular".into(),
        Termination::LeftDomain => "left-domain".into(),
    }
}

/// JSON formatter printing every float as `{:.16e}` (17 significant digits).
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize a report to a JSON string with round-trip-exact floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut out = Vec::new();
    let mut serializer = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value.serialize(&mut serializer)?;
    Ok(String::from_utf8(out).expect("serializer emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_printed_with_17_significant_digits() {
        #[derive(Serialize)]
        struct Probe {
            x: f64,
        }
        let text = to_json(&Probe {
            x: std::f64::consts::PI,
        })
        .unwrap();
        assert_eq!(text, r#"{"x":3.1415926535897931e0}"#);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["x"].as_f64().unwrap(), std::f64::consts::PI);
    }
}
