//! Deterministic text exports: CSV for fields and trajectories, plain-text
//! P3 pixmaps for phase maps. All floating-point values are printed with 17
//! significant digits so a reader can reconstruct them bit-exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::phase::{NodeLabel, PhaseMap};
use crate::residual::ResidualField;
use crate::tensor::vec_norm;

/// 17 significant digits: round-trip exact for f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Fixed rank-to-color table for phase pixmaps.
/// rank 0: black, 1: blue, 2: white, 3: green, 4: orange, >= 5: gray,
/// interface: red.
pub fn rank_color(label: NodeLabel) -> (u8, u8, u8) {
    match label {
        NodeLabel::Interface => (255, 0, 0),
        NodeLabel::Phase(0) => (0, 0, 0),
        NodeLabel::Phase(1) => (0, 0, 255),
        NodeLabel::Phase(2) => (255, 255, 255),
        NodeLabel::Phase(3) => (0, 170, 0),
        NodeLabel::Phase(4) => (255, 170, 0),
        NodeLabel::Phase(_) => (128, 128, 128),
    }
}

/// CSV of a residual field. Columns: the node coordinates (`x0..x{n-1}`),
/// `du_norm_sq`, `full_norm`, `tangential_norm`, `normal_norm`, `rank`.
pub fn residual_field_to_csv(field: &ResidualField) -> String {
    let dim = field.grid.dim();
    let mut out = String::new();
    for d in 0..dim {
        let _ = write!(out, "x{d},");
    }
    out.push_str("du_norm_sq,full_norm,tangential_norm,normal_norm,rank\n");
    for (idx, sample) in field.samples.iter().enumerate() {
        for c in field.grid.coords(idx) {
            let _ = write!(out, "{},", fmt_f64(c));
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(sample.du_norm_sq),
            fmt_f64(vec_norm(&sample.full)),
            fmt_f64(vec_norm(&sample.tangential)),
            fmt_f64(vec_norm(&sample.normal)),
            sample.rank.rank
        );
    }
    out
}

/// CSV of a phase map. Columns: node index, coordinates, label (a rank or
/// `interface`), component id (empty on interface nodes).
pub fn phase_map_to_csv(pm: &PhaseMap) -> String {
    let dim = pm.grid.dim();
    let mut out = String::from("node,");
    for d in 0..dim {
        let _ = write!(out, "x{d},");
    }
    out.push_str("label,component\n");
    for node in 0..pm.grid.node_count() {
        let _ = write!(out, "{node},");
        for c in pm.grid.coords(node) {
            let _ = write!(out, "{},", fmt_f64(c));
        }
        match pm.labels[node] {
            NodeLabel::Interface => out.push_str("interface,\n"),
            NodeLabel::Phase(r) => {
                let comp = pm.component_of[node]
                    .map(|id| id.to_string())
                    .unwrap_or_default();
                let _ = writeln!(out, "{r},{comp}");
            }
        }
    }
    out
}

/// Plain-text P3 pixmap of a 2D phase map. The first axis runs left to
/// right; the second axis runs bottom to top (rows are written from the
/// maximum of axis 1 downward).
pub fn phase_map_to_ppm(pm: &PhaseMap) -> Result<String> {
    if pm.grid.dim() != 2 {
        return Err(Error::InvalidGrid(format!(
            "pixmap export needs a 2D grid, got {}D",
            pm.grid.dim()
        )));
    }
    let width = pm.grid.axes()[0].count;
    let height = pm.grid.axes()[1].count;
    let mut out = format!("P3\n{width} {height}\n255\n");
    for row in (0..height).rev() {
        let mut line = String::new();
        for col in 0..width {
            let node = pm.grid.linear_index(&[col, row]);
            let (r, g, b) = rank_color(pm.labels[node]);
            if !line.is_empty() {
                line.push(' ');
            }
            let _ = write!(line, "{r} {g} {b}");
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// CSV of a flow trajectory. Columns: `t`, the position coordinates
/// (`gamma0..`), `du_norm_sq`, `xi_dot_u`, `xi_du_norm`, and per-sample
/// defect columns: the centered-difference energy rate minus the chain-rule
/// side, and the centered slope of `xi_dot_u` minus the variant's own rate
/// (`xi_du_norm^2` for the plain flow, `du_norm_sq` for the modified one).
/// Defects are empty at the endpoints.
pub fn trajectory_to_csv(traj: &FlowTrajectory, energy_rate_rhs: &[f64]) -> String {
    let dim = traj.samples.first().map(|s| s.position.len()).unwrap_or(0);
    let mut out = String::from("t,");
    for d in 0..dim {
        let _ = write!(out, "gamma{d},");
    }
    out.push_str("du_norm_sq,xi_dot_u,xi_du_norm,defect_energy_rate,defect_slope\n");
    let n = traj.samples.len();
    for (k, s) in traj.samples.iter().enumerate() {
        let _ = write!(out, "{},", fmt_f64(s.t));
        for c in &s.position {
            let _ = write!(out, "{},", fmt_f64(*c));
        }
        let _ = write!(
            out,
            "{},{},{}",
            fmt_f64(s.du_norm_sq),
            fmt_f64(s.xi_dot_u),
            fmt_f64(s.xi_du_norm)
        );
        if k > 0 && k + 1 < n {
            let dt = traj.dt;
            let lhs_energy = 0.5
                * (traj.samples[k + 1].du_norm_sq - traj.samples[k - 1].du_norm_sq)
                / (2.0 * dt);
            let defect_energy = lhs_energy - energy_rate_rhs[k];
            let slope = (traj.samples[k + 1].xi_dot_u - traj.samples[k - 1].xi_dot_u) / (2.0 * dt);
            let rate = match traj.variant {
                crate::flow::FlowVariant::Plain => s.xi_du_norm * s.xi_du_norm,
                crate::flow::FlowVariant::Modified => s.du_norm_sq,
            };
            let defect_slope = slope - rate;
            let _ = writeln!(out, ",{},{}", fmt_f64(defect_energy), fmt_f64(defect_slope));
        } else {
            out.push_str(",,\n");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_flow, FlowSpec, FlowVariant};
    use crate::grid::Grid;
    use crate::map::{FamilySpec, MapSpec};
    use crate::phase::{classify, DEFAULT_MARGIN_FLOOR};
    use crate::residual::residual_field;
    use crate::tensor::{DEFAULT_TAU_ABS, DEFAULT_TAU_REL};

    #[test]
    fn formatted_floats_round_trip() {
        for v in [0.0, 1.0, -1.5, std::f64::consts::PI, 1e-300, 2.0 / 3.0] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "round trip of {v}");
        }
    }

    #[test]
    fn ppm_of_affine_rank_two_map_is_all_white() {
        let map = MapSpec::new(FamilySpec::Affine {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            shift: None,
        })
        .build()
        .unwrap();
        let grid = Grid::square(0.0, 1.0, 4).unwrap();
        let pm = classify(
            &map,
            &grid,
            DEFAULT_TAU_ABS,
            DEFAULT_TAU_REL,
            DEFAULT_MARGIN_FLOOR,
        )
        .unwrap();
        let ppm = phase_map_to_ppm(&pm).unwrap();
        assert!(ppm.starts_with("P3\n4 4\n255\n"));
        for line in ppm.lines().skip(3) {
            assert_eq!(line, "255 255 255 255 255 255 255 255 255 255 255 255");
        }
    }

    #[test]
    fn ppm_orientation_on_a_non_square_grid() {
        let map = MapSpec::new(FamilySpec::Affine {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            shift: None,
        })
        .build()
        .unwrap();
        let grid = Grid::new(vec![
            crate::grid::Axis {
                min: 0.0,
                max: 1.0,
                count: 5,
            },
            crate::grid::Axis {
                min: 0.0,
                max: 1.0,
                count: 3,
            },
        ])
        .unwrap();
        let pm = classify(
            &map,
            &grid,
            DEFAULT_TAU_ABS,
            DEFAULT_TAU_REL,
            DEFAULT_MARGIN_FLOOR,
        )
        .unwrap();
        let ppm = phase_map_to_ppm(&pm).unwrap();
        assert!(ppm.starts_with("P3\n5 3\n255\n"));
        assert_eq!(ppm.lines().count(), 3 + 3); // header + one line per row
        for line in ppm.lines().skip(3) {
            assert_eq!(line.split_whitespace().count(), 15);
        }
    }

    #[test]
    fn csv_headers_are_stable() {
        let map = MapSpec::new(FamilySpec::Exp2).build().unwrap();
        let grid = Grid::square(-1.0, 1.0, 4).unwrap();
        let field = residual_field(&map, &grid, DEFAULT_TAU_ABS, DEFAULT_TAU_REL).unwrap();
        let csv = residual_field_to_csv(&field);
        assert!(csv.starts_with("x0,x1,du_norm_sq,full_norm,tangential_norm,normal_norm,rank\n"));
        assert_eq!(csv.lines().count(), 1 + grid.node_count());

        let pm = classify(
            &map,
            &grid,
            DEFAULT_TAU_ABS,
            DEFAULT_TAU_REL,
            DEFAULT_MARGIN_FLOOR,
        )
        .unwrap();
        let csv = phase_map_to_csv(&pm);
        assert!(csv.starts_with("node,x0,x1,label,component\n"));

        let traj = integrate_flow(
            &map,
            &[(-3.2, 3.2), (-3.2, 3.2)],
            &FlowSpec {
                variant: FlowVariant::Plain,
                start: vec![0.3, 0.7],
                direction: vec![1.0, 0.0],
                t_min: -0.1,
                t_max: 0.1,
                dt: 0.01,
                eps_stop: 1e-6,
            },
        )
        .unwrap();
        let rhs = vec![0.0; traj.samples.len()];
        let csv = trajectory_to_csv(&traj, &rhs);
        assert!(csv.starts_with(
            "t,gamma0,gamma1,du_norm_sq,xi_dot_u,xi_du_norm,defect_energy_rate,defect_slope\n"
        ));
        assert_eq!(csv.lines().count(), 1 + traj.samples.len());
    }
}
