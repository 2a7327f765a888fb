//! The four run pipelines behind the subcommands. Each returns whether its
//! checks passed; exporters write byte-stable artifacts.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use infharm::export::{
    phase_map_to_csv, phase_map_to_ppm, residual_field_to_csv, trajectory_to_csv,
};
use infharm::flow::energy_rate_rhs_at;
use infharm::phase::PhaseMap;
use infharm::residual::ResidualField;
use infharm::tensor::vec_norm;
use infharm::{
    check_identity_energy_rate, check_monotone_increasing, classify, fit_rank_one, integrate_flow,
    interface_report, line_fit_image, residual_field, verify_eikonal,
    verify_scalar_infinity_harmonic, FlowSpec, FlowTrajectory, FlowVariant, Grid, MapInstance,
    MapSpec, DEFAULT_EPS_STOP,
};

use crate::config::{check_writable, write_output, CliError, CliResult};
use crate::report::{
    termination_name, to_json, ClassifyRunReport, ComponentSummary, EikonalVerdict, FlowRunReport,
    FlowSummary, GridEcho, InterfaceSetSummary, InterfaceSummary, PhaseInventory, RankOneVerdict,
    ResidualRunReport, ResidualSummary, Thresholds, VerifyReport,
};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default per-check tolerances of the verify battery.
pub const EIKONAL_DEV_TOL: f64 = 1e-6;
pub const FIT_TOL: f64 = 1e-8;
pub const LINE_TOL: f64 = 1e-8;
pub const SCALAR_TOL: f64 = 1e-6;
pub const FLOW_DRIFT_TOL: f64 = 1e-6;
pub const FLOW_AFFINITY_TOL: f64 = 1e-4;

/// Stop threshold for modified-flow batteries (see README: the modified
/// field is singular where the projected gradient vanishes, and the
/// fixed-step integrator must stop inside its stability region).
pub const MODIFIED_BATTERY_EPS_STOP: f64 = 0.25;
/// Admissibility floor on `|xi^T Du|` at sampled battery starts.
pub const BATTERY_START_FLOOR: f64 = 0.3;

pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

pub struct FieldParams {
    pub tau_abs: f64,
    pub tau_rel: f64,
    pub margin_floor: f64,
}

fn grid_echo(grid: &Grid) -> GridEcho {
    GridEcho {
        domain: grid.bounding_box(),
        nodes: grid.axes().iter().map(|a| a.count).collect(),
    }
}

fn thresholds_echo(params: &FieldParams, residual_tol: f64) -> Thresholds {
    Thresholds {
        tau_abs: params.tau_abs,
        tau_rel: params.tau_rel,
        margin_floor: params.margin_floor,
        residual_tol,
    }
}

fn compute_err(e: infharm::Error) -> CliError {
    CliError::Compute(e.to_string())
}

fn residual_summary(field: &ResidualField, tol: f64) -> ResidualSummary {
    ResidualSummary {
        sup_full: field.sup_full.vec2,
        sup_full_component: field.sup_full.component,
        sup_tangential: field.sup_tangential.vec2,
        sup_normal: field.sup_normal.vec2,
        pass: field.sup_full.vec2 <= tol,
    }
}

fn phase_inventory(pm: &PhaseMap) -> PhaseInventory {
    let mut component_count_by_rank = BTreeMap::new();
    let mut node_count_by_rank = BTreeMap::new();
    for c in &pm.components {
        *component_count_by_rank.entry(c.label).or_insert(0) += 1;
        *node_count_by_rank.entry(c.label).or_insert(0) += c.nodes.len();
    }
    PhaseInventory {
        component_count_by_rank,
        node_count_by_rank,
        interface_nodes: pm.interface_node_count(),
        low_confidence_nodes: pm.low_confidence.iter().filter(|&&b| b).count(),
        components: pm
            .components
            .iter()
            .map(|c| ComponentSummary {
                id: c.id,
                label: c.label,
                nodes: c.nodes.len(),
                boundary_truncated: c.boundary_truncated,
                adjacent: c.adjacent.clone(),
            })
            .collect(),
    }
}

fn interface_summary(pm: &PhaseMap, field: &ResidualField) -> CliResult<InterfaceSummary> {
    let report = interface_report(pm, field).map_err(compute_err)?;
    Ok(InterfaceSummary {
        sets: report
            .sets
            .iter()
            .map(|s| InterfaceSetSummary {
                nodes: s.nodes.len(),
                du_norm_sq_mean: s.du_norm_sq_mean,
                du_norm_sq_max_dev: s.du_norm_sq_max_dev,
                dominant_rank: s.dominant_rank,
                adjacent_components: s.adjacent_components.clone(),
            })
            .collect(),
        junction_nodes: report.junction_nodes,
    })
}

pub struct ExportPaths {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub ppm: Option<PathBuf>,
}

pub fn run_residual(
    spec: &MapSpec,
    map: &MapInstance,
    grid: &Grid,
    params: &FieldParams,
    tol: f64,
    out: &ExportPaths,
) -> CliResult<Outcome> {
    check_writable(&[out.csv.as_ref(), out.json.as_ref()])?;
    let start = Instant::now();
    let field = residual_field(map, grid, params.tau_abs, params.tau_rel).map_err(compute_err)?;
    let summary = residual_summary(&field, tol);
    let pass = summary.pass;

    if let Some(path) = &out.csv {
        write_output(path, &residual_field_to_csv(&field))?;
    }
    if let Some(path) = &out.json {
        let report = ResidualRunReport {
            tool_version: TOOL_VERSION.into(),
            map: spec.clone(),
            grid: grid_echo(grid),
            thresholds: thresholds_echo(params, tol),
            residual: summary,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        write_output(
            path,
            &to_json(&report).map_err(|e| CliError::Compute(e.to_string()))?,
        )?;
    }

    Ok(Outcome {
        pass,
        summary: format!(
            "residual sup |full| = {:.3e} (tolerance {tol:.3e})",
            field.sup_full.vec2
        ),
    })
}

pub fn run_classify(
    spec: &MapSpec,
    map: &MapInstance,
    grid: &Grid,
    params: &FieldParams,
    out: &ExportPaths,
) -> CliResult<Outcome> {
    check_writable(&[out.csv.as_ref(), out.json.as_ref(), out.ppm.as_ref()])?;
    let start = Instant::now();
    let pm = classify(
        map,
        grid,
        params.tau_abs,
        params.tau_rel,
        params.margin_floor,
    )
    .map_err(compute_err)?;
    let field = residual_field(map, grid, params.tau_abs, params.tau_rel).map_err(compute_err)?;

    if let Some(path) = &out.ppm {
        write_output(path, &phase_map_to_ppm(&pm).map_err(compute_err)?)?;
    }
    if let Some(path) = &out.csv {
        write_output(path, &phase_map_to_csv(&pm))?;
    }
    let interface = interface_summary(&pm, &field)?;
    let inventory = phase_inventory(&pm);
    let summary = format!(
        "{} components ({} interface nodes, {} junction nodes)",
        pm.components.len(),
        pm.interface_node_count(),
        interface.junction_nodes.len()
    );
    if let Some(path) = &out.json {
        let report = ClassifyRunReport {
            tool_version: TOOL_VERSION.into(),
            map: spec.clone(),
            grid: grid_echo(grid),
            thresholds: thresholds_echo(params, f64::NAN),
            phases: inventory,
            interface,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        write_output(
            path,
            &to_json(&report).map_err(|e| CliError::Compute(e.to_string()))?,
        )?;
    }

    Ok(Outcome {
        pass: true,
        summary,
    })
}

pub struct FlowTolerances {
    pub drift: f64,
    pub affinity: f64,
}

fn flow_passes(traj: &FlowTrajectory, tol: &FlowTolerances) -> bool {
    let drift_ok = traj.diagnostics.max_du_norm_sq_drift <= tol.drift;
    match traj.variant {
        FlowVariant::Plain => drift_ok && traj.diagnostics.monotonicity_violations == 0,
        FlowVariant::Modified => {
            drift_ok && traj.diagnostics.max_second_difference_over_dt_sq <= tol.affinity
        }
    }
}

pub fn run_flow(
    spec: &MapSpec,
    map: &MapInstance,
    domain: &[(f64, f64)],
    flow: &FlowSpec,
    tol: &FlowTolerances,
    out: &ExportPaths,
) -> CliResult<Outcome> {
    check_writable(&[out.csv.as_ref(), out.json.as_ref()])?;
    let start = Instant::now();
    let traj = integrate_flow(map, domain, flow).map_err(|e| match e {
        infharm::Error::InvalidFlow(_) | infharm::Error::SingularStart { .. } => {
            CliError::Config(e.to_string())
        }
        other => CliError::Compute(other.to_string()),
    })?;

    let energy_defect = if traj.samples.len() >= 5 {
        check_identity_energy_rate(map, &traj).map_err(compute_err)?
    } else {
        0.0
    };
    let pass = flow_passes(&traj, tol);

    if let Some(path) = &out.csv {
        let rhs: Vec<f64> = traj
            .samples
            .iter()
            .map(|s| energy_rate_rhs_at(map, &traj, &s.position).unwrap_or(f64::NAN))
            .collect();
        write_output(path, &trajectory_to_csv(&traj, &rhs))?;
    }
    if let Some(path) = &out.json {
        let report = FlowRunReport {
            tool_version: TOOL_VERSION.into(),
            map: spec.clone(),
            variant: match traj.variant {
                FlowVariant::Plain => "plain".into(),
                FlowVariant::Modified => "modified".into(),
            },
            start: flow.start.clone(),
            direction: flow.direction.clone(),
            dt: flow.dt,
            t_min: flow.t_min,
            t_max: flow.t_max,
            eps_stop: flow.eps_stop,
            samples: traj.samples.len(),
            termination: termination_name(traj.termination),
            max_du_norm_sq_drift: traj.diagnostics.max_du_norm_sq_drift,
            max_second_difference_over_dt_sq: traj.diagnostics.max_second_difference_over_dt_sq,
            monotonicity_violations: traj.diagnostics.monotonicity_violations,
            max_energy_rate_defect: energy_defect,
            pass,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        write_output(
            path,
            &to_json(&report).map_err(|e| CliError::Compute(e.to_string()))?,
        )?;
    }

    Ok(Outcome {
        pass,
        summary: format!(
            "{} samples, termination {}, drift {:.3e}, slope second-difference {:.3e}, {} violations",
            traj.samples.len(),
            termination_name(traj.termination),
            traj.diagnostics.max_du_norm_sq_drift,
            traj.diagnostics.max_second_difference_over_dt_sq,
            traj.diagnostics.monotonicity_violations
        ),
    })
}

/// Seeded flow battery over admissible random starts, both variants each.
fn verify_flows(
    map: &MapInstance,
    grid: &Grid,
    starts: usize,
    seed: u64,
) -> CliResult<FlowSummary> {
    let bbox = grid.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_dim = map.dims().0;
    let dim = map.dims().1;

    let mut sampled = Vec::with_capacity(starts);
    let mut attempts = 0usize;
    while sampled.len() < starts {
        attempts += 1;
        if attempts > 10_000 * starts.max(1) {
            return Err(CliError::Compute(
                "could not sample admissible flow starts (gradient too degenerate)".into(),
            ));
        }
        let x: Vec<f64> = bbox
            .iter()
            .map(|&(lo, hi)| {
                let pad = 0.05 * (hi - lo);
                rng.gen_range(lo + pad..hi - pad)
            })
            .collect();
        if x.len() != dim {
            return Err(CliError::Config(format!(
                "flow starts need {dim} coordinates"
            )));
        }
        // isotropic direction via Box-Muller pairs
        let mut xi = vec![0.0; out_dim];
        for slot in xi.iter_mut() {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            *slot = (-2.0 * u1.ln()).sqrt() * u2.cos();
        }
        let norm = vec_norm(&xi);
        if norm < 1e-6 {
            continue;
        }
        xi.iter_mut().for_each(|v| *v /= norm);

        let (du, _) = map.second_order_at(&x).map_err(compute_err)?;
        if vec_norm(&du.apply_transpose(&xi)) >= BATTERY_START_FLOOR {
            sampled.push((x, xi));
        }
    }

    let results: Vec<CliResult<(f64, f64, usize)>> = sampled
        .par_iter()
        .map(|(x, xi)| {
            let mut drift = 0.0f64;
            let mut affinity = 0.0f64;
            let mut violations = 0usize;
            for variant in [FlowVariant::Plain, FlowVariant::Modified] {
                let spec = FlowSpec {
                    variant,
                    start: x.clone(),
                    direction: xi.clone(),
                    t_min: -1.0,
                    t_max: 1.0,
                    dt: infharm::DEFAULT_FLOW_DT,
                    eps_stop: match variant {
                        FlowVariant::Plain => DEFAULT_EPS_STOP,
                        FlowVariant::Modified => MODIFIED_BATTERY_EPS_STOP,
                    },
                };
                let traj = integrate_flow(map, &bbox, &spec).map_err(compute_err)?;
                drift = drift.max(traj.diagnostics.max_du_norm_sq_drift);
                match variant {
                    FlowVariant::Modified => {
                        affinity = affinity.max(traj.diagnostics.max_second_difference_over_dt_sq);
                    }
                    FlowVariant::Plain => violations += check_monotone_increasing(&traj),
                }
            }
            Ok((drift, affinity, violations))
        })
        .collect();

    let mut max_drift = 0.0f64;
    let mut max_affinity = 0.0f64;
    let mut violations = 0usize;
    for r in results {
        let (d, a, v) = r?;
        max_drift = max_drift.max(d);
        max_affinity = max_affinity.max(a);
        violations += v;
    }

    Ok(FlowSummary {
        starts,
        max_du_norm_sq_drift: max_drift,
        max_affinity_defect: max_affinity,
        monotonicity_violations: violations,
        pass: max_drift <= FLOW_DRIFT_TOL && max_affinity <= FLOW_AFFINITY_TOL && violations == 0,
    })
}

pub struct VerifyParams {
    pub residual_tol: f64,
    pub flow_starts: usize,
    pub flow_seed: u64,
}

pub fn run_verify(
    spec: &MapSpec,
    map: &MapInstance,
    grid: &Grid,
    params: &FieldParams,
    verify: &VerifyParams,
    out: &ExportPaths,
) -> CliResult<Outcome> {
    check_writable(&[out.csv.as_ref(), out.json.as_ref(), out.ppm.as_ref()])?;
    let start = Instant::now();

    let field = residual_field(map, grid, params.tau_abs, params.tau_rel).map_err(compute_err)?;
    let residual = residual_summary(&field, verify.residual_tol);

    let pm = classify(
        map,
        grid,
        params.tau_abs,
        params.tau_rel,
        params.margin_floor,
    )
    .map_err(compute_err)?;

    let full_rank = grid.dim();
    let mut eikonal = Vec::new();
    for id in pm.components_with_label(full_rank) {
        let (c_sq, max_dev) = verify_eikonal(&pm, id, &field).map_err(compute_err)?;
        eikonal.push(EikonalVerdict {
            component: id,
            c_sq,
            max_dev,
            pass: c_sq > 0.0 && max_dev <= EIKONAL_DEV_TOL,
        });
    }

    let mut rank_one = Vec::new();
    for id in pm.components_with_label(1) {
        let fit = fit_rank_one(map, &pm, id).map_err(compute_err)?;
        let line = line_fit_image(map, &pm, &fit).map_err(compute_err)?;
        let scalar = verify_scalar_infinity_harmonic(&pm, &fit).map_err(compute_err)?;
        let scalar_ok = match scalar.sup_residual {
            Some(sup) => sup <= SCALAR_TOL,
            None => true, // not checkable counts as pass
        };
        rank_one.push(RankOneVerdict {
            component: id,
            degenerate: fit.degenerate,
            direction: fit.direction.clone(),
            offset: fit.offset.clone(),
            max_residual: fit.max_residual,
            line_fit_distance: line,
            scalar_residual_sup: scalar.sup_residual,
            not_checkable: scalar.not_checkable.clone(),
            pass: fit.max_residual <= FIT_TOL && line <= LINE_TOL && scalar_ok,
        });
    }

    let interface = interface_summary(&pm, &field)?;
    let flows = if verify.flow_starts > 0 {
        Some(verify_flows(
            map,
            grid,
            verify.flow_starts,
            verify.flow_seed,
        )?)
    } else {
        None
    };

    let overall_pass = residual.pass
        && eikonal.iter().all(|v| v.pass)
        && rank_one.iter().all(|v| v.pass)
        && flows.as_ref().is_none_or(|f| f.pass);

    if let Some(path) = &out.ppm {
        write_output(path, &phase_map_to_ppm(&pm).map_err(compute_err)?)?;
    }
    if let Some(path) = &out.csv {
        write_output(path, &phase_map_to_csv(&pm))?;
    }

    let summary = format!(
        "residual {:.3e}, {} full-rank and {} rank-one components verified, {} junction nodes{} => {}",
        residual.sup_full,
        eikonal.len(),
        rank_one.len(),
        interface.junction_nodes.len(),
        flows
            .as_ref()
            .map(|f| format!(
                ", flows: drift {:.3e} affinity {:.3e} violations {}",
                f.max_du_norm_sq_drift, f.max_affinity_defect, f.monotonicity_violations
            ))
            .unwrap_or_default(),
        if overall_pass { "PASS" } else { "FAIL" }
    );

    if let Some(path) = &out.json {
        let report = VerifyReport {
            tool_version: TOOL_VERSION.into(),
            map: spec.clone(),
            grid: grid_echo(grid),
            thresholds: thresholds_echo(params, verify.residual_tol),
            eikonal_dev_tol: EIKONAL_DEV_TOL,
            fit_tol: FIT_TOL,
            line_tol: LINE_TOL,
            scalar_tol: SCALAR_TOL,
            residual,
            phases: phase_inventory(&pm),
            eikonal,
            rank_one,
            interface,
            flows,
            overall_pass,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        write_output(
            path,
            &to_json(&report).map_err(|e| CliError::Compute(e.to_string()))?,
        )?;
    }

    Ok(Outcome {
        pass: overall_pass,
        summary,
    })
}
