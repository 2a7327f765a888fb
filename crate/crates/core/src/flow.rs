//! Gradient-flow trajectories along a direction on the unit sphere of the
//! target space, with conservation, monotonicity and affinity diagnostics.
//!
//! The plain flow advects by `xi^T Du(gamma)`; the modified flow rescales the
//! same field by `|Du|^2 / |xi^T Du|^2`. Both branches of the time axis start
//! from the same initial point, the backward branch integrating the negated
//! field. Classical fixed-step fourth-order Runge-Kutta throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::MapInstance;
use crate::tensor::{vec_dot, vec_norm};

pub const DEFAULT_FLOW_DT: f64 = 1e-3;
pub const DEFAULT_EPS_STOP: f64 = 1e-6;

/// Decrease beyond this slack counts as a monotonicity violation.
const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowVariant {
    Plain,
    Modified,
}

/// Flow configuration: variant, start point, target-space direction, time
/// span straddling zero, fixed step and the singular-stop threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub variant: FlowVariant,
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub dt: f64,
    pub eps_stop: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    StoppedSingular,
    LeftDomain,
}

/// One time sample along a trajectory. `xi_du_norm` is reported alongside
/// `xi_dot_u` so both candidate readings of the slope identity stay
/// observable in exports.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub t: f64,
    pub position: Vec<f64>,
    pub du_norm_sq: f64,
    pub xi_dot_u: f64,
    pub xi_du_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowDiagnostics {
    /// Max over samples of `| |Du(gamma)|^2 - |Du(start)|^2 |`.
    pub max_du_norm_sq_drift: f64,
    /// Max absolute second centered difference of `xi . u(gamma)`.
    pub max_second_difference: f64,
    /// The same, divided by `dt^2` (an estimate of the second derivative).
    pub max_second_difference_over_dt_sq: f64,
    /// Count of consecutive sample pairs where `xi . u` decreases beyond slack.
    pub monotonicity_violations: usize,
}

/// Time-sampled trajectory, samples sorted by increasing `t`.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub variant: FlowVariant,
    pub direction: Vec<f64>,
    pub dt: f64,
    pub samples: Vec<FlowSample>,
    pub termination: Termination,
    pub forward_termination: Termination,
    pub backward_termination: Termination,
    pub diagnostics: FlowDiagnostics,
}

struct FieldEval {
    velocity: Vec<f64>,
}

/// Velocity at a point, or `None` when `|xi^T Du|` has dropped below the
/// stop threshold. The guard runs before any division, so the modified field
/// is never evaluated in the singular region.
fn velocity_at(
    map: &MapInstance,
    spec: &FlowSpec,
    sign: f64,
    point: &[f64],
) -> Result<Option<FieldEval>> {
    let (du, _) = map.second_order_at(point)?;
    let w = du.apply_transpose(&spec.direction);
    let w_norm = vec_norm(&w);
    if w_norm < spec.eps_stop {
        return Ok(None);
    }
    let scale = match spec.variant {
        FlowVariant::Plain => sign,
        FlowVariant::Modified => sign * du.frobenius_sq() / (w_norm * w_norm),
    };
    Ok(Some(FieldEval {
        velocity: w.iter().map(|v| scale * v).collect(),
    }))
}

enum StepOutcome {
    Advanced(Vec<f64>),
    Singular,
}

fn rk4_step(
    map: &MapInstance,
    spec: &FlowSpec,
    sign: f64,
    pos: &[f64],
    h: f64,
) -> Result<StepOutcome> {
    let n = pos.len();
    let probe = |base: &[f64], dir: &[f64], scale: f64| -> Vec<f64> {
        (0..n).map(|i| base[i] + scale * dir[i]).collect()
    };

    let Some(k1) = velocity_at(map, spec, sign, pos)? else {
        return Ok(StepOutcome::Singular);
    };
    let p2 = probe(pos, &k1.velocity, 0.5 * h);
    let Some(k2) = velocity_at(map, spec, sign, &p2)? else {
        return Ok(StepOutcome::Singular);
    };
    let p3 = probe(pos, &k2.velocity, 0.5 * h);
    let Some(k3) = velocity_at(map, spec, sign, &p3)? else {
        return Ok(StepOutcome::Singular);
    };
    let p4 = probe(pos, &k3.velocity, h);
    let Some(k4) = velocity_at(map, spec, sign, &p4)? else {
        return Ok(StepOutcome::Singular);
    };

    let next: Vec<f64> = (0..n)
        .map(|i| {
            pos[i]
                + h / 6.0
                    * (k1.velocity[i]
                        + 2.0 * k2.velocity[i]
                        + 2.0 * k3.velocity[i]
                        + k4.velocity[i])
        })
        .collect();
    Ok(StepOutcome::Advanced(next))
}

fn inside(domain: &[(f64, f64)], point: &[f64]) -> bool {
    point
        .iter()
        .zip(domain)
        .all(|(&x, &(lo, hi))| x >= lo && x <= hi)
}

fn sample_at(
    map: &MapInstance,
    spec: &FlowSpec,
    t: f64,
    pos: Vec<f64>,
    u: &[f64],
) -> Result<FlowSample> {
    let (du, _) = map.second_order_at(&pos)?;
    let w = du.apply_transpose(&spec.direction);
    Ok(FlowSample {
        t,
        position: pos,
        du_norm_sq: du.frobenius_sq(),
        xi_dot_u: vec_dot(&spec.direction, u),
        xi_du_norm: vec_norm(&w),
    })
}

/// Integrate one branch (`sign = +1` forward, `-1` backward); returns samples
/// at `t = sign * k * dt` for `k = 1..=steps` plus the branch termination.
fn integrate_branch(
    map: &MapInstance,
    domain: &[(f64, f64)],
    spec: &FlowSpec,
    sign: f64,
    steps: usize,
    u_start: &[f64],
) -> Result<(Vec<FlowSample>, Termination)> {
    let mut samples = Vec::new();
    let mut pos = spec.start.clone();
    let mut u = u_start.to_vec();
    for k in 1..=steps {
        match rk4_step(map, spec, sign, &pos, spec.dt)? {
            StepOutcome::Singular => return Ok((samples, Termination::StoppedSingular)),
            StepOutcome::Advanced(next) => {
                if !inside(domain, &next) {
                    return Ok((samples, Termination::LeftDomain));
                }
                let delta = map.value_delta(&pos, &next)?;
                for (ui, di) in u.iter_mut().zip(&delta) {
                    *ui += di;
                }
                pos = next;
                samples.push(sample_at(
                    map,
                    spec,
                    sign * k as f64 * spec.dt,
                    pos.clone(),
                    &u,
                )?);
            }
        }
    }
    Ok((samples, Termination::Completed))
}

fn validate_spec(map: &MapInstance, domain: &[(f64, f64)], spec: &FlowSpec) -> Result<()> {
    let (out_dim, dim) = map.dims();
    if spec.start.len() != dim {
        return Err(Error::InvalidFlow(format!(
            "start point has {} coordinates, map domain is R^{dim}",
            spec.start.len()
        )));
    }
    if spec.direction.len() != out_dim {
        return Err(Error::InvalidFlow(format!(
            "direction has {} components, map target is R^{out_dim}",
            spec.direction.len()
        )));
    }
    let norm = vec_norm(&spec.direction);
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidFlow(format!(
            "direction must be unit length, |xi| = {norm}"
        )));
    }
    if !(spec.t_min < 0.0 && spec.t_max > 0.0) {
        return Err(Error::InvalidFlow(format!(
            "time span must straddle zero, got [{}, {}]",
            spec.t_min, spec.t_max
        )));
    }
    if !spec.dt.is_finite() || spec.dt <= 0.0 || spec.dt > (spec.t_max - spec.t_min) / 10.0 {
        return Err(Error::InvalidFlow(format!(
            "step {} must be positive and at most a tenth of the span",
            spec.dt
        )));
    }
    if !spec.eps_stop.is_finite() || spec.eps_stop <= 0.0 {
        return Err(Error::InvalidFlow(format!(
            "eps_stop must be positive, got {}",
            spec.eps_stop
        )));
    }
    if domain.len() != dim || !inside(domain, &spec.start) {
        return Err(Error::InvalidFlow(
            "start point must lie inside the domain box".into(),
        ));
    }
    Ok(())
}

/// Integrate the configured flow over `[t_min, 0]` and `[0, t_max]` from the
/// same start, stopping a branch when the drive field becomes singular or the
/// trajectory leaves the domain box.
pub fn integrate_flow(
    map: &MapInstance,
    domain: &[(f64, f64)],
    spec: &FlowSpec,
) -> Result<FlowTrajectory> {
    validate_spec(map, domain, spec)?;

    let (start_du, _) = map.second_order_at(&spec.start)?;
    let w0 = start_du.apply_transpose(&spec.direction);
    let w0_norm = vec_norm(&w0);
    if spec.variant == FlowVariant::Modified && w0_norm <= spec.eps_stop {
        return Err(Error::SingularStart {
            measured: w0_norm,
            eps_stop: spec.eps_stop,
        });
    }

    let u0 = map.value(&spec.start)?;
    let center = FlowSample {
        t: 0.0,
        position: spec.start.clone(),
        du_norm_sq: start_du.frobenius_sq(),
        xi_dot_u: vec_dot(&spec.direction, &u0),
        xi_du_norm: w0_norm,
    };

    let forward_steps = (spec.t_max / spec.dt + 1e-9).floor() as usize;
    let backward_steps = (-spec.t_min / spec.dt + 1e-9).floor() as usize;

    let (forward, forward_termination) =
        integrate_branch(map, domain, spec, 1.0, forward_steps, &u0)?;
    let (backward, backward_termination) =
        integrate_branch(map, domain, spec, -1.0, backward_steps, &u0)?;

    let mut samples: Vec<FlowSample> = backward.into_iter().rev().collect();
    samples.push(center);
    samples.extend(forward);

    let termination = match (forward_termination, backward_termination) {
        (Termination::StoppedSingular, _) | (_, Termination::StoppedSingular) => {
            Termination::StoppedSingular
        }
        (Termination::LeftDomain, _) | (_, Termination::LeftDomain) => Termination::LeftDomain,
        _ => Termination::Completed,
    };

    let diagnostics = diagnostics_of(&samples, spec.dt, center_index(&samples));
    Ok(FlowTrajectory {
        variant: spec.variant,
        direction: spec.direction.clone(),
        dt: spec.dt,
        samples,
        termination,
        forward_termination,
        backward_termination,
        diagnostics,
    })
}

fn center_index(samples: &[FlowSample]) -> usize {
    samples
        .iter()
        .position(|s| s.t == 0.0)
        .expect("trajectory always contains the t = 0 sample")
}

fn diagnostics_of(samples: &[FlowSample], dt: f64, center: usize) -> FlowDiagnostics {
    let reference = samples[center].du_norm_sq;
    let max_du_norm_sq_drift = samples
        .iter()
        .map(|s| (s.du_norm_sq - reference).abs())
        .fold(0.0, f64::max);

    let mut max_second_difference: f64 = 0.0;
    for w in samples.windows(3) {
        let second = w[2].xi_dot_u - 2.0 * w[1].xi_dot_u + w[0].xi_dot_u;
        max_second_difference = max_second_difference.max(second.abs());
    }

    let monotonicity_violations = samples
        .windows(2)
        .filter(|w| w[1].xi_dot_u < w[0].xi_dot_u - MONOTONE_SLACK)
        .count();

    FlowDiagnostics {
        max_du_norm_sq_drift,
        max_second_difference,
        max_second_difference_over_dt_sq: max_second_difference / (dt * dt),
        monotonicity_violations,
    }
}

/// Check the energy-rate identity along a trajectory: the centered time
/// derivative of `|Du(gamma)|^2 / 2` against the chain-rule right side
/// evaluated from analytic jets (`c * xi^T Du . D(|Du|^2 / 2)` with `c` the
/// variant's velocity rescaling). Returns the largest absolute defect.
pub fn check_identity_energy_rate(map: &MapInstance, traj: &FlowTrajectory) -> Result<f64> {
    if traj.samples.len() < 5 {
        return Err(Error::TooFewSamples {
            got: traj.samples.len(),
            need: 5,
        });
    }
    let dt = traj.dt;
    let mut max_defect: f64 = 0.0;
    for w in traj.samples.windows(3) {
        let lhs = 0.5 * (w[2].du_norm_sq - w[0].du_norm_sq) / (2.0 * dt);
        let rhs = energy_rate_rhs_at(map, traj, &w[1].position)?;
        max_defect = max_defect.max((lhs - rhs).abs());
    }
    Ok(max_defect)
}

/// Chain-rule right side of the energy-rate identity at a point:
/// `c * xi^T Du . D(|Du|^2 / 2)` with `c` the variant's velocity rescaling.
pub fn energy_rate_rhs_at(
    map: &MapInstance,
    traj: &FlowTrajectory,
    position: &[f64],
) -> Result<f64> {
    let (du, d2u) = map.second_order_at(position)?;
    let (out_dim, dim) = (du.rows(), du.cols());
    let mut grad_half_norm = vec![0.0; dim];
    for j in 0..dim {
        let mut s = 0.0;
        for b in 0..out_dim {
            for i in 0..dim {
                s += du[(b, i)] * d2u[(b, i, j)];
            }
        }
        grad_half_norm[j] = s;
    }
    let xi_du = du.apply_transpose(&traj.direction);
    let scale = match traj.variant {
        FlowVariant::Plain => 1.0,
        FlowVariant::Modified => {
            let w_sq = vec_dot(&xi_du, &xi_du);
            du.frobenius_sq() / w_sq
        }
    };
    Ok(scale * vec_dot(&xi_du, &grad_half_norm))
}

/// Count of sample pairs along which `xi . u` decreases beyond slack.
pub fn check_monotone_increasing(traj: &FlowTrajectory) -> usize {
    traj.samples
        .windows(2)
        .filter(|w| w[1].xi_dot_u < w[0].xi_dot_u - MONOTONE_SLACK)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kprofile::KProfileSpec;
    use crate::map::{FamilySpec, MapSpec, ScalarProfileSpec};

    const BOX: [(f64, f64); 2] = [(-3.2, 3.2), (-3.2, 3.2)];

    fn flow_spec(variant: FlowVariant, start: [f64; 2], xi: [f64; 2]) -> FlowSpec {
        FlowSpec {
            variant,
            start: start.to_vec(),
            direction: xi.to_vec(),
            t_min: -1.0,
            t_max: 1.0,
            dt: DEFAULT_FLOW_DT,
            eps_stop: DEFAULT_EPS_STOP,
        }
    }

    fn rank1_linear(xi: [f64; 2], w: [f64; 2]) -> MapInstance {
        MapSpec::new(FamilySpec::Rank1Scalar {
            offset: vec![0.0, 0.0],
            direction: xi.to_vec(),
            profile: ScalarProfileSpec::Linear {
                weights: w.to_vec(),
                constant: 0.0,
            },
        })
        .build()
        .unwrap()
    }

    #[test]
    fn plain_flow_on_affine_rank_one_is_exact() {
        let xi = [0.6, 0.8];
        let w = [0.3, -0.2];
        let map = rank1_linear(xi, w);
        let spec = flow_spec(FlowVariant::Plain, [0.5, 0.5], xi);
        let traj = integrate_flow(&map, &BOX, &spec).unwrap();
        assert_eq!(traj.termination, Termination::Completed);

        // gamma(t) = x + t w exactly (constant velocity field)
        for s in &traj.samples {
            assert!((s.position[0] - (0.5 + s.t * w[0])).abs() <= 1e-12);
            assert!((s.position[1] - (0.5 + s.t * w[1])).abs() <= 1e-12);
        }
        assert!(traj.diagnostics.max_du_norm_sq_drift <= 1e-12);
        assert_eq!(traj.diagnostics.monotonicity_violations, 0);

        // xi . u(gamma(t)) is affine with slope |w|^2
        let slope_expected = w[0] * w[0] + w[1] * w[1];
        let first = traj.samples.first().unwrap();
        let last = traj.samples.last().unwrap();
        let slope = (last.xi_dot_u - first.xi_dot_u) / (last.t - first.t);
        assert!((slope - slope_expected).abs() <= 1e-12);
        assert!(traj.diagnostics.max_second_difference_over_dt_sq <= 1e-6);
    }

    #[test]
    fn conservation_is_trivial_on_constant_norm_families() {
        let map = MapSpec::new(FamilySpec::Exp2).build().unwrap();
        for variant in [FlowVariant::Plain, FlowVariant::Modified] {
            let spec = flow_spec(variant, [0.3, 0.7], [1.0, 0.0]);
            let traj = integrate_flow(&map, &BOX, &spec).unwrap();
            assert!(
                traj.diagnostics.max_du_norm_sq_drift <= 1e-10,
                "drift {}",
                traj.diagnostics.max_du_norm_sq_drift
            );
        }
    }

    #[test]
    fn modified_flow_slope_is_affine_on_profile_family() {
        let map = MapSpec::new(FamilySpec::Kprofile {
            profile: KProfileSpec::Plateau2,
        })
        .build()
        .unwrap();
        let spec = flow_spec(FlowVariant::Modified, [0.5, -0.8], [0.8, 0.6]);
        let traj = integrate_flow(&map, &BOX, &spec).unwrap();
        assert!(traj.samples.len() > 100);
        assert!(
            traj.diagnostics.max_second_difference_over_dt_sq <= 1e-4,
            "second difference {}",
            traj.diagnostics.max_second_difference_over_dt_sq
        );
        // slope of the affine profile equals the conserved |Du|^2 = 2
        let mid = traj.samples.len() / 2;
        let slope =
            (traj.samples[mid + 1].xi_dot_u - traj.samples[mid - 1].xi_dot_u) / (2.0 * traj.dt);
        assert!((slope - 2.0).abs() <= 1e-6, "slope {slope}");
    }

    #[test]
    fn energy_rate_identity_on_affine_and_exp2() {
        let xi = [0.6, 0.8];
        let map = rank1_linear(xi, [0.4, 0.1]);
        let traj =
            integrate_flow(&map, &BOX, &flow_spec(FlowVariant::Plain, [0.0, 0.0], xi)).unwrap();
        assert!(check_identity_energy_rate(&map, &traj).unwrap() <= 1e-14);

        let map = MapSpec::new(FamilySpec::Exp2).build().unwrap();
        let traj = integrate_flow(
            &map,
            &BOX,
            &flow_spec(FlowVariant::Plain, [0.3, 0.7], [1.0, 0.0]),
        )
        .unwrap();
        assert!(check_identity_energy_rate(&map, &traj).unwrap() <= 1e-8);
    }

    #[test]
    fn energy_rate_identity_on_non_solution_with_nonzero_sides() {
        let map = MapSpec::new(FamilySpec::Quadratic {
            coeffs: vec![1.0, 1.0],
        })
        .build()
        .unwrap();
        let spec = FlowSpec {
            t_min: -0.5,
            t_max: 0.5,
            ..flow_spec(FlowVariant::Plain, [1.0, 0.5], [0.6, 0.8])
        };
        let traj = integrate_flow(&map, &BOX, &spec).unwrap();
        // both sides are genuinely nonzero along this trajectory
        assert!(traj.diagnostics.max_du_norm_sq_drift > 1e-2);
        let defect = check_identity_energy_rate(&map, &traj).unwrap();
        assert!(defect <= 1e-6, "defect {defect}");

        // closed-form check of the chain-rule side: the plain flow of the
        // diagonal quadratic has xi^T Du = (xi_1 x, xi_2 y) and
        // D(|Du|^2/2) = (x, y), so the rate is xi_1 x^2 + xi_2 y^2
        let rhs = energy_rate_rhs_at(&map, &traj, &[1.0, 0.5]).unwrap();
        let expected = 0.6 * 1.0 + 0.8 * 0.25;
        assert!((rhs - expected).abs() <= 1e-14, "rhs {rhs} vs {expected}");
        assert!(rhs.abs() > 0.5);
    }

    #[test]
    fn reversed_trajectory_trips_the_monotonicity_counter() {
        let xi = [1.0, 0.0];
        let map = rank1_linear(xi, [0.5, 0.0]);
        let traj =
            integrate_flow(&map, &BOX, &flow_spec(FlowVariant::Plain, [0.0, 0.0], xi)).unwrap();
        assert_eq!(check_monotone_increasing(&traj), 0);

        let mut reversed = traj.clone();
        reversed.samples.reverse();
        let violations = check_monotone_increasing(&reversed);
        assert_eq!(violations, reversed.samples.len() - 1);
    }

    #[test]
    fn step_halving_shows_at_least_third_order() {
        // plain flow of the diagonal quadratic has the exact solution
        // x(t) = x0 exp(t) along the first axis
        let map = MapSpec::new(FamilySpec::Quadratic {
            coeffs: vec![1.0, 1.0],
        })
        .build()
        .unwrap();
        let endpoint_error = |dt: f64| {
            let spec = FlowSpec {
                variant: FlowVariant::Plain,
                start: vec![1.0, 0.0],
                direction: vec![1.0, 0.0],
                t_min: -1.0,
                t_max: 1.0,
                dt,
                eps_stop: 1e-12,
            };
            let traj = integrate_flow(&map, &BOX, &spec).unwrap();
            let last = traj.samples.last().unwrap();
            assert_eq!(traj.forward_termination, Termination::Completed);
            (last.position[0] - last.t.exp()).abs()
        };
        let e1 = endpoint_error(2e-2);
        let e2 = endpoint_error(1e-2);
        assert!(e1 / e2 >= 8.0, "ratio {} ({} vs {})", e1 / e2, e1, e2);
    }

    #[test]
    fn singular_region_stops_cleanly_without_nan() {
        // u = xi |x|^2/2: the drive field is x itself, so the backward branch
        // contracts into the singular set around the origin
        let map = MapSpec::new(FamilySpec::Rank1Scalar {
            offset: vec![0.0, 0.0],
            direction: vec![1.0, 0.0],
            profile: ScalarProfileSpec::HalfSquareNorm { dim: 2 },
        })
        .build()
        .unwrap();
        let spec = FlowSpec {
            variant: FlowVariant::Modified,
            start: vec![0.5, 0.0],
            direction: vec![1.0, 0.0],
            t_min: -40.0,
            t_max: 0.5,
            dt: 1e-2,
            eps_stop: 1e-3,
        };
        let traj = integrate_flow(&map, &BOX, &spec).unwrap();
        assert_eq!(traj.backward_termination, Termination::StoppedSingular);
        for s in &traj.samples {
            assert!(s.position.iter().all(|v| v.is_finite()));
            assert!(s.du_norm_sq.is_finite() && s.xi_dot_u.is_finite());
        }
    }

    #[test]
    fn leaving_the_box_terminates_the_branch() {
        let xi = [1.0, 0.0];
        let map = rank1_linear(xi, [10.0, 0.0]);
        let traj =
            integrate_flow(&map, &BOX, &flow_spec(FlowVariant::Plain, [0.0, 0.0], xi)).unwrap();
        assert_eq!(traj.forward_termination, Termination::LeftDomain);
        assert_eq!(traj.backward_termination, Termination::LeftDomain);
        assert_eq!(traj.termination, Termination::LeftDomain);
    }

    #[test]
    fn modified_flow_rejects_singular_start_with_measurement() {
        let map = MapSpec::new(FamilySpec::Rank1Scalar {
            offset: vec![0.0, 0.0],
            direction: vec![1.0, 0.0],
            profile: ScalarProfileSpec::HalfSquareNorm { dim: 2 },
        })
        .build()
        .unwrap();
        let spec = flow_spec(FlowVariant::Modified, [0.0, 0.0], [1.0, 0.0]);
        match integrate_flow(&map, &BOX, &spec) {
            Err(Error::SingularStart { measured, .. }) => assert!(measured <= 1e-12),
            other => panic!("expected singular-start rejection, got {other:?}"),
        }
    }

    #[test]
    fn spec_validation_rejects_bad_input() {
        let map = MapSpec::new(FamilySpec::Exp2).build().unwrap();
        let good = flow_spec(FlowVariant::Plain, [0.0, 0.0], [1.0, 0.0]);

        let mut bad = good.clone();
        bad.direction = vec![1.0, 1.0];
        assert!(integrate_flow(&map, &BOX, &bad).is_err());

        let mut bad = good.clone();
        bad.dt = 0.5; // more than a tenth of the span
        assert!(integrate_flow(&map, &BOX, &bad).is_err());

        let mut bad = good.clone();
        bad.t_min = 0.1;
        assert!(integrate_flow(&map, &BOX, &bad).is_err());

        let mut bad = good;
        bad.start = vec![5.0, 0.0];
        assert!(integrate_flow(&map, &BOX, &bad).is_err());
    }
}
