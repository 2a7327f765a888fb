//! Direction-angle profiles `K: R -> R` with `sup|K| < pi/2`, C1 with
//! Lipschitz derivative.
//!
//! A profile is built from flat plateaus joined by strictly monotone C2
//! smoothstep ramps, with monotone long-span tails beyond the outermost
//! plateaus. The tails keep the profile non-constant outside the declared
//! plateaus (so rank-one phases of the induced map are exactly the plateau
//! squares) while respecting the global `pi/2` bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

use std::f64::consts::FRAC_PI_2;

/// One flat interval of a piecewise profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauInterval {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

/// Declarative profile description (the JSON-facing side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KProfileSpec {
    /// Globally constant angle.
    Constant { value: f64 },
    /// Two-level default: values -0.4 and +0.4 on [-2,-1] and [1,2], width 0.5.
    Plateau2,
    /// Three-level default: adds a middle level 0.0 on [-0.3, 0.3].
    Plateau3,
    /// Gaussian bump `A exp(-((t-c)/s)^2)`; flat nowhere except the apex.
    SmoothBump {
        #[serde(default = "default_bump_amplitude")]
        amplitude: f64,
        #[serde(default)]
        center: f64,
        #[serde(default = "default_bump_scale")]
        scale: f64,
    },
    /// Explicit plateau list with transition width for the boundary tails.
    UserPiecewise {
        intervals: Vec<PlateauInterval>,
        width: f64,
    },
}

fn default_bump_amplitude() -> f64 {
    0.4
}

fn default_bump_scale() -> f64 {
    1.5
}

/// Default transition width for the named plateau profiles.
pub const DEFAULT_WIDTH: f64 = 0.5;

pub fn plateau2_intervals() -> Vec<PlateauInterval> {
    vec![
        PlateauInterval {
            start: -2.0,
            end: -1.0,
            value: -0.4,
        },
        PlateauInterval {
            start: 1.0,
            end: 2.0,
            value: 0.4,
        },
    ]
}

pub fn plateau3_intervals() -> Vec<PlateauInterval> {
    vec![
        PlateauInterval {
            start: -2.0,
            end: -1.0,
            value: -0.4,
        },
        PlateauInterval {
            start: -0.3,
            end: 0.3,
            value: 0.0,
        },
        PlateauInterval {
            start: 1.0,
            end: 2.0,
            value: 0.4,
        },
    ]
}

// ── compiled form ───────────────────────────────────────────────────

#[derive(Debug, Clone)]
enum Segment {
    Constant {
        value: f64,
    },
    Bump {
        amplitude: f64,
        center: f64,
        scale: f64,
    },
    Plateau {
        value: f64,
    },
    /// Smoothstep from `(a, v0)` to `(b, v1)`; value and first two
    /// derivatives vanish at both ends, strictly monotone inside when
    /// `v0 != v1`.
    Ramp {
        a: f64,
        b: f64,
        v0: f64,
        v1: f64,
        beta: f64,
    },
    /// Monotone branch `value -/+ dir * amp * g((edge - t)/width)` with the
    /// saturating shape `g(s) = s^3/(1+s^3)`: C2 at the junction, strictly
    /// monotone on the whole half-line (never exactly flat), asymptoting to
    /// the amplitude inside the `pi/2` band.
    LeftTail {
        edge: f64,
        value: f64,
        amp: f64,
        width: f64,
        dir: f64,
    },
    RightTail {
        edge: f64,
        value: f64,
        amp: f64,
        width: f64,
        dir: f64,
    },
}

/// `(g, g')` of the saturating tail shape `g(s) = s^3/(1+s^3)` for `s >= 0`.
fn tail_shape(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    let s3 = s * s * s;
    let denom = 1.0 + s3;
    (s3 / denom, 3.0 * s * s / (denom * denom))
}

/// Largest off-center weight used in the smoothstep derivative
/// `s'(tau) ~ tau^2 (1-tau)^2 (1 + beta (tau - 1/2)^2)`.
const MAX_BETA: f64 = 100.0;

/// Cap on the onset curvature density `a(beta) |dv| / len^3` of a ramp,
/// where `a(beta)` is the leading coefficient of `s ~ a tau^3`. The same
/// density controls two competing needs: large enough that the induced
/// gradient's numerical rank recovers within a fraction of a grid cell of a
/// plateau edge, small enough that the third-derivative jump at the junction
/// does not degrade flow-trajectory accuracy. Short steep ramps get their
/// weight reduced to respect the cap.
const ONSET_DENSITY_CAP: f64 = 8.0;

/// Leading onset coefficient of the smoothstep: `s(tau) ~ a(beta) tau^3`.
fn onset_coefficient(beta: f64) -> f64 {
    (280.0 + 70.0 * beta) / (28.0 + beta)
}

/// Off-center weight for a transition of height `|dv|` over length `len`,
/// the largest weight up to `MAX_BETA` respecting the density cap.
fn beta_for(dv_abs: f64, len: f64) -> f64 {
    if dv_abs == 0.0 {
        return 0.0;
    }
    let density_at_max = onset_coefficient(MAX_BETA) * dv_abs / (len * len * len);
    if density_at_max <= ONSET_DENSITY_CAP {
        return MAX_BETA;
    }
    let a_target = ONSET_DENSITY_CAP * len * len * len / dv_abs;
    if a_target <= 10.0 {
        0.0
    } else {
        28.0 * (a_target - 10.0) / (70.0 - a_target)
    }
}

/// `(s, s')` of the monotone C2 smoothstep on `[0, 1]`, clamped to its
/// endpoint values outside.
fn smoothstep(tau: f64, beta: f64) -> (f64, f64) {
    if tau <= 0.0 {
        return (0.0, 0.0);
    }
    if tau >= 1.0 {
        return (1.0, 0.0);
    }
    let c = 840.0 / (28.0 + beta);
    let half = tau - 0.5;
    let ds = c * tau * tau * (1.0 - tau) * (1.0 - tau) * (1.0 + beta * half * half);
    let t3 = tau * tau * tau;
    let t4 = t3 * tau;
    let t5 = t4 * tau;
    let t6 = t5 * tau;
    let t7 = t6 * tau;
    let base = t3 / 3.0 - t4 / 2.0 + t5 / 5.0;
    let weighted = t7 / 7.0 - t6 / 2.0 + 0.65 * t5 - 0.375 * t4 + t3 / 12.0;
    (c * (base + beta * weighted), ds)
}

impl Segment {
    fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            Segment::Constant { value } => (value, 0.0),
            Segment::Bump {
                amplitude,
                center,
                scale,
            } => {
                let z = (t - center) / scale;
                let e = (-z * z).exp();
                (amplitude * e, amplitude * e * (-2.0 * z / scale))
            }
            Segment::Plateau { value } => (value, 0.0),
            Segment::Ramp { a, b, v0, v1, beta } => {
                let len = b - a;
                let (s, ds) = smoothstep((t - a) / len, beta);
                (v0 + (v1 - v0) * s, (v1 - v0) * ds / len)
            }
            Segment::LeftTail {
                edge,
                value,
                amp,
                width,
                dir,
            } => {
                let (g, dg) = tail_shape((edge - t) / width);
                (value - dir * amp * g, dir * amp * dg / width)
            }
            Segment::RightTail {
                edge,
                value,
                amp,
                width,
                dir,
            } => {
                let (g, dg) = tail_shape((t - edge) / width);
                (value + dir * amp * g, dir * amp * dg / width)
            }
        }
    }

    /// Supremum of |K| over the segment's domain of use.
    fn sup_abs(&self) -> f64 {
        match *self {
            Segment::Constant { value } | Segment::Plateau { value } => value.abs(),
            Segment::Bump { amplitude, .. } => amplitude.abs(),
            Segment::Ramp { v0, v1, .. } => v0.abs().max(v1.abs()),
            Segment::LeftTail {
                value, amp, dir, ..
            } => value.abs().max((value - dir * amp).abs()),
            Segment::RightTail {
                value, amp, dir, ..
            } => value.abs().max((value + dir * amp).abs()),
        }
    }

    fn constant_value(&self) -> Option<f64> {
        match *self {
            Segment::Constant { value } | Segment::Plateau { value } => Some(value),
            _ => None,
        }
    }
}

/// Validated, evaluable profile.
#[derive(Debug, Clone)]
pub struct KProfile {
    spec: KProfileSpec,
    /// Segment boundaries, strictly increasing; segment `i` covers
    /// `(boundaries[i-1], boundaries[i])`.
    boundaries: Vec<f64>,
    segments: Vec<Segment>,
}

impl KProfile {
    pub fn new(spec: KProfileSpec) -> Result<Self> {
        let (boundaries, segments) = match &spec {
            KProfileSpec::Constant { value } => {
                check_band(*value)?;
                (vec![], vec![Segment::Constant { value: *value }])
            }
            KProfileSpec::SmoothBump {
                amplitude,
                center,
                scale,
            } => {
                check_band(*amplitude)?;
                if !scale.is_finite() || *scale <= 0.0 || !center.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "smooth-bump needs finite center and scale > 0, got center {center}, scale {scale}"
                    )));
                }
                (
                    vec![],
                    vec![Segment::Bump {
                        amplitude: *amplitude,
                        center: *center,
                        scale: *scale,
                    }],
                )
            }
            KProfileSpec::Plateau2 => compile_piecewise(&plateau2_intervals(), DEFAULT_WIDTH)?,
            KProfileSpec::Plateau3 => compile_piecewise(&plateau3_intervals(), DEFAULT_WIDTH)?,
            KProfileSpec::UserPiecewise { intervals, width } => {
                compile_piecewise(intervals, *width)?
            }
        };
        Ok(Self {
            spec,
            boundaries,
            segments,
        })
    }

    pub fn spec(&self) -> &KProfileSpec {
        &self.spec
    }

    /// Points where the closed-form expression changes (empty for the
    /// analytic kinds).
    pub fn breakpoints(&self) -> &[f64] {
        &self.boundaries
    }

    /// `(K(t), K'(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let idx = self.boundaries.partition_point(|&b| b < t);
        self.segments[idx].eval(t)
    }

    /// One-sided evaluation at `t`; differs from `eval` only exactly at a
    /// breakpoint, where it selects the segment on the requested side.
    pub fn eval_sided(&self, t: f64, from_right: bool) -> (f64, f64) {
        let idx = if from_right {
            self.boundaries.partition_point(|&b| b <= t)
        } else {
            self.boundaries.partition_point(|&b| b < t)
        };
        self.segments[idx].eval(t)
    }

    /// Rigorous bound for `sup |K|`; strictly below `pi/2` by construction.
    pub fn sup_abs_bound(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.sup_abs())
            .fold(0.0, f64::max)
    }

    /// `(int cos K, int sin K)` over `[from, to]`, split at breakpoints, with
    /// plateau pieces integrated in closed form and the rest by adaptive
    /// Simpson to absolute tolerance `tol` per component.
    pub fn direction_integral(&self, from: f64, to: f64, tol: f64) -> Result<(f64, f64)> {
        if from == to {
            return Ok((0.0, 0.0));
        }
        let (lo, hi, sign) = if from < to {
            (from, to, 1.0)
        } else {
            (to, from, -1.0)
        };

        let mut cuts = vec![lo];
        for &b in &self.boundaries {
            if b > lo && b < hi {
                cuts.push(b);
            }
        }
        cuts.push(hi);

        let piece_tol = tol / (cuts.len() - 1) as f64;
        let mut total = (0.0, 0.0);
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let mid = 0.5 * (a + b);
            let idx = self.boundaries.partition_point(|&c| c < mid);
            if let Some(v) = self.segments[idx].constant_value() {
                total.0 += v.cos() * (b - a);
                total.1 += v.sin() * (b - a);
            } else {
                total.0 += adaptive_simpson(|t| self.eval(t).0.cos(), a, b, piece_tol)?;
                total.1 += adaptive_simpson(|t| self.eval(t).0.sin(), a, b, piece_tol)?;
            }
        }
        Ok((sign * total.0, sign * total.1))
    }
}

fn check_band(value: f64) -> Result<()> {
    if !value.is_finite() || value.abs() >= FRAC_PI_2 {
        return Err(Error::InvalidSpec(format!(
            "profile value {value} outside the open band (-pi/2, pi/2)"
        )));
    }
    Ok(())
}

fn compile_piecewise(
    intervals: &[PlateauInterval],
    width: f64,
) -> Result<(Vec<f64>, Vec<Segment>)> {
    if intervals.is_empty() {
        return Err(Error::InvalidSpec(
            "piecewise profile needs at least one plateau".into(),
        ));
    }
    if !width.is_finite() || width <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "transition width must be positive, got {width}"
        )));
    }
    for iv in intervals {
        check_band(iv.value)?;
        if !iv.start.is_finite() || !iv.end.is_finite() || iv.start >= iv.end {
            return Err(Error::InvalidSpec(format!(
                "bad plateau interval [{}, {}]",
                iv.start, iv.end
            )));
        }
    }
    for pair in intervals.windows(2) {
        if pair[0].end >= pair[1].start {
            return Err(Error::InvalidSpec(format!(
                "plateau intervals must be separated by a gap: [{}, {}] then [{}, {}]",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )));
        }
    }

    let first = intervals[0];
    let last = intervals[intervals.len() - 1];
    let dir = if last.value >= first.value { 1.0 } else { -1.0 };
    // Half of the distance to the band edge keeps the tail asymptote strictly
    // inside (-pi/2, pi/2).
    let amp_left = 0.5 * (FRAC_PI_2 - first.value.abs());
    let amp_right = 0.5 * (FRAC_PI_2 - last.value.abs());

    let mut boundaries = Vec::with_capacity(2 * intervals.len());
    let mut segments = Vec::with_capacity(2 * intervals.len() + 1);

    segments.push(Segment::LeftTail {
        edge: first.start,
        value: first.value,
        amp: amp_left,
        width,
        dir,
    });
    for (i, iv) in intervals.iter().enumerate() {
        boundaries.push(iv.start);
        segments.push(Segment::Plateau { value: iv.value });
        boundaries.push(iv.end);
        if let Some(next) = intervals.get(i + 1) {
            segments.push(Segment::Ramp {
                a: iv.end,
                b: next.start,
                v0: iv.value,
                v1: next.value,
                beta: beta_for((next.value - iv.value).abs(), next.start - iv.end),
            });
        }
    }
    segments.push(Segment::RightTail {
        edge: last.end,
        value: last.value,
        amp: amp_right,
        width,
        dir,
    });

    Ok((boundaries, segments))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plateau2() -> KProfile {
        KProfile::new(KProfileSpec::Plateau2).unwrap()
    }

    #[test]
    fn plateau_values_are_exact_on_intervals() {
        let k = plateau2();
        for t in [-2.0, -1.7, -1.0] {
            let (v, dv) = k.eval(t);
            assert_eq!(v, -0.4);
            assert_eq!(dv, 0.0);
        }
        for t in [1.0, 1.5, 2.0] {
            let (v, dv) = k.eval(t);
            assert_eq!(v, 0.4);
            assert_eq!(dv, 0.0);
        }
    }

    #[test]
    fn c1_limits_agree_at_every_breakpoint() {
        for spec in [
            KProfileSpec::Plateau2,
            KProfileSpec::Plateau3,
            KProfileSpec::UserPiecewise {
                intervals: vec![
                    PlateauInterval {
                        start: 0.0,
                        end: 1.0,
                        value: 0.3,
                    },
                    PlateauInterval {
                        start: 2.5,
                        end: 3.0,
                        value: -0.2,
                    },
                ],
                width: 0.25,
            },
        ] {
            let k = KProfile::new(spec).unwrap();
            for &b in k.breakpoints() {
                let (vl, dl) = k.eval_sided(b, false);
                let (vr, dr) = k.eval_sided(b, true);
                assert!((vl - vr).abs() <= 1e-12, "K jump {} at {b}", vl - vr);
                assert!((dl - dr).abs() <= 1e-12, "K' jump {} at {b}", dl - dr);
            }
        }
    }

    #[test]
    fn strictly_monotone_outside_plateaus() {
        let k = plateau2();
        // ramp interior
        for t in [-0.99, -0.5, 0.0, 0.5, 0.99] {
            assert!(k.eval(t).1 > 0.0, "ramp derivative at {t}");
        }
        // tails
        for t in [-3.2, -2.5, -2.001] {
            assert!(k.eval(t).1 > 0.0, "left tail derivative at {t}");
        }
        for t in [2.001, 2.5, 3.2] {
            assert!(k.eval(t).1 > 0.0, "right tail derivative at {t}");
        }
    }

    #[test]
    fn sup_bound_stays_inside_band() {
        for spec in [
            KProfileSpec::Plateau2,
            KProfileSpec::Plateau3,
            KProfileSpec::SmoothBump {
                amplitude: 0.4,
                center: 0.0,
                scale: 1.5,
            },
            KProfileSpec::Constant { value: -1.5 },
        ] {
            let k = KProfile::new(spec).unwrap();
            assert!(k.sup_abs_bound() < FRAC_PI_2);
        }
    }

    #[test]
    fn rejects_out_of_band_and_malformed_input() {
        assert!(KProfile::new(KProfileSpec::Constant { value: 2.0 }).is_err());
        assert!(KProfile::new(KProfileSpec::UserPiecewise {
            intervals: vec![],
            width: 0.5
        })
        .is_err());
        assert!(KProfile::new(KProfileSpec::UserPiecewise {
            intervals: vec![PlateauInterval {
                start: 0.0,
                end: 1.0,
                value: 0.1
            }],
            width: 0.0
        })
        .is_err());
        assert!(KProfile::new(KProfileSpec::UserPiecewise {
            intervals: vec![
                PlateauInterval {
                    start: 0.0,
                    end: 1.0,
                    value: 0.1
                },
                PlateauInterval {
                    start: 1.0,
                    end: 2.0,
                    value: 0.2
                }
            ],
            width: 0.5
        })
        .is_err());
    }

    #[test]
    fn smooth_bump_defaults_fill_in_from_json() {
        let spec: KProfileSpec = serde_json::from_str(r#"{"kind":"smooth-bump"}"#).unwrap();
        assert_eq!(
            spec,
            KProfileSpec::SmoothBump {
                amplitude: 0.4,
                center: 0.0,
                scale: 1.5
            }
        );
        let k = KProfile::new(spec).unwrap();
        assert!((k.eval(0.0).0 - 0.4).abs() <= 1e-15);
        assert_eq!(k.eval(0.0).1, 0.0);
    }

    #[test]
    fn direction_integral_closed_form_on_plateau() {
        let k = plateau2();
        let (c, s) = k.direction_integral(1.25, 1.75, 1e-12).unwrap();
        assert!((c - 0.5 * 0.4f64.cos()).abs() <= 1e-15);
        assert!((s - 0.5 * 0.4f64.sin()).abs() <= 1e-15);
    }

    #[test]
    fn direction_integral_is_additive_and_antisymmetric() {
        let k = plateau2();
        let whole = k.direction_integral(-3.0, 3.0, 1e-13).unwrap();
        let a = k.direction_integral(-3.0, 0.37, 1e-13).unwrap();
        let b = k.direction_integral(0.37, 3.0, 1e-13).unwrap();
        assert!((whole.0 - (a.0 + b.0)).abs() <= 1e-12);
        assert!((whole.1 - (a.1 + b.1)).abs() <= 1e-12);
        let rev = k.direction_integral(3.0, -3.0, 1e-13).unwrap();
        assert!((whole.0 + rev.0).abs() <= 1e-12);
        assert!((whole.1 + rev.1).abs() <= 1e-12);
    }
}
