//! Adaptive Simpson quadrature for smooth scalar integrands.

use crate::error::{Error, Result};

/// Subdivision depth cap; the integrands here are smooth and bounded, so the
/// cap is only ever hit on genuinely pathological input.
pub const MAX_DEPTH: u32 = 40;

/// Integrate `f` over `[a, b]` (allowing `a > b`) to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let flo = f(lo);
    let fhi = f(hi);
    let mid = 0.5 * (lo + hi);
    let fmid = f(mid);
    let whole = simpson(lo, hi, flo, fmid, fhi);
    let value = recurse(&f, lo, hi, flo, fmid, fhi, whole, tol, MAX_DEPTH)?;
    Ok(sign * value)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure {
            a,
            b,
            max_depth: MAX_DEPTH,
        });
    }
    let half_tol = 0.5 * tol;
    Ok(recurse(f, a, m, fa, flm, fm, left, half_tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, half_tol, depth - 1)?)
}
