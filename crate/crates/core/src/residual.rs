//! Residuals of the second-order system: the full operator, its tangential
//! and normal parts, the scalar and one-dimensional reductions, and grid
//! sweeps with sup-norm aggregation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::map::{Jet2, MapInstance};
use crate::tensor::{
    infinity_contraction, projection_from_svd, rank_from_singular_values, svd, vec_dot, vec_norm,
    Matrix, RankDecision,
};

/// Pointwise residual data.
///
/// `full` is the flat index-form contraction; `tangential` is
/// `Du . D(|Du|^2 / 2)` and `normal` is `|Du|^2 P Laplacian(u)` with `P` the
/// range-complement projection of the gradient. The two routes satisfy
/// `full = tangential + normal` up to rounding.
#[derive(Debug, Clone)]
pub struct ResidualSample {
    pub full: Vec<f64>,
    pub tangential: Vec<f64>,
    pub normal: Vec<f64>,
    pub du_norm_sq: f64,
    pub rank: RankDecision,
}

/// Evaluate the residual decomposition at one jet. The projection reuses the
/// rank thresholds, so near-interface points inherit the documented rank
/// tie-breaking.
pub fn residual_at(jet: &Jet2, tau_abs: f64, tau_rel: f64) -> Result<ResidualSample> {
    jet.validate()?;
    residual_from_derivatives(&jet.gradient, &jet.hessian, tau_abs, tau_rel)
}

pub(crate) fn residual_from_derivatives(
    du: &Matrix,
    d2u: &crate::tensor::Tensor3,
    tau_abs: f64,
    tau_rel: f64,
) -> Result<ResidualSample> {
    if !crate::tensor::thresholds_valid(tau_abs, tau_rel) {
        return Err(Error::InvalidThresholds { tau_abs, tau_rel });
    }
    let (out_dim, dim) = (du.rows(), du.cols());

    let decomposition = svd(du)?;
    let rank = rank_from_singular_values(decomposition.sigma.clone(), tau_abs, tau_rel);
    let projection = projection_from_svd(&decomposition, rank.rank, out_dim);
    let du_norm_sq = du.frobenius_sq();

    // tangential route: Du . D(|Du|^2 / 2)
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
    let tangential = du.apply(&grad_half_norm);

    // normal route: |Du|^2 P Laplacian(u)
    let laplacian = d2u.trace_inner();
    let normal: Vec<f64> = projection
        .apply(&laplacian)
        .into_iter()
        .map(|v| du_norm_sq * v)
        .collect();

    // independent flat summation of the same operator
    let full = infinity_contraction(du, &projection, d2u)?;

    Ok(ResidualSample {
        full,
        tangential,
        normal,
        du_norm_sq,
        rank,
    })
}

/// Scalar reduction `(Df (x) Df) : D2f` for jets with a one-dimensional
/// target; the normal coefficient vanishes identically there.
pub fn scalar_residual_at(jet: &Jet2) -> Result<f64> {
    if jet.out_dim() != 1 {
        return Err(Error::ShapeMismatch {
            expected: "jet with scalar target (N = 1)".into(),
            actual: format!("N = {}", jet.out_dim()),
        });
    }
    jet.validate()?;
    let dim = jet.in_dim();
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += jet.gradient[(0, i)] * jet.gradient[(0, j)] * jet.hessian[(0, i, j)];
        }
    }
    Ok(s)
}

/// One-dimensional-domain reduction `|u'|^2 u''`; zero exactly when the curve
/// is affine or stationary.
pub fn one_d_residual_at(jet: &Jet2) -> Result<Vec<f64>> {
    if jet.in_dim() != 1 {
        return Err(Error::ShapeMismatch {
            expected: "jet with one-dimensional domain (n = 1)".into(),
            actual: format!("n = {}", jet.in_dim()),
        });
    }
    jet.validate()?;
    let speed_sq: f64 = (0..jet.out_dim())
        .map(|a| jet.gradient[(a, 0)] * jet.gradient[(a, 0)])
        .sum();
    Ok((0..jet.out_dim())
        .map(|a| speed_sq * jet.hessian[(a, 0, 0)])
        .collect())
}

/// Fit the eikonal constant: mean of the `|Du|^2` samples and the largest
/// absolute deviation from it.
pub fn eikonal_deviation(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let max_dev = samples.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
    Ok((mean, max_dev))
}

/// Sup-norm pair: maximum of vector 2-norms and maximum absolute component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub vec2: f64,
    pub component: f64,
}

impl NormStats {
    fn of(vectors: impl Iterator<Item = f64>, components: impl Iterator<Item = f64>) -> Self {
        Self {
            vec2: vectors.fold(0.0, f64::max),
            component: components.fold(0.0, f64::max),
        }
    }
}

/// Residual decomposition on every grid node plus sup norms over the grid.
#[derive(Debug, Clone)]
pub struct ResidualField {
    pub grid: Grid,
    pub samples: Vec<ResidualSample>,
    pub sup_full: NormStats,
    pub sup_tangential: NormStats,
    pub sup_normal: NormStats,
}

/// Sweep the grid with analytic jets; the per-node work is embarrassingly
/// parallel and the sup reduction is order-independent.
pub fn residual_field(
    map: &MapInstance,
    grid: &Grid,
    tau_abs: f64,
    tau_rel: f64,
) -> Result<ResidualField> {
    let samples: Vec<ResidualSample> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let point = grid.coords(idx);
            let (du, d2u) = map
                .second_order_at(&point)
                .map_err(|e| Error::EvalFailure {
                    point: point.clone(),
                    reason: e.to_string(),
                })?;
            residual_from_derivatives(&du, &d2u, tau_abs, tau_rel).map_err(|e| Error::EvalFailure {
                point,
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let sup_full = NormStats::of(
        samples.iter().map(|s| vec_norm(&s.full)),
        samples
            .iter()
            .flat_map(|s| s.full.iter().map(|v| v.abs()))
            .collect::<Vec<_>>()
            .into_iter(),
    );
    let sup_tangential = NormStats::of(
        samples.iter().map(|s| vec_norm(&s.tangential)),
        samples
            .iter()
            .flat_map(|s| s.tangential.iter().map(|v| v.abs()))
            .collect::<Vec<_>>()
            .into_iter(),
    );
    let sup_normal = NormStats::of(
        samples.iter().map(|s| vec_norm(&s.normal)),
        samples
            .iter()
            .flat_map(|s| s.normal.iter().map(|v| v.abs()))
            .collect::<Vec<_>>()
            .into_iter(),
    );

    Ok(ResidualField {
        grid: grid.clone(),
        samples,
        sup_full,
        sup_tangential,
        sup_normal,
    })
}

/// Membership defects of a sample with respect to the numerical range of the
/// gradient (the span of the retained left singular directions, the same
/// authority that built the sample's projection): the tangential part's
/// component in the complement, and the normal part's largest component
/// along a retained direction. Both vanish up to rounding.
///
/// Near rank interfaces the decision may discard a singular value that is
/// small but nonzero; against the raw gradient columns the normal part then
/// genuinely carries up to `sigma_discarded * |Laplacian| * |Du|^2`, so raw
/// columns are not the right test vectors for the decomposition's split.
pub fn membership_defects(sample: &ResidualSample, du: &Matrix) -> Result<(f64, f64)> {
    let decomposition = svd(du)?;
    let projection = projection_from_svd(&decomposition, sample.rank.rank, du.rows());
    let tangential_leak = vec_norm(&projection.apply(&sample.tangential));
    let mut normal_leak: f64 = 0.0;
    for k in 0..sample.rank.rank {
        let direction = decomposition.u.column(k);
        normal_leak = normal_leak.max(vec_dot(&sample.normal, &direction).abs());
    }
    Ok((tangential_leak, normal_leak))
}
