//! Small dense linear algebra: gradient matrices, SVD-based rank detection,
//! range-complement projections and the double contraction of the second-order
//! operator.
//!
//! Matrices here are tiny (a handful of rows and columns), so singular values
//! are computed from a Jacobi eigen-decomposition of the Gram matrix of the
//! shorter side. No external linear-algebra backend is involved.

use crate::error::{Error, Result};

/// Default absolute singular-value threshold for rank decisions.
pub const DEFAULT_TAU_ABS: f64 = 1e-9;
/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_TAU_REL: f64 = 1e-6;

// ── Matrix ──────────────────────────────────────────────────────────

/// Dense row-major matrix with `rows x cols` finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        assert!(cols >= 1, "matrix needs at least one column");
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        assert!(rows >= 1 && cols >= 1);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self[(i, j)] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// Left product `v^T A`, returned as a plain vector of length `cols`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                out[j] += vi * self[(i, j)];
            }
        }
        out
    }

    /// Squared Frobenius norm (sum of squared entries, equal to the sum of
    /// squared singular values).
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// ── Tensor3 ─────────────────────────────────────────────────────────

/// Third-order tensor with dims `(outer, inner, inner)`, symmetric in the two
/// trailing indices. Houses Hessians of vector-valued maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    outer: usize,
    inner: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(outer: usize, inner: usize) -> Self {
        assert!(outer >= 1 && inner >= 1);
        Self {
            outer,
            inner,
            data: vec![0.0; outer * inner * inner],
        }
    }

    pub fn outer(&self) -> usize {
        self.outer
    }

    pub fn inner(&self) -> usize {
        self.inner
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest trailing-index asymmetry `|T[a,i,j] - T[a,j,i]|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.outer {
            for i in 0..self.inner {
                for j in (i + 1)..self.inner {
                    worst = worst.max((self[(a, i, j)] - self[(a, j, i)]).abs());
                }
            }
        }
        worst
    }

    /// Replace the trailing-index pair by its symmetric average.
    pub fn symmetrize(&mut self) {
        for a in 0..self.outer {
            for i in 0..self.inner {
                for j in (i + 1)..self.inner {
                    let avg = 0.5 * (self[(a, i, j)] + self[(a, j, i)]);
                    self[(a, i, j)] = avg;
                    self[(a, j, i)] = avg;
                }
            }
        }
    }

    /// Trace over the trailing pair: the vector with components
    /// `sum_i T[a,i,i]` (the Laplacian when T is a Hessian).
    pub fn trace_inner(&self) -> Vec<f64> {
        (0..self.outer)
            .map(|a| (0..self.inner).map(|i| self[(a, i, i)]).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (a, i, j): (usize, usize, usize)) -> &f64 {
        &self.data[(a * self.inner + i) * self.inner + j]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (a, i, j): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(a * self.inner + i) * self.inner + j]
    }
}

// ── Jacobi eigen-decomposition ──────────────────────────────────────

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix.
/// Returns eigenvalues sorted nonincreasing with matching eigenvector columns.
fn jacobi_symmetric_eigen(g: &Matrix) -> (Vec<f64>, Matrix) {
    let n = g.rows();
    debug_assert_eq!(n, g.cols());
    let mut a = g.clone();
    let mut v = Matrix::identity(n);

    let scale = a.frobenius().max(1.0);
    let tol = 1e-15 * scale;

    for _sweep in 0..64 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new_col)] = v[(k, old_col)];
        }
    }
    (eigenvalues, vectors)
}

// ── SVD ─────────────────────────────────────────────────────────────

/// Thin singular value decomposition `X = U diag(sigma) V^T` with
/// `min(rows, cols)` singular values sorted nonincreasing. Both `U` and `V`
/// have orthonormal columns.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// Orthonormalize `col` against the first `upto` columns of `basis`, then
/// normalize; falls back to the coordinate direction least represented so far
/// when the column is (numerically) in the span.
fn complete_column(basis: &Matrix, upto: usize, col: &mut Vec<f64>) {
    let m = basis.rows();
    let orthogonalize = |w: &mut Vec<f64>| {
        for c in 0..upto {
            let dot: f64 = (0..m).map(|k| w[k] * basis[(k, c)]).sum();
            for k in 0..m {
                w[k] -= dot * basis[(k, c)];
            }
        }
    };
    orthogonalize(col);
    let mut norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-8 {
        // pick the coordinate axis with the smallest shadow in the basis
        let mut best = 0;
        let mut best_shadow = f64::INFINITY;
        for e in 0..m {
            let shadow: f64 = (0..upto).map(|c| basis[(e, c)] * basis[(e, c)]).sum();
            if shadow < best_shadow {
                best_shadow = shadow;
                best = e;
            }
        }
        col.iter_mut().for_each(|x| *x = 0.0);
        col[best] = 1.0;
        orthogonalize(col);
        orthogonalize(col); // second pass for orthogonality to rounding
        norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    col.iter_mut().for_each(|x| *x /= norm);
}

/// Singular value decomposition via the Gram matrix of the shorter side.
///
/// Rejects non-finite input. Singular vectors for (numerically) zero singular
/// values are completed to an orthonormal set, so `U^T U = I` and `V^T V = I`
/// hold regardless of rank.
pub fn svd(x: &Matrix) -> Result<Svd> {
    if !x.is_finite() {
        return Err(Error::NonFinite("svd input matrix"));
    }
    let (rows, cols) = (x.rows(), x.cols());
    let m = rows.min(cols);

    // Eigen-decompose the smaller Gram matrix, then recover the long-side
    // vectors by applying X (or X^T) and orthonormalizing.
    let (sigma, short_vectors, short_is_v) = if cols <= rows {
        let g = x.transpose().matmul(x);
        let (eig, vecs) = jacobi_symmetric_eigen(&g);
        (eig, vecs, true)
    } else {
        let g = x.matmul(&x.transpose());
        let (eig, vecs) = jacobi_symmetric_eigen(&g);
        (eig, vecs, false)
    };

    let sigma: Vec<f64> = sigma.iter().map(|&lambda| lambda.max(0.0).sqrt()).collect();
    let sigma = sigma[..m].to_vec();
    let cutoff = sigma.first().copied().unwrap_or(0.0) * 1e-13;

    let long_dim = rows.max(cols);
    let mut long = Matrix::zeros(long_dim, m);
    for k in 0..m {
        let sv = short_vectors.column(k);
        let mut col = if short_is_v {
            x.apply(&sv)
        } else {
            x.apply_transpose(&sv)
        };
        if sigma[k] > cutoff && sigma[k] > 0.0 {
            col.iter_mut().for_each(|c| *c /= sigma[k]);
        }
        complete_column(&long, k, &mut col);
        for i in 0..long_dim {
            long[(i, k)] = col[i];
        }
    }

    let short = short_vectors;

    if short_is_v {
        Ok(Svd {
            u: long,
            sigma,
            v: short,
        })
    } else {
        Ok(Svd {
            u: short,
            sigma,
            v: long,
        })
    }
}

// ── Rank decisions ──────────────────────────────────────────────────

/// Numerical rank of a matrix together with the evidence behind the call.
#[derive(Debug, Clone)]
pub struct RankDecision {
    /// Singular values, nonincreasing.
    pub singular_values: Vec<f64>,
    /// Count of singular values strictly above the threshold
    /// `max(tau_abs, tau_rel * sigma_1)`. Ties at the threshold are excluded.
    pub rank: usize,
    /// Smallest ratio separating the retained and discarded singular values
    /// from the decision threshold; small margins flag shaky decisions near
    /// phase interfaces.
    pub margin: f64,
}

/// Numerical rank with absolute threshold `tau_abs` and relative threshold
/// `tau_rel` (a fraction of the largest singular value).
pub fn estimate_rank(x: &Matrix, tau_abs: f64, tau_rel: f64) -> Result<RankDecision> {
    if !thresholds_valid(tau_abs, tau_rel) {
        return Err(Error::InvalidThresholds { tau_abs, tau_rel });
    }
    let decomposition = svd(x)?;
    Ok(rank_from_singular_values(
        decomposition.sigma,
        tau_abs,
        tau_rel,
    ))
}

pub(crate) fn thresholds_valid(tau_abs: f64, tau_rel: f64) -> bool {
    tau_abs.is_finite() && tau_abs > 0.0 && tau_rel > 0.0 && tau_rel < 1.0
}

pub(crate) fn rank_from_singular_values(
    sigma: Vec<f64>,
    tau_abs: f64,
    tau_rel: f64,
) -> RankDecision {
    let sigma1 = sigma.first().copied().unwrap_or(0.0);
    let threshold = tau_abs.max(tau_rel * sigma1);
    let rank = sigma.iter().filter(|&&s| s > threshold).count();
    let m = sigma.len();
    let retained_side = if rank > 0 {
        sigma[rank - 1] / threshold
    } else {
        f64::INFINITY
    };
    let discarded_side = if rank < m && sigma[rank] > 0.0 {
        threshold / sigma[rank]
    } else {
        f64::INFINITY
    };
    RankDecision {
        singular_values: sigma,
        rank,
        margin: retained_side.min(discarded_side),
    }
}

/// Orthogonal projection of the row space `R^N` onto the orthogonal
/// complement of the range of `x`: `P = I - U_r U_r^T` with `U_r` the first
/// `decision.rank` left singular vectors.
pub fn range_complement_projection(x: &Matrix, decision: &RankDecision) -> Result<Matrix> {
    let decomposition = svd(x)?;
    Ok(projection_from_svd(&decomposition, decision.rank, x.rows()))
}

pub(crate) fn projection_from_svd(decomposition: &Svd, rank: usize, dim: usize) -> Matrix {
    let mut p = Matrix::identity(dim);
    for k in 0..rank {
        for i in 0..dim {
            let ui = decomposition.u[(i, k)];
            if ui == 0.0 {
                continue;
            }
            for j in 0..dim {
                p[(i, j)] -= ui * decomposition.u[(j, k)];
            }
        }
    }
    p
}

// ── Second-order contraction ────────────────────────────────────────

/// The double contraction
/// `(Du (x) Du + |Du|^2 P (x) I) : D2u`,
/// evaluated as the literal index-form sum
/// `sum_{b,i,j} (D_i u_a D_j u_b + |Du|^2 P_ab delta_ij) D2_ij u_b`.
///
/// `|Du|^2` is the squared Frobenius norm of the gradient matrix. The flat
/// summation order deliberately differs from the factored tangential/normal
/// route in the residual module, so agreement of the two is a real check.
pub fn infinity_contraction(du: &Matrix, p: &Matrix, d2u: &Tensor3) -> Result<Vec<f64>> {
    let (big_n, n) = (du.rows(), du.cols());
    if p.rows() != big_n || p.cols() != big_n {
        return Err(Error::ShapeMismatch {
            expected: format!("{big_n}x{big_n} projection"),
            actual: format!("{}x{}", p.rows(), p.cols()),
        });
    }
    if d2u.outer() != big_n || d2u.inner() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{big_n}x{n}x{n} hessian"),
            actual: format!("{}x{}x{}", d2u.outer(), d2u.inner(), d2u.inner()),
        });
    }
    if !du.is_finite() || !p.is_finite() || !d2u.is_finite() {
        return Err(Error::NonFinite("contraction input"));
    }
    let du_norm_sq = du.frobenius_sq();

    let mut out = vec![0.0; big_n];
    for a in 0..big_n {
        let mut s = 0.0;
        for b in 0..big_n {
            for i in 0..n {
                for j in 0..n {
                    let mut coeff = du[(a, i)] * du[(b, j)];
                    if i == j {
                        coeff += du_norm_sq * p[(a, b)];
                    }
                    s += coeff * d2u[(b, i, j)];
                }
            }
        }
        out[a] = s;
    }
    Ok(out)
}

/// Euclidean norm of a plain vector.
pub fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product of two equal-length slices.
pub fn vec_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_near(a: f64, b: f64, tol: f64, what: &str) {
        assert!(
            (a - b).abs() <= tol,
            "{what}: {a} vs {b} (diff {})",
            (a - b).abs()
        );
    }

    #[test]
    fn svd_zero_matrix() {
        let x = Matrix::zeros(2, 2);
        let s = svd(&x).unwrap();
        assert_eq!(s.sigma, vec![0.0, 0.0]);
        // completed basis stays orthonormal
        let utu = s.u.transpose().matmul(&s.u);
        assert!(utu.sub(&Matrix::identity(2)).frobenius() <= 1e-12);
    }

    #[test]
    fn svd_identity() {
        let x = Matrix::identity(2);
        let s = svd(&x).unwrap();
        assert_near(s.sigma[0], 1.0, 1e-14, "sigma1");
        assert_near(s.sigma[1], 1.0, 1e-14, "sigma2");
    }

    #[test]
    fn svd_known_rank_one_tall() {
        // X^T X = [[5,10],[10,20]], trace 25, det 0 -> eigenvalues (25, 0)
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]);
        let s = svd(&x).unwrap();
        assert_near(s.sigma[0], 5.0, 1e-12, "sigma1");
        assert_near(s.sigma[1], 0.0, 1e-12, "sigma2");
    }

    #[test]
    fn svd_rejects_non_finite() {
        let x = Matrix::from_rows(&[vec![1.0, f64::NAN]]);
        assert!(matches!(svd(&x), Err(Error::NonFinite(_))));
    }

    #[test]
    fn svd_wide_matrix() {
        let x = Matrix::from_rows(&[vec![0.0, 3.0, 0.0, 0.0], vec![4.0, 0.0, 0.0, 0.0]]);
        let s = svd(&x).unwrap();
        assert_near(s.sigma[0], 4.0, 1e-12, "sigma1");
        assert_near(s.sigma[1], 3.0, 1e-12, "sigma2");
        let recon = s.u.matmul(&diag_times_vt(&s));
        assert!(recon.sub(&x).frobenius() <= 1e-12 * x.frobenius().max(1.0));
    }

    fn diag_times_vt(s: &Svd) -> Matrix {
        let m = s.sigma.len();
        let vt = s.v.transpose();
        let mut out = Matrix::zeros(m, vt.cols());
        for k in 0..m {
            for j in 0..vt.cols() {
                out[(k, j)] = s.sigma[k] * vt[(k, j)];
            }
        }
        out
    }

    #[test]
    fn rank_zero_matrix() {
        let x = Matrix::zeros(3, 2);
        let d = estimate_rank(&x, DEFAULT_TAU_ABS, DEFAULT_TAU_REL).unwrap();
        assert_eq!(d.rank, 0);
    }

    #[test]
    fn rank_forced_by_relative_threshold() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1e-12]]);
        let d = estimate_rank(&x, DEFAULT_TAU_ABS, 1e-6).unwrap();
        assert_eq!(d.rank, 1);
    }

    #[test]
    fn rank_exp2_gradient_at_origin() {
        // Du of u = (cos x - cos y, sin x - sin y) at the origin
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, -1.0]]);
        let d = estimate_rank(&x, DEFAULT_TAU_ABS, DEFAULT_TAU_REL).unwrap();
        assert_eq!(d.rank, 1);
        assert_near(d.singular_values[0], std::f64::consts::SQRT_2, 1e-14, "s1");
    }

    #[test]
    fn rank_rejects_bad_thresholds() {
        let x = Matrix::identity(2);
        assert!(estimate_rank(&x, 0.0, 0.5).is_err());
        assert!(estimate_rank(&x, 1e-9, 1.0).is_err());
    }

    #[test]
    fn tie_at_threshold_is_excluded() {
        let sigma = vec![1.0, 0.5];
        // threshold exactly 0.5: the tie counts as below
        let d = rank_from_singular_values(sigma, 0.5, 1e-6);
        assert_eq!(d.rank, 1);
    }

    #[test]
    fn projection_of_zero_matrix_is_identity() {
        let x = Matrix::zeros(2, 2);
        let d = estimate_rank(&x, DEFAULT_TAU_ABS, DEFAULT_TAU_REL).unwrap();
        let p = range_complement_projection(&x, &d).unwrap();
        assert!(p.sub(&Matrix::identity(2)).frobenius() <= 1e-14);
    }

    #[test]
    fn projection_of_full_rank_square_is_zero() {
        let x = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 3.0]]);
        let d = estimate_rank(&x, DEFAULT_TAU_ABS, DEFAULT_TAU_REL).unwrap();
        assert_eq!(d.rank, 2);
        let p = range_complement_projection(&x, &d).unwrap();
        assert!(p.frobenius() <= 1e-13);
    }

    #[test]
    fn projection_rank_one_tall_matches_gram_schmidt() {
        // range direction v = (1,2,0)/sqrt(5); P = I - v v^T
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]);
        let d = estimate_rank(&x, DEFAULT_TAU_ABS, DEFAULT_TAU_REL).unwrap();
        assert_eq!(d.rank, 1);
        let p = range_complement_projection(&x, &d).unwrap();
        let expected = Matrix::from_rows(&[
            vec![1.0 - 0.2, -0.4, 0.0],
            vec![-0.4, 1.0 - 0.8, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        assert!(p.sub(&expected).frobenius() <= 1e-12);
    }

    #[test]
    fn contraction_vanishes_for_zero_hessian() {
        let du = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let p = Matrix::zeros(2, 2);
        let d2u = Tensor3::zeros(2, 2);
        let out = infinity_contraction(&du, &p, &d2u).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn contraction_scalar_half_square_norm() {
        // N = 1, Du = (1,1), D2u = I, P = 0: (Du (x) Du) : D2u = 2
        let du = Matrix::from_rows(&[vec![1.0, 1.0]]);
        let p = Matrix::zeros(1, 1);
        let mut d2u = Tensor3::zeros(1, 2);
        d2u[(0, 0, 0)] = 1.0;
        d2u[(0, 1, 1)] = 1.0;
        let out = infinity_contraction(&du, &p, &d2u).unwrap();
        assert_near(out[0], 2.0, 1e-15, "contraction");
    }

    #[test]
    fn contraction_rejects_shape_mismatch() {
        let du = Matrix::from_rows(&[vec![1.0, 2.0]]);
        let p = Matrix::zeros(2, 2);
        let d2u = Tensor3::zeros(1, 2);
        assert!(infinity_contraction(&du, &p, &d2u).is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..=5, 1usize..=4).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3.0f64..3.0, r * c)
                .prop_map(move |data| Matrix::from_vec(r, c, data))
        })
    }

    proptest! {
        #[test]
        fn projection_algebra(x in arb_matrix()) {
            let d = estimate_rank(&x, DEFAULT_TAU_ABS, DEFAULT_TAU_REL).unwrap();
            let p = range_complement_projection(&x, &d).unwrap();
            let n = x.rows();

            let idempotent_defect = p.matmul(&p).sub(&p).frobenius();
            prop_assert!(idempotent_defect <= 1e-12);

            let symmetry_defect = p.sub(&p.transpose()).frobenius();
            prop_assert!(symmetry_defect <= 1e-12);

            let annihilation = p.matmul(&x).frobenius();
            prop_assert!(annihilation <= 1e-10 * x.frobenius().max(1.0));

            let trace_defect = (p.trace() - (n as f64 - d.rank as f64)).abs();
            prop_assert!(trace_defect <= 1e-10);
        }

        #[test]
        fn svd_reconstructs(x in arb_matrix()) {
            let s = svd(&x).unwrap();
            let recon = s.u.matmul(&diag_times_vt(&s));
            prop_assert!(recon.sub(&x).frobenius() <= 1e-12 * x.frobenius().max(1.0));
            for k in 1..s.sigma.len() {
                prop_assert!(s.sigma[k - 1] >= s.sigma[k]);
            }
            let utu = s.u.transpose().matmul(&s.u);
            prop_assert!(utu.sub(&Matrix::identity(utu.rows())).frobenius() <= 1e-12);
            let vtv = s.v.transpose().matmul(&s.v);
            prop_assert!(vtv.sub(&Matrix::identity(vtv.rows())).frobenius() <= 1e-12);
        }

        #[test]
        fn rank_invariant_under_orthogonal_left_factor(
            x in arb_matrix(),
            extra in 0usize..3,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let n = x.rows();
            let m = n + extra;
            // random semi-orthogonal Q in R^{m x n} via Gram-Schmidt
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut q = Matrix::zeros(m, n);
            for k in 0..n {
                let mut col: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                complete_column(&q, k, &mut col);
                for i in 0..m {
                    q[(i, k)] = col[i];
                }
            }
            let qx = q.matmul(&x);
            let d = estimate_rank(&x, DEFAULT_TAU_ABS, DEFAULT_TAU_REL).unwrap();
            let dq = estimate_rank(&qx, DEFAULT_TAU_ABS, DEFAULT_TAU_REL).unwrap();
            prop_assert_eq!(d.rank, dq.rank);
            for (a, b) in d.singular_values.iter().zip(&dq.singular_values) {
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }
        }
    }
}
