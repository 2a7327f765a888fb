//! Candidate map families with exact second-order jets.
//!
//! Families: affine maps, the plane-to-plane trigonometric solution
//! `(cos x - cos y, sin x - sin y)`, the profile-driven family
//! `(x, y) -> int_y^x (cos K, sin K)`, rank-one maps `a + xi f` built from
//! scalar profiles, and a diagonal quadratic used as a negative control.
//! An optional orthogonal embedding lifts any family to a higher target
//! dimension. Finite-difference jets support externally supplied maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kprofile::{KProfile, KProfileSpec};
use crate::tensor::{Matrix, Tensor3};

/// Absolute quadrature tolerance for map values of the profile family.
pub const QUAD_TOL: f64 = 1e-12;

/// Default finite-difference step as a fraction of the domain diameter:
/// balances second-derivative truncation (`h^2`) against rounding (`eps/h^2`).
pub const DEFAULT_FD_STEP_FACTOR: f64 = 1e-4;

/// Second-order data of a map at a point: value, gradient matrix and the
/// Hessian tensor (symmetric in its trailing indices).
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub value: Vec<f64>,
    pub gradient: Matrix,
    pub hessian: Tensor3,
}

impl Jet2 {
    /// Output dimension.
    pub fn out_dim(&self) -> usize {
        self.value.len()
    }

    /// Domain dimension.
    pub fn in_dim(&self) -> usize {
        self.gradient.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.value.iter().all(|v| v.is_finite())
            || !self.gradient.is_finite()
            || !self.hessian.is_finite()
        {
            return Err(Error::NonFinite("jet"));
        }
        if self.gradient.rows() != self.value.len()
            || self.hessian.outer() != self.value.len()
            || self.hessian.inner() != self.gradient.cols()
        {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} jet", self.value.len(), self.gradient.cols()),
                actual: format!(
                    "gradient {}x{}, hessian {}x{}x{}",
                    self.gradient.rows(),
                    self.gradient.cols(),
                    self.hessian.outer(),
                    self.hessian.inner(),
                    self.hessian.inner()
                ),
            });
        }
        if self.hessian.symmetry_defect() > 1e-12 {
            return Err(Error::InvalidSpec(
                "hessian is not symmetric in its trailing indices".into(),
            ));
        }
        Ok(())
    }
}

// ── declarative specs ───────────────────────────────────────────────

/// Scalar profile with analytic jets, used by the rank-one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarProfileSpec {
    /// `f(x) = w . x + c`.
    Linear {
        weights: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    /// `f(x) = |x|^2 / 2`.
    HalfSquareNorm { dim: usize },
}

impl ScalarProfileSpec {
    pub fn dim(&self) -> usize {
        match self {
            ScalarProfileSpec::Linear { weights, .. } => weights.len(),
            ScalarProfileSpec::HalfSquareNorm { dim } => *dim,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ScalarProfileSpec::Linear { weights, constant } => {
                weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + constant
            }
            ScalarProfileSpec::HalfSquareNorm { .. } => {
                0.5 * x.iter().map(|xi| xi * xi).sum::<f64>()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ScalarProfileSpec::Linear { weights, .. } => weights.clone(),
            ScalarProfileSpec::HalfSquareNorm { .. } => x.to_vec(),
        }
    }

    pub fn hessian(&self, _x: &[f64]) -> Matrix {
        let n = self.dim();
        match self {
            ScalarProfileSpec::Linear { .. } => Matrix::zeros(n, n),
            ScalarProfileSpec::HalfSquareNorm { .. } => Matrix::identity(n),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ScalarProfileSpec::Linear { weights, constant } => {
                if weights.is_empty() || !weights.iter().all(|w| w.is_finite()) {
                    return Err(Error::InvalidSpec(
                        "linear profile needs finite weights".into(),
                    ));
                }
                if !constant.is_finite() {
                    return Err(Error::InvalidSpec(
                        "linear profile constant not finite".into(),
                    ));
                }
            }
            ScalarProfileSpec::HalfSquareNorm { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidSpec("profile dimension must be >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Family selector plus parameters; the JSON-facing side of a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum FamilySpec {
    /// `u(x) = A x + b`.
    Affine {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        shift: Option<Vec<f64>>,
    },
    /// `u(x, y) = (cos x - cos y, sin x - sin y)`.
    Exp2,
    /// `u(x, y) = int_y^x (cos K(t), sin K(t)) dt`.
    Kprofile { profile: KProfileSpec },
    /// `u(x) = a + xi f(x)` with a scalar profile `f`.
    Rank1Scalar {
        offset: Vec<f64>,
        direction: Vec<f64>,
        profile: ScalarProfileSpec,
    },
    /// `u_a(x) = c_a x_a^2 / 2`; not a solution, used as a negative control.
    Quadratic { coeffs: Vec<f64> },
}

/// Optional orthogonal embedding into a higher output dimension. The
/// semi-orthogonal factor is generated deterministically from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedSpec {
    pub n_target: usize,
    pub seed: u64,
    #[serde(default)]
    pub shift: Option<Vec<f64>>,
}

/// Declarative description of a candidate map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed: Option<EmbedSpec>,
}

impl MapSpec {
    pub fn new(family: FamilySpec) -> Self {
        Self {
            family,
            embed: None,
        }
    }

    pub fn with_embed(family: FamilySpec, embed: EmbedSpec) -> Self {
        Self {
            family,
            embed: Some(embed),
        }
    }

    /// Validate and compile into an evaluable map.
    pub fn build(&self) -> Result<MapInstance> {
        let base = match &self.family {
            FamilySpec::Affine { matrix, shift } => {
                if matrix.is_empty() || matrix[0].is_empty() {
                    return Err(Error::InvalidSpec("affine matrix must be non-empty".into()));
                }
                let cols = matrix[0].len();
                if matrix.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidSpec("affine matrix rows are ragged".into()));
                }
                if matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("affine matrix"));
                }
                let a = Matrix::from_rows(matrix);
                let b = match shift {
                    Some(b) => {
                        if b.len() != a.rows() || !b.iter().all(|v| v.is_finite()) {
                            return Err(Error::InvalidSpec(format!(
                                "affine shift must have {} finite entries",
                                a.rows()
                            )));
                        }
                        b.clone()
                    }
                    None => vec![0.0; a.rows()],
                };
                BaseMap::Affine {
                    matrix: a,
                    shift: b,
                }
            }
            FamilySpec::Exp2 => BaseMap::Exp2,
            FamilySpec::Kprofile { profile } => BaseMap::Profile {
                profile: KProfile::new(profile.clone())?,
            },
            FamilySpec::Rank1Scalar {
                offset,
                direction,
                profile,
            } => {
                profile.validate()?;
                if offset.len() != direction.len() {
                    return Err(Error::InvalidSpec(
                        "rank1-scalar offset and direction lengths differ".into(),
                    ));
                }
                if !offset.iter().chain(direction).all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("rank1-scalar parameters"));
                }
                let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!(
                        "rank1-scalar direction must be unit length (|xi| = {norm})"
                    )));
                }
                BaseMap::Rank1 {
                    offset: offset.clone(),
                    direction: direction.clone(),
                    profile: profile.clone(),
                }
            }
            FamilySpec::Quadratic { coeffs } => {
                if coeffs.is_empty() || !coeffs.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidSpec(
                        "quadratic family needs finite coefficients".into(),
                    ));
                }
                BaseMap::Quadratic {
                    coeffs: coeffs.clone(),
                }
            }
        };

        let embed = match &self.embed {
            None => None,
            Some(e) => {
                let n_base = base.dims().0;
                if e.n_target < n_base {
                    return Err(Error::InvalidSpec(format!(
                        "embedding target dimension {} below base output dimension {n_base}",
                        e.n_target
                    )));
                }
                let q = semi_orthogonal_from_seed(e.n_target, n_base, e.seed);
                let shift = match &e.shift {
                    Some(b) => {
                        if b.len() != e.n_target || !b.iter().all(|v| v.is_finite()) {
                            return Err(Error::InvalidSpec(format!(
                                "embedding shift must have {} finite entries",
                                e.n_target
                            )));
                        }
                        b.clone()
                    }
                    None => vec![0.0; e.n_target],
                };
                Some(Embedding { q, shift })
            }
        };

        Ok(MapInstance {
            spec: self.clone(),
            base,
            embed,
        })
    }
}

// ── compiled map ────────────────────────────────────────────────────

#[derive(Debug, Clone)]
enum BaseMap {
    Affine {
        matrix: Matrix,
        shift: Vec<f64>,
    },
    Exp2,
    Profile {
        profile: KProfile,
    },
    Rank1 {
        offset: Vec<f64>,
        direction: Vec<f64>,
        profile: ScalarProfileSpec,
    },
    Quadratic {
        coeffs: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Embedding {
    q: Matrix,
    shift: Vec<f64>,
}

/// Validated, evaluable map.
#[derive(Debug, Clone)]
pub struct MapInstance {
    spec: MapSpec,
    base: BaseMap,
    embed: Option<Embedding>,
}

impl BaseMap {
    fn dims(&self) -> (usize, usize) {
        match self {
            BaseMap::Affine { matrix, .. } => (matrix.rows(), matrix.cols()),
            BaseMap::Exp2 => (2, 2),
            BaseMap::Profile { .. } => (2, 2),
            BaseMap::Rank1 {
                direction, profile, ..
            } => (direction.len(), profile.dim()),
            BaseMap::Quadratic { coeffs } => (coeffs.len(), coeffs.len()),
        }
    }

    /// Full jet, or with the value left at zero when `with_value` is false
    /// (the profile family's value needs quadrature; derivative-only sweeps
    /// skip it).
    fn jet(&self, x: &[f64], with_value: bool) -> Result<Jet2> {
        let (out, dim) = self.dims();
        if x.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("point in R^{dim}"),
                actual: format!("point in R^{}", x.len()),
            });
        }
        match self {
            BaseMap::Affine { matrix, shift } => {
                let mut value = matrix.apply(x);
                for (v, b) in value.iter_mut().zip(shift) {
                    *v += b;
                }
                Ok(Jet2 {
                    value,
                    gradient: matrix.clone(),
                    hessian: Tensor3::zeros(out, dim),
                })
            }
            BaseMap::Exp2 => {
                let (px, py) = (x[0], x[1]);
                let value = vec![px.cos() - py.cos(), px.sin() - py.sin()];
                let gradient =
                    Matrix::from_rows(&[vec![-px.sin(), py.sin()], vec![px.cos(), -py.cos()]]);
                let mut hessian = Tensor3::zeros(2, 2);
                hessian[(0, 0, 0)] = -px.cos();
                hessian[(1, 0, 0)] = -px.sin();
                hessian[(0, 1, 1)] = py.cos();
                hessian[(1, 1, 1)] = py.sin();
                Ok(Jet2 {
                    value,
                    gradient,
                    hessian,
                })
            }
            BaseMap::Profile { profile } => {
                let (px, py) = (x[0], x[1]);
                let (kx, dkx) = profile.eval(px);
                let (ky, dky) = profile.eval(py);
                let (ux, uy) = if with_value {
                    profile.direction_integral(py, px, QUAD_TOL)?
                } else {
                    (0.0, 0.0)
                };
                let gradient =
                    Matrix::from_rows(&[vec![kx.cos(), -ky.cos()], vec![kx.sin(), -ky.sin()]]);
                let mut hessian = Tensor3::zeros(2, 2);
                hessian[(0, 0, 0)] = -dkx * kx.sin();
                hessian[(1, 0, 0)] = dkx * kx.cos();
                hessian[(0, 1, 1)] = dky * ky.sin();
                hessian[(1, 1, 1)] = -dky * ky.cos();
                Ok(Jet2 {
                    value: vec![ux, uy],
                    gradient,
                    hessian,
                })
            }
            BaseMap::Rank1 {
                offset,
                direction,
                profile,
            } => {
                let f = profile.value(x);
                let df = profile.gradient(x);
                let hf = profile.hessian(x);
                let value: Vec<f64> = offset
                    .iter()
                    .zip(direction)
                    .map(|(a, xi)| a + xi * f)
                    .collect();
                let mut gradient = Matrix::zeros(out, dim);
                let mut hessian = Tensor3::zeros(out, dim);
                for (a, &xi) in direction.iter().enumerate() {
                    for i in 0..dim {
                        gradient[(a, i)] = xi * df[i];
                        for j in 0..dim {
                            hessian[(a, i, j)] = xi * hf[(i, j)];
                        }
                    }
                }
                Ok(Jet2 {
                    value,
                    gradient,
                    hessian,
                })
            }
            BaseMap::Quadratic { coeffs } => {
                let value: Vec<f64> = coeffs
                    .iter()
                    .zip(x)
                    .map(|(c, xi)| 0.5 * c * xi * xi)
                    .collect();
                let mut gradient = Matrix::zeros(out, dim);
                let mut hessian = Tensor3::zeros(out, dim);
                for (a, &c) in coeffs.iter().enumerate() {
                    gradient[(a, a)] = c * x[a];
                    hessian[(a, a, a)] = c;
                }
                Ok(Jet2 {
                    value,
                    gradient,
                    hessian,
                })
            }
        }
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            BaseMap::Profile { profile } => {
                let (ux, uy) = profile.direction_integral(x[1], x[0], QUAD_TOL)?;
                Ok(vec![ux, uy])
            }
            _ => Ok(self.jet(x, true)?.value),
        }
    }

    fn value_delta(&self, from: &[f64], to: &[f64]) -> Result<Vec<f64>> {
        match self {
            // Incremental form: short integrals stay cheap and accumulation
            // error stays far below the diagnostic tolerances.
            BaseMap::Profile { profile } => {
                let (dx_c, dx_s) = profile.direction_integral(from[0], to[0], 0.1 * QUAD_TOL)?;
                let (dy_c, dy_s) = profile.direction_integral(from[1], to[1], 0.1 * QUAD_TOL)?;
                Ok(vec![dx_c - dy_c, dx_s - dy_s])
            }
            _ => {
                let a = self.value(from)?;
                let b = self.value(to)?;
                Ok(b.iter().zip(&a).map(|(x, y)| x - y).collect())
            }
        }
    }
}

impl MapInstance {
    /// `(output dimension, domain dimension)` after any embedding.
    pub fn dims(&self) -> (usize, usize) {
        let (out, dim) = self.base.dims();
        match &self.embed {
            Some(e) => (e.q.rows(), dim),
            None => (out, dim),
        }
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    /// Exact second-order jet at `x`.
    pub fn jet(&self, x: &[f64]) -> Result<Jet2> {
        let jet = self.base.jet(x, true)?;
        match &self.embed {
            None => Ok(jet),
            Some(e) => embed_jet(&jet, &e.q, &e.shift),
        }
    }

    /// Gradient and Hessian only; skips the value quadrature of the profile
    /// family, which dominates grid sweeps that never read the value.
    pub fn second_order_at(&self, x: &[f64]) -> Result<(Matrix, Tensor3)> {
        let jet = self.base.jet(x, false)?;
        let jet = match &self.embed {
            None => jet,
            Some(e) => embed_jet(&jet, &e.q, &e.shift)?,
        };
        Ok((jet.gradient, jet.hessian))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        let dim = self.base.dims().1;
        if x.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("point in R^{dim}"),
                actual: format!("point in R^{}", x.len()),
            });
        }
        Ok(())
    }

    /// Map value at `x` (for the profile family this integrates to the
    /// configured quadrature tolerance).
    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let v = self.base.value(x)?;
        match &self.embed {
            None => Ok(v),
            Some(e) => {
                let mut out = e.q.apply(&v);
                for (o, b) in out.iter_mut().zip(&e.shift) {
                    *o += b;
                }
                Ok(out)
            }
        }
    }

    /// `u(to) - u(from)`; cheap for nearby points of the profile family.
    pub fn value_delta(&self, from: &[f64], to: &[f64]) -> Result<Vec<f64>> {
        self.check_point(from)?;
        self.check_point(to)?;
        let d = self.base.value_delta(from, to)?;
        match &self.embed {
            None => Ok(d),
            Some(e) => Ok(e.q.apply(&d)),
        }
    }

    /// Finite-difference jet of this map (for cross-checks against the
    /// analytic jets).
    pub fn jet_finite_difference(&self, x: &[f64], h: f64) -> Result<Jet2> {
        jet_finite_difference(|p| self.value(p), x, h)
    }
}

// ── embedding ───────────────────────────────────────────────────────

/// Push a jet through `u -> Q u + b` for a semi-orthogonal `Q`
/// (`Q^T Q = I` to 1e-12; rejected otherwise).
pub fn embed_jet(jet: &Jet2, q: &Matrix, shift: &[f64]) -> Result<Jet2> {
    let n_base = jet.out_dim();
    let n_target = q.rows();
    if q.cols() != n_base || shift.len() != n_target {
        return Err(Error::ShapeMismatch {
            expected: format!("{n_target}x{n_base} embedding with shift in R^{n_target}"),
            actual: format!("{}x{}, shift in R^{}", q.rows(), q.cols(), shift.len()),
        });
    }
    let gram_defect = q
        .transpose()
        .matmul(q)
        .sub(&Matrix::identity(n_base))
        .frobenius();
    if gram_defect > 1e-12 {
        return Err(Error::NotSemiOrthogonal {
            defect: gram_defect,
        });
    }

    let mut value = q.apply(&jet.value);
    for (v, b) in value.iter_mut().zip(shift) {
        *v += b;
    }
    let gradient = q.matmul(&jet.gradient);
    let dim = jet.in_dim();
    let mut hessian = Tensor3::zeros(n_target, dim);
    for a in 0..n_target {
        for b in 0..n_base {
            let w = q[(a, b)];
            if w == 0.0 {
                continue;
            }
            for i in 0..dim {
                for j in 0..dim {
                    hessian[(a, i, j)] += w * jet.hessian[(b, i, j)];
                }
            }
        }
    }
    Ok(Jet2 {
        value,
        gradient,
        hessian,
    })
}

/// Deterministic semi-orthogonal `rows x cols` matrix (`rows >= cols`): the
/// orthonormalized columns of a seeded random matrix.
pub fn semi_orthogonal_from_seed(rows: usize, cols: usize, seed: u64) -> Matrix {
    assert!(rows >= cols);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = Matrix::zeros(rows, cols);
    for k in 0..cols {
        let mut col: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // modified Gram-Schmidt, two passes
        for _ in 0..2 {
            for c in 0..k {
                let dot: f64 = (0..rows).map(|i| col[i] * q[(i, c)]).sum();
                for i in 0..rows {
                    col[i] -= dot * q[(i, c)];
                }
            }
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 {
            // essentially impossible for random input; fall back to a
            // coordinate direction so the function stays total
            col = vec![0.0; rows];
            col[k] = 1.0;
        } else {
            col.iter_mut().for_each(|v| *v /= norm);
        }
        for i in 0..rows {
            q[(i, k)] = col[i];
        }
    }
    q
}

// ── finite differences ──────────────────────────────────────────────

/// Second-order central-difference jet of an arbitrary map evaluator.
/// Gradient and Hessian stencils are exact on affine and quadratic maps.
pub fn jet_finite_difference<F>(eval: F, x: &[f64], h: f64) -> Result<Jet2>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "FD step must be positive, got {h}"
        )));
    }
    let dim = x.len();
    let center = eval(x)?;
    let out = center.len();

    let shifted = |i: usize, si: f64, j: usize, sj: f64| -> Result<Vec<f64>> {
        let mut p = x.to_vec();
        p[i] += si * h;
        p[j] += sj * h;
        eval(&p)
    };

    let mut plus = Vec::with_capacity(dim);
    let mut minus = Vec::with_capacity(dim);
    for i in 0..dim {
        plus.push(shifted(i, 1.0, i, 0.0)?);
        minus.push(shifted(i, -1.0, i, 0.0)?);
    }

    let mut gradient = Matrix::zeros(out, dim);
    let mut hessian = Tensor3::zeros(out, dim);
    for i in 0..dim {
        for a in 0..out {
            gradient[(a, i)] = (plus[i][a] - minus[i][a]) / (2.0 * h);
            hessian[(a, i, i)] = (plus[i][a] - 2.0 * center[a] + minus[i][a]) / (h * h);
        }
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let pp = shifted(i, 1.0, j, 1.0)?;
            let pm = shifted(i, 1.0, j, -1.0)?;
            let mp = shifted(i, -1.0, j, 1.0)?;
            let mm = shifted(i, -1.0, j, -1.0)?;
            for a in 0..out {
                let v = (pp[a] - pm[a] - mp[a] + mm[a]) / (4.0 * h * h);
                hessian[(a, i, j)] = v;
                hessian[(a, j, i)] = v;
            }
        }
    }

    let jet = Jet2 {
        value: center,
        gradient,
        hessian,
    };
    jet.validate()?;
    Ok(jet)
}
