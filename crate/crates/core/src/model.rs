//! Problem data types and the cost / gradient arithmetic shared by every
//! other module.
//!
//! The objective minimized by the solver is
//!
//! ```text
//! F(Φ, W) = ½‖Y − ΦWᵀ‖²_F + δ Σᵢ sqrt(‖φᵢ‖² + ‖wᵢ‖² + η²) + λ₁‖W‖₁
//! ```
//!
//! where the middle term is the smoothed ℓ2/ℓ1 norm of the stacked matrix
//! `[Φ; W]`. Its minimization zeroes whole column pairs `(φᵢ, wᵢ)` at once,
//! which is what turns an overestimated rank `r` into an estimate of the
//! number of endmembers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::at_b;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

fn check_finite(what: &'static str, m: &Mat) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFinite { what, row: r, col: c });
            }
        }
    }
    Ok(())
}

fn check_nonneg(what: &'static str, m: &Mat) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v < 0.0 {
                return Err(Error::Negative {
                    what,
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// L×K matrix of pixel spectra, one column per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix(Mat);

impl ObservationMatrix {
    pub fn new(data: Mat) -> Result<Self> {
        let y = Self::allow_negative(data)?;
        check_nonneg("observation matrix", &y.0)?;
        Ok(y)
    }

    /// Accepts negative entries (e.g. un-clamped noisy synthetic data).
    /// Everything downstream still works; only the nonnegativity of the
    /// model no longer matches the data.
    pub fn allow_negative(data: Mat) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::dims(
                "observation matrix",
                "at least 1×1",
                format!("{}×{}", data.nrows(), data.ncols()),
            ));
        }
        check_finite("observation matrix", &data)?;
        Ok(Self(data))
    }

    pub fn bands(&self) -> usize {
        self.0.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }
}

macro_rules! factor_matrix {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Mat);

        impl $name {
            pub fn new(data: Mat) -> Result<Self> {
                check_finite($what, &data)?;
                check_nonneg($what, &data)?;
                Ok(Self(data))
            }

            /// Number of columns (the working rank).
            pub fn rank(&self) -> usize {
                self.0.ncols()
            }

            pub fn nrows(&self) -> usize {
                self.0.nrows()
            }

            pub fn as_matrix(&self) -> &Mat {
                &self.0
            }

            pub fn into_matrix(self) -> Mat {
                self.0
            }

            /// Keeps only the listed columns, in the given order.
            pub fn select_columns(&self, columns: &[usize]) -> Self {
                Self(self.0.select_columns(columns.iter()))
            }

            pub(crate) fn from_nonneg_unchecked(data: Mat) -> Self {
                debug_assert!(data.iter().all(|v| *v >= 0.0 && v.is_finite()));
                Self(data)
            }
        }
    };
}

factor_matrix!(
    /// L×r matrix Φ whose columns are candidate endmember spectra.
    EndmemberMatrix,
    "endmember matrix"
);
factor_matrix!(
    /// K×r matrix W whose rows are per-pixel abundance vectors. Rows are not
    /// constrained to sum to one.
    AbundanceMatrix,
    "abundance matrix"
);

/// Diagonal of the reweighting matrix D, `dᵢᵢ = δ / sqrt(‖φᵢ‖² + ‖wᵢ‖² + η²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyDiagonal(Vector);

impl PenaltyDiagonal {
    /// Wraps an explicit diagonal; entries must be finite and ≥ 0 (zero only
    /// arises with δ = 0).
    pub fn new(diag: Vector) -> Result<Self> {
        if let Some(v) = diag.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(
                "penalty diagonal",
                format!("entries must be finite and >= 0, found {v}"),
            ));
        }
        Ok(Self(diag))
    }

    pub(crate) fn from_vector(diag: Vector) -> Self {
        Self(diag)
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchConfig {
    /// First extrapolation weight tried, in (0, 1].
    pub beta_init: f64,
    /// Multiplicative shrink applied after each rejected trial, in (0, 1).
    pub shrink: f64,
    /// Maximum number of trials per block update.
    pub max_backtracks: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            beta_init: 1.0,
            shrink: 0.5,
            max_backtracks: 20,
        }
    }
}

/// Relative weights used to derive δ, λ₁ and η from the data when they are
/// not given explicitly. See [`SolverConfig::for_observation`].
pub const DEFAULT_DELTA_SCALE: f64 = 5.0e-4;
pub const DEFAULT_LAMBDA1_SCALE: f64 = 5.0e-4;
pub const DEFAULT_ETA_SCALE: f64 = 1.0e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Overestimated rank.
    pub r: usize,
    /// Weight of the ℓ2/ℓ1 low-rank term.
    pub delta: f64,
    /// Weight of the ℓ1 sparsity term on W.
    pub lambda1: f64,
    /// Smoothing constant inside the square roots.
    pub eta: f64,
    pub max_iter: usize,
    pub tol_rel_cost: f64,
    /// Relative column-energy threshold below which a column pair counts as
    /// pruned.
    pub prune_tol: f64,
    pub line_search: LineSearchConfig,
    pub seed: u64,
}

impl SolverConfig {
    /// Configuration with the default schedule and explicitly given weights.
    pub fn new(r: usize, delta: f64, lambda1: f64, eta: f64) -> Self {
        Self {
            r,
            delta,
            lambda1,
            eta,
            max_iter: 500,
            tol_rel_cost: 1e-6,
            prune_tol: 1e-4,
            line_search: LineSearchConfig::default(),
            seed: 0,
        }
    }

    /// Default configuration scaled to the data.
    ///
    /// With `s = ‖Y‖₂` (largest singular value), rescaling `Y → cY` rescales
    /// balanced factors by `√c` each, so the penalty weights scale as
    /// `s^{3/2}` to keep the fit and penalty terms in proportion. η only
    /// keeps the square roots differentiable at zero columns and is tied to
    /// the typical pixel norm:
    ///
    /// * `δ  = DEFAULT_DELTA_SCALE   · s^{3/2}`
    /// * `λ₁ = DEFAULT_LAMBDA1_SCALE · s^{3/2} / √K`
    /// * `η  = DEFAULT_ETA_SCALE · mean column norm of Y`
    pub fn for_observation(y: &ObservationMatrix, r: usize) -> Self {
        let s = spectral_norm(y.as_matrix());
        let k = y.pixels() as f64;
        let mean_col_norm =
            y.as_matrix().column_iter().map(|c| c.norm()).sum::<f64>() / y.pixels() as f64;
        let eta = (DEFAULT_ETA_SCALE * mean_col_norm).max(f64::MIN_POSITIVE.sqrt());
        Self::new(
            r,
            DEFAULT_DELTA_SCALE * s.powf(1.5),
            DEFAULT_LAMBDA1_SCALE * s.powf(1.5) / k.sqrt(),
            eta,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::param("r", "must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::param("delta", format!("must be >= 0, got {}", self.delta)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(Error::param(
                "lambda1",
                format!("must be >= 0, got {}", self.lambda1),
            ));
        }
        if !(self.tol_rel_cost >= 0.0) {
            return Err(Error::param("tol_rel_cost", "must be >= 0"));
        }
        if !(self.prune_tol >= 0.0 && self.prune_tol.is_finite()) {
            return Err(Error::param("prune_tol", "must be >= 0"));
        }
        let ls = &self.line_search;
        if !(ls.beta_init > 0.0 && ls.beta_init <= 1.0) {
            return Err(Error::param(
                "beta_init",
                format!("must lie in (0, 1], got {}", ls.beta_init),
            ));
        }
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(Error::param(
                "shrink",
                format!("must lie in (0, 1), got {}", ls.shrink),
            ));
        }
        if ls.max_backtracks == 0 {
            return Err(Error::param("max_backtracks", "must be at least 1"));
        }
        Ok(())
    }
}

/// Largest singular value, by power iteration on YᵀY.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.tr_mul(m);
    let mut v = Vector::from_element(gram.nrows(), 1.0 / (gram.nrows() as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..500 {
        let next = &gram * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let converged = (norm - lambda).abs() <= 1e-13 * norm;
        lambda = norm;
        v = next / norm;
        if converged {
            break;
        }
    }
    lambda.sqrt()
}

/// Squared Euclidean norm of every column.
pub fn column_sq_norms(m: &Mat) -> Vector {
    Vector::from_iterator(m.ncols(), m.column_iter().map(|c| c.norm_squared()))
}

/// ½‖Y − ΦWᵀ‖²_F.
pub(crate) fn fit_term(y: &Mat, phi: &Mat, w: &Mat) -> f64 {
    let mut residual = y.clone();
    residual.gemm(-1.0, phi, &w.transpose(), 1.0);
    0.5 * residual.norm_squared()
}

pub(crate) fn low_rank_term(phi: &Mat, w: &Mat, delta: f64, eta: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let eta2 = eta * eta;
    let sum: f64 = phi
        .column_iter()
        .zip(w.column_iter())
        .map(|(p, q)| (p.norm_squared() + q.norm_squared() + eta2).sqrt())
        .sum();
    delta * sum
}

pub(crate) fn l1_term(w: &Mat, lambda1: f64) -> f64 {
    if lambda1 == 0.0 {
        return 0.0;
    }
    lambda1 * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Evaluation context binding the observation matrix once per solve.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    y: &'a ObservationMatrix,
}

impl<'a> Problem<'a> {
    pub fn new(y: &'a ObservationMatrix) -> Self {
        Self { y }
    }

    pub fn observation(&self) -> &'a ObservationMatrix {
        self.y
    }

    pub fn y(&self) -> &'a Mat {
        self.y.as_matrix()
    }

    pub(crate) fn check_factors(&self, phi: &Mat, w: &Mat) -> Result<()> {
        let y = self.y();
        if phi.nrows() != y.nrows() {
            return Err(Error::dims("endmember rows", y.nrows(), phi.nrows()));
        }
        if w.nrows() != y.ncols() {
            return Err(Error::dims("abundance rows", y.ncols(), w.nrows()));
        }
        if phi.ncols() != w.ncols() {
            return Err(Error::dims("shared rank of Φ and W", phi.ncols(), w.ncols()));
        }
        Ok(())
    }

    fn check_penalty(&self, phi: &Mat, d: &PenaltyDiagonal) -> Result<()> {
        if d.len() != phi.ncols() {
            return Err(Error::dims("penalty diagonal length", phi.ncols(), d.len()));
        }
        Ok(())
    }

    /// `½‖Y − ΦWᵀ‖²_F + δ Σᵢ sqrt(‖φᵢ‖² + ‖wᵢ‖² + η²)`.
    pub fn cost_smooth(
        &self,
        phi: &EndmemberMatrix,
        w: &AbundanceMatrix,
        config: &SolverConfig,
    ) -> Result<f64> {
        self.check_factors(phi.as_matrix(), w.as_matrix())?;
        let c = self.smooth_raw(phi.as_matrix(), w.as_matrix(), config.delta, config.eta);
        if !c.is_finite() {
            return Err(Error::NonFiniteCost { iteration: 0 });
        }
        Ok(c)
    }

    /// [`cost_smooth`](Self::cost_smooth) plus `λ₁‖W‖₁`.
    pub fn cost_total(
        &self,
        phi: &EndmemberMatrix,
        w: &AbundanceMatrix,
        config: &SolverConfig,
    ) -> Result<f64> {
        self.check_factors(phi.as_matrix(), w.as_matrix())?;
        let c = self.total_raw(phi.as_matrix(), w.as_matrix(), config);
        if !c.is_finite() {
            return Err(Error::NonFiniteCost { iteration: 0 });
        }
        Ok(c)
    }

    /// Exact gradient of the smooth cost in W: `W(ΦᵀΦ) − YᵀΦ + WD`.
    pub fn grad_w(
        &self,
        phi: &EndmemberMatrix,
        w: &AbundanceMatrix,
        d: &PenaltyDiagonal,
    ) -> Result<Mat> {
        self.check_factors(phi.as_matrix(), w.as_matrix())?;
        self.check_penalty(phi.as_matrix(), d)?;
        Ok(self.grad_w_raw(phi.as_matrix(), w.as_matrix(), d.as_vector()))
    }

    /// Exact gradient of the smooth cost in Φ: `Φ(WᵀW) − YW + ΦD`.
    pub fn grad_phi(
        &self,
        phi: &EndmemberMatrix,
        w: &AbundanceMatrix,
        d: &PenaltyDiagonal,
    ) -> Result<Mat> {
        self.check_factors(phi.as_matrix(), w.as_matrix())?;
        self.check_penalty(phi.as_matrix(), d)?;
        Ok(self.grad_phi_raw(phi.as_matrix(), w.as_matrix(), d.as_vector()))
    }

    pub(crate) fn smooth_raw(&self, phi: &Mat, w: &Mat, delta: f64, eta: f64) -> f64 {
        fit_term(self.y(), phi, w) + low_rank_term(phi, w, delta, eta)
    }

    pub(crate) fn total_raw(&self, phi: &Mat, w: &Mat, config: &SolverConfig) -> f64 {
        self.smooth_raw(phi, w, config.delta, config.eta) + l1_term(w, config.lambda1)
    }

    pub(crate) fn grad_w_raw(&self, phi: &Mat, w: &Mat, d: &Vector) -> Mat {
        let gram = at_b(phi, phi);
        let mut g = w * gram;
        g.gemm(-1.0, &self.y().transpose(), phi, 1.0);
        add_scaled_columns(&mut g, w, d);
        g
    }

    pub(crate) fn grad_phi_raw(&self, phi: &Mat, w: &Mat, d: &Vector) -> Mat {
        let gram = at_b(w, w);
        let mut g = phi * gram;
        g.gemm(-1.0, self.y(), w, 1.0);
        add_scaled_columns(&mut g, phi, d);
        g
    }
}

/// `g += m · diag(d)`.
fn add_scaled_columns(g: &mut Mat, m: &Mat, d: &Vector) {
    for (j, &dj) in d.iter().enumerate() {
        if dj != 0.0 {
            g.column_mut(j).axpy(dj, &m.column(j), 1.0);
        }
    }
}
