//! Alternating inexact proximal Newton solver with ℓ2/ℓ1 reweighting,
//! extrapolation and backtracking.
//!
//! One outer iteration:
//!
//! 1. `W ← P₊(ST([(Φ̂ᵀΦ̂ + D̂)⁻¹Φ̂ᵀY]ᵀ, λ₁))`, then `Ŵ ← Ŵ + β_W (W − Ŵ)`
//! 2. `Φ ← P₊([(ŴᵀŴ + D̂)⁻¹ŴᵀYᵀ]ᵀ)`, then `Φ̂ ← Φ̂ + β_Φ (Φ − Φ̂)`
//! 3. `d̂ᵢᵢ ← δ / sqrt(‖φ̂ᵢ‖² + ‖ŵᵢ‖² + η²)`
//!
//! Each β is chosen by backtracking so that the total cost never increases.
//! The closed-form step projects an unconstrained Newton step, which is not
//! always a descent direction once constraints become active. When its full
//! step is rejected the solver also tries a projected Newton step restricted
//! to the free variables of each row (variables pinned at zero by a positive
//! gradient are held fixed) and keeps whichever trial point is cheaper.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{at_b, spd_solve, spd_solve_ridged};
use crate::model::{
    column_sq_norms, AbundanceMatrix, EndmemberMatrix, Mat, ObservationMatrix, PenaltyDiagonal,
    Problem, SolverConfig, Vector,
};

/// Entrywise `sign(x)·max(|x| − λ, 0)`.
pub fn soft_threshold(x: &Mat, lambda: f64) -> Result<Mat> {
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", format!("must be >= 0, got {lambda}")));
    }
    Ok(x.map(|v| soft_threshold_scalar(v, lambda)))
}

#[inline]
pub(crate) fn soft_threshold_scalar(v: f64, lambda: f64) -> f64 {
    let m = v.abs() - lambda;
    if m > 0.0 {
        m.copysign(v)
    } else {
        0.0
    }
}

/// Entrywise `max(x, 0)`.
pub fn project_nonneg(x: &Mat) -> Mat {
    x.map(|v| v.max(0.0))
}

/// `δ / sqrt(‖φᵢ‖² + ‖wᵢ‖² + η²)` for every column pair.
pub fn update_penalty_diag(
    phi: &EndmemberMatrix,
    w: &AbundanceMatrix,
    delta: f64,
    eta: f64,
) -> Result<PenaltyDiagonal> {
    if !(eta > 0.0) {
        return Err(Error::param("eta", format!("must be > 0, got {eta}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::param("delta", format!("must be >= 0, got {delta}")));
    }
    if phi.rank() != w.rank() {
        return Err(Error::dims("shared rank of Φ and W", phi.rank(), w.rank()));
    }
    Ok(penalty_diag_raw(phi.as_matrix(), w.as_matrix(), delta, eta))
}

pub(crate) fn penalty_diag_raw(phi: &Mat, w: &Mat, delta: f64, eta: f64) -> PenaltyDiagonal {
    let energy = column_sq_norms(phi) + column_sq_norms(w);
    let eta2 = eta * eta;
    PenaltyDiagonal::from_vector(energy.map(|e| delta / (e + eta2).sqrt()))
}

fn gram_plus_diag(m: &Mat, d: &Vector) -> Mat {
    let mut h = at_b(m, m);
    for (i, di) in d.iter().enumerate() {
        h[(i, i)] += di;
    }
    h
}

fn check_penalty_len(d: &PenaltyDiagonal, r: usize) -> Result<()> {
    if d.len() != r {
        return Err(Error::dims("penalty diagonal length", r, d.len()));
    }
    Ok(())
}

/// Closed-form abundance update
/// `P₊(ST([(Φ̂ᵀΦ̂ + D̂)⁻¹Φ̂ᵀY]ᵀ, λ₁))`, a K×r matrix.
pub fn update_abundances(
    y: &ObservationMatrix,
    phi_hat: &EndmemberMatrix,
    d_hat: &PenaltyDiagonal,
    lambda1: f64,
) -> Result<AbundanceMatrix> {
    if phi_hat.nrows() != y.bands() {
        return Err(Error::dims("endmember rows", y.bands(), phi_hat.nrows()));
    }
    check_penalty_len(d_hat, phi_hat.rank())?;
    if !(lambda1 >= 0.0) {
        return Err(Error::param("lambda1", format!("must be >= 0, got {lambda1}")));
    }
    let phi = phi_hat.as_matrix();
    let h = gram_plus_diag(phi, d_hat.as_vector());
    let x = spd_solve(&h, &at_b(phi, y.as_matrix()), "abundance update")?;
    Ok(AbundanceMatrix::from_nonneg_unchecked(shrink_project(
        &x.transpose(),
        lambda1,
    )))
}

/// Closed-form endmember update `P₊([(ŴᵀŴ + D̂)⁻¹ŴᵀYᵀ]ᵀ)`, an L×r matrix.
pub fn update_endmembers(
    y: &ObservationMatrix,
    w_hat: &AbundanceMatrix,
    d_hat: &PenaltyDiagonal,
) -> Result<EndmemberMatrix> {
    if w_hat.nrows() != y.pixels() {
        return Err(Error::dims("abundance rows", y.pixels(), w_hat.nrows()));
    }
    check_penalty_len(d_hat, w_hat.rank())?;
    let w = w_hat.as_matrix();
    let h = gram_plus_diag(w, d_hat.as_vector());
    let rhs = (y.as_matrix() * w).transpose();
    let x = spd_solve(&h, &rhs, "endmember update")?;
    Ok(EndmemberMatrix::from_nonneg_unchecked(project_nonneg(
        &x.transpose(),
    )))
}

fn shrink_project(x: &Mat, lambda1: f64) -> Mat {
    x.map(|v| soft_threshold_scalar(v, lambda1).max(0.0))
}

/// `prev + β (candidate − prev)` for β in (0, 1].
pub fn extrapolate(prev: &Mat, candidate: &Mat, beta: f64) -> Result<Mat> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param("beta", format!("must lie in (0, 1], got {beta}")));
    }
    if prev.shape() != candidate.shape() {
        return Err(Error::dims(
            "extrapolation operands",
            format!("{:?}", prev.shape()),
            format!("{:?}", candidate.shape()),
        ));
    }
    Ok(blend(prev, candidate, beta))
}

fn blend(prev: &Mat, candidate: &Mat, beta: f64) -> Mat {
    if beta == 1.0 {
        return candidate.clone();
    }
    prev.zip_map(candidate, |p, c| p + beta * (c - p))
}

/// Which factor a block update acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    Abundances,
    Endmembers,
}

/// Iterate carried between block updates.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub phi_hat: Mat,
    pub w_hat: Mat,
    pub d_hat: PenaltyDiagonal,
    pub beta_w: f64,
    pub beta_phi: f64,
    pub k: usize,
    /// Total cost at `(phi_hat, w_hat)`.
    pub last_cost: f64,
}

impl SolverState {
    pub fn new(
        problem: &Problem<'_>,
        phi: &EndmemberMatrix,
        w: &AbundanceMatrix,
        config: &SolverConfig,
    ) -> Result<Self> {
        problem.check_factors(phi.as_matrix(), w.as_matrix())?;
        let phi_hat = phi.as_matrix().clone();
        let w_hat = w.as_matrix().clone();
        let d_hat = penalty_diag_raw(&phi_hat, &w_hat, config.delta, config.eta);
        let last_cost = problem.total_raw(&phi_hat, &w_hat, config);
        Ok(Self {
            phi_hat,
            w_hat,
            d_hat,
            beta_w: config.line_search.beta_init,
            beta_phi: config.line_search.beta_init,
            k: 0,
            last_cost,
        })
    }

    fn current(&self, which: Block) -> &Mat {
        match which {
            Block::Abundances => &self.w_hat,
            Block::Endmembers => &self.phi_hat,
        }
    }

    fn cost_with(&self, problem: &Problem<'_>, which: Block, x: &Mat, config: &SolverConfig) -> f64 {
        match which {
            Block::Abundances => problem.total_raw(&self.phi_hat, x, config),
            Block::Endmembers => problem.total_raw(x, &self.w_hat, config),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub accepted: Mat,
    /// Step actually taken; 0 when every trial increased the cost.
    pub beta: f64,
    pub cost: f64,
    /// Cost evaluations spent (the baseline is taken from the state).
    pub evaluations: usize,
}

impl LineSearchOutcome {
    pub fn moved(&self) -> bool {
        self.beta > 0.0
    }
}

/// Backtracking over `β ∈ {β₀, β₀s, β₀s², …}` for the extrapolated iterate
/// `X̂ + β (candidate − X̂)`. The first β whose total cost does not exceed the
/// state's cost is taken; if none qualifies the previous iterate is returned
/// with β = 0.
pub fn line_search(
    problem: &Problem<'_>,
    state: &SolverState,
    candidate: &Mat,
    which: Block,
    config: &SolverConfig,
) -> LineSearchOutcome {
    let prev = state.current(which);
    backtrack(state, config, |beta| {
        let x = blend(prev, candidate, beta);
        let c = state.cost_with(problem, which, &x, config);
        Some((x, c))
    })
    .unwrap_or_else(|evaluations| LineSearchOutcome {
        accepted: prev.clone(),
        beta: 0.0,
        cost: state.last_cost,
        evaluations,
    })
}

fn backtrack(
    state: &SolverState,
    config: &SolverConfig,
    mut trial: impl FnMut(f64) -> Option<(Mat, f64)>,
) -> std::result::Result<LineSearchOutcome, usize> {
    let ls = &config.line_search;
    let mut beta = ls.beta_init;
    for evaluations in 1..=ls.max_backtracks {
        if let Some((x, c)) = trial(beta) {
            if c <= state.last_cost {
                return Ok(LineSearchOutcome {
                    accepted: x,
                    beta,
                    cost: c,
                    evaluations,
                });
            }
        }
        beta *= ls.shrink;
    }
    Err(ls.max_backtracks)
}

/// Cost as a function of one block with the other held fixed, expanded
/// through Gram matrices: `½‖Y‖² − ⟨X, B⟩ + ½⟨XᵀX, G⟩ + penalties`, with
/// `(B, G) = (YᵀΦ, ΦᵀΦ)` for W and `(YW, WᵀW)` for Φ. One evaluation costs
/// O(n r²) instead of O(L K r), which makes rejecting line-search trials
/// cheap. It loses a few digits to cancellation, so it only screens trials;
/// acceptance is decided on the exact cost.
struct BlockCost<'a> {
    half_yy: f64,
    b: &'a Mat,
    gram: Mat,
    other_sq: Vector,
    delta: f64,
    eta2: f64,
    lambda1: f64,
}

impl BlockCost<'_> {
    fn eval(&self, x: &Mat) -> f64 {
        let xtx = at_b(x, x);
        let fit = self.half_yy - x.dot(self.b) + 0.5 * xtx.dot(&self.gram);
        let mut penalty = 0.0;
        if self.delta != 0.0 {
            for j in 0..x.ncols() {
                penalty += (xtx[(j, j)] + self.other_sq[j] + self.eta2).sqrt();
            }
            penalty *= self.delta;
        }
        let l1 = if self.lambda1 != 0.0 {
            self.lambda1 * x.iter().map(|v| v.abs()).sum::<f64>()
        } else {
            0.0
        };
        fit.max(0.0) + penalty + l1
    }

    /// Whether `x` might not increase the cost, with a relative margin well
    /// above the cancellation error of [`eval`](Self::eval).
    fn may_accept(&self, x: &Mat, baseline: f64) -> bool {
        let margin = 1e-9 * (baseline.abs() + self.half_yy);
        self.eval(x) <= baseline + margin
    }
}

/// Newton direction restricted, row by row, to the variables that are not
/// held at the zero bound by a positive gradient. Rows sharing a free set
/// share one factorization.
fn free_set_newton_direction(x: &Mat, grad: &Mat, hess: &Mat) -> Mat {
    let r = x.ncols();
    let mut pg_norm2 = 0.0;
    let mut xmax = 0.0_f64;
    for (xi, gi) in x.iter().zip(grad.iter()) {
        let step = xi - (xi - gi).max(0.0);
        pg_norm2 += step * step;
        xmax = xmax.max(*xi);
    }
    let eps = (1e-3 * xmax).min(pg_norm2.sqrt());

    let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for i in 0..x.nrows() {
        let free: Vec<bool> = (0..r)
            .map(|j| !(x[(i, j)] <= eps && grad[(i, j)] > 0.0))
            .collect();
        groups.entry(free).or_default().push(i);
    }

    let mut dir = Mat::zeros(x.nrows(), r);
    for (free, rows) in groups {
        let idx: Vec<usize> = (0..r).filter(|&j| free[j]).collect();
        if idx.is_empty() {
            continue;
        }
        let h = Mat::from_fn(idx.len(), idx.len(), |a, b| hess[(idx[a], idx[b])]);
        let rhs = Mat::from_fn(idx.len(), rows.len(), |a, b| -grad[(rows[b], idx[a])]);
        let sol = spd_solve_ridged(&h, &rhs);
        for (b, &row) in rows.iter().enumerate() {
            for (a, &col) in idx.iter().enumerate() {
                dir[(row, col)] = sol[(a, b)];
            }
        }
    }
    dir
}

/// How a block update was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    /// Extrapolation toward the closed-form candidate.
    ClosedForm,
    /// Free-set projected Newton step.
    FreeSetNewton,
    /// No trial decreased the cost.
    Rejected,
}

struct BlockStep {
    outcome: LineSearchOutcome,
    kind: StepKind,
    evaluations: usize,
}

fn block_step(
    problem: &Problem<'_>,
    state: &SolverState,
    which: Block,
    config: &SolverConfig,
) -> BlockStep {
    let y = problem.y();
    let d = state.d_hat.as_vector();
    let (fixed, hess, rhs_t) = match which {
        Block::Abundances => (
            &state.phi_hat,
            gram_plus_diag(&state.phi_hat, d),
            at_b(&state.phi_hat, y),
        ),
        Block::Endmembers => (
            &state.w_hat,
            gram_plus_diag(&state.w_hat, d),
            (y * &state.w_hat).transpose(),
        ),
    };
    let b = rhs_t.transpose();
    let screen = BlockCost {
        half_yy: 0.5 * y.norm_squared(),
        b: &b,
        gram: at_b(fixed, fixed),
        other_sq: column_sq_norms(fixed),
        delta: config.delta,
        eta2: config.eta * config.eta,
        lambda1: match which {
            Block::Abundances => config.lambda1,
            Block::Endmembers => 0.0,
        },
    };
    let mut exact_evaluations = 0;
    let mut try_point = |x: Mat| -> Option<(Mat, f64)> {
        if !screen.may_accept(&x, state.last_cost) {
            return None;
        }
        exact_evaluations += 1;
        let c = state.cost_with(problem, which, &x, config);
        Some((x, c))
    };

    let unconstrained = spd_solve_ridged(&hess, &rhs_t).transpose();
    let candidate = match which {
        Block::Abundances => shrink_project(&unconstrained, config.lambda1),
        Block::Endmembers => project_nonneg(&unconstrained),
    };
    let x = state.current(which);
    let closed = backtrack(state, config, |beta| try_point(blend(x, &candidate, beta)));
    if let Ok(outcome) = &closed {
        if outcome.beta == config.line_search.beta_init {
            return BlockStep {
                outcome: closed.unwrap(),
                kind: StepKind::ClosedForm,
                evaluations: exact_evaluations,
            };
        }
    }

    // Gradient of the smooth part plus, for W, the ℓ1 term (linear on the
    // nonnegative orthant).
    let mut grad = x * &hess;
    grad -= &b;
    if which == Block::Abundances {
        grad.add_scalar_mut(config.lambda1);
    }
    let dir = free_set_newton_direction(x, &grad, &hess);
    let newton = backtrack(state, config, |beta| {
        try_point(x.zip_map(&dir, |xi, di| (xi + beta * di).max(0.0)))
    });

    let (outcome, kind) = match (closed, newton) {
        (Ok(c), Ok(n)) if c.cost <= n.cost => (c, StepKind::ClosedForm),
        (_, Ok(n)) => (n, StepKind::FreeSetNewton),
        (Ok(c), Err(_)) => (c, StepKind::ClosedForm),
        (Err(_), Err(_)) => (
            LineSearchOutcome {
                accepted: x.clone(),
                beta: 0.0,
                cost: state.last_cost,
                evaluations: 0,
            },
            StepKind::Rejected,
        ),
    };
    BlockStep {
        outcome,
        kind,
        evaluations: exact_evaluations,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankReport {
    pub surviving: Vec<usize>,
    pub effective_rank: usize,
    /// Every column fell below the tolerance.
    pub degenerate: bool,
}

/// Column pair `i` survives iff `sqrt(‖φᵢ‖² + ‖wᵢ‖²) > prune_tol · maxⱼ(…)`.
pub fn prune_and_report_rank(
    phi: &EndmemberMatrix,
    w: &AbundanceMatrix,
    prune_tol: f64,
) -> Result<RankReport> {
    if !(prune_tol >= 0.0) {
        return Err(Error::param("prune_tol", "must be >= 0"));
    }
    if phi.rank() != w.rank() {
        return Err(Error::dims("shared rank of Φ and W", phi.rank(), w.rank()));
    }
    Ok(rank_raw(phi.as_matrix(), w.as_matrix(), prune_tol))
}

pub(crate) fn rank_raw(phi: &Mat, w: &Mat, prune_tol: f64) -> RankReport {
    let energy = (column_sq_norms(phi) + column_sq_norms(w)).map(f64::sqrt);
    let max = energy.iter().copied().fold(0.0, f64::max);
    let surviving: Vec<usize> = if max > 0.0 {
        energy
            .iter()
            .enumerate()
            .filter(|(_, e)| **e > prune_tol * max)
            .map(|(i, _)| i)
            .collect()
    } else {
        Vec::new()
    };
    RankReport {
        effective_rank: surviving.len(),
        degenerate: surviving.is_empty(),
        surviving,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Relative cost change fell below `tol_rel_cost`.
    Converged,
    MaxIterations,
}

/// Per-solve trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub initial_cost: f64,
    /// Total cost at the end of every iteration.
    pub cost_trace: Vec<f64>,
    pub effective_rank_trace: Vec<usize>,
    pub beta_w_trace: Vec<f64>,
    pub beta_phi_trace: Vec<f64>,
    /// Number of block updates taken by the free-set Newton fallback.
    pub fallback_steps: usize,
    pub cost_evaluations: usize,
    pub final_effective_rank: usize,
    pub surviving_column_indices: Vec<usize>,
    pub degenerate: bool,
    pub stop_reason: StopReason,
    /// Excluded from equality comparisons of runs.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl SolverReport {
    pub fn final_cost(&self) -> f64 {
        self.cost_trace.last().copied().unwrap_or(self.initial_cost)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Surviving endmember columns, L×N_eff.
    pub phi: EndmemberMatrix,
    /// Surviving abundance columns, K×N_eff.
    pub w: AbundanceMatrix,
    pub report: SolverReport,
}

/// Runs the alternating algorithm from `(init_phi, init_w)` and returns the
/// factors restricted to the surviving column pairs.
pub fn solve(
    y: &ObservationMatrix,
    init_phi: &EndmemberMatrix,
    init_w: &AbundanceMatrix,
    config: &SolverConfig,
) -> Result<Solution> {
    let (phi, w, report) = solve_full(y, init_phi, init_w, config)?;
    let phi = EndmemberMatrix::from_nonneg_unchecked(
        phi.select_columns(report.surviving_column_indices.iter()),
    );
    let w = AbundanceMatrix::from_nonneg_unchecked(
        w.select_columns(report.surviving_column_indices.iter()),
    );
    Ok(Solution { phi, w, report })
}

/// `Instant::now` panics on wasm32-unknown-unknown, so runs there report a
/// wall time of zero.
fn start_clock() -> Option<Instant> {
    if cfg!(target_arch = "wasm32") {
        None
    } else {
        Some(Instant::now())
    }
}

/// Same as [`solve`] but returns the uncompacted r-column iterates.
pub fn solve_full(
    y: &ObservationMatrix,
    init_phi: &EndmemberMatrix,
    init_w: &AbundanceMatrix,
    config: &SolverConfig,
) -> Result<(Mat, Mat, SolverReport)> {
    config.validate()?;
    if init_phi.rank() != config.r {
        return Err(Error::dims("initial rank vs config.r", config.r, init_phi.rank()));
    }
    let problem = Problem::new(y);
    let started = start_clock();
    let mut state = SolverState::new(&problem, init_phi, init_w, config)?;
    if !state.last_cost.is_finite() {
        return Err(Error::NonFiniteCost { iteration: 0 });
    }

    let mut report = SolverReport {
        iterations: 0,
        initial_cost: state.last_cost,
        cost_trace: Vec::new(),
        effective_rank_trace: Vec::new(),
        beta_w_trace: Vec::new(),
        beta_phi_trace: Vec::new(),
        fallback_steps: 0,
        cost_evaluations: 1,
        final_effective_rank: 0,
        surviving_column_indices: Vec::new(),
        degenerate: false,
        stop_reason: StopReason::MaxIterations,
        wall_time_secs: 0.0,
    };

    for k in 1..=config.max_iter {
        let previous = state.last_cost;

        let step = block_step(&problem, &state, Block::Abundances, config);
        report.cost_evaluations += step.evaluations;
        report.fallback_steps += usize::from(step.kind == StepKind::FreeSetNewton);
        state.w_hat = step.outcome.accepted;
        state.beta_w = step.outcome.beta;
        state.last_cost = step.outcome.cost;

        let step = block_step(&problem, &state, Block::Endmembers, config);
        report.cost_evaluations += step.evaluations;
        report.fallback_steps += usize::from(step.kind == StepKind::FreeSetNewton);
        state.phi_hat = step.outcome.accepted;
        state.beta_phi = step.outcome.beta;
        state.last_cost = step.outcome.cost;

        state.d_hat = penalty_diag_raw(&state.phi_hat, &state.w_hat, config.delta, config.eta);
        state.k = k;

        if !state.last_cost.is_finite() {
            return Err(Error::NonFiniteCost { iteration: k });
        }
        report.iterations = k;
        report.cost_trace.push(state.last_cost);
        report.beta_w_trace.push(state.beta_w);
        report.beta_phi_trace.push(state.beta_phi);
        report
            .effective_rank_trace
            .push(rank_raw(&state.phi_hat, &state.w_hat, config.prune_tol).effective_rank);

        if (previous - state.last_cost).abs() <= config.tol_rel_cost * previous.abs() {
            report.stop_reason = StopReason::Converged;
            break;
        }
    }

    let rank = rank_raw(&state.phi_hat, &state.w_hat, config.prune_tol);
    report.final_effective_rank = rank.effective_rank;
    report.surviving_column_indices = rank.surviving;
    report.degenerate = rank.degenerate;
    report.wall_time_secs = started.map_or(0.0, |t| t.elapsed().as_secs_f64());
    Ok((state.phi_hat, state.w_hat, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    #[test]
    fn soft_threshold_basics() {
        let x = mat(1, 3, &[2.5, -0.3, 0.0]);
        let st = soft_threshold(&x, 1.0).unwrap();
        assert_eq!(st, mat(1, 3, &[1.5, 0.0, 0.0]));
        assert_eq!(soft_threshold(&x, 0.0).unwrap(), x);
        assert_eq!(soft_threshold(&mat(1, 1, &[-3.0]), 1.0).unwrap()[(0, 0)], -2.0);
        assert!(soft_threshold(&x, -1.0).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            project_nonneg(&mat(2, 2, &[-1.0, 2.0, 0.0, -3.0])),
            mat(2, 2, &[0.0, 2.0, 0.0, 0.0])
        );
        let pos = mat(1, 2, &[0.5, 3.0]);
        assert_eq!(project_nonneg(&pos), pos);
        assert_eq!(project_nonneg(&mat(1, 2, &[-0.5, -3.0])), Mat::zeros(1, 2));
    }

    #[test]
    fn penalty_diag_examples() {
        let phi = EndmemberMatrix::new(mat(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0])).unwrap();
        let w = AbundanceMatrix::new(mat(1, 2, &[1.0, 0.0])).unwrap();
        // column 0: ‖φ‖² = 3, ‖w‖² = 1, tiny η → 2/√4
        let d = update_penalty_diag(&phi, &w, 2.0, 1e-12).unwrap();
        assert_relative_eq!(d.as_vector()[0], 1.0, epsilon = 1e-12);
        // column 1 is zero → δ/η
        let d = update_penalty_diag(&phi, &w, 2.0, 0.5).unwrap();
        assert_eq!(d.as_vector()[1], 4.0);
        let d = update_penalty_diag(&phi, &w, 0.0, 0.5).unwrap();
        assert!(d.as_vector().iter().all(|v| *v == 0.0));
        assert!(update_penalty_diag(&phi, &w, 1.0, 0.0).is_err());
    }

    #[test]
    fn extrapolate_examples() {
        let prev = Mat::zeros(2, 2);
        let cand = mat(2, 2, &[2.0, 4.0, 6.0, 8.0]);
        assert_eq!(extrapolate(&prev, &cand, 1.0).unwrap(), cand);
        assert_eq!(extrapolate(&prev, &cand, 0.5).unwrap(), &cand / 2.0);
        assert_eq!(extrapolate(&cand, &cand, 0.3).unwrap(), cand);
        assert!(extrapolate(&prev, &cand, 0.0).is_err());
        assert!(extrapolate(&prev, &cand, 1.2).is_err());
    }

    #[test]
    fn zero_observation_gives_zero_updates() {
        let y = ObservationMatrix::new(Mat::zeros(4, 5)).unwrap();
        let phi = EndmemberMatrix::new(Mat::from_element(4, 2, 0.5)).unwrap();
        let w = AbundanceMatrix::new(Mat::from_element(5, 2, 0.5)).unwrap();
        let d = update_penalty_diag(&phi, &w, 0.3, 0.1).unwrap();
        assert_eq!(update_abundances(&y, &phi, &d, 0.1).unwrap().as_matrix(), &Mat::zeros(5, 2));
        assert_eq!(update_endmembers(&y, &w, &d).unwrap().as_matrix(), &Mat::zeros(4, 2));
    }

    #[test]
    fn large_lambda_zeroes_abundances() {
        let y = ObservationMatrix::new(Mat::from_fn(4, 3, |i, j| (i + j) as f64 * 0.1)).unwrap();
        let phi = EndmemberMatrix::new(Mat::from_fn(4, 2, |i, j| 0.2 + 0.1 * (i * j) as f64)).unwrap();
        let d = PenaltyDiagonal::from_vector(Vector::from_element(2, 0.1));
        let w = update_abundances(&y, &phi, &d, 1e6).unwrap();
        assert!(w.as_matrix().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn singular_update_reports_pivot() {
        let y = ObservationMatrix::new(Mat::from_element(3, 2, 1.0)).unwrap();
        let phi = EndmemberMatrix::new(Mat::zeros(3, 2)).unwrap();
        let d = PenaltyDiagonal::from_vector(Vector::zeros(2));
        assert!(matches!(
            update_abundances(&y, &phi, &d, 0.0),
            Err(Error::Solve { .. })
        ));
    }

    #[test]
    fn rank_report_examples() {
        let mut phi = Mat::from_element(3, 10, 1.0);
        let mut w = Mat::from_element(4, 10, 1.0);
        let full = rank_raw(&phi, &w, 1e-4);
        assert_eq!(full.effective_rank, 10);
        for j in 4..10 {
            phi.column_mut(j).fill(0.0);
            w.column_mut(j).fill(0.0);
        }
        let r = rank_raw(&phi, &w, 1e-4);
        assert_eq!(r.effective_rank, 4);
        assert_eq!(r.surviving, vec![0, 1, 2, 3]);
        phi.column_mut(0).scale_mut(1e-12);
        w.column_mut(0).scale_mut(1e-12);
        assert_eq!(rank_raw(&phi, &w, 1e-6).surviving, vec![1, 2, 3]);
        let zero = rank_raw(&Mat::zeros(3, 2), &Mat::zeros(4, 2), 1e-4);
        assert!(zero.degenerate);
        assert_eq!(zero.effective_rank, 0);
    }

    #[test]
    fn line_search_rejects_ascent_candidate() {
        let y = ObservationMatrix::new(mat(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let problem = Problem::new(&y);
        let phi = EndmemberMatrix::new(Mat::identity(2, 2)).unwrap();
        let w = AbundanceMatrix::new(Mat::identity(2, 2)).unwrap();
        let cfg = SolverConfig::new(2, 0.0, 0.0, 1e-3);
        let state = SolverState::new(&problem, &phi, &w, &cfg).unwrap();
        // Y = ΦWᵀ already; any move away increases the cost.
        let cand = Mat::from_element(2, 2, 3.0);
        let out = line_search(&problem, &state, &cand, Block::Abundances, &cfg);
        assert_eq!(out.beta, 0.0);
        assert_eq!(out.accepted, *w.as_matrix());
        assert_eq!(out.evaluations, cfg.line_search.max_backtracks);
        // and the candidate equal to the iterate is accepted at once
        let out = line_search(&problem, &state, w.as_matrix(), Block::Abundances, &cfg);
        assert_eq!(out.beta, 1.0);
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.cost, state.last_cost);
    }

    #[test]
    fn max_iter_zero_returns_initialization() {
        let y = ObservationMatrix::new(Mat::from_element(3, 4, 0.5)).unwrap();
        let phi = EndmemberMatrix::new(Mat::from_element(3, 2, 0.3)).unwrap();
        let w = AbundanceMatrix::new(Mat::from_element(4, 2, 0.7)).unwrap();
        let mut cfg = SolverConfig::new(2, 0.1, 0.01, 1e-2);
        cfg.max_iter = 0;
        let sol = solve(&y, &phi, &w, &cfg).unwrap();
        assert_eq!(sol.phi, phi);
        assert_eq!(sol.w, w);
        assert!(sol.report.cost_trace.is_empty());
        assert_eq!(sol.report.iterations, 0);
    }

    #[test]
    fn rank_mismatch_is_an_error() {
        let y = ObservationMatrix::new(Mat::from_element(3, 4, 0.5)).unwrap();
        let phi = EndmemberMatrix::new(Mat::from_element(3, 2, 0.3)).unwrap();
        let w = AbundanceMatrix::new(Mat::from_element(4, 2, 0.7)).unwrap();
        let cfg = SolverConfig::new(3, 0.1, 0.01, 1e-2);
        assert!(matches!(
            solve(&y, &phi, &w, &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
