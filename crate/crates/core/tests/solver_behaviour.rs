mod common;

use common::*;
use lrsnmf::init::init_uniform;
use lrsnmf::solver::{
    extrapolate, line_search, project_nonneg, prune_and_report_rank, soft_threshold, solve_full,
    update_abundances, update_endmembers, update_penalty_diag, Block, SolverState,
};
use lrsnmf::{
    solve, AbundanceMatrix, EndmemberMatrix, Mat, ObservationMatrix, PenaltyDiagonal, Problem,
    SolverConfig,
};
use nalgebra::DVector;

fn em(m: Mat) -> EndmemberMatrix {
    EndmemberMatrix::new(m).unwrap()
}

fn ab(m: Mat) -> AbundanceMatrix {
    AbundanceMatrix::new(m).unwrap()
}

#[test]
fn soft_threshold_and_projection_examples() {
    let x = Mat::from_row_slice(1, 3, &[3.0, -0.5, 0.5]);
    assert_eq!(soft_threshold(&x, 1.0).unwrap(), Mat::from_row_slice(1, 3, &[2.0, 0.0, 0.0]));
    assert_eq!(soft_threshold(&x, 0.0).unwrap(), x);
    assert!(soft_threshold(&x, -1.0).is_err());
    assert_eq!(
        soft_threshold(&Mat::from_row_slice(1, 1, &[-3.0]), 1.0).unwrap()[(0, 0)],
        -2.0
    );

    let m = Mat::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
    assert_eq!(project_nonneg(&m), Mat::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]));
    assert_eq!(project_nonneg(&m.abs()), m.abs());
    assert_eq!(project_nonneg(&(-m.abs() - Mat::from_element(2, 2, 1.0))), Mat::zeros(2, 2));
}

#[test]
fn penalty_diagonal_examples() {
    let phi = em(Mat::from_column_slice(3, 1, &[1.0, 1.0, 1.0]));
    let w = ab(Mat::from_column_slice(1, 1, &[1.0]));
    // ‖φ‖² = 3, ‖w‖² = 1, η tiny → 2/√4
    let d = update_penalty_diag(&phi, &w, 2.0, 1e-300).unwrap();
    assert!((d.as_vector()[0] - 1.0).abs() < 1e-15);

    let d0 = update_penalty_diag(&phi, &w, 0.0, 0.1).unwrap();
    assert_eq!(d0.as_vector()[0], 0.0);
    assert!(update_penalty_diag(&phi, &w, 1.0, 0.0).is_err());

    let z = update_penalty_diag(&em(Mat::zeros(3, 2)), &ab(Mat::zeros(1, 2)), 0.3, 0.1).unwrap();
    assert!(z.as_vector().iter().all(|&v| v == 0.3 / 0.1));
}

#[test]
fn extrapolate_examples() {
    let p = Mat::from_element(2, 2, 1.0);
    let c = Mat::from_element(2, 2, 3.0);
    assert_eq!(extrapolate(&p, &c, 1.0).unwrap(), c);
    assert_eq!(extrapolate(&p, &p, 0.3).unwrap(), p);
    assert_eq!(extrapolate(&Mat::zeros(2, 2), &c, 0.5).unwrap(), &c / 2.0);
    assert!(extrapolate(&p, &c, 0.0).is_err());
    assert!(extrapolate(&p, &c, 1.5).is_err());
}

#[test]
fn block_updates_trivial_cases() {
    let d = PenaltyDiagonal::new(DVector::from_vec(vec![0.1, 0.2])).unwrap();
    let mut rng = rng(11);
    let y0 = ObservationMatrix::new(Mat::zeros(5, 4)).unwrap();
    let phi = em(uniform(&mut rng, 5, 2));
    let w = ab(uniform(&mut rng, 4, 2));
    assert_eq!(*update_abundances(&y0, &phi, &d, 0.1).unwrap().as_matrix(), Mat::zeros(4, 2));
    assert_eq!(*update_endmembers(&y0, &w, &d).unwrap().as_matrix(), Mat::zeros(5, 2));

    // Thresholds above every pre-threshold magnitude empty W.
    let y = ObservationMatrix::new(uniform(&mut rng, 5, 4)).unwrap();
    assert_eq!(*update_abundances(&y, &phi, &d, 1e6).unwrap().as_matrix(), Mat::zeros(4, 2));

    // Identity abundances with a vanishing penalty give back Y.
    let eye = ab(Mat::identity(4, 4));
    let small = PenaltyDiagonal::new(DVector::from_element(4, 1e-12)).unwrap();
    let phi = update_endmembers(&y, &eye, &small).unwrap();
    assert!((phi.as_matrix() - y.as_matrix()).amax() < 1e-10);

    let wrong = PenaltyDiagonal::new(DVector::from_element(3, 0.1)).unwrap();
    assert!(update_endmembers(&y, &eye, &wrong).is_err());
}

#[test]
fn closed_form_abundances_without_constraints_hit_the_oracle() {
    // With no active constraints the closed form is the exact minimizer.
    let mut rng = rng(12);
    for _ in 0..10 {
        let phi = uniform(&mut rng, 6, 3);
        let w_true = uniform(&mut rng, 4, 3) + Mat::from_element(4, 3, 0.5);
        let y = ObservationMatrix::new(&phi * w_true.transpose()).unwrap();
        let d = vec![1e-3; 3];
        let dd = PenaltyDiagonal::new(DVector::from_vec(d.clone())).unwrap();
        let ours = update_abundances(&y, &em(phi.clone()), &dd, 0.0).unwrap();
        let oracle = coordinate_descent_abundances(y.as_matrix(), &phi, &d, 0.0, 1e-12);
        let a = abundance_subproblem(y.as_matrix(), &phi, &d, 0.0, ours.as_matrix());
        let b = abundance_subproblem(y.as_matrix(), &phi, &d, 0.0, &oracle);
        assert!(a <= b * (1.0 + 1e-6) + 1e-12, "{a} vs {b}");
    }
}

fn small_state(seed: u64) -> (ObservationMatrix, Mat, Mat, SolverConfig) {
    let mut rng = rng(seed);
    let y = ObservationMatrix::new(uniform(&mut rng, 6, 5)).unwrap();
    (y, uniform(&mut rng, 6, 3), uniform(&mut rng, 5, 3), SolverConfig::new(3, 0.2, 0.05, 0.1))
}

#[test]
fn line_search_accepts_descent_at_full_step() {
    let (y, phi, w, config) = small_state(13);
    let problem = Problem::new(&y);
    let state = SolverState::new(&problem, &em(phi.clone()), &ab(w.clone()), &config).unwrap();
    let candidate = update_abundances(&y, &em(phi), &state.d_hat, config.lambda1).unwrap();
    let out = line_search(&problem, &state, candidate.as_matrix(), Block::Abundances, &config);
    if out.beta == config.line_search.beta_init {
        assert_eq!(out.evaluations, 1);
    }
    assert!(out.cost <= state.last_cost);

    let same = line_search(&problem, &state, &w, Block::Abundances, &config);
    assert!(same.moved());
    assert_eq!(same.cost, state.last_cost);
    assert_eq!(same.evaluations, 1);
}

#[test]
fn line_search_rejects_ascent_direction() {
    let (y, phi, w, config) = small_state(14);
    let problem = Problem::new(&y);
    let state = SolverState::new(&problem, &em(phi.clone()), &ab(w.clone()), &config).unwrap();
    // Move uphill along the gradient: every trial step increases the cost.
    let grad = problem.grad_phi(&em(phi.clone()), &ab(w), &state.d_hat).unwrap();
    let uphill = &phi + grad.map(|g| g.abs()) * 10.0 + Mat::from_element(6, 3, 1.0);
    let out = line_search(&problem, &state, &uphill, Block::Endmembers, &config);
    assert_eq!(out.beta, 0.0);
    assert!(!out.moved());
    assert_eq!(out.accepted, phi);
    assert_eq!(out.cost, state.last_cost);
    assert_eq!(out.evaluations, config.line_search.max_backtracks);
}

#[test]
fn prune_examples() {
    let mut rng = rng(15);
    let mut phi = uniform(&mut rng, 8, 10);
    let mut w = uniform(&mut rng, 12, 10);
    for c in [1, 2, 4, 5, 7, 9] {
        phi.column_mut(c).fill(0.0);
        w.column_mut(c).fill(0.0);
    }
    let rep = prune_and_report_rank(&em(phi.clone()), &ab(w.clone()), 1e-4).unwrap();
    assert_eq!(rep.effective_rank, 4);
    assert_eq!(rep.surviving, vec![0, 3, 6, 8]);
    assert!(!rep.degenerate);

    let same = prune_and_report_rank(&em(Mat::from_element(3, 5, 1.0)), &ab(Mat::from_element(2, 5, 1.0)), 0.5)
        .unwrap();
    assert_eq!(same.effective_rank, 5);

    let mut tiny = Mat::from_element(3, 2, 1.0);
    tiny.column_mut(1).scale_mut(1e-12);
    let wt = Mat::from_fn(2, 2, |_, c| if c == 0 { 1.0 } else { 1e-12 });
    let rep = prune_and_report_rank(&em(tiny), &ab(wt), 1e-6).unwrap();
    assert_eq!(rep.surviving, vec![0]);

    let zero = prune_and_report_rank(&em(Mat::zeros(3, 2)), &ab(Mat::zeros(2, 2)), 1e-4).unwrap();
    assert!(zero.degenerate && zero.effective_rank == 0);
    assert!(prune_and_report_rank(&em(phi), &ab(w), -1.0).is_err());
}

#[test]
fn exact_data_from_truth_is_a_fixed_point() {
    let mut rng = rng(16);
    let phi = uniform(&mut rng, 10, 3);
    let w = uniform(&mut rng, 12, 3);
    let y = ObservationMatrix::new(&phi * w.transpose()).unwrap();
    let config = SolverConfig::new(3, 0.0, 0.0, 1e-3);
    let (p, ww, report) = solve_full(&y, &em(phi.clone()), &ab(w.clone()), &config).unwrap();
    assert!(report.initial_cost < 1e-25);
    assert!(report.final_cost() < 1e-25);
    assert!((p - phi).amax() < 1e-10);
    assert!((ww - w).amax() < 1e-10);
}

/// Alternating least squares with nonnegativity, at the true rank, as a
/// reference for the residual achievable on a tiny instance.
fn plain_nmf_residual(y: &Mat, r: usize, seed: u64) -> f64 {
    let (l, k) = y.shape();
    let mut rng = rng(seed);
    let mut phi = uniform(&mut rng, l, r);
    let mut w = uniform(&mut rng, k, r);
    for _ in 0..2000 {
        // multiplicative updates
        let num = y.transpose() * &phi;
        let den = &w * (phi.transpose() * &phi);
        w.zip_apply(&num.zip_map(&den, |n, d| n / (d + 1e-300)), |a, b| *a *= b);
        let num = y * &w;
        let den = &phi * (w.transpose() * &w);
        phi.zip_apply(&num.zip_map(&den, |n, d| n / (d + 1e-300)), |a, b| *a *= b);
    }
    (y - &phi * w.transpose()).norm() / y.norm()
}

#[test]
fn tiny_noiseless_instance_recovers_rank_two() {
    let mut rng = rng(17);
    let phi = uniform(&mut rng, 6, 2) + Mat::from_element(6, 2, 0.1);
    let w = uniform(&mut rng, 8, 2);
    let y = ObservationMatrix::new(&phi * w.transpose()).unwrap();
    let config = SolverConfig::for_observation(&y, 4);
    let (phi0, w0) = init_uniform(6, 8, 4, 17).unwrap();
    let sol = solve(&y, &phi0, &w0, &config).unwrap();
    let residual = (y.as_matrix() - sol.phi.as_matrix() * sol.w.as_matrix().transpose()).norm()
        / y.as_matrix().norm();
    let reference = plain_nmf_residual(y.as_matrix(), 2, 17);
    assert_eq!(sol.report.final_effective_rank, 2, "{:?}", sol.report.effective_rank_trace.last());
    assert!(residual < 1e-2, "residual {residual}, plain NMF {reference}");
    assert!(reference < 1e-2);
}

#[test]
fn iterates_stay_feasible_and_traces_are_consistent() {
    let mut rng = rng(18);
    for seed in 0..5 {
        let y = ObservationMatrix::new(uniform(&mut rng, 12, 15)).unwrap();
        let mut config = SolverConfig::for_observation(&y, 5);
        config.max_iter = 100;
        let (phi0, w0) = init_uniform(12, 15, 5, seed).unwrap();
        let (phi, w, report) = solve_full(&y, &phi0, &w0, &config).unwrap();
        assert!(phi.min() >= 0.0 && w.min() >= 0.0);
        assert_eq!(report.cost_trace.len(), report.iterations);
        assert_eq!(report.effective_rank_trace.len(), report.iterations);
        assert_eq!(report.beta_w_trace.len(), report.iterations);
        assert!(report.final_effective_rank <= 5);
        let mut prev = report.initial_cost;
        for &c in &report.cost_trace {
            assert!(c <= prev);
            prev = c;
        }
        let p = Problem::new(&y);
        let total = p.cost_total(&em(phi), &ab(w), &config).unwrap();
        assert_eq!(total, report.final_cost());
    }
}

#[test]
fn permuting_initial_columns_permutes_the_output() {
    let mut rng = rng(19);
    let y = ObservationMatrix::new(uniform(&mut rng, 10, 12)).unwrap();
    let mut config = SolverConfig::for_observation(&y, 4);
    config.max_iter = 50;
    let (phi0, w0) = init_uniform(10, 12, 4, 3).unwrap();
    let perm = [2, 0, 3, 1];
    let phi_p = phi0.select_columns(&perm);
    let w_p = w0.select_columns(&perm);
    let (a_phi, a_w, a) = solve_full(&y, &phi0, &w0, &config).unwrap();
    let (b_phi, b_w, b) = solve_full(&y, &phi_p, &w_p, &config).unwrap();
    assert!((a_phi.select_columns(perm.iter()) - b_phi).amax() < 1e-9);
    assert!((a_w.select_columns(perm.iter()) - b_w).amax() < 1e-9);
    assert_eq!(a.final_effective_rank, b.final_effective_rank);
}

#[test]
fn solver_is_deterministic() {
    let mut rng = rng(20);
    let y = ObservationMatrix::new(uniform(&mut rng, 9, 11)).unwrap();
    let config = SolverConfig::for_observation(&y, 4);
    let (phi0, w0) = init_uniform(9, 11, 4, 1).unwrap();
    let (p1, w1, mut r1) = solve_full(&y, &phi0, &w0, &config).unwrap();
    let (p2, w2, mut r2) = solve_full(&y, &phi0, &w0, &config).unwrap();
    r1.wall_time_secs = 0.0;
    r2.wall_time_secs = 0.0;
    assert_eq!((p1, w1, r1), (p2, w2, r2));
}

#[test]
fn rejects_mismatched_inputs() {
    let mut rng = rng(21);
    let y = ObservationMatrix::new(uniform(&mut rng, 5, 6)).unwrap();
    let config = SolverConfig::new(3, 0.1, 0.1, 0.1);
    let (phi0, w0) = init_uniform(5, 6, 2, 0).unwrap();
    assert!(solve(&y, &phi0, &w0, &config).is_err());
    let (phi0, w0) = init_uniform(4, 6, 3, 0).unwrap();
    assert!(solve(&y, &phi0, &w0, &config).is_err());
    let mut bad = config.clone();
    bad.eta = -1.0;
    let (phi0, w0) = init_uniform(5, 6, 3, 0).unwrap();
    assert!(solve(&y, &phi0, &w0, &bad).is_err());
}
