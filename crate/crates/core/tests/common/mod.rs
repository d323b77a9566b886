//! Independent reference implementations used as test oracles. Nothing here
//! calls into the solver internals: costs are plain loops, subproblems are
//! solved by generic first-order or coordinate methods.

#![allow(dead_code)]

use lrsnmf::synth::{EndmemberSource, GroundTruth, MixedScene, SceneSpec, SpectralLibrary};
use lrsnmf::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// ½Σ(y − Σφw)² + δΣ√(Σφ² + Σw² + η²), entry by entry.
pub fn loop_cost_smooth(y: &Mat, phi: &Mat, w: &Mat, delta: f64, eta: f64) -> f64 {
    let (l, k) = y.shape();
    let r = phi.ncols();
    let mut fit = 0.0;
    for i in 0..l {
        for j in 0..k {
            let mut model = 0.0;
            for c in 0..r {
                model += phi[(i, c)] * w[(j, c)];
            }
            fit += (y[(i, j)] - model) * (y[(i, j)] - model);
        }
    }
    let mut penalty = 0.0;
    for c in 0..r {
        let mut e = eta * eta;
        for i in 0..l {
            e += phi[(i, c)] * phi[(i, c)];
        }
        for j in 0..k {
            e += w[(j, c)] * w[(j, c)];
        }
        penalty += e.sqrt();
    }
    0.5 * fit + delta * penalty
}

pub fn loop_l1(w: &Mat) -> f64 {
    let mut s = 0.0;
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            s += w[(i, j)].abs();
        }
    }
    s
}

/// Plain triple-loop product A·B.
pub fn loop_matmul(a: &Mat, b: &Mat) -> Mat {
    let mut c = Mat::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for t in 0..a.ncols() {
                s += a[(i, t)] * b[(t, j)];
            }
            c[(i, j)] = s;
        }
    }
    c
}

/// Central finite differences of `f` at `x`.
pub fn central_differences(x: &Mat, h: f64, f: impl Fn(&Mat) -> f64) -> Mat {
    let mut g = Mat::zeros(x.nrows(), x.ncols());
    let mut xp = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let orig = xp[(i, j)];
            xp[(i, j)] = orig + h;
            let up = f(&xp);
            xp[(i, j)] = orig - h;
            let down = f(&xp);
            xp[(i, j)] = orig;
            g[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    g
}

/// Largest entrywise error relative to `max(|exact|, 1)`.
pub fn max_rel_err(exact: &Mat, approx: &Mat) -> f64 {
    exact
        .iter()
        .zip(approx.iter())
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// argmin over a uniform grid of ½(x − z)² + λ|x|.
pub fn grid_prox_l1(z: f64, lambda: f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=n {
        let x = lo + i as f64 * step;
        let v = 0.5 * (x - z) * (x - z) + lambda * x.abs();
        if v < best.1 {
            best = (x, v);
        }
    }
    best.0
}

/// Abundance subproblem with the reweighting frozen:
/// `½‖Y − ΦWᵀ‖² + ½Σ dᵢ‖wᵢ‖² + λ₁‖W‖₁`.
pub fn abundance_subproblem(y: &Mat, phi: &Mat, d: &[f64], lambda1: f64, w: &Mat) -> f64 {
    let mut v = loop_cost_smooth(y, phi, w, 0.0, 0.0) + lambda1 * loop_l1(w);
    for (c, dc) in d.iter().enumerate() {
        v += 0.5 * dc * w.column(c).norm_squared();
    }
    v
}

/// Endmember subproblem: `½‖Y − ΦWᵀ‖² + ½Σ dᵢ‖φᵢ‖²`.
pub fn endmember_subproblem(y: &Mat, w: &Mat, d: &[f64], phi: &Mat) -> f64 {
    let mut v = loop_cost_smooth(y, phi, w, 0.0, 0.0);
    for (c, dc) in d.iter().enumerate() {
        v += 0.5 * dc * phi.column(c).norm_squared();
    }
    v
}

/// Projected coordinate descent on the abundance subproblem: each entry is
/// set to its exact one-dimensional minimizer over [0, ∞), sweeping until no
/// entry moves by more than `tol`.
pub fn coordinate_descent_abundances(y: &Mat, phi: &Mat, d: &[f64], lambda1: f64, tol: f64) -> Mat {
    let (k, r) = (y.ncols(), phi.ncols());
    let mut w = Mat::zeros(k, r);
    for _ in 0..1_000_000 {
        let mut moved = 0.0_f64;
        for j in 0..k {
            for c in 0..r {
                // residual of pixel j without component c
                let mut num = -lambda1;
                let mut den = d[c];
                for i in 0..y.nrows() {
                    let mut others = 0.0;
                    for t in 0..r {
                        if t != c {
                            others += phi[(i, t)] * w[(j, t)];
                        }
                    }
                    num += phi[(i, c)] * (y[(i, j)] - others);
                    den += phi[(i, c)] * phi[(i, c)];
                }
                let new = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
                moved = moved.max((new - w[(j, c)]).abs());
                w[(j, c)] = new;
            }
        }
        if moved <= tol {
            break;
        }
    }
    w
}

/// Projected gradient with a fixed 1/L step on the endmember subproblem,
/// run until the iterate moves by less than `tol`.
pub fn projected_gradient_endmembers(y: &Mat, w: &Mat, d: &[f64], tol: f64) -> Mat {
    let (l, r) = (y.nrows(), w.ncols());
    let mut h = loop_matmul(&w.transpose(), w);
    for c in 0..r {
        h[(c, c)] += d[c];
    }
    // Lipschitz constant bounded by the Frobenius norm of the Hessian.
    let step = 1.0 / h.norm();
    let yw = loop_matmul(y, w);
    let mut phi = Mat::zeros(l, r);
    for _ in 0..10_000_000 {
        let grad = loop_matmul(&phi, &h) - &yw;
        let next = (&phi - grad * step).map(|v| v.max(0.0));
        let moved = (&next - &phi).amax();
        phi = next;
        if moved <= tol {
            break;
        }
    }
    phi
}

/// Greedy matching: repeatedly take the globally smallest remaining entry.
pub fn greedy_assignment_total(cost: &Mat) -> f64 {
    let (n, m) = cost.shape();
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; m];
    let mut total = 0.0;
    for _ in 0..n.min(m) {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..n {
            for j in 0..m {
                if !row_used[i] && !col_used[j] && cost[(i, j)] < best.2 {
                    best = (i, j, cost[(i, j)]);
                }
            }
        }
        row_used[best.0] = true;
        col_used[best.1] = true;
        total += best.2;
    }
    total
}

/// All injective assignments of min(n, m) rows, by enumeration.
pub fn brute_force_assignment_total(cost: &Mat) -> f64 {
    fn go(cost: &Mat, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.nrows() {
            *best = best.min(acc);
            return;
        }
        let spare_rows = cost.nrows() - row;
        let free_cols = used.iter().filter(|u| !**u).count();
        if spare_rows > free_cols {
            // this row may stay unmatched
            go(cost, row + 1, used, acc, best);
        }
        for j in 0..cost.ncols() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[(row, j)], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.ncols()], 0.0, &mut best);
    best
}

/// A small image-like scene with three library materials: 20×20 pixels,
/// 224 bands, 30% abundance density, σ = 1e-3.
pub fn three_source_cube(lib: &SpectralLibrary, seed: u64) -> (MixedScene, GroundTruth) {
    SceneSpec {
        bands: 224,
        pixels: 400,
        endmembers: 3,
        density: 0.3,
        sigma: 1e-3,
        seed,
        allow_negative: false,
    }
    .generate(&EndmemberSource::Library(lib))
    .expect("valid scene")
}
