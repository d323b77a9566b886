//! Small dense kernels used by the block updates.

use crate::error::{Error, Result};
use crate::model::Mat;

/// `Aᵀ B` through an explicit transpose, so the product goes to the blocked
/// gemm kernel (nalgebra's `tr_mul` falls back to column dot products).
pub(crate) fn at_b(a: &Mat, b: &Mat) -> Mat {
    a.transpose() * b
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
///
/// On failure returns the smallest pivot encountered (zero or negative, or
/// below `1e-14` of the largest diagonal entry).
pub(crate) fn cholesky(h: &Mat) -> std::result::Result<Mat, f64> {
    let n = h.nrows();
    debug_assert_eq!(n, h.ncols());
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max);
    let floor = 1e-14 * scale;
    let mut l = Mat::zeros(n, n);
    let mut smallest = f64::INFINITY;
    for j in 0..n {
        let mut pivot = h[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        smallest = smallest.min(pivot);
        if !(pivot > floor) || !pivot.is_finite() {
            return Err(smallest);
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut v = h[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// Solves `H X = B` given the lower Cholesky factor of `H`.
pub(crate) fn cholesky_solve(l: &Mat, b: &Mat) -> Mat {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut v = x[(i, c)];
            for k in 0..i {
                v -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = x[(i, c)];
            for k in (i + 1)..n {
                v -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    x
}

pub(crate) fn spd_solve(h: &Mat, b: &Mat, context: &'static str) -> Result<Mat> {
    match cholesky(h) {
        Ok(l) => Ok(cholesky_solve(&l, b)),
        Err(smallest_pivot) => Err(Error::Solve {
            context,
            smallest_pivot,
        }),
    }
}

/// Like [`spd_solve`], but retries with a growing ridge when `H` is only
/// positive semi-definite (possible when δ = 0 and a column has collapsed).
pub(crate) fn spd_solve_ridged(h: &Mat, b: &Mat) -> Mat {
    if let Ok(l) = cholesky(h) {
        return cholesky_solve(&l, b);
    }
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max);
    let mut ridge = if scale > 0.0 { 1e-12 * scale } else { 1e-300 };
    loop {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += ridge;
        }
        if let Ok(l) = cholesky(&hr) {
            return cholesky_solve(&l, b);
        }
        ridge *= 100.0;
    }
}
