//! Starting points for the solver: i.i.d. uniform factors, or vertex
//! component analysis (VCA) endmembers with nonnegative least-squares
//! abundances.

use nalgebra::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::at_b;
use crate::model::{AbundanceMatrix, EndmemberMatrix, Mat, ObservationMatrix, Vector};
use crate::synth::stream_rng;

const STREAM_UNIFORM: u64 = 11;
const STREAM_VCA: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    UniformRandom,
    Vca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitSpec {
    pub kind: InitKind,
    pub r: usize,
    pub seed: u64,
}

impl InitSpec {
    pub fn initialize(&self, y: &ObservationMatrix) -> Result<(EndmemberMatrix, AbundanceMatrix)> {
        if self.r == 0 {
            return Err(Error::param("r", "must be at least 1"));
        }
        match self.kind {
            InitKind::UniformRandom => init_uniform(y.bands(), y.pixels(), self.r, self.seed),
            InitKind::Vca => {
                let vca = init_vca(y, self.r, self.seed)?;
                let w = nnls_abundances(y, &vca.endmembers, NNLS_TOL, NNLS_MAX_SWEEPS);
                Ok((vca.endmembers, w))
            }
        }
    }
}

/// Φ (L×r) and W (K×r) with entries i.i.d. uniform on [0, 1).
pub fn init_uniform(
    l: usize,
    k: usize,
    r: usize,
    seed: u64,
) -> Result<(EndmemberMatrix, AbundanceMatrix)> {
    if l == 0 || k == 0 || r == 0 {
        return Err(Error::param("dimensions", "l, k and r must be at least 1"));
    }
    let mut rng = stream_rng(seed, STREAM_UNIFORM);
    let phi = Mat::from_fn(l, r, |_, _| rng.random::<f64>());
    let w = Mat::from_fn(k, r, |_, _| rng.random::<f64>());
    Ok((
        EndmemberMatrix::from_nonneg_unchecked(phi),
        AbundanceMatrix::from_nonneg_unchecked(w),
    ))
}

#[derive(Debug, Clone)]
pub struct VcaOutput {
    /// Selected pixel spectra, clamped to be nonnegative.
    pub endmembers: EndmemberMatrix,
    /// Column of Y behind each endmember.
    pub pixel_indices: Vec<usize>,
    pub snr_db: f64,
    /// Whether the high-SNR projective projection was used (otherwise the
    /// affine, mean-removed one).
    pub projective: bool,
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
fn leading_eigenvectors(sym: Mat, count: usize) -> (Vector, Mat) {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(count);
    let values = Vector::from_iterator(count, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

/// Index of the entry with the largest magnitude (first one on ties).
fn argmax_abs<'a>(values: impl Iterator<Item = &'a f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v.abs() > best.1 {
            best = (i, v.abs());
        }
    }
    best.0
}

fn check_rank(values: &Vector, required: usize) -> Result<()> {
    let top = values.iter().copied().fold(0.0, f64::max);
    for (i, v) in values.iter().take(required).enumerate() {
        if !(*v > 1e-12 * top) || top <= 0.0 {
            return Err(Error::RankDeficient {
                dimension: i + 1,
                required,
            });
        }
    }
    Ok(())
}

/// Vertex component analysis: projects the pixels onto an r-dimensional
/// signal subspace and repeatedly picks the pixel with the largest
/// projection onto a random direction orthogonal to the pixels already
/// chosen.
///
/// The projection is projective (onto the leading eigenvectors of `YYᵀ/K`,
/// then normalized onto the hyperplane `uᵀx = 1`) when the estimated SNR
/// exceeds `15 + 10·log10(r)` dB, and affine (mean-removed PCA to r − 1
/// dimensions plus a constant coordinate) otherwise.
pub fn init_vca(y: &ObservationMatrix, r: usize, seed: u64) -> Result<VcaOutput> {
    let data = y.as_matrix();
    let (l, k) = data.shape();
    if r == 0 || r > l.min(k) {
        return Err(Error::param(
            "r",
            format!("must lie in 1..={} for a {l}×{k} observation", l.min(k)),
        ));
    }
    let kf = k as f64;
    let mean = data.column_mean();
    let mut centered = data.clone();
    for mut c in centered.column_iter_mut() {
        c -= &mean;
    }

    // SNR estimate from the r-dimensional PCA of the centered data.
    let (_, ud) = leading_eigenvectors(&centered * centered.transpose() / kf, r);
    let x_p = at_b(&ud, &centered);
    let p_y = data.norm_squared() / kf;
    let p_x = x_p.norm_squared() / kf + mean.norm_squared();
    let signal = p_x - (r as f64 / l as f64) * p_y;
    let noise = p_y - p_x;
    let snr_db = if noise <= 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / noise).log10()
    };
    let threshold = 15.0 + 10.0 * (r as f64).log10();
    let projective = !(snr_db < threshold) || r == 1;

    let projected: Mat = if projective {
        let (values, ud) = leading_eigenvectors(data * data.transpose() / kf, r);
        check_rank(&values, r)?;
        let x = at_b(&ud, data);
        if r == 1 {
            // Only one direction: the pixel projecting furthest on it.
            let idx = argmax_abs(x.row(0).iter());
            return Ok(vca_output(y, vec![idx], snr_db, true));
        }
        let u = x.column_mean();
        let mut yproj = x.clone();
        for mut c in yproj.column_iter_mut() {
            let s = c.dot(&u);
            if s != 0.0 {
                c /= s;
            }
        }
        yproj
    } else {
        let d = r - 1;
        let (values, ud) = leading_eigenvectors(&centered * centered.transpose() / kf, d);
        check_rank(&values, d)?;
        let x = at_b(&ud, &centered);
        let c = x.column_iter().map(|col| col.norm()).fold(0.0, f64::max);
        let mut yproj = Mat::from_element(r, k, c);
        yproj.rows_mut(0, d).copy_from(&x);
        yproj
    };

    let mut rng = stream_rng(seed, STREAM_VCA);
    let mut a = Mat::zeros(r, r);
    a[(r - 1, 0)] = 1.0;
    let mut indices = Vec::with_capacity(r);
    for i in 0..r {
        let w = Vector::from_fn(r, |_, _| rng.random::<f64>());
        let pinv = a
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|_| Error::RankDeficient {
                dimension: i + 1,
                required: r,
            })?;
        let mut f = &w - &a * (pinv * &w);
        let norm = f.norm();
        if !(norm > 0.0) {
            return Err(Error::RankDeficient {
                dimension: i + 1,
                required: r,
            });
        }
        f /= norm;
        let v = f.tr_mul(&projected);
        let idx = argmax_abs(v.iter());
        indices.push(idx);
        a.set_column(i, &projected.column(idx));
    }
    Ok(vca_output(y, indices, snr_db, projective))
}

fn vca_output(y: &ObservationMatrix, indices: Vec<usize>, snr_db: f64, projective: bool) -> VcaOutput {
    let phi = y.as_matrix().select_columns(indices.iter()).map(|v| v.max(0.0));
    VcaOutput {
        endmembers: EndmemberMatrix::from_nonneg_unchecked(phi),
        pixel_indices: indices,
        snr_db,
        projective,
    }
}

pub const NNLS_TOL: f64 = 1e-8;
pub const NNLS_MAX_SWEEPS: usize = 5000;

/// Nonnegative least squares `min_{W ≥ 0} ‖Y − ΦWᵀ‖²_F`, by cyclic
/// coordinate updates over the columns of W (all pixels at once). Stops when
/// a sweep changes no entry by more than `tol` relative to the largest entry.
pub fn nnls_abundances(
    y: &ObservationMatrix,
    phi: &EndmemberMatrix,
    tol: f64,
    max_sweeps: usize,
) -> AbundanceMatrix {
    let phi = phi.as_matrix();
    let r = phi.ncols();
    let gram = at_b(phi, phi);
    let b = at_b(y.as_matrix(), phi); // K×r
    let k = b.nrows();
    let mut w = Mat::zeros(k, r);
    for _ in 0..max_sweeps {
        let mut max_change = 0.0_f64;
        let mut max_entry = 0.0_f64;
        for j in 0..r {
            let hjj = gram[(j, j)];
            if hjj <= 0.0 {
                w.column_mut(j).fill(0.0);
                continue;
            }
            let wh = &w * gram.column(j);
            for i in 0..k {
                let old = w[(i, j)];
                let new = (old + (b[(i, j)] - wh[i]) / hjj).max(0.0);
                max_change = max_change.max((new - old).abs());
                max_entry = max_entry.max(new);
                w[(i, j)] = new;
            }
        }
        if max_change <= tol * max_entry.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    AbundanceMatrix::from_nonneg_unchecked(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_deterministic_and_bounded() {
        let (p1, w1) = init_uniform(7, 9, 3, 42).unwrap();
        let (p2, w2) = init_uniform(7, 9, 3, 42).unwrap();
        assert_eq!((&p1, &w1), (&p2, &w2));
        assert!(p1.as_matrix().iter().chain(w1.as_matrix().iter()).all(|v| (0.0..1.0).contains(v)));
        let (p3, _) = init_uniform(7, 9, 3, 43).unwrap();
        assert_ne!(p1, p3);
        assert!(init_uniform(0, 9, 3, 1).is_err());
    }

    #[test]
    fn vca_rejects_oversized_rank() {
        let y = ObservationMatrix::new(Mat::from_element(3, 5, 1.0)).unwrap();
        assert!(init_vca(&y, 4, 0).is_err());
        assert!(init_vca(&y, 0, 0).is_err());
    }

    #[test]
    fn vca_on_rank_one_data_with_large_r_is_rank_deficient() {
        let y = ObservationMatrix::new(Mat::from_fn(6, 10, |i, j| (i + 1) as f64 * (j + 1) as f64))
            .unwrap();
        assert!(matches!(
            init_vca(&y, 3, 0),
            Err(Error::RankDeficient { dimension: 2, required: 3 })
        ));
    }

    #[test]
    fn nnls_recovers_exact_nonnegative_coefficients() {
        let phi = Mat::from_row_slice(4, 2, &[1.0, 0.2, 0.5, 1.0, 0.1, 0.4, 0.3, 0.3]);
        let w_true = Mat::from_row_slice(3, 2, &[0.5, 0.0, 1.0, 2.0, 0.0, 0.25]);
        let y = ObservationMatrix::new(&phi * w_true.transpose()).unwrap();
        let w = nnls_abundances(&y, &EndmemberMatrix::new(phi).unwrap(), 1e-12, 100_000);
        for (a, b) in w.as_matrix().iter().zip(w_true.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}
