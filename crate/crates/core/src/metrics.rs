//! Scoring estimated factors against reference ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AbundanceMatrix, EndmemberMatrix, Mat};

/// Spectral angle between two spectra, in degrees, clamped to [0, 180].
pub fn spectral_angle(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims("spectral angle operands", a.len(), b.len()));
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::param("spectrum", "spectral angle of a zero vector"));
    }
    // 2·atan2(‖â − b̂‖, ‖â + b̂‖) stays accurate near 0° and 180°, where
    // acos of the normalized dot product loses half the digits.
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees())
}

/// Minimum-cost assignment of the rows of `cost` (n rows) to distinct
/// columns (m ≥ n columns), by the Hungarian method with potentials.
/// Returns the column assigned to each row.
pub fn min_cost_assignment(cost: &Mat) -> Vec<usize> {
    let transpose = cost.nrows() > cost.ncols();
    let c = if transpose { cost.transpose() } else { cost.clone() };
    let (n, m) = c.shape();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; p[j] = row matched to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = c[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    if transpose {
        // rows of `cost` were columns of `c`
        let mut out = vec![usize::MAX; cost.nrows()];
        for (ci, &ri) in row_to_col.iter().enumerate() {
            out[ri] = ci;
        }
        out
    } else {
        row_to_col
    }
}

/// Angles between every estimated (rows) and reference (columns) spectrum.
pub fn sam_matrix(estimated: &EndmemberMatrix, reference: &EndmemberMatrix) -> Result<Mat> {
    if estimated.nrows() != reference.nrows() {
        return Err(Error::dims(
            "band count of estimated vs reference endmembers",
            reference.nrows(),
            estimated.nrows(),
        ));
    }
    let (e, r) = (estimated.as_matrix(), reference.as_matrix());
    let mut m = Mat::zeros(e.ncols(), r.ncols());
    for i in 0..e.ncols() {
        for j in 0..r.ncols() {
            m[(i, j)] = spectral_angle(e.column(i).as_slice(), r.column(j).as_slice())?;
        }
    }
    Ok(m)
}

/// A matched (estimated, reference) column pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub estimated: usize,
    pub reference: usize,
    pub sam_degrees: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbundanceError {
    pub rmse: f64,
    /// Factor applied to each matched estimated abundance column.
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub mean_sam_degrees: f64,
    pub unmatched_estimated: Vec<usize>,
    pub unmatched_reference: Vec<usize>,
    pub estimated_rank: usize,
    pub reference_rank: usize,
    pub rank_correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abundance: Option<AbundanceError>,
}

impl MatchResult {
    pub fn per_pair_sam_degrees(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.sam_degrees).collect()
    }

    pub fn total_sam_degrees(&self) -> f64 {
        self.pairs.iter().map(|p| p.sam_degrees).sum()
    }
}

/// Optimal one-to-one matching of estimated to reference endmembers,
/// minimizing total spectral angle over `min(N_est, N_ref)` pairs.
pub fn match_columns(
    estimated: &EndmemberMatrix,
    reference: &EndmemberMatrix,
) -> Result<MatchResult> {
    if estimated.rank() == 0 || reference.rank() == 0 {
        return Err(Error::param("endmembers", "matching needs at least one column on each side"));
    }
    let sam = sam_matrix(estimated, reference)?;
    let assignment = min_cost_assignment(&sam);
    let mut pairs: Vec<MatchedPair> = assignment
        .iter()
        .enumerate()
        .filter(|(_, &j)| j != usize::MAX)
        .map(|(i, &j)| MatchedPair {
            estimated: i,
            reference: j,
            sam_degrees: sam[(i, j)],
        })
        .collect();
    pairs.sort_by_key(|p| p.reference);
    let unmatched_estimated = (0..estimated.rank())
        .filter(|i| !pairs.iter().any(|p| p.estimated == *i))
        .collect();
    let unmatched_reference = (0..reference.rank())
        .filter(|j| !pairs.iter().any(|p| p.reference == *j))
        .collect();
    let mean = pairs.iter().map(|p| p.sam_degrees).sum::<f64>() / pairs.len() as f64;
    Ok(MatchResult {
        mean_sam_degrees: mean,
        unmatched_estimated,
        unmatched_reference,
        estimated_rank: estimated.rank(),
        reference_rank: reference.rank(),
        rank_correct: estimated.rank() == reference.rank(),
        pairs,
        abundance: None,
    })
}

/// RMSE between matched abundance columns after resolving the per-column
/// scale ambiguity of the factorization.
///
/// With endmembers given, the scalar `s = ⟨φ_est, φ_ref⟩ / ‖φ_est‖²` is
/// fitted on each endmember pair and `1/s` is applied to the abundance
/// column, leaving the product `φ wᵀ` unchanged. Without endmembers the
/// scalar is fitted directly on the abundance columns.
pub fn abundance_rmse(
    estimated: &AbundanceMatrix,
    reference: &AbundanceMatrix,
    pairs: &[MatchedPair],
    endmembers: Option<(&EndmemberMatrix, &EndmemberMatrix)>,
) -> Result<AbundanceError> {
    if pairs.is_empty() {
        return Err(Error::param("pairs", "no matched columns"));
    }
    if estimated.nrows() != reference.nrows() {
        return Err(Error::dims("abundance rows", reference.nrows(), estimated.nrows()));
    }
    let (we, wr) = (estimated.as_matrix(), reference.as_matrix());
    let mut sum_sq = 0.0;
    let mut scales = Vec::with_capacity(pairs.len());
    for p in pairs {
        if p.estimated >= we.ncols() || p.reference >= wr.ncols() {
            return Err(Error::param("pairs", "column index out of range"));
        }
        let ce = we.column(p.estimated);
        let cr = wr.column(p.reference);
        let scale = match endmembers {
            Some((pe, pr)) => {
                let (a, b) = (pe.as_matrix().column(p.estimated), pr.as_matrix().column(p.reference));
                let s = a.dot(&b) / a.norm_squared();
                if s.is_finite() && s != 0.0 {
                    1.0 / s
                } else {
                    1.0
                }
            }
            None => {
                let n = ce.norm_squared();
                if n > 0.0 {
                    ce.dot(&cr) / n
                } else {
                    1.0
                }
            }
        };
        sum_sq += ce.iter().zip(cr.iter()).map(|(e, r)| (scale * e - r).powi(2)).sum::<f64>();
        scales.push(scale);
    }
    let count = (pairs.len() * we.nrows()) as f64;
    Ok(AbundanceError {
        rmse: (sum_sq / count).sqrt(),
        scales,
    })
}

/// Matching plus abundance error, as reported by `eval`.
pub fn evaluate(
    phi_est: &EndmemberMatrix,
    w_est: Option<&AbundanceMatrix>,
    phi_ref: &EndmemberMatrix,
    w_ref: Option<&AbundanceMatrix>,
) -> Result<MatchResult> {
    let mut result = match_columns(phi_est, phi_ref)?;
    if let (Some(we), Some(wr)) = (w_est, w_ref) {
        result.abundance = Some(abundance_rmse(
            we,
            wr,
            &result.pairs,
            Some((phi_est, phi_ref)),
        )?);
    }
    Ok(result)
}
