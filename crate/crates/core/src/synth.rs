//! Linear-mixing-model scenes with known ground truth.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{parse_matrix, Layout, MatrixFormat};
use crate::model::{AbundanceMatrix, EndmemberMatrix, Mat, ObservationMatrix};

/// Independent RNG stream derived from a user seed.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_ABUNDANCES: u64 = 1;
const STREAM_ENDMEMBERS: u64 = 2;
const STREAM_NOISE: u64 = 3;

const BUILTIN_LIBRARY: &str = include_str!("../data/spectral_library.csv");

/// Collection of reference spectra, one column per material.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLibrary {
    spectra: Mat,
}

impl SpectralLibrary {
    pub fn new(spectra: Mat) -> Result<Self> {
        if spectra.ncols() == 0 || spectra.nrows() == 0 {
            return Err(Error::param("library", "must contain at least one spectrum"));
        }
        EndmemberMatrix::new(spectra.clone())?;
        Ok(Self { spectra })
    }

    /// The 224-band mineral-like library shipped with the crate
    /// (`data/spectral_library.csv`).
    pub fn builtin() -> Self {
        let m = parse_matrix(
            BUILTIN_LIBRARY,
            &MatrixFormat {
                layout: Layout::PixelsByBands,
                ..MatrixFormat::default()
            },
            "data/spectral_library.csv",
        )
        .expect("built-in library parses");
        Self { spectra: m }
    }

    pub fn bands(&self) -> usize {
        self.spectra.nrows()
    }

    pub fn len(&self) -> usize {
        self.spectra.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.ncols() == 0
    }

    pub fn spectra(&self) -> &Mat {
        &self.spectra
    }
}

#[derive(Debug, Clone)]
pub enum EndmemberSource<'a> {
    Library(&'a SpectralLibrary),
    /// Random smooth nonnegative curves (a baseline plus at most five
    /// Gaussian bumps).
    SyntheticSmooth,
}

/// Known factors of a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub phi_true: EndmemberMatrix,
    pub w_true: AbundanceMatrix,
    pub sigma: f64,
    pub seed: u64,
}

/// K×N abundances, uniform on [0, 1), with exactly `round(density·K·N)`
/// entries kept and the rest zeroed.
pub fn gen_abundances(k: usize, n: usize, density: f64, seed: u64) -> Result<AbundanceMatrix> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::param("density", format!("must lie in (0, 1], got {density}")));
    }
    let mut rng = stream_rng(seed, STREAM_ABUNDANCES);
    let mut w = Mat::from_fn(k, n, |_, _| rng.random::<f64>());
    let total = k * n;
    let keep = ((density * total as f64).round() as usize).min(total);
    if keep < total {
        let mut mask = vec![false; total];
        for i in index::sample(&mut rng, total, keep) {
            mask[i] = true;
        }
        // column-major, matching nalgebra storage
        for (v, keep) in w.iter_mut().zip(mask) {
            if !keep {
                *v = 0.0;
            }
        }
    }
    Ok(AbundanceMatrix::from_nonneg_unchecked(w))
}

/// L×N endmembers drawn from `source`.
pub fn gen_endmembers(
    l: usize,
    n: usize,
    source: &EndmemberSource<'_>,
    seed: u64,
) -> Result<EndmemberMatrix> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    let mut rng = stream_rng(seed, STREAM_ENDMEMBERS);
    match source {
        EndmemberSource::Library(lib) => {
            if lib.bands() != l {
                return Err(Error::dims("library band count", l, lib.bands()));
            }
            if lib.len() < n {
                return Err(Error::param(
                    "n",
                    format!("library holds {} spectra, {n} requested", lib.len()),
                ));
            }
            let picks = index::sample(&mut rng, lib.len(), n).into_vec();
            Ok(EndmemberMatrix::from_nonneg_unchecked(
                lib.spectra().select_columns(picks.iter()),
            ))
        }
        EndmemberSource::SyntheticSmooth => {
            let mut phi = Mat::zeros(l, n);
            let denom = (l.max(2) - 1) as f64;
            for j in 0..n {
                let base = rng.random_range(0.05..0.3);
                let bumps = rng.random_range(1..=5);
                let params: Vec<(f64, f64, f64)> = (0..bumps)
                    .map(|_| {
                        (
                            rng.random_range(0.0..1.0),
                            rng.random_range(0.04..0.25),
                            rng.random_range(0.1..0.7),
                        )
                    })
                    .collect();
                for i in 0..l {
                    let x = i as f64 / denom;
                    let v: f64 = params
                        .iter()
                        .map(|(c, s, a)| a * (-0.5 * ((x - c) / s).powi(2)).exp())
                        .sum();
                    phi[(i, j)] = base + v;
                }
            }
            Ok(EndmemberMatrix::from_nonneg_unchecked(phi))
        }
    }
}

/// Outcome of adding noise to a noiseless mixture.
#[derive(Debug, Clone)]
pub struct MixedScene {
    pub y: ObservationMatrix,
    /// Number of entries raised to zero by clamping.
    pub clamped_entries: usize,
}

/// `Y = Φ_true W_trueᵀ + E` with `E` i.i.d. N(0, σ²). Negative entries are
/// clamped to zero unless `allow_negative` is set.
pub fn mix_and_noise(truth: &GroundTruth, allow_negative: bool) -> Result<MixedScene> {
    if !(truth.sigma >= 0.0 && truth.sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be >= 0, got {}", truth.sigma)));
    }
    let phi = truth.phi_true.as_matrix();
    let w = truth.w_true.as_matrix();
    if phi.ncols() != w.ncols() {
        return Err(Error::dims("ground-truth rank", phi.ncols(), w.ncols()));
    }
    let mut y = phi * w.transpose();
    if truth.sigma > 0.0 {
        let normal = Normal::new(0.0, truth.sigma).expect("sigma validated");
        let mut rng = stream_rng(truth.seed, STREAM_NOISE);
        for v in y.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let mut clamped_entries = 0;
    if !allow_negative {
        for v in y.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clamped_entries += 1;
            }
        }
    }
    let y = ObservationMatrix::allow_negative(y)?;
    Ok(MixedScene { y, clamped_entries })
}

/// Parameters of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub bands: usize,
    pub pixels: usize,
    pub endmembers: usize,
    pub density: f64,
    pub sigma: f64,
    pub seed: u64,
    pub allow_negative: bool,
}

impl SceneSpec {
    /// 224 bands, 500 pixels, 4 endmembers, 30% density, σ = 1e-3.
    pub fn reference(seed: u64) -> Self {
        Self {
            bands: 224,
            pixels: 500,
            endmembers: 4,
            density: 0.3,
            sigma: 1e-3,
            seed,
            allow_negative: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 || self.pixels == 0 || self.endmembers == 0 {
            return Err(Error::param("dimensions", "bands, pixels and endmembers must be >= 1"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::param(
                "density",
                format!("must lie in (0, 1], got {}", self.density),
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn generate(&self, source: &EndmemberSource<'_>) -> Result<(MixedScene, GroundTruth)> {
        self.validate()?;
        let phi_true = gen_endmembers(self.bands, self.endmembers, source, self.seed)?;
        let w_true = gen_abundances(self.pixels, self.endmembers, self.density, self.seed)?;
        let truth = GroundTruth {
            phi_true,
            w_true,
            sigma: self.sigma,
            seed: self.seed,
        };
        let scene = mix_and_noise(&truth, self.allow_negative)?;
        Ok((scene, truth))
    }
}
