//! Browser demo: generate a scene, unmix it with adjustable weights, and
//! look at the soft-threshold operator. Everything is exported through
//! wasm-bindgen; the same functions are plain Rust on native targets, which
//! is how the tests exercise them.

use lrsnmf::init::{InitKind, InitSpec};
use lrsnmf::metrics::match_columns;
use lrsnmf::solver::soft_threshold;
use lrsnmf::synth::{EndmemberSource, GroundTruth, SceneSpec, SpectralLibrary};
use lrsnmf::{solve, Mat, ObservationMatrix, SolverConfig};
use wasm_bindgen::prelude::*;

fn column_major(m: &Mat) -> Vec<f64> {
    m.as_slice().to_vec()
}

/// A synthetic scene kept in memory between unmixing runs.
#[wasm_bindgen]
pub struct Scene {
    y: ObservationMatrix,
    truth: GroundTruth,
    defaults: SolverConfig,
}

#[wasm_bindgen]
impl Scene {
    /// Mixes `endmembers` spectra from the built-in library over `pixels`
    /// pixels with the given abundance density and noise level.
    #[wasm_bindgen(constructor)]
    pub fn new(
        pixels: usize,
        endmembers: usize,
        density: f64,
        sigma: f64,
        seed: u32,
    ) -> Result<Scene, String> {
        let lib = SpectralLibrary::builtin();
        let spec = SceneSpec {
            bands: lib.bands(),
            pixels,
            endmembers,
            density,
            sigma,
            seed: seed as u64,
            allow_negative: false,
        };
        let (scene, truth) = spec
            .generate(&EndmemberSource::Library(&lib))
            .map_err(|e| e.to_string())?;
        let defaults = SolverConfig::for_observation(&scene.y, 1);
        Ok(Scene {
            y: scene.y,
            truth,
            defaults,
        })
    }

    pub fn bands(&self) -> usize {
        self.y.bands()
    }

    pub fn pixels(&self) -> usize {
        self.y.pixels()
    }

    pub fn true_rank(&self) -> usize {
        self.truth.phi_true.rank()
    }

    /// True endmember spectra, L×N column-major.
    pub fn true_spectra(&self) -> Vec<f64> {
        column_major(self.truth.phi_true.as_matrix())
    }

    /// Data-scaled default for δ.
    pub fn default_delta(&self) -> f64 {
        self.defaults.delta
    }

    /// Data-scaled default for λ1.
    pub fn default_lambda1(&self) -> f64 {
        self.defaults.lambda1
    }

    pub fn default_eta(&self) -> f64 {
        self.defaults.eta
    }

    /// Runs the solver from a uniform (or VCA) start with overestimated rank
    /// `r` and the given weights.
    pub fn unmix(
        &self,
        r: usize,
        delta: f64,
        lambda1: f64,
        max_iter: usize,
        use_vca: bool,
        seed: u32,
    ) -> Result<Unmixing, String> {
        let mut config = SolverConfig::new(r, delta, lambda1, self.defaults.eta);
        config.max_iter = max_iter;
        config.seed = seed as u64;
        config.validate().map_err(|e| e.to_string())?;
        let init = InitSpec {
            kind: if use_vca { InitKind::Vca } else { InitKind::UniformRandom },
            r,
            seed: seed as u64,
        };
        let (phi0, w0) = init.initialize(&self.y).map_err(|e| e.to_string())?;
        let sol = solve(&self.y, &phi0, &w0, &config).map_err(|e| e.to_string())?;

        let (mut sam, mut matched_truth) = (Vec::new(), Vec::new());
        let mut mean_sam = f64::NAN;
        if sol.phi.rank() > 0 {
            let m = match_columns(&sol.phi, &self.truth.phi_true).map_err(|e| e.to_string())?;
            mean_sam = m.mean_sam_degrees;
            // per estimated column: SAM and matched true column (or -1)
            sam = vec![f64::NAN; sol.phi.rank()];
            matched_truth = vec![-1; sol.phi.rank()];
            for p in &m.pairs {
                sam[p.estimated] = p.sam_degrees;
                matched_truth[p.estimated] = p.reference as i32;
            }
        }
        Ok(Unmixing {
            cost_trace: sol.report.cost_trace.clone(),
            rank_trace: sol.report.effective_rank_trace.iter().map(|&k| k as u32).collect(),
            spectra: column_major(sol.phi.as_matrix()),
            effective_rank: sol.report.final_effective_rank,
            iterations: sol.report.iterations,
            sam,
            matched_truth,
            mean_sam,
        })
    }
}

/// Result of one unmixing run.
#[wasm_bindgen]
pub struct Unmixing {
    cost_trace: Vec<f64>,
    rank_trace: Vec<u32>,
    spectra: Vec<f64>,
    effective_rank: usize,
    iterations: usize,
    sam: Vec<f64>,
    matched_truth: Vec<i32>,
    mean_sam: f64,
}

#[wasm_bindgen]
impl Unmixing {
    pub fn cost_trace(&self) -> Vec<f64> {
        self.cost_trace.clone()
    }

    pub fn rank_trace(&self) -> Vec<u32> {
        self.rank_trace.clone()
    }

    /// Surviving endmember spectra, L×N_eff column-major.
    pub fn spectra(&self) -> Vec<f64> {
        self.spectra.clone()
    }

    pub fn effective_rank(&self) -> usize {
        self.effective_rank
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Spectral angle (degrees) of each estimated column to its matched
    /// true spectrum; NaN when unmatched.
    pub fn sam(&self) -> Vec<f64> {
        self.sam.clone()
    }

    /// Index of the matched true spectrum per estimated column, −1 if none.
    pub fn matched_truth(&self) -> Vec<i32> {
        self.matched_truth.clone()
    }

    pub fn mean_sam(&self) -> f64 {
        self.mean_sam
    }
}

/// `ST(x, λ)` evaluated at every entry of `xs`, for plotting the operator.
#[wasm_bindgen]
pub fn soft_threshold_curve(xs: Vec<f64>, lambda: f64) -> Result<Vec<f64>, String> {
    let m = Mat::from_vec(xs.len(), 1, xs);
    Ok(soft_threshold(&m, lambda).map_err(|e| e.to_string())?.as_slice().to_vec())
}
