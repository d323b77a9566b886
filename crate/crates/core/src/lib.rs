//! Sparse, low-rank nonnegative matrix factorization for hyperspectral
//! unmixing.
//!
//! A pixel matrix `Y` (bands × pixels) is factored as `Y ≈ Φ Wᵀ` with
//! nonnegative endmember spectra `Φ` and abundances `W`. A group penalty
//! over the column pairs `(φᵢ, wᵢ)` switches off superfluous components,
//! so the number of endmembers is estimated along with the factors, and an
//! ℓ1 term keeps the abundances sparse.
//!
//! ```no_run
//! use lrsnmf::{init::{InitKind, InitSpec}, solver, synth, SolverConfig};
//!
//! let lib = synth::SpectralLibrary::builtin();
//! let (scene, _truth) = synth::SceneSpec::reference(0)
//!     .generate(&synth::EndmemberSource::Library(&lib))?;
//! let config = SolverConfig::for_observation(&scene.y, 10);
//! let (phi0, w0) = InitSpec { kind: InitKind::UniformRandom, r: 10, seed: 0 }
//!     .initialize(&scene.y)?;
//! let solution = solver::solve(&scene.y, &phi0, &w0, &config)?;
//! println!("estimated rank {}", solution.report.final_effective_rank);
//! # Ok::<(), lrsnmf::Error>(())
//! ```

pub mod error;
pub mod init;
pub mod io;
mod linalg;
pub mod metrics;
pub mod model;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    AbundanceMatrix, EndmemberMatrix, LineSearchConfig, Mat, ObservationMatrix, PenaltyDiagonal,
    Problem, SolverConfig,
};
pub use solver::{solve, solve_full, Solution, SolverReport};
