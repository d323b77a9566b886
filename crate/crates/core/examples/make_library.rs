//! Regenerates `data/spectral_library.csv`, the built-in 224-band library.
//!
//! Each spectrum is a smooth continuum (quadratic in wavelength) multiplied
//! by two to five Gaussian absorption features, clipped to [0.02, 0.98] like
//! a reflectance curve. The draw is seeded, so the file is reproducible:
//!
//! ```text
//! cargo run -p lrsnmf --example make_library > crates/core/data/spectral_library.csv
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BANDS: usize = 224;
const SPECTRA: usize = 16;
const SEED: u64 = 20_240_601;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    println!("# Synthetic mineral-like reflectance library: {SPECTRA} spectra x {BANDS} bands,");
    println!("# one spectrum per row (wavelength index 0..{BANDS} over 0.4-2.5 um).");
    println!("# Continuum times Gaussian absorption features; generated by");
    println!("# `cargo run -p lrsnmf --example make_library` with seed {SEED}.");
    for _ in 0..SPECTRA {
        let a = rng.random_range(0.15..0.6);
        let b = rng.random_range(-0.3..0.4);
        let c = rng.random_range(-0.2..0.2);
        let features: Vec<(f64, f64, f64)> = (0..rng.random_range(2..6))
            .map(|_| {
                (
                    rng.random_range(0.05..0.95),
                    rng.random_range(0.01..0.08),
                    rng.random_range(0.05..0.4),
                )
            })
            .collect();
        let row: Vec<String> = (0..BANDS)
            .map(|i| {
                let x = i as f64 / (BANDS - 1) as f64;
                let mut v = a + b * x + c * x * x;
                for (centre, width, depth) in &features {
                    v *= 1.0 - depth * (-0.5 * ((x - centre) / width).powi(2)).exp();
                }
                format!("{:.16e}", v.clamp(0.02, 0.98))
            })
            .collect();
        println!("{}", row.join(","));
    }
}
