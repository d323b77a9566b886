//! `repro-sim`: synth → unmix → eval per seed, through the same code paths
//! (and files) as the individual subcommands.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::args::{EvalArgs, FormatArgs, ReproArgs, SynthArgs, UnmixArgs};
use crate::commands::{
    run_eval, run_synth, run_unmix, TRUE_ABUNDANCES_FILE, TRUE_ENDMEMBERS_FILE,
};
use crate::error::{CliError, CliResult};

pub const SUMMARY_FILE: &str = "summary.toml";

#[derive(Debug, Clone, Serialize)]
pub struct SeedRow {
    pub seed: u64,
    pub effective_rank: usize,
    pub rank_correct: bool,
    pub mean_sam_degrees: f64,
    pub abundance_rmse: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproSummary {
    pub schema_version: u32,
    pub command: String,
    pub n_seeds: u64,
    pub first_seed: u64,
    pub rank_recovery_rate: f64,
    /// Averages over all seeds with at least one matched pair.
    pub mean_sam_degrees: f64,
    pub mean_abundance_rmse: f64,
    pub seeds: Vec<SeedRow>,
}

pub fn seed_dir(out: &std::path::Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed:04}"))
}

fn run_one(args: &ReproArgs, seed: u64) -> CliResult<SeedRow> {
    let dir = seed_dir(&args.out, seed);
    let synth_dir = dir.join("synth");
    let unmix_dir = dir.join("unmix");
    let synth = run_synth(&SynthArgs {
        scene: args.scene.clone(),
        seed,
        height: None,
        width: None,
        out: synth_dir.clone(),
    })?;
    let report = run_unmix(&UnmixArgs {
        input: Some(synth.observations),
        format: FormatArgs::default(),
        allow_negative: args.scene.allow_negative,
        from_report: None,
        r: Some(args.r),
        init: Some(args.init),
        seed: Some(seed),
        delta: None,
        lambda1: None,
        eta: None,
        max_iter: None,
        tol: None,
        prune_tol: None,
        beta_init: None,
        shrink: None,
        max_backtracks: None,
        height: None,
        width: None,
        out: unmix_dir.clone(),
    })?;
    let solver = report.solver.expect("unmix report carries the solver trace");
    if solver.final_effective_rank == 0 {
        return Ok(SeedRow {
            seed,
            effective_rank: 0,
            rank_correct: false,
            mean_sam_degrees: f64::NAN,
            abundance_rmse: f64::NAN,
            iterations: solver.iterations,
        });
    }
    let (m, _) = run_eval(&EvalArgs {
        estimated: unmix_dir.join(lrsnmf::io::ENDMEMBERS_FILE),
        reference: synth_dir.join(TRUE_ENDMEMBERS_FILE),
        estimated_abundances: Some(unmix_dir.join(lrsnmf::io::ABUNDANCES_FILE)),
        reference_abundances: Some(synth_dir.join(TRUE_ABUNDANCES_FILE)),
        report: None,
    })?;
    Ok(SeedRow {
        seed,
        effective_rank: solver.final_effective_rank,
        rank_correct: m.rank_correct,
        mean_sam_degrees: m.mean_sam_degrees,
        abundance_rmse: m.abundance.map_or(f64::NAN, |a| a.rmse),
        iterations: solver.iterations,
    })
}

pub fn run_repro(args: &ReproArgs) -> CliResult<ReproSummary> {
    if args.n_seeds == 0 {
        return Err(CliError::Validation("--n-seeds must be at least 1".into()));
    }
    if args.r == 0 {
        return Err(CliError::Validation("--r must be at least 1".into()));
    }
    args.scene.spec(args.seed).validate()?;
    args.scene.library()?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let seeds: Vec<u64> = (args.seed..args.seed + args.n_seeds).collect();

    // Seeds are dealt round-robin to workers; results are put back in seed
    // order, so the summary does not depend on scheduling.
    let mut results: Vec<Option<CliResult<SeedRow>>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs.min(seeds.len()))
            .map(|worker| {
                let seeds = &seeds;
                scope.spawn(move || {
                    (worker..seeds.len())
                        .step_by(jobs)
                        .map(|i| (i, run_one(args, seeds[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker thread panicked") {
                results[i] = Some(r);
            }
        }
    });
    let rows = results
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect::<CliResult<Vec<_>>>()?;

    let n = rows.len() as f64;
    let matched: Vec<&SeedRow> = rows.iter().filter(|r| r.effective_rank > 0).collect();
    let mean = |f: fn(&SeedRow) -> f64| {
        if matched.is_empty() {
            f64::NAN
        } else {
            matched.iter().map(|r| f(r)).sum::<f64>() / matched.len() as f64
        }
    };
    let summary = ReproSummary {
        schema_version: lrsnmf::io::REPORT_SCHEMA_VERSION,
        command: "repro-sim".into(),
        n_seeds: args.n_seeds,
        first_seed: args.seed,
        rank_recovery_rate: rows.iter().filter(|r| r.rank_correct).count() as f64 / n,
        mean_sam_degrees: mean(|r| r.mean_sam_degrees),
        mean_abundance_rmse: mean(|r| r.abundance_rmse),
        seeds: rows,
    };
    let path = args.out.join(SUMMARY_FILE);
    let text = toml::to_string(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(summary)
}

pub fn format_table(s: &ReproSummary) -> String {
    let mut out = String::from("seed  rank  correct  mean SAM (°)  abundance RMSE  iterations\n");
    for r in &s.seeds {
        writeln!(
            out,
            "{:>4}  {:>4}  {:>7}  {:>12.4}  {:>14.6e}  {:>10}",
            r.seed, r.effective_rank, r.rank_correct, r.mean_sam_degrees, r.abundance_rmse, r.iterations
        )
        .unwrap();
    }
    write!(
        out,
        "rank-recovery rate {:.3}, mean SAM {:.4}°, mean abundance RMSE {:.6e}",
        s.rank_recovery_rate, s.mean_sam_degrees, s.mean_abundance_rmse
    )
    .unwrap();
    out
}
