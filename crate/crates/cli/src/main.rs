mod args;
mod commands;
mod error;
mod repro;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliResult;

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => {
            let out = commands::run_synth(&a)?;
            println!(
                "wrote {} ({} noisy entries clamped to 0)",
                out.observations.display(),
                out.clamped_entries
            );
        }
        Command::Unmix(a) => {
            let report = commands::run_unmix(&a)?;
            let s = report.solver.as_ref().expect("solver trace");
            println!(
                "effective rank {} of r = {} after {} iterations ({:?}), final cost {:.9e}; results in {}",
                s.final_effective_rank,
                report.config.as_ref().map_or(0, |c| c.r),
                s.iterations,
                s.stop_reason,
                s.final_cost(),
                a.out.display()
            );
            if s.degenerate {
                println!("warning: every column was pruned (degenerate run)");
            }
        }
        Command::Eval(a) => {
            let (m, path) = commands::run_eval(&a)?;
            println!("{}", commands::describe_match(&m));
            println!("report: {}", path.display());
        }
        Command::ReproSim(a) => {
            let summary = repro::run_repro(&a)?;
            println!("{}", repro::format_table(&summary));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors by itself.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
