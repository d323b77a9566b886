use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lrsnmf::init::{InitKind, InitSpec};
use lrsnmf::io::{
    load_matrix, save_matrix, save_results, ImageShape, InputEcho, MatrixFile, MatrixFormat,
    RunReport, Timings,
};
use lrsnmf::metrics::{evaluate, MatchResult};
use lrsnmf::synth::{EndmemberSource, SceneSpec, SpectralLibrary};
use lrsnmf::{solve, AbundanceMatrix, EndmemberMatrix, ObservationMatrix, SolverConfig};

use crate::args::{EvalArgs, SceneArgs, SourceArg, SynthArgs, UnmixArgs};
use crate::error::{CliError, CliResult};

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const TRUE_ENDMEMBERS_FILE: &str = "endmembers_true.csv";
pub const TRUE_ABUNDANCES_FILE: &str = "abundances_true.csv";
pub const TRUTH_REPORT_FILE: &str = "truth.toml";
pub const EVAL_REPORT_FILE: &str = "eval.toml";

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn image_shape(height: Option<usize>, width: Option<usize>, pixels: usize) -> CliResult<Option<ImageShape>> {
    match (height, width) {
        (None, None) => Ok(None),
        (Some(height), Some(width)) if height * width == pixels => Ok(Some(ImageShape { height, width })),
        (Some(h), Some(w)) => Err(invalid(format!(
            "--height {h} × --width {w} = {} does not match the {pixels} pixels",
            h * w
        ))),
        _ => Err(invalid("--height and --width must be given together")),
    }
}

impl SceneArgs {
    pub fn spec(&self, seed: u64) -> SceneSpec {
        SceneSpec {
            bands: self.bands,
            pixels: self.pixels,
            endmembers: self.endmembers,
            density: self.density,
            sigma: self.sigma,
            seed,
            allow_negative: self.allow_negative,
        }
    }

    pub fn library(&self) -> CliResult<Option<SpectralLibrary>> {
        if self.source == SourceArg::SyntheticSmooth {
            if self.library.is_some() {
                return Err(invalid("--library only applies to --source library"));
            }
            return Ok(None);
        }
        Ok(Some(match &self.library {
            None => SpectralLibrary::builtin(),
            Some(path) => {
                let file = MatrixFile::new(path).with_layout(lrsnmf::io::Layout::PixelsByBands);
                SpectralLibrary::new(load_matrix(&file)?)?
            }
        }))
    }
}

/// Summary line printed after a synth run.
pub struct SynthOutcome {
    pub observations: PathBuf,
    pub clamped_entries: usize,
}

pub fn run_synth(args: &SynthArgs) -> CliResult<SynthOutcome> {
    let spec = args.scene.spec(args.seed);
    spec.validate()?;
    let image = image_shape(args.height, args.width, spec.pixels)?;
    let library = args.scene.library()?;
    let source = match &library {
        Some(lib) => EndmemberSource::Library(lib),
        None => EndmemberSource::SyntheticSmooth,
    };
    let started = Instant::now();
    let (scene, truth) = spec.generate(&source)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::Runtime(format!("{}: {e}", args.out.display())))?;
    let fmt = MatrixFormat::default();
    let observations = args.out.join(OBSERVATIONS_FILE);
    save_matrix(&observations, scene.y.as_matrix(), &fmt)?;
    save_matrix(args.out.join(TRUE_ENDMEMBERS_FILE), truth.phi_true.as_matrix(), &fmt)?;
    save_matrix(args.out.join(TRUE_ABUNDANCES_FILE), truth.w_true.as_matrix(), &fmt)?;

    let mut report = RunReport::new("synth");
    report.scene = Some(spec);
    report.image = image;
    report.timings = Timings {
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    report.save(args.out.join(TRUTH_REPORT_FILE))?;
    Ok(SynthOutcome {
        observations,
        clamped_entries: scene.clamped_entries,
    })
}

/// Settings of an unmix run after merging defaults, a stored report and
/// explicit flags.
#[derive(Debug, Clone)]
pub struct ResolvedUnmix {
    pub input: InputEcho,
    pub init: InitSpec,
    pub config: SolverConfig,
    pub image: Option<ImageShape>,
}

fn load_observation(input: &InputEcho) -> CliResult<ObservationMatrix> {
    let data = load_matrix(&MatrixFile {
        path: input.path.clone(),
        format: input.format,
    })?;
    Ok(if input.allow_negative {
        ObservationMatrix::allow_negative(data)?
    } else {
        ObservationMatrix::new(data)?
    })
}

pub fn resolve_unmix(args: &UnmixArgs) -> CliResult<(ResolvedUnmix, ObservationMatrix)> {
    let stored = match &args.from_report {
        Some(path) => Some(RunReport::load(path)?),
        None => None,
    };
    if let Some(report) = &stored {
        if report.command != "unmix" {
            return Err(invalid(format!(
                "--from-report expects an unmix report, got a {} report",
                report.command
            )));
        }
    }

    // Input file and format.
    let stored_input = stored.as_ref().and_then(|r| r.input.clone());
    let mut format = stored_input.as_ref().map(|i| i.format).unwrap_or_default();
    if let Some(layout) = args.format.layout {
        format.layout = layout.into();
    }
    if let Some(d) = args.format.delimiter {
        format.delimiter = d;
    }
    format.header |= args.format.header;
    let path = match (&args.input, &stored_input) {
        (Some(p), _) => p.clone(),
        (None, Some(i)) => i.path.clone(),
        (None, None) => return Err(invalid("--input is required (or --from-report)")),
    };
    let input = InputEcho {
        path: std::path::absolute(&path).unwrap_or(path),
        format,
        allow_negative: args.allow_negative || stored_input.is_some_and(|i| i.allow_negative),
    };
    let y = load_observation(&input)?;

    // Initialization.
    let stored_init = stored.as_ref().and_then(|r| r.init);
    let r = args.r.or(stored_init.map(|i| i.r)).unwrap_or(10);
    let init = InitSpec {
        kind: args
            .init
            .map(InitKind::from)
            .or(stored_init.map(|i| i.kind))
            .unwrap_or(InitKind::UniformRandom),
        r,
        seed: args.seed.or(stored_init.map(|i| i.seed)).unwrap_or(0),
    };
    if r == 0 {
        return Err(invalid("--r must be at least 1"));
    }

    // Solver configuration: data-scaled defaults, then stored, then flags.
    let mut config = match stored.as_ref().and_then(|r| r.config.clone()) {
        Some(c) => c,
        None => SolverConfig::for_observation(&y, r),
    };
    config.r = r;
    config.seed = init.seed;
    macro_rules! overlay {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = args.$flag { config.$($field).+ = v; })*
        };
    }
    overlay!(
        delta => delta,
        lambda1 => lambda1,
        eta => eta,
        max_iter => max_iter,
        tol => tol_rel_cost,
        prune_tol => prune_tol,
        beta_init => line_search.beta_init,
        shrink => line_search.shrink,
        max_backtracks => line_search.max_backtracks,
    );
    config.validate()?;

    let (height, width) = match (args.height, args.width) {
        (None, None) => stored
            .as_ref()
            .and_then(|r| r.image)
            .map_or((None, None), |s| (Some(s.height), Some(s.width))),
        hw => hw,
    };
    let image = image_shape(height, width, y.pixels())?;
    Ok((ResolvedUnmix { input, init, config, image }, y))
}

pub fn run_unmix(args: &UnmixArgs) -> CliResult<RunReport> {
    let started = Instant::now();
    let (resolved, y) = resolve_unmix(args)?;
    if resolved.init.kind == InitKind::Vca && resolved.init.r > y.bands().min(y.pixels()) {
        return Err(invalid(format!(
            "--r {} exceeds min(L, K) = {} required by VCA",
            resolved.init.r,
            y.bands().min(y.pixels())
        )));
    }
    let (phi0, w0) = resolved.init.initialize(&y)?;
    let solution = solve(&y, &phi0, &w0, &resolved.config)?;

    let mut report = RunReport::new("unmix");
    report.input = Some(resolved.input);
    report.init = Some(resolved.init);
    report.config = Some(resolved.config);
    report.solver = Some(solution.report);
    report.timings = Timings {
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    save_results(&solution.phi, &solution.w, &mut report, &args.out, resolved.image)?;
    Ok(report)
}

pub fn run_eval(args: &EvalArgs) -> CliResult<(MatchResult, PathBuf)> {
    let started = Instant::now();
    let load = |p: &Path| load_matrix(&MatrixFile::new(p));
    let phi_est = EndmemberMatrix::new(load(&args.estimated)?)?;
    let phi_ref = EndmemberMatrix::new(load(&args.reference)?)?;
    if phi_est.nrows() != phi_ref.nrows() {
        return Err(invalid(format!(
            "band counts differ: estimated has {}, reference has {}",
            phi_est.nrows(),
            phi_ref.nrows()
        )));
    }
    let abundances = match (&args.estimated_abundances, &args.reference_abundances) {
        (Some(e), Some(r)) => {
            let we = AbundanceMatrix::new(load(e)?)?;
            let wr = AbundanceMatrix::new(load(r)?)?;
            if we.rank() != phi_est.rank() || wr.rank() != phi_ref.rank() {
                return Err(invalid("abundance column counts must match the endmember files"));
            }
            Some((we, wr))
        }
        _ => None,
    };
    let result = evaluate(
        &phi_est,
        abundances.as_ref().map(|a| &a.0),
        &phi_ref,
        abundances.as_ref().map(|a| &a.1),
    )?;

    let mut report = RunReport::new("eval");
    report.metrics = Some(result.clone());
    report.timings = Timings {
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let path = match &args.report {
        Some(p) => p.clone(),
        None => args
            .estimated
            .parent()
            .unwrap_or(Path::new("."))
            .join(EVAL_REPORT_FILE),
    };
    report.save(&path)?;
    Ok((result, path))
}

pub fn describe_match(m: &MatchResult) -> String {
    let mut s = format!(
        "estimated rank {} vs reference {} ({})\n",
        m.estimated_rank,
        m.reference_rank,
        if m.rank_correct { "correct" } else { "incorrect" }
    );
    for p in &m.pairs {
        s += &format!(
            "  estimated {:>2} ↔ reference {:>2}: SAM {:8.4}°\n",
            p.estimated, p.reference, p.sam_degrees
        );
    }
    s += &format!("mean SAM {:.4}°", m.mean_sam_degrees);
    if let Some(a) = &m.abundance {
        s += &format!(", abundance RMSE {:.6e}", a.rmse);
    }
    s
}
