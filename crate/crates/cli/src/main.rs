//! `qmd`: generate sets, measure density, decompose and verify.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qmd_core::QmdError;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "qmd", version, about = "Quantitative metric density on dyadic grids")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "QMD_THREADS")]
    pub threads: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Floating scalar for root-valued quantities.
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a set file.
    Gen(commands::GenArgs),
    /// Write the nested nets of a grid.
    Nets(commands::NetsArgs),
    /// Carleson sums of a set over cubes or balls.
    Analyze(commands::AnalyzeArgs),
    /// Split a set into well-connected pieces and a small garbage set.
    Decompose(commands::DecomposeArgs),
    /// Re-check a decomposition against its set.
    Verify(commands::VerifyArgs),
    /// Density sweep of the one-dimensional counterexample.
    Counterexample(commands::CounterexampleArgs),
    /// CSV tables for the Carleson and garbage-set plots.
    Report(commands::ReportArgs),
    /// Re-run the command recorded in an output file.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Output file carrying a manifest.
    #[arg(long)]
    pub from: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// How a command finished when it did not error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A checked property failed; witnesses were written.
    Failed,
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<QmdError>() {
        return match e {
            QmdError::InvalidGeometry { .. } => "invalid_geometry",
            QmdError::LevelOverflow { .. } => "level_overflow",
            QmdError::PointOutsideRegion { .. } => "point_outside_region",
            QmdError::ResolutionTooCoarse { .. } => "resolution_too_coarse",
            QmdError::InvalidSpec(_) => "invalid_spec",
            QmdError::EmptyBall => "empty_ball",
            QmdError::EmptySet => "empty_set",
            QmdError::EmptyRegion => "empty_region",
            QmdError::Domain(_) => "domain",
            QmdError::AssignmentFailure { .. } => "assignment_failure",
            QmdError::CapExceeded(_) => "cap_exceeded",
            QmdError::Format(_) => "format",
            QmdError::Json(_) => "json",
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    if err.downcast_ref::<serde_json::Error>().is_some() {
        return "json";
    }
    "error"
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
}

/// Parses `argv` (without the program name) and runs it.
pub fn run(argv: &[String]) -> anyhow::Result<Status> {
    let cli = Cli::try_parse_from(std::iter::once("qmd".to_string()).chain(argv.iter().cloned()))?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            b = b.num_threads(n);
        }
        b.build()?
    };
    pool.install(|| dispatch(&cli, argv))
}

fn dispatch(cli: &Cli, argv: &[String]) -> anyhow::Result<Status> {
    let ctx = commands::Ctx { argv, seed: cli.seed, precision: cli.precision };
    match &cli.command {
        Command::Gen(a) => commands::gen(&ctx, a),
        Command::Nets(a) => commands::nets(&ctx, a),
        Command::Analyze(a) => commands::analyze(&ctx, a),
        Command::Decompose(a) => commands::decompose(&ctx, a),
        Command::Verify(a) => commands::verify(&ctx, a),
        Command::Counterexample(a) => commands::counterexample(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
        Command::Replay(a) => replay(a),
    }
}

fn replay(a: &ReplayArgs) -> anyhow::Result<Status> {
    let m = manifest::Manifest::read_from(&a.from)?;
    m.check_inputs()?;
    let mut argv = m.args.clone();
    if let Some(out) = &a.out {
        argv.extend(["--out".to_string(), out.display().to_string()]);
    }
    if let Some(dir) = &a.out_dir {
        argv.extend(["--out-dir".to_string(), dir.display().to_string()]);
    }
    run(&argv)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let start = Instant::now();
    let result = run(&argv);
    eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(2),
        Err(err) => {
            if let Some(e) = err.downcast_ref::<clap::Error>() {
                use clap::error::ErrorKind;
                if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                report_error("usage", &e.render().to_string());
                return ExitCode::from(1);
            }
            report_error(error_kind(&err), &format!("{err:#}"));
            ExitCode::from(1)
        }
    }
}
