use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use echo2d::config::RunConfig;
use echo2d::pipeline;
use echo2d::response::Pathway;
use echo2d::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "echo2d", version, about = "2D photon-echo spectra from stationary-basis cumulant response functions")]
struct Cli {
    /// Worker threads for the grid evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every configured t2 and write grids, spectra and metadata.
    Run(RunArgs),
    /// Run the built-in numerical checks for a configuration.
    Verify(RunArgs),
    /// Print peak tables from an existing output directory.
    Peaks(PeakArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Restricts the pathways; repeatable.
    #[arg(long = "pathway")]
    pathways: Vec<Pathway>,
}

#[derive(Args)]
struct PeakArgs {
    /// Output directory of a previous run.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Config whose `output_dir` is used when `--output-dir` is absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    max: usize,
    /// Peaks below this fraction of the largest |Re S| are dropped.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid { .. }
        | Error::Parse { .. }
        | Error::DegenerateStates { .. }
        | Error::DimensionCap { .. }
        | Error::NonUniformAxis => EXIT_VALIDATION,
        Error::Check(_) => EXIT_CHECK,
        Error::Io { .. } => EXIT_FAILURE,
    }
}

fn load(args: &RunArgs, diagnostics: bool) -> echo2d::Result<RunConfig> {
    let mut config = if diagnostics {
        RunConfig::load_for_diagnostics(&args.config)?
    } else {
        RunConfig::load(&args.config)?
    };
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    if !args.pathways.is_empty() {
        if args.pathways.contains(&Pathway::Esa) && config.model.n_sites() < 2 {
            return Err(Error::invalid("pathways", "ESA needs at least two sites"));
        }
        config.pathways = args.pathways.clone();
    }
    Ok(config)
}

fn execute(cli: Cli) -> echo2d::Result<u8> {
    match cli.command {
        Command::Run(args) => {
            let config = load(&args, false)?;
            let summary = pipeline::run(&config)?;
            for dir in &summary.snapshot_dirs {
                println!("wrote {}", dir.display());
            }
            Ok(0)
        }
        Command::Verify(args) => {
            let config = load(&args, true)?;
            let report = pipeline::verify(&config)?;
            for c in &report.checks {
                println!("{c}");
            }
            Ok(if report.passed() { 0 } else { EXIT_CHECK })
        }
        Command::Peaks(args) => {
            let dir = match (args.output_dir, args.config) {
                (Some(d), _) => d,
                (None, Some(c)) => RunConfig::load(&c)?.output_dir,
                (None, None) => return Err(Error::invalid("output_dir", "pass --output-dir or --config")),
            };
            println!("t2_fs,omega1_cm-1,omega3_cm-1,re_height");
            for (t2, peaks) in pipeline::peaks(&dir, args.max, args.threshold)? {
                for p in peaks {
                    println!("{t2},{:.2},{:.2},{:.6e}", p.omega1, p.omega3, p.height);
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
