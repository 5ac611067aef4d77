use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use mollify::pipeline::Warning;
use mollify::{AppError, AppResult, RunConfig, Workspace};

#[derive(Parser)]
#[command(name = "mollify", version, about = "Mollified tomographic reconstruction pipeline")]
struct Cli {
    /// Run configuration (`key = value` lines); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise and probe seed, overriding `noise.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only run the path without data preprocessing.
    #[arg(long, global = true)]
    skip_preprocess: bool,
    /// Exit with status 3 when any solver stops before converging.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Phantom, clean sinogram and noisy sinogram.
    Simulate,
    /// Regularized data for every cutoff.
    Preprocess,
    /// Target, reconstructions and FBP for every cutoff.
    Reconstruct,
    /// Metrics table and ordering report.
    Evaluate,
    /// All stages in order.
    All,
}

fn load(cli: &Cli) -> AppResult<Workspace> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.noise.seed = seed;
    }
    Workspace::new(config)
}

fn run(cli: &Cli) -> AppResult<()> {
    let ws = load(cli)?;
    let start = Instant::now();
    let mut warnings: Vec<Warning> = Vec::new();
    let mut evaluation = None;
    match cli.command {
        Command::Simulate => {
            let sim = ws.simulate()?;
            println!("noisy sinogram total {} (scale {:.6e})", sim.noisy.total(), sim.scale);
        }
        Command::Preprocess => {
            if cli.skip_preprocess {
                println!("preprocessing skipped");
            } else {
                warnings = ws.preprocess()?;
            }
        }
        Command::Reconstruct => warnings = ws.reconstruct(cli.skip_preprocess)?,
        Command::Evaluate => evaluation = Some(ws.evaluate()?),
        Command::All => {
            let (e, w) = ws.run_all(cli.skip_preprocess)?;
            evaluation = Some(e);
            warnings = w;
        }
    }
    if let Some(e) = evaluation {
        print!("{}", e.csv());
        print!("{}", e.ordering_report());
    }
    for w in &warnings {
        eprintln!("warning: {}: {}", w.what, w.detail);
    }
    println!("done in {:.1} s, outputs in {}", start.elapsed().as_secs_f64(), ws.dir().display());
    if cli.strict && !warnings.is_empty() {
        return Err(AppError::NotConverged(
            warnings.iter().map(|w| w.what.as_str()).collect::<Vec<_>>().join(", "),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
