use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irsbeam_cli::{run_experiment, CliError, ConfigFile, ExperimentKind, ExperimentSpec, Overrides};

#[derive(Parser)]
#[command(name = "irsbeam", version, about = "Sum-rate experiments for multi-IRS downlink beamforming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described in the config file.
    Run(RunArgs),
    /// Record objective traces per outer iteration over a grid of user counts.
    Convergence(RunArgs),
    /// Compare against random beamforming over a grid of surface sizes.
    CompareBaseline(RunArgs),
    /// Check a config file and report every problem found.
    ValidateConfig {
        #[arg(short, long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory (also settable via IRSBEAM_OUTPUT_DIR).
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Overrides the number of trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
}

fn run(args: RunArgs, kind: Option<ExperimentKind>) -> Result<(), CliError> {
    let overrides = Overrides {
        kind,
        seed: args.seed,
        trials: args.trials,
        output_dir: args.output_dir,
    };
    let spec = ExperimentSpec::load(&args.config, &overrides)?;
    let out = run_experiment(&spec)?;
    for (seed, msg) in &out.failures {
        eprintln!("trial with seed {seed} failed: {msg}");
    }
    let done = out.records.iter().filter(|r| !r.failed()).count();
    println!("{done}/{} trials completed, outputs in {}", out.records.len(), spec.output_dir.display());
    if done == 0 {
        return Err(CliError::Runtime("every trial failed".into()));
    }
    Ok(())
}

fn validate(config: PathBuf) -> Result<(), CliError> {
    let file = ConfigFile::load(&config)?;
    ExperimentSpec::from_file(&file, &Overrides::default())?;
    println!("{}: ok", config.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a, None),
        Command::Convergence(a) => run(a, Some(ExperimentKind::ConvergenceTrace)),
        Command::CompareBaseline(a) => run(a, Some(ExperimentKind::BaselineCompare)),
        Command::ValidateConfig { config } => validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
