use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use damped_kg::cli::{run_from_file, Experiment, ExitStatus, RunOptions};

#[derive(Parser)]
#[command(version, about = "Spectral experiments for damped Klein-Gordon equations on compact groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit L2 decay rates of a homogeneous solution
    LinearDecay(Common),
    /// Linear decay over a list of (b, m_sq) pairs
    RegimeSweep(Common),
    /// Picard iteration for small data
    SemilinearExistence(Common),
    /// Bracket the largest data amplitude for which Picard converges
    EpsilonThreshold(Common),
    /// Gagliardo-Nirenberg ratio over a random ensemble
    GnProbe(Common),
    /// Tabulate propagator multipliers
    PropagatorTable(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Data seed (overrides `data.seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Print nothing on success
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::LinearDecay(c) => (Experiment::LinearDecay, c),
        Command::RegimeSweep(c) => (Experiment::RegimeSweep, c),
        Command::SemilinearExistence(c) => (Experiment::SemilinearExistence, c),
        Command::EpsilonThreshold(c) => (Experiment::EpsilonThreshold, c),
        Command::GnProbe(c) => (Experiment::GNProbe, c),
        Command::PropagatorTable(c) => (Experiment::PropagatorTable, c),
    };
    let level = if common.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let opts = RunOptions {
        experiment,
        output: common.output,
        seed: common.seed,
    };
    let (status, message) = run_from_file(&common.config, &opts);
    match status {
        ExitStatus::Pass => {
            if !common.quiet {
                println!("{message}");
            }
        }
        _ => eprintln!("error: {message}"),
    }
    ExitCode::from(status.code() as u8)
}
