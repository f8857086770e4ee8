//! Command-line front end for the barrier-traversal simulator. Every mode
//! reads a `key = value` config file and writes its tables into an output
//! directory; `--plot` adds self-contained SVG charts.

mod config;
mod modes;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Config, ConfigError};

#[derive(Parser)]
#[command(name = "nelson", version, about = "Stochastic barrier-traversal simulator")]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a key = value config file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV tables, manifest.txt, and charts.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG charts.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Mode {
    /// Stationary reflection/transmission coefficients over an energy range.
    Coefficients(RunArgs),
    /// Tabulate the field density at a list of times.
    Evolve(RunArgs),
    /// Forward walker ensemble with position snapshots.
    Paths(RunArgs),
    /// Backward traversal-time experiment for one absorptive barrier.
    TunnelingTime(RunArgs),
    /// Traversal-time experiment for the coupled two-channel barrier.
    ChannelTime(RunArgs),
    /// Traversal times across a list of absorption strengths.
    Sweep(RunArgs),
    /// Check the grid density law against the quantum density.
    FpCheck(RunArgs),
}

impl Mode {
    fn args(&self) -> &RunArgs {
        match self {
            Mode::Coefficients(a)
            | Mode::Evolve(a)
            | Mode::Paths(a)
            | Mode::TunnelingTime(a)
            | Mode::ChannelTime(a)
            | Mode::Sweep(a)
            | Mode::FpCheck(a) => a,
        }
    }
}

fn run(mode: &Mode) -> anyhow::Result<()> {
    let args = mode.args();
    let mut cfg = Config::load(&args.config)?;
    let out = args.out_dir.as_path();
    match mode {
        Mode::Coefficients(_) => modes::coefficients(&mut cfg, out, args.plot),
        Mode::Evolve(_) => modes::evolve(&mut cfg, out, args.plot),
        Mode::Paths(_) => modes::paths(&mut cfg, out, args.seed, args.plot),
        Mode::TunnelingTime(_) => modes::tunneling_time(&mut cfg, out, args.seed, args.plot),
        Mode::ChannelTime(_) => modes::channel_time(&mut cfg, out, args.seed, args.plot),
        Mode::Sweep(_) => modes::sweep(&mut cfg, out, args.seed, args.plot),
        Mode::FpCheck(_) => modes::fp_check(&mut cfg, out, args.plot),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.mode) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Config mistakes are the user's to fix; anything else is a
            // failed run and gets a distinct exit code.
            if e.downcast_ref::<ConfigError>().is_some() {
                eprintln!("config error: {e}");
                ExitCode::from(1)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        }
    }
}
