//! Command-line runner for the named DCMA experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcma::experiments::{self, Experiment, ExperimentConfig, OUT_DIR_ENV};

const CONFIG_ERROR: u8 = 2;
const NUMERICAL_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "dcma", version, about = "Dispersion code multiple access experiments")]
#[command(after_help = format!(
    "Outputs go to <out>/<experiment>/. The output root is --out, else the config's \"output\", \
     else ${OUT_DIR_ENV}, else ./{}.\n\
     Exit codes: 0 success, 2 configuration error, 3 numerical-validation failure.\n\
     Default grids use fs = max(4 f0, 2 f0 + delta_f) and the smallest power-of-two n_fft whose \
     window spans 16 bit periods; long MAI trains grow the window as needed.",
    experiments::DEFAULT_OUT_DIR
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cascaded delay profiles and decoded envelopes of synchronized users.
    Waveforms(RunArgs),
    /// Worst-case MAI histogram, fitted normal, SIR and BEP statistics.
    MaiDist(RunArgs),
    /// BEP versus number of users for all-odd code sets.
    BepVsN(RunArgs),
    /// BEP versus SNR for several user counts.
    BepVsSnr(RunArgs),
    /// Two-user DOOK demonstration traces.
    #[command(name = "demo-2x2")]
    Demo2x2(RunArgs),
    /// Print the default configuration of an experiment as JSON.
    DefaultConfig {
        #[arg(value_parser = parse_experiment)]
        experiment: Experiment,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; missing fields take the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Output root directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script.
    #[arg(long)]
    gnuplot: bool,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    Experiment::ALL
        .into_iter()
        .find(|e| e.name() == s)
        .ok_or_else(|| format!("unknown experiment {s}"))
}

fn main() -> ExitCode {
    let (experiment, args) = match Cli::parse().command {
        Command::Waveforms(a) => (Experiment::Waveforms, a),
        Command::MaiDist(a) => (Experiment::MaiDist, a),
        Command::BepVsN(a) => (Experiment::BepVsN, a),
        Command::BepVsSnr(a) => (Experiment::BepVsSnr, a),
        Command::Demo2x2(a) => (Experiment::Demo2x2, a),
        Command::DefaultConfig { experiment } => {
            return match ExperimentConfig::defaults(experiment).to_json() {
                Ok(s) => {
                    println!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(CONFIG_ERROR)
                }
            };
        }
    };
    let mut cfg = match &args.config {
        Some(path) => match ExperimentConfig::from_file(Some(experiment), path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(CONFIG_ERROR);
            }
        },
        None => ExperimentConfig::defaults(experiment),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.gnuplot |= args.gnuplot;
    let out = experiments::resolve_out_dir(args.out.as_deref(), &cfg);
    match experiments::run(&cfg, &out) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {}", report.out_dir.display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(NUMERICAL_FAILURE)
            }
        }
        Err(e) if e.is_numerical() => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(NUMERICAL_FAILURE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}
