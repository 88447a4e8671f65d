//! Runs a named experiment from an optional JSON config into a directory.
//!
//! `cargo run --release --example experiment_runner -- bep-vs-snr [config.json] [out]`

use std::path::PathBuf;

use dcma::experiments::{run, Experiment, ExperimentConfig};

fn main() -> dcma::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "bep-vs-snr".into());
    let experiment = Experiment::ALL
        .into_iter()
        .find(|e| e.name() == name)
        .ok_or_else(|| dcma::DcmaError::InvalidArgument(format!("unknown experiment {name}")))?;
    let cfg = match args.next() {
        Some(path) => ExperimentConfig::from_file(Some(experiment), path)?,
        None => ExperimentConfig::defaults(experiment),
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("dcma-example"));
    let report = run(&cfg, &out)?;
    for c in &report.checks {
        println!("[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    for p in &report.outputs {
        println!("wrote {}", p.display());
    }
    Ok(())
}
