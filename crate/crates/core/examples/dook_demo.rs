//! Two-user differential OOK demonstration with codes [1, -1].

use dcma::experiments::DemoTraces;
use dcma::{Experiment, ExperimentConfig};

fn main() -> dcma::Result<()> {
    let cfg = ExperimentConfig::defaults(Experiment::Demo2x2);
    let demo = DemoTraces::simulate(&cfg)?;
    println!("pulses per user: {:?}", demo.instants.iter().map(Vec::len).collect::<Vec<_>>());
    println!("decoded desired peak: {:.6}", demo.desired_peak_min);
    println!("MAI peak envelope power: {:.4}", demo.mai_pep);
    println!("peak-to-MAI-PEP ratio: {:.2}", demo.peak_to_mai_ratio());
    Ok(())
}
