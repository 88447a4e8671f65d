//! Monte Carlo bit error rate against the Gaussian approximation.

use dcma::analysis::bep_monte_carlo;
use dcma::coding::all_odd_code_set;
use dcma::{ChannelEnsembleParams, InterfererBits, SystemParams};

fn main() -> dcma::Result<()> {
    let params = SystemParams::new(10e9, 4e9, 1e-9, 4);
    let codes = all_odd_code_set(4)?;
    let ens = ChannelEnsembleParams::default().with_seed(11);
    let mc = bep_monte_carlo(&params, &codes, &ens, 1000, InterfererBits::AllOnes)?;
    println!(
        "{} errors in {} bits: BER {:.4} (95% CI {:.4}-{:.4}), Gaussian approximation {:.4}",
        mc.errors, mc.bits, mc.estimate, mc.ci_low, mc.ci_high, mc.analytic
    );
    Ok(())
}
