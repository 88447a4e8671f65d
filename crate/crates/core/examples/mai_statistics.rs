//! Worst-case MAI statistics for a 2x2 system, the normal fit and the
//! chi-square normality test.

use dcma::analysis::{mai_stats, normality_test, sir_analytic, sir_statistical, GOF_BINS};
use dcma::{ChannelEnsembleParams, CodeSet, MaiSampler, SystemParams};

fn main() -> dcma::Result<()> {
    let params = SystemParams::new(10e9, 10e9, 10e-9, 2).aligned()?;
    let codes = CodeSet::new(&[3, -3])?;
    let ens = ChannelEnsembleParams::default().with_seed(1);
    let sampler = MaiSampler::new(&params, &codes, &ens)?;
    let pooled = sampler.pooled_samples(100)?;
    let stats = mai_stats(&pooled.concat(), 40)?;
    println!(
        "pooled samples {}, mu_hat {:.2e}, sigma_sq_hat {:.5}",
        stats.n_samples, stats.mu_hat, stats.sigma_sq_hat
    );
    println!(
        "statistical SIR {:.1}, analytic SIR {:.1}",
        sir_statistical(&stats)?,
        sir_analytic(&params, 2, ens.mean_alpha_sq())?
    );
    let gof = normality_test(&sampler.independent_samples(0, 2000)?, GOF_BINS, &codes)?;
    println!("chi-square {:.1} on {} dof, p = {:.3}, passed = {}", gof.chi_sq, gof.dof, gof.p_value, gof.passed);
    Ok(())
}
