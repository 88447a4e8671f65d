//! Closed-form SIR, SINR, BEP and spectral efficiency of all-odd systems.

use dcma::analysis::{analytic_bep, sinr, sir_analytic, spectral_efficiency};
use dcma::experiments::snr_db_for_bep;
use dcma::SystemParams;

fn main() -> dcma::Result<()> {
    let params = SystemParams::new(10e9, 10e9, 10e-9, 4);
    println!("  N      SIR   BEP(no noise)  BEP(SNR 15 dB)  eta     SNR for 1e-3");
    for n in [2, 4, 8, 12] {
        let sir = sir_analytic(&params, n, 1.0)?;
        let snr = 10f64.powf(1.5);
        let need = snr_db_for_bep(&params, n, 1.0, 1e-3)?
            .map(|d| format!("{d:.2} dB"))
            .unwrap_or_else(|| "floor".into());
        println!(
            "{n:>3} {sir:>8.2} {:>14.3e} {:>15.3e} {:>6.3}  {need}  (SINR {:.2})",
            analytic_bep(&params, n, 1.0, f64::INFINITY)?,
            analytic_bep(&params, n, 1.0, snr)?,
            spectral_efficiency(n, &params),
            sinr(sir, snr)
        );
    }
    Ok(())
}
