//! Phaser transfer functions on an aligned FFT grid: the matched cascade
//! compresses to a sinc of peak 2 delta_f and energy 2 delta_f; an unmatched
//! cascade spreads over the delay swing.

use dcma::phaser::{impulse_response, normalize};
use dcma::{CodeSet, PhaserBank, SystemParams};

fn main() -> dcma::Result<()> {
    let params = SystemParams::new(10e9, 10e9, 2e-9, 2).aligned()?;
    let bank = PhaserBank::new(&params, &CodeSet::new(&[3, -3])?)?;

    let matched = bank.cascaded(0, 0);
    let h = impulse_response(&matched);
    println!(
        "matched: peak at 2 tau0 = {:.12} x 2 delta_f, energy = {:.12} x 2 delta_f",
        matched.evaluate_at(2.0 * params.tau0).norm() / params.peak_norm(),
        h.energy() / params.peak_norm()
    );

    let unmatched = normalize(&impulse_response(&bank.cascaded(0, 1)), &params);
    let (idx, peak) = unmatched.peak_envelope();
    println!(
        "unmatched: normalized peak {peak:.4} at {:.3} ns, energy {:.12} x 2 delta_f",
        unmatched.time(idx) * 1e9,
        impulse_response(&bank.cascaded(0, 1)).energy() / params.peak_norm()
    );

    let mut csv = Vec::new();
    unmatched.write_csv(&mut csv)?;
    println!("waveform CSV header: {}", String::from_utf8_lossy(&csv).lines().next().unwrap_or(""));
    Ok(())
}
