//! Chebyshev dispersion codes: delay profiles, cascaded swings and the
//! all-odd code family.

use dcma::coding::{all_odd_code_set, cascaded_group_delay, delay_swing, group_delay};
use dcma::{ChebyshevCode, Side, SystemParams};

fn main() -> dcma::Result<()> {
    let params = SystemParams::new(10e9, 4e9, 4e-9, 4);
    let (f_lo, f_hi) = params.band_edges();
    println!("band {:.2}-{:.2} GHz, delta_tau {} ns", f_lo / 1e9, f_hi / 1e9, params.delta_tau * 1e9);

    for m in [1, 2, 3, -3] {
        let code = ChebyshevCode::new(m)?;
        let samples: Vec<String> = (0..=4)
            .map(|j| {
                let f = f_lo + (j as f64 / 4.0) * params.delta_f;
                let d = group_delay(code, Side::Tx, &params, f).unwrap();
                format!("{:+.3}", (d - params.tau0) / params.delta_tau)
            })
            .collect();
        println!("TX delay offset / delta_tau for m = {m:+}: {}", samples.join(" "));
    }

    let (a, b) = (ChebyshevCode::new(3)?, ChebyshevCode::new(-3)?);
    println!(
        "cascade RX(3) <- TX(3) at f0: {:.3} ns (2 tau0 = {:.3} ns)",
        cascaded_group_delay(a, a, &params, params.f0)? * 1e9,
        2e9 * params.tau0
    );
    println!("swing RX(3) <- TX(-3): {:.3} ns", delay_swing(a, b, &params) * 1e9);
    println!("all-odd set for 6 users: {:?}", all_odd_code_set(6)?.orders());
    Ok(())
}
