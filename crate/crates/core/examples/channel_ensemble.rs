//! Line-of-sight channels: Friis amplitude and a seeded random ensemble.

use dcma::channel::{draw_realization, friis_amplitude, trial_rng, SPEED_OF_LIGHT};
use dcma::{ChannelEnsembleParams, SystemParams};

fn main() -> dcma::Result<()> {
    let t = 1.0 / SPEED_OF_LIGHT;
    println!("Friis amplitude at 1 m, 10 GHz, unit gains: {:.4e}", friis_amplitude(1.0, 1.0, 10e9, t)?);

    let params = SystemParams::new(10e9, 10e9, 1e-9, 3);
    let ens = ChannelEnsembleParams::default().with_gains(0.06, 0.14).with_seed(7);
    let chan = draw_realization(&params, &ens, &mut trial_rng(ens.seed, 0))?;
    for rx in 0..3 {
        let row: Vec<String> = (0..3)
            .map(|tx| format!("a={:.3} t={:.2}ns", chan.alpha[rx][tx], chan.arrival_offset(rx, tx) * 1e9))
            .collect();
        println!("rx {rx}: {}", row.join(" | "));
    }
    println!("{}", chan.to_json()?);
    Ok(())
}
