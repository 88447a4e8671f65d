//! End-to-end OOK link: random channel, random data, decoding at receiver 0
//! and threshold detection at the desired peak instants.

use dcma::channel::{draw_realization, trial_rng};
use dcma::link::{desired_peak_instants, detect_bits, draw_bits, simulate_link};
use dcma::{ChannelEnsembleParams, CodeSet, InterfererBits, SystemParams};

fn main() -> dcma::Result<()> {
    let n_bits = 12;
    let params = SystemParams::new(10e9, 10e9, 2e-9, 2)
        .with_window(40.0 * 2e-9)
        .with_snr(1e3);
    let codes = CodeSet::new(&[3, -3])?;
    let ens = ChannelEnsembleParams::default().with_seed(3);
    let mut rng = trial_rng(ens.seed, 0);
    let chan = draw_realization(&params, &ens, &mut rng)?;
    let bits = draw_bits(2, 0, n_bits, InterfererBits::Random, &mut rng)?;
    let link = simulate_link(&params, &codes, &chan, &bits, 0, &mut rng)?;
    let timing = desired_peak_instants(&params, &chan, 0, n_bits);
    let detected = detect_bits(&link, 0.5, &timing)?;
    let errors = detected.iter().zip(bits[0].bits()).filter(|(a, b)| a != b).count();
    let show = |b: &[bool]| b.iter().map(|&x| if x { '1' } else { '0' }).collect::<String>();
    println!("sent     {}", show(bits[0].bits()));
    println!("detected {}", show(&detected));
    println!("bit errors: {errors}");
    Ok(())
}
