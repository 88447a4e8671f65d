//! End-to-end link simulation: bit sources, OOK and DOOK pulse trains,
//! superposition over the channel, noise, decoding and threshold detection.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::coding::CodeSet;
use crate::error::{DcmaError, Result};
use crate::phaser::{self, PhaserBank, Spectrum, Waveform};
use crate::sysconfig::{FrequencyGrid, SystemParams};

/// OOK bit sequence at bit period `T_b = 2 delta_tau`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<bool>,
}

impl BitStream {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(DcmaError::Empty("bit stream"));
        }
        Ok(BitStream { bits })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(DcmaError::InvalidArgument(format!("bit value {b}")));
        }
        Self::new(bits.iter().map(|&b| b == 1).collect())
    }

    pub fn ones(n: usize) -> Result<Self> {
        Self::new(vec![true; n])
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![false; n])
    }

    /// Equiprobable i.i.d. bits.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| rng.random::<bool>()).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Instants `ℓ T_b + offset` of the 1-bits.
    pub fn pulse_instants(&self, bit_period: f64, offset: f64) -> Vec<f64> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(l, _)| l as f64 * bit_period + offset)
            .collect()
    }
}

/// Data carried by the interfering transmitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfererBits {
    /// Equiprobable random bits.
    #[default]
    Random,
    /// Every interferer sends 1 in every slot (worst case).
    AllOnes,
}

/// Bit streams for every user: random data for receiver `rx`'s own
/// transmitter, `mode` for the others.
pub fn draw_bits<R: Rng + ?Sized>(
    n_users: usize,
    rx: usize,
    n_bits: usize,
    mode: InterfererBits,
    rng: &mut R,
) -> Result<Vec<BitStream>> {
    (0..n_users)
        .map(|k| {
            if k == rx || mode == InterfererBits::Random {
                BitStream::random(n_bits, rng)
            } else {
                BitStream::ones(n_bits)
            }
        })
        .collect()
}

/// Spectrum of Dirac pulses of amplitude `g` at `instants`, on every grid bin.
pub fn pulse_train_spectrum(instants: &[f64], g: f64, grid: &FrequencyGrid) -> Spectrum {
    let values = grid
        .frequencies()
        .iter()
        .map(|&f| {
            instants
                .iter()
                .map(|&t| Complex64::from_polar(g, -2.0 * PI * f * t))
                .sum()
        })
        .collect();
    Spectrum {
        values,
        bin_spacing: grid.spacing(),
    }
}

/// `Σ_ℓ d_ℓ g e^{-j2πf(ℓ T_b + t_tx)}` over the whole grid.
///
/// Fails with `WindowOverflow` when the last pulse plus the largest cascaded
/// delay `2 tau0 + delta_tau` does not fit in the window.
pub fn ook_dirac_train(
    bits: &BitStream,
    g: f64,
    t_tx: f64,
    params: &SystemParams,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    if !(g > 0.0) {
        return Err(DcmaError::InvalidArgument(format!("pulse amplitude {g}")));
    }
    let needed = (bits.len() - 1) as f64 * params.bit_period()
        + t_tx
        + 2.0 * params.tau0
        + params.delta_tau;
    if needed > params.window() {
        return Err(DcmaError::WindowOverflow {
            needed,
            window: params.window(),
        });
    }
    Ok(pulse_train_spectrum(
        &bits.pulse_instants(params.bit_period(), t_tx),
        g,
        grid,
    ))
}

/// Differential OOK: one pulse at every bit boundary `ℓ T_b` where the NRZ
/// level changes, starting from level 0.
pub fn dook_modulate(nrz_bits: &[bool], bit_period: f64, xor_delay: f64) -> Result<Vec<f64>> {
    if !(bit_period > 0.0) {
        return Err(DcmaError::InvalidArgument(format!("bit period {bit_period}")));
    }
    if !(xor_delay > 0.0 && xor_delay < bit_period) {
        return Err(DcmaError::InvalidArgument(format!(
            "xor delay {xor_delay} s not in (0, {bit_period})"
        )));
    }
    let mut level = false;
    let mut out = Vec::new();
    for (l, &b) in nrz_bits.iter().enumerate() {
        if b != level {
            out.push(l as f64 * bit_period);
            level = b;
        }
    }
    Ok(out)
}

/// Decision statistic used by [`detect_bits_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Real part of the analytic signal: the passband amplitude at the peak.
    #[default]
    InPhase,
    /// Magnitude of the analytic signal.
    Envelope,
}

impl Statistic {
    pub fn apply(self, z: Complex64) -> f64 {
        match self {
            Statistic::InPhase => z.re,
            Statistic::Envelope => z.norm(),
        }
    }
}

/// Decoded output of one receiver. Waveforms are normalized by `2 delta_f`;
/// spectra are not.
#[derive(Debug, Clone)]
pub struct DecodedLink {
    pub z: Waveform,
    pub s_tilde: Waveform,
    pub x_mai: Waveform,
    pub noise: Waveform,
    pub desired_spectrum: Spectrum,
    pub mai_spectrum: Spectrum,
    pub peak_norm: f64,
}

impl DecodedLink {
    pub fn window(&self) -> f64 {
        self.z.len() as f64 * self.z.sample_period
    }

    /// Normalized decoded value at `t`: signal and MAI by band-limited
    /// interpolation, noise from the nearest sample.
    pub fn value_at(&self, t: f64) -> Result<Complex64> {
        let n = self.z.index_at(t).ok_or(DcmaError::Domain {
            value: t,
            domain: format!("[0, {})", self.window()),
        })?;
        let clean = (self.desired_spectrum.evaluate_at(t) + self.mai_spectrum.evaluate_at(t))
            / self.peak_norm;
        Ok(clean + self.noise.samples[n])
    }

    /// Writes `time_s,z_abs,s_abs,x_abs,z_re,s_re,x_re` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "z_abs", "s_abs", "x_abs", "z_re", "s_re", "x_re"])?;
        for n in 0..self.z.len() {
            let (z, s, x) = (self.z.samples[n], self.s_tilde.samples[n], self.x_mai.samples[n]);
            w.serialize((self.z.time(n), z.norm(), s.norm(), x.norm(), z.re, s.re, x.re))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Instants `ℓ T_b + t_TXi + t_ii + 2 tau0` at which receiver `rx`'s own
/// pulses peak.
pub fn desired_peak_instants(
    params: &SystemParams,
    chan: &ChannelRealization,
    rx: usize,
    n_bits: usize,
) -> Vec<f64> {
    let base = chan.arrival_offset(rx, rx) + 2.0 * params.tau0;
    (0..n_bits)
        .map(|l| l as f64 * params.bit_period() + base)
        .collect()
}

fn check_dimensions(n: usize, chan: &ChannelRealization, bits: &[BitStream], rx: usize) -> Result<()> {
    if chan.n_users() != n {
        return Err(DcmaError::DimensionMismatch {
            what: "channel users",
            expected: n,
            got: chan.n_users(),
        });
    }
    if bits.len() != n {
        return Err(DcmaError::DimensionMismatch {
            what: "bit streams",
            expected: n,
            got: bits.len(),
        });
    }
    if rx >= n {
        return Err(DcmaError::InvalidArgument(format!(
            "receiver {rx} out of range for {n} users"
        )));
    }
    Ok(())
}

fn check_window(
    params: &SystemParams,
    chan: &ChannelRealization,
    bits: &[BitStream],
    rx: usize,
) -> Result<()> {
    let needed = bits
        .iter()
        .enumerate()
        .map(|(k, b)| (b.len() - 1) as f64 * params.bit_period() + chan.arrival_offset(rx, k))
        .fold(0.0, f64::max)
        + 2.0 * params.tau0
        + params.delta_tau;
    if needed > params.window() {
        return Err(DcmaError::WindowOverflow {
            needed,
            window: params.window(),
        });
    }
    Ok(())
}

/// Adds transmitter `tx`'s decoded pulse train at receiver `rx` to the
/// passband slice `out`.
fn accumulate_decoded(
    bank: &PhaserBank,
    chan: &ChannelRealization,
    bits: &BitStream,
    rx: usize,
    tx: usize,
    out: &mut [Complex64],
) {
    let params = bank.params();
    let grid = bank.grid();
    let first = bank.first_bin();
    let offset = chan.arrival_offset(rx, tx);
    let alpha = chan.alpha[rx][tx];
    let tb = params.bit_period();
    for (b, slot) in out.iter_mut().enumerate() {
        let w = -2.0 * PI * grid.frequency(first + b);
        let mut phasor = Complex64::from_polar(alpha, w * offset);
        let step = Complex64::from_polar(1.0, w * tb);
        let mut train = Complex64::new(0.0, 0.0);
        for &bit in bits.bits() {
            if bit {
                train += phasor;
            }
            phasor *= step;
        }
        *slot += train * bank.cascaded_at(rx, tx, b);
    }
}

fn embed(bank: &PhaserBank, band: &[Complex64]) -> Spectrum {
    let mut s = Spectrum::zeros(bank.grid());
    let first = bank.first_bin();
    s.values[first..first + band.len()].copy_from_slice(band);
    s
}

/// Decoded desired and MAI spectra at receiver `rx`, without noise.
pub fn decoded_spectra(
    bank: &PhaserBank,
    chan: &ChannelRealization,
    bits: &[BitStream],
    rx: usize,
) -> Result<(Spectrum, Spectrum)> {
    let params = bank.params();
    check_dimensions(bank.n_users(), chan, bits, rx)?;
    check_window(params, chan, bits, rx)?;
    let mut desired = vec![Complex64::new(0.0, 0.0); bank.band_len()];
    let mut mai = desired.clone();
    accumulate_decoded(bank, chan, &bits[rx], rx, rx, &mut desired);
    for k in (0..bank.n_users()).filter(|&k| k != rx) {
        accumulate_decoded(bank, chan, &bits[k], rx, k, &mut mai);
    }
    Ok((embed(bank, &desired), embed(bank, &mai)))
}

/// Decoded signal of receiver `rx`: desired component through the matched
/// cascade (gain `α_ii = 1`, delay `t_TXi + t_ii`), MAI from every other
/// transmitter (gain `α_ik`, delay `t_TXk + t_ik`) and real white Gaussian
/// noise of standard deviation `noise_sigma` per sample. Noise is drawn in
/// un-normalized units and normalized with the signal.
pub fn simulate_link_with<R: Rng + ?Sized>(
    bank: &PhaserBank,
    chan: &ChannelRealization,
    bits: &[BitStream],
    rx: usize,
    rng: &mut R,
) -> Result<DecodedLink> {
    let params = bank.params();
    let (desired_spectrum, mai_spectrum) = decoded_spectra(bank, chan, bits, rx)?;
    let s_tilde = phaser::normalize(&phaser::impulse_response(&desired_spectrum), params);
    let x_mai = phaser::normalize(&phaser::impulse_response(&mai_spectrum), params);
    let mut noise = Waveform::zeros(s_tilde.len(), s_tilde.sample_period);
    if params.noise_sigma > 0.0 {
        let dist = Normal::new(0.0, params.noise_sigma)
            .map_err(|e| DcmaError::InvalidParams(e.to_string()))?;
        let k = 1.0 / params.peak_norm();
        for v in noise.samples.iter_mut() {
            *v = Complex64::new(dist.sample(rng) * k, 0.0);
        }
    }
    let z = s_tilde.add(&x_mai)?.add(&noise)?;
    Ok(DecodedLink {
        z,
        s_tilde,
        x_mai,
        noise,
        desired_spectrum,
        mai_spectrum,
        peak_norm: params.peak_norm(),
    })
}

/// [`simulate_link_with`] for a freshly built phaser bank.
pub fn simulate_link<R: Rng + ?Sized>(
    params: &SystemParams,
    codes: &CodeSet,
    chan: &ChannelRealization,
    bits: &[BitStream],
    rx: usize,
    rng: &mut R,
) -> Result<DecodedLink> {
    if codes.len() != params.n_users {
        return Err(DcmaError::DimensionMismatch {
            what: "codes",
            expected: params.n_users,
            got: codes.len(),
        });
    }
    let bank = PhaserBank::new(params, codes)?;
    simulate_link_with(&bank, chan, bits, rx, rng)
}

/// Threshold detection with the in-phase statistic: bit `ℓ` is 1 iff the
/// decoded value at `timing[ℓ]` exceeds `threshold`.
pub fn detect_bits(link: &DecodedLink, threshold: f64, timing: &[f64]) -> Result<Vec<bool>> {
    detect_bits_with(link, threshold, timing, Statistic::InPhase)
}

pub fn detect_bits_with(
    link: &DecodedLink,
    threshold: f64,
    timing: &[f64],
    statistic: Statistic,
) -> Result<Vec<bool>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(DcmaError::InvalidArgument(format!(
            "threshold {threshold} not in (0, 1)"
        )));
    }
    timing
        .iter()
        .map(|&t| Ok(statistic.apply(link.value_at(t)?) > threshold))
        .collect()
}
