//! System parameters and the discrete frequency/time axes shared by every
//! other module.
//!
//! All spectra live on a uniform FFT grid of `n_fft` bins spanning `[0, fs)`.
//! Signals are analytic (one-sided): only bins inside the passband are ever
//! nonzero, so the real passband waveform is the real part of the inverse
//! transform and its envelope is the magnitude.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DcmaError, Result};

/// Minimum number of in-band bins a grid must resolve.
pub const MIN_IN_BAND_BINS: usize = 64;

/// Relative slack (in bins) used when deciding whether a bin centre lies on a
/// band edge.
const EDGE_EPS: f64 = 1e-9;

/// Physical and numerical configuration of a DCMA system (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Centre frequency, Hz.
    pub f0: f64,
    /// System bandwidth, Hz.
    pub delta_f: f64,
    /// Reference group delay, s.
    pub tau0: f64,
    /// Group delay swing, s.
    pub delta_tau: f64,
    /// Number of TX-RX pairs.
    pub n_users: usize,
    /// Sample rate, Hz.
    pub fs: f64,
    /// FFT length (power of two).
    pub n_fft: usize,
    /// AWGN standard deviation in un-normalized signal units.
    pub noise_sigma: f64,
}

impl SystemParams {
    /// Builds parameters with the default numerical configuration:
    /// `tau0 = delta_tau`, `fs = max(4 f0, 2 (f0 + delta_f / 2))` and the
    /// smallest power-of-two `n_fft` whose window spans 16 bit periods.
    pub fn new(f0: f64, delta_f: f64, delta_tau: f64, n_users: usize) -> Self {
        let fs = (4.0 * f0).max(2.0 * (f0 + delta_f / 2.0));
        let window = 16.0 * 2.0 * delta_tau;
        SystemParams {
            f0,
            delta_f,
            tau0: delta_tau,
            delta_tau,
            n_users,
            fs,
            n_fft: next_pow2((window * fs).ceil() as usize),
            noise_sigma: 0.0,
        }
    }

    pub fn with_noise_sigma(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_users(mut self, n_users: usize) -> Self {
        self.n_users = n_users;
        self
    }

    pub fn with_sample_rate(mut self, fs: f64) -> Self {
        self.fs = fs;
        self
    }

    pub fn with_n_fft(mut self, n_fft: usize) -> Self {
        self.n_fft = n_fft;
        self
    }

    /// Grows `n_fft` (keeping `fs`) until the time window is at least
    /// `duration` seconds. Never shrinks the window.
    pub fn with_window(mut self, duration: f64) -> Self {
        let needed = next_pow2((duration * self.fs).ceil().max(1.0) as usize);
        self.n_fft = self.n_fft.max(needed);
        self
    }

    /// Sets the noise level from a normalized SNR, `SNR = 4 delta_f^2 / sigma_N^2`.
    pub fn with_snr(mut self, snr: f64) -> Self {
        self.noise_sigma = if snr.is_infinite() {
            0.0
        } else {
            2.0 * self.delta_f / snr.sqrt()
        };
        self
    }

    /// Moves `fs` to the nearest rate (keeping `n_fft`) at which the band
    /// edges fall strictly between bins and the occupied bins are symmetric
    /// about `f0`. On such a grid the in-band bin count times the bin spacing
    /// equals `delta_f` exactly, so matched-cascade peaks and energies match
    /// their continuous-time values.
    pub fn aligned(mut self) -> Result<Self> {
        let n = self.n_fft as f64;
        let nyquist = 2.0 * (self.f0 + self.delta_f / 2.0);
        let fs_max = n / (4.0 * self.delta_tau);
        let ratio = self.f0 / self.delta_f;
        let target = (n * self.delta_f / self.fs).round() as i64;
        let lo = (n * self.delta_f / fs_max).ceil().max(1.0) as i64;
        let hi = (n * self.delta_f / nyquist).floor() as i64;
        if lo > hi {
            return Err(DcmaError::InvalidParams(
                "no sample rate satisfies both the Nyquist and window constraints".into(),
            ));
        }
        let admissible = |count: i64| -> bool {
            if count < lo || count > hi || (count as usize) < MIN_IN_BAND_BINS {
                return false;
            }
            let centre = ratio * count as f64;
            let frac = if count % 2 == 1 { centre } else { centre - 0.5 };
            (frac - frac.round()).abs() < 1e-9 * centre.max(1.0)
        };
        let span = (hi - lo).max(target - lo).max(hi - target);
        for d in 0..=span {
            for count in [target - d, target + d] {
                if admissible(count) {
                    self.fs = n * self.delta_f / count as f64;
                    return Ok(self);
                }
            }
        }
        Err(DcmaError::InvalidParams(format!(
            "f0/delta_f = {ratio} admits no symmetric bin alignment for n_fft = {}",
            self.n_fft
        )))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DcmaError::InvalidParams(msg));
        let finite = [
            self.f0,
            self.delta_f,
            self.tau0,
            self.delta_tau,
            self.fs,
            self.noise_sigma,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite field".into());
        }
        if self.delta_f <= 0.0 {
            return bad(format!("delta_f must be positive, got {}", self.delta_f));
        }
        if self.f0 - self.delta_f / 2.0 <= 0.0 {
            return bad(format!(
                "band [{}, {}] Hz crosses DC",
                self.f0 - self.delta_f / 2.0,
                self.f0 + self.delta_f / 2.0
            ));
        }
        if self.delta_tau <= 0.0 {
            return bad(format!("delta_tau must be positive, got {}", self.delta_tau));
        }
        if self.n_users == 0 {
            return bad("n_users must be at least 1".into());
        }
        if self.fs < 2.0 * (self.f0 + self.delta_f / 2.0) {
            return bad(format!(
                "fs = {} Hz does not resolve the upper band edge {} Hz",
                self.fs,
                self.f0 + self.delta_f / 2.0
            ));
        }
        if self.n_fft < 2 || !self.n_fft.is_power_of_two() {
            return bad(format!("n_fft = {} is not a power of two", self.n_fft));
        }
        if self.window() < 2.0 * self.bit_period() * (1.0 - 1e-12) {
            return bad(format!(
                "window {} s shorter than two bit periods ({} s)",
                self.window(),
                2.0 * self.bit_period()
            ));
        }
        if self.tau0 < self.delta_tau / 2.0 {
            return bad(format!(
                "tau0 = {} s below delta_tau/2 = {} s",
                self.tau0,
                self.delta_tau / 2.0
            ));
        }
        let max_delay = 2.0 * self.tau0 + self.delta_tau;
        if max_delay >= self.window() {
            return bad(format!(
                "cascaded delay {} s wraps around the {} s window",
                max_delay,
                self.window()
            ));
        }
        if self.noise_sigma < 0.0 {
            return bad("noise_sigma must be nonnegative".into());
        }
        Ok(())
    }

    /// Bit period `T_b = 2 delta_tau`.
    pub fn bit_period(&self) -> f64 {
        2.0 * self.delta_tau
    }

    /// Time window `n_fft / fs`.
    pub fn window(&self) -> f64 {
        self.n_fft as f64 / self.fs
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn bin_spacing(&self) -> f64 {
        self.fs / self.n_fft as f64
    }

    /// Delay swing-bandwidth product `delta_tau * delta_f`.
    pub fn dsbp(&self) -> f64 {
        self.delta_tau * self.delta_f
    }

    /// Peak of the matched cascade impulse response, `2 delta_f`; every
    /// normalized quantity is divided by it.
    pub fn peak_norm(&self) -> f64 {
        2.0 * self.delta_f
    }

    pub fn band_edges(&self) -> (f64, f64) {
        (self.f0 - self.delta_f / 2.0, self.f0 + self.delta_f / 2.0)
    }

    /// Normalized noise variance `sigma_N^2 / (4 delta_f^2)`.
    pub fn normalized_noise_variance(&self) -> f64 {
        let s = self.noise_sigma / self.peak_norm();
        s * s
    }

    /// Normalized SNR `4 delta_f^2 / sigma_N^2` (infinite when noiseless).
    pub fn snr(&self) -> f64 {
        let v = self.normalized_noise_variance();
        if v == 0.0 {
            f64::INFINITY
        } else {
            1.0 / v
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: SystemParams = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn next_pow2(n: usize) -> usize {
    n.max(2).next_power_of_two()
}

/// Uniform frequency grid in FFT ordering with its passband mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    frequencies: Vec<f64>,
    in_band: Vec<bool>,
    fs: f64,
    first_bin: usize,
    last_bin: usize,
}

impl FrequencyGrid {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn in_band(&self) -> &[bool] {
        &self.in_band
    }

    pub fn spacing(&self) -> f64 {
        self.fs / self.frequencies.len() as f64
    }

    pub fn sample_rate(&self) -> f64 {
        self.fs
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        self.frequencies[bin]
    }

    /// Nearest bin to `f` (wrapping modulo `fs`).
    pub fn index_of(&self, f: f64) -> usize {
        let n = self.len() as i64;
        ((f / self.spacing()).round() as i64).rem_euclid(n) as usize
    }

    /// Inclusive range of passband bins.
    pub fn band_bins(&self) -> std::ops::RangeInclusive<usize> {
        self.first_bin..=self.last_bin
    }

    pub fn in_band_count(&self) -> usize {
        self.last_bin - self.first_bin + 1
    }

    /// Bandwidth actually occupied on the grid, `in_band_count * spacing`.
    pub fn occupied_bandwidth(&self) -> f64 {
        self.in_band_count() as f64 * self.spacing()
    }

    /// Sample instants of the time window, `n / fs`.
    pub fn times(&self) -> Vec<f64> {
        let dt = 1.0 / self.fs;
        (0..self.len()).map(|n| n as f64 * dt).collect()
    }

    pub fn same_axes(&self, other: &FrequencyGrid) -> bool {
        self.len() == other.len() && self.fs == other.fs
    }
}

/// Builds the FFT frequency grid and passband mask for `params`.
///
/// Bins whose centre lies on a band edge are included.
pub fn make_grid(params: &SystemParams) -> Result<FrequencyGrid> {
    params.validate()?;
    let n = params.n_fft;
    let df = params.bin_spacing();
    let (lo, hi) = params.band_edges();
    let first_bin = (lo / df - EDGE_EPS).ceil() as usize;
    let last_bin = (hi / df + EDGE_EPS).floor() as usize;
    if last_bin < first_bin || last_bin - first_bin + 1 < MIN_IN_BAND_BINS {
        return Err(DcmaError::InvalidParams(format!(
            "passband resolves {} bins, need at least {MIN_IN_BAND_BINS}",
            (last_bin + 1).saturating_sub(first_bin)
        )));
    }
    let frequencies: Vec<f64> = (0..n).map(|k| k as f64 * df).collect();
    let in_band = (0..n).map(|k| k >= first_bin && k <= last_bin).collect();
    Ok(FrequencyGrid {
        frequencies,
        in_band,
        fs: params.fs,
        first_bin,
        last_bin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xband() -> SystemParams {
        SystemParams {
            f0: 10e9,
            delta_f: 4e9,
            tau0: 1e-9,
            delta_tau: 1e-9,
            n_users: 2,
            fs: 32e9,
            n_fft: 4096,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn xband_grid_spacing_and_edges() {
        let g = make_grid(&xband()).unwrap();
        assert_eq!(g.len(), 4096);
        assert!((g.spacing() - 7.8125e6).abs() < 1e-6);
        let band = g.band_bins();
        assert_eq!(g.frequency(*band.start()), 8e9);
        assert_eq!(g.frequency(*band.end()), 12e9);
        assert_eq!(g.in_band().iter().filter(|b| **b).count(), 513);
    }

    #[test]
    fn wide_band_grid() {
        let p = SystemParams {
            delta_f: 10e9,
            delta_tau: 10e-9,
            tau0: 10e-9,
            n_fft: 8192,
            ..xband()
        };
        let g = make_grid(&p).unwrap();
        let b = g.band_bins();
        assert!((g.frequency(*b.start()) - 5e9).abs() <= g.spacing() / 2.0);
        assert!((g.frequency(*b.end()) - 15e9).abs() <= g.spacing() / 2.0);
    }

    #[test]
    fn band_crossing_dc_is_rejected() {
        let p = SystemParams { f0: 1e9, ..xband() };
        assert!(matches!(make_grid(&p), Err(DcmaError::InvalidParams(_))));
    }

    #[test]
    fn invariant_violations() {
        let base = xband();
        for p in [
            SystemParams { fs: 20e9, ..base },
            SystemParams { n_fft: 4000, ..base },
            SystemParams { n_fft: 64, ..base },
            SystemParams { tau0: 0.4e-9, ..base },
            SystemParams { delta_f: 0.0, ..base },
            SystemParams { n_users: 0, ..base },
            SystemParams { noise_sigma: -1.0, ..base },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn too_few_in_band_bins() {
        let p = SystemParams {
            delta_f: 0.1e9,
            n_fft: 1024,
            fs: 25e9,
            delta_tau: 1e-9,
            ..xband()
        };
        assert!(make_grid(&p).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = make_grid(&xband()).unwrap();
        for k in 0..g.len() {
            assert_eq!(g.index_of(g.frequency(k)), k);
        }
    }

    #[test]
    fn band_width_within_one_bin() {
        for p in [xband(), SystemParams::new(10e9, 10e9, 10e-9, 4).aligned().unwrap()] {
            let g = make_grid(&p).unwrap();
            assert!((g.occupied_bandwidth() - p.delta_f).abs() <= g.spacing() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn aligned_grid_is_exact_and_symmetric() {
        let p = SystemParams::new(10e9, 10e9, 10e-9, 4).aligned().unwrap();
        let g = make_grid(&p).unwrap();
        assert!((g.occupied_bandwidth() / p.delta_f - 1.0).abs() < 1e-12);
        let b = g.band_bins();
        let centre = 0.5 * (g.frequency(*b.start()) + g.frequency(*b.end()));
        assert!((centre - p.f0).abs() < 1e-3);
        assert!(p.fs >= 2.0 * (p.f0 + p.delta_f / 2.0));
    }

    #[test]
    fn aligned_rejects_incommensurate_ratio() {
        // Lower edge at 2 delta_f always lands on a bin.
        assert!(xband().aligned().is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let p = xband();
        let s = p.to_json().unwrap();
        assert_eq!(SystemParams::from_json_str(&s).unwrap(), p);
        let bad = s.replace("\"fs\"", "\"sample_rate\"");
        assert!(SystemParams::from_json_str(&bad).is_err());
    }

    #[test]
    fn default_window_covers_sixteen_bits() {
        let p = SystemParams::new(10e9, 4e9, 1e-9, 2);
        p.validate().unwrap();
        assert!(p.window() >= 16.0 * p.bit_period());
        assert_eq!(p.tau0, p.delta_tau);
    }

    #[test]
    fn snr_round_trip() {
        let p = xband().with_snr(100.0);
        assert!((p.snr() - 100.0).abs() < 1e-9);
        assert!(xband().snr().is_infinite());
    }
}
