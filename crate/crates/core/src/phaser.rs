//! Frequency-domain phaser bank.
//!
//! Spectra hold samples of the continuous Fourier transform on the FFT grid.
//! [`impulse_response`] returns the analytic signal: for a one-sided spectrum
//! `H(f)` it computes `2 ∫ H(f) e^{j2πft} df` as a Riemann sum, so the real
//! part is the real passband waveform and the magnitude is its envelope.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::coding::{self, ChebyshevCode, CodeSet, Side};
use crate::error::{DcmaError, Result};
use crate::sysconfig::{FrequencyGrid, SystemParams};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Complex spectrum aligned to a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<Complex64>,
    pub bin_spacing: f64,
}

/// Complex analytic time samples over the grid window.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub sample_period: f64,
}

impl Spectrum {
    pub fn zeros(grid: &FrequencyGrid) -> Self {
        Spectrum {
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            bin_spacing: grid.spacing(),
        }
    }

    /// Unit value on every bin of the grid (an ideal Dirac at `t = 0`).
    pub fn ones(grid: &FrequencyGrid) -> Self {
        Spectrum {
            values: vec![Complex64::new(1.0, 0.0); grid.len()],
            bin_spacing: grid.spacing(),
        }
    }

    /// Unit value on the passband, zero elsewhere.
    pub fn band_rect(grid: &FrequencyGrid) -> Self {
        let values = grid
            .in_band()
            .iter()
            .map(|&b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0))
            .collect();
        Spectrum {
            values,
            bin_spacing: grid.spacing(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_same_grid(&self, other: &Spectrum) -> Result<()> {
        if self.len() != other.len() || self.bin_spacing != other.bin_spacing {
            return Err(DcmaError::GridMismatch(format!(
                "{} bins @ {} Hz vs {} bins @ {} Hz",
                self.len(),
                self.bin_spacing,
                other.len(),
                other.bin_spacing
            )));
        }
        Ok(())
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= k);
        self
    }

    /// Adds `other` in place.
    pub fn accumulate(&mut self, other: &Spectrum) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    /// Analytic waveform value at an arbitrary instant `t`, by direct
    /// summation over the nonzero bins (band-limited interpolation of
    /// [`impulse_response`]).
    pub fn evaluate_at(&self, t: f64) -> Complex64 {
        let w = 2.0 * PI * self.bin_spacing * t;
        let sum: Complex64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
            .map(|(k, v)| v * Complex64::from_polar(1.0, w * k as f64))
            .sum();
        sum * (2.0 * self.bin_spacing)
    }

    /// Group delay `-dφ/dω` from adjacent-bin phase differences, reported at
    /// bin midpoints over the nonzero run of bins: `(frequency, delay)`.
    pub fn group_delay_profile(&self) -> Vec<(f64, f64)> {
        self.values
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].norm() > 0.0 && w[1].norm() > 0.0)
            .map(|(k, w)| {
                let dphi = (w[1] * w[0].conj()).arg();
                (
                    (k as f64 + 0.5) * self.bin_spacing,
                    -dphi / (2.0 * PI * self.bin_spacing),
                )
            })
            .collect()
    }

    /// Writes `index,frequency,real,imag,magnitude` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "frequency_hz", "real", "imag", "magnitude"])?;
        for (k, v) in self.values.iter().enumerate() {
            w.serialize((k, k as f64 * self.bin_spacing, v.re, v.im, v.norm()))?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Waveform {
    pub fn zeros(len: usize, sample_period: f64) -> Self {
        Waveform {
            samples: vec![Complex64::new(0.0, 0.0); len],
            sample_period,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.sample_period
    }

    /// Nearest sample index to `t`, if `t` lies inside the window.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let n = (t / self.sample_period).round();
        (n >= 0.0 && (n as usize) < self.len() && t.is_finite()).then_some(n as usize)
    }

    /// Real passband waveform.
    pub fn real(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.re).collect()
    }

    pub fn envelope(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.norm()).collect()
    }

    pub fn peak_envelope(&self) -> (usize, f64) {
        self.samples
            .iter()
            .map(|c| c.norm())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (n, v)| if v > acc.1 { (n, v) } else { acc })
    }

    /// Energy of the real waveform, `Σ Re(w)^2 t_s`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.re * c.re).sum::<f64>() * self.sample_period
    }

    /// Energy of the analytic signal, `Σ |w|^2 t_s` (twice [`Self::energy`]).
    pub fn analytic_energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.sample_period
    }

    pub fn add(&self, other: &Waveform) -> Result<Waveform> {
        if self.len() != other.len() || self.sample_period != other.sample_period {
            return Err(DcmaError::GridMismatch("waveform lengths differ".into()));
        }
        Ok(Waveform {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            sample_period: self.sample_period,
        })
    }

    /// Writes `index,time,real,imag,magnitude` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "time_s", "real", "imag", "magnitude"])?;
        for (n, v) in self.samples.iter().enumerate() {
            w.serialize((n, self.time(n), v.re, v.im, v.norm()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn phasor(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Encoding (TX) or decoding (RX) phaser transfer function on the grid:
/// unit magnitude in band with phase `-ω tau0 ± φ(ω)`, exactly zero outside.
pub fn transfer(
    code: ChebyshevCode,
    side: Side,
    params: &SystemParams,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    let mut spec = Spectrum::zeros(grid);
    for k in grid.band_bins() {
        let f = grid.frequency(k);
        let phi = coding::phase(code, side, params, f)?;
        spec.values[k] = phasor(-2.0 * PI * f * params.tau0 + phi);
    }
    Ok(spec)
}

/// `H_TX(tx_code) · H_RX(rx_code)`: the cascade seen by receiver `rx_code`
/// from transmitter `tx_code`.
pub fn cascaded_transfer(
    rx_code: ChebyshevCode,
    tx_code: ChebyshevCode,
    params: &SystemParams,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    apply(
        &transfer(tx_code, Side::Tx, params, grid)?,
        &transfer(rx_code, Side::Rx, params, grid)?,
    )
}

/// Pointwise product of two spectra on the same grid.
pub fn apply(spec_in: &Spectrum, transfer: &Spectrum) -> Result<Spectrum> {
    spec_in.check_same_grid(transfer)?;
    Ok(Spectrum {
        values: spec_in
            .values
            .iter()
            .zip(&transfer.values)
            .map(|(a, b)| a * b)
            .collect(),
        bin_spacing: spec_in.bin_spacing,
    })
}

/// Inverse transform to the analytic time signal, scaled so that a matched
/// cascade peaks at `2 delta_f` (the continuous-time value) on a grid whose
/// occupied bandwidth equals `delta_f`.
pub fn impulse_response(spec: &Spectrum) -> Waveform {
    let n = spec.len();
    let mut buf = spec.values.clone();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut buf));
    let scale = 2.0 * spec.bin_spacing;
    buf.iter_mut().for_each(|v| *v *= scale);
    Waveform {
        samples: buf,
        sample_period: 1.0 / (spec.bin_spacing * n as f64),
    }
}

/// Divides by the matched-cascade peak `2 delta_f`.
pub fn normalize(w: &Waveform, params: &SystemParams) -> Waveform {
    let k = 1.0 / params.peak_norm();
    Waveform {
        samples: w.samples.iter().map(|v| v * k).collect(),
        sample_period: w.sample_period,
    }
}

/// Precomputed in-band phaser responses for a code set.
///
/// Stores `e^{jφ_m(ω)}` per code and `e^{-jω 2 tau0}` on the passband bins
/// only; cascades are formed on demand.
#[derive(Debug, Clone)]
pub struct PhaserBank {
    params: SystemParams,
    grid: FrequencyGrid,
    codes: CodeSet,
    dispersive: Vec<Vec<Complex64>>,
    round_trip: Vec<Complex64>,
}

impl PhaserBank {
    pub fn new(params: &SystemParams, codes: &CodeSet) -> Result<Self> {
        let grid = crate::sysconfig::make_grid(params)?;
        let bins: Vec<usize> = grid.band_bins().collect();
        let dispersive = codes
            .codes()
            .iter()
            .map(|&c| {
                bins.iter()
                    .map(|&k| Ok(phasor(coding::phase(c, Side::Tx, params, grid.frequency(k))?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let round_trip = bins
            .iter()
            .map(|&k| phasor(-2.0 * PI * grid.frequency(k) * 2.0 * params.tau0))
            .collect();
        Ok(PhaserBank {
            params: *params,
            grid,
            codes: codes.clone(),
            dispersive,
            round_trip,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn codes(&self) -> &CodeSet {
        &self.codes
    }

    pub fn n_users(&self) -> usize {
        self.codes.len()
    }

    pub fn first_bin(&self) -> usize {
        *self.grid.band_bins().start()
    }

    pub fn band_len(&self) -> usize {
        self.round_trip.len()
    }

    /// Cascade `H_ik` at passband bin offset `b` (bin `first_bin() + b`).
    #[inline]
    pub fn cascaded_at(&self, rx: usize, tx: usize, b: usize) -> Complex64 {
        self.round_trip[b] * self.dispersive[tx][b] * self.dispersive[rx][b].conj()
    }

    /// Full-grid cascaded transfer `H_ik`.
    pub fn cascaded(&self, rx: usize, tx: usize) -> Spectrum {
        let mut s = Spectrum::zeros(&self.grid);
        let first = self.first_bin();
        for b in 0..self.band_len() {
            s.values[first + b] = self.cascaded_at(rx, tx, b);
        }
        s
    }

    /// Encoding phaser of user `tx` alone, full grid.
    pub fn encoder(&self, tx: usize) -> Spectrum {
        let mut s = Spectrum::zeros(&self.grid);
        let first = self.first_bin();
        for b in 0..self.band_len() {
            let f = self.grid.frequency(first + b);
            s.values[first + b] = phasor(-2.0 * PI * f * self.params.tau0) * self.dispersive[tx][b];
        }
        s
    }
}
