//! Line-of-sight channels: the Friis amplitude law and the normalized random
//! ensemble of gains, propagation delays and transmit offsets.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DcmaError, Result};
use crate::phaser::Spectrum;
use crate::sysconfig::{FrequencyGrid, SystemParams};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space amplitude `sqrt(G_tx G_rx) / (2 ω0 t)` of a link with
/// propagation delay `t`.
pub fn friis_amplitude(gain_tx: f64, gain_rx: f64, f0: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(DcmaError::Domain {
            value: t,
            domain: "t > 0".into(),
        });
    }
    if !(gain_tx > 0.0 && gain_rx > 0.0) {
        return Err(DcmaError::InvalidArgument(format!(
            "gains must be positive, got {gain_tx} and {gain_rx}"
        )));
    }
    if !(f0 > 0.0) {
        return Err(DcmaError::Domain {
            value: f0,
            domain: "f0 > 0".into(),
        });
    }
    Ok((gain_tx * gain_rx).sqrt() / (2.0 * 2.0 * PI * f0 * t))
}

/// Bounds of the random line-of-sight ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEnsembleParams {
    /// Minimum link distance, m.
    pub d_min: f64,
    /// Maximum link distance, m.
    pub d_max: f64,
    /// Lower bound of the interferer intensity `α_ik^2`.
    pub alpha_min_sq: f64,
    /// Upper bound of the interferer intensity `α_ik^2`.
    pub alpha_max_sq: f64,
    pub seed: u64,
}

impl Default for ChannelEnsembleParams {
    /// Distances in [0, 4] m with equal-energy links.
    fn default() -> Self {
        ChannelEnsembleParams {
            d_min: 0.0,
            d_max: 4.0,
            alpha_min_sq: 1.0,
            alpha_max_sq: 1.0,
            seed: 0,
        }
    }
}

impl ChannelEnsembleParams {
    pub fn with_gains(mut self, alpha_min_sq: f64, alpha_max_sq: f64) -> Self {
        self.alpha_min_sq = alpha_min_sq;
        self.alpha_max_sq = alpha_max_sq;
        self
    }

    pub fn with_distances(mut self, d_min: f64, d_max: f64) -> Self {
        self.d_min = d_min;
        self.d_max = d_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.d_min.is_finite()
            && self.d_max.is_finite()
            && 0.0 <= self.d_min
            && self.d_min <= self.d_max;
        if !ok {
            return Err(DcmaError::InvalidParams(format!(
                "need 0 <= d_min <= d_max, got [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        let ok = self.alpha_min_sq.is_finite()
            && self.alpha_max_sq.is_finite()
            && 0.0 <= self.alpha_min_sq
            && self.alpha_min_sq <= self.alpha_max_sq;
        if !ok {
            return Err(DcmaError::InvalidParams(format!(
                "need 0 <= alpha_min_sq <= alpha_max_sq, got [{}, {}]",
                self.alpha_min_sq, self.alpha_max_sq
            )));
        }
        Ok(())
    }

    /// Mean interferer intensity `(α_min^2 + α_max^2) / 2`.
    pub fn mean_alpha_sq(&self) -> f64 {
        0.5 * (self.alpha_min_sq + self.alpha_max_sq)
    }

    pub fn delay_bounds(&self) -> (f64, f64) {
        (self.d_min / SPEED_OF_LIGHT, self.d_max / SPEED_OF_LIGHT)
    }
}

/// One draw of the channel: `alpha[i][k]` and `t_chan[i][k]` describe the
/// link from transmitter `k` to receiver `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRealization {
    pub alpha: Vec<Vec<f64>>,
    pub t_chan: Vec<Vec<f64>>,
    pub t_tx: Vec<f64>,
}

impl ChannelRealization {
    /// Synchronized, shorted links: unit gains, zero delays and offsets.
    pub fn shorted(n: usize) -> Self {
        ChannelRealization {
            alpha: vec![vec![1.0; n]; n],
            t_chan: vec![vec![0.0; n]; n],
            t_tx: vec![0.0; n],
        }
    }

    pub fn n_users(&self) -> usize {
        self.t_tx.len()
    }

    /// Start of transmitter `k`'s pulse train as seen by receiver `i`.
    pub fn arrival_offset(&self, rx: usize, tx: usize) -> f64 {
        self.t_tx[tx] + self.t_chan[rx][tx]
    }

    /// Largest `t_TXk + t_ik` over all links.
    pub fn max_offset(&self) -> f64 {
        (0..self.n_users())
            .flat_map(|i| (0..self.n_users()).map(move |k| (i, k)))
            .map(|(i, k)| self.arrival_offset(i, k))
            .fold(0.0, f64::max)
    }

    /// Checks shape and the `α_ii = 1` normalization.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_users();
        if n == 0 {
            return Err(DcmaError::Empty("channel realization"));
        }
        for (what, m) in [("alpha rows", &self.alpha), ("t_chan rows", &self.t_chan)] {
            if m.len() != n {
                return Err(DcmaError::DimensionMismatch {
                    what,
                    expected: n,
                    got: m.len(),
                });
            }
            if let Some(row) = m.iter().find(|r| r.len() != n) {
                return Err(DcmaError::DimensionMismatch {
                    what,
                    expected: n,
                    got: row.len(),
                });
            }
        }
        for i in 0..n {
            if self.alpha[i][i] != 1.0 {
                return Err(DcmaError::InvalidParams(format!(
                    "alpha[{i}][{i}] = {} but must be 1",
                    self.alpha[i][i]
                )));
            }
        }
        let nonneg = |v: &f64| v.is_finite() && *v >= 0.0;
        let all_ok = self.alpha.iter().flatten().all(nonneg)
            && self.t_chan.iter().flatten().all(nonneg)
            && self.t_tx.iter().all(nonneg);
        if !all_ok {
            return Err(DcmaError::InvalidParams(
                "gains and delays must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        r.validate()?;
        Ok(r)
    }
}

/// Independent RNG stream for Monte Carlo trial `trial` of a run seeded with
/// `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws delays `t_ik ~ U(d_min/c, d_max/c)`, intensities
/// `α_ik^2 ~ U(α_min^2, α_max^2)` for `k != i` (`α_ii = 1`), and transmit
/// offsets `t_TXk ~ U(0, T_b)`, all independent.
pub fn draw_realization<R: Rng + ?Sized>(
    params: &SystemParams,
    ens: &ChannelEnsembleParams,
    rng: &mut R,
) -> Result<ChannelRealization> {
    ens.validate()?;
    let n = params.n_users;
    let (t_lo, t_hi) = ens.delay_bounds();
    let mut real = ChannelRealization::shorted(n);
    for i in 0..n {
        for k in 0..n {
            real.t_chan[i][k] = uniform(rng, t_lo, t_hi);
            real.alpha[i][k] = if i == k {
                1.0
            } else {
                uniform(rng, ens.alpha_min_sq, ens.alpha_max_sq).sqrt()
            };
        }
    }
    for k in 0..n {
        real.t_tx[k] = uniform(rng, 0.0, params.bit_period());
    }
    Ok(real)
}

/// Channel response `α e^{-j2πft}` on every grid bin.
pub fn channel_transfer(alpha: f64, t: f64, grid: &FrequencyGrid) -> Result<Spectrum> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(DcmaError::Domain {
            value: t,
            domain: "t >= 0".into(),
        });
    }
    let values = grid
        .frequencies()
        .iter()
        .map(|&f| Complex64::from_polar(alpha, -2.0 * PI * f * t))
        .collect();
    Ok(Spectrum {
        values,
        bin_spacing: grid.spacing(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::ChebyshevCode;
    use crate::phaser::{apply, cascaded_transfer, impulse_response, normalize};
    use crate::sysconfig::make_grid;

    fn params() -> SystemParams {
        SystemParams::new(10e9, 10e9, 1e-9, 4)
    }

    #[test]
    fn friis_examples() {
        let a1 = friis_amplitude(1.0, 1.0, 10e9, 3.33e-9).unwrap();
        let oracle = 1.0 / (4.0 * PI * 1e10 * 3.33e-9);
        assert!((a1 / oracle - 1.0).abs() < 1e-14);
        // Same value reached at a tenfold scale of frequency and delay.
        let scaled = friis_amplitude(1.0, 1.0, 1e9, 3.33e-8).unwrap();
        assert!((scaled / a1 - 1.0).abs() < 1e-14);
        let a2 = friis_amplitude(1.0, 1.0, 10e9, 6.66e-9).unwrap();
        assert!((a1 / a2 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn friis_normalized_ratio() {
        let (g_ik, g_ii, t_ik, t_ii) = (2.5, 1.5, 7e-9, 3e-9);
        let ratio = friis_amplitude(g_ik, 1.0, 10e9, t_ik).unwrap()
            / friis_amplitude(g_ii, 1.0, 10e9, t_ii).unwrap();
        let expected = (g_ik / g_ii).sqrt() / (t_ik / t_ii);
        assert!((ratio / expected - 1.0).abs() < 1e-14);
    }

    #[test]
    fn friis_rejects_bad_inputs() {
        assert!(matches!(
            friis_amplitude(1.0, 1.0, 10e9, 0.0),
            Err(DcmaError::Domain { .. })
        ));
        assert!(friis_amplitude(1.0, 1.0, 10e9, -1e-9).is_err());
        assert!(friis_amplitude(0.0, 1.0, 10e9, 1e-9).is_err());
    }

    #[test]
    fn ensemble_validation() {
        assert!(ChannelEnsembleParams::default().validate().is_ok());
        assert!(ChannelEnsembleParams::default()
            .with_distances(3.0, 1.0)
            .validate()
            .is_err());
        assert!(ChannelEnsembleParams::default()
            .with_gains(0.2, 0.1)
            .validate()
            .is_err());
        assert!(ChannelEnsembleParams::default()
            .with_distances(-1.0, 1.0)
            .validate()
            .is_err());
    }

    #[test]
    fn equal_energy_links_have_unit_gain() {
        let p = params();
        let mut rng = trial_rng(7, 0);
        let r = draw_realization(&p, &ChannelEnsembleParams::default(), &mut rng).unwrap();
        assert!(r.alpha.iter().flatten().all(|&a| a == 1.0));
        r.validate().unwrap();
    }

    #[test]
    fn degenerate_distance_gives_equal_delays() {
        let p = params();
        let ens = ChannelEnsembleParams::default().with_distances(2.0, 2.0);
        let r = draw_realization(&p, &ens, &mut trial_rng(1, 0)).unwrap();
        let t = 2.0 / SPEED_OF_LIGHT;
        assert!(r.t_chan.iter().flatten().all(|&v| v == t));
    }

    #[test]
    fn realization_bounds_and_diagonal() {
        let p = params();
        let ens = ChannelEnsembleParams::default().with_gains(0.06, 0.14);
        let (lo, hi) = ens.delay_bounds();
        for trial in 0..200 {
            let r = draw_realization(&p, &ens, &mut trial_rng(3, trial)).unwrap();
            r.validate().unwrap();
            for i in 0..4 {
                assert_eq!(r.alpha[i][i], 1.0);
                for k in 0..4 {
                    assert!(r.t_chan[i][k] >= lo && r.t_chan[i][k] <= hi);
                    if i != k {
                        let a2 = r.alpha[i][k] * r.alpha[i][k];
                        assert!((0.06 - 1e-15..=0.14 + 1e-15).contains(&a2));
                    }
                }
            }
            assert!(r.t_tx.iter().all(|&t| (0.0..=p.bit_period()).contains(&t)));
        }
    }

    #[test]
    fn mean_intensity_matches_ensemble_mean() {
        let p = SystemParams::new(10e9, 10e9, 1e-9, 2);
        let ens = ChannelEnsembleParams::default().with_gains(0.06, 0.14);
        let mut rng = trial_rng(11, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n / 2 {
            let r = draw_realization(&p, &ens, &mut rng).unwrap();
            sum += r.alpha[0][1].powi(2) + r.alpha[1][0].powi(2);
        }
        let mean = sum / n as f64;
        assert!((mean - 0.1).abs() < 0.002, "{mean}");
    }

    #[test]
    fn delays_pass_kolmogorov_smirnov() {
        let p = SystemParams::new(10e9, 10e9, 1e-9, 2);
        let ens = ChannelEnsembleParams::default();
        let (lo, hi) = ens.delay_bounds();
        let mut rng = trial_rng(5, 0);
        let mut xs = Vec::new();
        while xs.len() < 10_000 {
            let r = draw_realization(&p, &ens, &mut rng).unwrap();
            xs.extend(r.t_chan.iter().flatten().map(|t| (t - lo) / (hi - lo)));
        }
        xs.truncate(10_000);
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(j, &x)| (x - j as f64 / n).max((j + 1) as f64 / n - x))
            .fold(0.0, f64::max);
        // Asymptotic 1% critical value.
        assert!(d < 1.628 / n.sqrt(), "{d}");
    }

    #[test]
    fn seed_determinism_and_stream_independence() {
        let p = params();
        let ens = ChannelEnsembleParams::default().with_gains(0.06, 0.14);
        let a = draw_realization(&p, &ens, &mut trial_rng(42, 3)).unwrap();
        let b = draw_realization(&p, &ens, &mut trial_rng(42, 3)).unwrap();
        let c = draw_realization(&p, &ens, &mut trial_rng(42, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn realization_json_round_trip() {
        let p = params();
        let r = draw_realization(&p, &ChannelEnsembleParams::default(), &mut trial_rng(2, 0)).unwrap();
        let back = ChannelRealization::from_json_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(r, back);
        let mut bad = r.clone();
        bad.alpha[1][1] = 0.5;
        assert!(ChannelRealization::from_json_str(&bad.to_json().unwrap()).is_err());
    }

    #[test]
    fn identity_channel_is_all_ones() {
        let g = make_grid(&params()).unwrap();
        let h = channel_transfer(1.0, 0.0, &g).unwrap();
        assert!(h.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        assert!(channel_transfer(1.0, -1e-9, &g).is_err());
    }

    #[test]
    fn delayed_scaled_channel_shifts_and_scales_peak() {
        let p = SystemParams::new(10e9, 10e9, 1e-9, 2).aligned().unwrap();
        let g = make_grid(&p).unwrap();
        let code = ChebyshevCode::new(3).unwrap();
        let link = cascaded_transfer(code, code, &p, &g).unwrap();
        let t = 0.5e-9;
        let out = apply(&link, &channel_transfer(0.5, t, &g).unwrap()).unwrap();
        let peak = out.evaluate_at(2.0 * p.tau0 + t).norm() / p.peak_norm();
        assert!((peak - 0.5).abs() < 1e-9);
        let w = normalize(&impulse_response(&out), &p);
        let (n, _) = w.peak_envelope();
        assert!((w.time(n) - (2.0 * p.tau0 + t)).abs() <= w.sample_period);
    }
}
