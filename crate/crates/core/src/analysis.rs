//! MAI statistics, SIR/SINR, Q-function BEP and the Monte Carlo drivers
//! that sample MAI and count bit errors.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal as StatNormal};
use statrs::function::erf::erfc;

use crate::channel::{draw_realization, trial_rng, ChannelEnsembleParams, ChannelRealization};
use crate::coding::CodeSet;
use crate::error::{DcmaError, Result};
use crate::link::{self, BitStream, InterfererBits};
use crate::phaser::{self, PhaserBank, Spectrum};
use crate::sysconfig::SystemParams;

/// Sample count below which [`MaiStats`] are not considered reportable.
pub const MIN_REPORTED_SAMPLES: usize = 10_000;
/// Minimum trials pooled by [`MaiSampler::pooled_samples`].
pub const MIN_MAI_TRIALS: usize = 100;
/// Minimum trials accepted by [`bep_monte_carlo`].
pub const MIN_BEP_TRIALS: usize = 1000;
/// Smallest analytic BEP that Monte Carlo will try to resolve.
pub const MIN_MONTE_CARLO_BEP: f64 = 1e-7;
/// Number of equal-probability bins of the normality test.
pub const GOF_BINS: usize = 50;
/// Significance level of the normality test.
pub const GOF_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width histogram over the sample range.
    pub fn build(samples: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(DcmaError::InvalidArgument("histogram needs at least one bin".into()));
        }
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|j| lo + j as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let j = (((x - lo) / width) as usize).min(bins - 1);
            counts[j] += 1;
        }
        Ok(Histogram { edges, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Counts scaled to a probability density.
    pub fn density(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.edges
            .windows(2)
            .zip(&self.counts)
            .map(|(w, &c)| c as f64 / (n * (w[1] - w[0])))
            .collect()
    }
}

/// Sample moments of normalized MAI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaiStats {
    pub mu_hat: f64,
    pub sigma_sq_hat: f64,
    pub histogram: Histogram,
    pub n_samples: usize,
}

impl MaiStats {
    pub fn sigma_hat(&self) -> f64 {
        self.sigma_sq_hat.sqrt()
    }

    pub fn is_reportable(&self) -> bool {
        self.n_samples >= MIN_REPORTED_SAMPLES
    }

    /// `|mu| < 3 sigma / sqrt(n)`.
    pub fn mean_consistent_with_zero(&self) -> bool {
        self.mu_hat.abs() <= 3.0 * self.sigma_hat() / (self.n_samples as f64).sqrt()
    }
}

/// Mean, variance (1/n) and histogram of normalized MAI samples.
pub fn mai_stats(samples: &[f64], bins: usize) -> Result<MaiStats> {
    if samples.is_empty() {
        return Err(DcmaError::Empty("MAI samples"));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    Ok(MaiStats {
        mu_hat: mu,
        sigma_sq_hat: var,
        histogram: Histogram::build(samples, bins)?,
        n_samples: samples.len(),
    })
}

/// Normal density with the fitted mean and variance.
pub fn gaussian_pdf(x: f64, stats: &MaiStats) -> Result<f64> {
    if !(stats.sigma_sq_hat > 0.0) {
        return Err(DcmaError::ZeroVariance);
    }
    let d = x - stats.mu_hat;
    Ok((-d * d / (2.0 * stats.sigma_sq_hat)).exp() / (2.0 * std::f64::consts::PI * stats.sigma_sq_hat).sqrt())
}

/// Outcome of the Pearson χ² normality test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityTest {
    pub chi_sq: f64,
    pub dof: usize,
    pub p_value: f64,
    pub n_samples: usize,
    /// True when `p_value > GOF_ALPHA` and the code set has no linear code.
    pub passed: bool,
    /// Set when the code set contains `±1`; such sets always report failure.
    pub linear_code_flag: bool,
}

/// Pearson χ² goodness of fit of `samples` to the normal distribution with
/// their own mean and variance, on `bins` equal-probability bins
/// (`bins - 3` degrees of freedom).
pub fn normality_test(samples: &[f64], bins: usize, codes: &CodeSet) -> Result<NormalityTest> {
    if bins < GOF_BINS {
        return Err(DcmaError::InvalidArgument(format!(
            "normality test needs at least {GOF_BINS} bins, got {bins}"
        )));
    }
    if samples.len() < 5 * bins {
        return Err(DcmaError::InsufficientTrials(format!(
            "{} samples give fewer than 5 expected per bin over {bins} bins",
            samples.len()
        )));
    }
    let stats = mai_stats(samples, 1)?;
    if !(stats.sigma_sq_hat > 0.0) {
        return Err(DcmaError::ZeroVariance);
    }
    let fitted = StatNormal::new(stats.mu_hat, stats.sigma_hat())
        .map_err(|e| DcmaError::InvalidArgument(e.to_string()))?;
    let cuts: Vec<f64> = (1..bins)
        .map(|j| fitted.inverse_cdf(j as f64 / bins as f64))
        .collect();
    let mut observed = vec![0u64; bins];
    for &x in samples {
        observed[cuts.partition_point(|&c| c < x)] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let chi_sq: f64 = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let dof = bins - 3;
    let p_value = ChiSquared::new(dof as f64)
        .map_err(|e| DcmaError::InvalidArgument(e.to_string()))?
        .sf(chi_sq);
    let linear_code_flag = codes.contains_linear();
    Ok(NormalityTest {
        chi_sq,
        dof,
        p_value,
        n_samples: samples.len(),
        passed: p_value > GOF_ALPHA && !linear_code_flag,
        linear_code_flag,
    })
}

/// `1 / sigma_sq_hat`.
pub fn sir_statistical(stats: &MaiStats) -> Result<f64> {
    if !(stats.sigma_sq_hat > 0.0) {
        return Err(DcmaError::ZeroVariance);
    }
    Ok(1.0 / stats.sigma_sq_hat)
}

/// `4 delta_tau delta_f / (alpha_mean_sq (N - 1))`.
pub fn sir_analytic(params: &SystemParams, n_users: usize, alpha_mean_sq: f64) -> Result<f64> {
    if n_users < 2 {
        return Err(DcmaError::InvalidArgument(format!(
            "SIR needs at least 2 users, got {n_users}"
        )));
    }
    if !(alpha_mean_sq > 0.0) {
        return Err(DcmaError::InvalidArgument(format!(
            "mean intensity must be positive, got {alpha_mean_sq}"
        )));
    }
    Ok(4.0 * params.dsbp() / (alpha_mean_sq * (n_users - 1) as f64))
}

/// Harmonic combination `1 / (1/sir + 1/snr)`; infinite SNR gives `sir`.
pub fn sinr(sir: f64, snr: f64) -> f64 {
    1.0 / (1.0 / sir + 1.0 / snr)
}

/// Gaussian upper tail `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Per-receiver and average bit error probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BepResult {
    pub per_receiver: Vec<f64>,
    pub average: f64,
    pub sir_i: Vec<f64>,
    pub sinr_i: Vec<f64>,
    pub snr: f64,
}

/// `BEP_i = Q(sqrt(SINR_i) / 2)` and their mean.
pub fn bep(sinr_i: &[f64]) -> Result<BepResult> {
    bep_from_parts(sinr_i.to_vec(), sinr_i.to_vec(), f64::INFINITY)
}

/// [`bep`] after combining each receiver's SIR with a common SNR.
pub fn bep_from_sir(sir_i: &[f64], snr: f64) -> Result<BepResult> {
    let sinr_i = sir_i.iter().map(|&s| sinr(s, snr)).collect();
    bep_from_parts(sir_i.to_vec(), sinr_i, snr)
}

fn bep_from_parts(sir_i: Vec<f64>, sinr_i: Vec<f64>, snr: f64) -> Result<BepResult> {
    if sinr_i.is_empty() {
        return Err(DcmaError::Empty("receivers"));
    }
    if let Some(&bad) = sinr_i.iter().find(|s| !(**s > 0.0)) {
        return Err(DcmaError::Domain {
            value: bad,
            domain: "SINR > 0".into(),
        });
    }
    let per_receiver: Vec<f64> = sinr_i.iter().map(|s| q_function(s.sqrt() / 2.0)).collect();
    let average = per_receiver.iter().sum::<f64>() / per_receiver.len() as f64;
    Ok(BepResult {
        per_receiver,
        average,
        sir_i,
        sinr_i,
        snr,
    })
}

/// Average BEP of an `n_users` system from the analytic SIR and `snr`.
pub fn analytic_bep(params: &SystemParams, n_users: usize, alpha_mean_sq: f64, snr: f64) -> Result<f64> {
    let sir = if n_users == 1 {
        f64::INFINITY
    } else {
        sir_analytic(params, n_users, alpha_mean_sq)?
    };
    Ok(q_function(sinr(sir, snr).sqrt() / 2.0))
}

/// `N / (2 delta_tau delta_f)` in b/s/Hz.
pub fn spectral_efficiency(n_users: usize, params: &SystemParams) -> f64 {
    n_users as f64 / (2.0 * params.dsbp())
}

/// Where MAI is sampled: `n_bits` pulses per transmitter and a steady-state
/// region `[start, start + span)` free of start-up and tail transients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    /// Parameters with the window grown to hold the whole train.
    pub params: SystemParams,
    pub n_bits: usize,
    pub start: f64,
    pub span: f64,
}

/// Plans a steady-state region of `span` seconds for the ensemble `ens`.
///
/// Pulses of transmitter `k` sit at `ℓ T_b + off_k` with
/// `off_k ∈ [0, T_b + d_max/c]`; each decoded pulse occupies delays up to
/// `2 tau0 ± delta_tau` plus a ringing margin.
pub fn plan_sampling(params: &SystemParams, ens: &ChannelEnsembleParams, span: f64) -> Result<SamplingPlan> {
    params.validate()?;
    ens.validate()?;
    if !(span > 0.0) {
        return Err(DcmaError::InvalidArgument(format!("sampling span {span}")));
    }
    let tb = params.bit_period();
    let off_max = tb + ens.delay_bounds().1;
    let ring = params.delta_tau.max(10.0 / params.delta_f);
    let start = off_max - tb + 2.0 * params.tau0 + params.delta_tau + ring;
    let n_bits = ((start + span - 2.0 * params.tau0 + params.delta_tau + ring) / tb).ceil() as usize + 2;
    let end = (n_bits - 1) as f64 * tb + off_max + 2.0 * params.tau0 + params.delta_tau + ring;
    Ok(SamplingPlan {
        params: params.with_window(end),
        n_bits,
        start,
        span,
    })
}

/// Worst-case MAI sampler: every trial draws a channel realization, lets all
/// transmitters send 1 in every slot, and decodes at every receiver.
pub struct MaiSampler {
    plan: SamplingPlan,
    bank: PhaserBank,
    ens: ChannelEnsembleParams,
    gains: Option<Vec<Vec<f64>>>,
}

impl MaiSampler {
    /// Samples over a steady-state region of two bit periods.
    pub fn new(params: &SystemParams, codes: &CodeSet, ens: &ChannelEnsembleParams) -> Result<Self> {
        Self::with_span(params, codes, ens, 2.0 * params.bit_period())
    }

    pub fn with_span(params: &SystemParams, codes: &CodeSet, ens: &ChannelEnsembleParams, span: f64) -> Result<Self> {
        if codes.len() != params.n_users {
            return Err(DcmaError::DimensionMismatch {
                what: "codes",
                expected: params.n_users,
                got: codes.len(),
            });
        }
        let plan = plan_sampling(params, ens, span)?;
        Ok(MaiSampler {
            bank: PhaserBank::new(&plan.params, codes)?,
            plan,
            ens: *ens,
            gains: None,
        })
    }

    /// Keeps the gain matrix fixed at `alpha` (a static channel) while delays
    /// and transmit offsets are still drawn per trial.
    pub fn with_fixed_gains(mut self, alpha: Vec<Vec<f64>>) -> Result<Self> {
        let mut probe = ChannelRealization::shorted(self.n_users());
        probe.alpha = alpha;
        probe.validate()?;
        self.gains = Some(probe.alpha);
        Ok(self)
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    pub fn n_users(&self) -> usize {
        self.bank.n_users()
    }

    fn realization(&self, trial: u64) -> Result<(ChannelRealization, impl Rng)> {
        let mut rng = trial_rng(self.ens.seed, trial);
        let mut chan = draw_realization(&self.plan.params, &self.ens, &mut rng)?;
        if let Some(alpha) = &self.gains {
            chan.alpha.clone_from(alpha);
        }
        Ok((chan, rng))
    }

    /// MAI spectrum at every receiver for one trial.
    pub fn trial_spectra(&self, trial: u64) -> Result<Vec<Spectrum>> {
        let (chan, _) = self.realization(trial)?;
        let ones = vec![BitStream::ones(self.plan.n_bits)?; self.n_users()];
        (0..self.n_users())
            .map(|rx| Ok(link::decoded_spectra(&self.bank, &chan, &ones, rx)?.1))
            .collect()
    }

    /// Normalized real MAI samples of one trial inside the steady region,
    /// per receiver.
    pub fn trial_samples(&self, trial: u64) -> Result<Vec<Vec<f64>>> {
        let p = &self.plan.params;
        Ok(self
            .trial_spectra(trial)?
            .iter()
            .map(|spec| {
                let w = phaser::normalize(&phaser::impulse_response(spec), p);
                (0..w.len())
                    .filter(|&n| {
                        let t = w.time(n);
                        t >= self.plan.start && t < self.plan.start + self.plan.span
                    })
                    .map(|n| w.samples[n].re)
                    .collect()
            })
            .collect())
    }

    /// Samples of `trials` trials pooled per receiver.
    pub fn pooled_samples(&self, trials: usize) -> Result<Vec<Vec<f64>>> {
        if trials < MIN_MAI_TRIALS {
            return Err(DcmaError::InsufficientTrials(format!(
                "{trials} trials, need at least {MIN_MAI_TRIALS}"
            )));
        }
        let per_trial = (0..trials as u64)
            .into_par_iter()
            .map(|t| self.trial_samples(t))
            .collect::<Result<Vec<_>>>()?;
        let mut pooled = vec![Vec::new(); self.n_users()];
        for trial in per_trial {
            for (rx, s) in trial.into_iter().enumerate() {
                pooled[rx].extend(s);
            }
        }
        Ok(pooled)
    }

    /// Variance of the steady-region samples of each trial, `[trial][rx]`.
    pub fn per_realization_variances(&self, trials: usize) -> Result<Vec<Vec<f64>>> {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                self.trial_samples(t)?
                    .iter()
                    .map(|s| Ok(mai_stats(s, 1)?.sigma_sq_hat))
                    .collect()
            })
            .collect()
    }

    /// One sample per trial at a uniformly drawn instant of the steady
    /// region, at receiver `rx`; the samples are independent.
    pub fn independent_samples(&self, rx: usize, n: usize) -> Result<Vec<f64>> {
        if rx >= self.n_users() {
            return Err(DcmaError::InvalidArgument(format!("receiver {rx}")));
        }
        let ones = vec![BitStream::ones(self.plan.n_bits)?; self.n_users()];
        (0..n as u64)
            .into_par_iter()
            .map(|trial| {
                let (chan, mut rng) = self.realization(trial)?;
                let (_, mai) = link::decoded_spectra(&self.bank, &chan, &ones, rx)?;
                let t = self.plan.start + self.plan.span * rng.random::<f64>();
                Ok(mai.evaluate_at(t).re / self.plan.params.peak_norm())
            })
            .collect()
    }
}

/// Average BEP from per-receiver statistical SIR (`1 / sigma_sq_hat`) with
/// static channel gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticalBep {
    /// Mean of the per-realization average BEP.
    pub bep: f64,
    /// Mean per-receiver statistical SIR.
    pub sir_mean: f64,
    /// One entry per gain realization.
    pub realizations: Vec<BepResult>,
}

/// For each of `gain_realizations` draws of the gain matrix, holds the gains
/// fixed, pools `trials` delay/offset trials of worst-case MAI per receiver,
/// and evaluates `BEP_i = Q(sqrt(SIR_i) / 2)` with `SIR_i = 1 / sigma_sq_hat_i`
/// combined with the configured SNR.
pub fn statistical_bep(
    params: &SystemParams,
    codes: &CodeSet,
    ens: &ChannelEnsembleParams,
    gain_realizations: usize,
    trials: usize,
) -> Result<StatisticalBep> {
    if gain_realizations == 0 {
        return Err(DcmaError::InvalidArgument("need at least one gain realization".into()));
    }
    let mut realizations = Vec::with_capacity(gain_realizations);
    for g in 0..gain_realizations as u64 {
        let gains = draw_realization(params, ens, &mut trial_rng(ens.seed, u64::MAX - g))?.alpha;
        let trial_seed = ens.seed.wrapping_add((g + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let sampler = MaiSampler::new(params, codes, &ens.with_seed(trial_seed))?.with_fixed_gains(gains)?;
        let sir_i = sampler
            .pooled_samples(trials)?
            .iter()
            .map(|x| sir_statistical(&mai_stats(x, 1)?))
            .collect::<Result<Vec<_>>>()?;
        realizations.push(bep_from_sir(&sir_i, params.snr())?);
    }
    let g = realizations.len() as f64;
    let bep = realizations.iter().map(|r| r.average).sum::<f64>() / g;
    let sir_mean = realizations
        .iter()
        .map(|r| r.sir_i.iter().sum::<f64>() / r.sir_i.len() as f64)
        .sum::<f64>()
        / g;
    Ok(StatisticalBep {
        bep,
        sir_mean,
        realizations,
    })
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Empirical bit error rate with a 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloBep {
    pub errors: u64,
    pub bits: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Analytic average BEP for the same configuration.
    pub analytic: f64,
}

/// Bits detected per receiver per trial.
pub const DETECTED_BITS_PER_TRIAL: usize = 16;

/// Monte Carlo bit error rate with in-phase detection at threshold 0.5 and
/// genie-aided timing, averaged over all receivers.
///
/// Each trial draws a channel realization; every receiver's own transmitter
/// sends random bits and the interferers follow `mode`. Real Gaussian noise
/// of the configured `noise_sigma` is added at each decision instant.
pub fn bep_monte_carlo(
    params: &SystemParams,
    codes: &CodeSet,
    ens: &ChannelEnsembleParams,
    n_trials: usize,
    mode: InterfererBits,
) -> Result<MonteCarloBep> {
    if n_trials < MIN_BEP_TRIALS {
        return Err(DcmaError::InsufficientTrials(format!(
            "{n_trials} trials, need at least {MIN_BEP_TRIALS}"
        )));
    }
    let n = params.n_users;
    let analytic = analytic_bep(params, n, ens.mean_alpha_sq(), params.snr())?;
    if analytic > 0.0 && analytic < MIN_MONTE_CARLO_BEP {
        return Err(DcmaError::InsufficientTrials(format!(
            "analytic BEP {analytic:.3e} is below {MIN_MONTE_CARLO_BEP:e}; report it analytically"
        )));
    }
    let sampler = MaiSampler::with_span(
        params,
        codes,
        ens,
        DETECTED_BITS_PER_TRIAL as f64 * params.bit_period(),
    )?;
    let plan = *sampler.plan();
    let p = plan.params;
    let noise_sd = p.normalized_noise_variance().sqrt();
    let noise = Normal::new(0.0, noise_sd).map_err(|e| DcmaError::InvalidParams(e.to_string()))?;
    let (errors, bits) = (0..n_trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<(u64, u64)> {
            let (chan, mut rng) = sampler.realization(trial)?;
            let (mut errors, mut bits) = (0u64, 0u64);
            for rx in 0..n {
                let streams = link::draw_bits(n, rx, plan.n_bits, mode, &mut rng)?;
                let (desired, mai) = link::decoded_spectra(&sampler.bank, &chan, &streams, rx)?;
                let instants = link::desired_peak_instants(&p, &chan, rx, plan.n_bits);
                for (l, &t) in instants.iter().enumerate() {
                    if t < plan.start || t >= plan.start + plan.span {
                        continue;
                    }
                    let clean = (desired.evaluate_at(t) + mai.evaluate_at(t)).re / p.peak_norm();
                    let v = clean + if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    if (v > 0.5) != streams[rx].bits()[l] {
                        errors += 1;
                    }
                    bits += 1;
                }
            }
            Ok((errors, bits))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let (ci_low, ci_high) = wilson_interval(errors, bits, 1.959_963_984_540_054);
    let estimate = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
    if analytic > 0.0 && ci_high - ci_low > estimate {
        return Err(DcmaError::InsufficientTrials(format!(
            "{errors} errors in {bits} bits: 95% interval [{ci_low:.3e}, {ci_high:.3e}] is wider than the estimate"
        )));
    }
    Ok(MonteCarloBep {
        errors,
        bits,
        estimate,
        ci_low,
        ci_high,
        analytic,
    })
}
