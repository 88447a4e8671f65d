//! Named experiments behind the command-line runner.
//!
//! Each experiment reads an [`ExperimentConfig`], writes CSV/JSON data (and
//! optionally a gnuplot script) into `<out>/<experiment>/`, and returns a
//! [`RunReport`] whose checks are numerical self-validations of the run.
//! Every run writes `manifest.json` holding the resolved configuration, the
//! seed and the library version, which is enough to reproduce the outputs.
//!
//! CSV schemas (header row always present):
//!
//! - `waveforms/delays.csv`: `set, rx, tx, rx_code, tx_code, frequency_hz, delay_s, offset_norm`
//! - `waveforms/envelopes.csv`: `set, rx, time_s, s_abs, x_abs, x_rss, z_abs`
//! - `mai-dist/histogram.csv`: `bin_low, bin_high, center, count, density, gaussian_pdf`
//! - `bep-vs-n/bep_vs_n.csv`: `n, delta_tau_s, delta_f_hz, dsbp, eta, sir_analytic, bep_analytic, sir_statistical, bep_statistical`
//! - `bep-vs-snr/bep_vs_snr.csv`: `snr_db, n, sir, sinr, bep`
//! - `demo-2x2/traces.csv`: `time_s, nrz_0, nrz_1, encoded_0, encoded_1, received, decoded_0, decoded_1, mai_0, mai_1`

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    self, analytic_bep, bep_from_sir, mai_stats, normality_test, sir_analytic, sir_statistical,
    spectral_efficiency, statistical_bep, MaiSampler, GOF_BINS,
};
use crate::channel::{trial_rng, ChannelEnsembleParams};
use crate::coding::{all_odd_code_set, cascaded_group_delay, CodeSet};
use crate::error::{DcmaError, Result};
use crate::link::{dook_modulate, pulse_train_spectrum};
use crate::phaser::{self, PhaserBank, Spectrum, Waveform};
use crate::sysconfig::SystemParams;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DCMA_OUT_DIR";
/// Output directory used when neither the command line, the config nor
/// [`OUT_DIR_ENV`] names one.
pub const DEFAULT_OUT_DIR: &str = "dcma-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Cascaded delay profiles and decoded envelopes, synchronized and shorted.
    Waveforms,
    /// Worst-case MAI histogram, fitted normal and SIR/BEP statistics.
    MaiDist,
    /// BEP versus number of users for all-odd code sets.
    BepVsN,
    /// BEP versus SNR for several user counts.
    BepVsSnr,
    /// Two-user DOOK link traces and the peak-to-MAI ratio.
    Demo2x2,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Waveforms,
        Experiment::MaiDist,
        Experiment::BepVsN,
        Experiment::BepVsSnr,
        Experiment::Demo2x2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Waveforms => "waveforms",
            Experiment::MaiDist => "mai-dist",
            Experiment::BepVsN => "bep-vs-n",
            Experiment::BepVsSnr => "bep-vs-snr",
            Experiment::Demo2x2 => "demo-2x2",
        }
    }
}

/// DOOK link settings of the two-user demo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoParams {
    /// NRZ bit period, s.
    pub bit_period: f64,
    /// Delay of the XOR branch of the DOOK modulator, s.
    pub xor_delay: f64,
    /// NRZ bits per user.
    pub n_bits: usize,
}

impl Default for DemoParams {
    fn default() -> Self {
        DemoParams {
            bit_period: 5e-9,
            xor_delay: 3e-9,
            n_bits: 16,
        }
    }
}

/// Complete configuration of one experiment run.
///
/// Config files may give any subset of the fields; missing ones take the
/// defaults of the experiment (see [`ExperimentConfig::defaults`]).
/// Unknown fields are rejected. The top-level `seed` replaces
/// `ensemble.seed`. `system.n_users` is set from the code set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub system: SystemParams,
    /// Move the sample rate so the band edges fall between bins, when the
    /// frequency ratio allows it.
    pub align_grid: bool,
    /// Explicit code set; takes precedence over `all_odd_n` and `code_sets`.
    pub codes: Option<CodeSet>,
    /// All-odd code set of this many users.
    pub all_odd_n: Option<usize>,
    /// Code sets compared by the waveforms experiment.
    pub code_sets: Vec<CodeSet>,
    pub ensemble: ChannelEnsembleParams,
    /// Monte Carlo trials (0 skips the statistical part of bep-vs-n).
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Overrides the system noise level with a normalized SNR in dB.
    pub snr_db: Option<f64>,
    /// Histogram bins of the MAI distribution.
    pub bins: usize,
    /// Independent samples for the normality test (0 skips it).
    pub normality_samples: usize,
    pub n_values: Vec<usize>,
    pub delta_tau_values: Vec<f64>,
    pub delta_f_values: Vec<f64>,
    /// Static gain matrices averaged by the statistical BEP.
    pub gain_realizations: usize,
    pub n_users_list: Vec<usize>,
    pub snr_db_values: Vec<f64>,
    /// BEP whose required SNR is reported by bep-vs-snr.
    pub target_bep: f64,
    pub demo: DemoParams,
    /// Also write a gnuplot script next to the data.
    pub gnuplot: bool,
}

impl ExperimentConfig {
    /// Defaults reproducing the reference figure of each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let set = |o: &[i32]| CodeSet::new(o).expect("static code set");
        let mut cfg = ExperimentConfig {
            experiment,
            system: SystemParams::new(10e9, 10e9, 10e-9, 2),
            align_grid: true,
            codes: None,
            all_odd_n: None,
            code_sets: Vec::new(),
            ensemble: ChannelEnsembleParams::default(),
            trials: 120,
            seed: 1,
            output: None,
            snr_db: None,
            bins: 60,
            normality_samples: 2000,
            n_values: Vec::new(),
            delta_tau_values: Vec::new(),
            delta_f_values: Vec::new(),
            gain_realizations: 1,
            n_users_list: Vec::new(),
            snr_db_values: Vec::new(),
            target_bep: 1e-3,
            demo: DemoParams::default(),
            gnuplot: false,
        };
        match experiment {
            Experiment::Waveforms => {
                cfg.system = SystemParams::new(10e9, 4e9, 4e-9, 4);
                cfg.code_sets = vec![set(&[1, 2, 3, 4]), set(&[1, -1, 3, -3]), set(&[2, -2, 4, -4])];
                cfg.trials = 0;
            }
            Experiment::MaiDist => {
                cfg.codes = Some(set(&[3, -3]));
            }
            Experiment::BepVsN => {
                cfg.system = SystemParams::new(10e9, 5e9, 1e-9, 2);
                cfg.n_values = (1..=8).map(|k| 2 * k).collect();
                cfg.delta_tau_values = vec![0.5e-9, 1e-9];
                cfg.trials = 100;
            }
            Experiment::BepVsSnr => {
                cfg.system = SystemParams::new(10e9, 10e9, 10e-9, 4);
                cfg.n_users_list = vec![4, 8, 12];
                cfg.snr_db_values = (-10..=40).map(f64::from).collect();
                cfg.trials = 0;
            }
            Experiment::Demo2x2 => {
                cfg.system = SystemParams::new(4e9, 4e9, 1e-9, 2);
                cfg.codes = Some(set(&[1, -1]));
                cfg.trials = 0;
            }
        }
        cfg
    }

    /// Parses a (possibly partial) JSON config. The experiment is taken from
    /// `experiment` when given, otherwise from the file's `experiment` key.
    pub fn from_json_str(experiment: Option<Experiment>, s: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(s).map_err(|e| DcmaError::InvalidArgument(e.to_string()))?;
        if !user.is_object() {
            return Err(DcmaError::InvalidArgument("config must be a JSON object".into()));
        }
        let in_file = match user.get("experiment") {
            Some(v) => Some(
                serde_json::from_value::<Experiment>(v.clone())
                    .map_err(|e| DcmaError::InvalidArgument(format!("experiment: {e}")))?,
            ),
            None => None,
        };
        let experiment = match (experiment, in_file) {
            (Some(a), Some(b)) if a != b => {
                return Err(DcmaError::InvalidArgument(format!(
                    "config is for {}, not {}",
                    b.name(),
                    a.name()
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(DcmaError::InvalidArgument("config names no experiment".into())),
        };
        let mut merged = serde_json::to_value(Self::defaults(experiment))?;
        merge(&mut merged, user);
        serde_json::from_value(merged).map_err(|e| DcmaError::InvalidArgument(e.to_string()))
    }

    pub fn from_file(experiment: Option<Experiment>, path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| DcmaError::InvalidArgument(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json_str(experiment, &text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The single code set of the run: `codes`, else the all-odd set.
    pub fn code_set(&self) -> Result<CodeSet> {
        match (&self.codes, self.all_odd_n) {
            (Some(c), _) => Ok(c.clone()),
            (None, Some(n)) => all_odd_code_set(n),
            (None, None) => Err(DcmaError::InvalidArgument("config gives neither codes nor all_odd_n".into())),
        }
    }

    /// Ensemble with the run seed applied.
    pub fn seeded_ensemble(&self) -> ChannelEnsembleParams {
        self.ensemble.with_seed(self.seed)
    }

    /// System parameters for `n` users with the configured SNR and grid
    /// alignment; also reports whether alignment succeeded.
    pub fn system_for(&self, base: SystemParams, n: usize) -> Result<(SystemParams, bool)> {
        let mut p = base.with_users(n);
        if let Some(db) = self.snr_db {
            p = p.with_snr(db_to_linear(db));
        }
        let (p, aligned) = if self.align_grid {
            match p.aligned() {
                Ok(a) => (a, true),
                Err(_) => (p, false),
            }
        } else {
            (p, false)
        };
        p.validate()?;
        Ok((p, aligned))
    }

    /// Checks the fields the experiment uses.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DcmaError::InvalidArgument(m));
        self.system.validate()?;
        self.seeded_ensemble().validate()?;
        match self.experiment {
            Experiment::Waveforms => {
                if self.codes.is_none() && self.all_odd_n.is_none() && self.code_sets.is_empty() {
                    return bad("waveforms needs codes, all_odd_n or code_sets".into());
                }
                if let Some(n) = self.all_odd_n {
                    all_odd_code_set(n)?;
                }
            }
            Experiment::MaiDist => {
                self.code_set()?;
                if self.bins == 0 {
                    return bad("bins must be positive".into());
                }
                if self.normality_samples > 0 && self.normality_samples < 5 * GOF_BINS {
                    return bad(format!(
                        "normality_samples must be 0 or at least {}",
                        5 * GOF_BINS
                    ));
                }
            }
            Experiment::BepVsN => {
                if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 2) {
                    return bad("n_values must be nonempty with every N >= 2".into());
                }
                if self.trials > 0 && self.gain_realizations == 0 {
                    return bad("gain_realizations must be positive".into());
                }
                if self.delta_tau_values.iter().chain(&self.delta_f_values).any(|v| !(*v > 0.0)) {
                    return bad("delta_tau_values and delta_f_values must be positive".into());
                }
            }
            Experiment::BepVsSnr => {
                if self.n_users_list.is_empty() || self.n_users_list.iter().any(|&n| n < 2) {
                    return bad("n_users_list must be nonempty with every N >= 2".into());
                }
                if self.snr_db_values.iter().any(|v| !v.is_finite()) {
                    return bad("snr_db_values must be finite".into());
                }
                if !(self.target_bep > 0.0 && self.target_bep < 0.5) {
                    return bad(format!("target_bep {} not in (0, 0.5)", self.target_bep));
                }
            }
            Experiment::Demo2x2 => {
                if self.code_set()?.len() != 2 {
                    return bad("demo-2x2 needs exactly two codes".into());
                }
                let d = &self.demo;
                if d.n_bits == 0 || !(d.bit_period > 0.0) {
                    return bad("demo needs n_bits > 0 and a positive bit period".into());
                }
                if !(d.xor_delay > 0.0 && d.xor_delay < d.bit_period) {
                    return bad("demo xor_delay must lie inside the bit period".into());
                }
            }
        }
        Ok(())
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Output directory: command line, then config, then [`OUT_DIR_ENV`], then
/// [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// A numerical self-check of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: Experiment,
    pub out_dir: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub summary: Value,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Sink {
    dir: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Sink {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Sink {
            dir,
            outputs: Vec::new(),
        })
    }

    fn csv(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
        let path = self.dir.join(name);
        let w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
        self.outputs.push(path);
        Ok(w)
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let path = self.dir.join(name);
        let mut f = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut f, v)?;
        f.write_all(b"\n")?;
        f.flush()?;
        self.outputs.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, s: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, s)?;
        self.outputs.push(path);
        Ok(())
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Outcome {
    checks: Vec<Check>,
    warnings: Vec<String>,
    summary: Value,
    gnuplot: String,
}

/// Validates `cfg`, runs its experiment into `<out_root>/<experiment>/` and
/// writes the manifest.
pub fn run(cfg: &ExperimentConfig, out_root: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let mut sink = Sink::new(out_root.join(cfg.experiment.name()))?;
    let outcome = match cfg.experiment {
        Experiment::Waveforms => run_waveforms(cfg, &mut sink)?,
        Experiment::MaiDist => run_mai_dist(cfg, &mut sink)?,
        Experiment::BepVsN => run_bep_vs_n(cfg, &mut sink)?,
        Experiment::BepVsSnr => run_bep_vs_snr(cfg, &mut sink)?,
        Experiment::Demo2x2 => run_demo_2x2(cfg, &mut sink)?,
    };
    if cfg.gnuplot {
        sink.text("plot.gp", &outcome.gnuplot)?;
    }
    let manifest_path = sink.dir.join("manifest.json");
    let mut outputs = sink.outputs.clone();
    outputs.push(manifest_path);
    let manifest = json!({
        "experiment": cfg.experiment,
        "library_version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "trials": cfg.trials,
        "config": cfg,
        "outputs": outputs.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        "checks": outcome.checks,
        "warnings": outcome.warnings,
        "summary": outcome.summary,
    });
    sink.json("manifest.json", &manifest)?;
    Ok(RunReport {
        experiment: cfg.experiment,
        out_dir: sink.dir,
        outputs,
        checks: outcome.checks,
        warnings: outcome.warnings,
        summary: outcome.summary,
    })
}

/// Parity class of a code set: every order odd, every order even, or mixed.
pub fn parity_class(codes: &CodeSet) -> &'static str {
    let odd = codes.orders().iter().filter(|m| m.rem_euclid(2) == 1).count();
    if odd == codes.len() {
        "odd"
    } else if odd == 0 {
        "even"
    } else {
        "mixed"
    }
}

/// Envelopes of one code set decoded with synchronized, shorted channels.
#[derive(Debug, Clone)]
pub struct SetEnvelopes {
    pub params: SystemParams,
    pub aligned: bool,
    /// Desired envelope per receiver.
    pub desired: Vec<Waveform>,
    /// Coherent MAI (sum of all unmatched cascades) per receiver.
    pub mai: Vec<Waveform>,
    /// Phase-averaged MAI envelope `sqrt(Σ_k |h_ik|^2)` per receiver.
    pub mai_rss: Vec<Vec<f64>>,
    /// `|desired(2 tau0)|` per receiver, normalized.
    pub desired_peak: Vec<f64>,
}

impl SetEnvelopes {
    pub fn compute(cfg: &ExperimentConfig, codes: &CodeSet) -> Result<Self> {
        let (params, aligned) = cfg.system_for(cfg.system, codes.len())?;
        let bank = PhaserBank::new(&params, codes)?;
        let n = codes.len();
        let mut out = SetEnvelopes {
            params,
            aligned,
            desired: Vec::with_capacity(n),
            mai: Vec::with_capacity(n),
            mai_rss: Vec::with_capacity(n),
            desired_peak: Vec::with_capacity(n),
        };
        for rx in 0..n {
            let matched = bank.cascaded(rx, rx);
            out.desired_peak
                .push(matched.evaluate_at(2.0 * params.tau0).norm() / params.peak_norm());
            out.desired
                .push(phaser::normalize(&phaser::impulse_response(&matched), &params));
            let mut sum = Spectrum::zeros(bank.grid());
            let mut power = vec![0.0; bank.grid().len()];
            for tx in (0..n).filter(|&k| k != rx) {
                let h = bank.cascaded(rx, tx);
                sum.accumulate(&h)?;
                let w = phaser::normalize(&phaser::impulse_response(&h), &params);
                power.iter_mut().zip(&w.samples).for_each(|(p, v)| *p += v.norm_sqr());
            }
            out.mai.push(phaser::normalize(&phaser::impulse_response(&sum), &params));
            out.mai_rss.push(power.into_iter().map(f64::sqrt).collect());
        }
        Ok(out)
    }

    pub fn mai_peak_coherent(&self) -> f64 {
        self.mai.iter().map(|w| w.peak_envelope().1).fold(0.0, f64::max)
    }

    pub fn mai_peak_incoherent(&self) -> f64 {
        self.mai_rss.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Mean and min/max ratio of the coherent MAI envelope of receiver `rx`
    /// over `|t - 2 tau0| <= delta_tau / 2`.
    pub fn mai_plateau(&self, rx: usize) -> (f64, f64) {
        let p = &self.params;
        let w = &self.mai[rx];
        let env: Vec<f64> = (0..w.len())
            .filter(|&n| (w.time(n) - 2.0 * p.tau0).abs() <= 0.5 * p.delta_tau)
            .map(|n| w.samples[n].norm())
            .collect();
        let mean = env.iter().sum::<f64>() / env.len().max(1) as f64;
        let lo = env.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = env.iter().copied().fold(0.0, f64::max);
        (mean, if hi > 0.0 { lo / hi } else { 0.0 })
    }
}

fn waveform_sets(cfg: &ExperimentConfig) -> Result<Vec<CodeSet>> {
    if cfg.codes.is_some() || cfg.all_odd_n.is_some() {
        Ok(vec![cfg.code_set()?])
    } else {
        Ok(cfg.code_sets.clone())
    }
}

fn run_waveforms(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome> {
    const DELAY_POINTS: usize = 201;
    let sets = waveform_sets(cfg)?;
    let mut delays = sink.csv("delays.csv")?;
    delays.write_record(["set", "rx", "tx", "rx_code", "tx_code", "frequency_hz", "delay_s", "offset_norm"])?;
    let mut env = sink.csv("envelopes.csv")?;
    env.write_record(["set", "rx", "time_s", "s_abs", "x_abs", "x_rss", "z_abs"])?;
    let mut checks = Vec::new();
    let mut summaries = Vec::new();
    let mut by_class: Vec<(&'static str, f64)> = Vec::new();
    for (s, codes) in sets.iter().enumerate() {
        let e = SetEnvelopes::compute(cfg, codes)?;
        let p = e.params;
        let n = codes.len();
        let (f_lo, _) = p.band_edges();
        for rx in 0..n {
            for tx in 0..n {
                for j in 0..DELAY_POINTS {
                    let f = f_lo + (j as f64 + 0.5) / DELAY_POINTS as f64 * p.delta_f;
                    let d = cascaded_group_delay(codes.code(rx), codes.code(tx), &p, f)?;
                    delays.write_record([
                        s.to_string(),
                        rx.to_string(),
                        tx.to_string(),
                        codes.code(rx).order().to_string(),
                        codes.code(tx).order().to_string(),
                        num(f),
                        num(d),
                        num((d - 2.0 * p.tau0) / p.delta_tau),
                    ])?;
                }
            }
            let (s_w, x_w) = (&e.desired[rx], &e.mai[rx]);
            for k in 0..s_w.len() {
                let t = s_w.time(k);
                if (t - 2.0 * p.tau0).abs() > 2.0 * p.delta_tau {
                    continue;
                }
                let (sv, xv) = (s_w.samples[k], x_w.samples[k]);
                env.write_record([
                    s.to_string(),
                    rx.to_string(),
                    num(t),
                    num(sv.norm()),
                    num(xv.norm()),
                    num(e.mai_rss[rx][k]),
                    num((sv + xv).norm()),
                ])?;
            }
        }
        let class = parity_class(codes);
        let peak_err = e.desired_peak.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        checks.push(Check::new(
            &format!("set {s}: desired peak is 1"),
            peak_err < 1e-2,
            format!("max |peak - 1| = {peak_err:.3e}"),
        ));
        let mut summary = json!({
            "codes": codes.orders(),
            "class": class,
            "grid_aligned": e.aligned,
            "desired_peak": e.desired_peak,
            "mai_peak_coherent": e.mai_peak_coherent(),
            "mai_peak_incoherent": e.mai_peak_incoherent(),
        });
        if n == 1 {
            let peak = e.mai_peak_coherent();
            checks.push(Check::new(
                &format!("set {s}: single user has no MAI"),
                peak == 0.0,
                format!("MAI peak {peak:e}"),
            ));
        } else {
            by_class.push((class, e.mai_peak_incoherent()));
        }
        if n == 2 && codes.codes().iter().all(|c| c.is_linear()) {
            let expected = 1.0 / (2.0 * p.dsbp()).sqrt();
            let (mean, flatness) = e.mai_plateau(0);
            summary["mai_plateau"] = json!({"mean": mean, "min_over_max": flatness, "expected": expected});
            checks.push(Check::new(
                &format!("set {s}: linear pair gives a flat MAI plateau"),
                (mean / expected - 1.0).abs() < 0.1,
                format!("plateau mean {mean:.4}, expected {expected:.4}, min/max {flatness:.3}"),
            ));
        }
        summaries.push(summary);
    }
    delays.flush()?;
    env.flush()?;
    let find = |c: &str| by_class.iter().find(|(k, _)| *k == c).map(|(_, v)| *v);
    if let (Some(odd), Some(mixed), Some(even)) = (find("odd"), find("mixed"), find("even")) {
        checks.push(Check::new(
            "phase-averaged MAI peak ordering odd < mixed < even",
            odd < mixed && mixed < even,
            format!("odd {odd:.4}, mixed {mixed:.4}, even {even:.4}"),
        ));
    }
    let summary = json!({ "sets": summaries });
    sink.json("summary.json", &summary)?;
    Ok(Outcome {
        checks,
        warnings: Vec::new(),
        summary,
        gnuplot: "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'time (s)'\nset ylabel 'normalized envelope'\n\
                  plot 'envelopes.csv' using 3:($1==0 && $2==0 ? $4 : 1/0) with lines title 's', \\\n\
                  '' using 3:($1==0 && $2==0 ? $5 : 1/0) with lines title 'x', \\\n\
                  '' using 3:($1==0 && $2==0 ? $6 : 1/0) with lines title 'x rss'\n"
            .into(),
    })
}

fn run_mai_dist(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome> {
    let codes = cfg.code_set()?;
    let n = codes.len();
    let (params, aligned) = cfg.system_for(cfg.system, n)?;
    let ens = cfg.seeded_ensemble();
    let mut hist = sink.csv("histogram.csv")?;
    hist.write_record(["bin_low", "bin_high", "center", "count", "density", "gaussian_pdf"])?;
    let gnuplot = "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'normalized MAI'\n\
                   plot 'histogram.csv' using 3:5 with boxes title 'MAI', '' using 3:6 with lines title 'normal fit'\n"
        .to_string();
    if n == 1 {
        hist.flush()?;
        let warning = "no interferers: MAI is identically zero and the histogram is empty".to_string();
        let summary = json!({
            "codes": codes.orders(),
            "histogram": {"edges": [], "counts": []},
            "warning": warning,
        });
        sink.json("stats.json", &summary)?;
        return Ok(Outcome {
            checks: Vec::new(),
            warnings: vec![warning],
            summary,
            gnuplot,
        });
    }
    let sampler = MaiSampler::new(&params, &codes, &ens)?;
    let pooled = sampler.pooled_samples(cfg.trials)?;
    let per_rx = pooled
        .iter()
        .map(|s| mai_stats(s, 1))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<f64> = pooled.concat();
    let stats = mai_stats(&all, cfg.bins)?;
    let centers = stats.histogram.centers();
    let density = stats.histogram.density();
    for (b, &count) in stats.histogram.counts.iter().enumerate() {
        hist.write_record([
            num(stats.histogram.edges[b]),
            num(stats.histogram.edges[b + 1]),
            num(centers[b]),
            count.to_string(),
            num(density[b]),
            num(analysis::gaussian_pdf(centers[b], &stats)?),
        ])?;
    }
    hist.flush()?;
    let sir_i = per_rx.iter().map(sir_statistical).collect::<Result<Vec<_>>>()?;
    let bep = bep_from_sir(&sir_i, params.snr())?;
    let normality = if cfg.normality_samples > 0 {
        let samples = sampler.independent_samples(0, cfg.normality_samples)?;
        Some(normality_test(&samples, GOF_BINS, &codes)?)
    } else {
        None
    };
    let finite = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
    let summary = json!({
        "codes": codes.orders(),
        "grid_aligned": aligned,
        "sir": bep.sir_i,
        "sinr": bep.sinr_i,
        "snr": finite(params.snr()),
        "bep_i": bep.per_receiver,
        "bep_avg": bep.average,
        "eta": spectral_efficiency(n, &params),
        "sir_analytic": sir_analytic(&params, n, ens.mean_alpha_sq())?,
        "mu_hat": stats.mu_hat,
        "sigma_sq_hat": stats.sigma_sq_hat,
        "sigma_sq_hat_i": per_rx.iter().map(|s| s.sigma_sq_hat).collect::<Vec<_>>(),
        "n_samples": stats.n_samples,
        "histogram": stats.histogram,
        "normality": normality,
    });
    sink.json("stats.json", &summary)?;
    let checks = vec![
        Check::new(
            "MAI mean consistent with zero",
            stats.mean_consistent_with_zero(),
            format!("mu_hat {:.3e}, sigma_hat {:.3e}", stats.mu_hat, stats.sigma_hat()),
        ),
        Check::new(
            "enough pooled samples to report",
            stats.is_reportable(),
            format!("{} samples", stats.n_samples),
        ),
    ];
    Ok(Outcome {
        checks,
        warnings: Vec::new(),
        summary,
        gnuplot,
    })
}

fn run_bep_vs_n(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome> {
    let taus = if cfg.delta_tau_values.is_empty() {
        vec![cfg.system.delta_tau]
    } else {
        cfg.delta_tau_values.clone()
    };
    let bands = if cfg.delta_f_values.is_empty() {
        vec![cfg.system.delta_f]
    } else {
        cfg.delta_f_values.clone()
    };
    let mut ns = cfg.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    let ens = cfg.seeded_ensemble();
    let alpha_sq = ens.mean_alpha_sq();
    let snr = match cfg.snr_db {
        Some(db) => db_to_linear(db),
        None => cfg.system.snr(),
    };
    let mut w = sink.csv("bep_vs_n.csv")?;
    w.write_record([
        "n",
        "delta_tau_s",
        "delta_f_hz",
        "dsbp",
        "eta",
        "sir_analytic",
        "bep_analytic",
        "sir_statistical",
        "bep_statistical",
    ])?;
    let mut checks = Vec::new();
    let mut curves = Vec::new();
    for &dt in &taus {
        for &df in &bands {
            let base = SystemParams::new(cfg.system.f0, df, dt, 2).with_snr(snr);
            let mut analytic = Vec::new();
            let mut statistical = Vec::new();
            for &n in &ns {
                let (p, _) = cfg.system_for(base, n)?;
                let sir_a = sir_analytic(&p, n, alpha_sq)?;
                let bep_a = analytic_bep(&p, n, alpha_sq, snr)?;
                let stat = if cfg.trials > 0 {
                    Some(statistical_bep(&p, &all_odd_code_set(n)?, &ens, cfg.gain_realizations, cfg.trials)?)
                } else {
                    None
                };
                w.write_record([
                    n.to_string(),
                    num(dt),
                    num(df),
                    num(p.dsbp()),
                    num(spectral_efficiency(n, &p)),
                    num(sir_a),
                    num(bep_a),
                    opt_num(stat.as_ref().map(|s| s.sir_mean)),
                    opt_num(stat.as_ref().map(|s| s.bep)),
                ])?;
                analytic.push(bep_a);
                if let Some(s) = stat {
                    statistical.push(s.bep);
                }
            }
            let label = format!("delta_tau {dt:e} s, delta_f {df:e} Hz");
            checks.push(Check::new(
                &format!("{label}: analytic BEP nondecreasing in N"),
                analytic.windows(2).all(|v| v[1] >= v[0]),
                format!("{analytic:?}"),
            ));
            if !statistical.is_empty() {
                let first = statistical[0];
                checks.push(Check::new(
                    &format!("{label}: smallest N has the lowest statistical BEP"),
                    statistical.iter().all(|&b| b >= first),
                    format!("{statistical:?}"),
                ));
            }
            curves.push(json!({
                "delta_tau": dt,
                "delta_f": df,
                "n": ns,
                "bep_analytic": analytic,
                "bep_statistical": statistical,
            }));
        }
    }
    w.flush()?;
    Ok(Outcome {
        checks,
        warnings: Vec::new(),
        summary: json!({ "mean_alpha_sq": alpha_sq, "curves": curves }),
        gnuplot: "set datafile separator ','\nset key autotitle columnhead\nset logscale y\nset xlabel 'N'\nset ylabel 'BEP'\n\
                  plot 'bep_vs_n.csv' using 1:7 with linespoints title 'analytic', '' using 1:9 with points title 'statistical'\n"
            .into(),
    })
}

/// Normalized SNR in dB at which the analytic BEP of `n` users falls to
/// `target`, or `None` when the interference floor stays above it.
pub fn snr_db_for_bep(params: &SystemParams, n: usize, alpha_sq: f64, target: f64) -> Result<Option<f64>> {
    let bep_at = |db: f64| analytic_bep(params, n, alpha_sq, db_to_linear(db));
    if analytic_bep(params, n, alpha_sq, f64::INFINITY)? >= target {
        return Ok(None);
    }
    let (mut lo, mut hi) = (-50.0, 50.0);
    while bep_at(hi)? > target {
        hi += 50.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bep_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

fn run_bep_vs_snr(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome> {
    let alpha_sq = cfg.seeded_ensemble().mean_alpha_sq();
    let mut snrs = cfg.snr_db_values.clone();
    snrs.sort_by(f64::total_cmp);
    let mut w = sink.csv("bep_vs_snr.csv")?;
    w.write_record(["snr_db", "n", "sir", "sinr", "bep"])?;
    let mut checks = Vec::new();
    let mut per_n = Vec::new();
    for &n in &cfg.n_users_list {
        let p = cfg.system.with_users(n);
        let sir = sir_analytic(&p, n, alpha_sq)?;
        let mut curve = Vec::with_capacity(snrs.len());
        for &db in &snrs {
            let snr = db_to_linear(db);
            let bep = analytic_bep(&p, n, alpha_sq, snr)?;
            w.write_record([num(db), n.to_string(), num(sir), num(analysis::sinr(sir, snr)), num(bep)])?;
            curve.push(bep);
        }
        checks.push(Check::new(
            &format!("N = {n}: BEP nonincreasing in SNR"),
            curve.windows(2).all(|v| v[1] <= v[0]),
            format!("{} points", curve.len()),
        ));
        per_n.push(json!({
            "n": n,
            "sir": sir,
            "bep_floor": analytic_bep(&p, n, alpha_sq, f64::INFINITY)?,
            "snr_db_at_target": snr_db_for_bep(&p, n, alpha_sq, cfg.target_bep)?,
        }));
    }
    w.flush()?;
    Ok(Outcome {
        checks,
        warnings: Vec::new(),
        summary: json!({ "target_bep": cfg.target_bep, "mean_alpha_sq": alpha_sq, "curves": per_n }),
        gnuplot: "set datafile separator ','\nset key autotitle columnhead\nset logscale y\nset xlabel 'SNR (dB)'\nset ylabel 'BEP'\n\
                  plot 'bep_vs_snr.csv' using 1:($2==4 ? $5 : 1/0) with lines title 'N=4', \\\n\
                  '' using 1:($2==8 ? $5 : 1/0) with lines title 'N=8', '' using 1:($2==12 ? $5 : 1/0) with lines title 'N=12'\n"
            .into(),
    })
}

/// Result of the two-user DOOK demonstration.
#[derive(Debug, Clone)]
pub struct DemoTraces {
    pub params: SystemParams,
    /// NRZ data per user.
    pub nrz: Vec<Vec<bool>>,
    /// Pulse instants per user.
    pub instants: Vec<Vec<f64>>,
    /// Encoded, received, decoded and MAI waveforms, normalized.
    pub encoded: Vec<Waveform>,
    pub received: Waveform,
    pub decoded: Vec<Waveform>,
    pub mai: Vec<Waveform>,
    /// Smallest normalized desired peak over all pulses and receivers.
    pub desired_peak_min: f64,
    pub desired_peak_max: f64,
    /// Peak envelope power of the MAI, normalized.
    pub mai_pep: f64,
}

impl DemoTraces {
    /// Both users send random NRZ data through ideal (unit, zero-delay)
    /// channels, bit-synchronized.
    pub fn simulate(cfg: &ExperimentConfig) -> Result<Self> {
        let codes = cfg.code_set()?;
        let d = cfg.demo;
        let lead = 10.0 / cfg.system.delta_f;
        let base = cfg.system.with_window(
            lead + d.n_bits as f64 * d.bit_period + 2.0 * cfg.system.tau0 + cfg.system.delta_tau + lead,
        );
        let (params, _) = cfg.system_for(base, 2)?;
        let bank = PhaserBank::new(&params, &codes)?;
        let grid = bank.grid();
        let mut nrz = Vec::new();
        let mut instants = Vec::new();
        let mut trains = Vec::new();
        for k in 0..2 {
            let mut rng = trial_rng(cfg.seed, k as u64);
            let bits: Vec<bool> = (0..d.n_bits).map(|_| rng.random::<bool>()).collect();
            let t: Vec<f64> = dook_modulate(&bits, d.bit_period, d.xor_delay)?
                .into_iter()
                .map(|t| t + lead)
                .collect();
            trains.push(pulse_train_spectrum(&t, 1.0, grid));
            nrz.push(bits);
            instants.push(t);
        }
        let wave = |s: &Spectrum| phaser::normalize(&phaser::impulse_response(s), &params);
        let mut encoded_spec = Vec::new();
        for (k, train) in trains.iter().enumerate() {
            encoded_spec.push(phaser::apply(train, &bank.encoder(k))?);
        }
        let mut received_spec = Spectrum::zeros(grid);
        for e in &encoded_spec {
            received_spec.accumulate(e)?;
        }
        let (mut decoded, mut mai) = (Vec::new(), Vec::new());
        let (mut peak_min, mut peak_max, mut pep) = (f64::INFINITY, 0.0f64, 0.0f64);
        for rx in 0..2 {
            let desired = phaser::apply(&trains[rx], &bank.cascaded(rx, rx))?;
            let x = phaser::apply(&trains[1 - rx], &bank.cascaded(rx, 1 - rx))?;
            for &t in &instants[rx] {
                let v = desired.evaluate_at(t + 2.0 * params.tau0).norm() / params.peak_norm();
                peak_min = peak_min.min(v);
                peak_max = peak_max.max(v);
            }
            let mut total = desired.clone();
            total.accumulate(&x)?;
            let xw = wave(&x);
            pep = pep.max(xw.samples.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max));
            decoded.push(wave(&total));
            mai.push(xw);
        }
        if peak_max == 0.0 {
            return Err(DcmaError::InvalidArgument(
                "demo data produced no pulses; change the seed or n_bits".into(),
            ));
        }
        Ok(DemoTraces {
            params,
            nrz,
            instants,
            encoded: encoded_spec.iter().map(wave).collect(),
            received: wave(&received_spec),
            decoded,
            mai,
            desired_peak_min: peak_min,
            desired_peak_max: peak_max,
            mai_pep: pep,
        })
    }

    /// Desired peak power over MAI peak envelope power.
    pub fn peak_to_mai_ratio(&self) -> f64 {
        self.desired_peak_min * self.desired_peak_min / self.mai_pep
    }

    /// NRZ level of user `k` at time `t`.
    fn level(&self, k: usize, t: f64, lead: f64, bit_period: f64) -> bool {
        let l = ((t - lead) / bit_period).floor();
        l >= 0.0 && (l as usize) < self.nrz[k].len() && self.nrz[k][l as usize]
    }
}

fn run_demo_2x2(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome> {
    let demo = DemoTraces::simulate(cfg)?;
    let p = demo.params;
    let lead = 10.0 / p.delta_f;
    let intensity = |v: Complex64| num(v.norm_sqr());
    let mut w = sink.csv("traces.csv")?;
    w.write_record([
        "time_s", "nrz_0", "nrz_1", "encoded_0", "encoded_1", "received", "decoded_0", "decoded_1", "mai_0", "mai_1",
    ])?;
    for n in 0..demo.received.len() {
        let t = demo.received.time(n);
        w.write_record([
            num(t),
            u8::from(demo.level(0, t, lead, cfg.demo.bit_period)).to_string(),
            u8::from(demo.level(1, t, lead, cfg.demo.bit_period)).to_string(),
            intensity(demo.encoded[0].samples[n]),
            intensity(demo.encoded[1].samples[n]),
            intensity(demo.received.samples[n]),
            intensity(demo.decoded[0].samples[n]),
            intensity(demo.decoded[1].samples[n]),
            intensity(demo.mai[0].samples[n]),
            intensity(demo.mai[1].samples[n]),
        ])?;
    }
    w.flush()?;
    let ratio = demo.peak_to_mai_ratio();
    let sir_design = sir_analytic(&p, 2, 1.0)?;
    let summary = json!({
        "codes": cfg.code_set()?.orders(),
        "sir_design": sir_design,
        "sir_design_db": 10.0 * sir_design.log10(),
        "desired_peak_min": demo.desired_peak_min,
        "desired_peak_max": demo.desired_peak_max,
        "mai_pep": demo.mai_pep,
        "peak_to_mai_pep_ratio": ratio,
        "pulses": demo.instants.iter().map(Vec::len).collect::<Vec<_>>(),
    });
    sink.json("summary.json", &summary)?;
    let checks = vec![
        Check::new(
            "decoded desired peak is 1",
            (demo.desired_peak_min - 1.0).abs() < 0.05 && (demo.desired_peak_max - 1.0).abs() < 0.05,
            format!("range [{:.4}, {:.4}]", demo.desired_peak_min, demo.desired_peak_max),
        ),
        Check::new(
            "peak to MAI PEP ratio at least 5",
            ratio >= 5.0,
            format!("ratio {ratio:.3}"),
        ),
    ];
    Ok(Outcome {
        checks,
        warnings: Vec::new(),
        summary,
        gnuplot: "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'time (s)'\nset ylabel 'normalized intensity'\n\
                  plot 'traces.csv' using 1:7 with lines, '' using 1:9 with lines\n"
            .into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_merges_over_defaults() {
        let cfg = ExperimentConfig::from_json_str(
            Some(Experiment::MaiDist),
            r#"{"trials": 150, "system": {"delta_f": 5e9}, "codes": [3, -3, 19, -19]}"#,
        )
        .unwrap();
        assert_eq!(cfg.trials, 150);
        assert_eq!(cfg.system.delta_f, 5e9);
        assert_eq!(cfg.system.f0, 10e9);
        assert_eq!(cfg.code_set().unwrap().orders(), vec![3, -3, 19, -19]);
    }

    #[test]
    fn experiment_named_in_file() {
        let cfg = ExperimentConfig::from_json_str(None, r#"{"experiment": "bep-vs-snr"}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::defaults(Experiment::BepVsSnr));
        assert!(ExperimentConfig::from_json_str(Some(Experiment::Waveforms), r#"{"experiment": "bep-vs-snr"}"#).is_err());
        assert!(ExperimentConfig::from_json_str(None, "{}").is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json_str(Some(Experiment::MaiDist), r#"{"trails": 3}"#).is_err());
        assert!(ExperimentConfig::from_json_str(Some(Experiment::MaiDist), r#"{"system": {"f_0": 3}}"#).is_err());
        assert!(ExperimentConfig::from_json_str(Some(Experiment::MaiDist), "[1]").is_err());
    }

    #[test]
    fn every_default_validates_and_round_trips() {
        for e in Experiment::ALL {
            let cfg = ExperimentConfig::defaults(e);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json_str(None, &cfg.to_json().unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn out_dir_precedence() {
        let mut cfg = ExperimentConfig::defaults(Experiment::BepVsSnr);
        assert_eq!(resolve_out_dir(Some(Path::new("a")), &cfg), PathBuf::from("a"));
        cfg.output = Some("b".into());
        assert_eq!(resolve_out_dir(None, &cfg), PathBuf::from("b"));
        assert_eq!(resolve_out_dir(Some(Path::new("a")), &cfg), PathBuf::from("a"));
    }

    #[test]
    fn parity_classes() {
        assert_eq!(parity_class(&CodeSet::new(&[1, -1, 3, -3]).unwrap()), "odd");
        assert_eq!(parity_class(&CodeSet::new(&[2, -2, 4]).unwrap()), "even");
        assert_eq!(parity_class(&CodeSet::new(&[1, 2, 3, 4]).unwrap()), "mixed");
    }

    #[test]
    fn snr_for_target_bep() {
        let p = SystemParams::new(10e9, 10e9, 10e-9, 4);
        let db = snr_db_for_bep(&p, 4, 1.0, 1e-3).unwrap().unwrap();
        let bep = analytic_bep(&p, 4, 1.0, db_to_linear(db)).unwrap();
        assert!((bep / 1e-3 - 1.0).abs() < 1e-9);
        assert_eq!(snr_db_for_bep(&p, 12, 1.0, 1e-3).unwrap(), None);
    }

    #[test]
    fn single_user_waveform_is_a_lone_sinc() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Waveforms);
        cfg.system = SystemParams::new(10e9, 10e9, 1e-9, 1);
        let e = SetEnvelopes::compute(&cfg, &CodeSet::new(&[3]).unwrap()).unwrap();
        assert!(e.aligned);
        assert!((e.desired_peak[0] - 1.0).abs() < 1e-9);
        assert_eq!(e.mai_peak_coherent(), 0.0);
    }

    #[test]
    fn demo_is_deterministic_in_the_seed() {
        let cfg = ExperimentConfig::defaults(Experiment::Demo2x2);
        let a = DemoTraces::simulate(&cfg).unwrap();
        let b = DemoTraces::simulate(&cfg).unwrap();
        assert_eq!(a.nrz, b.nrz);
        assert_eq!(a.mai_pep, b.mai_pep);
        let other = ExperimentConfig { seed: 2, ..cfg };
        assert_ne!(DemoTraces::simulate(&other).unwrap().nrz, a.nrz);
    }
}
