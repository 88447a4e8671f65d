//! MAI statistics invariants over several code sets and parameter sweeps.

use dcma::analysis::{mai_stats, sir_analytic, sir_statistical};
use dcma::coding::all_odd_code_set;
use dcma::{ChannelEnsembleParams, CodeSet, MaiSampler, SystemParams};

fn pooled_sir(params: SystemParams, codes: &CodeSet, seed: u64) -> (f64, dcma::MaiStats) {
    let ens = ChannelEnsembleParams::default().with_seed(seed);
    let sampler = MaiSampler::new(&params, codes, &ens).unwrap();
    let stats = mai_stats(&sampler.pooled_samples(100).unwrap().concat(), 1).unwrap();
    (sir_statistical(&stats).unwrap(), stats)
}

#[test]
fn mai_is_zero_mean_for_every_code_set() {
    let base = SystemParams::new(10e9, 10e9, 5e-9, 2).aligned().unwrap();
    for orders in [vec![3, -3], vec![1, -1], vec![2, -2, 4, -4], vec![1, 2, 3, 4], vec![3, -3, 19, -19]] {
        let codes = CodeSet::new(&orders).unwrap();
        let (_, stats) = pooled_sir(base.with_users(codes.len()), &codes, 4);
        assert!(
            stats.mean_consistent_with_zero(),
            "{orders:?}: mu {:e}, sigma {:e}, n {}",
            stats.mu_hat,
            stats.sigma_hat(),
            stats.n_samples
        );
    }
}

#[test]
fn statistical_sir_scales_linearly_with_delay_swing() {
    let codes = CodeSet::new(&[3, -3]).unwrap();
    let sir = |dt: f64| pooled_sir(SystemParams::new(10e9, 10e9, dt, 2).aligned().unwrap(), &codes, 2).0;
    let (lo, hi) = (sir(2.5e-9), sir(10e-9));
    assert!((hi / lo / 4.0 - 1.0).abs() < 0.15, "ratio {}", hi / lo);
}

#[test]
fn statistical_sir_scales_linearly_with_bandwidth() {
    let codes = CodeSet::new(&[3, -3]).unwrap();
    let sir = |df: f64| pooled_sir(SystemParams::new(10e9, df, 5e-9, 2).aligned().unwrap(), &codes, 3).0;
    let (lo, hi) = (sir(2.5e9), sir(10e9));
    assert!((hi / lo / 4.0 - 1.0).abs() < 0.15, "ratio {}", hi / lo);
}

#[test]
fn analytic_sir_tracks_statistical_sir_for_all_odd_sets() {
    for n in [2, 4, 6] {
        let codes = all_odd_code_set(n).unwrap();
        let p = SystemParams::new(10e9, 10e9, 5e-9, n).aligned().unwrap();
        let (stat, _) = pooled_sir(p, &codes, 6);
        let ana = sir_analytic(&p, n, 1.0).unwrap();
        assert!((stat / ana - 1.0).abs() < 0.2, "N = {n}: statistical {stat}, analytic {ana}");
    }
}

#[test]
fn pooled_samples_are_seed_deterministic() {
    let codes = CodeSet::new(&[3, -3, 5, -5]).unwrap();
    let p = SystemParams::new(10e9, 10e9, 2e-9, 4).aligned().unwrap();
    let ens = ChannelEnsembleParams::default().with_gains(0.06, 0.14).with_seed(12);
    let a = MaiSampler::new(&p, &codes, &ens).unwrap().pooled_samples(100).unwrap();
    let b = MaiSampler::new(&p, &codes, &ens).unwrap().pooled_samples(100).unwrap();
    assert_eq!(a, b);
    let c = MaiSampler::new(&p, &codes, &ens.with_seed(13)).unwrap().pooled_samples(100).unwrap();
    assert_ne!(a, c);
}
