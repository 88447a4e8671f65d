//! Chebyshev dispersion codes.
//!
//! A code of order `m` assigns the encoding phaser the group delay
//! `tau0 + (delta_tau/2) T_m(x)` and the decoding phaser
//! `tau0 - (delta_tau/2) T_m(x)`, where `x` maps the passband onto `[-1, 1]`.
//! Negative orders denote the conjugate polynomial, `T_{-m} = -T_m`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DcmaError, Result};
use crate::sysconfig::SystemParams;

/// Slack allowed on `|x| <= 1` before a domain error is raised.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Which end of a link a phaser sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Tx,
    Rx,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Tx => 1.0,
            Side::Rx => -1.0,
        }
    }
}

/// Signed nonzero Chebyshev order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct ChebyshevCode(i32);

impl ChebyshevCode {
    pub fn new(order: i32) -> Result<Self> {
        if order == 0 {
            return Err(DcmaError::InvalidArgument(
                "Chebyshev order must be nonzero".into(),
            ));
        }
        Ok(ChebyshevCode(order))
    }

    pub fn order(self) -> i32 {
        self.0
    }

    /// The phase-conjugated code, `-m`.
    pub fn conjugate(self) -> Self {
        ChebyshevCode(-self.0)
    }

    /// Orders `±1` give a linear cascaded delay whose MAI is not Gaussian.
    pub fn is_linear(self) -> bool {
        self.0.abs() == 1
    }

    /// `T_m(x)` with the sign convention for negative orders.
    pub fn eval(self, x: f64) -> Result<f64> {
        cheb_eval(self.0, x)
    }
}

impl TryFrom<i32> for ChebyshevCode {
    type Error = DcmaError;
    fn try_from(v: i32) -> Result<Self> {
        ChebyshevCode::new(v)
    }
}

impl From<ChebyshevCode> for i32 {
    fn from(c: ChebyshevCode) -> i32 {
        c.0
    }
}

impl fmt::Display for ChebyshevCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered code assignment `[m_1, ..., m_N]`; user `i` encodes with `m_i`
/// and decodes with `-m_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i32>", into = "Vec<i32>")]
pub struct CodeSet(Vec<ChebyshevCode>);

impl CodeSet {
    /// Orders must be nonzero and pairwise distinct.
    pub fn new(orders: &[i32]) -> Result<Self> {
        if orders.is_empty() {
            return Err(DcmaError::InvalidArgument("empty code set".into()));
        }
        let codes = orders
            .iter()
            .map(|&m| ChebyshevCode::new(m))
            .collect::<Result<Vec<_>>>()?;
        for (i, a) in orders.iter().enumerate() {
            if orders[i + 1..].contains(a) {
                return Err(DcmaError::InvalidArgument(format!(
                    "order {a} assigned to more than one user"
                )));
            }
        }
        Ok(CodeSet(codes))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn codes(&self) -> &[ChebyshevCode] {
        &self.0
    }

    pub fn code(&self, user: usize) -> ChebyshevCode {
        self.0[user]
    }

    pub fn orders(&self) -> Vec<i32> {
        self.0.iter().map(|c| c.0).collect()
    }

    pub fn contains_linear(&self) -> bool {
        self.0.iter().any(|c| c.is_linear())
    }
}

impl TryFrom<Vec<i32>> for CodeSet {
    type Error = DcmaError;
    fn try_from(v: Vec<i32>) -> Result<Self> {
        CodeSet::new(&v)
    }
}

impl From<CodeSet> for Vec<i32> {
    fn from(c: CodeSet) -> Vec<i32> {
        c.orders()
    }
}

/// `sign(m) T_|m|(x)` evaluated as `cos(|m| arccos x)`.
pub fn cheb_eval(m: i32, x: f64) -> Result<f64> {
    let x = clamp_unit(x)?;
    let t = (m.unsigned_abs() as f64 * x.acos()).cos();
    Ok(if m < 0 { -t } else { t })
}

fn clamp_unit(x: f64) -> Result<f64> {
    if x.is_nan() || x.abs() > 1.0 + DOMAIN_SLACK {
        return Err(DcmaError::Domain {
            value: x,
            domain: "[-1, 1]".into(),
        });
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// `∫_{-1}^{x} T_m(u) du` in closed form.
pub fn cheb_antiderivative(m: i32, x: f64) -> Result<f64> {
    let x = clamp_unit(x)?;
    let n = m.unsigned_abs() as i32;
    let primitive = |u: f64| -> f64 {
        if n == 1 {
            0.5 * u * u
        } else {
            let t = |k: i32, u: f64| (k as f64 * u.acos()).cos();
            0.5 * (t(n + 1, u) / (n + 1) as f64 - t(n - 1, u) / (n - 1) as f64)
        }
    };
    let v = primitive(x) - primitive(-1.0);
    Ok(if m < 0 { -v } else { v })
}

/// Maps an in-band frequency onto the Chebyshev argument `x ∈ [-1, 1]`.
pub fn band_coordinate(params: &SystemParams, f: f64) -> Result<f64> {
    let x = (f - params.f0) / (params.delta_f / 2.0);
    if x.is_nan() || x.abs() > 1.0 + DOMAIN_SLACK {
        let (lo, hi) = params.band_edges();
        return Err(DcmaError::Domain {
            value: f,
            domain: format!("[{lo}, {hi}] Hz"),
        });
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Deviation of the encoding delay from `tau0`: `(delta_tau/2) T_m(x)`.
pub fn delay_deviation(code: ChebyshevCode, params: &SystemParams, f: f64) -> Result<f64> {
    let x = band_coordinate(params, f)?;
    Ok(0.5 * params.delta_tau * code.eval(x)?)
}

/// Group delay of the encoding (TX) or decoding (RX) phaser at `f`.
pub fn group_delay(code: ChebyshevCode, side: Side, params: &SystemParams, f: f64) -> Result<f64> {
    Ok(params.tau0 + side.sign() * delay_deviation(code, params, f)?)
}

/// Dispersive phase `φ(ω) = -∫_{ω0-Δω/2}^{ω} τ_m(ω') dω'` of the TX phaser,
/// negated for RX. Excludes the linear `-ω tau0` term.
pub fn phase(code: ChebyshevCode, side: Side, params: &SystemParams, f: f64) -> Result<f64> {
    let x = band_coordinate(params, f)?;
    let half_dw = PI * params.delta_f;
    let tx = -0.5 * params.delta_tau * half_dw * cheb_antiderivative(code.order(), x)?;
    Ok(side.sign() * tx)
}

/// Delay through TX phaser `tx_code` followed by RX phaser of `rx_code`:
/// `2 tau0 + tau_k(f) - tau_i(f)`.
pub fn cascaded_group_delay(
    rx_code: ChebyshevCode,
    tx_code: ChebyshevCode,
    params: &SystemParams,
    f: f64,
) -> Result<f64> {
    Ok(group_delay(tx_code, Side::Tx, params, f)? + group_delay(rx_code, Side::Rx, params, f)?)
}

/// Extremes of the cascaded delay deviation `(delta_tau/2)(T_k - T_i)` over
/// the band, as `(min, max)` relative to `2 tau0`.
pub fn cascaded_delay_extremes(
    rx_code: ChebyshevCode,
    tx_code: ChebyshevCode,
    params: &SystemParams,
) -> (f64, f64) {
    if rx_code == tx_code {
        return (0.0, 0.0);
    }
    // Uniform in θ = arccos x resolves every Chebyshev extremum.
    let n = 4000 * (rx_code.order().unsigned_abs() + tx_code.order().unsigned_abs()) as usize;
    let (mi, mk) = (rx_code.order(), tx_code.order());
    let signed = |m: i32, theta: f64| {
        let t = (m.unsigned_abs() as f64 * theta).cos();
        if m < 0 {
            -t
        } else {
            t
        }
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..=n {
        let theta = PI * j as f64 / n as f64;
        let d = signed(mk, theta) - signed(mi, theta);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (0.5 * params.delta_tau * lo, 0.5 * params.delta_tau * hi)
}

/// `max - min` of the cascaded group delay over the band; at most `2 delta_tau`.
pub fn delay_swing(rx_code: ChebyshevCode, tx_code: ChebyshevCode, params: &SystemParams) -> f64 {
    let (lo, hi) = cascaded_delay_extremes(rx_code, tx_code, params);
    hi - lo
}

/// All-odd code set `[3, -3, 5, -5, ...]` of `n` users, excluding `±1`.
pub fn all_odd_code_set(n: usize) -> Result<CodeSet> {
    if n < 2 {
        return Err(DcmaError::InvalidArgument(format!(
            "all-odd code set needs n >= 2, got {n}"
        )));
    }
    let orders: Vec<i32> = (0..n)
        .map(|j| {
            let m = 3 + 2 * (j / 2) as i32;
            if j % 2 == 0 {
                m
            } else {
                -m
            }
        })
        .collect();
    CodeSet::new(&orders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> SystemParams {
        SystemParams::new(10e9, 4e9, 1e-9, 4)
    }

    /// Clenshaw recurrence for `T_m(x)`, independent of the trigonometric path.
    fn clenshaw(m: u32, x: f64) -> f64 {
        let (mut b1, mut b2) = (0.0, 0.0);
        for k in (1..=m).rev() {
            let c = if k == m { 1.0 } else { 0.0 };
            let b0 = c + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        let c0 = if m == 0 { 1.0 } else { 0.0 };
        c0 + x * b1 - b2
    }

    fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n).map(|j| f(a + j as f64 * h)).sum();
        h * (0.5 * (f(a) + f(b)) + inner)
    }

    #[test]
    fn low_order_values() {
        assert!((cheb_eval(2, 0.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((cheb_eval(3, 0.5).unwrap() + 1.0).abs() < 1e-15);
        assert!((cheb_eval(-3, 0.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_19_matches_clenshaw() {
        let t = cheb_eval(19, 0.3).unwrap();
        let oracle = clenshaw(19, 0.3);
        assert!((t - oracle).abs() < 1e-12, "{t} vs {oracle}");
        // Frozen from numpy.polynomial.chebyshev.chebval.
        assert!((t - 0.474_173_351_255_527).abs() < 1e-12, "{t}");
    }

    #[test]
    fn domain_errors() {
        assert!(cheb_eval(2, 1.0 + 1e-13).is_ok());
        assert!(matches!(cheb_eval(2, 1.001), Err(DcmaError::Domain { .. })));
        assert!(cheb_eval(2, f64::NAN).is_err());
        let p = params();
        assert!(group_delay(ChebyshevCode::new(1).unwrap(), Side::Tx, &p, 13e9).is_err());
        assert!(phase(ChebyshevCode::new(1).unwrap(), Side::Tx, &p, 7e9).is_err());
    }

    #[test]
    fn zero_order_rejected() {
        assert!(ChebyshevCode::new(0).is_err());
        assert!(CodeSet::new(&[1, 0]).is_err());
    }

    #[test]
    fn group_delay_examples() {
        let p = params();
        let c1 = ChebyshevCode::new(1).unwrap();
        let c2 = ChebyshevCode::new(2).unwrap();
        assert_eq!(group_delay(c1, Side::Tx, &p, p.f0).unwrap(), p.tau0);
        let lo = p.f0 - p.delta_f / 2.0;
        assert!(
            (group_delay(c2, Side::Tx, &p, lo).unwrap() - (p.tau0 + p.delta_tau / 2.0)).abs()
                < 1e-24
        );
        for f in [8e9, 9.3e9, 10e9, 11.7e9, 12e9] {
            let s = group_delay(c2, Side::Tx, &p, f).unwrap() + group_delay(c2, Side::Rx, &p, f).unwrap();
            assert!((s - 2.0 * p.tau0).abs() < 1e-24);
        }
    }

    #[test]
    fn phase_vanishes_at_band_start() {
        let p = params();
        let lo = p.f0 - p.delta_f / 2.0;
        for m in [-7, -1, 1, 2, 3, 19] {
            let c = ChebyshevCode::new(m).unwrap();
            assert_eq!(phase(c, Side::Tx, &p, lo).unwrap(), 0.0);
        }
    }

    #[test]
    fn phase_at_band_end_matches_quadrature() {
        let p = params();
        let hi = p.f0 + p.delta_f / 2.0;
        let scale = -(p.delta_tau / 2.0) * (PI * p.delta_f);
        // Trapezoid oracle for ∫_{-1}^{1} T_m.
        let q1 = trapezoid(|x| clenshaw(1, x), -1.0, 1.0, 200_000);
        let q2 = trapezoid(|x| clenshaw(2, x), -1.0, 1.0, 200_000);
        assert!(q1.abs() < 1e-12);
        assert!((q2 + 2.0 / 3.0).abs() < 1e-9);
        let p1 = phase(ChebyshevCode::new(1).unwrap(), Side::Tx, &p, hi).unwrap();
        let p2 = phase(ChebyshevCode::new(2).unwrap(), Side::Tx, &p, hi).unwrap();
        assert!(p1.abs() < 1e-9);
        assert!((p2 - scale * q2).abs() < 1e-8 * (scale * q2).abs());
    }

    #[test]
    fn antiderivative_matches_quadrature_for_many_orders() {
        for m in [-11i32, -4, -1, 1, 2, 3, 5, 8, 19] {
            for x in [-0.9, -0.3, 0.0, 0.41, 1.0] {
                let oracle = trapezoid(
                    |u| (m.signum() as f64) * clenshaw(m.unsigned_abs(), u),
                    -1.0,
                    x,
                    100_000,
                );
                let v = cheb_antiderivative(m, x).unwrap();
                assert!((v - oracle).abs() < 1e-7, "m={m} x={x}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn cascaded_delay_examples() {
        let p = params();
        let c = |m| ChebyshevCode::new(m).unwrap();
        for f in [8e9, 9e9, 10e9, 11e9, 12e9] {
            assert!((cascaded_group_delay(c(3), c(3), &p, f).unwrap() - 2.0 * p.tau0).abs() < 1e-24);
        }
        // (m_i = 1, m_k = -1): 2 tau0 - delta_tau x.
        let lo = cascaded_group_delay(c(1), c(-1), &p, 8e9).unwrap();
        let hi = cascaded_group_delay(c(1), c(-1), &p, 12e9).unwrap();
        assert!((lo - (2.0 * p.tau0 + p.delta_tau)).abs() < 1e-22);
        assert!((hi - (2.0 * p.tau0 - p.delta_tau)).abs() < 1e-22);
    }

    #[test]
    fn swing_examples() {
        let p = params();
        let c = |m| ChebyshevCode::new(m).unwrap();
        assert_eq!(delay_swing(c(5), c(5), &p), 0.0);
        assert!((delay_swing(c(1), c(-1), &p) - 2.0 * p.delta_tau).abs() < 1e-20);
        assert!((delay_swing(c(3), c(-3), &p) - 2.0 * p.delta_tau).abs() < 1e-20);
        // Dense x-grid oracle for (3, 19).
        let n = 100_000;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..=n {
            let x = -1.0 + 2.0 * j as f64 / n as f64;
            let d = 0.5 * p.delta_tau * (clenshaw(19, x) - clenshaw(3, x));
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let s = delay_swing(c(3), c(19), &p);
        assert!(s <= 2.0 * p.delta_tau + 1e-24);
        assert!(s >= hi - lo - 1e-15);
        assert!((s - (hi - lo)).abs() < 1e-3 * p.delta_tau);
    }

    #[test]
    fn all_odd_sets() {
        assert_eq!(all_odd_code_set(4).unwrap().orders(), vec![3, -3, 5, -5]);
        assert_eq!(all_odd_code_set(2).unwrap().orders(), vec![3, -3]);
        assert_eq!(all_odd_code_set(3).unwrap().orders(), vec![3, -3, 5]);
        assert!(all_odd_code_set(1).is_err());
        for n in 2..=64 {
            let s = all_odd_code_set(n).unwrap();
            assert_eq!(s.len(), n);
            assert!(!s.contains_linear());
            assert!(s.orders().iter().all(|m| m % 2 != 0));
            let last = *s.orders().last().unwrap();
            if n % 2 == 1 {
                assert_eq!(last, n as i32 + 2);
            } else {
                assert_eq!(last, -(n as i32 + 1));
            }
        }
    }

    #[test]
    fn code_set_validation_and_json() {
        assert!(CodeSet::new(&[3, 3]).is_err());
        // Conjugate pairs between users are how the all-odd family is laid out.
        let s = CodeSet::new(&[3, -3, 19, -19]).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, "[3,-3,19,-19]");
        assert_eq!(serde_json::from_str::<CodeSet>(&j).unwrap(), s);
        assert!(serde_json::from_str::<CodeSet>("[1,0]").is_err());
    }

    proptest! {
        #[test]
        fn bounded(m in -25i32..=25, x in -1.0f64..=1.0) {
            prop_assume!(m != 0);
            let t = cheb_eval(m, x).unwrap();
            prop_assert!(t.abs() <= 1.0);
            prop_assert!((t - m.signum() as f64 * clenshaw(m.unsigned_abs(), x)).abs() < 1e-9);
        }

        #[test]
        fn conjugate_sum_identity(m in -25i32..=25, u in 0.0f64..=1.0) {
            prop_assume!(m != 0);
            let p = params();
            let f = p.f0 - p.delta_f / 2.0 + u * p.delta_f;
            let c = ChebyshevCode::new(m).unwrap();
            let dsum = group_delay(c, Side::Tx, &p, f).unwrap() + group_delay(c, Side::Rx, &p, f).unwrap();
            prop_assert!((dsum - 2.0 * p.tau0).abs() <= 4.0 * f64::EPSILON * p.tau0);
            let psum = phase(c, Side::Tx, &p, f).unwrap() + phase(c, Side::Rx, &p, f).unwrap();
            prop_assert_eq!(psum, 0.0);
        }

        #[test]
        fn phase_derivative_is_minus_delay(m in -25i32..=25, u in 0.01f64..=0.99) {
            prop_assume!(m != 0);
            let p = params();
            let c = ChebyshevCode::new(m).unwrap();
            let f = p.f0 - p.delta_f / 2.0 + u * p.delta_f;
            let df = 1e-6 * p.delta_f;
            let dphi = phase(c, Side::Tx, &p, f + df).unwrap() - phase(c, Side::Tx, &p, f - df).unwrap();
            let deriv = dphi / (2.0 * PI * 2.0 * df);
            let dev = delay_deviation(c, &p, f).unwrap();
            prop_assert!((-deriv - dev).abs() < 1e-3 * p.delta_tau, "{} vs {}", -deriv, dev);
        }
    }
}
