//! State reconstruction from a learned time-derivative field.
//!
//! First order: `u(x,t) = u0(x) + int_0^t v(x,s) ds`.
//! Second order (Cauchy kernel):
//! `u(x,t) = u0(x) + v0(x) t + int_0^t (t - tau) a(x,tau) dtau`,
//! with the companion velocity `v(x,t) = v0(x) + int_0^t a(x,tau) dtau`.
//!
//! Integrals use the composite trapezoid rule on `K = max(1, ceil(M t))`
//! uniform subintervals of `[0, t]`. Spatial partials are summed under the
//! integral sign with the same weights. Time partials of the result come
//! from the Leibniz rule, so `d/dt` of the first-order reconstruction is
//! exactly the integrand at `s = t`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{Channels, Jet2, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VolterraError {
    #[error("query time {t} outside [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },
    #[error("m_per_unit_time must be at least 1")]
    InvalidConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub m_per_unit_time: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { m_per_unit_time: 10 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), VolterraError> {
        if self.m_per_unit_time == 0 {
            Err(VolterraError::InvalidConfig)
        } else {
            Ok(())
        }
    }

    /// Number of trapezoid subintervals used on `[0, t]`.
    pub fn subintervals(&self, t: f64) -> usize {
        // the 1e-9 guard keeps e.g. 10 * 0.3 from rounding up to 4 panels
        let k = (self.m_per_unit_time as f64 * t - 1e-9).ceil();
        if k < 1.0 {
            1
        } else {
            k as usize
        }
    }
}

/// Trapezoid nodes and weights on `[0, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

pub fn quadrature_nodes(t: f64, q: &QuadratureConfig) -> QuadratureRule {
    let k = q.subintervals(t);
    trapezoid_rule(t, k)
}

/// Uniform trapezoid rule with `k` panels; the last node is `t` exactly.
pub fn trapezoid_rule(t: f64, k: usize) -> QuadratureRule {
    let k = k.max(1);
    let h = t / k as f64;
    let mut nodes: Vec<f64> = (0..k).map(|m| m as f64 * h).collect();
    nodes.push(t);
    let mut weights = vec![h; k + 1];
    weights[0] = 0.5 * h;
    weights[k] = 0.5 * h;
    QuadratureRule { nodes, weights }
}

/// First-order reconstruction result.
#[derive(Clone, Copy, Debug)]
pub struct Reconstruction<S> {
    /// Reconstructed state with all channels.
    pub state: Jet2<S>,
    /// The integrand evaluated at `s = t`.
    pub rate: Jet2<S>,
}

/// Second-order reconstruction result.
#[derive(Clone, Copy, Debug)]
pub struct Reconstruction2<S> {
    pub state: Jet2<S>,
    pub rate: Jet2<S>,
    /// The acceleration field at `tau = t`.
    pub accel: Jet2<S>,
}

fn check_time<E: From<VolterraError>>(t: f64, horizon: f64, q: &QuadratureConfig) -> Result<(), E> {
    q.validate()?;
    if !(0.0..=horizon).contains(&t) || t.is_nan() {
        return Err(VolterraError::Domain { t, horizon }.into());
    }
    Ok(())
}

/// Trapezoidal Volterra reconstruction at one `(x, t)`.
///
/// `v(s, ch)` evaluates the derivative field at the fixed `x` and time `s`.
/// Interior nodes are requested with `node_ch`; the endpoint `s = t` is
/// requested with `node_ch ∪ end_ch` and returned as `rate`. `u0` is the
/// initial state at `x` with its spatial channels.
pub fn reconstruct1<S, E, F>(
    mut v: F,
    u0: Jet2<S>,
    t: f64,
    horizon: f64,
    q: &QuadratureConfig,
    node_ch: Channels,
    end_ch: Channels,
) -> Result<Reconstruction<S>, E>
where
    S: Scalar,
    E: From<VolterraError>,
    F: FnMut(f64, Channels) -> Result<Jet2<S>, E>,
{
    check_time::<E>(t, horizon, q)?;
    let end_ch = end_ch.union(node_ch);
    if t == 0.0 {
        let rate = v(0.0, end_ch)?;
        return Ok(Reconstruction {
            state: leibniz1(u0, &rate),
            rate,
        });
    }
    let rule = quadrature_nodes(t, q);
    let k = rule.len() - 1;
    let mut acc = u0;
    for m in 0..k {
        let vm = v(rule.nodes[m], node_ch)?;
        acc = accumulate(acc, &vm, rule.weights[m]);
    }
    let rate = v(rule.nodes[k], end_ch)?;
    acc = accumulate(acc, &rate, rule.weights[k]);
    Ok(Reconstruction {
        state: leibniz1(acc, &rate),
        rate,
    })
}

/// Cauchy-kernel reconstruction for second-order-in-time problems.
pub fn reconstruct2<S, E, F>(
    mut a: F,
    u0: Jet2<S>,
    v0: Jet2<S>,
    t: f64,
    horizon: f64,
    q: &QuadratureConfig,
    node_ch: Channels,
    end_ch: Channels,
) -> Result<Reconstruction2<S>, E>
where
    S: Scalar,
    E: From<VolterraError>,
    F: FnMut(f64, Channels) -> Result<Jet2<S>, E>,
{
    check_time::<E>(t, horizon, q)?;
    let end_ch = end_ch.union(node_ch);
    // u = u0 + v0 t + sum w (t - tau) a,   v = v0 + sum w a
    let mut u_acc = u0 + v0.scale(t);
    let mut v_acc = v0;
    let accel;
    if t == 0.0 {
        accel = a(0.0, end_ch)?;
    } else {
        let rule = quadrature_nodes(t, q);
        let k = rule.len() - 1;
        for m in 0..k {
            let am = a(rule.nodes[m], node_ch)?;
            let w = rule.weights[m];
            u_acc = accumulate(u_acc, &am, w * (t - rule.nodes[m]));
            v_acc = accumulate(v_acc, &am, w);
        }
        // the kernel vanishes at tau = t, so the endpoint only feeds v
        let ak = a(rule.nodes[k], end_ch)?;
        v_acc = accumulate(v_acc, &ak, rule.weights[k]);
        accel = ak;
    }
    let rate = Jet2 {
        d_t: accel.value,
        d_xt: accel.d_x,
        d_tt: accel.d_t,
        ..v_acc
    };
    let state = Jet2 {
        d_t: rate.value,
        d_xt: rate.d_x,
        d_tt: accel.value,
        ..u_acc
    };
    Ok(Reconstruction2 { state, rate, accel })
}

/// Adds `w * (value, d_x, d_xx)` of `f` to the spatial channels of `acc`.
fn accumulate<S: Scalar>(acc: Jet2<S>, f: &Jet2<S>, w: f64) -> Jet2<S> {
    Jet2 {
        value: acc.value + f.value.scale(w),
        d_x: acc.d_x + f.d_x.scale(w),
        d_xx: acc.d_xx + f.d_xx.scale(w),
        ..acc
    }
}

fn leibniz1<S: Scalar>(spatial: Jet2<S>, rate: &Jet2<S>) -> Jet2<S> {
    Jet2 {
        d_t: rate.value,
        d_xt: rate.d_x,
        d_tt: rate.d_t,
        ..spatial
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type R<T> = Result<T, VolterraError>;

    fn scalar_field(f: impl Fn(f64) -> f64) -> impl FnMut(f64, Channels) -> R<Jet2<f64>> {
        move |s, _| Ok(Jet2::constant(f(s)))
    }

    fn q10() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn node_counts() {
        let r = quadrature_nodes(1.0, &q10());
        assert_eq!(r.len(), 11);
        assert!((r.nodes[1] - 0.1).abs() < 1e-15);
        assert_eq!(quadrature_nodes(0.05, &q10()).len(), 2);
        assert_eq!(quadrature_nodes(0.3, &q10()).len(), 4);
        assert_eq!(*quadrature_nodes(0.37, &q10()).nodes.last().unwrap(), 0.37);
    }

    #[test]
    fn weights_partition_t() {
        for &t in &[0.0, 0.01, 0.3, 1.0, 2.718, 4.0] {
            let s: f64 = quadrature_nodes(t, &q10()).weights.iter().sum();
            assert!((s - t).abs() <= 1e-14 * t.max(1.0), "t={t} sum={s}");
        }
    }

    #[test]
    fn zero_time_returns_initial_state() {
        let u0 = Jet2 {
            value: 0.3,
            d_x: -1.2,
            d_xx: 0.5,
            ..Jet2::zero()
        };
        let r: Reconstruction<f64> = reconstruct1(
            scalar_field(|s| 1e6 * (s + 1.0)),
            u0,
            0.0,
            1.0,
            &q10(),
            Channels::SPACE,
            Channels::ALL,
        )
        .unwrap();
        assert_eq!(r.state.value, 0.3);
        assert_eq!(r.state.d_x, -1.2);
        assert_eq!(r.state.d_xx, 0.5);
        assert_eq!(r.state.d_t, 1e6);
    }

    #[test]
    fn linear_integrand_is_exact() {
        let r: Reconstruction<f64> =
            reconstruct1(scalar_field(|s| s), Jet2::zero(), 1.0, 1.0, &q10(), Channels::VALUE, Channels::VALUE)
                .unwrap();
        assert!((r.state.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sine_within_trapezoid_bound() {
        let r: Reconstruction<f64> =
            reconstruct1(scalar_field(f64::sin), Jet2::zero(), 1.0, 1.0, &q10(), Channels::VALUE, Channels::VALUE)
                .unwrap();
        let exact = 1.0 - 1f64.cos();
        assert!((exact - 0.459698).abs() < 1e-6);
        assert!((r.state.value - exact).abs() <= 1.0 / 1200.0);
    }

    #[test]
    fn time_derivative_is_integrand_bitwise() {
        let v = |s: f64| (3.0 * s).sin() * s.exp();
        let t = 0.737;
        let r: Reconstruction<f64> =
            reconstruct1(scalar_field(v), Jet2::zero(), t, 1.0, &q10(), Channels::VALUE, Channels::VALUE).unwrap();
        assert_eq!(r.state.d_t.to_bits(), v(t).to_bits());
    }

    #[test]
    fn spatial_channels_under_the_integral() {
        // v(x,s) = x^2 s  ->  u = u0 + x^2 t^2 / 2, u_x = x t^2, u_xx = t^2
        let x = 1.5;
        let vf = |s: f64, _ch: Channels| -> R<Jet2<f64>> {
            Ok(Jet2 {
                value: x * x * s,
                d_x: 2.0 * x * s,
                d_xx: 2.0 * s,
                d_t: x * x,
                d_xt: 2.0 * x,
                d_tt: 0.0,
            })
        };
        let r: Reconstruction<f64> =
            reconstruct1(vf, Jet2::zero(), 0.8, 1.0, &q10(), Channels::SPACE, Channels::ALL).unwrap();
        assert!((r.state.value - x * x * 0.32).abs() < 1e-14);
        assert!((r.state.d_x - x * 0.64).abs() < 1e-14);
        assert!((r.state.d_xx - 0.64).abs() < 1e-14);
        assert_eq!(r.state.d_xt, 2.0 * x * 0.8);
        assert_eq!(r.state.d_tt, x * x);
    }

    #[test]
    fn out_of_horizon_is_rejected() {
        let f = scalar_field(|s| s);
        let e = reconstruct1::<f64, VolterraError, _>(f, Jet2::zero(), 1.5, 1.0, &q10(), Channels::VALUE, Channels::VALUE)
            .unwrap_err();
        assert_eq!(e, VolterraError::Domain { t: 1.5, horizon: 1.0 });
        let f = scalar_field(|s| s);
        assert!(reconstruct1::<f64, VolterraError, _>(f, Jet2::zero(), -0.1, 1.0, &q10(), Channels::VALUE, Channels::VALUE)
            .is_err());
        let bad = QuadratureConfig { m_per_unit_time: 0 };
        let f = scalar_field(|s| s);
        assert_eq!(
            reconstruct1::<f64, VolterraError, _>(f, Jet2::zero(), 0.5, 1.0, &bad, Channels::VALUE, Channels::VALUE)
                .unwrap_err(),
            VolterraError::InvalidConfig
        );
    }

    #[test]
    fn cauchy_constant_acceleration() {
        for &t in &[0.05, 0.3, 0.77, 1.0] {
            let r: Reconstruction2<f64> = reconstruct2(
                scalar_field(|_| 1.0),
                Jet2::zero(),
                Jet2::zero(),
                t,
                1.0,
                &q10(),
                Channels::VALUE,
                Channels::VALUE,
            )
            .unwrap();
            assert!((r.state.value - 0.5 * t * t).abs() < 1e-15, "t={t}");
            assert!((r.rate.value - t).abs() < 1e-15);
        }
    }

    #[test]
    fn cauchy_linear_acceleration() {
        let r: Reconstruction2<f64> = reconstruct2(
            scalar_field(|s| s),
            Jet2::zero(),
            Jet2::zero(),
            1.0,
            1.0,
            &q10(),
            Channels::VALUE,
            Channels::VALUE,
        )
        .unwrap();
        // (1 - tau) tau has second derivative -2, so the composite trapezoid
        // rule falls short of 1/6 by exactly h^2 / 6
        let h = 0.1;
        assert!((r.state.value - (1.0 / 6.0 - h * h / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn cauchy_matches_nested_integration() {
        let q = q10();
        let inner = |s: f64, _ch: Channels| -> R<Jet2<f64>> {
            let r: Reconstruction<f64> =
                reconstruct1(scalar_field(f64::cos), Jet2::zero(), s, 1.0, &q, Channels::VALUE, Channels::VALUE)?;
            Ok(r.state)
        };
        let nested: Reconstruction<f64> =
            reconstruct1(inner, Jet2::zero(), 1.0, 1.0, &q, Channels::VALUE, Channels::VALUE).unwrap();
        let direct: Reconstruction2<f64> = reconstruct2(
            scalar_field(f64::cos),
            Jet2::zero(),
            Jet2::zero(),
            1.0,
            1.0,
            &q,
            Channels::VALUE,
            Channels::VALUE,
        )
        .unwrap();
        assert!((nested.state.value - direct.state.value).abs() <= 2e-3);
        // both near 1 - cos(1)
        assert!((direct.state.value - (1.0 - 1f64.cos())).abs() < 2e-3);
    }

    #[test]
    fn cauchy_initial_data_and_leibniz_channels() {
        let u0 = Jet2 {
            value: 1.0,
            d_x: 0.5,
            ..Jet2::zero()
        };
        let v0 = Jet2 {
            value: -2.0,
            d_x: 0.25,
            ..Jet2::zero()
        };
        let r: Reconstruction2<f64> = reconstruct2(
            scalar_field(|s| 6.0 * s),
            u0,
            v0,
            0.5,
            1.0,
            &q10(),
            Channels::VALUE,
            Channels::ALL,
        )
        .unwrap();
        // u = 1 - 2t + t^3 ; v = -2 + 3t^2
        // kernel times a is quadratic in tau: trapezoid error t h^2 = 5e-3
        assert!((r.state.value - (0.125 - 5e-3)).abs() < 1e-14);
        assert!((r.state.d_x - (0.5 + 0.125)).abs() < 1e-15);
        assert_eq!(r.state.d_t, r.rate.value);
        assert_eq!(r.state.d_tt, 3.0);
        assert_eq!(r.rate.d_t, 3.0);
        let zero: Reconstruction2<f64> =
            reconstruct2(scalar_field(|_| 9.0), u0, v0, 0.0, 1.0, &q10(), Channels::VALUE, Channels::VALUE).unwrap();
        assert_eq!(zero.state.value, 1.0);
        assert_eq!(zero.rate.value, -2.0);
    }
}
