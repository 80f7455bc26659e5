//! Values computed independently of the code under test: finite
//! differences, hand-derived closed forms, moments of the sampling law.

use std::f64::consts::PI;

use pitdn::diffcore::{jet_eval, param_gradient, Channels, Jet2, Scalar};
use pitdn::harness::{check_equivalence, check_wirtinger, gradient_entry, net_jet_errors};
use pitdn::loss::{Method, NetField};
use pitdn::net::{init_xavier, MlpConfig};
use pitdn::problems::{Fields, ProblemSpec};
use pitdn::reference::exact_field;
use pitdn::volterra::QuadratureConfig;

fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn second(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-3)
}

#[test]
fn sin_shift_jet_matches_differences() {
    let (x, t) = (1.0, 0.5);
    let j = jet_eval(|x, t| Ok((x - t).sin()), x, t, Channels::ALL).unwrap();
    let u = |x: f64, t: f64| (x - t).sin();
    let h = 1e-5;
    assert!(rel(j.d_x, central(|x| u(x, t), x, h)) <= 1e-6);
    assert!(rel(j.d_t, central(|t| u(x, t), t, h)) <= 1e-6);
    let h2 = 1e-4;
    assert!(rel(j.d_xx, second(|x| u(x, t), x, h2)) <= 1e-4);
    assert!(rel(j.d_tt, second(|t| u(x, t), t, h2)) <= 1e-4);
    let dxt = central(|s| central(|x| u(x, s), x, h2), t, h2);
    assert!(rel(j.d_xt, dxt) <= 1e-4);
}

#[test]
fn untrained_advection_pde_gradient_matches_differences() {
    // mean squared differentiated residual over a few points, ten coordinates
    let spec = ProblemSpec::advection(1.0);
    let params = init_xavier(&MlpConfig::default()).unwrap();
    let sizes = params.layer_sizes().to_vec();
    let pts = [(0.4, 0.3), (2.0, 1.1), (5.5, 3.7), (3.1, 2.2)];
    let l_pde = |p: &[f64]| -> f64 {
        let net = params.with_values(p.to_vec()).unwrap();
        pts.iter()
            .map(|&(x, t)| {
                let v = net.forward(Jet2::seed_x(x), Jet2::seed_t(t)).unwrap();
                let f = Fields { state: None, rate: Some(v), accel: None };
                spec.diff_residual(&f, x, t).unwrap().powi(2)
            })
            .sum::<f64>()
            / pts.len() as f64
    };
    let g = param_gradient(params.as_slice(), |_, p| {
        let mut acc: pitdn::diffcore::Var = Scalar::cst(0.0);
        for &(x, t) in &pts {
            let v = pitdn::net::forward(&sizes, p, Jet2::seed_x(Scalar::cst(x)), Jet2::seed_t(Scalar::cst(t))).unwrap();
            let f = Fields { state: None, rate: Some(v), accel: None };
            let r = spec.diff_residual(&f, x, t).unwrap();
            acc = acc + r * r;
        }
        Ok(acc.scale(1.0 / pts.len() as f64))
    })
    .unwrap();
    assert!((g.value - l_pde(params.as_slice())).abs() < 1e-14);
    let gmax = g.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in (0..params.len()).step_by(26).take(10) {
        let fd = central(
            |c| {
                let mut p = params.as_slice().to_vec();
                p[i] = c;
                l_pde(&p)
            },
            params.as_slice()[i],
            1e-6,
        );
        let err = (g.grad[i] - fd).abs() / fd.abs().max(1e-3 * gmax);
        assert!(err <= 1e-5, "coordinate {i}: {} vs {fd}", g.grad[i]);
    }
}

#[test]
fn xavier_variance_over_seeds() {
    // Glorot-uniform on a 10 x 10 layer: variance 6 / (3 (10 + 10)) = 0.1
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut n = 0.0;
    for seed in 0..1000 {
        let p = init_xavier(&MlpConfig { seed, ..Default::default() }).unwrap();
        let layers = p.unflatten();
        for w in &layers[1].weights {
            sum += w;
            sq += w * w;
            n += 1.0;
        }
    }
    let var = sq / n - (sum / n).powi(2);
    assert!((var - 0.1).abs() <= 0.02, "{var}");
}

#[test]
fn network_jets_match_differences() {
    for seed in 0..3 {
        let p = init_xavier(&MlpConfig { seed, ..Default::default() }).unwrap();
        let pts: Vec<(f64, f64)> = (0..25).map(|k| (-1.0 + 0.08 * k as f64, 0.04 * k as f64)).collect();
        let (first, second) = net_jet_errors(&p, &pts).unwrap();
        assert!(first <= 1e-6 && second <= 1e-4, "{first} {second}");
    }
}

#[test]
fn klein_gordon_source_and_consistency() {
    let spec = ProblemSpec::klein_gordon();
    let f = spec.source(0.5, 0.0).value;
    assert!((f - (-3.0 * PI * PI + 1.0)).abs() < 1e-12);
    assert!((f + 28.6088).abs() < 1e-4);
    // a(x, 0) is the negated operator applied to u0
    let a0 = -spec.operator(&spec.u0(0.5), 0.5, 0.0);
    assert!((a0 + 39.4784).abs() < 1e-4);
    assert!((a0 + 4.0 * PI * PI).abs() < 1e-12);
    assert!(exact_field(&spec, 0.5, 0.25).unwrap().value.abs() < 1e-15);
}

#[test]
fn burgers_consistency() {
    let spec = ProblemSpec::burgers(0.01 / PI);
    assert!((spec.initial_rate(0.5) - 0.0314159).abs() < 1e-7);
    assert_eq!(spec.initial_rate(0.0), 0.0);
    let u = Jet2::constant(0.7);
    assert_eq!(spec.operator(&u, 0.1, 0.2), 0.0);
}

#[test]
fn advection_data() {
    let spec = ProblemSpec::advection(1.0);
    assert_eq!(exact_field(&spec, 0.0, 0.0).unwrap().value, 0.0);
    assert_eq!(exact_field(&spec, 0.0, 0.0).unwrap().d_x, 1.0);
    assert_eq!(spec.u0(PI / 2.0).value, 1.0);
    assert_eq!(spec.initial_rate(0.0), -1.0);
    assert_eq!(spec.boundary(0.0, 0.0).d_t, -1.0);
}

#[test]
fn wirtinger_high_mode() {
    let c = check_wirtinger(2.0).unwrap();
    let r5 = c.modes[5].ratio.unwrap();
    assert!((r5 - 100.0 * PI * PI / 4.0).abs() < 1e-5 * r5, "{r5}");
}

#[test]
fn equivalence_untrained_still_reports() {
    let spec = ProblemSpec::advection(1.0);
    let p = init_xavier(&MlpConfig::default()).unwrap();
    let c = check_equivalence(&NetField::new(&p).unwrap(), &spec, &QuadratureConfig::default(), 1.0).unwrap();
    assert!(c.max_initial.is_finite() && c.max_drift.is_finite());
}

#[test]
fn every_benchmark_gradient() {
    for name in ["advection", "klein-gordon"] {
        let spec = ProblemSpec::by_name(name).unwrap();
        for m in [Method::Pitdn, Method::Pinn] {
            let e = gradient_entry(&spec, m, 4).unwrap();
            assert!(e.passed, "{e:?}");
        }
    }
}
