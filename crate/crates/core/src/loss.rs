//! Training objectives.
//!
//! The time-derivative loss trains the learned rate (or acceleration)
//! field on the time-differentiated residual, the boundary trace of the
//! rate against `dg/dt`, and the consistency condition at `t = 0`. The
//! baseline loss trains a network for `u` directly.
//!
//! Every loss is a weighted sum of means of squared point terms. Gradients
//! are assembled point by point: each point builds a small tape whose
//! leaves are the network's output channels, and the tape's adjoints are
//! pushed through the network by [`NetRecorder::backprop`].

use std::cell::RefCell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{param_gradient, Channels, DiffError, Gradient, Jet2, Scalar, Tape, Var};
use crate::net::{self, FusedNet, NetError, NetRecorder, ParamVector};
use crate::problems::{Fields, Order, ProblemError, ProblemSpec};
use crate::sampling::CollocationSet;
use crate::volterra::{reconstruct1, reconstruct2, QuadratureConfig, VolterraError};

#[derive(Debug, Error)]
pub enum LossError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Volterra(#[from] VolterraError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("{term} term is {value} at (x={x}, t={t})")]
    NonFinite {
        term: &'static str,
        x: f64,
        t: f64,
        value: f64,
    },
    #[error("collocation set {0:?} is empty")]
    EmptySet(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pitdn,
    Pinn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pitdn => "pitdn",
            Method::Pinn => "pinn",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pitdn" => Ok(Method::Pitdn),
            "pinn" => Ok(Method::Pinn),
            _ => Err(format!("unknown method {s:?} (expected pitdn or pinn)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_pde: f64,
    pub lambda_bc: f64,
    pub lambda_icp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_pde: 1.0,
            lambda_bc: 1.0,
            lambda_icp: 10.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        LossWeights {
            lambda_pde: 0.0,
            lambda_bc: 0.0,
            lambda_icp: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.lambda_pde, self.lambda_bc, self.lambda_icp];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(format!("loss weights must be finite and non-negative: {self:?}"))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub pde: f64,
    pub bc: f64,
    pub ic: f64,
}

impl LossBreakdown {
    pub fn new(pde: f64, bc: f64, ic: f64, w: &LossWeights) -> Self {
        LossBreakdown {
            total: w.lambda_pde * pde + w.lambda_bc * bc + w.lambda_icp * ic,
            pde,
            bc,
            ic,
        }
    }

    /// A bare objective value with no parts, for generic optimisation.
    pub fn scalar(total: f64) -> Self {
        LossBreakdown {
            total,
            ..Default::default()
        }
    }
}

/// Anything that can be evaluated like the network: returns the learned
/// quantity at `(x, t)` with at least the channels in `ch`.
pub trait Field {
    fn jet(&self, x: f64, t: f64, ch: Channels) -> Jet2<f64>;
}

impl<F: Fn(f64, f64) -> Jet2<f64>> Field for F {
    fn jet(&self, x: f64, t: f64, _ch: Channels) -> Jet2<f64> {
        self(x, t)
    }
}

/// A parameter vector bound to the fused evaluator.
pub struct NetField<'a> {
    net: FusedNet,
    params: &'a [f64],
    cache: RefCell<Vec<f64>>,
}

impl<'a> NetField<'a> {
    pub fn new(params: &'a ParamVector) -> Result<Self, LossError> {
        let net = FusedNet::new(params.config())?;
        let cache = RefCell::new(vec![0.0; net.cache_len()]);
        Ok(NetField {
            net,
            params: params.as_slice(),
            cache,
        })
    }
}

impl Field for NetField<'_> {
    fn jet(&self, x: f64, t: f64, ch: Channels) -> Jet2<f64> {
        self.net.eval(self.params, x, t, ch, &mut self.cache.borrow_mut())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Term {
    Interior,
    Boundary,
    Initial,
}

impl Term {
    fn name(self) -> &'static str {
        match self {
            Term::Interior => "pde",
            Term::Boundary => "bc",
            Term::Initial => "ic",
        }
    }
}

fn sq<S: Scalar>(r: S) -> S {
    r * r
}

/// Squared contribution of one collocation point. `src(x, t, ch)` evaluates
/// the network.
fn point_term<S, F>(
    method: Method,
    term: Term,
    spec: &ProblemSpec,
    src: &mut F,
    x: f64,
    t: f64,
    q: &QuadratureConfig,
) -> Result<S, LossError>
where
    S: Scalar,
    F: FnMut(f64, f64, Channels) -> Jet2<S>,
{
    match method {
        Method::Pitdn => pitdn_term(term, spec, src, x, t, q),
        Method::Pinn => pinn_term(term, spec, src, x, t),
    }
}

fn pitdn_term<S, F>(term: Term, spec: &ProblemSpec, src: &mut F, x: f64, t: f64, q: &QuadratureConfig) -> Result<S, LossError>
where
    S: Scalar,
    F: FnMut(f64, f64, Channels) -> Jet2<S>,
{
    let horizon = spec.domain.t_end;
    match term {
        Term::Interior => {
            let fields = pitdn_fields(spec, src, x, t, q)?;
            Ok(sq(spec.diff_residual(&fields, x, t)?))
        }
        Term::Boundary => {
            let g = spec.boundary(x, t);
            match spec.order {
                Order::First => Ok(sq(src(x, t, Channels::VALUE).value.shift(-g.d_t))),
                Order::Second => {
                    let rec = reconstruct2::<S, LossError, _>(
                        |s, ch| Ok(src(x, s, ch)),
                        Jet2::lift(spec.u0(x)),
                        Jet2::lift(spec.v0(x).unwrap_or_else(Jet2::zero)),
                        t,
                        horizon,
                        q,
                        Channels::VALUE,
                        Channels::VALUE,
                    )?;
                    Ok(sq(rec.state.value.shift(-g.value)))
                }
            }
        }
        Term::Initial => Ok(sq(src(x, 0.0, Channels::VALUE).value.shift(-spec.initial_rate(x)))),
    }
}

/// Network rate or acceleration plus the reconstructed lower-order fields.
fn pitdn_fields<S, F>(spec: &ProblemSpec, src: &mut F, x: f64, t: f64, q: &QuadratureConfig) -> Result<Fields<S>, LossError>
where
    S: Scalar,
    F: FnMut(f64, f64, Channels) -> Jet2<S>,
{
    let plan = spec.channel_plan();
    let horizon = spec.domain.t_end;
    let u0 = Jet2::lift(spec.u0(x));
    Ok(match spec.order {
        Order::First if !plan.needs_state => Fields {
            rate: Some(src(x, t, plan.end)),
            ..Fields::default()
        },
        Order::First => {
            let rec = reconstruct1::<S, LossError, _>(|s, ch| Ok(src(x, s, ch)), u0, t, horizon, q, plan.node, plan.end)?;
            Fields {
                state: Some(rec.state),
                rate: Some(rec.rate),
                accel: None,
            }
        }
        Order::Second => {
            let v0 = Jet2::lift(spec.v0(x).unwrap_or_else(Jet2::zero));
            let rec =
                reconstruct2::<S, LossError, _>(|s, ch| Ok(src(x, s, ch)), u0, v0, t, horizon, q, plan.node, plan.end)?;
            Fields {
                state: Some(rec.state),
                rate: Some(rec.rate),
                accel: Some(rec.accel),
            }
        }
    })
}

fn pinn_term<S, F>(term: Term, spec: &ProblemSpec, src: &mut F, x: f64, t: f64) -> Result<S, LossError>
where
    S: Scalar,
    F: FnMut(f64, f64, Channels) -> Jet2<S>,
{
    match term {
        Term::Interior => {
            let u = src(x, t, spec.channel_plan().primal);
            Ok(sq(spec.primal_residual(&Fields::state(u), x, t)?))
        }
        Term::Boundary => Ok(sq(src(x, t, Channels::VALUE).value.shift(-spec.boundary(x, t).value))),
        Term::Initial => {
            let u0 = spec.u0(x).value;
            match spec.v0(x) {
                None => Ok(sq(src(x, 0.0, Channels::VALUE).value.shift(-u0))),
                Some(v0) => {
                    let ch = Channels {
                        d_t: true,
                        ..Channels::VALUE
                    };
                    let u = src(x, 0.0, ch);
                    Ok(sq(u.value.shift(-u0)) + sq(u.d_t.shift(-v0.value)))
                }
            }
        }
    }
}

fn check_sets(colloc: &CollocationSet) -> Result<(), LossError> {
    if colloc.interior.is_empty() {
        return Err(LossError::EmptySet("interior"));
    }
    if colloc.boundary.is_empty() {
        return Err(LossError::EmptySet("boundary"));
    }
    if colloc.initial.is_empty() {
        return Err(LossError::EmptySet("initial"));
    }
    Ok(())
}

/// Point lists for the three terms, in a fixed order.
fn term_points(colloc: &CollocationSet) -> [(Term, Vec<(f64, f64)>); 3] {
    [
        (Term::Interior, colloc.interior.clone()),
        (Term::Boundary, colloc.boundary.clone()),
        (Term::Initial, colloc.initial.iter().map(|&x| (x, 0.0)).collect()),
    ]
}

fn weight_of(term: Term, w: &LossWeights) -> f64 {
    match term {
        Term::Interior => w.lambda_pde,
        Term::Boundary => w.lambda_bc,
        Term::Initial => w.lambda_icp,
    }
}

fn non_finite(term: Term, x: f64, t: f64, value: f64) -> LossError {
    LossError::NonFinite {
        term: term.name(),
        x,
        t,
        value,
    }
}

/// Loss value for any field (network or synthetic closure).
pub fn loss_with_field(
    method: Method,
    field: &impl Field,
    spec: &ProblemSpec,
    colloc: &CollocationSet,
    w: &LossWeights,
    q: &QuadratureConfig,
) -> Result<LossBreakdown, LossError> {
    check_sets(colloc)?;
    let mut src = |x: f64, t: f64, ch: Channels| field.jet(x, t, ch);
    let mut means = [0.0; 3];
    for (k, (term, pts)) in term_points(colloc).into_iter().enumerate() {
        let mut acc = 0.0;
        for &(x, t) in &pts {
            let v: f64 = point_term(method, term, spec, &mut src, x, t, q)?;
            if !v.is_finite() {
                return Err(non_finite(term, x, t, v));
            }
            acc += v;
        }
        means[k] = acc / pts.len() as f64;
    }
    Ok(LossBreakdown::new(means[0], means[1], means[2], w))
}

pub fn pitdn_loss(
    params: &ParamVector,
    spec: &ProblemSpec,
    colloc: &CollocationSet,
    w: &LossWeights,
    q: &QuadratureConfig,
) -> Result<LossBreakdown, LossError> {
    loss_with_field(Method::Pitdn, &NetField::new(params)?, spec, colloc, w, q)
}

pub fn pinn_baseline_loss(
    params: &ParamVector,
    spec: &ProblemSpec,
    colloc: &CollocationSet,
    w: &LossWeights,
) -> Result<LossBreakdown, LossError> {
    let q = QuadratureConfig::default();
    loss_with_field(Method::Pinn, &NetField::new(params)?, spec, colloc, w, &q)
}

/// Reusable buffers for [`loss_and_grad`].
pub struct GradWorkspace {
    net: FusedNet,
    tape: Tape,
    recorder: NetRecorder,
    adjoints: Vec<f64>,
}

impl GradWorkspace {
    pub fn new(config: &net::MlpConfig) -> Result<Self, LossError> {
        Ok(GradWorkspace {
            net: FusedNet::new(config)?,
            tape: Tape::with_capacity(256),
            recorder: NetRecorder::new(),
            adjoints: Vec::new(),
        })
    }
}

/// Loss and its exact parameter gradient.
pub fn loss_and_grad(
    method: Method,
    params: &[f64],
    ws: &mut GradWorkspace,
    spec: &ProblemSpec,
    colloc: &CollocationSet,
    w: &LossWeights,
    q: &QuadratureConfig,
) -> Result<(LossBreakdown, Vec<f64>), LossError> {
    check_sets(colloc)?;
    if params.len() != ws.net.n_params() {
        return Err(NetError::ShapeMismatch {
            expected: ws.net.n_params(),
            got: params.len(),
        }
        .into());
    }
    let mut grad = vec![0.0; params.len()];
    let mut means = [0.0; 3];
    for (k, (term, pts)) in term_points(colloc).into_iter().enumerate() {
        let scale = weight_of(term, w) / pts.len() as f64;
        let mut acc = 0.0;
        for &(x, t) in &pts {
            ws.tape.clear();
            ws.recorder.clear();
            let tape = &ws.tape;
            let net = &ws.net;
            let rec = &mut ws.recorder;
            let root: Var<'_> = {
                let mut src = |x: f64, t: f64, ch: Channels| rec.eval(net, params, tape, x, t, ch);
                point_term(method, term, spec, &mut src, x, t, q)?
            };
            let v = root.value();
            if !v.is_finite() {
                return Err(non_finite(term, x, t, v));
            }
            acc += v;
            if scale != 0.0 && !root.is_constant() {
                tape.backward_into(root, &mut ws.adjoints);
                ws.recorder.backprop(net, params, &ws.adjoints, scale, &mut grad);
            }
        }
        means[k] = acc / pts.len() as f64;
    }
    Ok((LossBreakdown::new(means[0], means[1], means[2], w), grad))
}

/// Same loss and gradient, taped end to end through the generic network
/// path. Slow; kept as an independent check on [`loss_and_grad`].
pub fn loss_and_grad_taped(
    method: Method,
    params: &ParamVector,
    spec: &ProblemSpec,
    colloc: &CollocationSet,
    w: &LossWeights,
    q: &QuadratureConfig,
) -> Result<Gradient, LossError> {
    check_sets(colloc)?;
    let sizes = params.layer_sizes().to_vec();
    let failure: RefCell<Option<LossError>> = RefCell::new(None);
    let out = param_gradient(params.as_slice(), |_tape, theta| {
        let mut src = |x: f64, t: f64, ch: Channels| {
            net::forward(&sizes, theta, Jet2::seed_x(Var::cst(x)), Jet2::seed_t(Var::cst(t)))
                .expect("shape checked by ParamVector")
                .masked(ch.closure())
        };
        let mut total = Var::cst(0.0);
        for (term, pts) in term_points(colloc) {
            let scale = weight_of(term, w) / pts.len() as f64;
            let mut acc = Var::cst(0.0);
            for &(x, t) in &pts {
                match point_term(method, term, spec, &mut src, x, t, q) {
                    Ok(v) => acc = acc + v,
                    Err(e) => {
                        *failure.borrow_mut() = Some(e);
                        return Err(DiffError::NonFinite("loss term"));
                    }
                }
            }
            total = total + acc.scale(scale);
        }
        Ok(total)
    });
    match (out, failure.into_inner()) {
        (_, Some(e)) => Err(e),
        (r, None) => Ok(r?),
    }
}

/// State prediction at `(x, t)`: the reconstruction for the time-derivative
/// method, the raw network otherwise.
pub fn predict_state(
    method: Method,
    field: &impl Field,
    spec: &ProblemSpec,
    x: f64,
    t: f64,
    q: &QuadratureConfig,
) -> Result<f64, LossError> {
    let src = |x: f64, t: f64, ch: Channels| field.jet(x, t, ch);
    match method {
        Method::Pinn => Ok(src(x, t, Channels::VALUE).value),
        Method::Pitdn => {
            let horizon = spec.domain.t_end;
            let u0 = spec.u0(x);
            let st = match spec.order {
                Order::First => {
                    reconstruct1::<f64, LossError, _>(
                        |s, ch| Ok(src(x, s, ch)),
                        u0,
                        t,
                        horizon,
                        q,
                        Channels::VALUE,
                        Channels::VALUE,
                    )?
                    .state
                }
                Order::Second => {
                    reconstruct2::<f64, LossError, _>(
                        |s, ch| Ok(src(x, s, ch)),
                        u0,
                        spec.v0(x).unwrap_or_else(Jet2::zero),
                        t,
                        horizon,
                        q,
                        Channels::VALUE,
                        Channels::VALUE,
                    )?
                    .state
                }
            };
            Ok(st.value)
        }
    }
}

/// State jet at `(x, t)` with the channels the primal residual reads.
pub fn predict_state_jet(
    method: Method,
    field: &impl Field,
    spec: &ProblemSpec,
    x: f64,
    t: f64,
    q: &QuadratureConfig,
) -> Result<Jet2<f64>, LossError> {
    let src = |x: f64, t: f64, ch: Channels| field.jet(x, t, ch);
    let plan = spec.channel_plan();
    match method {
        Method::Pinn => Ok(src(x, t, plan.primal)),
        Method::Pitdn => {
            let horizon = spec.domain.t_end;
            let u0 = spec.u0(x);
            let node = Channels::SPACE;
            Ok(match spec.order {
                Order::First => {
                    reconstruct1::<f64, LossError, _>(|s, ch| Ok(src(x, s, ch)), u0, t, horizon, q, node, node)?.state
                }
                Order::Second => {
                    reconstruct2::<f64, LossError, _>(
                        |s, ch| Ok(src(x, s, ch)),
                        u0,
                        spec.v0(x).unwrap_or_else(Jet2::zero),
                        t,
                        horizon,
                        q,
                        node,
                        node,
                    )?
                    .state
                }
            })
        }
    }
}
