//! Two-stage training: Adam, then L-BFGS with a strong Wolfe line search.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::LossBreakdown;

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("gradient component {index} is {value} at iteration {iter}")]
    NonFiniteGradient { iter: usize, index: usize, value: f64 },
    #[error("loss is {0} at the starting point")]
    NonFiniteStart(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("objective failed: {0}")]
    Objective(#[source] BoxError),
    #[error("{phase} phase: {source}")]
    Phase {
        phase: Phase,
        #[source]
        source: Box<OptimError>,
    },
}

impl OptimError {
    pub fn objective(e: impl Into<BoxError>) -> Self {
        OptimError::Objective(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Adam,
    Lbfgs,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Adam => "adam",
            Phase::Lbfgs => "lbfgs",
        })
    }
}

/// A differentiable objective: value breakdown and gradient at `params`.
pub trait Objective {
    fn evaluate(&mut self, params: &[f64]) -> Result<(LossBreakdown, Vec<f64>), OptimError>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> Result<(LossBreakdown, Vec<f64>), OptimError>,
{
    fn evaluate(&mut self, params: &[f64]) -> Result<(LossBreakdown, Vec<f64>), OptimError> {
        self(params)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub lbfgs_max_iters: usize,
    pub lbfgs_history: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            adam_iters: 3000,
            adam_lr: 1e-3,
            lbfgs_max_iters: 5000,
            lbfgs_history: 20,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            grad_tol: 1e-9,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |m: &str| Err(OptimError::InvalidSchedule(m.to_string()));
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return bad("need 0 < wolfe_c1 < wolfe_c2 < 1");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.adam_lr > 0.0) || !self.adam_lr.is_finite() {
            return bad("adam_lr must be positive");
        }
        if self.lbfgs_history == 0 {
            return bad("lbfgs_history must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update; `iter` counts from 1.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64, iter: usize) -> Result<(), OptimError> {
    if params.len() != grad.len() || state.m.len() != params.len() {
        return Err(OptimError::Shape(format!(
            "params {}, gradient {}, state {}",
            params.len(),
            grad.len(),
            state.m.len()
        )));
    }
    if let Some((index, &value)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(OptimError::NonFiniteGradient { iter, index, value });
    }
    let k = iter.max(1) as i32;
    let c1 = 1.0 - state.beta1.powi(k);
    let c2 = 1.0 - state.beta2.powi(k);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub phase: Phase,
    pub loss: LossBreakdown,
}

/// Data of one accepted line-search step, kept so the Wolfe conditions can
/// be audited after the fact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WolfeRecord {
    pub alpha: f64,
    pub f0: f64,
    pub f_new: f64,
    pub slope0: f64,
    pub slope_new: f64,
}

impl WolfeRecord {
    pub fn sufficient_decrease(&self, c1: f64) -> bool {
        self.f_new <= self.f0 + c1 * self.alpha * self.slope0
    }

    pub fn curvature(&self, c2: f64) -> bool {
        self.slope_new.abs() <= c2 * self.slope0.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    MaxIters,
    LineSearchFailed,
    /// No L-BFGS phase was run.
    AdamOnly,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::GradTol => "gradient norm below tolerance",
            Termination::MaxIters => "iteration cap reached",
            Termination::LineSearchFailed => "line search failed",
            Termination::AdamOnly => "adam phase only",
        })
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub params: Vec<f64>,
    pub loss: LossBreakdown,
    pub history: Vec<HistoryEntry>,
    pub iterations: usize,
    pub termination: Termination,
    pub wolfe: Vec<WolfeRecord>,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub loss_history: Vec<HistoryEntry>,
    pub final_params: Vec<f64>,
    pub final_loss: LossBreakdown,
    pub iterations_used: usize,
    pub termination_reason: Termination,
    pub wall_clock_seconds: f64,
    pub wolfe: Vec<WolfeRecord>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

struct Probe {
    alpha: f64,
    f: f64,
    slope: f64,
    grad: Vec<f64>,
    loss: LossBreakdown,
}

/// Evaluates along the ray; objective failures and non-finite values read
/// as +inf so the search shrinks away from them.
fn probe<O: Objective>(obj: &mut O, x: &[f64], d: &[f64], alpha: f64) -> Probe {
    let xn = axpy(x, alpha, d);
    match obj.evaluate(&xn) {
        Ok((loss, grad)) if loss.total.is_finite() && grad.iter().all(|g| g.is_finite()) => Probe {
            alpha,
            f: loss.total,
            slope: dot(&grad, d),
            grad,
            loss,
        },
        _ => Probe {
            alpha,
            f: f64::INFINITY,
            slope: f64::NAN,
            grad: Vec::new(),
            loss: LossBreakdown::scalar(f64::INFINITY),
        },
    }
}

/// Minimiser of the cubic through two points with known slopes, or the
/// bisection point if the cubic is degenerate.
fn cubic_min(a: &Probe, b: &Probe, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if !b.f.is_finite() || !a.f.is_finite() || !a.slope.is_finite() || !b.slope.is_finite() {
        return mid;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = disc.sqrt().copysign(b.alpha - a.alpha);
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    if t.is_finite() {
        t.clamp(lo, hi)
    } else {
        mid
    }
}

const MAX_LS_EVALS: usize = 25;

/// Strong Wolfe line search (bracketing then zoom, cubic interpolation).
fn strong_wolfe<O: Objective>(
    obj: &mut O,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    alpha0: f64,
    c1: f64,
    c2: f64,
) -> Option<Probe> {
    let at_zero = Probe {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        grad: Vec::new(),
        loss: LossBreakdown::scalar(f0),
    };
    let wolfe = |p: &Probe| p.f <= f0 + c1 * p.alpha * slope0 && p.slope.abs() <= -c2 * slope0;
    let mut prev = at_zero;
    let mut alpha = alpha0;
    let mut evals = 0;
    let (mut lo, mut hi);
    loop {
        let cur = probe(obj, x, d, alpha);
        evals += 1;
        if cur.f > f0 + c1 * alpha * slope0 || (evals > 1 && cur.f >= prev.f) || !cur.f.is_finite() {
            lo = prev;
            hi = cur;
            break;
        }
        if cur.slope.abs() <= -c2 * slope0 {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        if evals >= MAX_LS_EVALS {
            return None;
        }
        // extrapolate, kept inside [alpha + 0.01 span, 10 alpha]
        let span = alpha - prev.alpha;
        let next = cubic_min(&prev, &cur, alpha + 0.01 * span, 10.0 * alpha);
        prev = cur;
        alpha = next;
    }
    // zoom: lo satisfies sufficient decrease and has the lower value
    while evals < MAX_LS_EVALS {
        let (a, b) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        let width = b - a;
        if width * norm(d) < 1e-16 * (1.0 + norm(x)) {
            return None;
        }
        let mut t = cubic_min(&lo, &hi, a, b);
        if t - a < 0.1 * width || b - t < 0.1 * width {
            t = 0.5 * (a + b);
        }
        let cur = probe(obj, x, d, t);
        evals += 1;
        if cur.f > f0 + c1 * t * slope0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if wolfe(&cur) {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    None
}

/// Limited-memory BFGS from `params`. History iterations are numbered from
/// `iter_offset`.
pub fn lbfgs_minimize<O: Objective>(
    obj: &mut O,
    params: Vec<f64>,
    schedule: &TrainSchedule,
    iter_offset: usize,
) -> Result<LbfgsOutcome, OptimError> {
    schedule.validate()?;
    let (mut loss, mut g) = obj.evaluate(&params)?;
    if !loss.total.is_finite() {
        return Err(OptimError::NonFiniteStart(loss.total));
    }
    if let Some((index, &value)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(OptimError::NonFiniteGradient { iter: 0, index, value });
    }
    let mut x = params;
    let m = schedule.lbfgs_history;
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rho: Vec<f64> = Vec::with_capacity(m);
    let mut history = Vec::new();
    let mut wolfe = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    if norm(&g) <= schedule.grad_tol {
        return Ok(LbfgsOutcome {
            params: x,
            loss,
            history,
            iterations: 0,
            termination: Termination::GradTol,
            wolfe,
        });
    }

    while iterations < schedule.lbfgs_max_iters {
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = s_hist.len();
        let mut alpha_k = vec![0.0; k];
        for i in (0..k).rev() {
            alpha_k[i] = rho[i] * dot(&s_hist[i], &d);
            for (dj, yj) in d.iter_mut().zip(&y_hist[i]) {
                *dj -= alpha_k[i] * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let beta = rho[i] * dot(&y_hist[i], &d);
            for (dj, sj) in d.iter_mut().zip(&s_hist[i]) {
                *dj += (alpha_k[i] - beta) * sj;
            }
        }
        let mut slope0 = dot(&g, &d);
        if !(slope0 < 0.0) {
            // lost descent: restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho.clear();
            d = g.iter().map(|v| -v).collect();
            slope0 = dot(&g, &d);
        }
        let alpha0 = if s_hist.is_empty() {
            (1.0 / g.iter().map(|v| v.abs()).sum::<f64>()).min(1.0)
        } else {
            1.0
        };
        let Some(step) = strong_wolfe(obj, &x, loss.total, slope0, &d, alpha0, schedule.wolfe_c1, schedule.wolfe_c2)
        else {
            termination = Termination::LineSearchFailed;
            break;
        };
        let record = WolfeRecord {
            alpha: step.alpha,
            f0: loss.total,
            f_new: step.f,
            slope0,
            slope_new: step.slope,
        };
        debug_assert!(record.sufficient_decrease(schedule.wolfe_c1) && record.curvature(schedule.wolfe_c2));
        wolfe.push(record);

        let x_new = axpy(&x, step.alpha, &d);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if s_hist.len() == m {
                s_hist.remove(0);
                y_hist.remove(0);
                rho.remove(0);
            }
            rho.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }
        x = x_new;
        g = step.grad;
        loss = step.loss;
        iterations += 1;
        history.push(HistoryEntry {
            iter: iter_offset + iterations - 1,
            phase: Phase::Lbfgs,
            loss,
        });
        if norm(&g) <= schedule.grad_tol {
            termination = Termination::GradTol;
            break;
        }
    }
    Ok(LbfgsOutcome {
        params: x,
        loss,
        history,
        iterations,
        termination,
        wolfe,
    })
}

/// Adam for `adam_iters` steps, then L-BFGS from the Adam result.
pub fn train<O: Objective>(obj: &mut O, init: Vec<f64>, schedule: &TrainSchedule) -> Result<TrainReport, OptimError> {
    train_with_progress(obj, init, schedule, |_| {})
}

/// [`train`] with a callback invoked after each recorded iteration.
pub fn train_with_progress<O: Objective>(
    obj: &mut O,
    init: Vec<f64>,
    schedule: &TrainSchedule,
    mut progress: impl FnMut(&HistoryEntry),
) -> Result<TrainReport, OptimError> {
    schedule.validate()?;
    let start = Instant::now();
    let tag = |phase| move |e: OptimError| OptimError::Phase { phase, source: Box::new(e) };
    let mut params = init;
    let mut history = Vec::with_capacity(schedule.adam_iters + schedule.lbfgs_max_iters);
    let mut state = AdamState::new(params.len());
    for it in 0..schedule.adam_iters {
        let (loss, grad) = obj.evaluate(&params).map_err(tag(Phase::Adam))?;
        if !loss.total.is_finite() {
            return Err(tag(Phase::Adam)(OptimError::NonFiniteStart(loss.total)));
        }
        let entry = HistoryEntry {
            iter: it,
            phase: Phase::Adam,
            loss,
        };
        progress(&entry);
        history.push(entry);
        adam_step(&mut state, &mut params, &grad, schedule.adam_lr, it + 1).map_err(tag(Phase::Adam))?;
    }
    let (params, final_loss, iterations_used, termination, wolfe) = if schedule.lbfgs_max_iters > 0 {
        let out = lbfgs_minimize(obj, params, schedule, schedule.adam_iters).map_err(tag(Phase::Lbfgs))?;
        for e in &out.history {
            progress(e);
        }
        history.extend_from_slice(&out.history);
        (out.params, out.loss, schedule.adam_iters + out.iterations, out.termination, out.wolfe)
    } else {
        let (loss, _) = obj.evaluate(&params).map_err(tag(Phase::Adam))?;
        (params, loss, schedule.adam_iters, Termination::AdamOnly, Vec::new())
    };
    Ok(TrainReport {
        loss_history: history,
        final_params: params,
        final_loss,
        iterations_used,
        termination_reason: termination,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        wolfe,
    })
}
