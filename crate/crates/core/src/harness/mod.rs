//! Experiment orchestration: configuration, training runs, metrics and the
//! files each run leaves behind.

mod checks;
mod config;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::{loss_and_grad, predict_state, GradWorkspace, LossBreakdown, LossError, Method, NetField};
use crate::net::{init_xavier, NetError, ParamVector};
use crate::optim::{train_with_progress, HistoryEntry, OptimError, Termination, TrainReport};
use crate::problems::{ProblemError, ProblemSpec};
use crate::reference::{Reference, ReferenceError, RichardsonReport};
use crate::sampling::{build_collocation, CollocationSet, SamplingError};

pub use checks::{
    check_equivalence, check_gradients, check_propagation, check_quadrature, check_wirtinger, gradient_entry,
    net_jet_errors, propagation_ratio,
    quadrature_convergence, wirtinger_ratio, EquivalenceCheck, GradientCheck, GradientEntry, ModeResult,
    PropagationCheck, QuadratureCheck, WirtingerCheck,
};
pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("reference solution failed certification: {0}")]
    Uncertified(String),
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("grids differ in size: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// `||pred - exact||_2 / ||exact||_2` over matching grids.
pub fn rel_l2(pred: &[f64], exact: &[f64]) -> Result<f64, HarnessError> {
    if pred.len() != exact.len() {
        return Err(HarnessError::GridMismatch(pred.len(), exact.len()));
    }
    let den: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(HarnessError::ZeroReference);
    }
    let num: f64 = pred.iter().zip(exact).map(|(p, e)| (p - e) * (p - e)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// `max|pred - exact| / max|exact|`.
pub fn rel_linf(pred: &[f64], exact: &[f64]) -> Result<f64, HarnessError> {
    if pred.len() != exact.len() {
        return Err(HarnessError::GridMismatch(pred.len(), exact.len()));
    }
    let den = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if den == 0.0 {
        return Err(HarnessError::ZeroReference);
    }
    let num = pred.iter().zip(exact).fold(0.0f64, |m, (p, e)| m.max((p - e).abs()));
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceError {
    pub t: f64,
    pub rel_l2: f64,
    pub max_abs: f64,
}

/// Contents of `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub problem: String,
    pub method: Method,
    pub seed: u64,
    pub rel_l2: f64,
    pub rel_linf: f64,
    pub slices: Vec<SliceError>,
    pub final_loss: LossBreakdown,
    pub iterations_used: usize,
    pub termination: Termination,
    pub train_seconds: f64,
    pub reference: String,
    pub reference_certification: Option<RichardsonReport>,
    pub eval_grid: [usize; 2],
    pub config: ExperimentConfig,
}

/// Uniform evaluation grid: `nx` points across the domain, `nt` times in
/// `[0, T]`.
#[derive(Clone, Debug)]
pub struct EvalGrid {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
}

impl EvalGrid {
    pub fn new(spec: &ProblemSpec, nx: usize, nt: usize) -> Self {
        let d = spec.domain;
        let x = (0..nx).map(|i| d.x_lo + d.width() * i as f64 / (nx - 1) as f64).collect();
        let t = (0..nt).map(|j| d.t_end * j as f64 / (nt - 1) as f64).collect();
        EvalGrid { x, t }
    }
}

/// Predictions and reference values, `t` outer and `x` inner.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub grid: EvalGrid,
    pub pred: Vec<f64>,
    pub reference: Vec<f64>,
}

pub fn evaluate(
    method: Method,
    params: &ParamVector,
    spec: &ProblemSpec,
    reference: &Reference,
    cfg: &ExperimentConfig,
) -> Result<Evaluation, HarnessError> {
    let grid = EvalGrid::new(spec, cfg.eval_nx, cfg.eval_nt);
    let field = NetField::new(params)?;
    let q = cfg.quadrature();
    let mut pred = Vec::with_capacity(grid.x.len() * grid.t.len());
    let mut refv = Vec::with_capacity(pred.capacity());
    for &t in &grid.t {
        for &x in &grid.x {
            pred.push(predict_state(method, &field, spec, x, t, &q)?);
            refv.push(reference.value(x, t)?);
        }
    }
    Ok(Evaluation {
        grid,
        pred,
        reference: refv,
    })
}

/// Times written to `slices.csv`.
pub fn slice_times(t_end: f64) -> [f64; 5] {
    [0.0, 0.25 * t_end, 0.5 * t_end, 0.75 * t_end, t_end]
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub metrics: MetricsReport,
    pub params: ParamVector,
    pub report: TrainReport,
    pub collocation: CollocationSet,
}

/// Reference for `spec`, refusing an uncertified grid solution.
pub fn certified_reference(spec: &ProblemSpec) -> Result<Reference, HarnessError> {
    let r = Reference::for_problem(spec)?;
    if let Some(cert) = r.certification() {
        if !cert.passed {
            return Err(HarnessError::Uncertified(format!(
                "orders {:?}, flag {:?}",
                cert.orders, cert.flag
            )));
        }
    }
    Ok(r)
}

/// Trains one method and writes the run's artifacts into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    let spec = cfg.spec()?;
    let reference = certified_reference(&spec)?;
    let colloc = build_collocation(&spec, &cfg.counts(), cfg.seed)?;
    run_with(cfg, &spec, &reference, &colloc)
}

/// [`run_experiment`] with the reference and collocation supplied, so that
/// several runs can share them.
pub fn run_with(
    cfg: &ExperimentConfig,
    spec: &ProblemSpec,
    reference: &Reference,
    colloc: &CollocationSet,
) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let out = cfg.out_dir.clone();
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
        colloc.write_csv(BufWriter::new(fs::File::create(dir.join("collocation.csv"))?))?;
    }
    let method = cfg.method;
    let mlp = cfg.mlp();
    let init = init_xavier(&mlp)?;
    let (w, q, schedule) = (cfg.weights(), cfg.quadrature(), cfg.schedule());
    let mut ws = GradWorkspace::new(&mlp)?;
    let mut objective = |p: &[f64]| loss_and_grad(method, p, &mut ws, spec, colloc, &w, &q).map_err(OptimError::objective);
    let mut seen: Vec<HistoryEntry> = Vec::new();
    let log_every = cfg.log_every;
    let trained = train_with_progress(&mut objective, init.as_slice().to_vec(), &schedule, |e| {
        if log_every > 0 && e.iter % log_every == 0 {
            eprintln!(
                "[{} {} seed {}] {:>5} {:<5} total {:.3e}  pde {:.3e}  bc {:.3e}  ic {:.3e}",
                spec.name, method.as_str(), cfg.seed, e.iter, e.phase, e.loss.total, e.loss.pde, e.loss.bc, e.loss.ic
            );
        }
        seen.push(*e);
    });
    let report = match trained {
        Ok(r) => r,
        Err(e) => {
            if let Some(dir) = &out {
                write_history(&dir.join("loss_history.csv"), &seen)?;
                fs::write(dir.join("error.txt"), format!("{e}\n"))?;
            }
            return Err(e.into());
        }
    };
    let params = init.with_values(report.final_params.clone())?;
    let ev = evaluate(method, &params, spec, reference, cfg)?;
    let slices = slice_errors(method, &params, spec, reference, cfg)?;
    let metrics = MetricsReport {
        problem: spec.name.clone(),
        method,
        seed: cfg.seed,
        rel_l2: rel_l2(&ev.pred, &ev.reference)?,
        rel_linf: rel_linf(&ev.pred, &ev.reference)?,
        slices: slices.iter().map(|s| s.0.clone()).collect(),
        final_loss: report.final_loss,
        iterations_used: report.iterations_used,
        termination: report.termination_reason,
        train_seconds: report.wall_clock_seconds,
        reference: reference.provenance().to_string(),
        reference_certification: reference.certification().cloned(),
        eval_grid: [cfg.eval_nx, cfg.eval_nt],
        config: cfg.clone(),
    };
    if let Some(dir) = &out {
        write_history(&dir.join("loss_history.csv"), &report.loss_history)?;
        write_grid(&dir.join("solution_grid.csv"), &ev)?;
        write_slices(&dir.join("slices.csv"), &ev.grid.x, &slices)?;
        fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
        params.save(dir.join("checkpoint.bin"))?;
    }
    Ok(RunOutcome {
        metrics,
        params,
        report,
        collocation: colloc.clone(),
    })
}

type Slice = (SliceError, Vec<f64>, Vec<f64>);

fn slice_errors(
    method: Method,
    params: &ParamVector,
    spec: &ProblemSpec,
    reference: &Reference,
    cfg: &ExperimentConfig,
) -> Result<Vec<Slice>, HarnessError> {
    let grid = EvalGrid::new(spec, cfg.eval_nx, 2);
    let field = NetField::new(params)?;
    let q = cfg.quadrature();
    let mut out = Vec::new();
    for t in slice_times(spec.domain.t_end) {
        let mut p = Vec::with_capacity(grid.x.len());
        let mut r = Vec::with_capacity(grid.x.len());
        for &x in &grid.x {
            p.push(predict_state(method, &field, spec, x, t, &q)?);
            r.push(reference.value(x, t)?);
        }
        let max_abs = p.iter().zip(&r).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        // a slice whose reference vanishes identically has no relative error
        let rel = rel_l2(&p, &r).unwrap_or(f64::NAN);
        out.push((SliceError { t, rel_l2: rel, max_abs }, p, r));
    }
    Ok(out)
}

fn write_history(path: &Path, history: &[HistoryEntry]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(fs::File::create(path)?));
    w.write_record(["iter", "phase", "total", "pde", "bc", "ic"])?;
    for h in history {
        w.serialize((h.iter, h.phase.to_string(), h.loss.total, h.loss.pde, h.loss.bc, h.loss.ic))?;
    }
    w.flush()?;
    Ok(())
}

fn write_grid(path: &Path, ev: &Evaluation) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(fs::File::create(path)?));
    w.write_record(["x", "t", "u_pred", "u_ref", "abs_err"])?;
    let nx = ev.grid.x.len();
    for (k, (p, r)) in ev.pred.iter().zip(&ev.reference).enumerate() {
        let (x, t) = (ev.grid.x[k % nx], ev.grid.t[k / nx]);
        w.serialize((x, t, p, r, (p - r).abs()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_slices(path: &Path, x: &[f64], slices: &[Slice]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(fs::File::create(path)?));
    w.write_record(["t_slice", "x", "u_pred", "u_ref"])?;
    for (s, p, r) in slices {
        for i in 0..x.len() {
            w.serialize((s.t, x[i], p[i], r[i]))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub rel_l2: f64,
    pub rel_linf: f64,
    pub final_loss: f64,
    pub train_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub pitdn: RunOutcome,
    pub pinn: RunOutcome,
}

impl Comparison {
    /// Baseline error over time-derivative error.
    pub fn ratio(&self) -> f64 {
        self.pinn.metrics.rel_l2 / self.pitdn.metrics.rel_l2
    }

    pub fn rows(&self) -> [ComparisonRow; 2] {
        [&self.pitdn, &self.pinn].map(|r| ComparisonRow {
            method: r.metrics.method,
            rel_l2: r.metrics.rel_l2,
            rel_linf: r.metrics.rel_linf,
            final_loss: r.metrics.final_loss.total,
            train_seconds: r.metrics.train_seconds,
        })
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>12} {:>12} {:>12} {:>10}\n",
            "method", "rel_l2", "rel_linf", "final_loss", "seconds"
        );
        for r in self.rows() {
            s += &format!(
                "{:<8} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.1}\n",
                r.method.as_str(),
                r.rel_l2,
                r.rel_linf,
                r.final_loss,
                r.train_seconds
            );
        }
        s += &format!("pinn / pitdn rel_l2 ratio: {:.2}\n", self.ratio());
        s
    }
}

/// Both methods on one collocation set and reference. Outputs go to
/// `out/pitdn` and `out/pinn`, plus `out/comparison.csv`.
pub fn compare(base: &ExperimentConfig, out: Option<&Path>) -> Result<Comparison, HarnessError> {
    let spec = base.spec()?;
    let reference = certified_reference(&spec)?;
    let colloc = build_collocation(&spec, &base.counts(), base.seed)?;
    let sub = |m: Method| ExperimentConfig {
        method: m,
        out_dir: out.map(|d| d.join(m.as_str())),
        ..base.clone()
    };
    let pitdn = run_with(&sub(Method::Pitdn), &spec, &reference, &colloc)?;
    let pinn = run_with(&sub(Method::Pinn), &spec, &reference, &colloc)?;
    let cmp = Comparison { pitdn, pinn };
    if let Some(dir) = out {
        let mut w = csv::Writer::from_writer(BufWriter::new(fs::File::create(dir.join("comparison.csv"))?));
        for r in cmp.rows() {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(cmp)
}

/// Reads `metrics.json` next to a checkpoint, if there is one.
pub fn sibling_metrics(checkpoint: &Path) -> Option<MetricsReport> {
    let dir = checkpoint.parent().map(PathBuf::from).unwrap_or_default();
    let text = fs::read_to_string(dir.join("metrics.json")).ok()?;
    serde_json::from_str(&text).ok()
}
