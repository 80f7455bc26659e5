//! Adam warm-up followed by L-BFGS on the Rosenbrock function.

use pitdn::loss::LossBreakdown;
use pitdn::optim::{lbfgs_minimize, train, OptimError, TrainSchedule};

fn rosenbrock(p: &[f64]) -> Result<(LossBreakdown, Vec<f64>), OptimError> {
    let (x, y) = (p[0], p[1]);
    let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
    let g = vec![-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)];
    Ok((LossBreakdown::scalar(f), g))
}

fn main() -> Result<(), OptimError> {
    let s = TrainSchedule {
        lbfgs_max_iters: 100,
        grad_tol: 1e-12,
        ..Default::default()
    };
    let out = lbfgs_minimize(&mut rosenbrock, vec![-1.2, 1.0], &s, 0)?;
    println!(
        "L-BFGS alone: f = {:.3e} at {:?} after {} iterations ({:?})",
        out.loss.total, out.params, out.iterations, out.termination
    );
    let held = out.wolfe.iter().all(|w| w.sufficient_decrease(s.wolfe_c1) && w.curvature(s.wolfe_c2));
    println!("strong Wolfe held on every step: {held}");

    let s = TrainSchedule {
        adam_iters: 500,
        adam_lr: 1e-2,
        ..s
    };
    let r = train(&mut rosenbrock, vec![-1.2, 1.0], &s)?;
    println!(
        "Adam then L-BFGS: f = {:.3e}, {} iterations, {:.3}s",
        r.final_loss.total, r.iterations_used, r.wall_clock_seconds
    );
    Ok(())
}
