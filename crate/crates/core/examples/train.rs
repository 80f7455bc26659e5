//! Train one model and report errors against the reference.
//!
//!     cargo run --release --example train -- advection pitdn out/adv
//!
//! Pass a fourth argument to shorten the schedule (Adam iterations; L-BFGS
//! gets the same budget).

use pitdn::harness::{run_experiment, ExperimentConfig};
use pitdn::loss::Method;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = ExperimentConfig {
        problem: args.first().cloned().unwrap_or_else(|| "advection".into()),
        method: args.get(1).map_or(Ok(Method::Pitdn), |m| m.parse())?,
        out_dir: args.get(2).map(Into::into),
        log_every: 250,
        ..Default::default()
    };
    if let Some(n) = args.get(3) {
        cfg.adam_iters = n.parse()?;
        cfg.lbfgs_max_iters = cfg.adam_iters;
    }
    let r = run_experiment(&cfg)?;
    let m = &r.metrics;
    println!("rel_l2 {:.3e}   rel_linf {:.3e}   ({} reference)", m.rel_l2, m.rel_linf, m.reference);
    for s in &m.slices {
        println!("  t = {:.3}: rel_l2 {:.3e}  max |err| {:.3e}", s.t, s.rel_l2, s.max_abs);
    }
    println!("{} iterations, stopped by {:?}, {:.1}s", m.iterations_used, m.termination, m.train_seconds);
    Ok(())
}
