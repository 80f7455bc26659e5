//! Primal and differentiated residuals of the benchmark problems on their
//! exact or manufactured solutions.

use pitdn::diffcore::{jet_eval, Channels};
use pitdn::problems::{Fields, ProblemSpec, PROBLEM_NAMES};
use pitdn::reference::exact_field;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("problems: {PROBLEM_NAMES:?}");
    for spec in [ProblemSpec::advection(1.0), ProblemSpec::klein_gordon()] {
        let mut worst = 0.0f64;
        for (x, t) in [(0.3, 0.1), (1.7, 0.6), (0.9, 0.95)] {
            let u = exact_field(&spec, x, t)?;
            let r = spec.primal_residual(&Fields::state(u), x, t)?;
            worst = worst.max(r.abs());
        }
        println!("{:<13} max |R| on the exact solution: {worst:.2e}", spec.name);
    }

    // advection: v = u_t = -cos(x - t) satisfies v_t + c v_x = 0
    let spec = ProblemSpec::advection(1.0);
    let v = jet_eval(|x, t| Ok((x - t).cos().scale(-1.0)), 1.0, 2.0, Channels::ALL)?;
    let f = Fields {
        state: None,
        rate: Some(v),
        accel: None,
    };
    println!("advection differentiated residual: {:.2e}", spec.diff_residual(&f, 1.0, 2.0)?);

    let b = ProblemSpec::burgers(0.01 / std::f64::consts::PI);
    println!("burgers initial rate at x = 0.5: {:.7}", b.initial_rate(0.5));
    Ok(())
}
