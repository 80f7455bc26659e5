//! Time-derivative loss and the PINN baseline at initialization, with the
//! fast gradient checked against the taped one.

use pitdn::loss::{loss_and_grad, loss_and_grad_taped, GradWorkspace, LossWeights, Method};
use pitdn::net::{init_xavier, MlpConfig};
use pitdn::problems::ProblemSpec;
use pitdn::sampling::{build_collocation, CollocationCounts};
use pitdn::volterra::QuadratureConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = MlpConfig::default();
    let params = init_xavier(&cfg)?;
    let (w, q) = (LossWeights::default(), QuadratureConfig::default());
    let counts = CollocationCounts {
        n_interior: 200,
        n_boundary: 40,
        n_initial: 40,
    };
    for name in ["advection", "burgers", "klein-gordon"] {
        let spec = ProblemSpec::by_name(name)?;
        let colloc = build_collocation(&spec, &counts, 0)?;
        let mut ws = GradWorkspace::new(&cfg)?;
        for m in [Method::Pitdn, Method::Pinn] {
            let (l, g) = loss_and_grad(m, params.as_slice(), &mut ws, &spec, &colloc, &w, &q)?;
            let taped = loss_and_grad_taped(m, &params, &spec, &colloc, &w, &q)?;
            let diff = g.iter().zip(&taped.grad).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            println!(
                "{name:<13} {:<6} total {:.4e} (pde {:.3e}, bc {:.3e}, ic {:.3e})  |g_fast - g_tape| {diff:.1e}",
                m.as_str(),
                l.total,
                l.pde,
                l.bc,
                l.ic
            );
        }
    }
    Ok(())
}
