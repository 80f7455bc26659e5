//! Quadrature order, error propagation, the Wirtinger bound and
//! derivative checks, without any training.

use pitdn::harness::{check_gradients, check_propagation, check_quadrature, check_wirtinger};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for q in check_quadrature()? {
        println!("quadrature  {}", q.summary());
    }
    let p = check_propagation(0)?;
    println!("propagation max ratio {:.4} over {} fields", p.max_ratio, p.fields);
    let w = check_wirtinger(1.0)?;
    for m in &w.modes {
        match m.ratio {
            Some(r) => println!("wirtinger   k = {}: {:.4} >= {:.4}", m.k, r, m.bound),
            None => println!("wirtinger   k = {}: skipped, not mean-zero", m.k),
        }
    }
    for e in check_gradients(0)?.entries {
        println!(
            "gradients   {:<13} {:<6} jets {:.1e}/{:.1e}  fused-taped {:.1e}  fused-fd {:.1e}",
            e.problem,
            e.method.as_str(),
            e.jet_first,
            e.jet_second,
            e.fused_vs_taped,
            e.fused_vs_fd
        );
    }
    Ok(())
}
