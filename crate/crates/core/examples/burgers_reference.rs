//! Finite-difference Burgers reference with a three-grid refinement study.
//!
//!     cargo run --release --example burgers_reference -- out/burgers

use pitdn::reference::{burgers_fd_solve, burgers_min_nt, certified_burgers};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let nu = 0.01 / std::f64::consts::PI;
    let nx = 256;
    let nt = burgers_min_nt(nx, nu, 1.0, 4);
    let coarse = burgers_fd_solve(nx, nt, nu, 1.0)?;
    println!("nx {nx}: {nt} RK4 steps, u(0.5, 1) = {:.6}", coarse.sample(0.5, 1.0)?);

    let (fine, report) = certified_burgers(nu, 1.0, 512)?;
    for (k, g) in report.grids.iter().enumerate() {
        println!("grid {g:>5}: rms error vs next {:?}", report.errors.get(k));
    }
    println!("observed orders {:?}, certified: {}", report.orders, report.passed);
    if let Some(dir) = std::env::args().nth(1) {
        fine.save(&dir, Some(&report))?;
        println!("wrote {dir}/solution.csv and solution.json");
    }
    Ok(())
}
