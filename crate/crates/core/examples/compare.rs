//! Both methods on one collocation set, side by side.
//!
//!     cargo run --release --example compare -- burgers out/burgers

use pitdn::harness::{compare, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = ExperimentConfig {
        problem: args.first().cloned().unwrap_or_else(|| "advection".into()),
        log_every: 1000,
        ..Default::default()
    };
    let out = args.get(1).map(std::path::PathBuf::from);
    if let Some(d) = &out {
        std::fs::create_dir_all(d)?;
    }
    let c = compare(&cfg, out.as_deref())?;
    print!("{}", c.table());
    Ok(())
}
