//! Latin hypercube collocation sets, written as CSV.
//!
//!     cargo run --example collocation -- burgers 7 > points.csv

use pitdn::problems::ProblemSpec;
use pitdn::sampling::{build_collocation, CollocationCounts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let spec = ProblemSpec::by_name(args.get(1).map_or("advection", String::as_str))?;
    let seed = args.get(2).map_or(Ok(0), |s| s.parse())?;
    let set = build_collocation(&spec, &CollocationCounts::default(), seed)?;
    eprintln!(
        "{}: {} interior, {} boundary, {} initial (seed {seed})",
        spec.name,
        set.interior.len(),
        set.boundary.len(),
        set.initial.len()
    );
    set.write_csv(std::io::stdout().lock())?;
    Ok(())
}
