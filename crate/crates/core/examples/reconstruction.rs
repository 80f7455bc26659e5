//! Recover a state from its time derivative with the trapezoid Volterra
//! operator, for first- and second-order problems.

use pitdn::diffcore::{Channels, Jet2};
use pitdn::volterra::{reconstruct1, reconstruct2, QuadratureConfig, VolterraError};

fn main() -> Result<(), VolterraError> {
    // u_t = cos(t), u(0) = 0  =>  u = sin(t)
    for m in [5, 10, 20, 40] {
        let q = QuadratureConfig { m_per_unit_time: m };
        let r = reconstruct1::<f64, VolterraError, _>(
            |s, _| Ok(Jet2::constant(s.cos())),
            Jet2::zero(),
            1.0,
            1.0,
            &q,
            Channels::VALUE,
            Channels::VALUE,
        )?;
        println!("M = {m:>2}: u(1) = {:.10}  error {:.3e}", r.state.value, (r.state.value - 1f64.sin()).abs());
    }

    // u_tt = -u with u(0) = 0, u_t(0) = 1 would be sin(t); feed the exact
    // acceleration and recover state and rate together
    let q = QuadratureConfig::default();
    let r = reconstruct2::<f64, VolterraError, _>(
        |s, _| Ok(Jet2::constant(-s.sin())),
        Jet2::zero(),
        Jet2::constant(1.0),
        0.8,
        1.0,
        &q,
        Channels::VALUE,
        Channels::VALUE,
    )?;
    println!(
        "second order at t = 0.8: u {:.6} (sin {:.6}), u_t {:.6} (cos {:.6})",
        r.state.value,
        0.8f64.sin(),
        r.rate.value,
        0.8f64.cos()
    );

    // at t = 0 the reconstruction returns the initial data untouched
    let r0 = reconstruct1::<f64, VolterraError, _>(
        |_, _| Ok(Jet2::constant(123.0)),
        Jet2::constant(0.25),
        0.0,
        1.0,
        &q,
        Channels::VALUE,
        Channels::VALUE,
    )?;
    println!("u(0) = {} whatever the rate", r0.state.value);
    Ok(())
}
