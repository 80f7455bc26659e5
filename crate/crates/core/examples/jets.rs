//! Second-order forward-mode jets and a reverse-mode gradient through them.

use pitdn::diffcore::{jet_eval, param_gradient, Channels, Jet2, Scalar};

fn main() {
    // u = sin(x - t) exp(-t): every partial up to second order in one pass
    let u = |x: Jet2<f64>, t: Jet2<f64>| Ok((x - t).sin() * t.scale(-1.0).exp());
    let j = jet_eval(u, 0.3, 0.7, Channels::ALL).unwrap();
    println!("u     = {:+.6}", j.value);
    println!("u_x   = {:+.6}   u_t  = {:+.6}", j.d_x, j.d_t);
    println!("u_xx  = {:+.6}   u_xt = {:+.6}   u_tt = {:+.6}", j.d_xx, j.d_xt, j.d_tt);

    // the same jets over taped scalars: d/dp of (u_x(p) + u_tt(p))^2
    // for u = p0 * sin(p1 x) * t^2 at (x, t) = (0.5, 2)
    let g = param_gradient(&[1.5, 0.8], |_, p| {
        let x = Jet2::seed_x(Scalar::cst(0.5));
        let t = Jet2::seed_t(Scalar::cst(2.0));
        let amp = Jet2::constant(p[0]);
        let freq = Jet2::constant(p[1]);
        let u = amp * (freq * x).sin() * t * t;
        let r = u.d_x + u.d_tt;
        Ok(r * r)
    })
    .unwrap();
    println!("loss = {:.6}, grad = {:?}", g.value, g.grad);
}
