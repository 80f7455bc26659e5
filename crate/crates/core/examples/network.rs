//! Build a tanh network, read its input partials, round-trip a checkpoint.

use pitdn::diffcore::Jet2;
use pitdn::net::{init_xavier, MlpConfig, ParamVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = MlpConfig {
        layer_sizes: vec![2, 10, 10, 10, 1],
        seed: 7,
    };
    let net = init_xavier(&cfg)?;
    println!("{} parameters in layers {:?}", net.len(), net.layer_sizes());

    for (x, t) in [(0.0, 0.0), (0.5, 0.25), (-0.8, 1.0)] {
        let j = net.forward(Jet2::seed_x(x), Jet2::seed_t(t))?;
        println!(
            "N({x:+.2}, {t:.2}) = {:+.5}  d_x {:+.5}  d_t {:+.5}  d_xx {:+.5}",
            j.value, j.d_x, j.d_t, j.d_xx
        );
    }

    let path = std::env::temp_dir().join("pitdn-example.ckpt");
    net.save(&path)?;
    let back = ParamVector::load(&path)?;
    assert_eq!(back, net);
    println!("checkpoint {} round-trips", path.display());
    Ok(())
}
