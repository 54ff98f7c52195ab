//! Constant-coefficient momentum step: a sine mode decays like
//! exp(-2 a k^2 t) under the implicit Lame operator.
//!
//!     cargo run --release --example heat_decay

use std::f64::consts::PI;

use dnslab::momentum::{advance_momentum_varphi, MomentumStepConfig};
use dnslab::{Grid, Params, ScalarField, VectorField};

fn main() -> dnslab::Result<()> {
    let gamma = 1.5;
    // A chosen so that a = 1
    let params = Params::new((gamma - 1.0) / gamma, gamma, 0.5, 1.0, 0.0);
    let a = params.derived()?.a;
    let n = 256;
    let grid = Grid::periodic_1d(n, 1.0)?;
    let zero = VectorField::zeros(1, n);
    let one = ScalarField::constant(n, 1.0);
    let cfg = MomentumStepConfig::default();
    let dt = 1e-5;
    let mut u = VectorField(vec![ScalarField::from_fn(&grid, |x| (2.0 * PI * x[0]).sin())]);
    let mut t = 0.0;
    for step in 1..=1000 {
        u = advance_momentum_varphi(&u, &zero, &one, &one, &zero, &params, dt, &grid, &cfg)?.u;
        t += dt;
        if step % 200 == 0 {
            let amp = u[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let exact = (-2.0 * a * (2.0 * PI).powi(2) * t).exp();
            println!("t={t:.4} amplitude {amp:.6} exact {exact:.6} rel err {:.2e}", (amp - exact).abs() / exact);
        }
    }
    Ok(())
}
