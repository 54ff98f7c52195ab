//! Manufactured solution for the periodic Lame problem; the discrete
//! solution converges at second order.
//!
//!     cargo run --release --example lame_convergence

use std::f64::consts::PI;

use dnslab::admissibility::fit_log_slope;
use dnslab::grid::Boundary;
use dnslab::krylov::KrylovConfig;
use dnslab::ops::{lame_solve, Lame};
use dnslab::{Grid, VectorField};

fn main() -> dnslab::Result<()> {
    let lame = Lame::new(1.0, 0.5);
    let k = 2.0 * PI;
    // u = (sin ky, sin kx) is divergence free, so L u = alpha k^2 u.
    let mut dx = Vec::new();
    let mut err = Vec::new();
    for n in [16, 32, 64, 128] {
        let g = Grid::uniform(2, n, 0.0, 1.0, Boundary::Periodic)?;
        let exact = VectorField::from_fn(&g, |x| [(k * x[1]).sin(), (k * x[0]).sin(), 0.0]);
        let z = VectorField::from_fn(&g, |x| [lame.alpha * k * k * (k * x[1]).sin(), lame.alpha * k * k * (k * x[0]).sin(), 0.0]);
        let s = lame_solve(&z, lame, &g, &KrylovConfig::default())?;
        let e = s
            .u
            .iter()
            .zip(exact.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)))
            .sum::<f64>()
            * g.cell_volume();
        println!("n={n:<4} L2 error {:.3e}  krylov its {} residual {:.1e}", e.sqrt(), s.report.iterations, s.report.residual);
        dx.push(1.0 / n as f64);
        err.push(e.sqrt());
    }
    println!("order {:.3}", fit_log_slope(&dx, &err).0);
    Ok(())
}
