//! Picard iteration on one time slab: the Gamma metric between successive
//! iterates and its contraction ratios.
//!
//!     cargo run --release --example picard_contraction

use std::f64::consts::PI;

use dnslab::picard::{solve_slab, PicardConfig, SourceLag};
use dnslab::reform::to_reform;
use dnslab::{Grid, Params, PrimitiveState, ScalarField, VectorField};

fn main() -> dnslab::Result<()> {
    let params = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
    let grid = Grid::periodic_1d(128, 1.0)?;
    let rho = ScalarField::from_fn(&grid, |x| 1.0 + 0.05 * (2.0 * PI * x[0]).sin());
    let u = VectorField::from_fn(&grid, |x| [0.05 * (2.0 * PI * x[0]).cos(), 0.0, 0.0]);
    let start = to_reform(&PrimitiveState::new(rho, u, 0.0), &params, &grid)?;
    for lag in [SourceLag::New, SourceLag::Old] {
        let mut cfg = PicardConfig::new(1e-3);
        cfg.source_lag = lag;
        cfg.tol = Some(1e-28);
        cfg.k_max = 8;
        let mut log = Vec::new();
        let out = solve_slab(&start, 10, cfg.dt, &params, &grid, &cfg, 0, &mut log)?;
        println!("source lag {lag:?}, converged {}", out.converged);
        for (k, w) in out.gammas.iter().enumerate() {
            let ratio = if k > 0 { w / out.gammas[k - 1] } else { f64::NAN };
            println!("  k={:<2} Gamma={w:.3e} ratio={ratio:.3e}", k + 1);
        }
    }
    Ok(())
}
