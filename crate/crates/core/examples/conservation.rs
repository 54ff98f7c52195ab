//! Mass, momentum and energy bookkeeping of the full scheme under grid and
//! time-step refinement on smooth periodic data.
//!
//!     cargo run --release --example conservation

use std::f64::consts::PI;

use dnslab::momentum::MomentumStepConfig;
use dnslab::picard::PicardConfig;
use dnslab::study::{refinement_study, RefinementConfig};
use dnslab::{Grid, Params, PrimitiveState, ScalarField, VectorField};

fn main() -> dnslab::Result<()> {
    let params = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
    let grid = Grid::periodic_1d(512, 1.0)?;
    let init = |g: &Grid| {
        let rho = ScalarField::from_fn(g, |x| 1.0 + 0.2 * (2.0 * PI * x[0]).sin());
        let u = VectorField::from_fn(g, |x| [0.5 + 0.1 * (2.0 * PI * x[0]).sin(), 0.0, 0.0]);
        Ok(PrimitiveState::new(rho, u, 0.0))
    };
    let mut cfg = PicardConfig::new(1e-3);
    cfg.momentum = MomentumStepConfig::default().with_theta(0.5);
    cfg.monitors = false;
    let study = RefinementConfig { levels: vec![256, 512, 1024] };
    let table = refinement_study(init, &params, &grid, 0.1, &cfg, &study)?;
    println!("{:>6} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>8}", "n", "dt", "mass", "momentum", "energy", "E-E0 max", "nondecay", "wall");
    for r in &table.rows {
        println!(
            "{:>6} {:>10.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>8.2}",
            r.n, r.dt, r.mass_drift, r.momentum_drift, r.energy_residual, r.energy_increase, r.nondecay_margin, r.wall_time_s
        );
    }
    println!("momentum shrink {:?}", table.shrink_factors(|r| r.momentum_drift));
    println!("energy shrink   {:?}", table.shrink_factors(|r| r.energy_residual));
    println!("observed order rho {:?}, u {:?}", table.order_rho, table.order_u);
    Ok(())
}
