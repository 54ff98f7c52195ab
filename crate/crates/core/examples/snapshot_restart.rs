//! Run, save a snapshot, reload it and continue: the restarted run matches
//! an uninterrupted one bit for bit.
//!
//!     cargo run --release --example snapshot_restart

use std::f64::consts::PI;

use dnslab::picard::{solve_from, solve_nonlinear, PicardConfig};
use dnslab::snapshot::Snapshot;
use dnslab::{Grid, Params, PrimitiveState, ScalarField, VectorField};

fn main() -> dnslab::Result<()> {
    let params = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
    let grid = Grid::periodic_1d(64, 1.0)?;
    let rho = ScalarField::from_fn(&grid, |x| 1.0 + 0.2 * (2.0 * PI * x[0]).sin());
    let u = VectorField::from_fn(&grid, |x| [0.5 + 0.1 * (2.0 * PI * x[0]).sin(), 0.0, 0.0]);
    let init = PrimitiveState::new(rho, u, 0.0);
    let cfg = PicardConfig::new(1e-3);

    let full = solve_nonlinear(&init, &params, &grid, 0.02, &cfg)?;
    let half = solve_nonlinear(&init, &params, &grid, 0.01, &cfg)?;
    let path = std::env::temp_dir().join("dnslab_example.snap");
    Snapshot::new(params, grid.clone(), half.final_state().clone())?.save(&path)?;
    println!("{:#?}", Snapshot::inspect(&path)?);

    let snap = Snapshot::load(&path)?;
    let resumed = solve_from(snap.state, &snap.params, &snap.grid, 0.01, &cfg)?;
    let same = resumed.final_state().u == full.final_state().u;
    println!("restart reproduces the uninterrupted run: {same}");
    std::fs::remove_file(path)?;
    Ok(())
}
