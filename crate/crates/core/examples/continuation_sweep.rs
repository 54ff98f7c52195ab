//! Vanishing-regularization sweep on power-law vacuum data: shrink eps at
//! fixed eta, then shrink eta, and watch the solutions settle.
//!
//!     cargo run --release --example continuation_sweep

use dnslab::admissibility::{make_power_law_init, Bump};
use dnslab::picard::{continuation, ContinuationPlan, PicardConfig};
use dnslab::{Grid, Params};

fn main() -> dnslab::Result<()> {
    let params = Params::new(1.0, 1.5, 0.9, 1.0, 0.0);
    let grid = Grid::far_field(1, 256, 4.0)?;
    let init = make_power_law_init(2.0, Some(&Bump { amplitude: 0.1, radius: 1.0 }), &grid, &params)?;
    let plan = ContinuationPlan::new(ContinuationPlan::geometric(1e-2, 1e-6, 5), ContinuationPlan::geometric(1e-1, 1e-4, 4));
    let table = continuation(&init, &params, &grid, &plan, 0.02, &PicardConfig::new(1e-3))?;
    println!("{:>8} {:>8} {:>10} {:>10} {:>10} {:>10}", "eps", "eta", "d rho", "d u", "d psi", "min rho");
    let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2e}"));
    for r in &table.rows {
        println!(
            "{:>8.0e} {:>8.0e} {:>10} {:>10} {:>10} {:>10}",
            r.eps,
            r.eta,
            show(r.dist_rho),
            show(r.dist_u),
            show(r.dist_psi),
            show(r.interior_min_rho)
        );
    }
    println!("eps monotone {}, eta monotone {}", table.eps_monotone(), table.eta_monotone());
    Ok(())
}
