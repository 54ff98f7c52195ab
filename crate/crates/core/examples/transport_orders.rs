//! Observed orders of the upwind transport schemes against exact
//! characteristic solutions, for the advected scalar and the nonlinear
//! quantities phi, h and varphi.
//!
//!     cargo run --release --example transport_orders

use dnslab::study::{transport_order_study, OracleStudyConfig};
use dnslab::transport::{Method, TransportScheme};
use dnslab::Params;

fn main() -> dnslab::Result<()> {
    let params = Params::new(1.0, 1.5, 0.5, 1.0, 0.0);
    let cfg = OracleStudyConfig { methods: vec![Method::Upwind1, Method::Upwind2], ..Default::default() };
    let table = transport_order_study(&cfg, &TransportScheme::default(), &params)?;
    for r in &table.rows {
        println!("{:?} {:?} {:?} n={:<4} err={:.3e}", r.method, r.case, r.quantity, r.n, r.error);
    }
    println!();
    for f in &table.fits {
        println!("{:?} {:?} {:?}: order {:.3} +- {:.3}", f.method, f.case, f.quantity, f.order, f.stderr);
    }
    Ok(())
}
