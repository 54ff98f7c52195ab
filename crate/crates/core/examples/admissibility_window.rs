//! Power-law vacuum profiles against the exponent windows.
//!
//!     cargo run --release --example admissibility_window

use dnslab::admissibility::{admissible_range, check_admissible, ClassifyConfig, NormSet, RadialProfile};
use dnslab::Params;

fn main() -> dnslab::Result<()> {
    let params = Params::new(1.0, 1.5, 0.9, 1.0, 0.0).with_dim(3);
    let cfg = ClassifyConfig::default();
    println!("window          {:?}", admissible_range(1.5, 0.9, None)?);
    println!("window (q=12)   {:?}", admissible_range(1.5, 0.9, Some(12.0))?);

    for (a, set) in [
        (1.0, NormSet::Base),
        (2.0, NormSet::Base),
        (3.0, NormSet::Base),
        (3.0, NormSet::Lq { q: 12.0 }),
    ] {
        let report = check_admissible(&RadialProfile::new(a)?, &params, set, &cfg)?;
        println!("\na = {a}, {set:?}\n{report}");
    }
    Ok(())
}
