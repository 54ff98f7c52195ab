//! Drive the command layer from a TOML config, as the `dnslab` binary does.
//!
//!     cargo run --release --example run_from_config -- configs/conservation.toml

use dnslab::commands::{self, Context};
use dnslab::config::parse_config;

fn main() -> dnslab::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/conservation.toml".into());
    let mut cfg = parse_config(path.as_ref())?;
    cfg.t_end = cfg.t_end.min(0.02);
    let ctx = Context::new(std::env::temp_dir().join("dnslab_runs"));
    for out in [commands::check_init(&cfg, &ctx)?, commands::run(&cfg, &ctx)?] {
        print!("{}", out.summary);
        if let Some(dir) = out.run_dir {
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}
