use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dnslab::commands::{self, Context, Invariant, Outcome};
use dnslab::config::parse_config;

#[derive(Parser)]
#[command(name = "dnslab", version, about = "Degenerate-viscosity compressible NS solver lab")]
struct Cli {
    /// Run configuration (TOML); may also be given after the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base directory for run outputs.
    #[arg(long, global = true, env = "DNSLAB_OUTPUT")]
    output_dir: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Comma-separated invariants whose violation exits with status 2.
    #[arg(long, global = true, value_delimiter = ',')]
    fatal_invariants: Vec<Invariant>,
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Admissibility and compatibility report for the initial data.
    CheckInit {
        #[arg(value_name = "CONFIG")]
        file: Option<PathBuf>,
    },
    /// Nonlinear solve with diagnostics and snapshots.
    Run {
        #[arg(value_name = "CONFIG")]
        file: Option<PathBuf>,
    },
    /// Transport schemes against characteristic oracles.
    OracleTransport {
        #[arg(value_name = "CONFIG")]
        file: Option<PathBuf>,
    },
    /// The (eps, eta) continuation sweep.
    Continuation {
        #[arg(value_name = "CONFIG")]
        file: Option<PathBuf>,
    },
    /// Grid and time-step refinement study.
    Convergence {
        #[arg(value_name = "CONFIG")]
        file: Option<PathBuf>,
    },
    /// Print a snapshot header.
    Inspect { snapshot: PathBuf },
}

fn execute(cli: Cli) -> dnslab::Result<Outcome> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build_global()
        .map_err(|e| dnslab::Error::Config(e.to_string()))?;
    let (name, positional) = match cli.command {
        Command::Inspect { snapshot } => return commands::inspect(&snapshot),
        Command::CheckInit { file } => ("check-init", file),
        Command::Run { file } => ("run", file),
        Command::OracleTransport { file } => ("oracle-transport", file),
        Command::Continuation { file } => ("continuation", file),
        Command::Convergence { file } => ("convergence", file),
    };
    let path = positional
        .or(cli.config)
        .ok_or_else(|| dnslab::Error::Config(format!("{name} needs a config file")))?;
    let cfg = parse_config(&path)?;
    let ctx = Context {
        base: commands::output_base(cli.output_dir.as_deref(), &cfg),
        config_path: Some(path),
        fatal: cli.fatal_invariants,
    };
    match name {
        "check-init" => commands::check_init(&cfg, &ctx),
        "run" => commands::run(&cfg, &ctx),
        "oracle-transport" => commands::oracle_transport(&cfg, &ctx),
        "continuation" => commands::continuation_sweep(&cfg, &ctx),
        _ => commands::convergence(&cfg, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    match execute(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = write!(stdout, "{}", out.summary);
            if let Some(dir) = &out.run_dir {
                let _ = writeln!(stdout, "output: {}", dir.display());
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
