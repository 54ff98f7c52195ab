//! The command-line subcommands as library functions. Each writes its
//! artifacts into a run directory and returns an exit code with a summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};

use crate::admissibility::{check_admissible, check_admissible_grid, RadialProfile, Verdict};
use crate::config::{InitialData, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::output::{write_diagnostics_csv, write_rows};
use crate::picard::{continuation, solve_from, NonlinearRun};
use crate::snapshot::Snapshot;
use crate::study::{refinement_study, transport_order_study};

/// Invariants that can be promoted to fatal with `--fatal-invariants`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Invariant {
    /// `E(t) <= E(0) + 1e-10 (1 + E(0))`.
    Energy,
    /// Relative mass drift at most `1e-6`.
    Mass,
    /// `sup|u(t)| >= |M(0)|/m(0) - 1e-4`.
    Nondecay,
    /// `|h varphi - 1|` at most `1e-4`.
    Relations,
    /// Every Picard slab reached its tolerance.
    Contraction,
    /// Continuation distances decrease along both phases.
    Monotone,
}

impl Invariant {
    pub const ALL: [Invariant; 6] = [
        Invariant::Energy,
        Invariant::Mass,
        Invariant::Nondecay,
        Invariant::Relations,
        Invariant::Contraction,
        Invariant::Monotone,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Invariant::Energy => "energy",
            Invariant::Mass => "mass",
            Invariant::Nondecay => "nondecay",
            Invariant::Relations => "relations",
            Invariant::Contraction => "contraction",
            Invariant::Monotone => "monotone",
        }
    }
}

impl FromStr for Invariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Invariant::ALL
            .into_iter()
            .find(|i| i.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = Invariant::ALL.iter().map(|i| i.name()).collect();
                format!("unknown invariant {s:?} (expected one of {})", names.join(", "))
            })
    }
}

/// Exit code for a fatal invariant violation; `1` is used for errors and
/// failed admissibility checks.
pub const EXIT_INVARIANT: i32 = 2;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: String,
    pub run_dir: Option<PathBuf>,
    pub violations: Vec<(Invariant, String)>,
}

impl Outcome {
    fn new(summary: String, run_dir: Option<PathBuf>) -> Self {
        Self { exit_code: 0, summary, run_dir, violations: Vec::new() }
    }

    fn flag(&mut self, inv: Invariant, msg: String, fatal: &[Invariant]) {
        warn!("invariant {}: {msg}", inv.name());
        if fatal.contains(&inv) {
            self.exit_code = EXIT_INVARIANT;
        }
        self.violations.push((inv, msg));
    }
}

/// Where the subcommands write. `base` is resolved by the caller from the
/// command line, `DNSLAB_OUTPUT`, the config and finally `runs`.
#[derive(Debug, Clone)]
pub struct Context {
    pub base: PathBuf,
    pub config_path: Option<PathBuf>,
    pub fatal: Vec<Invariant>,
}

impl Context {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self { base: base.into(), config_path: None, fatal: Vec::new() }
    }

    /// Creates `<base>/<run name>/<command>` and writes the resolved config.
    pub fn run_dir(&self, cfg: &RunConfig, command: &str) -> Result<PathBuf> {
        let dir = self.base.join(cfg.run_name(self.config_path.as_deref())).join(command);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("config.toml"), cfg.resolved_toml()?)?;
        Ok(dir)
    }
}

/// Output base directory: explicit value, then the config's, then `runs`.
pub fn output_base(explicit: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Admissibility and compatibility report for the configured initial data;
/// exit code 0 iff the verdict is Finite.
pub fn check_init(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let dir = ctx.run_dir(cfg, "check-init")?;
    let p = cfg.params();
    let grid = cfg.build_grid()?;
    let set = cfg.admissibility.norm_set;
    let classify = &cfg.admissibility.classify;
    let state = cfg.initial_primitive(&grid)?;
    let grid_report = check_admissible_grid(&state, &p, &grid, set, classify)?;
    let report = match &cfg.initial {
        InitialData::PowerLaw { a_exp, .. } => check_admissible(&RadialProfile::new(*a_exp)?, &p, set, classify)?,
        _ => grid_report.clone(),
    };
    fs::write(dir.join("admissibility.json"), serde_json::to_string_pretty(&report)?)?;
    fs::write(dir.join("admissibility_grid.json"), serde_json::to_string_pretty(&grid_report)?)?;
    let mut summary = format!("{report}");
    if !summary.ends_with('\n') {
        summary.push('\n');
    }
    if report.verdict != Verdict::Finite {
        for n in report.diverging() {
            let _ = writeln!(summary, "diverging: {} (slope {:.3})", n.name, n.slope.unwrap_or(f64::NAN));
        }
    }
    let _ = writeln!(summary, "verdict: {}", report.verdict);
    let mut out = Outcome::new(summary, Some(dir));
    out.exit_code = if report.verdict == Verdict::Finite { 0 } else { 1 };
    Ok(out)
}

fn check_run_invariants(run: &NonlinearRun, out: &mut Outcome, fatal: &[Invariant]) {
    let Some(r0) = run.records.first() else { return };
    for r in &run.records {
        if r.energy > r0.energy + 1e-10 * (1.0 + r0.energy) {
            out.flag(Invariant::Energy, format!("E({}) = {} exceeds E(0) = {}", r.t, r.energy, r0.energy), fatal);
            break;
        }
    }
    for r in &run.records {
        let drift = (r.mass - r0.mass).abs() / r0.mass;
        if drift > 1e-6 {
            out.flag(Invariant::Mass, format!("relative mass drift {drift:e} at t={}", r.t), fatal);
            break;
        }
    }
    for r in &run.records {
        if r.sup_u < r.c_u - 1e-4 {
            out.flag(Invariant::Nondecay, format!("sup|u| = {} below {} at t={}", r.sup_u, r.c_u, r.t), fatal);
            break;
        }
    }
    for r in &run.records {
        if let Some((_, v)) = r.monitors.iter().find(|(n, _)| n == "rel h_varphi") {
            if *v > 1e-4 {
                out.flag(Invariant::Relations, format!("h varphi - 1 = {v:e} at t={}", r.t), fatal);
                break;
            }
        }
    }
    if !run.converged {
        out.flag(Invariant::Contraction, "some slab stopped at k_max above tolerance".into(), fatal);
    }
}

/// Nonlinear solve with diagnostics CSV, convergence log and snapshots.
pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let dir = ctx.run_dir(cfg, "run")?;
    let p = cfg.params();
    let grid = cfg.build_grid()?;
    let start = cfg.initial_state(&grid)?;
    if matches!(cfg.initial, InitialData::PowerLaw { .. }) {
        let report = check_admissible_grid(
            &cfg.initial_primitive(&grid)?,
            &p,
            &grid,
            cfg.admissibility.norm_set,
            &cfg.admissibility.classify,
        )?;
        if report.verdict != Verdict::Finite {
            warn!("initial data admissibility verdict on the box: {}", report.verdict);
        }
    }
    let picard = cfg.picard_config();
    info!("run {} on {} nodes", cfg.run_name(ctx.config_path.as_deref()), grid.len());
    let result = solve_from(start, &p, &grid, cfg.t_end, &picard)?;
    let csv = cfg.output.formats.contains(&OutputFormat::Csv);
    if csv {
        write_diagnostics_csv(&dir.join("diagnostics.csv"), &result.records)?;
        write_rows(&dir.join("convergence.csv"), &result.log)?;
    }
    if cfg.output.formats.contains(&OutputFormat::Snapshot) {
        let last = result.snapshots.len() - 1;
        for (i, s) in result.snapshots.iter().enumerate() {
            if i % cfg.output.snapshot_every == 0 || i == last {
                Snapshot::new(p, grid.clone(), s.clone())?.save(&dir.join(format!("snapshot_{i:05}.snap")))?;
            }
        }
    }
    let last = result.records.last().expect("records include t=0");
    let iterations = result.log.len();
    let summary = format!(
        "t = {}  mass = {}  energy = {}  dissipation = {}  residual = {:e}\nsup|u| = {}  Cu = {}  min rho = {:e}\nPicard iterations: {iterations}, converged: {}\n",
        last.t, last.mass, last.energy, last.dissipation, last.energy_residual, last.sup_u, last.c_u, last.min_rho, result.converged
    );
    let mut out = Outcome::new(summary, Some(dir));
    check_run_invariants(&result, &mut out, &ctx.fatal);
    Ok(out)
}

/// Transport schemes against characteristic oracles.
pub fn oracle_transport(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let dir = ctx.run_dir(cfg, "oracle-transport")?;
    let table = transport_order_study(&cfg.oracle, &cfg.transport, &cfg.params())?;
    write_rows(&dir.join("oracle_errors.csv"), &table.rows)?;
    write_rows(&dir.join("oracle_orders.csv"), &table.fits)?;
    let mut summary = format!("{:<16} {:<9} {:<9} {:>8} {:>8}\n", "method", "case", "field", "order", "stderr");
    for f in &table.fits {
        let _ = writeln!(
            summary,
            "{:<16} {:<9} {:<9} {:>8.3} {:>8.3}",
            format!("{:?}", f.method),
            format!("{:?}", f.case),
            format!("{:?}", f.quantity),
            f.order,
            f.stderr
        );
    }
    Ok(Outcome::new(summary, Some(dir)))
}

/// The (eps, eta) continuation sweep.
pub fn continuation_sweep(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let plan = cfg
        .continuation
        .as_ref()
        .ok_or_else(|| Error::Config("the continuation command needs a [continuation] block".into()))?;
    let dir = ctx.run_dir(cfg, "continuation")?;
    let grid = cfg.build_grid()?;
    let init = cfg.initial_primitive(&grid)?;
    let table = continuation(&init, &cfg.params(), &grid, plan, cfg.t_end, &cfg.picard_config())?;
    write_rows(&dir.join("continuation.csv"), &table.rows)?;
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3e}"));
    let mut summary = format!("{:>10} {:>10} {:>11} {:>11} {:>11} {:>11}\n", "eps", "eta", "d_rho", "d_u", "d_psi", "min rho");
    for r in &table.rows {
        let _ = writeln!(
            summary,
            "{:>10.1e} {:>10.1e} {:>11} {:>11} {:>11} {:>11}{}",
            r.eps,
            r.eta,
            fmt(r.dist_rho),
            fmt(r.dist_u),
            fmt(r.dist_psi),
            fmt(r.interior_min_rho),
            r.error.as_ref().map_or(String::new(), |e| format!("  error: {e}"))
        );
    }
    let mut out = Outcome::new(summary, Some(dir));
    if !table.eps_monotone() {
        out.flag(Invariant::Monotone, "distances do not decrease along eps".into(), &ctx.fatal);
    }
    if !table.eta_monotone() {
        out.flag(Invariant::Monotone, "distances do not decrease along eta".into(), &ctx.fatal);
    }
    if !table.all_ok() {
        warn!("some continuation runs failed; see continuation.csv");
    }
    Ok(out)
}

/// Grid and time-step refinement of the full scheme.
pub fn convergence(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    if matches!(cfg.initial, InitialData::Snapshot { .. }) {
        return Err(Error::Config("the convergence command needs an analytic initial family".into()));
    }
    let dir = ctx.run_dir(cfg, "convergence")?;
    let grid = cfg.build_grid()?;
    let table = refinement_study(|g| cfg.initial_primitive(g), &cfg.params(), &grid, cfg.t_end, &cfg.picard_config(), &cfg.convergence)?;
    write_rows(&dir.join("convergence.csv"), &table.rows)?;
    let mut summary = format!(
        "{:>6} {:>10} {:>11} {:>11} {:>11} {:>11} {:>11}\n",
        "n", "dt", "mass", "momentum", "energy", "d_rho", "d_u"
    );
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3e}"));
    for r in &table.rows {
        let _ = writeln!(
            summary,
            "{:>6} {:>10.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11} {:>11}",
            r.n,
            r.dt,
            r.mass_drift,
            r.momentum_drift,
            r.energy_residual,
            fmt(r.diff_rho),
            fmt(r.diff_u)
        );
    }
    let _ = writeln!(summary, "observed order: rho {}, u {}", fmt(table.order_rho), fmt(table.order_u));
    Ok(Outcome::new(summary, Some(dir)))
}

/// Header of a snapshot file, read without the payload.
pub fn inspect(path: &Path) -> Result<Outcome> {
    let h = Snapshot::inspect(path)?;
    let mut summary = format!("version {}  t = {}  {} nodes\n", h.version, h.t, h.grid.len());
    for f in &h.fields {
        let _ = writeln!(summary, "  {:<8} {:?} @ {}", f.name, f.shape, f.offset);
    }
    let _ = writeln!(summary, "sha256 {}", h.sha256);
    Ok(Outcome::new(summary, None))
}
