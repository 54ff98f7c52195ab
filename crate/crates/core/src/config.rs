//! TOML run configurations.
//!
//! ```toml
//! t_end = 0.1
//!
//! [params]
//! A = 1.0
//! gamma = 2.0
//! delta = 0.5
//! alpha = 1.0
//! beta = 0.0
//!
//! [grid]
//! n = 512
//!
//! [initial]
//! family = "sine"
//! ```
//!
//! Every other block is optional. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admissibility::{make_power_law_init, Bump, ClassifyConfig, NormSet};
use crate::diagnostics::DissipationForm;
use crate::error::{Error, Result};
use crate::field::{PrimitiveState, ReformState, ScalarField, VectorField};
use crate::grid::{Axis, Boundary, Grid};
use crate::momentum::MomentumStepConfig;
use crate::params::Params;
use crate::picard::{lifted_initial, ContinuationPlan, PicardConfig};
use crate::reform::from_reform;
use crate::snapshot::Snapshot;
use crate::study::{OracleStudyConfig, RefinementConfig};
use crate::transport::TransportScheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Cells per axis.
    pub n: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    /// Box length; periodic boxes default to 1.
    #[serde(default)]
    pub length: Option<f64>,
    /// Lower corner; defaults to 0 (periodic) or `-length/2` (far field).
    #[serde(default)]
    pub lo: Option<f64>,
}

fn default_dim() -> usize {
    1
}
fn default_boundary() -> Boundary {
    Boundary::Periodic
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        let length = self.length.unwrap_or(match self.boundary {
            Boundary::Periodic => 1.0,
            Boundary::FarField => 8.0,
        });
        let lo = self.lo.unwrap_or(match self.boundary {
            Boundary::Periodic => 0.0,
            Boundary::FarField => -0.5 * length,
        });
        Grid::new(vec![Axis { lo, length, n: self.n }; self.dim], self.boundary)
    }
}

/// Initial data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `rho = rho_mean + rho_amp sin(2 pi m x_1 / L)`, `u_1 = u_mean + u_amp sin(...)`.
    Sine {
        #[serde(default = "one")]
        rho_mean: f64,
        #[serde(default = "default_rho_amp")]
        rho_amp: f64,
        #[serde(default = "default_u_mean")]
        u_mean: f64,
        #[serde(default = "default_u_amp")]
        u_amp: f64,
        #[serde(default = "default_mode")]
        mode: u32,
    },
    /// `rho = 1/(1+|x|^(2 a_exp))` with an optional velocity bump.
    PowerLaw {
        a_exp: f64,
        #[serde(default)]
        bump: Option<Bump>,
    },
    Constant {
        rho: f64,
        /// Velocity components; missing ones are zero.
        #[serde(default)]
        u: Vec<f64>,
    },
    /// Random Fourier modes along every axis, drawn from `seed`.
    Random {
        #[serde(default = "one")]
        rho_mean: f64,
        #[serde(default = "default_rho_amp")]
        rho_amp: f64,
        #[serde(default = "default_u_amp")]
        u_amp: f64,
        #[serde(default = "default_modes")]
        modes: u32,
    },
    /// Restart from a saved state; `eta` is not applied.
    Snapshot { path: PathBuf },
}

fn one() -> f64 {
    1.0
}
fn default_rho_amp() -> f64 {
    0.2
}
fn default_u_mean() -> f64 {
    0.5
}
fn default_u_amp() -> f64 {
    0.1
}
fn default_mode() -> u32 {
    1
}
fn default_modes() -> u32 {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Inner steps between diagnostics records.
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    /// Records between stored snapshots.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    #[serde(default = "default_true")]
    pub monitors: bool,
    #[serde(default)]
    pub dissipation: DissipationForm,
}

fn default_cadence() -> usize {
    10
}
fn default_snapshot_every() -> usize {
    10
}
fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Snapshot]
}
fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            cadence: default_cadence(),
            snapshot_every: default_snapshot_every(),
            formats: default_formats(),
            monitors: true,
            dissipation: DissipationForm::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilityConfig {
    #[serde(default = "default_norm_set")]
    pub norm_set: NormSet,
    #[serde(default)]
    pub classify: ClassifyConfig,
}

fn default_norm_set() -> NormSet {
    NormSet::Base
}

impl Default for AdmissibilityConfig {
    fn default() -> Self {
        Self { norm_set: NormSet::Base, classify: ClassifyConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    pub params: Params,
    pub grid: GridConfig,
    pub initial: InitialData,
    #[serde(default)]
    pub transport: TransportScheme,
    #[serde(default)]
    pub momentum: MomentumStepConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub continuation: Option<ContinuationPlan>,
    #[serde(default)]
    pub oracle: OracleStudyConfig,
    #[serde(default)]
    pub convergence: RefinementConfig,
    #[serde(default)]
    pub admissibility: AdmissibilityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_t_end() -> f64 {
    0.1
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    let msg = e.message();
    let at = e.span().map(|s| line_col(text, s.start));
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        let key = rest.split('`').next().unwrap_or(rest);
        return Error::Config(match at {
            Some((l, c)) => format!("unknown key: {key} (line {l}, column {c})"),
            None => format!("unknown key: {key}"),
        });
    }
    Error::Config(match at {
        Some((l, c)) => format!("line {l}, column {c}: {msg}"),
        None => msg.to_string(),
    })
}

/// Parses and validates a configuration document. Relative snapshot paths
/// are resolved against `base` when given.
pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    if let (Some(base), InitialData::Snapshot { path }) = (base, &mut cfg.initial) {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, path.parent())
}

impl RunConfig {
    /// Every semantic violation, prefixed by its block.
    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        let p = self.params();
        v.extend(p.violations().into_iter().map(|s| format!("params: {s}")));
        let grid = match self.grid.build() {
            Ok(g) => Some(g),
            Err(e) => {
                v.push(format!("grid: {e}"));
                None
            }
        };
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            v.push(format!("t_end must be finite and nonnegative (got {})", self.t_end));
        }
        match &self.initial {
            InitialData::Sine { rho_mean, rho_amp, mode, .. } => {
                if !(rho_mean - rho_amp.abs() > 0.0) {
                    v.push("initial: rho_mean must exceed |rho_amp|".into());
                }
                if *mode == 0 {
                    v.push("initial: mode must be at least 1".into());
                }
            }
            InitialData::PowerLaw { a_exp, bump } => {
                if !(*a_exp > 0.0) {
                    v.push(format!("initial: a_exp must be positive (got {a_exp})"));
                }
                if let (Some(b), Some(g)) = (bump, &grid) {
                    if let Err(e) = b.check_fits(g) {
                        v.push(format!("initial: {e}"));
                    }
                }
            }
            InitialData::Constant { rho, u } => {
                if !(*rho > 0.0) {
                    v.push(format!("initial: rho must be positive (got {rho})"));
                }
                if u.len() > self.grid.dim {
                    v.push(format!("initial: u has {} components for a {}-D grid", u.len(), self.grid.dim));
                }
            }
            InitialData::Random { rho_mean, rho_amp, modes, .. } => {
                if !(rho_mean - rho_amp.abs() > 0.0) {
                    v.push("initial: rho_mean must exceed |rho_amp|".into());
                }
                if *modes == 0 {
                    v.push("initial: modes must be at least 1".into());
                }
            }
            InitialData::Snapshot { path } => {
                if !path.exists() {
                    v.push(format!("initial: snapshot {} does not exist", path.display()));
                }
            }
        }
        if self.grid.boundary == Boundary::Periodic && matches!(self.initial, InitialData::PowerLaw { .. }) {
            v.push("initial: power_law data needs a far_field grid".into());
        }
        v.extend(self.picard_config().violations());
        if let Some(plan) = &self.continuation {
            v.extend(plan.violations());
        }
        v.extend(self.oracle.violations());
        v.extend(self.convergence.violations());
        if self.output.cadence == 0 {
            v.push("output.cadence must be at least 1".into());
        }
        if self.output.snapshot_every == 0 {
            v.push("output.snapshot_every must be at least 1".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigViolations(v))
        }
    }

    /// Parameters with the dimension taken from the grid.
    pub fn params(&self) -> Params {
        self.params.with_dim(self.grid.dim)
    }

    pub fn build_grid(&self) -> Result<Grid> {
        self.grid.build()
    }

    /// Picard settings with the transport, momentum and output blocks merged in.
    pub fn picard_config(&self) -> PicardConfig {
        let mut c = self.picard;
        c.transport = self.transport;
        c.momentum = self.momentum;
        c.cadence = self.output.cadence;
        c.monitors = self.output.monitors;
        c.dissipation = self.output.dissipation;
        c
    }

    /// Initial data in primitive variables, before any `eta` lift.
    pub fn initial_primitive(&self, grid: &Grid) -> Result<PrimitiveState> {
        let p = self.params();
        let ax = grid.axis(0);
        let d = grid.dim();
        match &self.initial {
            &InitialData::Sine { rho_mean, rho_amp, u_mean, u_amp, mode } => {
                let k = 2.0 * PI * mode as f64 / ax.length;
                let lo = ax.lo;
                let rho = ScalarField::from_fn(grid, |x| rho_mean + rho_amp * (k * (x[0] - lo)).sin());
                let mut u = VectorField::zeros(d, grid.len());
                u[0] = ScalarField::from_fn(grid, |x| u_mean + u_amp * (k * (x[0] - lo)).sin());
                Ok(PrimitiveState::new(rho, u, 0.0))
            }
            InitialData::PowerLaw { a_exp, bump } => make_power_law_init(*a_exp, bump.as_ref(), grid, &p),
            InitialData::Constant { rho, u } => {
                let mut vel = VectorField::zeros(d, grid.len());
                for (c, &val) in u.iter().enumerate() {
                    vel[c] = ScalarField::constant(grid.len(), val);
                }
                Ok(PrimitiveState::new(ScalarField::constant(grid.len(), *rho), vel, 0.0))
            }
            &InitialData::Random { rho_mean, rho_amp, u_amp, modes } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut series = |amp: f64| -> Vec<(usize, f64, f64, f64)> {
                    let mut terms = Vec::new();
                    for k in 0..d {
                        for m in 1..=modes {
                            let a = rng.gen_range(-1.0..1.0) * amp / (modes as usize * d) as f64;
                            let phase = rng.gen_range(0.0..2.0 * PI);
                            terms.push((k, 2.0 * PI * m as f64 / grid.axis(k).length, a, phase));
                        }
                    }
                    terms
                };
                let eval = |terms: &[(usize, f64, f64, f64)], x: [f64; 3]| {
                    terms.iter().map(|&(k, w, a, ph)| a * (w * x[k] + ph).sin()).sum::<f64>()
                };
                let rt = series(rho_amp);
                let rho = ScalarField::from_fn(grid, |x| rho_mean + eval(&rt, x));
                let mut u = VectorField::zeros(d, grid.len());
                for c in 0..d {
                    let ut = series(u_amp);
                    u[c] = ScalarField::from_fn(grid, |x| eval(&ut, x));
                }
                Ok(PrimitiveState::new(rho, u, 0.0))
            }
            InitialData::Snapshot { .. } => from_reform(&self.initial_state(grid)?, &p),
        }
    }

    /// Reformulated start state: `eta`-lifted family data, or a snapshot
    /// checked against the configured grid and parameters.
    pub fn initial_state(&self, grid: &Grid) -> Result<ReformState> {
        let p = self.params();
        match &self.initial {
            InitialData::Snapshot { path } => {
                let snap = Snapshot::load(path)?;
                if !snap.grid.same_shape(grid) || snap.grid != *grid {
                    return Err(Error::Snapshot(format!(
                        "snapshot grid does not match the configured grid ({})",
                        path.display()
                    )));
                }
                if snap.params.with_eps(p.eps).with_eta(p.eta) != p {
                    return Err(Error::Snapshot(format!(
                        "snapshot parameters differ from the configured ones ({})",
                        path.display()
                    )));
                }
                Ok(snap.state)
            }
            _ => lifted_initial(&self.initial_primitive(grid)?, &p, grid),
        }
    }

    /// Run name for output directories.
    pub fn run_name(&self, config_path: Option<&Path>) -> String {
        self.name
            .clone()
            .or_else(|| config_path.and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "run".into())
    }

    /// The configuration with every default written out.
    pub fn resolved_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[params]
A = 1.0
gamma = 2.0
delta = 0.5
alpha = 1.0
beta = 0.0

[grid]
n = 64

[initial]
family = "sine"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL, None).unwrap();
        assert_eq!(c.t_end, 0.1);
        assert_eq!(c.seed, 0);
        assert_eq!(c.grid.dim, 1);
        assert_eq!(c.output.cadence, 10);
        assert_eq!(c.picard.slab_steps, 10);
        assert_eq!(c.picard.k_max, 30);
        assert_eq!(c.picard.nu, 0.1);
        assert_eq!(c.momentum.theta, 1.0);
        let g = c.build_grid().unwrap();
        assert_eq!(g.len(), 64);
        let s = c.initial_primitive(&g).unwrap();
        assert!((s.rho.max() - 1.2).abs() < 1e-3);
        let pc = c.picard_config();
        assert_eq!(pc.cadence, 10);
        assert!(pc.validate().is_ok());
    }

    #[test]
    fn params_violation_is_named() {
        let text = MINIMAL.replace("gamma = 2.0", "gamma = 0.9");
        let e = parse_config_str(&text, None).unwrap_err();
        match e {
            Error::ConfigViolations(v) => assert!(v.iter().any(|s| s.starts_with("params:") && s.contains("gamma")), "{v:?}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.replace("gamma = 2.0", "gama = 2.0");
        let e = parse_config_str(&text, None).unwrap_err().to_string();
        assert!(e.contains("unknown key: gama"), "{e}");
        assert!(e.contains("line 4"), "{e}");
        let text = format!("{MINIMAL}\n[output]\ncadense = 3\n");
        let e = parse_config_str(&text, None).unwrap_err().to_string();
        assert!(e.contains("unknown key: cadense"), "{e}");
        let text = MINIMAL.replace("family = \"sine\"", "family = \"sine\"\nrho_ampl = 0.1");
        let e = parse_config_str(&text, None).unwrap_err().to_string();
        assert!(e.contains("unknown key: rho_ampl"), "{e}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let e = parse_config_str("[params\nA = 1", None).unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
    }

    #[test]
    fn all_violations_are_listed() {
        let text = MINIMAL
            .replace("gamma = 2.0", "gamma = 0.9")
            .replace("n = 64", "n = 64\nboundary = \"far_field\"")
            .replace("family = \"sine\"", "family = \"power_law\"\na_exp = -1.0")
            + "\n[picard]\nk_max = 1\n[output]\ncadence = 0\n";
        match parse_config_str(&text, None).unwrap_err() {
            Error::ConfigViolations(v) => assert!(v.len() >= 4, "{v:?}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = parse_config_str(MINIMAL, None).unwrap();
        let text = c.resolved_toml().unwrap();
        let again = parse_config_str(&text, None).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn random_data_is_seeded() {
        let text = MINIMAL.replace("family = \"sine\"", "family = \"random\"");
        let c = parse_config_str(&text, None).unwrap();
        let g = c.build_grid().unwrap();
        let a = c.initial_primitive(&g).unwrap();
        assert_eq!(a, c.initial_primitive(&g).unwrap());
        let mut c2 = c.clone();
        c2.seed = 7;
        assert_ne!(a, c2.initial_primitive(&g).unwrap());
        assert!(a.rho.min() > 0.0);
    }

    #[test]
    fn missing_snapshot_is_a_violation() {
        let text = MINIMAL.replace("family = \"sine\"", "family = \"snapshot\"\npath = \"nope.snap\"");
        assert!(parse_config_str(&text, None).is_err());
    }
}
