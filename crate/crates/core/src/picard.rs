//! Picard iteration for the nonlinear system over short time slabs, the
//! contraction metric Gamma and (eps, eta) continuation sweeps.
//!
//! Iterate `k+1` is the solution of the linear problem whose coefficients
//! `(v, g) = (u^k, h^k)` are taken from iterate `k` at the time level
//! `t_n + theta dt` of every inner step. Every iterate starts from the true
//! initial data of the slab.

use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsTracker, DissipationForm};
use crate::error::{Error, Result};
use crate::field::{PrimitiveState, ReformState, ScalarField, VectorField};
use crate::grid::Grid;
use crate::krylov::KrylovConfig;
use crate::momentum::{advance_momentum_h, advance_momentum_varphi, MomentumForm, MomentumStepConfig};
use crate::ops::{d1, div, integrate, ImplicitLame, Lame};
use crate::params::Params;
use crate::reform::{from_reform, phi_of_rho, rho_of_phi, to_reform};
use crate::transport::{advance_f, advance_h, advance_phi, advance_psi, advance_varphi, TransportScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialIterate {
    /// `u^0(t) = u_0`, `h^0(t) = h_0` on the whole slab.
    #[default]
    FrozenInitial,
    /// `u^0` from implicit heat steps started at `u_0`.
    HeatSmoothed,
}

/// Which iterate supplies `psi` (h-form) or `f` (varphi-form) in the
/// momentum forcing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceLag {
    /// The new iterate, `psi^{k+1} . Q(u^k)`.
    #[default]
    New,
    /// The previous iterate, `psi^k . Q(u^k)`.
    Old,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    /// Inner time step.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_slab_steps")]
    pub slab_steps: usize,
    /// Absolute tolerance on Gamma; `None` uses `tol_factor * dx^4`.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default = "default_tol_factor")]
    pub tol_factor: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub initial_iterate: InitialIterate,
    #[serde(default)]
    pub source_lag: SourceLag,
    /// Split transport steps that violate the CFL limit instead of failing.
    #[serde(default)]
    pub substep: bool,
    /// Inner steps between diagnostics records and stored snapshots.
    #[serde(skip, default = "default_cadence")]
    pub cadence: usize,
    #[serde(skip, default = "default_true")]
    pub monitors: bool,
    #[serde(skip)]
    pub dissipation: DissipationForm,
    #[serde(skip)]
    pub transport: TransportScheme,
    #[serde(skip)]
    pub momentum: MomentumStepConfig,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self::new(default_dt())
    }
}

fn default_dt() -> f64 {
    1e-3
}
fn default_slab_steps() -> usize {
    10
}
fn default_tol_factor() -> f64 {
    1.0
}
fn default_k_max() -> usize {
    30
}
fn default_nu() -> f64 {
    0.1
}
fn default_cadence() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl PicardConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            slab_steps: default_slab_steps(),
            tol: None,
            tol_factor: default_tol_factor(),
            k_max: default_k_max(),
            nu: default_nu(),
            initial_iterate: InitialIterate::default(),
            source_lag: SourceLag::default(),
            cadence: default_cadence(),
            substep: false,
            monitors: true,
            dissipation: DissipationForm::default(),
            transport: TransportScheme::default(),
            momentum: MomentumStepConfig::default(),
        }
    }

    /// Every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            v.push(format!("picard.dt must be positive (got {})", self.dt));
        }
        if self.slab_steps == 0 {
            v.push("picard.slab_steps must be at least 1".into());
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                v.push(format!("picard.tol must be positive (got {t})"));
            }
        }
        if !(self.tol_factor > 0.0) {
            v.push(format!("picard.tol_factor must be positive (got {})", self.tol_factor));
        }
        if self.k_max < 2 {
            v.push(format!("picard.k_max must be at least 2 (got {})", self.k_max));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            v.push(format!("picard.nu must lie in (0,1) (got {})", self.nu));
        }
        if self.cadence == 0 {
            v.push("picard.cadence must be at least 1".into());
        }
        if !(self.transport.cfl > 0.0) {
            v.push(format!("transport.cfl must be positive (got {})", self.transport.cfl));
        }
        if let Err(e) = self.momentum.validate() {
            v.push(e.to_string());
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

    pub fn gamma_tol(&self, grid: &Grid) -> f64 {
        self.tol.unwrap_or_else(|| self.tol_factor * grid.min_dx().powi(4))
    }
}

fn l2_sq(f: &[f64], grid: &Grid) -> f64 {
    f.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()
}

fn h1_sq(f: &ScalarField, grid: &Grid) -> f64 {
    let mut s = l2_sq(f, grid);
    for k in 0..grid.dim() {
        s += l2_sq(&d1(f, grid, k), grid);
    }
    s
}

/// `Gamma = sup_n ( |dphi|_H1^2 + |dvarphi|_H1^2 + |df|_2^2 + |sqrt(varphi) du|_2^2
///  + a nu (alpha |grad du|_2^2 + (alpha+beta) |div du|_2^2) )`,
/// with `varphi` taken from `b`.
pub fn gamma_metric(a: &[ReformState], b: &[ReformState], p: &Params, grid: &Grid, nu: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "trajectories have {} and {} states",
            a.len(),
            b.len()
        )));
    }
    let c = p.derived()?;
    let mut sup = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        x.validate(grid)?;
        y.validate(grid)?;
        let dphi = y.phi.zip_map(&x.phi, |s, t| s - t);
        let dvp = y.varphi.zip_map(&x.varphi, |s, t| s - t);
        let df = y.f.zip_map(&x.f, |s, t| s - t);
        let du = y.u.zip_map(&x.u, |s, t| s - t);
        let mut g = h1_sq(&dphi, grid) + h1_sq(&dvp, grid);
        g += df.iter().map(|comp| l2_sq(comp, grid)).sum::<f64>();
        g += du
            .iter()
            .map(|comp| comp.iter().zip(y.varphi.iter()).map(|(u, w)| w * u * u).sum::<f64>())
            .sum::<f64>()
            * grid.cell_volume();
        let mut grad2 = 0.0;
        for comp in du.iter() {
            for k in 0..grid.dim() {
                grad2 += l2_sq(&d1(comp, grid, k), grid);
            }
        }
        let div2 = l2_sq(&div(&du, grid), grid);
        g += c.a * nu * (p.alpha * grad2 + (p.alpha + p.beta) * div2);
        sup = sup.max(g);
    }
    Ok(sup)
}

/// The initial iterate on a slab of `steps` inner steps.
pub fn initial_iterate(
    start: &ReformState,
    steps: usize,
    dt: f64,
    grid: &Grid,
    policy: InitialIterate,
) -> Result<Vec<ReformState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start.clone());
    let mut u = start.u.clone();
    for n in 1..=steps {
        let mut s = start.clone();
        s.t = start.t + n as f64 * dt;
        if policy == InitialIterate::HeatSmoothed {
            let w = ScalarField::constant(grid.len(), 1.0 / dt);
            let op = ImplicitLame { grid, lame: Lame::neg_laplacian(), weight: Some(&w), kappa: 1.0 };
            let rhs = u.map_components(|c| c.scaled(1.0 / dt));
            u = op.solve(&rhs, Some(&u), &KrylovConfig::default())?.u;
            s.u = u.clone();
        }
        out.push(s);
    }
    Ok(out)
}

/// Runs `step` over `n` equal sub-steps when the CFL limit requires it.
fn transported<T>(
    cfg: &PicardConfig,
    v: &VectorField,
    dt: f64,
    grid: &Grid,
    init: &T,
    step: impl Fn(&T, f64) -> Result<T>,
) -> Result<T>
where
    T: Clone,
{
    let n = if cfg.substep { cfg.transport.substeps(v, dt, grid) } else { 1 };
    if n == 1 {
        return step(init, dt);
    }
    let mut w = init.clone();
    for _ in 0..n {
        w = step(&w, dt / n as f64)?;
    }
    Ok(w)
}

/// Output of one Picard iteration over a slab.
#[derive(Debug, Clone)]
pub struct PicardIterate {
    pub states: Vec<ReformState>,
    pub krylov_iterations: usize,
    pub krylov_residual: f64,
}

/// One Picard iteration: solves the frozen-coefficient problem with
/// coefficients from `prev`, starting from `prev[0]` (the slab data).
pub fn picard_step(prev: &[ReformState], p: &Params, grid: &Grid, cfg: &PicardConfig, iteration: usize) -> Result<PicardIterate> {
    let Some(start) = prev.first() else {
        return Err(Error::InvalidInput("empty slab trajectory".into()));
    };
    let c = p.derived()?;
    let theta = cfg.momentum.theta;
    let mut states = Vec::with_capacity(prev.len());
    states.push(start.clone());
    let mut iters = 0;
    let mut residual = 0.0f64;
    for n in 0..prev.len() - 1 {
        let (a, b) = (&prev[n], &prev[n + 1]);
        let cur = &states[n];
        let dt = b.t - a.t;
        let step = || -> Result<(ReformState, usize, f64)> {
            let v = a.u.lerp(&b.u, theta);
            let g = a.h.lerp(&b.h, theta);
            let tr = &cfg.transport;
            let phi = transported(cfg, &v, dt, grid, &cur.phi, |w, k| advance_phi(w, &v, k, p.gamma, grid, tr))?;
            let h = transported(cfg, &v, dt, grid, &cur.h, |w, k| advance_h(w, &v, &g, k, p.delta, grid, tr))?;
            let varphi = transported(cfg, &v, dt, grid, &cur.varphi, |w, k| {
                advance_varphi(w, &v, &g, k, p.delta, grid, tr)
            })?;
            let psi = transported(cfg, &v, dt, grid, &cur.psi, |w, k| {
                advance_psi(w, &v, &g, k, c.a, p.delta, grid, tr)
            })?;
            let vp_mid = cur.varphi.lerp(&varphi, theta);
            let f = transported(cfg, &v, dt, grid, &cur.f, |w, k| {
                advance_f(w, &v, &g, &vp_mid, k, c.a, p.delta, grid, tr)
            })?;
            let phi_m = cur.phi.lerp(&phi, theta);
            let (psi_m, f_m) = match cfg.source_lag {
                SourceLag::New => (cur.psi.lerp(&psi, theta), cur.f.lerp(&f, theta)),
                SourceLag::Old => (a.psi.lerp(&b.psi, theta), a.f.lerp(&b.f, theta)),
            };
            let m = match cfg.momentum.form {
                MomentumForm::VarphiForm => {
                    advance_momentum_varphi(&cur.u, &v, &phi_m, &vp_mid, &f_m, p, dt, grid, &cfg.momentum)?
                }
                MomentumForm::HForm => {
                    let h_m = cur.h.lerp(&h, theta);
                    advance_momentum_h(&cur.u, &v, &phi_m, &h_m, &psi_m, p, p.eps, dt, grid, &cfg.momentum)?
                }
            };
            Ok((
                ReformState { phi, u: m.u, psi, h, varphi, f, t: b.t },
                m.report.iterations,
                m.report.residual,
            ))
        };
        let (next, it, res) = step().map_err(|e| e.at_step(iteration, n))?;
        iters += it;
        residual = residual.max(res);
        states.push(next);
    }
    Ok(PicardIterate { states, krylov_iterations: iters, krylov_residual: residual })
}

/// True when the last three ratios `Gamma_k / Gamma_{k-1}` are all at least 0.99.
pub fn stagnated(gammas: &[f64]) -> bool {
    gammas.len() >= 4 && gammas[gammas.len() - 4..].windows(2).all(|w| w[1] >= 0.99 * w[0])
}

/// One row of the convergence log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceEntry {
    pub slab_index: usize,
    pub k: usize,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    pub krylov_iters_total: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SlabOutcome {
    pub states: Vec<ReformState>,
    pub gammas: Vec<f64>,
    pub converged: bool,
    pub krylov_iterations: usize,
    pub krylov_residual: f64,
}

/// Picard-iterates one slab until `Gamma < tol`, stagnation or `k_max`.
pub fn solve_slab(
    start: &ReformState,
    steps: usize,
    dt: f64,
    p: &Params,
    grid: &Grid,
    cfg: &PicardConfig,
    slab: usize,
    log: &mut Vec<ConvergenceEntry>,
) -> Result<SlabOutcome> {
    let tol = cfg.gamma_tol(grid);
    let mut prev = initial_iterate(start, steps, dt, grid, cfg.initial_iterate)?;
    let mut gammas = Vec::new();
    let mut krylov_total = 0;
    let mut krylov_residual = 0.0f64;
    for k in 1..=cfg.k_max {
        let clock = Instant::now();
        let next = picard_step(&prev, p, grid, cfg, k)?;
        let gamma = gamma_metric(&prev, &next.states, p, grid, cfg.nu)?;
        krylov_total += next.krylov_iterations;
        krylov_residual = krylov_residual.max(next.krylov_residual);
        log.push(ConvergenceEntry {
            slab_index: slab,
            k,
            gamma,
            krylov_iters_total: next.krylov_iterations,
            wall_time_s: clock.elapsed().as_secs_f64(),
        });
        debug!("slab {slab} k {k} Gamma {gamma:e}");
        gammas.push(gamma);
        prev = next.states;
        if gamma < tol {
            return Ok(SlabOutcome {
                states: prev,
                gammas,
                converged: true,
                krylov_iterations: krylov_total,
                krylov_residual,
            });
        }
        if stagnated(&gammas) {
            return Err(Error::NonContraction { slab, history: gammas });
        }
    }
    warn!("slab {slab}: Gamma {:e} above tolerance {tol:e} after {} iterations", gammas.last().unwrap_or(&f64::NAN), cfg.k_max);
    Ok(SlabOutcome {
        states: prev,
        gammas,
        converged: false,
        krylov_iterations: krylov_total,
        krylov_residual,
    })
}

/// Initial data with `phi_0` lifted by `eta`.
pub fn lifted_initial(init: &PrimitiveState, p: &Params, grid: &Grid) -> Result<ReformState> {
    if p.eta == 0.0 {
        return to_reform(init, p, grid);
    }
    let phi = phi_of_rho(&init.rho, p).map(|x| x + p.eta);
    let rho = rho_of_phi(&phi, p);
    to_reform(&PrimitiveState::new(rho, init.u.clone(), init.t), p, grid)
}

#[derive(Debug, Clone)]
pub struct NonlinearRun {
    pub records: Vec<DiagnosticsRecord>,
    /// States at the record times.
    pub snapshots: Vec<ReformState>,
    pub log: Vec<ConvergenceEntry>,
    /// False when some slab hit `k_max` above tolerance.
    pub converged: bool,
    /// Largest final Krylov residual over all solves.
    pub krylov_residual: f64,
}

impl NonlinearRun {
    pub fn final_state(&self) -> &ReformState {
        self.snapshots.last().expect("a run stores at least the initial state")
    }

    pub fn primitive_snapshots(&self, p: &Params) -> Result<Vec<PrimitiveState>> {
        self.snapshots.iter().map(|r| from_reform(r, p)).collect()
    }
}

/// Marches `[0, t_end]` slab by slab from `eta`-lifted data.
pub fn solve_nonlinear(init: &PrimitiveState, p: &Params, grid: &Grid, t_end: f64, cfg: &PicardConfig) -> Result<NonlinearRun> {
    p.validate()?;
    let start = lifted_initial(init, p, grid)?;
    solve_from(start, p, grid, t_end, cfg)
}

/// Marches `[start.t, start.t + duration]` from a reformulated state.
pub fn solve_from(start: ReformState, p: &Params, grid: &Grid, duration: f64, cfg: &PicardConfig) -> Result<NonlinearRun> {
    p.validate()?;
    cfg.validate()?;
    start.validate(grid)?;
    let t_end = duration;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!("final time must be nonnegative (got {t_end})")));
    }
    let total = (t_end / cfg.dt).ceil() as usize;
    let dt = if total == 0 { cfg.dt } else { t_end / total as f64 };
    let prim0 = from_reform(&start, p)?;
    let mut tracker = DiagnosticsTracker::new(&prim0, p, grid, cfg.dissipation);
    if !cfg.monitors {
        tracker = tracker.without_monitors();
    }
    let mut records = vec![tracker.record(&start, grid)?];
    let mut snapshots = vec![start.clone()];
    let mut log = Vec::new();
    let mut converged = true;
    let mut krylov_residual = 0.0f64;
    let mut current = start;
    let mut done = 0;
    let mut slab = 0;
    info!("solving over {t_end} in {total} steps of {dt:e}");
    while done < total {
        let steps = cfg.slab_steps.min(total - done);
        let out = solve_slab(&current, steps, dt, p, grid, cfg, slab, &mut log)?;
        converged &= out.converged;
        krylov_residual = krylov_residual.max(out.krylov_residual);
        for (j, s) in out.states.iter().enumerate().skip(1) {
            tracker.advance(&from_reform(s, p)?, grid);
            let n = done + j;
            if n % cfg.cadence == 0 || n == total {
                records.push(tracker.record(s, grid)?);
                snapshots.push(s.clone());
            }
        }
        done += steps;
        slab += 1;
        current = out.states.into_iter().last().expect("slab has states");
    }
    Ok(NonlinearRun { records, snapshots, log, converged, krylov_residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationPlan {
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
    /// Picard tolerance of every run; continuation differences are tiny, so
    /// this is much tighter than the default.
    #[serde(default = "default_continuation_tol")]
    pub tol: f64,
    /// Distances below this are treated as noise when checking monotonicity.
    #[serde(default = "default_noise_floor")]
    pub noise_floor: f64,
    /// Half-width of the central region whose minimum density is monitored,
    /// as a fraction of the box half-width.
    #[serde(default = "default_interior_fraction")]
    pub interior_fraction: f64,
}

fn default_continuation_tol() -> f64 {
    1e-24
}
fn default_noise_floor() -> f64 {
    1e-9
}
fn default_interior_fraction() -> f64 {
    0.25
}

impl ContinuationPlan {
    pub fn new(eps: Vec<f64>, eta: Vec<f64>) -> Self {
        Self {
            eps,
            eta,
            tol: default_continuation_tol(),
            noise_floor: default_noise_floor(),
            interior_fraction: default_interior_fraction(),
        }
    }

    /// Geometric sequence from `first` to `last` with `n` entries.
    pub fn geometric(first: f64, last: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![first];
        }
        let r = (last / first).powf(1.0 / (n - 1) as f64);
        (0..n).map(|i| first * r.powi(i as i32)).collect()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, seq) in [("eps", &self.eps), ("eta", &self.eta)] {
            if seq.is_empty() {
                v.push(format!("continuation.{name} must not be empty"));
            }
            if seq.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                v.push(format!("continuation.{name} entries must be finite and nonnegative"));
            }
            if seq.windows(2).any(|w| !(w[1] < w[0])) {
                v.push(format!("continuation.{name} must be strictly decreasing"));
            }
        }
        if !(self.tol > 0.0) {
            v.push(format!("continuation.tol must be positive (got {})", self.tol));
        }
        if !(self.interior_fraction > 0.0 && self.interior_fraction <= 1.0) {
            v.push(format!(
                "continuation.interior_fraction must lie in (0,1] (got {})",
                self.interior_fraction
            ));
        }
        v
    }

    /// `(eps, eta)` pairs in run order: eps first at the largest eta, then eta
    /// at the smallest eps.
    pub fn runs(&self) -> Vec<(f64, f64)> {
        let Some(&eps_last) = self.eps.last() else { return Vec::new() };
        let eta0 = self.eta.first().copied().unwrap_or(0.0);
        let mut out: Vec<(f64, f64)> = self.eps.iter().map(|&e| (e, eta0)).collect();
        out.extend(self.eta.iter().skip(1).map(|&h| (eps_last, h)));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationRow {
    pub eps: f64,
    pub eta: f64,
    /// `None` on success, the error message otherwise.
    pub error: Option<String>,
    /// Sup-in-time L2 distances to the previous row.
    pub dist_rho: Option<f64>,
    pub dist_u: Option<f64>,
    pub dist_psi: Option<f64>,
    /// Minimum density over the central region and the run.
    pub interior_min_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationTable {
    pub rows: Vec<ContinuationRow>,
    /// Number of eps-phase rows (the rest are the eta phase).
    pub eps_runs: usize,
    pub noise_floor: f64,
}

impl ContinuationTable {
    fn decreasing(&self, range: std::ops::Range<usize>) -> bool {
        let d: Vec<f64> = self.rows[range].iter().filter_map(|r| r.dist_u.zip(r.dist_rho).map(|(a, b)| a.max(b))).collect();
        d.windows(2).all(|w| w[1] < w[0] || w[1] <= self.noise_floor)
    }

    /// Distances shrink along the eps phase (within the noise floor).
    pub fn eps_monotone(&self) -> bool {
        self.decreasing(1..self.eps_runs)
    }

    /// Distances shrink along the eta phase, starting from the switch row.
    pub fn eta_monotone(&self) -> bool {
        self.decreasing(self.eps_runs..self.rows.len())
    }

    pub fn interior_floor(&self) -> Option<f64> {
        self.rows
            .iter()
            .map(|r| r.interior_min_rho)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none())
    }
}

fn sup_l2_distance(a: &[ScalarField], b: &[ScalarField], grid: &Grid) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| integrate(&x.zip_map(y, |s, t| (s - t).powi(2)), grid).sqrt())
        .fold(0.0, f64::max)
}

fn sup_l2_distance_vec(a: &[&VectorField], b: &[&VectorField], grid: &Grid) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y.iter())
                .map(|(s, t)| integrate(&s.zip_map(t, |p, q| (p - q).powi(2)), grid))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Runs the sweep in parallel (on the current rayon pool) and tabulates
/// distances between consecutive runs. The h-form momentum step is used,
/// since eps only enters there.
pub fn continuation(
    init: &PrimitiveState,
    p: &Params,
    grid: &Grid,
    plan: &ContinuationPlan,
    t_end: f64,
    cfg: &PicardConfig,
) -> Result<ContinuationTable> {
    let v = plan.violations();
    if !v.is_empty() {
        return Err(Error::ConfigViolations(v));
    }
    let mut run_cfg = *cfg;
    run_cfg.momentum.form = MomentumForm::HForm;
    run_cfg.tol = Some(plan.tol);
    run_cfg.monitors = false;
    let pairs = plan.runs();
    let results: Vec<Result<NonlinearRun>> = pairs
        .par_iter()
        .map(|&(eps, eta)| {
            let q = p.with_eps(eps).with_eta(eta);
            solve_nonlinear(init, &q, grid, t_end, &run_cfg)
        })
        .collect();
    let hw = grid.half_width();
    let center: Vec<f64> = (0..grid.dim()).map(|k| grid.axis(k).lo + 0.5 * grid.axis(k).length).collect();
    let interior: Vec<usize> = (0..grid.len())
        .filter(|&q| {
            let x = grid.coords(q);
            (0..grid.dim()).all(|k| (x[k] - center[k]).abs() <= plan.interior_fraction * hw)
        })
        .collect();
    let mut rows = Vec::with_capacity(pairs.len());
    let mut prev: Option<(Vec<ScalarField>, &NonlinearRun)> = None;
    for (&(eps, eta), res) in pairs.iter().zip(&results) {
        let q = p.with_eps(eps).with_eta(eta);
        let mut row = ContinuationRow {
            eps,
            eta,
            error: None,
            dist_rho: None,
            dist_u: None,
            dist_psi: None,
            interior_min_rho: None,
        };
        match res {
            Err(e) => {
                row.error = Some(e.to_string());
                prev = None;
            }
            Ok(run) => {
                let rho: Vec<ScalarField> = run.snapshots.iter().map(|s| rho_of_phi(&s.phi, &q)).collect();
                row.interior_min_rho = Some(
                    rho.iter()
                        .flat_map(|r| interior.iter().map(move |&i| r[i]))
                        .fold(f64::INFINITY, f64::min),
                );
                if let Some((prho, prun)) = &prev {
                    if prun.snapshots.len() == run.snapshots.len() {
                        row.dist_rho = Some(sup_l2_distance(prho, &rho, grid));
                        let ua: Vec<&VectorField> = prun.snapshots.iter().map(|s| &s.u).collect();
                        let ub: Vec<&VectorField> = run.snapshots.iter().map(|s| &s.u).collect();
                        row.dist_u = Some(sup_l2_distance_vec(&ua, &ub, grid));
                        let pa: Vec<&VectorField> = prun.snapshots.iter().map(|s| &s.psi).collect();
                        let pb: Vec<&VectorField> = run.snapshots.iter().map(|s| &s.psi).collect();
                        row.dist_psi = Some(sup_l2_distance_vec(&pa, &pb, grid));
                    }
                }
                prev = Some((rho, run));
            }
        }
        rows.push(row);
    }
    Ok(ContinuationTable { rows, eps_runs: plan.eps.len(), noise_floor: plan.noise_floor })
}
