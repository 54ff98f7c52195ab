//! Admissibility of initial data: weighted-norm finiteness, compatibility
//! fields and the power-law exponent windows.
//!
//! Radial profiles are checked by 1-D quadrature out to large radii with
//! exact derivatives from [`jet::Jet`]. For each norm the integral of
//! `|.|^p` over balls of increasing radius is tabulated, and the increments
//! between consecutive radii are fitted to a power of the radius. A fitted
//! slope at or above `diverging_slope` means the truncations keep growing.
//! A slope confidently below `finite_slope` (slope plus `sigma_factor`
//! standard errors) means the tail is summable.

pub mod jet;
mod profile;
mod quad;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use profile::{make_power_law_init, Bump, RadialProfile, RadialVelocity};

use crate::error::{Error, Result};
use crate::field::{PrimitiveState, ScalarField, TensorField, VectorField};
use crate::grid::Grid;
use crate::ops::{derivative_magnitude, jacobian, lame_apply, FieldRef, Lame};
use crate::params::Params;
use jet::Jet;

/// Exponent window `(a_min, a_max)` for `rho0 = 1/(1+|x|^(2a))`, or `None`
/// when it is empty. With `q` the upper end is the `L^q` variant.
pub fn admissible_range(gamma: f64, delta: f64, q: Option<f64>) -> Result<Option<(f64, f64)>> {
    let mut bad = Vec::new();
    if !(gamma > 1.0) {
        bad.push(format!("gamma must exceed 1 (got {gamma})"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        bad.push(format!("delta must lie in (0,1) (got {delta})"));
    }
    if let Some(q) = q {
        if !(q > 3.0) {
            bad.push(format!("q must exceed 3 (got {q})"));
        }
    }
    if !bad.is_empty() {
        return Err(Error::InvalidParams(bad));
    }
    let a_min = 3.0 / (4.0 * (gamma - 1.0));
    let a_max = match q {
        None => 1.0 / (4.0 * (1.0 - delta)),
        Some(q) => (1.0 - 3.0 / q) / (2.0 * (1.0 - delta)),
    };
    Ok((a_min < a_max).then_some((a_min, a_max)))
}

/// Which family of weighted norms to check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSet {
    /// `grad rho^(delta-1)` in `L^6`, `D^1`, `D^2`; `grad rho^((delta-1)/2)` in `L^4`.
    Base,
    /// `grad rho^(delta-1)` in `L^q`, `D^{1,3}`, `D^2`; `grad rho^((delta-1)/2)` in `L^6`.
    Lq { q: f64 },
}

impl NormSet {
    pub fn q(&self) -> Option<f64> {
        match *self {
            NormSet::Base => None,
            NormSet::Lq { q } => Some(q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Finite,
    Diverging { rate: f64 },
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Finite => write!(f, "finite"),
            Verdict::Diverging { rate } => write!(f, "diverging (rate {rate:.3})"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    #[serde(default = "default_diverging")]
    pub diverging_slope: f64,
    #[serde(default = "default_finite")]
    pub finite_slope: f64,
    #[serde(default = "default_sigma")]
    pub sigma_factor: f64,
    /// Number of trailing increments used in the fit.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Truncation radii for radial profiles; defaults to `10^(1 + k/2)` up to `1e6`.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
}

fn default_diverging() -> f64 {
    -0.1
}
fn default_finite() -> f64 {
    -0.1
}
fn default_sigma() -> f64 {
    2.0
}
fn default_window() -> usize {
    5
}
fn default_rel_tol() -> f64 {
    1e-10
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            diverging_slope: default_diverging(),
            finite_slope: default_finite(),
            sigma_factor: default_sigma(),
            window: default_window(),
            rel_tol: default_rel_tol(),
            radii: None,
        }
    }
}

pub fn default_radii() -> Vec<f64> {
    (0..=10).map(|k| 10f64.powf(1.0 + 0.5 * k as f64)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormReport {
    pub name: String,
    pub exponent: f64,
    pub radii: Vec<f64>,
    /// Truncated norms `(int_{|x|<R} |.|^p)^(1/p)`.
    pub truncated: Vec<f64>,
    /// Integrals of `|.|^p` over the shells between consecutive radii.
    pub increments: Vec<f64>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub verdict: Verdict,
}

/// Least-squares slope of `log y` against `log x` and its standard error.
pub fn fit_log_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    let stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    (slope, stderr)
}

/// Classifies a table of shell increments ending at `radii[1..]`.
pub fn classify(radii: &[f64], increments: &[f64], cfg: &ClassifyConfig) -> (Option<f64>, Option<f64>, Verdict) {
    if increments.iter().any(|v| !v.is_finite()) {
        return (None, None, Verdict::Inconclusive);
    }
    let total: f64 = increments.iter().sum();
    let last = match increments.last() {
        Some(&v) => v,
        None => return (None, None, Verdict::Inconclusive),
    };
    if last <= 1e-14 * total || last == 0.0 {
        return (None, None, Verdict::Finite);
    }
    let start = increments.len().saturating_sub(cfg.window);
    let (xs, ys): (Vec<f64>, Vec<f64>) = radii[start + 1..]
        .iter()
        .zip(&increments[start..])
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x, y))
        .unzip();
    if xs.len() < 3 {
        return (None, None, Verdict::Inconclusive);
    }
    let (slope, se) = fit_log_slope(&xs, &ys);
    let verdict = if slope >= cfg.diverging_slope {
        Verdict::Diverging { rate: slope }
    } else if slope + cfg.sigma_factor * se < cfg.finite_slope {
        Verdict::Finite
    } else {
        Verdict::Inconclusive
    };
    (Some(slope), Some(se), verdict)
}

fn build_report(name: &str, p: f64, radii: &[f64], cumulative: &[f64], cfg: &ClassifyConfig) -> NormReport {
    let increments: Vec<f64> = cumulative.windows(2).map(|w| w[1] - w[0]).collect();
    let (slope, slope_stderr, verdict) = classify(radii, &increments, cfg);
    NormReport {
        name: name.to_string(),
        exponent: p,
        radii: radii.to_vec(),
        truncated: cumulative.iter().map(|v| v.powf(1.0 / p)).collect(),
        increments,
        slope,
        slope_stderr,
        verdict,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdmissibilityReport {
    pub norm_set: NormSet,
    pub dim: usize,
    pub a_exp: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub norms: Vec<NormReport>,
    pub compatibility: Vec<NormReport>,
    pub verdict: Verdict,
}

impl AdmissibilityReport {
    fn assemble(
        norm_set: NormSet,
        dim: usize,
        a_exp: Option<f64>,
        window: Option<(f64, f64)>,
        norms: Vec<NormReport>,
        compatibility: Vec<NormReport>,
    ) -> Self {
        let verdict = overall(norms.iter().chain(&compatibility).map(|n| n.verdict));
        Self {
            norm_set,
            dim,
            a_exp,
            window,
            norms,
            compatibility,
            verdict,
        }
    }

    pub fn find(&self, name: &str) -> Option<&NormReport> {
        self.norms.iter().chain(&self.compatibility).find(|n| n.name == name)
    }

    pub fn diverging(&self) -> impl Iterator<Item = &NormReport> {
        self.norms
            .iter()
            .chain(&self.compatibility)
            .filter(|n| matches!(n.verdict, Verdict::Diverging { .. }))
    }
}

fn overall(verdicts: impl Iterator<Item = Verdict>) -> Verdict {
    let mut all_finite = true;
    let mut worst: Option<f64> = None;
    for v in verdicts {
        match v {
            Verdict::Finite => {}
            Verdict::Diverging { rate } => worst = Some(worst.map_or(rate, |w: f64| w.max(rate))),
            Verdict::Inconclusive => all_finite = false,
        }
    }
    match worst {
        Some(rate) => Verdict::Diverging { rate },
        None if all_finite => Verdict::Finite,
        None => Verdict::Inconclusive,
    }
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<34} {:>4} {:>14} {:>9}  verdict", "norm", "p", "value@Rmax", "slope")?;
        for n in self.norms.iter().chain(&self.compatibility) {
            let slope = n.slope.map_or("-".to_string(), |s| format!("{s:.3}"));
            writeln!(
                f,
                "{:<34} {:>4} {:>14.6e} {:>9}  {}",
                n.name,
                n.exponent,
                n.truncated.last().copied().unwrap_or(f64::NAN),
                slope,
                n.verdict
            )?;
        }
        write!(f, "overall: {}", self.verdict)
    }
}

// ---------------------------------------------------------------- radial

fn surface_factor(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// `|grad^2 g|` for radial `g`.
fn radial_hessian(g: &Jet, r: f64, d: usize) -> f64 {
    let g1 = g.deriv(1);
    let g2 = g.deriv(2);
    if d == 1 {
        return g2.abs();
    }
    (g2 * g2 + (d - 1) as f64 * (g1 / r).powi(2)).sqrt()
}

/// `|grad^3 g|` for radial `g`.
fn radial_third(g: &Jet, r: f64, d: usize) -> f64 {
    let (g1, g2, g3) = (g.deriv(1), g.deriv(2), g.deriv(3));
    if d == 1 {
        return g3.abs();
    }
    let y = (g2 - g1 / r) / r;
    let x = g3 - 3.0 * y;
    (x * x + 6.0 * x * y + (3 * d + 6) as f64 * y * y).max(0.0).sqrt()
}

/// `|grad (w x/|x|)|` for radial profile `w`.
fn radial_vector_grad(w: &Jet, r: f64, d: usize) -> f64 {
    let w1 = w.deriv(1);
    if d == 1 {
        return w1.abs();
    }
    (w1 * w1 + (d - 1) as f64 * (w.value() / r).powi(2)).sqrt()
}

type Integrand = Box<dyn Fn(f64) -> f64 + Send + Sync>;

struct RadialNorm {
    name: String,
    p: f64,
    magnitude: Integrand,
}

fn radial_norms(profile: &RadialProfile, params: &Params, d: usize, set: NormSet) -> Vec<RadialNorm> {
    let pr = *profile;
    let (gm1, dm1) = (params.gamma - 1.0, params.delta - 1.0);
    let lame2 = 2.0 * params.alpha + params.beta;
    let mut out: Vec<RadialNorm> = Vec::new();
    let mut push = |name: &str, p: f64, f: Integrand| {
        out.push(RadialNorm {
            name: name.to_string(),
            p,
            magnitude: f,
        })
    };
    push("rho^(gamma-1) L2", 2.0, Box::new(move |r| pr.rho_jet(r).powf(gm1).value().abs()));
    push("rho^(gamma-1) D1", 2.0, Box::new(move |r| pr.rho_jet(r).powf(gm1).deriv(1).abs()));
    push("rho^(gamma-1) D2", 2.0, Box::new(move |r| radial_hessian(&pr.rho_jet(r).powf(gm1), r, d)));
    push("rho^(gamma-1) D3", 2.0, Box::new(move |r| radial_third(&pr.rho_jet(r).powf(gm1), r, d)));
    if pr.velocity.is_some() {
        push("u0 L2", 2.0, Box::new(move |r| pr.velocity_jet(r).value().abs()));
        push("u0 D1", 2.0, Box::new(move |r| radial_vector_grad(&pr.velocity_jet(r), r, d)));
    }
    let (p0, p1, ph) = match set {
        NormSet::Base => (6.0, 2.0, 4.0),
        NormSet::Lq { q } => (q, 3.0, 6.0),
    };
    let d1_name = match set {
        NormSet::Base => "grad rho^(delta-1) D1".to_string(),
        NormSet::Lq { .. } => "grad rho^(delta-1) D1,3".to_string(),
    };
    push(
        &format!("grad rho^(delta-1) L{p0}"),
        p0,
        Box::new(move |r| pr.rho_jet(r).powf(dm1).deriv(1).abs()),
    );
    push(&d1_name, p1, Box::new(move |r| radial_hessian(&pr.rho_jet(r).powf(dm1), r, d)));
    push(
        "grad rho^(delta-1) D2",
        2.0,
        Box::new(move |r| radial_third(&pr.rho_jet(r).powf(dm1), r, d)),
    );
    push(
        &format!("grad rho^((delta-1)/2) L{ph}"),
        ph,
        Box::new(move |r| pr.rho_jet(r).powf(0.5 * dm1).deriv(1).abs()),
    );
    if pr.velocity.is_some() {
        push(
            "g1",
            2.0,
            Box::new(move |r| {
                pr.rho(r).powf(0.5 * dm1) * radial_vector_grad(&pr.velocity_jet(r), r, d)
            }),
        );
        push(
            "g2",
            2.0,
            Box::new(move |r| {
                let dv = pr.velocity.map_or(Jet::constant(0.0), |v| v.div_jet(r, d));
                pr.rho(r).powf(dm1) * lame2 * dv.deriv(1).abs()
            }),
        );
        push(
            "g3",
            2.0,
            Box::new(move |r| {
                let dv = pr.velocity.map_or(Jet::constant(0.0), |v| v.div_jet(r, d));
                let w = (pr.rho_jet(r).powf(dm1) * dv.d()).scale(-lame2);
                pr.rho(r).powf(0.5 * dm1) * radial_vector_grad(&w, r, d)
            }),
        );
    }
    out
}

fn integrate_radial(norm: &RadialNorm, d: usize, r_min: f64, radii: &[f64], extra: &[f64], rel_tol: f64) -> Vec<f64> {
    let omega = surface_factor(d);
    let p = norm.p;
    let dens = |r: f64| {
        let m = (norm.magnitude)(r);
        let v = m.powf(p) * omega * r.powi(d as i32 - 1);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut knots: Vec<f64> = vec![r_min, 1.0];
    knots.extend(extra.iter().copied().filter(|&x| x > r_min));
    knots.extend(radii.iter().copied());
    knots.sort_by(|a, b| a.total_cmp(b));
    knots.dedup();
    let mut cumulative = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    let mut next = 0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let piece = if b <= 1.0 {
            quad::adaptive_simpson(dens, a, b, rel_tol, 0.0)
        } else {
            quad::adaptive_simpson(|t: f64| dens(t.exp()) * t.exp(), a.ln(), b.ln(), rel_tol, 0.0)
        };
        acc += piece;
        while next < radii.len() && radii[next] <= b {
            cumulative.push(acc);
            next += 1;
        }
    }
    cumulative
}

/// Checks a radial power-law profile (and optional radial velocity) against
/// the chosen norm set.
pub fn check_admissible(
    profile: &RadialProfile,
    params: &Params,
    set: NormSet,
    cfg: &ClassifyConfig,
) -> Result<AdmissibilityReport> {
    params.validate()?;
    let d = params.dim;
    let radii = cfg.radii.clone().unwrap_or_else(default_radii);
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(Error::InvalidInput("radii must be positive and strictly increasing".into()));
    }
    let window = admissible_range(params.gamma, params.delta, set.q())?;
    let integer_power = (2.0 * profile.a_exp).fract() == 0.0;
    let r_min = if d == 1 && integer_power { 0.0 } else { 1e-6 };
    let extra: Vec<f64> = profile.velocity.and_then(|v| v.support()).into_iter().collect();
    let all = radial_norms(profile, params, d, set);
    let mut reports: Vec<NormReport> = all
        .par_iter()
        .map(|n| {
            let cum = integrate_radial(n, d, r_min, &radii, &extra, cfg.rel_tol);
            build_report(&n.name, n.p, &radii, &cum, cfg)
        })
        .collect();
    let compat: Vec<NormReport> = reports
        .iter()
        .filter(|r| r.name.starts_with('g') && r.name.len() == 2)
        .cloned()
        .collect();
    reports.retain(|r| !(r.name.starts_with('g') && r.name.len() == 2));
    Ok(AdmissibilityReport::assemble(
        set,
        d,
        Some(profile.a_exp),
        window,
        reports,
        compat,
    ))
}

// ---------------------------------------------------------------- gridded

fn grid_truncations(mag: &[f64], p: f64, grid: &Grid, radii: &[f64]) -> Vec<f64> {
    let dv = grid.cell_volume();
    radii
        .iter()
        .map(|&r| {
            (0..grid.len())
                .filter(|&i| grid.radius(i) <= r)
                .map(|i| mag[i].abs().powf(p))
                .sum::<f64>()
                * dv
        })
        .collect()
}

fn grid_report(name: &str, mag: &[f64], p: f64, grid: &Grid, cfg: &ClassifyConfig) -> NormReport {
    if grid.is_periodic() {
        let total = mag.iter().map(|m| m.abs().powf(p)).sum::<f64>() * grid.cell_volume();
        return NormReport {
            name: name.to_string(),
            exponent: p,
            radii: vec![],
            truncated: vec![total.powf(1.0 / p)],
            increments: vec![],
            slope: None,
            slope_stderr: None,
            verdict: if total.is_finite() {
                Verdict::Finite
            } else {
                Verdict::Inconclusive
            },
        };
    }
    let hw = (0..grid.dim())
        .map(|k| grid.axis(k).lo.abs().min(grid.axis(k).lo + grid.axis(k).length))
        .fold(f64::INFINITY, f64::min);
    let radii: Vec<f64> = (2..=8).map(|k| hw * k as f64 / 8.0).collect();
    let cum = grid_truncations(mag, p, grid, &radii);
    build_report(name, p, &radii, &cum, cfg)
}

/// Compatibility fields `g1 = rho^((delta-1)/2) grad u`, `g2 = rho^(delta-1) L u`,
/// `g3 = rho^((delta-1)/2) grad(rho^(delta-1) L u)`.
#[derive(Debug, Clone)]
pub struct CompatibilityFields {
    pub g1: TensorField,
    pub g2: VectorField,
    pub g3: TensorField,
    pub norms: [f64; 3],
    pub reports: Vec<NormReport>,
}

pub fn compatibility_fields(
    state: &PrimitiveState,
    params: &Params,
    grid: &Grid,
    cfg: &ClassifyConfig,
) -> Result<CompatibilityFields> {
    params.validate()?;
    state.validate(grid)?;
    let dm1 = params.delta - 1.0;
    let w_half = state.rho.map(|r| r.powf(0.5 * dm1));
    let w_full = state.rho.map(|r| r.powf(dm1));
    let weigh_tensor = |t: TensorField, w: &ScalarField| {
        TensorField::from_components(
            t.dim(),
            t.components().iter().map(|c| c.zip_map(w, |a, b| a * b)).collect(),
        )
    };
    let g1 = weigh_tensor(jacobian(&state.u, grid), &w_half);
    let g2 = lame_apply(&state.u, Lame::from(params), grid).weighted(&w_full);
    let g3 = weigh_tensor(jacobian(&g2, grid), &w_half);
    let m1 = g1.magnitude();
    let m2 = g2.magnitude();
    let m3 = g3.magnitude();
    let reports = vec![
        grid_report("g1", &m1, 2.0, grid, cfg),
        grid_report("g2", &m2, 2.0, grid, cfg),
        grid_report("g3", &m3, 2.0, grid, cfg),
    ];
    let l2 = |m: &ScalarField| (m.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()).sqrt();
    let norms = [l2(&m1), l2(&m2), l2(&m3)];
    Ok(CompatibilityFields {
        g1,
        g2,
        g3,
        norms,
        reports,
    })
}

/// Truncated-norm verdicts for gridded data. Periodic grids have no far
/// field, so every finite norm is finite.
pub fn check_admissible_grid(
    state: &PrimitiveState,
    params: &Params,
    grid: &Grid,
    set: NormSet,
    cfg: &ClassifyConfig,
) -> Result<AdmissibilityReport> {
    params.validate()?;
    state.validate(grid)?;
    let (gm1, dm1) = (params.gamma - 1.0, params.delta - 1.0);
    let g = state.rho.map(|r| r.powf(gm1));
    let big_g = state.rho.map(|r| r.powf(dm1));
    let half = state.rho.map(|r| r.powf(0.5 * dm1));
    let (p0, p1, ph) = match set {
        NormSet::Base => (6.0, 2.0, 4.0),
        NormSet::Lq { q } => (q, 3.0, 6.0),
    };
    let mut specs: Vec<(String, FieldRef<'_>, usize, f64)> = Vec::new();
    for k in 0..=3 {
        let label = if k == 0 { "L2".to_string() } else { format!("D{k}") };
        specs.push((format!("rho^(gamma-1) {label}"), FieldRef::Scalar(&g), k, 2.0));
        specs.push((format!("u0 {label}"), FieldRef::Vector(&state.u), k, 2.0));
    }
    let d1_name = match set {
        NormSet::Base => "grad rho^(delta-1) D1".to_string(),
        NormSet::Lq { .. } => "grad rho^(delta-1) D1,3".to_string(),
    };
    specs.push((format!("grad rho^(delta-1) L{p0}"), FieldRef::Scalar(&big_g), 1, p0));
    specs.push((d1_name, FieldRef::Scalar(&big_g), 2, p1));
    specs.push(("grad rho^(delta-1) D2".into(), FieldRef::Scalar(&big_g), 3, 2.0));
    specs.push((format!("grad rho^((delta-1)/2) L{ph}"), FieldRef::Scalar(&half), 1, ph));
    let mut norms = Vec::with_capacity(specs.len());
    for (name, field, k, p) in specs {
        let mag = derivative_magnitude(field, k, grid)?;
        norms.push(grid_report(&name, &mag, p, grid, cfg));
    }
    let compat = compatibility_fields(state, params, grid, cfg)?.reports;
    let window = admissible_range(params.gamma, params.delta, set.q())?;
    Ok(AdmissibilityReport::assemble(set, grid.dim(), None, window, norms, compat))
}
