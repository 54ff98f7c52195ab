//! Refinement studies: transport schemes against characteristic oracles and
//! grid/time refinement of the full nonlinear scheme.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::admissibility::fit_log_slope;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::field::{PrimitiveState, ScalarField, VectorField};
use crate::grid::{Axis, Grid};
use crate::params::Params;
use crate::picard::{solve_nonlinear, PicardConfig};
use crate::reform::from_reform;
use crate::transport::{
    advance_h, advance_phi, advance_varphi, characteristic_oracle, Method, OracleField, PathVelocity, TransportScheme,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleCase {
    /// `v = 0.7` on the periodic unit interval.
    Constant,
    /// `v = x` on the far-field box `[-1, 1]`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleQuantity {
    Advected,
    Phi,
    H,
    Varphi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleStudyConfig {
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
    #[serde(default = "default_oracle_t")]
    pub t_end: f64,
    /// `dt = courant dx / max|v|`.
    #[serde(default = "default_courant")]
    pub courant: f64,
    #[serde(default = "all_cases")]
    pub cases: Vec<OracleCase>,
    #[serde(default = "all_quantities")]
    pub quantities: Vec<OracleQuantity>,
}

fn all_methods() -> Vec<Method> {
    vec![Method::Upwind1, Method::Upwind2, Method::SemiLagrangian]
}
fn default_levels() -> Vec<usize> {
    vec![32, 64, 128, 256]
}
fn default_oracle_t() -> f64 {
    0.25
}
fn default_courant() -> f64 {
    0.4
}
fn all_cases() -> Vec<OracleCase> {
    vec![OracleCase::Constant, OracleCase::Linear]
}
fn all_quantities() -> Vec<OracleQuantity> {
    vec![OracleQuantity::Advected, OracleQuantity::Phi, OracleQuantity::H, OracleQuantity::Varphi]
}

impl Default for OracleStudyConfig {
    fn default() -> Self {
        Self {
            methods: all_methods(),
            levels: default_levels(),
            t_end: default_oracle_t(),
            courant: default_courant(),
            cases: all_cases(),
            quantities: all_quantities(),
        }
    }
}

impl OracleStudyConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.levels.len() < 2 || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            v.push("oracle.levels needs at least two strictly increasing entries".into());
        }
        if self.levels.iter().any(|&n| n < Grid::MIN_CELLS) {
            v.push(format!("oracle.levels entries must be at least {}", Grid::MIN_CELLS));
        }
        if !(self.t_end > 0.0) {
            v.push(format!("oracle.t_end must be positive (got {})", self.t_end));
        }
        if !(self.courant > 0.0) {
            v.push(format!("oracle.courant must be positive (got {})", self.courant));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub method: Method,
    pub case: OracleCase,
    pub quantity: OracleQuantity,
    pub n: usize,
    pub dx: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFit {
    pub method: Method,
    pub case: OracleCase,
    pub quantity: OracleQuantity,
    pub order: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTable {
    pub rows: Vec<OracleRow>,
    pub fits: Vec<OrderFit>,
}

impl OracleTable {
    pub fn fit(&self, method: Method, case: OracleCase, quantity: OracleQuantity) -> Option<&OrderFit> {
        self.fits
            .iter()
            .find(|f| f.method == method && f.case == case && f.quantity == quantity)
    }
}

fn l2_diff(a: &[f64], b: &[f64], grid: &Grid) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * grid.cell_volume()).sqrt()
}

/// L2 error of one scheme at one resolution against the oracle.
pub fn oracle_error(
    scheme: &TransportScheme,
    case: OracleCase,
    quantity: OracleQuantity,
    n: usize,
    t_end: f64,
    courant: f64,
    p: &Params,
) -> Result<f64> {
    let periodic = case == OracleCase::Constant;
    let grid = if periodic { Grid::periodic_1d(n, 1.0)? } else { Grid::far_field(1, n, 1.0)? };
    let speed = move |x: f64| if periodic { 0.7 } else { x };
    let init = move |x: [f64; 3]| {
        if periodic {
            1.0 + 0.4 * (2.0 * PI * x[0]).sin()
        } else {
            1.0 + 0.5 * (-4.0 * x[0] * x[0]).exp()
        }
    };
    let v = VectorField(vec![ScalarField::from_fn(&grid, |x| speed(x[0]))]);
    let one = ScalarField::constant(grid.len(), 1.0);
    let zero = ScalarField::zeros(grid.len());
    let field = match quantity {
        OracleQuantity::Advected => OracleField::Advected,
        OracleQuantity::Phi => OracleField::Phi { gamma: p.gamma },
        OracleQuantity::H => OracleField::H { delta: p.delta },
        OracleQuantity::Varphi => OracleField::Varphi { delta: p.delta },
    };
    let steps = (t_end / (courant * grid.dx(0))).ceil() as usize;
    let dt = t_end / steps as f64;
    let mut w = ScalarField::from_fn(&grid, init);
    for _ in 0..steps {
        w = match field {
            OracleField::Phi { gamma } => advance_phi(&w, &v, dt, gamma, &grid, scheme)?,
            OracleField::H { delta } => advance_h(&w, &v, &one, dt, delta, &grid, scheme)?,
            OracleField::Varphi { delta } => advance_varphi(&w, &v, &one, dt, delta, &grid, scheme)?,
            OracleField::Advected => advance_h(&w, &v, &zero, dt, p.delta, &grid, scheme)?,
        };
    }
    let vv = move |_: f64, x: [f64; 3]| [speed(x[0]), 0.0, 0.0];
    let dv = move |_: f64, _: [f64; 3]| if periodic { 0.0 } else { 1.0 };
    let path = PathVelocity { v: &vv, div: &dv, g: None };
    let nodes: Vec<[f64; 3]> = (0..grid.len()).map(|q| grid.coords(q)).collect();
    let exact: Vec<f64> = characteristic_oracle(&init, field, &path, t_end, &nodes, Some(&grid))?
        .into_iter()
        .map(|s| s.value)
        .collect();
    Ok(l2_diff(&w, &exact, &grid))
}

/// Error table and fitted orders for every (method, case, quantity).
pub fn transport_order_study(cfg: &OracleStudyConfig, base: &TransportScheme, p: &Params) -> Result<OracleTable> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::ConfigViolations(v));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &method in &cfg.methods {
        let scheme = TransportScheme { method, ..*base };
        for &case in &cfg.cases {
            for &quantity in &cfg.quantities {
                let mut dxs = Vec::new();
                let mut errs = Vec::new();
                for &n in &cfg.levels {
                    let error = oracle_error(&scheme, case, quantity, n, cfg.t_end, cfg.courant, p)?;
                    let dx = if case == OracleCase::Constant { 1.0 } else { 2.0 } / n as f64;
                    rows.push(OracleRow { method, case, quantity, n, dx, error });
                    dxs.push(dx);
                    errs.push(error);
                }
                let (order, stderr) = fit_log_slope(&dxs, &errs);
                fits.push(OrderFit { method, case, quantity, order, stderr });
            }
        }
    }
    Ok(OracleTable { rows, fits })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementConfig {
    /// Cells per axis at each level; `dt` scales with the cell size.
    #[serde(default = "default_refinement_levels")]
    pub levels: Vec<usize>,
}

fn default_refinement_levels() -> Vec<usize> {
    vec![128, 256, 512]
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self { levels: default_refinement_levels() }
    }
}

impl RefinementConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.levels.len() < 2 {
            v.push("convergence.levels needs at least two entries".into());
        }
        if self.levels.windows(2).any(|w| w[1] != 2 * w[0]) {
            v.push("convergence.levels must double from one entry to the next".into());
        }
        if self.levels.iter().any(|&n| n < Grid::MIN_CELLS) {
            v.push(format!("convergence.levels entries must be at least {}", Grid::MIN_CELLS));
        }
        v
    }
}

/// Summary of one refinement level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementRow {
    pub n: usize,
    pub dt: f64,
    /// `max_t |m(t) - m(0)| / m(0)`.
    pub mass_drift: f64,
    /// `max_t |M(t) - M(0)| / max(|M(0)|, m(0))`.
    pub momentum_drift: f64,
    /// `|E(T) + D(T) - E(0)| / E(0)`.
    pub energy_residual: f64,
    /// `max_t E(t) - E(0)`.
    pub energy_increase: f64,
    /// `min_t (sup|u(t)| - |M(0)|/m(0))`.
    pub nondecay_margin: f64,
    /// L2 difference to the next finer level (restricted), if any.
    pub diff_rho: Option<f64>,
    pub diff_u: Option<f64>,
    pub krylov_residual: f64,
    pub picard_converged: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
    /// Observed order of the successive differences, `log2(d_l / d_{l+1})`.
    pub order_rho: Option<f64>,
    pub order_u: Option<f64>,
}

impl RefinementTable {
    /// Ratios `q_l / q_{l+1}` of a per-level quantity.
    pub fn shrink_factors(&self, q: impl Fn(&RefinementRow) -> f64) -> Vec<f64> {
        self.rows.windows(2).map(|w| q(&w[0]) / q(&w[1])).collect()
    }
}

/// Same box as `grid` with `n` cells per axis.
pub fn refine_grid(grid: &Grid, n: usize) -> Result<Grid> {
    let axes = grid.axes().iter().map(|a| Axis { lo: a.lo, length: a.length, n }).collect();
    Grid::new(axes, grid.boundary())
}

/// Averages a field on `fine` (twice the cells per axis) onto `coarse`.
pub fn restrict(f: &[f64], fine: &Grid, coarse: &Grid) -> Result<ScalarField> {
    if (0..coarse.dim()).any(|k| fine.axis(k).n != 2 * coarse.axis(k).n) || fine.dim() != coarse.dim() {
        return Err(Error::ShapeMismatch("restriction needs exactly doubled axes".into()));
    }
    let d = coarse.dim();
    let children = 1usize << d;
    Ok((0..coarse.len())
        .map(|q| {
            let idx = coarse.multi_index(q);
            let mut s = 0.0;
            for c in 0..children {
                let mut fi = [0usize; 3];
                for k in 0..d {
                    fi[k] = 2 * idx[k] + ((c >> k) & 1);
                }
                s += f[fine.flat_index(&fi[..d])];
            }
            s / children as f64
        })
        .collect())
}

fn drifts(records: &[DiagnosticsRecord]) -> (f64, f64, f64, f64, f64) {
    let r0 = &records[0];
    let m0 = r0.mass;
    let mom_norm = |m: &[f64]| m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mscale = mom_norm(&r0.momentum).max(m0);
    let mut mass = 0.0f64;
    let mut mom = 0.0f64;
    let mut e_inc = f64::NEG_INFINITY;
    let mut nd = f64::INFINITY;
    for r in records {
        mass = mass.max((r.mass - m0).abs() / m0);
        let dm: Vec<f64> = r.momentum.iter().zip(&r0.momentum).map(|(a, b)| a - b).collect();
        mom = mom.max(mom_norm(&dm) / mscale);
        e_inc = e_inc.max(r.energy - r0.energy);
        nd = nd.min(r.sup_u - r.c_u);
    }
    let last = records.last().expect("nonempty records");
    (mass, mom, last.energy_residual.abs() / r0.energy, e_inc, nd)
}

/// Runs `init_at(grid)` to `t_end` on each level; `dt` at level `n` is
/// `cfg.dt * n_ref / n` where `n_ref` is the first axis of `grid`.
pub fn refinement_study(
    init_at: impl Fn(&Grid) -> Result<PrimitiveState>,
    p: &Params,
    grid: &Grid,
    t_end: f64,
    cfg: &PicardConfig,
    study: &RefinementConfig,
) -> Result<RefinementTable> {
    let v = study.violations();
    if !v.is_empty() {
        return Err(Error::ConfigViolations(v));
    }
    let n_ref = grid.axis(0).n as f64;
    let mut rows = Vec::new();
    let mut finals: Vec<(Grid, PrimitiveState)> = Vec::new();
    for &n in &study.levels {
        let g = refine_grid(grid, n)?;
        let mut c = *cfg;
        c.dt = cfg.dt * n_ref / n as f64;
        c.cadence = cfg.cadence * n / study.levels[0];
        let clock = Instant::now();
        let run = solve_nonlinear(&init_at(&g)?, p, &g, t_end, &c)?;
        let wall = clock.elapsed().as_secs_f64();
        let (mass, mom, e_res, e_inc, nd) = drifts(&run.records);
        rows.push(RefinementRow {
            n,
            dt: c.dt,
            mass_drift: mass,
            momentum_drift: mom,
            energy_residual: e_res,
            energy_increase: e_inc,
            nondecay_margin: nd,
            diff_rho: None,
            diff_u: None,
            krylov_residual: run.krylov_residual,
            picard_converged: run.converged,
            wall_time_s: wall,
        });
        finals.push((g, from_reform(run.final_state(), p)?));
    }
    for l in 0..finals.len() - 1 {
        let (gc, sc) = &finals[l];
        let (gf, sf) = &finals[l + 1];
        let r = restrict(&sf.rho, gf, gc)?;
        rows[l].diff_rho = Some(l2_diff(&sc.rho, &r, gc));
        let mut du = 0.0;
        for (uc, uf) in sc.u.iter().zip(sf.u.iter()) {
            du += l2_diff(uc, &restrict(uf, gf, gc)?, gc).powi(2);
        }
        rows[l].diff_u = Some(du.sqrt());
    }
    let order = |q: fn(&RefinementRow) -> Option<f64>| {
        let d: Vec<f64> = rows.iter().filter_map(q).collect();
        (d.len() >= 2).then(|| (d[d.len() - 2] / d[d.len() - 1]).log2())
    };
    let order_rho = order(|r| r.diff_rho);
    let order_u = order(|r| r.diff_u);
    Ok(RefinementTable { rows, order_rho, order_u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    #[test]
    fn restriction_of_linear_field_is_exact() {
        let coarse = Grid::uniform(2, 4, -1.0, 2.0, Boundary::FarField).unwrap();
        let fine = refine_grid(&coarse, 8).unwrap();
        let f = ScalarField::from_fn(&fine, |x| 3.0 * x[0] - x[1] + 0.5);
        let r = restrict(&f, &fine, &coarse).unwrap();
        let exact = ScalarField::from_fn(&coarse, |x| 3.0 * x[0] - x[1] + 0.5);
        for (a, b) in r.iter().zip(exact.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(restrict(&f, &fine, &fine).is_err());
    }

    #[test]
    fn oracle_study_reports_orders() {
        let p = Params::new(1.0, 1.5, 0.5, 1.0, 0.0);
        let cfg = OracleStudyConfig {
            methods: vec![Method::Upwind1, Method::Upwind2],
            levels: vec![64, 128, 256],
            cases: vec![OracleCase::Constant],
            quantities: vec![OracleQuantity::Advected],
            ..Default::default()
        };
        let t = transport_order_study(&cfg, &TransportScheme::default(), &p).unwrap();
        assert_eq!(t.rows.len(), 6);
        let o1 = t.fit(Method::Upwind1, OracleCase::Constant, OracleQuantity::Advected).unwrap().order;
        let o2 = t.fit(Method::Upwind2, OracleCase::Constant, OracleQuantity::Advected).unwrap().order;
        assert!(o1 > 0.9 && o1 < 1.2, "{o1}");
        assert!(o2 > 1.8, "{o2}");
    }

    #[test]
    fn refinement_levels_must_double() {
        let bad = RefinementConfig { levels: vec![32, 48] };
        assert_eq!(bad.violations().len(), 1);
        assert!(RefinementConfig::default().violations().is_empty());
    }

    #[test]
    fn equilibrium_refinement_has_no_drift() {
        let grid = Grid::periodic_1d(16, 1.0).unwrap();
        let p = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
        let init = |g: &Grid| Ok(PrimitiveState::new(ScalarField::constant(g.len(), 1.0), VectorField::zeros(1, g.len()), 0.0));
        let study = RefinementConfig { levels: vec![16, 32] };
        let t = refinement_study(init, &p, &grid, 0.01, &PicardConfig::new(1e-3), &study).unwrap();
        assert_eq!(t.rows.len(), 2);
        for r in &t.rows {
            assert!(r.mass_drift < 1e-15 && r.momentum_drift < 1e-15 && r.energy_residual < 1e-15);
        }
        assert_eq!(t.rows[0].diff_rho, Some(0.0));
    }
}
