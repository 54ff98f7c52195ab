//! Transport of the reformulated variables by a frozen velocity.
//!
//! The upwind methods write `v . grad w = div(w v) - w div v` with face
//! velocities averaged from the nodes and upwinded face values (first order,
//! or a linear upwind reconstruction for second order). Sources are added
//! unsplit and the semi-discrete system is advanced by the two-stage SSP
//! Runge-Kutta method. With `gamma = 2` the phi update is a discrete
//! conservation law for the density.
//!
//! On far-field boxes a boundary node whose outer face carries inflow keeps
//! its value; outflow nodes are updated with the outer face velocity
//! extrapolated from the interior.

mod oracle;
mod semi_lagrangian;

pub use oracle::{characteristic_oracle, OracleField, OracleSample, PathVelocity};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::ops::{d1, div, for_each_line};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Upwind1,
    Upwind2,
    SemiLagrangian,
}

/// How the `a delta` source of the psi system is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiGrouping {
    /// `g grad div v + grad g div v`
    #[default]
    Split,
    /// `grad (g div v)`
    Grouped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportScheme {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub psi_grouping: PsiGrouping,
}

fn default_method() -> Method {
    Method::Upwind2
}

fn default_cfl() -> f64 {
    0.9
}

impl Default for TransportScheme {
    fn default() -> Self {
        Self {
            method: default_method(),
            cfl: default_cfl(),
            psi_grouping: PsiGrouping::Split,
        }
    }
}

impl TransportScheme {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// Largest stable step for velocity `v`, or infinity.
    ///
    /// The second-order upwind operator with two-stage Runge-Kutta is stable
    /// up to half the first-order limit, so `cfl` is scaled by 1/2 there.
    pub fn max_dt(&self, v: &VectorField, grid: &Grid) -> f64 {
        let factor = match self.method {
            Method::Upwind1 => 1.0,
            Method::Upwind2 => 0.5,
            Method::SemiLagrangian => return f64::INFINITY,
        };
        let rate: f64 = v
            .iter()
            .enumerate()
            .map(|(k, c)| c.max_abs() / grid.dx(k))
            .sum();
        if rate == 0.0 {
            f64::INFINITY
        } else {
            factor * self.cfl / rate
        }
    }

    pub fn check_cfl(&self, v: &VectorField, dt: f64, grid: &Grid) -> Result<()> {
        let limit = self.max_dt(v, grid);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        Ok(())
    }

    /// Number of equal sub-steps needed to respect the CFL limit.
    pub fn substeps(&self, v: &VectorField, dt: f64, grid: &Grid) -> usize {
        let limit = self.max_dt(v, grid);
        if dt <= limit {
            1
        } else {
            (dt / limit).ceil() as usize
        }
    }
}

/// Upwinded `v . grad w` in flux form.
pub fn advective(w: &[f64], v: &VectorField, grid: &Grid, second_order: bool) -> ScalarField {
    let mut out = vec![0.0; w.len()];
    let periodic = grid.is_periodic();
    for k in 0..grid.dim() {
        let n = grid.axis(k).n;
        let s = grid.stride(k);
        let inv = 1.0 / grid.dx(k);
        let vk = &v[k];
        let mut vf = vec![0.0; n + 1];
        let mut flux = vec![0.0; n + 1];
        for_each_line(grid, k, |start| {
            let idx = |i: usize| start + i * s;
            let at = |i: isize| -> Option<f64> {
                if periodic {
                    Some(w[idx(i.rem_euclid(n as isize) as usize)])
                } else if (0..n as isize).contains(&i) {
                    Some(w[idx(i as usize)])
                } else {
                    None
                }
            };
            let vel = |i: isize| -> f64 {
                if periodic {
                    vk[idx(i.rem_euclid(n as isize) as usize)]
                } else {
                    vk[idx(i.clamp(0, n as isize - 1) as usize)]
                }
            };
            // face j sits between nodes j-1 and j
            for j in 0..=n {
                let j = j as isize;
                let face_v = if periodic || (1..n as isize).contains(&j) {
                    0.5 * (vel(j - 1) + vel(j))
                } else if j == 0 {
                    1.5 * vel(0) - 0.5 * vel(1)
                } else {
                    1.5 * vel(j - 1) - 0.5 * vel(j - 2)
                };
                // upwind node u and the one beyond it
                let (up, beyond) = if face_v >= 0.0 { (j - 1, j - 2) } else { (j, j + 1) };
                let (up, beyond) = match (at(up), at(beyond)) {
                    (Some(a), b) => (a, b),
                    // outer face with inflow: the node itself is held
                    (None, _) => (at(if face_v >= 0.0 { j } else { j - 1 }).unwrap_or(0.0), None),
                };
                let face_w = match (second_order, beyond) {
                    (true, Some(b)) => up + 0.5 * (up - b),
                    _ => up,
                };
                vf[j as usize] = face_v;
                flux[j as usize] = face_v * face_w;
            }
            for i in 0..n {
                let o = idx(i);
                out[o] += ((flux[i + 1] - flux[i]) - w[o] * (vf[i + 1] - vf[i])) * inv;
            }
        });
    }
    ScalarField(out)
}

/// Nodes whose value is held fixed: far-field boundary nodes without
/// outflow through any outer face.
fn held_nodes(v: &VectorField, grid: &Grid) -> Vec<usize> {
    if grid.is_periodic() {
        return Vec::new();
    }
    (0..grid.len())
        .filter(|&p| grid.is_boundary_node(p))
        .filter(|&p| {
            let mut outflow = false;
            for k in 0..grid.dim() {
                let i = grid.index_along(p, k);
                let n = grid.axis(k).n;
                let s = grid.stride(k);
                if i == 0 {
                    let face = 1.5 * v[k][p] - 0.5 * v[k][p + s];
                    outflow |= face < 0.0;
                }
                if i + 1 == n {
                    let face = 1.5 * v[k][p] - 0.5 * v[k][p - s];
                    outflow |= face > 0.0;
                }
            }
            !outflow
        })
        .collect()
}

type Source<'a> = dyn Fn(&[ScalarField]) -> Vec<ScalarField> + 'a;

/// Advances the components `w` of `dw/dt + v . grad w = S(w)` by one step.
fn advance_system(
    w: &[ScalarField],
    v: &VectorField,
    source: &Source<'_>,
    dt: f64,
    grid: &Grid,
    scheme: &TransportScheme,
) -> Result<Vec<ScalarField>> {
    for c in w {
        c.check_len(grid, "transported field")?;
    }
    v.check_shape(grid, "velocity")?;
    if dt == 0.0 {
        return Ok(w.to_vec());
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be nonnegative (got {dt})")));
    }
    scheme.check_cfl(v, dt, grid)?;
    if scheme.method == Method::SemiLagrangian {
        return Ok(semi_lagrangian::advance(w, v, source, dt, grid));
    }
    let second = scheme.method == Method::Upwind2;
    let held = held_nodes(v, grid);
    let rate = |state: &[ScalarField]| -> Vec<ScalarField> {
        let src = source(state);
        state
            .iter()
            .zip(src)
            .map(|(c, s)| s.zip_map(&advective(c, v, grid, second), |a, b| a - b))
            .collect()
    };
    let hold = |state: &mut [ScalarField]| {
        for (c, orig) in state.iter_mut().zip(w) {
            for &p in &held {
                c[p] = orig[p];
            }
        }
    };
    let r0 = rate(w);
    let mut w1: Vec<ScalarField> = w.iter().zip(&r0).map(|(c, r)| c.axpy(dt, r)).collect();
    hold(&mut w1);
    let r1 = rate(&w1);
    let mut w2: Vec<ScalarField> = w
        .iter()
        .zip(w1.iter().zip(&r1))
        .map(|(c, (c1, r))| c.zip_map(&c1.axpy(dt, r), |a, b| 0.5 * (a + b)))
        .collect();
    hold(&mut w2);
    Ok(w2)
}

/// `phi_t + v . grad phi + (gamma - 1) phi div v = 0`.
pub fn advance_phi(
    phi: &ScalarField,
    v: &VectorField,
    dt: f64,
    gamma: f64,
    grid: &Grid,
    scheme: &TransportScheme,
) -> Result<ScalarField> {
    let dv = div(v, grid);
    let src = |s: &[ScalarField]| vec![s[0].zip_map(&dv, |p, d| -(gamma - 1.0) * p * d)];
    let out = advance_system(std::slice::from_ref(phi), v, &src, dt, grid, scheme)?.remove(0);
    out.check_positive("phi")?;
    Ok(out)
}

/// `h_t + v . grad h + (delta - 1) g div v = 0`.
pub fn advance_h(
    h: &ScalarField,
    v: &VectorField,
    g: &ScalarField,
    dt: f64,
    delta: f64,
    grid: &Grid,
    scheme: &TransportScheme,
) -> Result<ScalarField> {
    g.check_len(grid, "g")?;
    let gd = g.zip_map(&div(v, grid), |g, d| -(delta - 1.0) * g * d);
    let src = |_: &[ScalarField]| vec![gd.clone()];
    let out = advance_system(std::slice::from_ref(h), v, &src, dt, grid, scheme)?.remove(0);
    out.check_positive("h")?;
    Ok(out)
}

/// `varphi_t + v . grad varphi - (delta - 1) g varphi^2 div v = 0`.
pub fn advance_varphi(
    varphi: &ScalarField,
    v: &VectorField,
    g: &ScalarField,
    dt: f64,
    delta: f64,
    grid: &Grid,
    scheme: &TransportScheme,
) -> Result<ScalarField> {
    g.check_len(grid, "g")?;
    let coef = g.zip_map(&div(v, grid), |g, d| (delta - 1.0) * g * d);
    let src = |s: &[ScalarField]| vec![s[0].zip_map(&coef, |w, c| c * w * w)];
    let out = advance_system(std::slice::from_ref(varphi), v, &src, dt, grid, scheme)?.remove(0);
    out.check_positive("varphi")?;
    Ok(out)
}

/// `(grad v)^T w`, component `j` is `sum_i w_i d_j v_i`.
fn grad_v_transpose(jac: &[Vec<ScalarField>], w: &[ScalarField]) -> Vec<ScalarField> {
    let dim = w.len();
    (0..dim)
        .map(|j| {
            let mut out = ScalarField::zeros(w[0].len());
            for i in 0..dim {
                for ((o, a), b) in out.iter_mut().zip(w[i].iter()).zip(jac[i][j].iter()) {
                    *o += a * b;
                }
            }
            out
        })
        .collect()
}

fn jacobian_rows(v: &VectorField, grid: &Grid) -> Vec<Vec<ScalarField>> {
    v.iter()
        .map(|c| (0..grid.dim()).map(|j| d1(c, grid, j)).collect())
        .collect()
}

/// The `a delta` forcing of the psi system, `g grad div v + grad g div v` or
/// `grad(g div v)`.
pub fn psi_forcing(v: &VectorField, g: &ScalarField, grid: &Grid, grouping: PsiGrouping) -> VectorField {
    let dv = div(v, grid);
    match grouping {
        PsiGrouping::Grouped => {
            let gd = g.zip_map(&dv, |a, b| a * b);
            VectorField((0..grid.dim()).map(|j| d1(&gd, grid, j)).collect())
        }
        PsiGrouping::Split => VectorField(
            (0..grid.dim())
                .map(|j| {
                    let gdd = d1(&dv, grid, j);
                    let dg = d1(g, grid, j);
                    (0..grid.len()).map(|p| g[p] * gdd[p] + dg[p] * dv[p]).collect()
                })
                .collect(),
        ),
    }
}

/// `psi_t + v . grad psi + (grad v)^T psi + a delta (g grad div v + grad g div v) = 0`.
#[allow(clippy::too_many_arguments)]
pub fn advance_psi(
    psi: &VectorField,
    v: &VectorField,
    g: &ScalarField,
    dt: f64,
    a: f64,
    delta: f64,
    grid: &Grid,
    scheme: &TransportScheme,
) -> Result<VectorField> {
    psi.check_shape(grid, "psi")?;
    g.check_len(grid, "g")?;
    let jac = jacobian_rows(v, grid);
    let forcing = psi_forcing(v, g, grid, scheme.psi_grouping).scaled(a * delta);
    let src = |s: &[ScalarField]| -> Vec<ScalarField> {
        grad_v_transpose(&jac, s)
            .into_iter()
            .zip(forcing.iter())
            .map(|(b, f)| b.zip_map(f, |x, y| -x - y))
            .collect()
    };
    let out = VectorField(advance_system(psi, v, &src, dt, grid, scheme)?);
    out.check_finite("psi")?;
    Ok(out)
}

/// The f system with coefficient `g` (the frozen h) and the current varphi:
/// `f_t + v . grad f + (grad v)^T f + a delta g varphi grad div v
///  = -a delta varphi grad g div v + (delta - 1) g varphi f div v`.
#[allow(clippy::too_many_arguments)]
pub fn advance_f(
    f: &VectorField,
    v: &VectorField,
    g: &ScalarField,
    varphi: &ScalarField,
    dt: f64,
    a: f64,
    delta: f64,
    grid: &Grid,
    scheme: &TransportScheme,
) -> Result<VectorField> {
    f.check_shape(grid, "f")?;
    g.check_len(grid, "g")?;
    varphi.check_len(grid, "varphi")?;
    let jac = jacobian_rows(v, grid);
    let dv = div(v, grid);
    let ad = a * delta;
    let forcing: Vec<ScalarField> = (0..grid.dim())
        .map(|j| {
            let gdd = d1(&dv, grid, j);
            let dg = d1(g, grid, j);
            (0..grid.len())
                .map(|p| -ad * varphi[p] * (g[p] * gdd[p] + dg[p] * dv[p]))
                .collect()
        })
        .collect();
    let damp = ScalarField::from_iter((0..grid.len()).map(|p| (delta - 1.0) * g[p] * varphi[p] * dv[p]));
    let src = |s: &[ScalarField]| -> Vec<ScalarField> {
        grad_v_transpose(&jac, s)
            .into_iter()
            .enumerate()
            .map(|(j, b)| {
                ScalarField::from_iter((0..grid.len()).map(|p| forcing[j][p] - b[p] + damp[p] * s[j][p]))
            })
            .collect()
    };
    let out = VectorField(advance_system(f, v, &src, dt, grid, scheme)?);
    out.check_finite("f")?;
    Ok(out)
}
