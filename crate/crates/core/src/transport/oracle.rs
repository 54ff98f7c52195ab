//! Exact transport solutions along characteristics.
//!
//! Each sample point is traced backward to its origin with adaptive RK4,
//! carrying `int div v` and `int g div v` along the path. The field value then
//! follows from the exponential (phi), linear (h) or rational (varphi)
//! representation.

use crate::error::{Error, Result};
use crate::grid::Grid;

type VelocityFn<'a> = dyn Fn(f64, [f64; 3]) -> [f64; 3] + Sync + 'a;
type ScalarFn<'a> = dyn Fn(f64, [f64; 3]) -> f64 + Sync + 'a;

/// Closed-form velocity `v(t, x)`, its divergence and the coefficient `g`.
pub struct PathVelocity<'a> {
    pub v: &'a VelocityFn<'a>,
    pub div: &'a ScalarFn<'a>,
    /// Defaults to `g = 1`.
    pub g: Option<&'a ScalarFn<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleField {
    /// Pure advection.
    Advected,
    Phi { gamma: f64 },
    H { delta: f64 },
    Varphi { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSample {
    pub value: f64,
    pub origin: [f64; 3],
    /// The backward path crossed the far-field box; the value is taken from
    /// the closed-form initial profile at the origin.
    pub left_domain: bool,
}

const TOL: f64 = 1e-10;

/// State `(Y, int div v, int g div v)` of the backward path ODE.
type PathState = [f64; 5];

fn rhs(pv: &PathVelocity<'_>, t_end: f64, s: f64, y: &PathState) -> PathState {
    let time = t_end - s;
    let x = [y[0], y[1], y[2]];
    let v = (pv.v)(time, x);
    let d = (pv.div)(time, x);
    let g = pv.g.map_or(1.0, |g| g(time, x));
    [-v[0], -v[1], -v[2], d, g * d]
}

fn rk4(pv: &PathVelocity<'_>, t_end: f64, s: f64, y: &PathState, h: f64) -> PathState {
    let add = |a: &PathState, b: &PathState, c: f64| -> PathState {
        let mut o = *a;
        for i in 0..5 {
            o[i] += c * b[i];
        }
        o
    };
    let k1 = rhs(pv, t_end, s, y);
    let k2 = rhs(pv, t_end, s + 0.5 * h, &add(y, &k1, 0.5 * h));
    let k3 = rhs(pv, t_end, s + 0.5 * h, &add(y, &k2, 0.5 * h));
    let k4 = rhs(pv, t_end, s + h, &add(y, &k3, h));
    let mut o = *y;
    for i in 0..5 {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

fn inside(grid: Option<&Grid>, y: &PathState) -> bool {
    let Some(grid) = grid else { return true };
    if grid.is_periodic() {
        return true;
    }
    grid.axes()
        .iter()
        .enumerate()
        .all(|(k, ax)| y[k] >= ax.lo && y[k] <= ax.lo + ax.length)
}

/// Traces `x` backward over `[0, t]` with step doubling.
fn trace(pv: &PathVelocity<'_>, t: f64, x: [f64; 3], grid: Option<&Grid>) -> Result<(PathState, bool)> {
    let mut y: PathState = [x[0], x[1], x[2], 0.0, 0.0];
    let mut s = 0.0;
    let mut h = (t / 16.0).max(1e-6);
    let mut left = !inside(grid, &y);
    let mut steps = 0usize;
    while s < t {
        h = h.min(t - s);
        let full = rk4(pv, t, s, &y, h);
        let half = rk4(pv, t, s, &y, 0.5 * h);
        let two = rk4(pv, t, s + 0.5 * h, &half, 0.5 * h);
        let scale = two.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let err = full
            .iter()
            .zip(&two)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / 15.0;
        if !err.is_finite() {
            return Err(Error::InvalidInput("characteristic path blew up".into()));
        }
        if err <= TOL * scale {
            s += h;
            // Richardson-extrapolated accept
            for i in 0..5 {
                y[i] = two[i] + (two[i] - full[i]) / 15.0;
            }
            left |= !inside(grid, &y);
            let grow = if err == 0.0 { 2.0 } else { (0.9 * (TOL * scale / err).powf(0.2)).min(2.0) };
            h *= grow;
        } else {
            h *= (0.9 * (TOL * scale / err).powf(0.2)).max(0.1);
        }
        steps += 1;
        if steps > 1_000_000 || h < 1e-14 * t.max(1.0) {
            return Err(Error::InvalidInput("characteristic integration did not reach tolerance".into()));
        }
    }
    Ok((y, left))
}

/// Exact values at time `t` of the field with initial data `init`, at the
/// given sample points. `grid` (optional) only serves to flag paths that
/// leave a far-field box.
pub fn characteristic_oracle(
    init: &(dyn Fn([f64; 3]) -> f64 + Sync),
    field: OracleField,
    velocity: &PathVelocity<'_>,
    t: f64,
    points: &[[f64; 3]],
    grid: Option<&Grid>,
) -> Result<Vec<OracleSample>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("oracle time must be nonnegative (got {t})")));
    }
    points
        .iter()
        .map(|&x| {
            let (y, left_domain) = if t == 0.0 {
                ([x[0], x[1], x[2], 0.0, 0.0], false)
            } else {
                trace(velocity, t, x, grid)?
            };
            let origin = [y[0], y[1], y[2]];
            let w0 = init(origin);
            let value = match field {
                OracleField::Advected => w0,
                OracleField::Phi { gamma } => w0 * (-(gamma - 1.0) * y[3]).exp(),
                OracleField::H { delta } => w0 - (delta - 1.0) * y[4],
                OracleField::Varphi { delta } => w0 / (1.0 + (1.0 - delta) * w0 * y[4]),
            };
            Ok(OracleSample {
                value,
                origin,
                left_domain,
            })
        })
        .collect()
}
