//! Semi-Lagrangian step: midpoint departure points, tensor cubic Lagrange
//! interpolation, Heun half steps of the source on either side.

use super::Source;
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Stencil indices and weights along one axis for coordinate `x`.
fn axis_stencil(grid: &Grid, k: usize, x: f64) -> [(usize, f64); 4] {
    let ax = grid.axis(k);
    let n = ax.n as isize;
    let mut s = (x - ax.lo) / ax.dx() - 0.5;
    if !grid.is_periodic() {
        s = s.clamp(0.0, (n - 1) as f64);
    }
    let mut i0 = s.floor();
    if !grid.is_periodic() {
        // keep the stencil inside the box
        i0 = i0.clamp(1.0, (n - 3).max(1) as f64);
    }
    let w = cubic_weights(s - i0);
    let i0 = i0 as isize;
    let mut out = [(0, 0.0); 4];
    for (m, slot) in out.iter_mut().enumerate() {
        let i = i0 - 1 + m as isize;
        let i = if grid.is_periodic() { i.rem_euclid(n) } else { i.clamp(0, n - 1) };
        *slot = (i as usize * grid.stride(k), w[m]);
    }
    out
}

/// Interpolates every field in `fs` at the point `x`.
pub(crate) fn interpolate(fs: &[&[f64]], grid: &Grid, x: [f64; 3]) -> Vec<f64> {
    let d = grid.dim();
    let st: Vec<[(usize, f64); 4]> = (0..d).map(|k| axis_stencil(grid, k, x[k])).collect();
    let mut out = vec![0.0; fs.len()];
    let count = 4usize.pow(d as u32);
    for c in 0..count {
        let mut off = 0;
        let mut w = 1.0;
        let mut r = c;
        for s in &st {
            let (o, wk) = s[r % 4];
            off += o;
            w *= wk;
            r /= 4;
        }
        for (slot, f) in out.iter_mut().zip(fs) {
            *slot += w * f[off];
        }
    }
    out
}

pub(super) fn advance(
    w: &[ScalarField],
    v: &VectorField,
    source: &Source<'_>,
    dt: f64,
    grid: &Grid,
) -> Vec<ScalarField> {
    let d = grid.dim();
    let half = heun(w, source, 0.5 * dt);
    let vs: Vec<&[f64]> = v.iter().map(|c| &c[..]).collect();
    let hs: Vec<&[f64]> = half.iter().map(|c| &c[..]).collect();
    let mut moved: Vec<ScalarField> = (0..w.len()).map(|_| ScalarField::zeros(grid.len())).collect();
    for p in 0..grid.len() {
        let x = grid.coords(p);
        let mut mid = x;
        for k in 0..d {
            mid[k] -= 0.5 * dt * v[k][p];
        }
        let vm = interpolate(&vs, grid, mid);
        let mut dep = x;
        for k in 0..d {
            dep[k] -= dt * vm[k];
        }
        for (c, val) in interpolate(&hs, grid, dep).into_iter().enumerate() {
            moved[c][p] = val;
        }
    }
    heun(&moved, source, 0.5 * dt)
}

fn heun(w: &[ScalarField], source: &Source<'_>, h: f64) -> Vec<ScalarField> {
    let s0 = source(w);
    let w1: Vec<ScalarField> = w.iter().zip(&s0).map(|(c, s)| c.axpy(h, s)).collect();
    let s1 = source(&w1);
    w.iter()
        .zip(s0.iter().zip(&s1))
        .map(|(c, (a, b))| c.zip_map(&a.zip_map(b, |x, y| x + y), |c, s| c + 0.5 * h * s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_exact_for_cubics() {
        let g = Grid::periodic_1d(16, 1.0).unwrap();
        let far = Grid::far_field(1, 16, 1.0).unwrap();
        let f: Vec<f64> = far.sample(|x| 1.0 + x[0] - 2.0 * x[0].powi(3));
        let v = interpolate(&[&f], &far, [0.3137, 0.0, 0.0])[0];
        let x: f64 = 0.3137;
        assert!((v - (1.0 + x - 2.0 * x.powi(3))).abs() < 1e-13);
        let s: Vec<f64> = g.sample(|x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let v = interpolate(&[&s], &g, [0.98, 0.0, 0.0])[0];
        assert!((v - (2.0 * std::f64::consts::PI * 0.98).sin()).abs() < 1e-3);
    }
}
