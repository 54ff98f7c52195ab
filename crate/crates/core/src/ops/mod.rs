//! Finite-difference operators on [`Grid`]s.
//!
//! Interior nodes use second-order central differences. On far-field boxes
//! the end nodes of every grid line use one-sided closures equivalent to a
//! quadratically extrapolated ghost value: second order for first
//! derivatives, first order for second derivatives.

mod elliptic;
mod norm;

pub use elliptic::{lame_solve, ImplicitLame, LameSolve};
pub use norm::{derivative_magnitude, norm, FieldRef, NormSpec};

use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::Grid;
use crate::params::Params;

/// Lamé coefficients `(alpha, beta)` of `L u = -alpha Lap u - (alpha+beta) grad div u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lame {
    pub alpha: f64,
    pub beta: f64,
}

impl Lame {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    /// Plain negative Laplacian (`alpha = 1`, `beta = -1`).
    pub fn neg_laplacian() -> Self {
        Self::new(1.0, -1.0)
    }
}

impl From<&Params> for Lame {
    fn from(p: &Params) -> Self {
        Self::new(p.alpha, p.beta)
    }
}

/// Calls `body(start)` for the first node of every line along axis `k`.
pub(crate) fn for_each_line(grid: &Grid, k: usize, mut body: impl FnMut(usize)) {
    let n = grid.axis(k).n;
    let s = grid.stride(k);
    let block = n * s;
    for b in 0..grid.len() / block {
        for r in 0..s {
            body(b * block + r);
        }
    }
}

/// Central first derivative along axis `k`.
pub fn d1(f: &[f64], grid: &Grid, k: usize) -> ScalarField {
    let n = grid.axis(k).n;
    let s = grid.stride(k);
    let inv = 0.5 / grid.dx(k);
    let periodic = grid.is_periodic();
    let mut out = vec![0.0; f.len()];
    for_each_line(grid, k, |start| {
        let at = |i: usize| f[start + i * s];
        for i in 1..n - 1 {
            out[start + i * s] = (at(i + 1) - at(i - 1)) * inv;
        }
        if periodic {
            out[start] = (at(1) - at(n - 1)) * inv;
            out[start + (n - 1) * s] = (at(0) - at(n - 2)) * inv;
        } else {
            out[start] = (4.0 * (at(1) - at(0)) - (at(2) - at(0))) * inv;
            out[start + (n - 1) * s] = (4.0 * (at(n - 1) - at(n - 2)) - (at(n - 1) - at(n - 3))) * inv;
        }
    });
    ScalarField(out)
}

/// Compact three-point second derivative along axis `k`.
pub fn d2(f: &[f64], grid: &Grid, k: usize) -> ScalarField {
    let n = grid.axis(k).n;
    let s = grid.stride(k);
    let h = grid.dx(k);
    let inv = 1.0 / (h * h);
    let periodic = grid.is_periodic();
    let mut out = vec![0.0; f.len()];
    for_each_line(grid, k, |start| {
        let at = |i: usize| f[start + i * s];
        for i in 1..n - 1 {
            out[start + i * s] = (at(i + 1) - 2.0 * at(i) + at(i - 1)) * inv;
        }
        if periodic {
            out[start] = (at(1) - 2.0 * at(0) + at(n - 1)) * inv;
            out[start + (n - 1) * s] = (at(0) - 2.0 * at(n - 1) + at(n - 2)) * inv;
        } else {
            out[start] = (at(0) - 2.0 * at(1) + at(2)) * inv;
            out[start + (n - 1) * s] = (at(n - 1) - 2.0 * at(n - 2) + at(n - 3)) * inv;
        }
    });
    ScalarField(out)
}

pub fn grad(f: &[f64], grid: &Grid) -> VectorField {
    VectorField((0..grid.dim()).map(|k| d1(f, grid, k)).collect())
}

pub fn div(u: &VectorField, grid: &Grid) -> ScalarField {
    let mut out = ScalarField::zeros(grid.len());
    for (k, c) in u.iter().enumerate() {
        for (o, d) in out.iter_mut().zip(d1(c, grid, k).iter()) {
            *o += d;
        }
    }
    out
}

pub fn laplacian(f: &[f64], grid: &Grid) -> ScalarField {
    let mut out = ScalarField::zeros(grid.len());
    for k in 0..grid.dim() {
        for (o, d) in out.iter_mut().zip(d2(f, grid, k).iter()) {
            *o += d;
        }
    }
    out
}

/// Velocity gradient with entries `(i, j) = d_j u_i`.
pub fn jacobian(u: &VectorField, grid: &Grid) -> TensorField {
    let dim = grid.dim();
    let mut comps = Vec::with_capacity(dim * dim);
    for c in u.iter() {
        for j in 0..dim {
            comps.push(d1(c, grid, j));
        }
    }
    TensorField::from_components(dim, comps)
}

/// Vorticity: one component in 1-D (identically zero) and 2-D, three in 3-D.
pub fn curl(u: &VectorField, grid: &Grid) -> VectorField {
    let n = grid.len();
    match grid.dim() {
        1 => VectorField(vec![ScalarField::zeros(n)]),
        2 => {
            let a = d1(&u[1], grid, 0);
            let b = d1(&u[0], grid, 1);
            VectorField(vec![a.zip_map(&b, |x, y| x - y)])
        }
        _ => {
            let j = jacobian(u, grid);
            let c = |a: usize, b: usize, p: usize, q: usize| j.get(a, b).zip_map(j.get(p, q), |x, y| x - y);
            VectorField(vec![c(2, 1, 1, 2), c(0, 2, 2, 0), c(1, 0, 0, 1)])
        }
    }
}

/// Antisymmetric part `d_i w_j - d_j w_i` for every pair `i < j`, flattened.
pub fn curl_residual(w: &VectorField, grid: &Grid) -> Vec<ScalarField> {
    let dim = grid.dim();
    let mut out = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            let a = d1(&w[j], grid, i);
            let b = d1(&w[i], grid, j);
            out.push(a.zip_map(&b, |x, y| x - y));
        }
    }
    out
}

/// `(u . grad) w` with central differences, for every component of `w`.
pub fn convective(u: &VectorField, w: &VectorField, grid: &Grid) -> VectorField {
    w.map_components(|c| {
        let mut out = ScalarField::zeros(grid.len());
        for k in 0..grid.dim() {
            let d = d1(c, grid, k);
            for ((o, dk), uk) in out.iter_mut().zip(d.iter()).zip(u[k].iter()) {
                *o += uk * dk;
            }
        }
        out
    })
}

/// `L u = -alpha Lap u - (alpha + beta) grad div u`.
///
/// Diagonal blocks of `grad div` use the compact second difference and
/// off-diagonal blocks the product of central first differences, which makes
/// the periodic operator symmetric positive semidefinite.
pub fn lame_apply(u: &VectorField, lame: Lame, grid: &Grid) -> VectorField {
    let dim = grid.dim();
    let ab = lame.alpha + lame.beta;
    // d_k u_k, reused by every off-diagonal block
    let first: Vec<ScalarField> = if dim > 1 {
        u.iter().enumerate().map(|(k, c)| d1(c, grid, k)).collect()
    } else {
        Vec::new()
    };
    VectorField(
        (0..dim)
            .map(|i| {
                let mut out = ScalarField::zeros(grid.len());
                for k in 0..dim {
                    let coef = if k == i { lame.alpha + ab } else { lame.alpha };
                    for (o, d) in out.iter_mut().zip(d2(&u[i], grid, k).iter()) {
                        *o -= coef * d;
                    }
                }
                for k in (0..dim).filter(|&k| k != i) {
                    // d_i d_k u_k
                    let cross = d1(&first[k], grid, i);
                    for (o, d) in out.iter_mut().zip(cross.iter()) {
                        *o -= ab * d;
                    }
                }
                out
            })
            .collect(),
    )
}

/// Diagonal of the discrete Lamé operator for component `i`.
pub fn lame_diagonal(lame: Lame, grid: &Grid, i: usize) -> f64 {
    (0..grid.dim())
        .map(|k| {
            let coef = if k == i { 2.0 * lame.alpha + lame.beta } else { lame.alpha };
            2.0 * coef / (grid.dx(k) * grid.dx(k))
        })
        .sum()
}

/// `Q(u) = alpha (grad u + grad u^T) + beta div u I`.
pub fn q_apply(u: &VectorField, lame: Lame, grid: &Grid) -> TensorField {
    let dim = grid.dim();
    let j = jacobian(u, grid);
    let divu = div(u, grid);
    let mut q = TensorField::zeros(dim, grid.len());
    for a in 0..dim {
        for b in 0..dim {
            let sym = j.get(a, b).zip_map(j.get(b, a), |x, y| lame.alpha * (x + y));
            *q.get_mut(a, b) = if a == b {
                sym.zip_map(&divu, |s, d| s + lame.beta * d)
            } else {
                sym
            };
        }
    }
    q
}

/// Discrete L2 inner product of two vector fields.
pub fn inner(a: &VectorField, b: &VectorField, grid: &Grid) -> f64 {
    let dv = grid.cell_volume();
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| p * q).sum::<f64>())
        .sum::<f64>()
        * dv
}

/// Discrete integral of a scalar field (midpoint rule).
pub fn integrate(f: &[f64], grid: &Grid) -> f64 {
    f.iter().sum::<f64>() * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Boundary};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn l2(f: &[f64], grid: &Grid) -> f64 {
        (f.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()).sqrt()
    }

    fn periodic_2d(n: usize) -> Grid {
        Grid::uniform(2, n, 0.0, 1.0, Boundary::Periodic).unwrap()
    }

    #[test]
    fn gradient_of_sine_is_second_order() {
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let g = Grid::periodic_1d(n, 1.0).unwrap();
            let f = g.sample(|x| (2.0 * PI * x[0]).sin());
            let d = d1(&f, &g, 0);
            let exact = g.sample(|x| 2.0 * PI * (2.0 * PI * x[0]).cos());
            let e: Vec<f64> = d.iter().zip(&exact).map(|(a, b)| a - b).collect();
            errs.push(l2(&e, &g));
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "order {order}");
        }
    }

    #[test]
    fn divergence_of_constant_is_zero() {
        let g = Grid::far_field(2, 8, 1.0).unwrap();
        let u = VectorField::from_fn(&g, |_| [0.3, -1.7, 0.0]);
        assert!(div(&u, &g).max_abs() == 0.0);
    }

    #[test]
    fn laplacian_of_quadratic_on_far_field() {
        // The one-sided closure is exact for quadratics; the boundary error
        // of the closure on general data is first order (checked on x^3).
        let mut boundary_err = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid::uniform(1, n, 0.0, 1.0, Boundary::FarField).unwrap();
            let f = g.sample(|x| x[0] * x[0]);
            let lap = laplacian(&f, &g);
            assert!(lap.iter().all(|v| (v - 2.0).abs() < 1e-8));
            let c = g.sample(|x| x[0].powi(3));
            let lap = laplacian(&c, &g);
            boundary_err.push((lap[0] - 6.0 * g.coords(0)[0]).abs());
        }
        for w in boundary_err.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 1.0).abs() < 0.1, "order {order}");
        }
    }

    #[test]
    fn lame_on_sine_1d() {
        let g = Grid::periodic_1d(256, 1.0).unwrap();
        let u = VectorField::from_fn(&g, |x| [(2.0 * PI * x[0]).sin(), 0.0, 0.0]);
        let lu = lame_apply(&u, Lame::new(1.0, 0.0), &g);
        let k2 = 2.0 * (2.0 * PI).powi(2);
        assert!((k2 - 78.9568).abs() < 1e-4);
        for (i, v) in lu[0].iter().enumerate() {
            let exact = k2 * (2.0 * PI * g.coords(i)[0]).sin();
            assert!((v - exact).abs() < 0.01, "{v} vs {exact}");
        }
        let c = VectorField::from_fn(&g, |_| [2.5, 0.0, 0.0]);
        assert!(lame_apply(&c, Lame::new(1.0, 0.0), &g)[0].max_abs() == 0.0);
    }

    #[test]
    fn lame_on_divergence_free_field_reduces_to_laplacian() {
        // Stream function s = sin(2 pi x) sin(2 pi y): u = (d_y s, -d_x s).
        let lame = Lame::new(1.0, 0.5);
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = periodic_2d(n);
            let w = 2.0 * PI;
            let u = VectorField::from_fn(&g, |x| {
                [
                    w * (w * x[0]).sin() * (w * x[1]).cos(),
                    -w * (w * x[0]).cos() * (w * x[1]).sin(),
                    0.0,
                ]
            });
            let lu = lame_apply(&u, lame, &g);
            // -alpha Lap u = alpha 2 w^2 u
            let e: Vec<f64> = lu[0]
                .iter()
                .zip(u[0].iter())
                .map(|(a, b)| a - lame.alpha * 2.0 * w * w * b)
                .collect();
            errs.push(l2(&e, &g) / l2(&u[0], &g));
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "order {order}");
        }
    }

    #[test]
    fn q_examples() {
        let g = Grid::uniform(1, 8, 0.0, 1.0, Boundary::FarField).unwrap();
        let u = VectorField::from_fn(&g, |x| [3.0 * x[0], 0.0, 0.0]);
        let q = q_apply(&u, Lame::new(1.0, 0.5), &g);
        assert!(q.get(0, 0).iter().all(|v| (v - 7.5).abs() < 1e-12));

        let g = Grid::far_field(2, 8, 1.0).unwrap();
        let rot = VectorField::from_fn(&g, |x| [-x[1], x[0], 0.0]);
        let q = q_apply(&rot, Lame::new(1.0, 0.3), &g);
        assert!(q.magnitude().max_abs() < 1e-12);

        let lame = Lame::new(0.7, 0.2);
        let id = VectorField::from_fn(&g, |x| [x[0], x[1], 0.0]);
        let q = q_apply(&id, lame, &g);
        let diag = 2.0 * lame.alpha + 2.0 * lame.beta;
        assert!(q.get(0, 0).iter().all(|v| (v - diag).abs() < 1e-12));
        assert!(q.get(1, 1).iter().all(|v| (v - diag).abs() < 1e-12));
        assert!(q.get(0, 1).max_abs() < 1e-12);
    }

    #[test]
    fn curl_of_rigid_rotation_is_two() {
        let g = Grid::far_field(2, 8, 1.0).unwrap();
        let rot = VectorField::from_fn(&g, |x| [-x[1], x[0], 0.0]);
        assert!(curl(&rot, &g)[0].iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    fn random_field(g: &Grid, seed: u64) -> VectorField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        VectorField(
            (0..g.dim())
                .map(|_| (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
        )
    }

    fn mixed_grid() -> Grid {
        Grid::new(
            vec![
                Axis { lo: 0.0, length: 1.0, n: 6 },
                Axis { lo: 0.0, length: 2.0, n: 7 },
                Axis { lo: 0.0, length: 1.5, n: 5 },
            ],
            Boundary::Periodic,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn lame_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = mixed_grid();
            let lame = Lame::new(1.0, -0.4);
            let u = random_field(&g, seed);
            let v = random_field(&g, seed + 1);
            let comb = u.scaled(a).axpy(b, &v);
            let lhs = lame_apply(&comb, lame, &g);
            let rhs = lame_apply(&u, lame, &g).scaled(a).axpy(b, &lame_apply(&v, lame, &g));
            let scale = lhs.iter().map(|c| c.max_abs()).fold(1.0, f64::max);
            for (x, y) in lhs.iter().zip(rhs.iter()) {
                for (p, q) in x.iter().zip(y.iter()) {
                    prop_assert!((p - q).abs() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn lame_is_symmetric_and_coercive(seed in 0u64..1000) {
            let g = mixed_grid();
            let lame = Lame::new(1.0, -0.6);
            let u = random_field(&g, seed);
            let v = random_field(&g, seed + 7);
            let luv = inner(&lame_apply(&u, lame, &g), &v, &g);
            let ulv = inner(&u, &lame_apply(&v, lame, &g), &g);
            prop_assert!((luv - ulv).abs() <= 1e-10 * luv.abs().max(1.0));
            // <Lu,u> >= alpha |grad_c u|^2 for the central gradient.
            let luu = inner(&lame_apply(&u, lame, &g), &u, &g);
            let grad2: f64 = u.iter().map(|c| {
                let gr = grad(c, &g);
                inner(&gr, &gr, &g)
            }).sum();
            prop_assert!(luu >= lame.alpha * grad2 - 1e-9 * luu.abs());
        }
    }
}
