//! Implicit Lamé systems `(W I + kappa L) u = b` solved by conjugate gradients.
//!
//! On far-field boxes the boundary nodes carry identity rows and are zeroed
//! before the stencil is applied, so `u = 0` is imposed there and the
//! interior block stays symmetric positive definite.

use super::{lame_apply, lame_diagonal, Lame};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::krylov::{pcg, KrylovConfig, KrylovReport};

/// Operator `u -> W u + kappa L u` with a nodal weight shared by all components.
#[derive(Debug, Clone)]
pub struct ImplicitLame<'a> {
    pub grid: &'a Grid,
    pub lame: Lame,
    pub weight: Option<&'a ScalarField>,
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct LameSolve {
    pub u: VectorField,
    pub report: KrylovReport,
}

impl<'a> ImplicitLame<'a> {
    fn boundary_mask(&self) -> Vec<bool> {
        (0..self.grid.len()).map(|p| self.grid.is_boundary_node(p)).collect()
    }

    fn unflatten(&self, x: &[f64]) -> VectorField {
        let n = self.grid.len();
        VectorField(x.chunks(n).map(|c| ScalarField(c.to_vec())).collect())
    }

    /// Jacobi diagonal, flattened component-major.
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut d = Vec::with_capacity(n * self.grid.dim());
        for i in 0..self.grid.dim() {
            let l = self.kappa * lame_diagonal(self.lame, self.grid, i);
            for p in 0..n {
                d.push(self.weight.map_or(0.0, |w| w[p]) + l);
            }
        }
        d
    }

    /// Applies the operator to a flat component-major vector.
    pub fn apply_flat(&self, x: &[f64], y: &mut [f64]) {
        let n = self.grid.len();
        let mask = self.boundary_mask();
        let mut xin = x.to_vec();
        for c in xin.chunks_mut(n) {
            for (v, &m) in c.iter_mut().zip(&mask) {
                if m {
                    *v = 0.0;
                }
            }
        }
        let lu = lame_apply(&self.unflatten(&xin), self.lame, self.grid);
        let diag = self.diagonal();
        for (c, comp) in lu.iter().enumerate() {
            for p in 0..n {
                let idx = c * n + p;
                y[idx] = if mask[p] {
                    diag[idx] * x[idx]
                } else {
                    self.weight.map_or(0.0, |w| w[p]) * x[idx] + self.kappa * comp[p]
                };
            }
        }
    }

    pub fn apply(&self, u: &VectorField) -> VectorField {
        let flat: Vec<f64> = u.iter().flat_map(|c| c.iter().copied()).collect();
        let mut out = vec![0.0; flat.len()];
        self.apply_flat(&flat, &mut out);
        self.unflatten(&out)
    }

    /// Solves the system. Boundary rows of `rhs` are ignored on far-field
    /// grids; the solution vanishes there. A singular periodic system
    /// (no weight) is solved on the zero-mean subspace.
    pub fn solve(
        &self,
        rhs: &VectorField,
        guess: Option<&VectorField>,
        cfg: &KrylovConfig,
    ) -> Result<LameSolve> {
        rhs.check_shape(self.grid, "rhs")?;
        let n = self.grid.len();
        let mask = self.boundary_mask();
        let mut b: Vec<f64> = rhs.iter().flat_map(|c| c.iter().copied()).collect();
        for c in b.chunks_mut(n) {
            for (v, &m) in c.iter_mut().zip(&mask) {
                if m {
                    *v = 0.0;
                }
            }
        }
        let x0: Option<Vec<f64>> = guess.map(|g| g.iter().flat_map(|c| c.iter().copied()).collect());
        let singular = self.grid.is_periodic()
            && self.weight.map_or(true, |w| w.iter().all(|&x| x == 0.0));
        let project = |v: &mut [f64]| {
            for c in v.chunks_mut(n) {
                let mean = c.iter().sum::<f64>() / n as f64;
                c.iter_mut().for_each(|x| *x -= mean);
            }
        };
        let diag = self.diagonal();
        let apply = |x: &[f64], y: &mut [f64]| self.apply_flat(x, y);
        let (x, report) = pcg(
            &apply,
            &b,
            x0.as_deref(),
            Some(&diag),
            if singular { Some(&project) } else { None },
            cfg,
        )?;
        Ok(LameSolve {
            u: self.unflatten(&x),
            report,
        })
    }
}

/// Solves `L u = Z`. Periodic data must have zero mean per component and the
/// zero-mean solution is returned; far-field boxes impose `u = 0` on the
/// boundary layer.
pub fn lame_solve(z: &VectorField, lame: Lame, grid: &Grid, cfg: &KrylovConfig) -> Result<LameSolve> {
    z.check_shape(grid, "Z")?;
    if grid.is_periodic() {
        for (c, comp) in z.iter().enumerate() {
            let mean = comp.iter().sum::<f64>() / comp.len() as f64;
            let scale = comp.max_abs().max(1.0);
            if mean.abs() > 1e-10 * scale {
                return Err(Error::InvalidInput(format!(
                    "periodic Lamé solve needs zero-mean data; component {c} has mean {mean:e}"
                )));
            }
        }
    }
    ImplicitLame {
        grid,
        lame,
        weight: None,
        kappa: 1.0,
    }
    .solve(z, None, cfg)
}
