//! Nodal fields and the two state representations.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField(pub Vec<f64>);

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FromIterator<f64> for ScalarField {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl ScalarField {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn constant(len: usize, c: f64) -> Self {
        Self(vec![c; len])
    }

    pub fn from_fn<F: Fn([f64; 3]) -> f64>(grid: &Grid, f: F) -> Self {
        Self(grid.sample(f))
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        self.iter().map(|&x| f(x)).collect()
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Self {
        self.iter().zip(other.iter()).map(|(&a, &b)| f(a, b)).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// `(1 - w) self + w other`.
    pub fn lerp(&self, other: &Self, w: f64) -> Self {
        self.zip_map(other, |a, b| (1.0 - w) * a + w * b)
    }

    pub fn min(&self) -> f64 {
        self.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn check_len(&self, grid: &Grid, name: &str) -> Result<()> {
        if self.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{name}: {} values for a grid of {} nodes",
                self.len(),
                grid.len()
            )));
        }
        Ok(())
    }

    pub fn check_positive(&self, field: &'static str) -> Result<()> {
        for (node, &value) in self.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { field, node });
            }
            if value <= 0.0 {
                return Err(Error::NonPositive { field, node, value });
            }
        }
        Ok(())
    }

    pub fn check_finite(&self, field: &'static str) -> Result<()> {
        match self.iter().position(|x| !x.is_finite()) {
            Some(node) => Err(Error::NonFinite { field, node }),
            None => Ok(()),
        }
    }
}

/// Vector field stored component by component.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorField(pub Vec<ScalarField>);

impl Deref for VectorField {
    type Target = [ScalarField];
    fn deref(&self) -> &[ScalarField] {
        &self.0
    }
}

impl DerefMut for VectorField {
    fn deref_mut(&mut self) -> &mut [ScalarField] {
        &mut self.0
    }
}

impl VectorField {
    pub fn zeros(dim: usize, len: usize) -> Self {
        Self((0..dim).map(|_| ScalarField::zeros(len)).collect())
    }

    pub fn from_fn<F: Fn([f64; 3]) -> [f64; 3]>(grid: &Grid, f: F) -> Self {
        let vals: Vec<[f64; 3]> = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self(
            (0..grid.dim())
                .map(|c| vals.iter().map(|v| v[c]).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn nodes(&self) -> usize {
        self.0.first().map_or(0, |c| c.len())
    }

    pub fn map_components<F: Fn(&ScalarField) -> ScalarField>(&self, f: F) -> Self {
        Self(self.iter().map(f).collect())
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64 + Copy>(&self, other: &Self, f: F) -> Self {
        Self(
            self.iter()
                .zip(other.iter())
                .map(|(a, b)| a.zip_map(b, f))
                .collect(),
        )
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map_components(|x| x.scaled(c))
    }

    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn lerp(&self, other: &Self, w: f64) -> Self {
        self.zip_map(other, |a, b| (1.0 - w) * a + w * b)
    }

    /// Componentwise product with a scalar field.
    pub fn weighted(&self, w: &ScalarField) -> Self {
        self.map_components(|c| c.zip_map(w, |a, b| a * b))
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        (0..self.nodes())
            .map(|i| self.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .collect()
    }

    pub fn check_shape(&self, grid: &Grid, name: &str) -> Result<()> {
        if self.dim() != grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{name}: {} components on a {}-D grid",
                self.dim(),
                grid.dim()
            )));
        }
        for c in self.iter() {
            c.check_len(grid, name)?;
        }
        Ok(())
    }

    pub fn check_finite(&self, field: &'static str) -> Result<()> {
        for c in self.iter() {
            c.check_finite(field)?;
        }
        Ok(())
    }
}

/// Rank-2 tensor field, components in row-major `(i, j)` order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorField {
    dim: usize,
    comps: Vec<ScalarField>,
}

impl TensorField {
    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            dim,
            comps: (0..dim * dim).map(|_| ScalarField::zeros(len)).collect(),
        }
    }

    pub fn from_components(dim: usize, comps: Vec<ScalarField>) -> Self {
        assert_eq!(comps.len(), dim * dim);
        Self { dim, comps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[i * self.dim + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut ScalarField {
        &mut self.comps[i * self.dim + j]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    /// Pointwise Frobenius magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let n = self.comps.first().map_or(0, |c| c.len());
        (0..n)
            .map(|p| self.comps.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
            .collect()
    }

    /// Row-vector contraction `(w . T)_j = sum_i w_i T_ij`.
    pub fn left_contract(&self, w: &VectorField) -> VectorField {
        let n = w.nodes();
        VectorField(
            (0..self.dim)
                .map(|j| {
                    (0..n)
                        .map(|p| (0..self.dim).map(|i| w[i][p] * self.get(i, j)[p]).sum())
                        .collect()
                })
                .collect(),
        )
    }
}

/// Density and velocity at one time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveState {
    pub rho: ScalarField,
    pub u: VectorField,
    pub t: f64,
}

impl PrimitiveState {
    pub fn new(rho: ScalarField, u: VectorField, t: f64) -> Self {
        Self { rho, u, t }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.rho.check_len(grid, "rho")?;
        self.u.check_shape(grid, "u")?;
        self.rho.check_positive("rho")?;
        self.u.check_finite("u")
    }
}

/// Reformulated unknowns. `psi` and `f` are the tracks evolved by their own
/// transport equations; their closed-form counterparts are recomputed from
/// `h` and `phi` by [`crate::reform`] when needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReformState {
    pub phi: ScalarField,
    pub u: VectorField,
    pub psi: VectorField,
    pub h: ScalarField,
    pub varphi: ScalarField,
    pub f: VectorField,
    pub t: f64,
}

impl ReformState {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.phi.check_len(grid, "phi")?;
        self.h.check_len(grid, "h")?;
        self.varphi.check_len(grid, "varphi")?;
        self.u.check_shape(grid, "u")?;
        self.psi.check_shape(grid, "psi")?;
        self.f.check_shape(grid, "f")?;
        self.phi.check_positive("phi")?;
        self.h.check_positive("h")?;
        self.varphi.check_positive("varphi")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_contract_matches_manual_sum() {
        let t = TensorField::from_components(
            2,
            vec![
                ScalarField(vec![1.0]),
                ScalarField(vec![2.0]),
                ScalarField(vec![3.0]),
                ScalarField(vec![4.0]),
            ],
        );
        let w = VectorField(vec![ScalarField(vec![1.0]), ScalarField(vec![-1.0])]);
        let r = t.left_contract(&w);
        assert_eq!(r[0][0], 1.0 - 3.0);
        assert_eq!(r[1][0], 2.0 - 4.0);
    }

    #[test]
    fn positivity_check_names_node() {
        let f = ScalarField(vec![1.0, 0.0, 2.0]);
        match f.check_positive("rho") {
            Err(Error::NonPositive { node, .. }) => assert_eq!(node, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
