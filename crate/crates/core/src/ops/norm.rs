//! Discrete Lebesgue and Sobolev-type norms.
//!
//! Derivatives of order `k` are built from repeated central first
//! differences; `|grad^k f|` is the Frobenius magnitude over all ordered
//! index tuples (and all components for vector or tensor fields).

use super::d1;
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub enum NormSpec {
    /// `|f|_p`, `p` in `[1, inf]`.
    Lp(f64),
    /// `|grad^k f|_r`.
    Dk { k: usize, r: f64 },
    /// `(sum_{j <= s} |grad^j f|_2^2)^(1/2)`.
    Hs(usize),
    /// `|weight f|_p`.
    Weighted { weight: ScalarField, p: f64 },
}

#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Scalar(&'a [f64]),
    Vector(&'a VectorField),
    Tensor(&'a TensorField),
}

impl<'a> From<&'a ScalarField> for FieldRef<'a> {
    fn from(f: &'a ScalarField) -> Self {
        FieldRef::Scalar(f)
    }
}

impl<'a> From<&'a VectorField> for FieldRef<'a> {
    fn from(f: &'a VectorField) -> Self {
        FieldRef::Vector(f)
    }
}

impl<'a> From<&'a TensorField> for FieldRef<'a> {
    fn from(f: &'a TensorField) -> Self {
        FieldRef::Tensor(f)
    }
}

impl<'a> FieldRef<'a> {
    fn components(&self) -> Vec<&'a [f64]> {
        match *self {
            FieldRef::Scalar(f) => vec![f],
            FieldRef::Vector(v) => v.iter().map(|c| &c[..]).collect(),
            FieldRef::Tensor(t) => t.components().iter().map(|c| &c[..]).collect(),
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("norm exponent must lie in [1, inf] (got {p})")))
    }
}

fn lp_of_magnitude(mag: &[f64], p: f64, grid: &Grid) -> f64 {
    if p.is_infinite() {
        return mag.iter().fold(0.0, |m, x| m.max(x.abs()));
    }
    let dv = grid.cell_volume();
    (mag.iter().map(|x| x.abs().powf(p)).sum::<f64>() * dv).powf(1.0 / p)
}

/// Pointwise `|grad^k f|`.
pub fn derivative_magnitude(field: FieldRef<'_>, k: usize, grid: &Grid) -> Result<ScalarField> {
    let comps = field.components();
    for c in &comps {
        if c.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values for a grid of {} nodes",
                c.len(),
                grid.len()
            )));
        }
    }
    let mut sq = vec![0.0; grid.len()];
    for c in comps {
        let mut level = vec![ScalarField(c.to_vec())];
        for _ in 0..k {
            level = level
                .iter()
                .flat_map(|f| (0..grid.dim()).map(move |j| d1(f, grid, j)))
                .collect();
        }
        for f in &level {
            for (s, x) in sq.iter_mut().zip(f.iter()) {
                *s += x * x;
            }
        }
    }
    Ok(sq.into_iter().map(f64::sqrt).collect())
}

pub fn norm(field: FieldRef<'_>, spec: &NormSpec, grid: &Grid) -> Result<f64> {
    match spec {
        NormSpec::Lp(p) => {
            check_p(*p)?;
            Ok(lp_of_magnitude(&derivative_magnitude(field, 0, grid)?, *p, grid))
        }
        NormSpec::Dk { k, r } => {
            check_p(*r)?;
            Ok(lp_of_magnitude(&derivative_magnitude(field, *k, grid)?, *r, grid))
        }
        NormSpec::Hs(s) => {
            let mut total = 0.0;
            for j in 0..=*s {
                total += lp_of_magnitude(&derivative_magnitude(field, j, grid)?, 2.0, grid).powi(2);
            }
            Ok(total.sqrt())
        }
        NormSpec::Weighted { weight, p } => {
            check_p(*p)?;
            weight.check_len(grid, "weight")?;
            if let Some(i) = weight.iter().position(|w| !(*w >= 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "norm weight must be nonnegative (node {i}: {})",
                    weight[i]
                )));
            }
            let mag = derivative_magnitude(field, 0, grid)?;
            Ok(lp_of_magnitude(&mag.zip_map(weight, |a, w| a * w), *p, grid))
        }
    }
}
