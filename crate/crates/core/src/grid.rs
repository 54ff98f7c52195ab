//! Structured cell-centred grids in one to three dimensions.
//!
//! Nodes sit at cell centres `lo + (i + 1/2) dx`. Fields are flat arrays in
//! row-major axis order (the last axis varies fastest).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Truncated whole-space box; boundary nodes carry the far-field data.
    FarField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub length: f64,
    pub n: usize,
}

impl Axis {
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.dx()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GridSpec", try_from = "GridSpec")]
pub struct Grid {
    axes: Vec<Axis>,
    boundary: Boundary,
    strides: Vec<usize>,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    axes: Vec<Axis>,
    boundary: Boundary,
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            axes: g.axes,
            boundary: g.boundary,
        }
    }
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        Grid::new(s.axes, s.boundary)
    }
}

impl Grid {
    pub const MIN_CELLS: usize = 4;

    pub fn new(axes: Vec<Axis>, boundary: Boundary) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3 (got {})",
                axes.len()
            )));
        }
        for (k, ax) in axes.iter().enumerate() {
            if ax.n < Self::MIN_CELLS {
                return Err(Error::InvalidGrid(format!(
                    "axis {k}: need at least {} cells (got {})",
                    Self::MIN_CELLS,
                    ax.n
                )));
            }
            if !(ax.length > 0.0) || !ax.length.is_finite() || !ax.lo.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {k}: length must be positive and finite (got {})",
                    ax.length
                )));
            }
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].n;
        }
        let len = axes.iter().map(|a| a.n).product();
        Ok(Self {
            axes,
            boundary,
            strides,
            len,
        })
    }

    /// Same cell count and length on every axis.
    pub fn uniform(dim: usize, n: usize, lo: f64, length: f64, boundary: Boundary) -> Result<Self> {
        Self::new(vec![Axis { lo, length, n }; dim], boundary)
    }

    pub fn periodic_1d(n: usize, length: f64) -> Result<Self> {
        Self::uniform(1, n, 0.0, length, Boundary::Periodic)
    }

    /// Box `[-half_width, half_width]^dim` with far-field boundary.
    pub fn far_field(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        Self::uniform(dim, n, -half_width, 2.0 * half_width, Boundary::FarField)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn dx(&self, k: usize) -> f64 {
        self.axes[k].dx()
    }

    pub fn min_dx(&self) -> f64 {
        self.axes.iter().map(Axis::dx).fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::dx).product()
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    /// Index of `flat` along axis `k`.
    pub fn index_along(&self, flat: usize, k: usize) -> usize {
        (flat / self.strides[k]) % self.axes[k].n
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for (k, slot) in idx.iter_mut().enumerate().take(self.dim()) {
            *slot = self.index_along(flat, k);
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Physical coordinates of node `flat`; unused axes are zero.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (k, ax) in self.axes.iter().enumerate() {
            x[k] = ax.coord(self.index_along(flat, k));
        }
        x
    }

    /// Euclidean distance of node `flat` from the origin.
    pub fn radius(&self, flat: usize) -> f64 {
        let x = self.coords(flat);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Neighbour of `flat` shifted by `offset` along axis `k`. Periodic grids
    /// wrap; far-field grids return `None` outside the box.
    pub fn neighbor(&self, flat: usize, k: usize, offset: isize) -> Option<usize> {
        let n = self.axes[k].n as isize;
        let i = self.index_along(flat, k) as isize;
        let j = i + offset;
        let j = match self.boundary {
            Boundary::Periodic => j.rem_euclid(n),
            Boundary::FarField if (0..n).contains(&j) => j,
            Boundary::FarField => return None,
        };
        Some((flat as isize + (j - i) * self.strides[k] as isize) as usize)
    }

    /// True for nodes on the outer layer of a far-field box.
    pub fn is_boundary_node(&self, flat: usize) -> bool {
        if self.is_periodic() {
            return false;
        }
        (0..self.dim()).any(|k| {
            let i = self.index_along(flat, k);
            i == 0 || i + 1 == self.axes[k].n
        })
    }

    /// Flat indices of the first node of every grid line along axis `k`.
    pub fn line_starts(&self, k: usize) -> Vec<usize> {
        let n = self.axes[k].n;
        let stride = self.strides[k];
        (0..self.len)
            .filter(|&f| (f / stride) % n == 0)
            .collect()
    }

    /// Evaluates `f(x)` at every node.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len).map(|i| f(self.coords(i))).collect()
    }

    /// Box half-width on axis 0 (far-field boxes are centred at the origin).
    pub fn half_width(&self) -> f64 {
        0.5 * self.axes[0].length
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.boundary == other.boundary
            && self.axes.len() == other.axes.len()
            && self
                .axes
                .iter()
                .zip(&other.axes)
                .all(|(a, b)| a.n == b.n && a.lo == b.lo && a.length == b.length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_too_few_cells() {
        assert!(Grid::periodic_1d(3, 1.0).is_err());
        assert!(Grid::periodic_1d(4, 1.0).is_ok());
        assert!(Grid::periodic_1d(8, 0.0).is_err());
    }

    #[test]
    fn row_major_layout() {
        let g = Grid::new(
            vec![
                Axis { lo: 0.0, length: 1.0, n: 4 },
                Axis { lo: 0.0, length: 1.0, n: 5 },
            ],
            Boundary::Periodic,
        )
        .unwrap();
        assert_eq!(g.stride(1), 1);
        assert_eq!(g.stride(0), 5);
        let f = g.flat_index(&[2, 3]);
        assert_eq!(g.multi_index(f)[..2], [2, 3]);
        assert_eq!(g.neighbor(f, 1, 2), Some(g.flat_index(&[2, 0])));
        assert_eq!(g.line_starts(0).len(), 5);
        assert_eq!(g.line_starts(1).len(), 4);
    }

    #[test]
    fn far_field_neighbors_stop_at_edge() {
        let g = Grid::far_field(1, 8, 1.0).unwrap();
        assert_eq!(g.neighbor(0, 0, -1), None);
        assert_eq!(g.neighbor(7, 0, 1), None);
        assert!(g.is_boundary_node(0) && g.is_boundary_node(7) && !g.is_boundary_node(3));
        assert!((g.coords(0)[0] + 1.0 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip_rebuilds_strides() {
        let g = Grid::far_field(2, 6, 2.0).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: Grid = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
