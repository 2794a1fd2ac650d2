//! Cell-centred rectangular grids with homogeneous Neumann closure.
//!
//! Cells are stored row-major with axis 0 slowest. Unused axes of a 1D or 2D
//! grid have a single cell and zero spacing contribution, so the same indexing
//! code serves every dimension. Ghost values outside the box are the even
//! reflection of the adjacent interior cell.

mod field;
mod ops;

pub use field::{ScalarField, TensorField, VectorField};
pub use ops::{
    boundary_normal_derivative, dirichlet_energy, gradient, gradient_norm_sq, grad_laplacian,
    hessian, integrate, laplacian, lp_norm, BoundaryFace, BoundaryMap, Side,
};
pub(crate) use ops::stencil;

use thiserror::Error;

/// Smallest admissible number of cells along an active axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3, got {0}")]
    Dimension(usize),
    #[error("expected {expected} entries for `{what}`, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("axis {axis} has {cells} cells, need at least {MIN_CELLS}")]
    TooFewCells { axis: usize, cells: usize },
    #[error("axis {axis} has non-positive length {length}")]
    Length { axis: usize, length: f64 },
    #[error("field has {got} values, grid has {expected} cells")]
    FieldLength { expected: usize, got: usize },
    #[error("non-finite value {value} at cell {cell}")]
    NonFinite { cell: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// A uniform box `[0, L_0] x ... x [0, L_{dim-1}]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    cells: [usize; 3],
    lengths: [f64; 3],
    spacing: [f64; 3],
    strides: [usize; 3],
}

impl Grid {
    pub fn new(cells: &[usize], lengths: &[f64]) -> Result<Self, GridError> {
        let dim = cells.len();
        if !(1..=3).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if lengths.len() != dim {
            return Err(GridError::Arity {
                what: "lengths",
                expected: dim,
                got: lengths.len(),
            });
        }
        let mut c = [1usize; 3];
        let mut l = [1.0f64; 3];
        let mut h = [1.0f64; 3];
        for axis in 0..dim {
            if cells[axis] < MIN_CELLS {
                return Err(GridError::TooFewCells {
                    axis,
                    cells: cells[axis],
                });
            }
            if !(lengths[axis] > 0.0 && lengths[axis].is_finite()) {
                return Err(GridError::Length {
                    axis,
                    length: lengths[axis],
                });
            }
            c[axis] = cells[axis];
            l[axis] = lengths[axis];
            h[axis] = lengths[axis] / cells[axis] as f64;
        }
        let strides = [c[1] * c[2], c[2], 1];
        Ok(Self {
            dim,
            cells: c,
            lengths: l,
            spacing: h,
            strides,
        })
    }

    /// `n` cells per axis on `[0, length]^dim`.
    pub fn cube(dim: usize, n: usize, length: f64) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        Self::new(&vec![n; dim], &vec![length; dim])
    }

    /// `n` cells per axis on the unit box.
    pub fn unit(dim: usize, n: usize) -> Result<Self, GridError> {
        Self::cube(dim, n, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Product of the active spacings: the midpoint quadrature weight.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Measure of the box.
    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Smallest active spacing.
    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn cells3(&self) -> [usize; 3] {
        self.cells
    }

    pub(crate) fn spacing3(&self) -> [f64; 3] {
        self.spacing
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i0 = idx / self.strides[0];
        let rem = idx % self.strides[0];
        [i0, rem / self.strides[1], rem % self.strides[1]]
    }

    pub fn ravel(&self, coord: [usize; 3]) -> usize {
        coord[0] * self.strides[0] + coord[1] * self.strides[1] + coord[2]
    }

    /// Cell centre; inactive coordinates are reported as 0.
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let c = self.unravel(idx);
        let mut x = [0.0; 3];
        for (axis, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = (c[axis] as f64 + 0.5) * self.spacing[axis];
        }
        x
    }

    /// Index of the neighbour one cell along `axis` in direction `dir` (+1 or -1),
    /// falling back to the cell itself at the boundary (even reflection).
    #[inline]
    pub(crate) fn shift(&self, idx: usize, coord: &[usize; 3], axis: usize, dir: i32) -> usize {
        if dir > 0 {
            if coord[axis] + 1 == self.cells[axis] {
                idx
            } else {
                idx + self.strides[axis]
            }
        } else if coord[axis] == 0 {
            idx
        } else {
            idx - self.strides[axis]
        }
    }

    /// Same grid with `factor` times as many cells per axis.
    pub fn refined(&self, factor: usize) -> Result<Self, GridError> {
        let cells: Vec<usize> = self.cells().iter().map(|&n| n * factor).collect();
        Self::new(&cells, self.lengths())
    }
}
