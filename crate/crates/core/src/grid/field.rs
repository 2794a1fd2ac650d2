use super::{Grid, GridError};
use crate::par;

/// Cell values of a scalar function, one per cell in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wraps `values`, rejecting a length mismatch or any non-finite entry.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::FieldLength {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let field = Self { grid, values };
        field.check_finite()?;
        Ok(field)
    }

    /// Operators produce fields through here; finiteness is checked where the
    /// values are consumed (quadrature, solver guards).
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self::from_raw(grid, vec![value; grid.len()])
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync + Send,
    {
        Self::from_raw(grid, par::map_indexed(grid.len(), |i| f(grid.center(i))))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(cell) => Err(GridError::NonFinite {
                cell,
                value: self.values[cell],
            }),
            None => Ok(()),
        }
    }

    /// Pointwise image under `f`.
    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let v = &self.values;
        Self::from_raw(self.grid, par::map_indexed(v.len(), |i| f(v[i])))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute value; NaN if any entry is NaN.
    pub fn sup_norm(&self) -> f64 {
        let v = &self.values;
        par::max_indexed(v.len(), |i| v[i].abs())
    }
}

/// One value per cell for each of the `dim` components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub(crate) fn from_components(grid: Grid, components: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(components.len(), grid.dim());
        debug_assert!(components.iter().all(|c| c.len() == grid.len()));
        Self { grid, components }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    /// Vector at a cell; inactive components are 0.
    pub fn at(&self, cell: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (axis, c) in self.components.iter().enumerate() {
            out[axis] = c[cell];
        }
        out
    }

    /// Pointwise Euclidean norm squared.
    pub fn norm_sq(&self) -> ScalarField {
        let comps = &self.components;
        ScalarField::from_raw(
            self.grid,
            par::map_indexed(self.grid.len(), |i| comps.iter().map(|c| c[i] * c[i]).sum()),
        )
    }
}

/// Symmetric `dim x dim` tensor per cell, each off-diagonal pair stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Grid,
    // packed upper triangle, row by row
    entries: Vec<Vec<f64>>,
}

impl TensorField {
    pub(crate) fn from_cells(grid: Grid, cells: Vec<[[f64; 3]; 3]>) -> Self {
        let dim = grid.dim();
        let mut entries = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                entries.push(cells.iter().map(|m| m[i][j]).collect());
            }
        }
        Self { grid, entries }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let dim = self.grid.dim();
        i * dim - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Entries are stored once per unordered index pair.
    pub fn is_symmetric(&self) -> bool {
        true
    }

    pub fn get(&self, i: usize, j: usize, cell: usize) -> f64 {
        self.entries[self.slot(i, j)][cell]
    }

    /// Full matrix at a cell, zero-padded to 3x3.
    pub fn at(&self, cell: usize) -> [[f64; 3]; 3] {
        let dim = self.grid.dim();
        let mut m = [[0.0; 3]; 3];
        for i in 0..dim {
            for j in 0..dim {
                m[i][j] = self.get(i, j, cell);
            }
        }
        m
    }

    /// Pointwise Frobenius norm squared.
    pub fn frobenius_sq(&self) -> ScalarField {
        let dim = self.grid.dim();
        ScalarField::from_raw(
            self.grid,
            par::map_indexed(self.grid.len(), |c| {
                let mut s = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        let e = self.get(i, j, c);
                        s += e * e;
                    }
                }
                s
            }),
        )
    }
}
