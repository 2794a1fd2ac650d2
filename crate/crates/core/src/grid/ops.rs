//! Finite-difference operators and midpoint quadrature.

use super::{Grid, GridError, ScalarField, TensorField, VectorField};
use crate::par;

/// Pointwise stencils on raw cell arrays. Every neighbour lookup goes through
/// [`Grid::shift`], which reflects at the box faces.
pub(crate) mod stencil {
    use super::Grid;

    #[inline]
    pub fn grad_at(g: &Grid, f: &[f64], idx: usize, c: &[usize; 3]) -> [f64; 3] {
        let h = g.spacing3();
        let mut out = [0.0; 3];
        for (axis, o) in out.iter_mut().enumerate().take(g.dim()) {
            let p = g.shift(idx, c, axis, 1);
            let m = g.shift(idx, c, axis, -1);
            *o = (f[p] - f[m]) / (2.0 * h[axis]);
        }
        out
    }

    #[inline]
    pub fn lap_at(g: &Grid, f: &[f64], idx: usize, c: &[usize; 3]) -> f64 {
        let h = g.spacing3();
        let mut s = 0.0;
        for axis in 0..g.dim() {
            let p = g.shift(idx, c, axis, 1);
            let m = g.shift(idx, c, axis, -1);
            s += (f[p] - 2.0 * f[idx] + f[m]) / (h[axis] * h[axis]);
        }
        s
    }

    #[inline]
    pub fn hess_at(g: &Grid, f: &[f64], idx: usize, c: &[usize; 3]) -> [[f64; 3]; 3] {
        let h = g.spacing3();
        let dim = g.dim();
        let mut m = [[0.0; 3]; 3];
        for a in 0..dim {
            let p = g.shift(idx, c, a, 1);
            let q = g.shift(idx, c, a, -1);
            m[a][a] = (f[p] - 2.0 * f[idx] + f[q]) / (h[a] * h[a]);
            for b in (a + 1)..dim {
                let pp = shift2(g, idx, c, a, 1, b, 1);
                let pm = shift2(g, idx, c, a, 1, b, -1);
                let mp = shift2(g, idx, c, a, -1, b, 1);
                let mm = shift2(g, idx, c, a, -1, b, -1);
                let v = (f[pp] - f[pm] - f[mp] + f[mm]) / (4.0 * h[a] * h[b]);
                m[a][b] = v;
                m[b][a] = v;
            }
        }
        m
    }

    #[inline]
    fn shift2(
        g: &Grid,
        idx: usize,
        c: &[usize; 3],
        a: usize,
        da: i32,
        b: usize,
        db: i32,
    ) -> usize {
        let first = g.shift(idx, c, a, da);
        let mut c1 = *c;
        if first != idx {
            c1[a] = (c1[a] as i64 + da as i64) as usize;
        }
        g.shift(first, &c1, b, db)
    }
}

/// Central-difference gradient with even-reflection ghosts.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = *f.grid();
    let v = f.values();
    let per_cell = par::map_indexed(g.len(), |i| stencil::grad_at(&g, v, i, &g.unravel(i)));
    let components = (0..g.dim())
        .map(|axis| per_cell.iter().map(|d| d[axis]).collect())
        .collect();
    VectorField::from_components(g, components)
}

/// `|grad f|^2` per cell without materialising the vector field.
pub fn gradient_norm_sq(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let v = f.values();
    ScalarField::from_raw(
        g,
        par::map_indexed(g.len(), |i| {
            let d = stencil::grad_at(&g, v, i, &g.unravel(i));
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
        }),
    )
}

/// `(2 dim + 1)`-point Laplacian with even-reflection ghosts.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let v = f.values();
    ScalarField::from_raw(
        g,
        par::map_indexed(g.len(), |i| stencil::lap_at(&g, v, i, &g.unravel(i))),
    )
}

/// Second central differences on the diagonal, composed first differences off it.
pub fn hessian(f: &ScalarField) -> TensorField {
    let g = *f.grid();
    let v = f.values();
    let cells = par::map_indexed(g.len(), |i| stencil::hess_at(&g, v, i, &g.unravel(i)));
    TensorField::from_cells(g, cells)
}

/// `gradient(laplacian(f))`.
pub fn grad_laplacian(f: &ScalarField) -> VectorField {
    gradient(&laplacian(f))
}

/// Midpoint rule: sum of cell values times the cell volume.
pub fn integrate(f: &ScalarField) -> Result<f64, GridError> {
    let v = f.values();
    let s = par::sum_indexed(v.len(), |i| v[i]) * f.grid().cell_volume();
    if s.is_finite() {
        Ok(s)
    } else {
        f.check_finite()?;
        Err(GridError::NonFinite {
            cell: usize::MAX,
            value: s,
        })
    }
}

/// `(integral |f|^p)^(1/p)` by midpoint quadrature.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64, GridError> {
    Ok(integrate(&f.map(|x| x.abs().powf(p)))?.powf(1.0 / p))
}

/// Face-difference quadrature of `integral |grad f|^2`: the sum over interior
/// faces of `((f_R - f_L) / h)^2` times the cell volume. Boundary faces carry
/// zero flux. Equals `-<f, laplacian(f)>` under the midpoint inner product.
pub fn dirichlet_energy(f: &ScalarField) -> f64 {
    let g = *f.grid();
    let v = f.values();
    let h = g.spacing3();
    let dim = g.dim();
    par::sum_indexed(g.len(), |i| {
        let c = g.unravel(i);
        let mut s = 0.0;
        for axis in 0..dim {
            let r = g.shift(i, &c, axis, 1);
            let d = (v[r] - v[i]) / h[axis];
            s += d * d;
        }
        s
    }) * g.cell_volume()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
}

/// Values attached to the cells of one boundary face, in row-major order of
/// the remaining coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub axis: usize,
    pub side: Side,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    pub faces: Vec<BoundaryFace>,
}

impl BoundaryMap {
    /// Largest value over all faces.
    pub fn max(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|f| f.values.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|f| f.values.iter().copied())
            .fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Outward normal derivative at each boundary face, from the second-order
/// one-sided formula through the three nearest cell centres.
pub fn boundary_normal_derivative(f: &ScalarField) -> BoundaryMap {
    let g = *f.grid();
    let v = f.values();
    let n = g.cells3();
    let h = g.spacing3();
    let mut faces = Vec::with_capacity(2 * g.dim());
    for axis in 0..g.dim() {
        let s = g.stride(axis);
        for side in [Side::Low, Side::High] {
            let layer = if side == Side::Low { 0 } else { n[axis] - 1 };
            let values = (0..g.len())
                .filter(|&i| g.unravel(i)[axis] == layer)
                .map(|i| match side {
                    Side::Low => (2.0 * v[i] - 3.0 * v[i + s] + v[i + 2 * s]) / h[axis],
                    Side::High => (2.0 * v[i] - 3.0 * v[i - s] + v[i - 2 * s]) / h[axis],
                })
                .collect();
            faces.push(BoundaryFace { axis, side, values });
        }
    }
    BoundaryMap { faces }
}
