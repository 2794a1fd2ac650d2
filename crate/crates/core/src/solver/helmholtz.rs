//! Preconditioned conjugate gradients for `(alpha - lap) w = rhs`.
//!
//! The reflected-ghost Laplacian is symmetric under the midpoint inner product
//! and negative semidefinite, so the operator is SPD for `alpha > 0`. A Jacobi
//! preconditioner is used; its diagonal is constant in the interior and drops
//! by `1 / h^2` per wall a cell touches.

use super::SolverError;
use crate::grid::{stencil, Grid, ScalarField};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzOptions {
    /// Relative residual target `||A w - rhs||_2 <= tol ||rhs||_2`.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for HelmholtzOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn apply(g: &Grid, alpha: f64, w: &[f64]) -> Vec<f64> {
    par::map_indexed(g.len(), |i| {
        alpha * w[i] - stencil::lap_at(g, w, i, &g.unravel(i))
    })
}

fn diagonal(g: &Grid, alpha: f64) -> Vec<f64> {
    let h = g.spacing3();
    let n = g.cells3();
    par::map_indexed(g.len(), |i| {
        let c = g.unravel(i);
        let mut d = alpha;
        for axis in 0..g.dim() {
            let walls = usize::from(c[axis] == 0) + usize::from(c[axis] + 1 == n[axis]);
            d += (2 - walls) as f64 / (h[axis] * h[axis]);
        }
        d
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    par::sum_indexed(a.len(), |i| a[i] * b[i])
}

/// Solves `(alpha - lap) w = rhs` with Neumann closure, starting from `guess`
/// (zero when absent).
pub fn solve_helmholtz(
    rhs: &ScalarField,
    alpha: f64,
    opts: HelmholtzOptions,
    guess: Option<&ScalarField>,
) -> Result<(ScalarField, SolveStats), SolverError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(SolverError::Config(format!(
            "helmholtz shift must be positive, got {alpha}"
        )));
    }
    let g = *rhs.grid();
    let b = rhs.values();
    let b_norm = dot(b, b).sqrt();
    if !b_norm.is_finite() {
        return Err(SolverError::NonFinite { what: "helmholtz right-hand side" });
    }
    if b_norm == 0.0 {
        let stats = SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        };
        return Ok((ScalarField::constant(g, 0.0), stats));
    }
    let mut x = match guess {
        Some(w) if w.grid() == rhs.grid() => w.values().to_vec(),
        _ => vec![0.0; g.len()],
    };
    let diag = diagonal(&g, alpha);
    let ax = apply(&g, alpha, &x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let target = opts.tol * b_norm;
    let mut res = dot(&r, &r).sqrt();

    for it in 0..=opts.max_iterations {
        if res <= target {
            // confirm against the true residual; restart from it if the
            // recurrence has drifted
            let ax = apply(&g, alpha, &x);
            let true_r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let true_res = dot(&true_r, &true_r).sqrt();
            if true_res <= target {
                let stats = SolveStats {
                    iterations: it,
                    relative_residual: true_res / b_norm,
                };
                return Ok((ScalarField::from_raw(g, x), stats));
            }
            r = true_r;
            for i in 0..z.len() {
                z[i] = r[i] / diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            res = true_res;
        }
        if it == opts.max_iterations {
            break;
        }
        let ap = apply(&g, alpha, &p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        for i in 0..x.len() {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        for i in 0..z.len() {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt();
    }
    Err(SolverError::LinearSolve {
        iterations: opts.max_iterations,
        relative_residual: res / b_norm,
        tol: opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::laplacian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn constant_rhs_gives_constant_solution() {
        let g = Grid::unit(3, 6).unwrap();
        let rhs = ScalarField::constant(g, 3.0);
        let (w, _) = solve_helmholtz(&rhs, 1.5, HelmholtzOptions::default(), None).unwrap();
        assert!(w.values().iter().all(|&x| (x - 2.0).abs() < 1e-10));
    }

    #[test]
    fn cosine_eigenfunction() {
        let g = Grid::unit(1, 256).unwrap();
        let rhs = ScalarField::from_fn(g, |p| (PI * p[0]).cos());
        let (w, _) = solve_helmholtz(&rhs, 1.0, HelmholtzOptions::default(), None).unwrap();
        let err = w
            .values()
            .iter()
            .zip(rhs.values())
            .map(|(wi, ri)| (wi - ri / (1.0 + PI * PI)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn random_rhs_meets_residual_target() {
        let g = Grid::new(&[12, 9, 7], &[1.0, 0.8, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rhs = ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let opts = HelmholtzOptions {
            tol: 1e-10,
            max_iterations: 1000,
        };
        let alpha = 0.7;
        let (w, stats) = solve_helmholtz(&rhs, alpha, opts, None).unwrap();
        let lap = laplacian(&w);
        let res: f64 = (0..g.len())
            .map(|i| (alpha * w.values()[i] - lap.values()[i] - rhs.values()[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let b: f64 = rhs.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * b * 1.0001, "{res} vs {}", 1e-10 * b);
        assert!(stats.relative_residual <= 1e-10);
    }

    #[test]
    fn iteration_cap_is_a_fault() {
        let g = Grid::unit(2, 32).unwrap();
        let rhs = ScalarField::from_fn(g, |p| (p[0] * 17.0).sin() * p[1]);
        let opts = HelmholtzOptions {
            tol: 1e-14,
            max_iterations: 2,
        };
        assert!(matches!(
            solve_helmholtz(&rhs, 1e-3, opts, None),
            Err(SolverError::LinearSolve { .. })
        ));
    }

    #[test]
    fn rejects_nonpositive_shift() {
        let g = Grid::unit(1, 8).unwrap();
        let rhs = ScalarField::constant(g, 1.0);
        assert!(solve_helmholtz(&rhs, 0.0, HelmholtzOptions::default(), None).is_err());
    }
}
