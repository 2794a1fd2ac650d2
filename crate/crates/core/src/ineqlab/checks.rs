//! Quadrature evaluation of the individual inequalities and identities.

use super::IneqError;
use crate::grid::{
    boundary_normal_derivative, gradient_norm_sq, laplacian, stencil, Grid, ScalarField,
};
use crate::par;
use serde::Serialize;

/// Both sides below this count as zero.
pub const ZERO_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratio {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; 0 when both vanish, infinite for an anomaly.
    pub ratio: f64,
    /// `rhs` vanished while `lhs` did not.
    pub anomaly: bool,
}

impl Ratio {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        if lhs.abs() < ZERO_TOL && rhs.abs() < ZERO_TOL {
            Self {
                lhs,
                rhs,
                ratio: 0.0,
                anomaly: false,
            }
        } else if rhs.abs() < ZERO_TOL {
            Self {
                lhs,
                rhs,
                ratio: f64::INFINITY,
                anomaly: true,
            }
        } else {
            Self {
                lhs,
                rhs,
                ratio: lhs / rhs,
                anomaly: false,
            }
        }
    }
}

fn require_positive(phi: &ScalarField) -> Result<(), IneqError> {
    phi.check_finite()?;
    match phi.values().iter().position(|&x| x <= 0.0) {
        Some(cell) => Err(IneqError::NonPositive {
            cell,
            value: phi.values()[cell],
        }),
        None => Ok(()),
    }
}

fn frob_sq(m: &[[f64; 3]; 3], dim: usize) -> f64 {
    let mut s = 0.0;
    for row in m.iter().take(dim) {
        for x in row.iter().take(dim) {
            s += x * x;
        }
    }
    s
}

/// The three integrals shared by the Winkler and Appendix-A checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernisTerms {
    /// `int |grad phi|^4 / phi^3`.
    pub grad4_over_phi3: f64,
    /// `int phi |D^2 log phi|^2`.
    pub phi_hess_log_sq: f64,
    /// `int |D^2 sqrt phi|^2`.
    pub hess_sqrt_sq: f64,
}

/// Single fused pass over the cells of a positive `phi`.
pub fn bernis_terms(phi: &ScalarField) -> Result<BernisTerms, IneqError> {
    require_positive(phi)?;
    let g = *phi.grid();
    let dim = g.dim();
    let p = phi.values();
    let log_p: Vec<f64> = par::map_indexed(g.len(), |i| p[i].ln());
    let sqrt_p: Vec<f64> = par::map_indexed(g.len(), |i| p[i].sqrt());
    let vol = g.cell_volume();
    let sums = |f: &(dyn Fn(usize, &[usize; 3]) -> f64 + Sync)| {
        par::sum_indexed(g.len(), |i| f(i, &g.unravel(i))) * vol
    };
    let grad4_over_phi3 = sums(&|i, c| {
        let d = stencil::grad_at(&g, p, i, c);
        let n2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        n2 * n2 / (p[i] * p[i] * p[i])
    });
    let phi_hess_log_sq = sums(&|i, c| p[i] * frob_sq(&stencil::hess_at(&g, &log_p, i, c), dim));
    let hess_sqrt_sq = sums(&|i, c| frob_sq(&stencil::hess_at(&g, &sqrt_p, i, c), dim));
    Ok(BernisTerms {
        grad4_over_phi3,
        phi_hess_log_sq,
        hess_sqrt_sq,
    })
}

/// `int |grad phi|^4 / phi^3` against `int phi |D^2 log phi|^2`.
pub fn winkler_ratio(phi: &ScalarField) -> Result<Ratio, IneqError> {
    let t = bernis_terms(phi)?;
    Ok(Ratio::new(t.grad4_over_phi3, t.phi_hess_log_sq))
}

/// `int |D^2 sqrt u|^2` against `int u |D^2 log u|^2`.
pub fn appendix_a_ratio(u: &ScalarField) -> Result<Ratio, IneqError> {
    let t = bernis_terms(u)?;
    Ok(Ratio::new(t.hess_sqrt_sq, t.phi_hess_log_sq))
}

/// `(2 + sqrt n)^2`.
pub fn winkler_constant(dim: usize) -> f64 {
    (2.0 + (dim as f64).sqrt()).powi(2)
}

/// `1 + sqrt(n) / 2 + n / 8`.
pub fn appendix_a_constant(dim: usize) -> f64 {
    1.0 + (dim as f64).sqrt() / 2.0 + dim as f64 / 8.0
}

fn interior(g: &Grid, c: &[usize; 3], margin: usize) -> bool {
    (0..g.dim()).all(|a| c[a] >= margin && c[a] + margin < g.cells()[a])
}

/// Largest `|1/2 lap |grad u|^2 - grad(lap u) . grad u - |D^2 u|^2|` over
/// cells at least two cells away from every wall.
pub fn bochner_residual(u: &ScalarField) -> Result<f64, IneqError> {
    u.check_finite()?;
    let g = *u.grid();
    let dim = g.dim();
    let uv = u.values();
    let gn = gradient_norm_sq(u);
    let lap = laplacian(u);
    let (gnv, lapv) = (gn.values(), lap.values());
    Ok(par::max_indexed(g.len(), |i| {
        let c = g.unravel(i);
        if !interior(&g, &c, 2) {
            return 0.0;
        }
        let gu = stencil::grad_at(&g, uv, i, &c);
        let gl = stencil::grad_at(&g, lapv, i, &c);
        let cross = gu[0] * gl[0] + gu[1] * gl[1] + gu[2] * gl[2];
        let h = frob_sq(&stencil::hess_at(&g, uv, i, &c), dim);
        (0.5 * stencil::lap_at(&g, gnv, i, &c) - cross - h).abs()
    })
    .max(0.0))
}

/// Largest outward normal derivative of `|grad u|^2` over all boundary cells.
pub fn boundary_sign_check(u: &ScalarField) -> Result<f64, IneqError> {
    u.check_finite()?;
    Ok(boundary_normal_derivative(&gradient_norm_sq(u)).max())
}

/// `||D^2 phi||_{L^6} / ||grad lap phi||_{L^2}`, or `None` when the
/// denominator is below `1e-8`.
pub fn hessian_grad_laplacian_ratio(phi: &ScalarField) -> Result<Option<f64>, IneqError> {
    phi.check_finite()?;
    let g = *phi.grid();
    let dim = g.dim();
    let p = phi.values();
    let lap = laplacian(phi);
    let lv = lap.values();
    let vol = g.cell_volume();
    let num = (par::sum_indexed(g.len(), |i| {
        let h = frob_sq(&stencil::hess_at(&g, p, i, &g.unravel(i)), dim);
        h * h * h
    }) * vol)
        .powf(1.0 / 6.0);
    let den = (par::sum_indexed(g.len(), |i| {
        let d = stencil::grad_at(&g, lv, i, &g.unravel(i));
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
    }) * vol)
        .sqrt();
    Ok((den >= 1e-8).then(|| num / den))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Largest ratio over the admitted fields.
    pub sup: f64,
    pub ratios: Vec<Option<f64>>,
    pub admitted: usize,
}

/// Empirical constant of `||D^2 phi||_{L^6} <= C ||grad lap phi||_{L^2}`.
pub fn hessian_grad_laplacian_probe(batch: &[ScalarField]) -> Result<ProbeReport, IneqError> {
    let ratios = batch
        .iter()
        .map(hessian_grad_laplacian_ratio)
        .collect::<Result<Vec<_>, _>>()?;
    let admitted = ratios.iter().flatten().count();
    if admitted == 0 {
        return Err(IneqError::Degenerate);
    }
    Ok(ProbeReport {
        sup: ratios.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max),
        ratios,
        admitted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    /// `int |(grad sqrt phi)^T D^2 psi grad sqrt phi|`.
    pub lhs: f64,
    /// `1/2` times the product of the four norms.
    pub rhs: f64,
    /// `||grad sqrt phi||_2`, `||D^2 psi||_6`, `||grad phi / phi^{3/4}||_4`,
    /// `||phi^{1/4}||_12`.
    pub factors: [f64; 4],
    pub holds: bool,
}

/// The four-factor Holder bound for the mixed term, with the gradient of
/// `sqrt phi` taken by the chain rule.
pub fn holder_chain_check(phi: &ScalarField, psi: &ScalarField) -> Result<HolderReport, IneqError> {
    require_positive(phi)?;
    psi.check_finite()?;
    if phi.grid() != psi.grid() {
        return Err(crate::grid::GridError::GridMismatch.into());
    }
    let g = *phi.grid();
    let dim = g.dim();
    let (p, q) = (phi.values(), psi.values());
    let vol = g.cell_volume();
    let sum = |f: &(dyn Fn(usize, &[usize; 3]) -> f64 + Sync)| {
        par::sum_indexed(g.len(), |i| f(i, &g.unravel(i))) * vol
    };
    let grad_sqrt = |i: usize, c: &[usize; 3]| {
        let d = stencil::grad_at(&g, p, i, c);
        let r = 2.0 * p[i].sqrt();
        [d[0] / r, d[1] / r, d[2] / r]
    };
    let lhs = sum(&|i, c| {
        let a = grad_sqrt(i, c);
        let m = stencil::hess_at(&g, q, i, c);
        let mut s = 0.0;
        for x in 0..dim {
            for y in 0..dim {
                s += a[x] * m[x][y] * a[y];
            }
        }
        s.abs()
    });
    let f1 = sum(&|i, c| {
        let a = grad_sqrt(i, c);
        a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
    })
    .sqrt();
    let f2 = sum(&|i, c| frob_sq(&stencil::hess_at(&g, q, i, c), dim).powi(3)).powf(1.0 / 6.0);
    let f3 = sum(&|i, c| {
        let d = stencil::grad_at(&g, p, i, c);
        let n2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        n2 * n2 / (p[i] * p[i] * p[i])
    })
    .powf(0.25);
    let f4 = sum(&|i, _| p[i].powi(3)).powf(1.0 / 12.0);
    let rhs = 0.5 * f1 * f2 * f3 * f4;
    Ok(HolderReport {
        lhs,
        rhs,
        factors: [f1, f2, f3, f4],
        holds: lhs <= rhs * (1.0 + 1e-8),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedPoint {
    pub epsilon: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub cells: usize,
    /// Largest `u |D^2 log u|^2` over interior cells for `u = e^x`.
    pub max_denominator: f64,
    /// Smallest `|D^2 sqrt u|^2` over the same cells.
    pub min_numerator: f64,
    /// Outward normal derivative of `u = e^x` at `x = 0` and `x = 1`.
    pub boundary_slopes: [f64; 2],
    /// `u = e^x + eps cos(pi x)` at the middle cell.
    pub perturbed: Vec<PerturbedPoint>,
    pub note: &'static str,
}

fn pointwise_pair(u: &ScalarField, i: usize) -> (f64, f64) {
    let g = *u.grid();
    let c = g.unravel(i);
    let log_u = u.map(f64::ln);
    let sqrt_u = u.map(f64::sqrt);
    let num = frob_sq(&stencil::hess_at(&g, sqrt_u.values(), i, &c), 1);
    let den = u.values()[i] * frob_sq(&stencil::hess_at(&g, log_u.values(), i, &c), 1);
    (num, den)
}

/// Shows that `|D^2 sqrt u|^2 <= C u |D^2 log u|^2` fails cell by cell.
pub fn appendix_a_pointwise_counterexample() -> CounterexampleReport {
    // odd cell count so that a cell centre sits at x = 1/2
    let n = 129;
    let g = Grid::unit(1, n).expect("valid grid");
    let u = ScalarField::from_fn(g, |x| x[0].exp());
    let mut max_den: f64 = 0.0;
    let mut min_num = f64::INFINITY;
    for i in 1..n - 1 {
        let (num, den) = pointwise_pair(&u, i);
        max_den = max_den.max(den);
        min_num = min_num.min(num);
    }
    let slopes = boundary_normal_derivative(&u);
    let boundary_slopes = [slopes.faces[0].values[0], slopes.faces[1].values[0]];
    let mid = n / 2;
    let perturbed = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&epsilon| {
            let w = ScalarField::from_fn(g, |x| {
                x[0].exp() + epsilon * (std::f64::consts::PI * x[0]).cos()
            });
            let (numerator, denominator) = pointwise_pair(&w, mid);
            PerturbedPoint {
                epsilon,
                numerator,
                denominator,
                quotient: numerator / denominator,
            }
        })
        .collect();
    CounterexampleReport {
        cells: n,
        max_denominator: max_den,
        min_numerator: min_num,
        boundary_slopes,
        perturbed,
        note: "u = e^x has D^2 log u = 0 but |D^2 sqrt u|^2 = e^x / 16 > 0, so no pointwise \
               constant exists; u violates the no-flux condition at both ends, so the \
               integrated inequality is not contradicted",
    }
}
