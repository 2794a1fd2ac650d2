//! Manufactured-solution verification of the stepping scheme.
//!
//! A case prescribes `(u*, v*)` on the unit interval; the residuals of both
//! equations are fed back as sources so that `(u*, v*)` is an exact solution
//! of the forced system. Spatial refinement uses `dt = 0.2 h^2`, so the
//! observed rate is the spatial one; temporal refinement uses a fixed fine grid.

use super::{run_with, SolverConfig, SolverError, Source, State, Taxis};
use crate::grid::{Grid, ScalarField};
use serde::Serialize;
use std::f64::consts::PI;

/// Identifiers accepted by [`ManufacturedCase::from_id`].
pub const MANUFACTURED_CASES: &[&str] = &["cosine-1d", "constant-1d"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedCase {
    /// `u* = v* = 2 + exp(-t) cos(pi x)`.
    Cosine1d,
    /// `u* = v* = 2`.
    Constant1d,
}

impl ManufacturedCase {
    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "cosine-1d" => Some(Self::Cosine1d),
            "constant-1d" => Some(Self::Constant1d),
            _ => None,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::Cosine1d => "cosine-1d",
            Self::Constant1d => "constant-1d",
        }
    }

    /// `(value, d/dx, d2/dx2, d/dt)` of the shared profile.
    fn profile(self, x: f64, t: f64) -> (f64, f64, f64, f64) {
        match self {
            Self::Cosine1d => {
                let e = (-t).exp();
                let (s, c) = (PI * x).sin_cos();
                (2.0 + e * c, -PI * e * s, -PI * PI * e * c, -e * c)
            }
            Self::Constant1d => (2.0, 0.0, 0.0, 0.0),
        }
    }

    fn exact(self, x: f64, t: f64) -> f64 {
        self.profile(x, t).0
    }
}

struct Forcing {
    case: ManufacturedCase,
    sign: f64,
}

impl Source for Forcing {
    fn u_source(&self, x: [f64; 3], t: f64) -> f64 {
        // u = v = p: u_t - (u_xx + s (u_x v_x + u v_xx))
        let (p, px, pxx, pt) = self.case.profile(x[0], t);
        pt - (pxx + self.sign * (px * px + p * pxx))
    }

    fn v_source(&self, x: [f64; 3], t: f64) -> f64 {
        // v_t - v_xx + v - u with u = v
        let (_, _, pxx, pt) = self.case.profile(x[0], t);
        pt - pxx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub dt: f64,
    pub err_u: f64,
    pub err_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub case: &'static str,
    pub t_end: f64,
    pub space: Vec<ConvergenceLevel>,
    /// `log2` error ratios between successive spatial levels, for `u` then `v`.
    pub space_orders_u: Vec<f64>,
    pub space_orders_v: Vec<f64>,
    pub time: Vec<ConvergenceLevel>,
    pub time_orders_u: Vec<f64>,
    pub time_orders_v: Vec<f64>,
}

const SPACE_CELLS: [usize; 3] = [16, 32, 64];
const SPACE_T_END: f64 = 0.1;
const SPACE_DT_FACTOR: f64 = 0.2;
const TIME_CELLS: usize = 256;
const TIME_STEPS: [f64; 3] = [0.02, 0.01, 0.005];
const TIME_T_END: f64 = 0.2;

fn solve_case(
    case: ManufacturedCase,
    cells: usize,
    dt: f64,
    t_end: f64,
) -> Result<ConvergenceLevel, SolverError> {
    let g = Grid::unit(1, cells)?;
    let u0 = ScalarField::from_fn(g, |x| case.exact(x[0], 0.0));
    let s0 = State::new(u0.clone(), u0, 0.0)?;
    let cfg = SolverConfig {
        dt,
        t_end,
        taxis: Taxis::Repulsion,
        linear_tol: 1e-11,
        ..SolverConfig::default()
    };
    let forcing = Forcing {
        case,
        sign: cfg.taxis.sign(),
    };
    let res = run_with(s0, &cfg, Some(&forcing), |_| Ok(()))?;
    let exact = ScalarField::from_fn(g, |x| case.exact(x[0], t_end));
    let l2 = |f: &ScalarField| {
        let s: f64 = f
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (s * g.cell_volume()).sqrt()
    };
    Ok(ConvergenceLevel {
        h: g.spacing()[0],
        dt,
        err_u: l2(&res.final_state.u),
        err_v: l2(&res.final_state.v),
    })
}

fn orders(levels: &[ConvergenceLevel], pick: fn(&ConvergenceLevel) -> f64) -> Vec<f64> {
    levels
        .windows(2)
        .map(|w| {
            let (a, b) = (pick(&w[0]), pick(&w[1]));
            if a == 0.0 && b == 0.0 {
                f64::INFINITY
            } else {
                (a / b).log2()
            }
        })
        .collect()
}

/// Runs the spatial and temporal refinement studies for `case`.
pub fn manufactured_convergence(case: ManufacturedCase) -> Result<ConvergenceReport, SolverError> {
    let space = SPACE_CELLS
        .iter()
        .map(|&n| {
            let h = 1.0 / n as f64;
            solve_case(case, n, SPACE_DT_FACTOR * h * h, SPACE_T_END)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let time = TIME_STEPS
        .iter()
        .map(|&dt| solve_case(case, TIME_CELLS, dt, TIME_T_END))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConvergenceReport {
        case: case.id(),
        t_end: SPACE_T_END,
        space_orders_u: orders(&space, |l| l.err_u),
        space_orders_v: orders(&space, |l| l.err_v),
        time_orders_u: orders(&time, |l| l.err_u),
        time_orders_v: orders(&time, |l| l.err_v),
        space,
        time,
    })
}
