//! IMEX time stepping for the chemorepulsion system.
//!
//! One step of size `dt`:
//!
//! 1. `v` is advanced by backward Euler, `(1 + dt) w - dt lap w = v + dt u`,
//!    solved with preconditioned CG.
//! 2. `u` is advanced in conservative flux form with the face flux
//!    `grad u + s u grad w` frozen at the new `v`. The explicit update is split
//!    into equal substeps no longer than `h^2 / (2 dim (1 + max |dv|))`, which
//!    keeps every substep a nonnegative combination of old cell values.
//!
//! `u` is never clamped. Sup norms above the blow-up threshold, or NaN, end the
//! step with [`SolverError::BlowUpDetected`].

mod flux;
mod helmholtz;
mod manufactured;

pub use flux::{bernoulli, FluxScheme};
pub use helmholtz::{solve_helmholtz, HelmholtzOptions, SolveStats};
pub use manufactured::{
    manufactured_convergence, ConvergenceLevel, ConvergenceReport, ManufacturedCase,
    MANUFACTURED_CASES,
};

use crate::grid::{GridError, ScalarField};
use crate::par;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Negative densities beyond this are a scheme contract violation.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("linear solve stalled after {iterations} iterations (relative residual {relative_residual:e}, target {tol:e})")]
    LinearSolve {
        iterations: usize,
        relative_residual: f64,
        tol: f64,
    },
    #[error("u = {value:e} at cell {cell} after the update at t = {t}")]
    Positivity { cell: usize, value: f64, t: f64 },
    #[error("blow-up detected at t = {t}: sup norm {sup_norm:e}")]
    BlowUpDetected { t: f64, sup_norm: f64 },
    #[error("step restriction needs {required} substeps at t = {t}, cap is {cap}")]
    StepRestriction { required: f64, cap: usize, t: f64 },
    #[error("non-finite values in {what}")]
    NonFinite { what: &'static str },
    #[error("observer failed: {0}")]
    Observer(String),
}

/// Sign in front of the cross-diffusion term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taxis {
    /// `+`: cells move away from the signal.
    Repulsion,
    /// `-`: Keller-Segel attraction, used for stress runs.
    Attraction,
}

impl Taxis {
    pub fn sign(self) -> f64 {
        match self {
            Taxis::Repulsion => 1.0,
            Taxis::Attraction => -1.0,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Taxis::Repulsion),
            -1 => Some(Taxis::Attraction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub taxis: Taxis,
    pub flux_scheme: FluxScheme,
    pub linear_tol: f64,
    pub blowup_threshold: f64,
    /// Floor for `sqrt u` and `log u` in diagnostics; never applied to `u` itself.
    pub positivity_floor: f64,
    pub max_substeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            taxis: Taxis::Repulsion,
            flux_scheme: FluxScheme::ScharfetterGummel,
            linear_tol: 1e-12,
            blowup_threshold: 1e8,
            positivity_floor: 1e-14,
            max_substeps: 1_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::Config(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive and finite, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive and finite, got {}", self.t_end));
        }
        if !(self.dt * self.t_end).is_finite() {
            return bad("dt * t_end overflows".into());
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return bad(format!("linear_tol must lie in (0, 1), got {}", self.linear_tol));
        }
        if !(self.blowup_threshold > 0.0) {
            return bad(format!(
                "blowup_threshold must be positive, got {}",
                self.blowup_threshold
            ));
        }
        if !(self.positivity_floor > 0.0 && self.positivity_floor <= 1e-12) {
            return bad(format!(
                "positivity_floor must lie in (0, 1e-12], got {}",
                self.positivity_floor
            ));
        }
        if self.max_substeps == 0 {
            return bad("max_substeps must be at least 1".into());
        }
        Ok(())
    }

    fn helmholtz(&self) -> HelmholtzOptions {
        HelmholtzOptions {
            tol: self.linear_tol,
            max_iterations: 10_000,
        }
    }
}

/// One snapshot `(u, v, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: ScalarField,
    pub v: ScalarField,
    pub t: f64,
}

impl State {
    /// Checks matching grids, finiteness and nonnegativity.
    pub fn new(u: ScalarField, v: ScalarField, t: f64) -> Result<Self, SolverError> {
        if u.grid() != v.grid() {
            return Err(GridError::GridMismatch.into());
        }
        u.check_finite()?;
        v.check_finite()?;
        for (name, f) in [("u", &u), ("v", &v)] {
            if let Some(cell) = f.values().iter().position(|&x| x < 0.0) {
                return Err(SolverError::Config(format!(
                    "initial {name} is negative ({:e}) at cell {cell}",
                    f.values()[cell]
                )));
            }
        }
        if !t.is_finite() || t < 0.0 {
            return Err(SolverError::Config(format!("invalid start time {t}")));
        }
        Ok(Self { u, v, t })
    }

    pub fn grid(&self) -> &crate::grid::Grid {
        self.u.grid()
    }
}

/// Space-time source terms appended to both equations.
pub trait Source: Sync {
    fn u_source(&self, x: [f64; 3], t: f64) -> f64;
    fn v_source(&self, x: [f64; 3], t: f64) -> f64;
}

/// Advances `s` by `cfg.dt`.
pub fn step(s: &State, cfg: &SolverConfig) -> Result<State, SolverError> {
    step_with(s, cfg.dt, cfg, None)
}

/// Largest stable explicit substep for the frozen signal `v`.
pub fn substep_limit(v: &ScalarField) -> f64 {
    let g = *v.grid();
    let vals = v.values();
    let h = g.spacing3();
    let mut rate = 0.0;
    for axis in 0..g.dim() {
        let jump = par::max_indexed(g.len(), |i| {
            let c = g.unravel(i);
            (vals[g.shift(i, &c, axis, 1)] - vals[i]).abs()
        });
        rate += 2.0 * (1.0 + jump) / (h[axis] * h[axis]);
    }
    1.0 / rate
}

/// Advances `s` by `dt` with optional sources.
pub fn step_with(
    s: &State,
    dt: f64,
    cfg: &SolverConfig,
    source: Option<&dyn Source>,
) -> Result<State, SolverError> {
    let g = *s.grid();
    let t_new = s.t + dt;

    // implicit signal update
    let u0 = s.u.values();
    let v0 = s.v.values();
    let rhs_vals = par::map_indexed(g.len(), |i| {
        let mut r = v0[i] + dt * u0[i];
        if let Some(src) = source {
            r += dt * src.v_source(g.center(i), t_new);
        }
        r / dt
    });
    let rhs = ScalarField::new(g, rhs_vals).map_err(|_| SolverError::NonFinite {
        what: "signal right-hand side",
    })?;
    let (v_new, _) = solve_helmholtz(&rhs, 1.0 + 1.0 / dt, cfg.helmholtz(), Some(&s.v))?;
    guard_sup(&v_new, t_new, cfg)?;

    // explicit conservative density update on the frozen signal
    let limit = substep_limit(&v_new);
    let required = (dt / limit).ceil().max(1.0);
    if required > cfg.max_substeps as f64 {
        return Err(SolverError::StepRestriction {
            required,
            cap: cfg.max_substeps,
            t: s.t,
        });
    }
    let substeps = required as usize;
    let sub_dt = dt / substeps as f64;
    let sign = cfg.taxis.sign();
    let vv = v_new.values();
    let mut u = u0.to_vec();
    for k in 0..substeps {
        let t_sub = s.t + k as f64 * sub_dt;
        u = transport_update(&g, &u, vv, sign, cfg.flux_scheme, sub_dt, |x| {
            source.map_or(0.0, |src| src.u_source(x, t_sub))
        });
        let uf = ScalarField::from_raw(g, u);
        let t_now = if k + 1 == substeps {
            t_new
        } else {
            t_sub + sub_dt
        };
        guard_sup(&uf, t_now, cfg)?;
        if source.is_none() {
            if let Some((cell, &value)) = uf
                .values()
                .iter()
                .enumerate()
                .find(|(_, &x)| x < -NEGATIVITY_TOLERANCE)
            {
                return Err(SolverError::Positivity {
                    cell,
                    value,
                    t: t_now,
                });
            }
        }
        u = uf.into_values();
    }
    Ok(State {
        u: ScalarField::from_raw(g, u),
        v: v_new,
        t: t_new,
    })
}

fn guard_sup(f: &ScalarField, t: f64, cfg: &SolverConfig) -> Result<(), SolverError> {
    let sup = f.sup_norm();
    if sup.is_nan() || sup > cfg.blowup_threshold {
        return Err(SolverError::BlowUpDetected { t, sup_norm: sup });
    }
    Ok(())
}

/// One explicit flux-form update of `u` with the signal `v` held fixed.
fn transport_update<F>(
    g: &crate::grid::Grid,
    u: &[f64],
    v: &[f64],
    sign: f64,
    scheme: FluxScheme,
    dt: f64,
    source: F,
) -> Vec<f64>
where
    F: Fn([f64; 3]) -> f64 + Sync + Send,
{
    let h = g.spacing3();
    let dim = g.dim();
    // flux through the high face of each cell along each axis; zero on walls
    let fluxes: Vec<Vec<f64>> = (0..dim)
        .map(|axis| {
            par::map_indexed(g.len(), |i| {
                let c = g.unravel(i);
                let r = g.shift(i, &c, axis, 1);
                if r == i {
                    0.0
                } else {
                    scheme.flux(u[i], u[r], sign * (v[r] - v[i]), h[axis])
                }
            })
        })
        .collect();
    par::map_indexed(g.len(), |i| {
        let c = g.unravel(i);
        let mut div = 0.0;
        for axis in 0..dim {
            let l = g.shift(i, &c, axis, -1);
            let low = if l == i { 0.0 } else { fluxes[axis][l] };
            div += (fluxes[axis][i] - low) / h[axis];
        }
        u[i] + dt * (div + source(g.center(i)))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowUp { t: f64, sup_norm: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub termination: Termination,
    /// Last accepted state.
    pub final_state: State,
    pub steps: usize,
}

pub type ObserverResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

/// Steps from `s0` to `cfg.t_end`, calling `observe` on the initial state and
/// after every accepted step. The last step is shortened to land on `t_end`.
/// Blow-up ends the run normally with [`Termination::BlowUp`]; every other
/// step failure is returned as an error.
pub fn run<F>(s0: State, cfg: &SolverConfig, observe: F) -> Result<RunResult, SolverError>
where
    F: FnMut(&State) -> ObserverResult,
{
    run_with(s0, cfg, None, observe)
}

pub fn run_with<F>(
    s0: State,
    cfg: &SolverConfig,
    source: Option<&dyn Source>,
    mut observe: F,
) -> Result<RunResult, SolverError>
where
    F: FnMut(&State) -> ObserverResult,
{
    cfg.validate()?;
    let sup0 = s0.u.sup_norm().max(s0.v.sup_norm());
    if sup0 >= cfg.blowup_threshold {
        return Err(SolverError::Config(format!(
            "blowup_threshold {} does not exceed the initial sup norm {sup0}",
            cfg.blowup_threshold
        )));
    }
    let t0 = s0.t;
    let span = cfg.t_end - t0;
    if span <= 0.0 {
        return Err(SolverError::Config(format!(
            "start time {t0} is not before t_end {}",
            cfg.t_end
        )));
    }
    let n_steps = ((span / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    observe(&s0).map_err(|e| SolverError::Observer(e.to_string()))?;
    let mut state = s0;
    for k in 0..n_steps {
        let t_next = if k + 1 == n_steps {
            cfg.t_end
        } else {
            t0 + (k + 1) as f64 * cfg.dt
        };
        let dt = t_next - state.t;
        match step_with(&state, dt, cfg, source) {
            Ok(mut next) => {
                next.t = t_next;
                observe(&next).map_err(|e| SolverError::Observer(e.to_string()))?;
                state = next;
            }
            Err(SolverError::BlowUpDetected { t, sup_norm }) => {
                return Ok(RunResult {
                    termination: Termination::BlowUp { t, sup_norm },
                    final_state: state,
                    steps: k,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunResult {
        termination: Termination::Completed,
        final_state: state,
        steps: n_steps,
    })
}
