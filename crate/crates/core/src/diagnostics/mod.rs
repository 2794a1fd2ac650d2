//! Energy, entropy and regularity functionals evaluated along a run.
//!
//! Every integral is a midpoint sum over cells. `sqrt u` and `log u` are
//! evaluated on `max(u, floor)`; the density itself is never modified. The
//! gradient of `sqrt u` is taken by the chain rule, `grad u / (2 sqrt u)`,
//! from the central gradient of `u`, so the Fisher identity
//! `int |grad u|^2 / u = 4 int |grad sqrt u|^2` holds cell by cell.
//!
//! Running integrals in time use the trapezoid rule on the record times.

mod eigen;

pub use eigen::{largest_eigenvalue, symmetric_eigenvalues};

use crate::grid::{
    dirichlet_energy, gradient, grad_laplacian, hessian, integrate, laplacian, lp_norm, GridError,
    ScalarField,
};
use crate::par;
use crate::solver::{SolverConfig, State};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("series has {got} records, at least {needed} are required")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("time step at record {index} is {dt}, expected {expected}")]
    NonUniformStep { index: usize, dt: f64, expected: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsConfig {
    pub positivity_floor: f64,
    /// `c` in `I exp(-c int I)`.
    pub remark41_c: f64,
    /// `c1` in the Gronwall weight `K = c1 int (int |grad sqrt u|^2)^2`.
    pub groenwall_c1: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            positivity_floor: SolverConfig::default().positivity_floor,
            remark41_c: 1.0,
            groenwall_c1: 1.0,
        }
    }
}

impl DiagnosticsConfig {
    pub fn for_solver(cfg: &SolverConfig) -> Self {
        Self {
            positivity_floor: cfg.positivity_floor,
            ..Self::default()
        }
    }
}

/// CSV column names of [`DiagnosticsRecord::columns`], in order.
pub const RECORD_COLUMNS: [&str; 20] = [
    "t",
    "mass_u",
    "mass_v",
    "lyapunov",
    "dissipation",
    "fisher_u",
    "I",
    "J",
    "gradsqrt_L2sq",
    "crit_theorem1",
    "crit_appendixB",
    "K_groenwall",
    "concavity_margin",
    "lemma43_rhs",
    "lemma43_residual",
    "remark41_quantity",
    "integral_I",
    "u_L3",
    "u_sup",
    "clamped_fraction",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    /// `int u log u + 1/2 int |grad v|^2`.
    pub lyapunov: f64,
    /// `int |lap v|^2 + int |grad v|^2 + int |grad u|^2 / u`.
    pub dissipation: f64,
    pub fisher_u: f64,
    /// Extended Fisher information; equal to `dissipation`.
    pub i: f64,
    /// `4 int |grad sqrt u|^2 + int |lap v|^2`.
    pub j: f64,
    pub gradsqrt_l2sq: f64,
    /// `int_0^t (int |grad sqrt u|^2)^2`.
    pub crit_theorem1: f64,
    /// `int_0^t ||u||_{L^3}^2`.
    pub crit_appendix_b: f64,
    pub k_groenwall: f64,
    /// Largest eigenvalue of the Hessian of `v` over all cells.
    pub concavity_margin: f64,
    /// `-2 int u |D^2 log u|^2 - 2 int |grad lap v|^2 - 2 int |lap v|^2
    ///  + 8 int (grad sqrt u)^T D^2 v grad sqrt u`.
    pub lemma43_rhs: f64,
    /// Trapezoid average of `lemma43_rhs` minus the backward difference of
    /// `j` over the last step; absent on the first record.
    pub lemma43_residual: Option<f64>,
    /// `I exp(-c int_0^t I)`.
    pub remark41_quantity: f64,
    pub integral_i: f64,
    pub u_l3: f64,
    pub u_sup: f64,
    /// Fraction of cells where `u` is below the positivity floor.
    pub clamped_fraction: f64,
}

impl DiagnosticsRecord {
    /// Values in [`RECORD_COLUMNS`] order.
    pub fn columns(&self) -> [Option<f64>; 20] {
        [
            Some(self.t),
            Some(self.mass_u),
            Some(self.mass_v),
            Some(self.lyapunov),
            Some(self.dissipation),
            Some(self.fisher_u),
            Some(self.i),
            Some(self.j),
            Some(self.gradsqrt_l2sq),
            Some(self.crit_theorem1),
            Some(self.crit_appendix_b),
            Some(self.k_groenwall),
            Some(self.concavity_margin),
            Some(self.lemma43_rhs),
            self.lemma43_residual,
            Some(self.remark41_quantity),
            Some(self.integral_i),
            Some(self.u_l3),
            Some(self.u_sup),
            Some(self.clamped_fraction),
        ]
    }

    /// Inverse of [`columns`](Self::columns); `None` if a required value is missing.
    pub fn from_columns(c: &[Option<f64>; 20]) -> Option<Self> {
        Some(Self {
            t: c[0]?,
            mass_u: c[1]?,
            mass_v: c[2]?,
            lyapunov: c[3]?,
            dissipation: c[4]?,
            fisher_u: c[5]?,
            i: c[6]?,
            j: c[7]?,
            gradsqrt_l2sq: c[8]?,
            crit_theorem1: c[9]?,
            crit_appendix_b: c[10]?,
            k_groenwall: c[11]?,
            concavity_margin: c[12]?,
            lemma43_rhs: c[13]?,
            lemma43_residual: c[14],
            remark41_quantity: c[15]?,
            integral_i: c[16]?,
            u_l3: c[17]?,
            u_sup: c[18]?,
            clamped_fraction: c[19]?,
        })
    }
}

/// Instantaneous functionals of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTerms {
    pub mass_u: f64,
    pub mass_v: f64,
    pub entropy: f64,
    pub grad_v_sq: f64,
    pub lap_v_sq: f64,
    pub fisher_u: f64,
    pub gradsqrt_l2sq: f64,
    pub u_hess_log_sq: f64,
    pub grad_lap_v_sq: f64,
    pub mixed: f64,
    pub concavity_margin: f64,
    pub u_l3: f64,
    pub u_sup: f64,
    pub clamped_fraction: f64,
}

impl StateTerms {
    pub fn lyapunov(&self) -> f64 {
        self.entropy + 0.5 * self.grad_v_sq
    }

    pub fn dissipation(&self) -> f64 {
        self.lap_v_sq + self.grad_v_sq + self.fisher_u
    }

    pub fn j(&self) -> f64 {
        4.0 * self.gradsqrt_l2sq + self.lap_v_sq
    }

    pub fn lemma43_rhs(&self) -> f64 {
        -2.0 * self.u_hess_log_sq - 2.0 * self.grad_lap_v_sq - 2.0 * self.lap_v_sq
            + 8.0 * self.mixed
    }
}

/// `grad u / (2 sqrt(max(u, floor)))` per cell, zero-padded to three components.
pub fn grad_sqrt(u: &ScalarField, floor: f64) -> Vec<[f64; 3]> {
    let gu = gradient(u);
    let vals = u.values();
    par::map_indexed(u.len(), |i| {
        let r = 2.0 * vals[i].max(floor).sqrt();
        let d = gu.at(i);
        [d[0] / r, d[1] / r, d[2] / r]
    })
}

/// Evaluates every instantaneous functional of `s`.
pub fn state_terms(s: &State, floor: f64) -> Result<StateTerms, DiagnosticsError> {
    let g = *s.grid();
    let u = &s.u;
    let v = &s.v;
    let uv = u.values();
    let vol = g.cell_volume();
    let dim = g.dim();

    let mass_u = integrate(u)?;
    let mass_v = integrate(v)?;
    let entropy = par::sum_indexed(g.len(), |i| {
        let x = uv[i];
        if x > 0.0 {
            x * x.ln()
        } else {
            0.0
        }
    }) * vol;
    let grad_v_sq = dirichlet_energy(v);
    let lap_v = laplacian(v);
    let lap_v_sq = integrate(&lap_v.map(|x| x * x))?;

    let gs = grad_sqrt(u, floor);
    let gradsqrt_l2sq = par::sum_indexed(g.len(), |i| {
        let d = gs[i];
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
    }) * vol;
    let fisher_u = 4.0 * gradsqrt_l2sq;

    let log_u = u.map(|x| x.max(floor).ln());
    let hl = hessian(&log_u).frobenius_sq();
    let hlv = hl.values();
    let u_hess_log_sq = par::sum_indexed(g.len(), |i| uv[i] * hlv[i]) * vol;

    let grad_lap_v_sq = integrate(&grad_laplacian(v).norm_sq())?;

    let hv = hessian(v);
    let mixed = par::sum_indexed(g.len(), |i| {
        let m = hv.at(i);
        let d = gs[i];
        let mut q = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                q += d[a] * m[a][b] * d[b];
            }
        }
        q
    }) * vol;
    let concavity_margin = par::max_indexed(g.len(), |i| largest_eigenvalue(&hv.at(i), dim));

    let u_l3 = lp_norm(u, 3.0)?;
    let clamped = par::sum_indexed(g.len(), |i| f64::from(u8::from(uv[i] < floor)));

    let terms = StateTerms {
        mass_u,
        mass_v,
        entropy,
        grad_v_sq,
        lap_v_sq,
        fisher_u,
        gradsqrt_l2sq,
        u_hess_log_sq,
        grad_lap_v_sq,
        mixed,
        concavity_margin,
        u_l3,
        u_sup: u.sup_norm(),
        clamped_fraction: clamped / g.len() as f64,
    };
    for x in [
        terms.entropy,
        terms.lap_v_sq,
        terms.fisher_u,
        terms.u_hess_log_sq,
        terms.grad_lap_v_sq,
        terms.mixed,
        terms.concavity_margin,
    ] {
        if !x.is_finite() {
            return Err(GridError::NonFinite {
                cell: usize::MAX,
                value: x,
            }
            .into());
        }
    }
    Ok(terms)
}

fn trapezoid(prev: Option<(f64, f64)>, t: f64, now: f64) -> f64 {
    match prev {
        Some((t0, f0)) => 0.5 * (t - t0) * (f0 + now),
        None => 0.0,
    }
}

/// Record for `s`, advancing the running integrals of `prev`.
pub fn evaluate(
    s: &State,
    prev: Option<&DiagnosticsRecord>,
    cfg: &DiagnosticsConfig,
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let terms = state_terms(s, cfg.positivity_floor)?;
    let t = s.t;
    let g2 = terms.gradsqrt_l2sq * terms.gradsqrt_l2sq;
    let l3sq = terms.u_l3 * terms.u_l3;
    let dissipation = terms.dissipation();
    let j = terms.j();
    let rhs = terms.lemma43_rhs();

    let crit_theorem1 = prev.map_or(0.0, |p| p.crit_theorem1)
        + trapezoid(prev.map(|p| (p.t, p.gradsqrt_l2sq * p.gradsqrt_l2sq)), t, g2);
    let crit_appendix_b = prev.map_or(0.0, |p| p.crit_appendix_b)
        + trapezoid(prev.map(|p| (p.t, p.u_l3 * p.u_l3)), t, l3sq);
    let integral_i =
        prev.map_or(0.0, |p| p.integral_i) + trapezoid(prev.map(|p| (p.t, p.i)), t, dissipation);
    let lemma43_residual = prev.and_then(|p| {
        let dt = t - p.t;
        (dt > 0.0).then(|| 0.5 * (p.lemma43_rhs + rhs) - (j - p.j) / dt)
    });

    Ok(DiagnosticsRecord {
        t,
        mass_u: terms.mass_u,
        mass_v: terms.mass_v,
        lyapunov: terms.lyapunov(),
        dissipation,
        fisher_u: terms.fisher_u,
        i: dissipation,
        j,
        gradsqrt_l2sq: terms.gradsqrt_l2sq,
        crit_theorem1,
        crit_appendix_b,
        k_groenwall: cfg.groenwall_c1 * crit_theorem1,
        concavity_margin: terms.concavity_margin,
        lemma43_rhs: rhs,
        lemma43_residual,
        remark41_quantity: dissipation * (-cfg.remark41_c * integral_i).exp(),
        integral_i,
        u_l3: terms.u_l3,
        u_sup: terms.u_sup,
        clamped_fraction: terms.clamped_fraction,
    })
}

/// Accumulates records along a run.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    pub cfg: DiagnosticsConfig,
    pub records: Vec<DiagnosticsRecord>,
}

impl Tracker {
    pub fn new(cfg: DiagnosticsConfig) -> Self {
        Self {
            cfg,
            records: Vec::new(),
        }
    }

    /// Evaluates `s` against the last record and stores the result.
    pub fn observe(&mut self, s: &State) -> Result<&DiagnosticsRecord, DiagnosticsError> {
        let rec = evaluate(s, self.records.last(), &self.cfg)?;
        self.records.push(rec);
        Ok(self.records.last().expect("just pushed"))
    }
}

fn check_uniform(series: &[DiagnosticsRecord]) -> Result<(), DiagnosticsError> {
    if series.len() < 3 {
        return Err(DiagnosticsError::SeriesTooShort {
            needed: 3,
            got: series.len(),
        });
    }
    let expected = series[1].t - series[0].t;
    for (k, w) in series.windows(2).enumerate() {
        let dt = w[1].t - w[0].t;
        if !(dt > 0.0) || (dt - expected).abs() > 1e-6 * expected {
            return Err(DiagnosticsError::NonUniformStep {
                index: k + 1,
                dt,
                expected,
            });
        }
    }
    Ok(())
}

/// Centred difference of `f` over the records at every interior index.
fn centred(series: &[DiagnosticsRecord], f: fn(&DiagnosticsRecord) -> f64) -> Vec<f64> {
    series
        .windows(3)
        .map(|w| (f(&w[2]) - f(&w[0])) / (w[2].t - w[0].t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    /// Interior record times.
    pub times: Vec<f64>,
    /// `dL/dt + dissipation` at each interior time.
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    pub mean_abs_residual: f64,
    /// Residuals divided by the largest dissipation along the series.
    pub max_relative_residual: f64,
    pub mean_relative_residual: f64,
    /// Largest single-step increase of `L`.
    pub max_increase: f64,
    /// `1e-6 (1 + |L(0)|)`.
    pub monotonicity_tolerance: f64,
    pub monotone: bool,
}

/// Compares the centred difference of the Lyapunov functional with minus the
/// dissipation and scans for increases.
pub fn lyapunov_dissipation_check(
    series: &[DiagnosticsRecord],
) -> Result<LyapunovReport, DiagnosticsError> {
    check_uniform(series)?;
    let dl = centred(series, |r| r.lyapunov);
    let inner = &series[1..series.len() - 1];
    let residuals: Vec<f64> = dl.iter().zip(inner).map(|(d, r)| d + r.dissipation).collect();
    let scale = series.iter().map(|r| r.dissipation.abs()).fold(0.0, f64::max);
    let rel = |x: f64| if scale > 0.0 { x.abs() / scale } else { x.abs() };
    let n = residuals.len() as f64;
    let max_increase = series
        .windows(2)
        .map(|w| w[1].lyapunov - w[0].lyapunov)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-6 * (1.0 + series[0].lyapunov.abs());
    Ok(LyapunovReport {
        times: inner.iter().map(|r| r.t).collect(),
        max_abs_residual: residuals.iter().map(|x| x.abs()).fold(0.0, f64::max),
        mean_abs_residual: residuals.iter().map(|x| x.abs()).sum::<f64>() / n,
        max_relative_residual: residuals.iter().map(|&x| rel(x)).fold(0.0, f64::max),
        mean_relative_residual: residuals.iter().map(|&x| rel(x)).sum::<f64>() / n,
        residuals,
        max_increase,
        monotonicity_tolerance: tol,
        monotone: max_increase <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackReport {
    pub times: Vec<f64>,
    /// `lemma43_rhs - dJ/dt` at each interior time.
    pub slack: Vec<f64>,
    pub min_slack: f64,
    pub max_abs_slack: f64,
}

/// Slack in the differential estimate for `J`, with `dJ/dt` taken by
/// centred differences of the recorded `J`.
pub fn main_estimate_residual(series: &[DiagnosticsRecord]) -> Result<SlackReport, DiagnosticsError> {
    check_uniform(series)?;
    let dj = centred(series, |r| r.j);
    let inner = &series[1..series.len() - 1];
    let slack: Vec<f64> = dj.iter().zip(inner).map(|(d, r)| r.lemma43_rhs - d).collect();
    Ok(SlackReport {
        times: inner.iter().map(|r| r.t).collect(),
        min_slack: slack.iter().copied().fold(f64::INFINITY, f64::min),
        max_abs_slack: slack.iter().map(|x| x.abs()).fold(0.0, f64::max),
        slack,
    })
}

/// Mean growth rates of an accumulator over the first and last tenth of the
/// recorded time span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRates {
    pub first: f64,
    pub last: f64,
}

impl GrowthRates {
    pub fn accelerating(&self) -> bool {
        self.last > self.first * (1.0 + 1e-9) && self.last > 0.0
    }
}

fn interpolate(series: &[DiagnosticsRecord], f: fn(&DiagnosticsRecord) -> f64, t: f64) -> f64 {
    let k = series.partition_point(|r| r.t < t);
    if k == 0 {
        return f(&series[0]);
    }
    if k == series.len() {
        return f(&series[k - 1]);
    }
    let (a, b) = (&series[k - 1], &series[k]);
    let w = (t - a.t) / (b.t - a.t);
    f(a) + w * (f(b) - f(a))
}

fn growth(series: &[DiagnosticsRecord], f: fn(&DiagnosticsRecord) -> f64) -> GrowthRates {
    let t0 = series[0].t;
    let t1 = series[series.len() - 1].t;
    let w = 0.1 * (t1 - t0);
    if series.len() < 3 || !(w > 0.0) {
        return GrowthRates {
            first: 0.0,
            last: 0.0,
        };
    }
    GrowthRates {
        first: (interpolate(series, f, t0 + w) - f(&series[0])) / w,
        last: (f(&series[series.len() - 1]) - interpolate(series, f, t1 - w)) / w,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub final_t: f64,
    pub crit_theorem1: f64,
    pub crit_appendix_b: f64,
    pub k_groenwall: f64,
    pub max_j: f64,
    pub max_u_l3: f64,
    pub max_u_sup: f64,
    pub growth_theorem1: GrowthRates,
    pub growth_appendix_b: GrowthRates,
    /// Both accumulators grow faster over the last tenth of the run than over
    /// the first.
    pub blowup_fingerprint: bool,
}

/// Final accumulator values and the blow-up fingerprint of a run.
pub fn criterion_report(series: &[DiagnosticsRecord]) -> Result<CriterionReport, DiagnosticsError> {
    let last = series.last().ok_or(DiagnosticsError::SeriesTooShort { needed: 1, got: 0 })?;
    let fold = |f: fn(&DiagnosticsRecord) -> f64| series.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let growth_theorem1 = growth(series, |r| r.crit_theorem1);
    let growth_appendix_b = growth(series, |r| r.crit_appendix_b);
    Ok(CriterionReport {
        final_t: last.t,
        crit_theorem1: last.crit_theorem1,
        crit_appendix_b: last.crit_appendix_b,
        k_groenwall: last.k_groenwall,
        max_j: fold(|r| r.j),
        max_u_l3: fold(|r| r.u_l3),
        max_u_sup: fold(|r| r.u_sup),
        blowup_fingerprint: growth_theorem1.accelerating() && growth_appendix_b.accelerating(),
        growth_theorem1,
        growth_appendix_b,
    })
}
