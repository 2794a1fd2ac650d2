//! The `chemorep` commands and their file formats.
//!
//! Every command writes below the output root, which is the working directory
//! unless `CHEMOREP_OUTPUT_ROOT` is set. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O failure |
//! | 2 | usage or configuration error |
//! | 3 | blow-up detected during `simulate` |
//! | 4 | numerical fault (solver, diagnostics, grid) |
//! | 5 | `verify` found a sample above its bound |

pub mod batch;
pub mod config;
pub mod csv;
pub mod kv;
pub mod snapshot;

use crate::diagnostics::{
    criterion_report, lyapunov_dissipation_check, main_estimate_residual, CriterionReport,
    DiagnosticsConfig, DiagnosticsError, DiagnosticsRecord, LyapunovReport, SlackReport, Tracker,
};
use crate::grid::{integrate, GridError};
use crate::ineqlab::{bochner_refinement, run_batch, BatchRow, IneqError, SampleParams};
use crate::solver::{
    manufactured_convergence, run, ManufacturedCase, SolverError, State, Termination,
    MANUFACTURED_CASES,
};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub use batch::{parse_batch_spec, VerifyConfig};
pub use config::{build_initial, parse_config, FieldSlot, InitialData, RunConfig};
pub use kv::ConfigError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_BLOWUP: u8 = 3;
pub const EXIT_FAULT: u8 = 4;
pub const EXIT_VERIFY_FAILED: u8 = 5;

/// Environment variable that relocates every output directory.
pub const OUTPUT_ROOT_VAR: &str = "CHEMOREP_OUTPUT_ROOT";

pub const SUMMARY_SCHEMA: &str = "chemorep-summary/1";
pub const REPORT_SCHEMA: &str = "chemorep-report/1";

/// Case ids accepted by `convergence` besides the manufactured ones.
pub const BOCHNER_CASE: &str = "bochner";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    RawIo(#[from] io::Error),
    #[error("config error at {0}")]
    Config(#[from] ConfigError),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Ineq(#[from] IneqError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::RawIo(_) => EXIT_IO,
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Solver(SolverError::Config(_)) => EXIT_USAGE,
            CliError::Ineq(IneqError::Batch(_)) => EXIT_USAGE,
            CliError::Solver(_) | CliError::Diagnostics(_) | CliError::Ineq(_) | CliError::Grid(_) => {
                EXIT_FAULT
            }
        }
    }
}

trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T, CliError>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> Result<T, CliError> {
        self.map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// `CHEMOREP_OUTPUT_ROOT`, or the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).at(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serialises");
    text.push('\n');
    fs::write(path, text).at(path)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema: &'static str,
    pub timeseries_schema: &'static str,
    /// `completed`, `blow_up` or `fault`.
    pub termination: &'static str,
    pub exit_code: u8,
    /// Detection time and sup norm of a blow-up.
    pub blowup_t: Option<f64>,
    pub blowup_sup_norm: Option<f64>,
    pub fault: Option<String>,
    pub steps: usize,
    pub final_t: f64,
    pub mass_u_initial: f64,
    pub mass_u_final: f64,
    pub mass_u_relative_drift: f64,
    pub criterion: Option<CriterionReport>,
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub run_dir: PathBuf,
    pub summary: RunSummary,
}

impl SimulateOutcome {
    pub fn exit_code(&self) -> u8 {
        self.summary.exit_code
    }
}

/// Name of the snapshot written after `step` accepted steps.
pub fn snapshot_name(step: usize) -> String {
    format!("step_{step:06}.snap")
}

/// Reads, validates and runs the config at `path`. Relative `file` presets
/// resolve against the config's directory.
pub fn simulate_file(path: &Path, root: &Path) -> Result<SimulateOutcome, CliError> {
    let cfg = parse_config(&read_text(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    simulate(&cfg, base, root)
}

/// Runs `cfg` and writes `config.txt`, the time series, snapshots and
/// `summary.json` into `root/<output.directory>`.
///
/// Blow-up and numerical faults still produce a summary and are reported
/// through [`RunSummary::exit_code`]; only setup and I/O failures are errors.
pub fn simulate(cfg: &RunConfig, base_dir: &Path, root: &Path) -> Result<SimulateOutcome, CliError> {
    let run_dir = root.join(&cfg.output.directory);
    let snap_dir = run_dir.join("snapshots");
    fs::create_dir_all(&snap_dir).at(&snap_dir)?;
    let config_path = run_dir.join("config.txt");
    fs::write(&config_path, cfg.to_text()).at(&config_path)?;

    let grid = cfg.grid.build()?;
    let u0 = build_initial(&cfg.initial_u, grid, cfg.seed, FieldSlot::U, base_dir)?;
    let v0 = build_initial(&cfg.initial_v, grid, cfg.seed, FieldSlot::V, base_dir)?;
    let s0 = State::new(u0, v0, 0.0)?;
    let mass0 = integrate(&s0.u)?;

    let csv_path = run_dir.join(&cfg.output.csv);
    let file = File::create(&csv_path).at(&csv_path)?;
    let mut writer = csv::TimeseriesWriter::new(BufWriter::new(file)).at(&csv_path)?;
    let mut tracker = Tracker::new(DiagnosticsConfig::for_solver(&cfg.solver));
    let stride = cfg.output.snapshot_stride;

    // the observer can only report strings, so keep the typed failure here
    let mut failure: Option<CliError> = None;
    let mut step = 0usize;
    let result = run(s0, &cfg.solver, |s| {
        let outcome = (|| -> Result<(), CliError> {
            let rec = tracker.observe(s)?;
            writer.row(step, rec).at(&csv_path)?;
            if stride > 0 && step % stride == 0 {
                let p = snap_dir.join(snapshot_name(step));
                snapshot::write_snapshot(&p, s).at(&p)?;
            }
            Ok(())
        })();
        step += 1;
        outcome.map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            msg.into()
        })
    });
    writer.finish().at(&csv_path)?;

    let (termination, exit_code, blowup, fault, steps, final_state) = match result {
        Ok(r) => {
            let final_path = snap_dir.join("final.snap");
            snapshot::write_snapshot(&final_path, &r.final_state).at(&final_path)?;
            match r.termination {
                Termination::Completed => ("completed", EXIT_OK, None, None, r.steps, Some(r.final_state)),
                Termination::BlowUp { t, sup_norm } => (
                    "blow_up",
                    EXIT_BLOWUP,
                    Some((t, sup_norm)),
                    None,
                    r.steps,
                    Some(r.final_state),
                ),
            }
        }
        Err(e) => {
            let err = match failure.take() {
                Some(f) => f,
                None => CliError::Solver(e),
            };
            if err.exit_code() == EXIT_IO {
                return Err(err);
            }
            ("fault", EXIT_FAULT, None, Some(err.to_string()), step.saturating_sub(1), None)
        }
    };

    let mass_final = match &final_state {
        Some(s) => integrate(&s.u)?,
        None => tracker.records.last().map_or(mass0, |r| r.mass_u),
    };
    let summary = RunSummary {
        schema: SUMMARY_SCHEMA,
        timeseries_schema: csv::TIMESERIES_SCHEMA,
        termination,
        exit_code,
        blowup_t: blowup.map(|b| b.0),
        blowup_sup_norm: blowup.map(|b| b.1),
        fault,
        steps,
        final_t: tracker.records.last().map_or(0.0, |r| r.t),
        mass_u_initial: mass0,
        mass_u_final: mass_final,
        mass_u_relative_drift: (mass_final - mass0).abs() / mass0.abs().max(f64::MIN_POSITIVE),
        criterion: criterion_report(&tracker.records).ok(),
    };
    write_json(&run_dir.join("summary.json"), &summary)?;
    Ok(SimulateOutcome { run_dir, summary })
}

// ------------------------------------------------------------------ verify

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub csv_path: PathBuf,
    pub rows: Vec<BatchRow>,
    pub failures: usize,
}

impl VerifyOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.failures == 0 {
            EXIT_OK
        } else {
            EXIT_VERIFY_FAILED
        }
    }
}

/// Runs the batch at `path`; `scale` overrides its `constant_scale`.
pub fn verify_file(path: &Path, root: &Path, scale: Option<f64>) -> Result<VerifyOutcome, CliError> {
    let mut v = parse_batch_spec(&read_text(path)?)?;
    if let Some(s) = scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(CliError::Usage(format!("--constant-scale must be positive, got {s}")));
        }
        v.batch.constant_scale = s;
    }
    verify(&v, root)
}

pub fn verify(v: &VerifyConfig, root: &Path) -> Result<VerifyOutcome, CliError> {
    let rows = run_batch(&v.batch)?;
    fs::create_dir_all(root).at(root)?;
    let csv_path = root.join(&v.csv);
    let file = File::create(&csv_path).at(&csv_path)?;
    let mut out = BufWriter::new(file);
    csv::write_batch(&mut out, &rows).at(&csv_path)?;
    out.flush().at(&csv_path)?;
    let failures = rows.iter().filter(|r| !r.pass || r.anomaly).count();
    Ok(VerifyOutcome {
        csv_path,
        rows,
        failures,
    })
}

/// One line per (check, dim) group: sample count, max ratio, bound, failures.
pub fn verify_summary_lines(rows: &[BatchRow]) -> Vec<String> {
    let mut lines = Vec::new();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    for r in rows {
        let dim = r.n;
        if seen.contains(&(r.check, dim)) {
            continue;
        }
        seen.push((r.check, dim));
        let group: Vec<&BatchRow> = rows.iter().filter(|x| x.check == r.check && x.n == dim).collect();
        let max = group.iter().map(|x| x.ratio).fold(f64::NEG_INFINITY, f64::max);
        let bad = group.iter().filter(|x| !x.pass || x.anomaly).count();
        lines.push(format!(
            "{:<10} n={} samples={} max_ratio={:.6} bound={:.6} failures={}",
            r.check,
            dim,
            group.len(),
            max,
            r.bound,
            bad
        ));
    }
    lines
}

// ------------------------------------------------------------- convergence

/// Every id accepted by [`convergence`].
pub fn convergence_cases() -> Vec<&'static str> {
    let mut ids = MANUFACTURED_CASES.to_vec();
    ids.push(BOCHNER_CASE);
    ids
}

/// Cosine sample used by the `bochner` case: one mode per axis on the unit
/// interval, so the residual is in its asymptotic range from `h = 1/32`.
pub const BOCHNER_PARAMS: SampleParams = SampleParams {
    max_frequency: 1,
    amplitude: 0.8,
    base: 1.0,
};
pub const BOCHNER_SEED: u64 = 1;
pub const BOCHNER_CELLS: [usize; 3] = [32, 64, 128];

#[derive(Debug, Clone)]
pub struct ConvergenceOutcome {
    pub csv_path: PathBuf,
    /// Rendered table, also printed by the binary.
    pub table: String,
    /// Lowest observed spatial order across the study.
    pub min_space_order: f64,
}

fn fmt_order(x: Option<f64>) -> String {
    x.map(csv::fmt_value).unwrap_or_default()
}

pub fn convergence(case: &str, root: &Path) -> Result<ConvergenceOutcome, CliError> {
    let dir = root.join("convergence");
    fs::create_dir_all(&dir).at(&dir)?;
    let csv_path = dir.join(format!("{case}.csv"));
    let mut out = String::new();
    let mut table = String::new();
    let min_space_order;
    if case == BOCHNER_CASE {
        let study = bochner_refinement(1, BOCHNER_PARAMS, BOCHNER_SEED, &BOCHNER_CELLS)?;
        out.push_str("level,h,residual,order\n");
        table.push_str(&format!("{:>5} {:>12} {:>14} {:>8}\n", "level", "h", "residual", "order"));
        for (k, (&h, &r)) in study.h.iter().zip(&study.residual).enumerate() {
            let order = k.checked_sub(1).map(|j| study.pair_orders[j]);
            out.push_str(&format!("{k},{},{},{}\n", csv::fmt_value(h), csv::fmt_value(r), fmt_order(order)));
            table.push_str(&format!(
                "{k:>5} {h:>12.6} {r:>14.6e} {:>8}\n",
                order.map(|o| format!("{o:.3}")).unwrap_or_default()
            ));
        }
        out.push_str(&format!("fitted,,,{}\n", csv::fmt_value(study.fitted_order)));
        table.push_str(&format!("least-squares order {:.3}\n", study.fitted_order));
        min_space_order = study.fitted_order;
    } else {
        let id = ManufacturedCase::from_id(case).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown convergence case `{case}`; valid ids: {}",
                convergence_cases().join(", ")
            ))
        })?;
        let r = manufactured_convergence(id)?;
        out.push_str("study,level,h,dt,err_u,err_v,order_u,order_v\n");
        table.push_str(&format!(
            "{:>5} {:>5} {:>10} {:>10} {:>12} {:>12} {:>8} {:>8}\n",
            "study", "level", "h", "dt", "err_u", "err_v", "order_u", "order_v"
        ));
        let studies = [
            ("space", &r.space, &r.space_orders_u, &r.space_orders_v),
            ("time", &r.time, &r.time_orders_u, &r.time_orders_v),
        ];
        for (name, levels, ou, ov) in studies {
            for (k, l) in levels.iter().enumerate() {
                let (a, b) = match k.checked_sub(1) {
                    Some(j) => (Some(ou[j]), Some(ov[j])),
                    None => (None, None),
                };
                out.push_str(&format!(
                    "{name},{k},{},{},{},{},{},{}\n",
                    csv::fmt_value(l.h),
                    csv::fmt_value(l.dt),
                    csv::fmt_value(l.err_u),
                    csv::fmt_value(l.err_v),
                    fmt_order(a),
                    fmt_order(b)
                ));
                let o = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_default();
                table.push_str(&format!(
                    "{name:>5} {k:>5} {:>10.6} {:>10.3e} {:>12.4e} {:>12.4e} {:>8} {:>8}\n",
                    l.h,
                    l.dt,
                    l.err_u,
                    l.err_v,
                    o(a),
                    o(b)
                ));
            }
        }
        min_space_order = r
            .space_orders_u
            .iter()
            .chain(&r.space_orders_v)
            .copied()
            .fold(f64::INFINITY, f64::min);
    }
    fs::write(&csv_path, out).at(&csv_path)?;
    Ok(ConvergenceOutcome {
        csv_path,
        table,
        min_space_order,
    })
}

// ------------------------------------------------------------------ report

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub records: usize,
    pub final_t: f64,
    pub mass_u_relative_drift: f64,
    pub max_dissipation: f64,
    pub criterion: CriterionReport,
    /// Absent when the series is too short or its step is not uniform.
    pub lyapunov: Option<LyapunovReport>,
    pub lyapunov_skipped: Option<String>,
    pub main_estimate: Option<SlackReport>,
    pub main_estimate_skipped: Option<String>,
}

/// Rebuilds the records of a run directory from its time series and writes
/// `report.json` next to it.
pub fn report(run_dir: &Path) -> Result<RunReport, CliError> {
    let cfg_path = run_dir.join("config.txt");
    let csv_name = if cfg_path.exists() {
        parse_config(&read_text(&cfg_path)?)?.output.csv
    } else {
        config::OutputConfig::default().csv
    };
    let csv_path = run_dir.join(csv_name);
    let file = File::open(&csv_path).at(&csv_path)?;
    let rows = csv::read_timeseries(BufReader::new(file)).at(&csv_path)?;
    let series: Vec<DiagnosticsRecord> = rows.into_iter().map(|(_, r)| r).collect();
    let criterion = criterion_report(&series)?;

    // a shortened final step breaks the uniform-step requirement; drop it
    let uniform = |s: &[DiagnosticsRecord]| -> Vec<DiagnosticsRecord> {
        if s.len() >= 3 {
            let dt = s[1].t - s[0].t;
            let last = s[s.len() - 1].t - s[s.len() - 2].t;
            if (last - dt).abs() > 1e-6 * dt {
                return s[..s.len() - 1].to_vec();
            }
        }
        s.to_vec()
    };
    let trimmed = uniform(&series);
    let (lyapunov, lyapunov_skipped) = match lyapunov_dissipation_check(&trimmed) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (main_estimate, main_estimate_skipped) = match main_estimate_residual(&trimmed) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let m0 = series[0].mass_u;
    let m1 = series[series.len() - 1].mass_u;
    let rep = RunReport {
        schema: REPORT_SCHEMA,
        records: series.len(),
        final_t: criterion.final_t,
        mass_u_relative_drift: (m1 - m0).abs() / m0.abs().max(f64::MIN_POSITIVE),
        max_dissipation: series.iter().map(|r| r.dissipation).fold(0.0, f64::max),
        criterion,
        lyapunov,
        lyapunov_skipped,
        main_estimate,
        main_estimate_skipped,
    };
    write_json(&run_dir.join("report.json"), &rep)?;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &str) -> RunConfig {
        let text = format!(
            "seed = 3\n[grid]\ndim = 1\ncells = 16\n[solver]\ndt = 1e-3\nt_end = 5e-3\n\
             [initial_u]\npreset = constant\nvalue = 1\n[initial_v]\npreset = constant\nvalue = 1\n\
             [output]\ndirectory = {dir}\nsnapshot_stride = 2\n"
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let codes = [EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_BLOWUP, EXIT_FAULT, EXIT_VERIFY_FAILED];
        for (i, a) in codes.iter().enumerate() {
            for b in &codes[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::Solver(SolverError::Config("x".into())).exit_code(), EXIT_USAGE);
        assert_eq!(
            CliError::Solver(SolverError::NonFinite { what: "u" }).exit_code(),
            EXIT_FAULT
        );
    }

    #[test]
    fn constant_run_writes_every_artifact() {
        let root = tempfile::tempdir().unwrap();
        let cfg = tiny_config("c");
        let out = simulate(&cfg, root.path(), root.path()).unwrap();
        assert_eq!(out.exit_code(), EXIT_OK);
        let d = &out.run_dir;
        for f in ["config.txt", "timeseries.csv", "summary.json", "snapshots/final.snap"] {
            assert!(d.join(f).exists(), "{f}");
        }
        for k in [0, 2, 4] {
            assert!(d.join("snapshots").join(snapshot_name(k)).exists());
        }
        assert!(!d.join("snapshots").join(snapshot_name(1)).exists());
        let rep = report(d).unwrap();
        assert_eq!(rep.records, 6);
        assert_eq!(rep.max_dissipation, 0.0);
        assert!(d.join("report.json").exists());
    }

    #[test]
    fn unknown_case_lists_valid_ids() {
        let root = tempfile::tempdir().unwrap();
        let e = convergence("nope", root.path()).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        let msg = e.to_string();
        for id in convergence_cases() {
            assert!(msg.contains(id), "{msg}");
        }
    }
}
