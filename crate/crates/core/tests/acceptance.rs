//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use chemorep::cli;
use chemorep::diagnostics::{
    lyapunov_dissipation_check, main_estimate_residual, DiagnosticsConfig,
    DiagnosticsRecord, Tracker,
};
use chemorep::grid::{Grid, ScalarField};
use chemorep::ineqlab::{
    appendix_a_constant, appendix_a_pointwise_counterexample, bernis_terms, bochner_refinement,
    bochner_residual, boundary_sign_check, run_batch, winkler_constant, BatchSpec, BernisTerms,
    Check, SampleParams, TestFunctionSpec, APPENDIX_A_SLACK, WINKLER_SLACK,
};
use chemorep::par;
use chemorep::solver::{
    manufactured_convergence, run, ManufacturedCase, SolverConfig, State, Taxis, Termination,
};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(budget_s: u64, t: Instant) -> (bool, String) {
    let e = t.elapsed();
    (e <= Duration::from_secs(budget_s), format!("{:.1}s/{budget_s}s", e.as_secs_f64()))
}

fn track(s0: State, cfg: &SolverConfig) -> (Termination, Vec<DiagnosticsRecord>) {
    let mut tr = Tracker::new(DiagnosticsConfig::for_solver(cfg));
    let r = run(s0, cfg, |s| {
        tr.observe(s)?;
        Ok(())
    })
    .expect("run completes");
    (r.termination, tr.records)
}

fn max_by(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(f64::NEG_INFINITY, f64::max)
}

// ------------------------------------------------------------- 1 and 2

struct MassRun {
    records: Vec<DiagnosticsRecord>,
    dt: f64,
    wall: Duration,
}

fn mass_run() -> &'static MassRun {
    static RUN: OnceLock<MassRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let g = Grid::unit(3, 32).unwrap();
        let u0 = ScalarField::from_fn(g, |x| {
            1.0 + 0.3 * (PI * x[0]).cos() * (PI * x[1]).cos() * (PI * x[2]).cos()
        });
        let v0 = ScalarField::from_fn(g, |x| 2.0 + 0.5 * (PI * x[0]).cos());
        let cfg = SolverConfig {
            dt: 1e-2,
            t_end: 1.0,
            ..SolverConfig::default()
        };
        let (_, records) = track(State::new(u0, v0, 0.0).unwrap(), &cfg);
        MassRun {
            records,
            dt: cfg.dt,
            wall: start.elapsed(),
        }
    })
}

fn c1_mass_conservation() -> Outcome {
    let r = mass_run();
    let m0 = r.records[0].mass_u;
    let drift = max_by(r.records.iter().map(|x| (x.mass_u - m0).abs() / m0));
    let ok_time = r.wall <= Duration::from_secs(60);
    ensure(
        drift <= 1e-10 && ok_time && (r.records.last().unwrap().t - 1.0).abs() < 1e-12,
        format!(
            "3D 32^3 to t=1: max relative drift {drift:.2e} (<= 1e-10), {:.1}s/60s",
            r.wall.as_secs_f64()
        ),
    )
}

fn c2_v_mass_law() -> Outcome {
    let r = mass_run();
    let (mu, mv) = (r.records[0].mass_u, r.records[0].mass_v);
    let dev = max_by(r.records.iter().map(|x| (x.mass_v - ((-x.t).exp() + 1.0)).abs()));
    ensure(
        (mu - 1.0).abs() < 1e-12 && (mv - 2.0).abs() < 1e-12 && dev <= 5.0 * r.dt,
        format!("int u0 = {mu:.12}, int v0 = {mv:.12}; max |mass_v - (e^-t + 1)| = {dev:.2e} (<= {:.1e})", 5.0 * r.dt),
    )
}

// ------------------------------------------------------------------ 3

fn lyapunov_run(dt: f64) -> Vec<DiagnosticsRecord> {
    let g = Grid::unit(1, 128).unwrap();
    let u0 = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
    let v0 = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos());
    let cfg = SolverConfig {
        dt,
        t_end: 0.02,
        ..SolverConfig::default()
    };
    track(State::new(u0, v0, 0.0).unwrap(), &cfg).1
}

fn c3_lyapunov() -> Outcome {
    let t = Instant::now();
    let a = lyapunov_dissipation_check(&lyapunov_run(1e-4)).map_err(|e| e.to_string())?;
    let b = lyapunov_dissipation_check(&lyapunov_run(5e-5)).map_err(|e| e.to_string())?;
    let order = (a.max_abs_residual / b.max_abs_residual).log2();
    let (ok_t, time) = within(120, t);
    ensure(
        a.monotone && b.monotone && order >= 0.9 && ok_t,
        format!(
            "1D h=1/128: monotone {}/{} (max rise {:.1e}, {:.1e}; tol {:.1e}); max |dL/dt + D| {:.3e} -> {:.3e}, order {order:.3} (>= 0.9), {time}",
            a.monotone, b.monotone, a.max_increase, b.max_increase, a.monotonicity_tolerance,
            a.max_abs_residual, b.max_abs_residual
        ),
    )
}

// ------------------------------------------------------------- 4 and 5

const INEQ_SAMPLES: usize = 100;

/// Bernis terms of the 100 default samples per dimension at h = 1/128.
fn fine_terms() -> &'static Vec<Vec<BernisTerms>> {
    static TERMS: OnceLock<Vec<Vec<BernisTerms>>> = OnceLock::new();
    TERMS.get_or_init(|| {
        (1..=3)
            .map(|dim| {
                let g = Grid::unit(dim, 128).unwrap();
                let p = SampleParams::default_for(dim);
                par::map_indexed(INEQ_SAMPLES, |s| {
                    bernis_terms(&TestFunctionSpec::sample(g, p, s as u64).field()).unwrap()
                })
            })
            .collect()
    })
}

fn coarse_batch(check: Check) -> Result<Vec<chemorep::ineqlab::BatchRow>, String> {
    run_batch(&BatchSpec {
        checks: vec![check],
        dims: vec![1, 2, 3],
        samples: INEQ_SAMPLES,
        cells: 64,
        seed: 0,
        constant_scale: 1.0,
    })
    .map_err(|e| e.to_string())
}

fn refinement_lines(
    check: Check,
    pick: fn(&BernisTerms) -> f64,
    constant: fn(usize) -> f64,
    slack: f64,
) -> Outcome {
    let rows = coarse_batch(check)?;
    let fine = fine_terms();
    let mut ok = true;
    let mut parts = Vec::new();
    for dim in 1..=3 {
        let group: Vec<_> = rows.iter().filter(|r| r.n == dim).collect();
        let coarse = max_by(group.iter().map(|r| r.ratio));
        let passes = group.iter().filter(|r| r.pass).count();
        let fine_max = max_by(fine[dim - 1].iter().map(pick));
        let bound = constant(dim) + slack;
        ok &= passes == INEQ_SAMPLES && fine_max <= coarse + 1e-3;
        parts.push(format!(
            "n={dim}: {passes}/{INEQ_SAMPLES} <= {bound:.4}, max {coarse:.4} (1/64) {fine_max:.4} (1/128)"
        ));
    }
    ensure(ok, parts.join("; "))
}

fn c4_winkler() -> Outcome {
    let t = Instant::now();
    let r = refinement_lines(
        Check::Winkler,
        |b| b.grad4_over_phi3 / b.phi_hess_log_sq,
        winkler_constant,
        WINKLER_SLACK,
    );
    let (ok_t, time) = within(180, t);
    match r {
        Ok(s) if ok_t => Ok(format!("{s}; {time}")),
        Ok(s) | Err(s) => Err(format!("{s}; {time}")),
    }
}

fn c5_appendix_a() -> Outcome {
    let batch = refinement_lines(
        Check::AppendixA,
        |b| b.hess_sqrt_sq / b.phi_hess_log_sq,
        appendix_a_constant,
        APPENDIX_A_SLACK,
    );
    let rep = appendix_a_pointwise_counterexample();
    let q: Vec<f64> = rep.perturbed.iter().map(|p| p.quotient).collect();
    let demo = rep.max_denominator <= 1e-20
        && rep.min_numerator > 0.0
        && q.windows(2).all(|w| w[1] > w[0]);
    let demo_line = format!(
        "u = e^x: max pointwise denominator {:.1e}, min numerator {:.3e}, perturbed quotients {:?}",
        rep.max_denominator,
        rep.min_numerator,
        q.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()
    );
    match batch {
        Ok(s) if demo => Ok(format!("{s}; {demo_line}")),
        Ok(s) | Err(s) => Err(format!("{s}; {demo_line}")),
    }
}

// ------------------------------------------------------------------ 6

fn c6_bochner() -> Outcome {
    let quad = [
        (Grid::unit(1, 32).unwrap(), (|x: [f64; 3]| x[0] * x[0]) as fn([f64; 3]) -> f64),
        (Grid::unit(2, 32).unwrap(), |x| x[0] * x[0] + x[0] * x[1] + 3.0 * x[1] * x[1]),
        (Grid::unit(3, 16).unwrap(), |x| x[0] * x[0] - 2.0 * x[1] * x[2] + x[2] * x[2]),
    ];
    let zero: Vec<f64> = quad
        .iter()
        .map(|(g, f)| bochner_residual(&ScalarField::from_fn(*g, |x| f(x))).unwrap())
        .collect();
    let study = bochner_refinement(1, cli::BOCHNER_PARAMS, cli::BOCHNER_SEED, &cli::BOCHNER_CELLS)
        .map_err(|e| e.to_string())?;
    let multi = bochner_refinement(2, SampleParams::default_for(2), 0, &cli::BOCHNER_CELLS)
        .map_err(|e| e.to_string())?;
    ensure(
        zero.iter().all(|&z| z == 0.0) && study.fitted_order >= 1.9,
        format!(
            "quadratics {zero:?}; 1D K=1 residuals {:?}, fitted order {:.3} (>= 1.9); 2D K=3 pair orders {:?} (reported)",
            study.residual.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>(),
            study.fitted_order,
            multi.pair_orders.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>()
        ),
    )
}

// ------------------------------------------------------------------ 7

fn c7_boundary_sign() -> Outcome {
    const SAMPLES: usize = 50;
    let mut ok = true;
    let mut parts = Vec::new();
    for dim in 1..=3 {
        let p = SampleParams::default_for(dim);
        let level = |n: usize| -> Vec<f64> {
            let g = Grid::unit(dim, n).unwrap();
            par::map_indexed(SAMPLES, |s| {
                boundary_sign_check(&TestFunctionSpec::sample(g, p, s as u64).field()).unwrap()
            })
        };
        let (m32, m64, m128) = (level(32), level(64), level(128));
        let c = max_by(m32.iter().copied()).max(0.0) * 32.0 * 32.0;
        let bound = c / (64.0 * 64.0);
        let under = m64.iter().filter(|&&m| m <= bound).count();
        let shrink = (0..SAMPLES).filter(|&s| m64[s] < m32[s].max(0.0) || m64[s] <= 0.0).count();
        let (b64, b128) = (max_by(m64.iter().copied()), max_by(m128.iter().copied()));
        ok &= under == SAMPLES && shrink == SAMPLES && b128 < b64.max(0.0) + f64::MIN_POSITIVE;
        parts.push(format!(
            "n={dim}: C={c:.3e}, {under}/{SAMPLES} <= C h^2 at 1/64, {shrink}/{SAMPLES} shrink, batch max {:.2e} -> {b64:.2e} -> {b128:.2e}",
            max_by(m32.iter().copied())
        ));
    }
    ensure(ok, parts.join("; "))
}

// ------------------------------------------------------------------ 8

fn slack_run(n: usize, dt: f64) -> Result<f64, String> {
    let g = Grid::unit(2, n).unwrap();
    let u0 = ScalarField::from_fn(g, |x| 1.0 + 0.3 * (PI * x[0]).cos() * (PI * x[1]).cos());
    let v0 = ScalarField::from_fn(g, |x| 1.0 + 0.2 * (PI * x[0]).cos());
    let cfg = SolverConfig {
        dt,
        t_end: 0.1,
        taxis: Taxis::Repulsion,
        ..SolverConfig::default()
    };
    let rep = main_estimate_residual(&track(State::new(u0, v0, 0.0).unwrap(), &cfg).1)
        .map_err(|e| e.to_string())?;
    Ok(rep.max_abs_slack)
}

fn c8_main_estimate() -> Outcome {
    let eps = [slack_run(32, 1e-3)?, slack_run(64, 5e-4)?, slack_run(128, 2.5e-4)?];
    let g = Grid::unit(2, 32).unwrap();
    let c = ScalarField::constant(g, 1.5);
    let cfg = SolverConfig {
        dt: 1e-2,
        t_end: 0.2,
        ..SolverConfig::default()
    };
    let rep = main_estimate_residual(&track(State::new(c.clone(), c, 0.0).unwrap(), &cfg).1)
        .map_err(|e| e.to_string())?;
    let steady_zero = rep.slack.iter().all(|&s| s == 0.0);
    ensure(
        eps[1] < eps[0] && eps[2] < eps[1] && steady_zero,
        format!(
            "2D repulsion eps = max|slack| {:.3e} -> {:.3e} -> {:.3e} under (h, dt) halving; constant state slack identically 0: {steady_zero}",
            eps[0], eps[1], eps[2]
        ),
    )
}

// ------------------------------------------------------------------ 9

fn c9_holder() -> Outcome {
    let rows = run_batch(&BatchSpec {
        checks: vec![Check::HolderChain],
        dims: vec![3],
        samples: 100,
        cells: 32,
        seed: 0,
        constant_scale: 1.0,
    })
    .map_err(|e| e.to_string())?;
    let worst = max_by(rows.iter().map(|r| r.ratio));
    let held = rows.iter().filter(|r| r.lhs <= r.rhs * (1.0 + 1e-8) && !r.anomaly).count();
    ensure(
        held == 100,
        format!("3D 32^3: {held}/100 pairs with LHS <= RHS (1 + 1e-8), worst LHS/RHS {worst:.6}"),
    )
}

// ----------------------------------------------------------------- 10

fn c10_accumulators() -> Outcome {
    let g = Grid::unit(2, 16).unwrap();
    let c = 2.0;
    let f = ScalarField::constant(g, c);
    let cfg = SolverConfig {
        dt: 1e-2,
        t_end: 1.0,
        ..SolverConfig::default()
    };
    let (_, recs) = track(State::new(f.clone(), f, 0.0).unwrap(), &cfg);
    let last = recs.last().unwrap();
    let ok_const = last.crit_theorem1.abs() <= 1e-10 && (last.crit_appendix_b - c * c * cfg.t_end).abs() <= 1e-10;

    let text = std::fs::read_to_string(configs().join("stress-3d.txt")).map_err(|e| e.to_string())?;
    let stress = cli::parse_config(&text).map_err(|e| e.to_string())?;
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = cli::simulate(&stress, &configs(), root.path()).map_err(|e| e.to_string())?;
    let s = &out.summary;
    let crit = s.criterion.as_ref().ok_or("stress run has no criterion report")?;
    let ok_stress = s.exit_code == cli::EXIT_BLOWUP
        && crit.growth_theorem1.accelerating()
        && crit.growth_appendix_b.accelerating()
        && crit.blowup_fingerprint;
    ensure(
        ok_const && ok_stress,
        format!(
            "constant c=2, T=1: crit_theorem1 {:.1e}, crit_appendixB - c^2 T {:.1e}; stress: {} (exit {}) at t={:?}, growth theorem1 {:.2e} -> {:.2e}, appendixB {:.2e} -> {:.2e}",
            last.crit_theorem1,
            last.crit_appendix_b - c * c * cfg.t_end,
            s.termination,
            s.exit_code,
            s.blowup_t,
            crit.growth_theorem1.first,
            crit.growth_theorem1.last,
            crit.growth_appendix_b.first,
            crit.growth_appendix_b.last
        ),
    )
}

// ----------------------------------------------------------------- 11

fn c11_manufactured() -> Outcome {
    let t = Instant::now();
    let r = manufactured_convergence(ManufacturedCase::Cosine1d).map_err(|e| e.to_string())?;
    let c = manufactured_convergence(ManufacturedCase::Constant1d).map_err(|e| e.to_string())?;
    let space = r.space_orders_u.iter().chain(&r.space_orders_v).copied().fold(f64::INFINITY, f64::min);
    let time = r.time_orders_u.iter().chain(&r.time_orders_v).copied().fold(f64::INFINITY, f64::min);
    let exact = c.space.iter().chain(&c.time).all(|l| l.err_u < 1e-12 && l.err_v < 1e-12);
    let (ok_t, elapsed) = within(120, t);
    ensure(
        space >= 1.9 && time >= 0.9 && exact && ok_t,
        format!(
            "cosine-1d: min spatial order {space:.3} (>= 1.9), min temporal order {time:.3} (>= 0.9); constant-1d exact: {exact}; {elapsed}"
        ),
    )
}

// ----------------------------------------------------------------- 12

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn snapshot_of_run(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_chemorep"))
        .arg("simulate")
        .arg(configs().join("smooth-2d.txt"))
        .env(cli::OUTPUT_ROOT_VAR, root)
        .env("RAYON_NUM_THREADS", "1")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("simulate exited with {:?}", out.status.code()));
    }
    let dir = root.join("smooth-2d");
    let mut files = vec![("timeseries.csv".to_string(), std::fs::read(dir.join("timeseries.csv")).map_err(|e| e.to_string())?)];
    let mut snaps: Vec<_> = std::fs::read_dir(dir.join("snapshots"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    snaps.sort();
    for p in snaps {
        files.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
    }
    Ok(files)
}

fn c12_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fa = snapshot_of_run(a.path())?;
    let fb = snapshot_of_run(b.path())?;
    let bytes: usize = fa.iter().map(|f| f.1.len()).sum();
    ensure(
        fa == fb && fa.len() > 1,
        format!("two single-worker smooth-2d runs: {} files, {bytes} bytes, identical: {}", fa.len(), fa == fb),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("mass conservation", c1_mass_conservation),
        ("v-mass law", c2_v_mass_law),
        ("Lyapunov monotonicity and dissipation identity", c3_lyapunov),
        ("Winkler inequality", c4_winkler),
        ("Appendix A inequality", c5_appendix_a),
        ("Bochner identity", c6_bochner),
        ("convex boundary sign", c7_boundary_sign),
        ("main estimate slack", c8_main_estimate),
        ("Holder chain", c9_holder),
        ("criterion accumulators", c10_accumulators),
        ("manufactured convergence", c11_manufactured),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match r {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(out, "criterion {:>2} {tag} {name} [{:.1}s]: {detail}", k + 1, t.elapsed().as_secs_f64()).unwrap();
        out.flush().unwrap();
    }
    writeln!(out, "acceptance: {} of 12 criteria passed", 12 - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
