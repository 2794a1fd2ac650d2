use chemorep::cli::config::{GridConfig, OutputConfig};
use chemorep::cli::{self, parse_config, InitialData, RunConfig};
use chemorep::solver::{FluxScheme, SolverConfig, Taxis};
use proptest::prelude::*;
use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_chemorep");

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn chemorep(root: &Path, threads: Option<usize>, args: &[&str]) -> (u8, String) {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env(cli::OUTPUT_ROOT_VAR, root);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    let out = cmd.output().expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().expect("exit code") as u8, text)
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = configs().join("smooth-2d.txt");
    let cfg = cfg.to_str().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert_eq!(chemorep(a.path(), Some(1), &["simulate", cfg]).0, 0);
    assert_eq!(chemorep(b.path(), Some(1), &["simulate", cfg]).0, 0);
    // the reductions use fixed chunks, so a full pool gives the same bytes too
    assert_eq!(chemorep(c.path(), None, &["simulate", cfg]).0, 0);
    let fa = files_under(a.path());
    assert!(fa.iter().any(|(n, _)| n.ends_with("timeseries.csv")));
    assert!(fa.iter().filter(|(n, _)| n.ends_with(".snap")).count() >= 6);
    assert_eq!(fa, files_under(b.path()));
    assert_eq!(fa, files_under(c.path()));
}

#[test]
fn constant_run_has_zero_dissipation_column() {
    let root = tempfile::tempdir().unwrap();
    let (code, _) = chemorep(root.path(), None, &["simulate", configs().join("constant-1d.txt").to_str().unwrap()]);
    assert_eq!(code, cli::EXIT_OK);
    let text = fs::read_to_string(root.path().join("constant-1d/timeseries.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.join(","), cli::csv::timeseries_header());
    let col = header.iter().position(|h| *h == "dissipation").unwrap();
    let mut rows = 0;
    for l in lines {
        assert_eq!(l.split(',').nth(col).unwrap().parse::<f64>().unwrap(), 0.0);
        rows += 1;
    }
    assert_eq!(rows, 101);
}

#[test]
fn stress_run_reports_blow_up() {
    let root = tempfile::tempdir().unwrap();
    let (code, text) = chemorep(root.path(), None, &["simulate", configs().join("stress-3d.txt").to_str().unwrap()]);
    assert_eq!(code, cli::EXIT_BLOWUP, "{text}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.path().join("stress-3d/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["termination"], "blow_up");
    let t = summary["blowup_t"].as_f64().unwrap();
    assert!(t > 0.0 && t < 0.5);
    assert_eq!(summary["criterion"]["blowup_fingerprint"], true);
}

#[test]
fn verify_exit_codes() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let (code, text) = chemorep(r, None, &["verify", configs().join("winkler-1d.txt").to_str().unwrap()]);
    assert_eq!(code, cli::EXIT_OK, "{text}");
    let csv = fs::read_to_string(r.join("batch.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), cli::csv::BATCH_HEADER);
    assert_eq!(csv.lines().count(), 11);

    let a = configs().join("appendixA.txt");
    let a = a.to_str().unwrap();
    assert_eq!(chemorep(r, None, &["verify", a]).0, cli::EXIT_OK);
    let (code, _) = chemorep(r, None, &["verify", a, "--constant-scale", "0.1"]);
    assert_eq!(code, cli::EXIT_VERIFY_FAILED);
    let csv = fs::read_to_string(r.join("appendixA.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.split(',').nth(8) == Some("false")));

    let empty = r.join("empty.txt");
    fs::write(&empty, "checks = winkler\ndims = 1\nsamples = 0\n").unwrap();
    let (code, text) = chemorep(r, None, &["verify", empty.to_str().unwrap()]);
    assert_eq!(code, cli::EXIT_USAGE);
    assert!(text.contains("samples"), "{text}");
}

#[test]
fn usage_and_io_errors() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let (code, text) = chemorep(r, None, &["convergence", "nope"]);
    assert_eq!(code, cli::EXIT_USAGE);
    assert!(text.contains("bochner") && text.contains("cosine-1d"), "{text}");
    assert_eq!(chemorep(r, None, &["frobnicate"]).0, cli::EXIT_USAGE);
    let (code, _) = chemorep(r, None, &["simulate", r.join("missing.txt").to_str().unwrap()]);
    assert_eq!(code, cli::EXIT_IO);
    let bad = r.join("bad.txt");
    fs::write(&bad, "[grid]\ndim = 1\ncells = 8\n[solver]\ndt = 1e-3\nt_end = 1\nsign = 0\n").unwrap();
    let (code, text) = chemorep(r, None, &["simulate", bad.to_str().unwrap()]);
    assert_eq!(code, cli::EXIT_USAGE);
    assert!(text.contains("solver.sign"), "{text}");
}

#[test]
fn report_and_file_preset_restart_from_snapshot() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    assert_eq!(chemorep(r, None, &["simulate", configs().join("smooth-2d.txt").to_str().unwrap()]).0, 0);
    let (code, text) = chemorep(r, None, &["report", r.join("smooth-2d").to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(r.join("smooth-2d/report.json")).unwrap()).unwrap();
    assert_eq!(rep["records"], 101);
    assert_eq!(rep["lyapunov"]["monotone"], true);

    let snap = r.join("smooth-2d/snapshots/final.snap");
    let cfg = format!(
        "[grid]\ndim = 2\ncells = 48\n[solver]\ndt = 5e-4\nt_end = 1e-3\n\
         [initial_u]\npreset = file\npath = \"{p}\"\n[initial_v]\npreset = file\npath = \"{p}\"\n\
         [output]\ndirectory = restart\n",
        p = snap.display()
    );
    let cfg_path = r.join("restart.txt");
    fs::write(&cfg_path, cfg).unwrap();
    assert_eq!(chemorep(r, None, &["simulate", cfg_path.to_str().unwrap()]).0, 0);
    let first = cli::snapshot::read_snapshot(&r.join("restart/snapshots/final.snap")).unwrap();
    let src = cli::snapshot::read_snapshot(&snap).unwrap();
    assert_eq!(first.u.grid(), src.u.grid());
}

fn positive() -> impl Strategy<Value = f64> {
    (1e-6f64..1e6).prop_map(|x| x)
}

fn initial(dim: usize) -> impl Strategy<Value = InitialData> {
    prop_oneof![
        (0.0f64..10.0).prop_map(|value| InitialData::Constant { value }),
        (
            prop::collection::vec(0.0f64..1.0, dim),
            positive(),
            0.0f64..100.0,
            0.0f64..5.0
        )
            .prop_map(|(center, width, mass, background)| InitialData::GaussianBump {
                center,
                width,
                mass,
                background
            }),
        (positive(), 0.0f64..0.999, 1usize..6, prop::option::of(any::<u64>())).prop_map(
            |(base, amplitude, max_frequency, seed)| InitialData::CosineSeries {
                base,
                amplitude,
                max_frequency,
                seed
            }
        ),
        "[a-z0-9_./-]{1,20}".prop_map(|path| InitialData::File { path }),
    ]
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (1usize..=3).prop_flat_map(|dim| {
        let grid = (
            prop::collection::vec(4usize..200, dim),
            prop::collection::vec(positive(), dim),
        )
            .prop_map(move |(cells, lengths)| GridConfig { dim, cells, lengths });
        let solver = (
            positive(),
            positive(),
            any::<bool>(),
            any::<bool>(),
            1e-15f64..0.5,
            positive(),
            1e-20f64..1e-12,
            1usize..1_000_000,
        )
            .prop_map(|(dt, t_end, rep, sg, linear_tol, blowup_threshold, positivity_floor, max_substeps)| {
                SolverConfig {
                    dt,
                    t_end,
                    taxis: if rep { Taxis::Repulsion } else { Taxis::Attraction },
                    flux_scheme: if sg { FluxScheme::ScharfetterGummel } else { FluxScheme::CentralUpwind },
                    linear_tol,
                    blowup_threshold,
                    positivity_floor,
                    max_substeps,
                }
            });
        let output = ("[a-z][a-z0-9_-]{0,12}", 0usize..1000, "[a-z][a-z0-9_.-]{0,12}").prop_map(
            |(directory, snapshot_stride, csv)| OutputConfig {
                directory,
                snapshot_stride,
                csv,
            },
        );
        (any::<u64>(), grid, solver, initial(dim), initial(dim), output).prop_map(
            |(seed, grid, solver, initial_u, initial_v, output)| RunConfig {
                seed,
                grid,
                solver,
                initial_u,
                initial_v,
                output,
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn canonical_text_reparses_to_equal_config(cfg in run_config()) {
        let text = cfg.to_text();
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), text);
    }
}
