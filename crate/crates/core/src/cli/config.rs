//! Run configuration: parsing, validation, canonical text and initial data.

use super::kv::{check_sections, fmt_f64, fmt_f64_list, fmt_list, lex, ConfigError, Section};
use super::snapshot;
use crate::grid::{integrate, Grid, ScalarField};
use crate::ineqlab::{SampleParams, TestFunctionSpec};
use crate::solver::{FluxScheme, SolverConfig, Taxis};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dim: usize,
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        Grid::new(&self.cells, &self.lengths).map_err(|e| ConfigError::new("grid", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Constant {
        value: f64,
    },
    /// `background + mass * g / int g` for the Gaussian `g` of the given width.
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        mass: f64,
        background: f64,
    },
    CosineSeries {
        base: f64,
        amplitude: f64,
        max_frequency: usize,
        /// Defaults to the run seed.
        seed: Option<u64>,
    },
    /// The matching field of a snapshot file.
    File {
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: String,
    /// Snapshot every this many steps; 0 writes only the initial and final states.
    pub snapshot_stride: usize,
    pub csv: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "run".into(),
            snapshot_stride: 0,
            csv: "timeseries.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub initial_u: InitialData,
    pub initial_v: InitialData,
    pub output: OutputConfig,
}

const SECTIONS: [&str; 6] = ["", "grid", "solver", "initial_u", "initial_v", "output"];

fn range(ok: bool, s: &Section, key: &str, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(s.path(key), msg))
    }
}

fn parse_grid(s: &mut Section) -> Result<GridConfig, ConfigError> {
    let dim_raw = s.required("dim")?;
    let dim: usize = s.parse("dim", dim_raw, "an integer")?;
    range((1..=3).contains(&dim), s, "dim", "must be 1, 2 or 3")?;
    s.required("cells")?;
    let mut cells: Vec<usize> = s.list("cells", "a positive integer")?.unwrap_or_default();
    if cells.len() == 1 {
        cells = vec![cells[0]; dim];
    }
    range(cells.len() == dim, s, "cells", "needs one entry or one per axis")?;
    range(
        cells.iter().all(|&c| c >= crate::grid::MIN_CELLS),
        s,
        "cells",
        "every axis needs at least 4 cells",
    )?;
    let mut lengths: Vec<f64> = s.list("lengths", "a number")?.unwrap_or_else(|| vec![1.0]);
    if lengths.len() == 1 {
        lengths = vec![lengths[0]; dim];
    }
    range(lengths.len() == dim, s, "lengths", "needs one entry or one per axis")?;
    range(
        lengths.iter().all(|&l| l > 0.0 && l.is_finite()),
        s,
        "lengths",
        "must be positive",
    )?;
    Ok(GridConfig { dim, cells, lengths })
}

fn parse_solver(s: &mut Section) -> Result<SolverConfig, ConfigError> {
    let d = SolverConfig::default();
    s.required("dt")?;
    s.required("t_end")?;
    let dt = s.f64("dt")?.unwrap_or(d.dt);
    range(dt > 0.0, s, "dt", "must be positive")?;
    let t_end = s.f64("t_end")?.unwrap_or(d.t_end);
    range(t_end > 0.0, s, "t_end", "must be positive")?;
    let taxis = match s.raw("sign") {
        None => d.taxis,
        Some(r) => {
            let v: i64 = s.parse("sign", r, "+1 or -1")?;
            Taxis::from_sign(v).ok_or_else(|| ConfigError::new(s.path("sign"), format!("must be 1 or -1, got {v}")))?
        }
    };
    let flux_scheme = match s.raw("flux_scheme") {
        None => d.flux_scheme,
        Some(r) => FluxScheme::from_name(r).ok_or_else(|| {
            ConfigError::new(
                s.path("flux_scheme"),
                format!("expected scharfetter_gummel or central_upwind, got `{r}`"),
            )
        })?,
    };
    let linear_tol = s.f64("linear_tol")?.unwrap_or(d.linear_tol);
    range(linear_tol > 0.0 && linear_tol < 1.0, s, "linear_tol", "must lie in (0, 1)")?;
    let blowup_threshold = s.f64("blowup_threshold")?.unwrap_or(d.blowup_threshold);
    range(blowup_threshold > 0.0, s, "blowup_threshold", "must be positive")?;
    let positivity_floor = s.f64("positivity_floor")?.unwrap_or(d.positivity_floor);
    range(
        positivity_floor > 0.0 && positivity_floor <= 1e-12,
        s,
        "positivity_floor",
        "must lie in (0, 1e-12]",
    )?;
    let max_substeps = s.usize("max_substeps")?.unwrap_or(d.max_substeps);
    range(max_substeps >= 1, s, "max_substeps", "must be at least 1")?;
    Ok(SolverConfig {
        dt,
        t_end,
        taxis,
        flux_scheme,
        linear_tol,
        blowup_threshold,
        positivity_floor,
        max_substeps,
    })
}

fn parse_initial(s: &mut Section, dim: usize) -> Result<InitialData, ConfigError> {
    let preset = s.required("preset")?;
    let data = match preset {
        "constant" => {
            let value = s.f64("value")?.ok_or_else(|| ConfigError::new(s.path("value"), "missing required key"))?;
            range(value >= 0.0, s, "value", "must be nonnegative")?;
            InitialData::Constant { value }
        }
        "gaussian_bump" => {
            let center: Vec<f64> = s.list("center", "a number")?.unwrap_or_else(|| vec![0.5; dim]);
            range(center.len() == dim, s, "center", "needs one entry per axis")?;
            let width = s.f64("width")?.unwrap_or(0.1);
            range(width > 0.0, s, "width", "must be positive")?;
            let mass = s.f64("mass")?.unwrap_or(1.0);
            range(mass >= 0.0, s, "mass", "must be nonnegative")?;
            let background = s.f64("background")?.unwrap_or(0.0);
            range(background >= 0.0, s, "background", "must be nonnegative")?;
            InitialData::GaussianBump {
                center,
                width,
                mass,
                background,
            }
        }
        "cosine_series" => {
            let base = s.f64("base")?.unwrap_or(1.0);
            range(base > 0.0, s, "base", "must be positive")?;
            let amplitude = s.f64("amplitude")?.unwrap_or(0.5);
            range((0.0..1.0).contains(&amplitude), s, "amplitude", "must lie in [0, 1)")?;
            let max_frequency = s.usize("max_frequency")?.unwrap_or(2);
            range(max_frequency >= 1, s, "max_frequency", "must be at least 1")?;
            let seed = match s.raw("seed") {
                None => None,
                Some(r) => Some(s.parse("seed", r, "a nonnegative integer")?),
            };
            InitialData::CosineSeries {
                base,
                amplitude,
                max_frequency,
                seed,
            }
        }
        "file" => InitialData::File {
            path: s.required("path")?.to_string(),
        },
        other => {
            return Err(ConfigError::new(
                s.path("preset"),
                format!("expected constant, gaussian_bump, cosine_series or file, got `{other}`"),
            ))
        }
    };
    Ok(data)
}

fn parse_output(s: &mut Section) -> Result<OutputConfig, ConfigError> {
    let d = OutputConfig::default();
    let directory = s.raw("directory").map_or(d.directory, str::to_string);
    range(!directory.is_empty(), s, "directory", "must not be empty")?;
    let snapshot_stride = s.usize("snapshot_stride")?.unwrap_or(d.snapshot_stride);
    let csv = s.raw("csv").map_or(d.csv, str::to_string);
    range(!csv.is_empty() && !csv.contains('/'), s, "csv", "must be a plain file name")?;
    Ok(OutputConfig {
        directory,
        snapshot_stride,
        csv,
    })
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let entries = lex(text)?;
    check_sections(&entries, &SECTIONS)?;
    let mut top = Section::new("", &entries);
    let seed = match top.raw("seed") {
        None => 0,
        Some(r) => top.parse("seed", r, "a nonnegative integer")?,
    };
    top.finish()?;
    let mut g = Section::new("grid", &entries);
    let grid = parse_grid(&mut g)?;
    g.finish()?;
    let mut s = Section::new("solver", &entries);
    let solver = parse_solver(&mut s)?;
    s.finish()?;
    let mut iu = Section::new("initial_u", &entries);
    let initial_u = parse_initial(&mut iu, grid.dim)?;
    iu.finish()?;
    let mut iv = Section::new("initial_v", &entries);
    let initial_v = parse_initial(&mut iv, grid.dim)?;
    iv.finish()?;
    let mut o = Section::new("output", &entries);
    let output = parse_output(&mut o)?;
    o.finish()?;
    Ok(RunConfig {
        seed,
        grid,
        solver,
        initial_u,
        initial_v,
        output,
    })
}

fn initial_text(out: &mut String, name: &str, d: &InitialData) {
    out.push_str(&format!("\n[{name}]\n"));
    match d {
        InitialData::Constant { value } => {
            out.push_str(&format!("preset = constant\nvalue = {}\n", fmt_f64(*value)));
        }
        InitialData::GaussianBump {
            center,
            width,
            mass,
            background,
        } => out.push_str(&format!(
            "preset = gaussian_bump\ncenter = {}\nwidth = {}\nmass = {}\nbackground = {}\n",
            fmt_f64_list(center),
            fmt_f64(*width),
            fmt_f64(*mass),
            fmt_f64(*background)
        )),
        InitialData::CosineSeries {
            base,
            amplitude,
            max_frequency,
            seed,
        } => {
            out.push_str(&format!(
                "preset = cosine_series\nbase = {}\namplitude = {}\nmax_frequency = {max_frequency}\n",
                fmt_f64(*base),
                fmt_f64(*amplitude)
            ));
            if let Some(s) = seed {
                out.push_str(&format!("seed = {s}\n"));
            }
        }
        InitialData::File { path } => out.push_str(&format!("preset = file\npath = \"{path}\"\n")),
    }
}

impl RunConfig {
    /// Canonical text form; [`parse_config`] reads it back to an equal value.
    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let mut out = format!("seed = {}\n", self.seed);
        out.push_str(&format!(
            "\n[grid]\ndim = {}\ncells = {}\nlengths = {}\n",
            self.grid.dim,
            fmt_list(&self.grid.cells),
            fmt_f64_list(&self.grid.lengths)
        ));
        out.push_str(&format!(
            "\n[solver]\ndt = {}\nt_end = {}\nsign = {}\nflux_scheme = {}\nlinear_tol = {}\n\
             blowup_threshold = {}\npositivity_floor = {}\nmax_substeps = {}\n",
            fmt_f64(s.dt),
            fmt_f64(s.t_end),
            s.taxis.sign() as i64,
            s.flux_scheme.name(),
            fmt_f64(s.linear_tol),
            fmt_f64(s.blowup_threshold),
            fmt_f64(s.positivity_floor),
            s.max_substeps
        ));
        initial_text(&mut out, "initial_u", &self.initial_u);
        initial_text(&mut out, "initial_v", &self.initial_v);
        out.push_str(&format!(
            "\n[output]\ndirectory = \"{}\"\nsnapshot_stride = {}\ncsv = \"{}\"\n",
            self.output.directory, self.output.snapshot_stride, self.output.csv
        ));
        out
    }
}

/// Which field of a snapshot a `file` preset reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSlot {
    U,
    V,
}

/// Samples an initial field. Relative snapshot paths resolve against `base_dir`.
pub fn build_initial(
    data: &InitialData,
    grid: Grid,
    run_seed: u64,
    slot: FieldSlot,
    base_dir: &Path,
) -> Result<ScalarField, super::CliError> {
    let field = match data {
        InitialData::Constant { value } => ScalarField::constant(grid, *value),
        InitialData::GaussianBump {
            center,
            width,
            mass,
            background,
        } => {
            let shape = ScalarField::from_fn(grid, |x| {
                let r2: f64 = (0..grid.dim()).map(|j| (x[j] - center[j]).powi(2)).sum();
                (-r2 / (2.0 * width * width)).exp()
            });
            let total = integrate(&shape)?;
            if !(total > 0.0) {
                return Err(ConfigError::new("gaussian_bump", "bump has no mass on the grid").into());
            }
            shape.map(|g| background + mass * g / total)
        }
        InitialData::CosineSeries {
            base,
            amplitude,
            max_frequency,
            seed,
        } => {
            let params = SampleParams {
                max_frequency: *max_frequency,
                amplitude: *amplitude,
                base: *base,
            };
            TestFunctionSpec::sample(grid, params, seed.unwrap_or(run_seed)).field()
        }
        InitialData::File { path } => {
            let p = PathBuf::from(path);
            let p = if p.is_absolute() { p } else { base_dir.join(p) };
            let snap = snapshot::read_snapshot(&p)?;
            if *snap.u.grid() != grid {
                return Err(ConfigError::new(
                    "preset.path",
                    format!("snapshot {} was written on a different grid", p.display()),
                )
                .into());
            }
            match slot {
                FieldSlot::U => snap.u,
                FieldSlot::V => snap.v,
            }
        }
    };
    field.check_finite()?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\ndim = 1\ncells = 32\n[solver]\ndt = 1e-3\nt_end = 0.5\n\
        [initial_u]\npreset = constant\nvalue = 1\n[initial_v]\npreset = constant\nvalue = 2\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.grid.lengths, vec![1.0]);
        assert_eq!(c.solver.taxis, Taxis::Repulsion);
        assert_eq!(c.solver.blowup_threshold, 1e8);
        assert_eq!(c.output, OutputConfig::default());
    }

    #[test]
    fn errors_name_the_key() {
        let bad = MINIMAL.replace("t_end = 0.5", "t_end = 0.5\nsign = 0");
        assert_eq!(parse_config(&bad).unwrap_err().at, "solver.sign");
        let bad = MINIMAL.replace("dt = 1e-3", "dt = fast");
        assert_eq!(parse_config(&bad).unwrap_err().at, "solver.dt");
        let bad = MINIMAL.replace("dt = 1e-3\n", "");
        assert_eq!(parse_config(&bad).unwrap_err().at, "solver.dt");
        let bad = MINIMAL.replace("cells = 32", "cells = 32\ncels = 3");
        assert_eq!(parse_config(&bad).unwrap_err().at, "grid.cels");
        let bad = MINIMAL.replace("dim = 1", "dim = 4");
        assert_eq!(parse_config(&bad).unwrap_err().at, "grid.dim");
        let bad = format!("{MINIMAL}[extra]\na = 1\n");
        assert_eq!(parse_config(&bad).unwrap_err().at, "extra");
        let bad = MINIMAL.replace("preset = constant\nvalue = 2", "preset = blob");
        assert_eq!(parse_config(&bad).unwrap_err().at, "initial_v.preset");
    }

    #[test]
    fn canonical_text_roundtrips() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn gaussian_bump_carries_requested_mass() {
        let g = Grid::unit(2, 32).unwrap();
        let d = InitialData::GaussianBump {
            center: vec![0.3, 0.6],
            width: 0.1,
            mass: 3.0,
            background: 0.5,
        };
        let f = build_initial(&d, g, 0, FieldSlot::U, Path::new(".")).unwrap();
        assert!((integrate(&f).unwrap() - 3.5).abs() < 1e-12);
    }
}
