//! Batch specification for `verify`.

use super::kv::{check_sections, lex, ConfigError, Section};
use crate::ineqlab::{BatchSpec, Check};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub batch: BatchSpec,
    /// CSV file name under the output root.
    pub csv: String,
}

/// Parses top-level `checks`, `dims`, `samples`, `cells`, `seed`, and the
/// optional `constant_scale` and `csv`.
pub fn parse_batch_spec(text: &str) -> Result<VerifyConfig, ConfigError> {
    let entries = lex(text)?;
    check_sections(&entries, &[""])?;
    let mut s = Section::new("", &entries);
    s.required("checks")?;
    let names: Vec<String> = s.list("checks", "a check name")?.unwrap_or_default();
    let checks = names
        .iter()
        .map(|n| {
            Check::from_name(n).ok_or_else(|| {
                ConfigError::new("checks", format!("unknown check `{n}` (valid: winkler, appendixA, holder)"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    s.required("dims")?;
    let dims: Vec<usize> = s.list("dims", "a dimension")?.unwrap_or_default();
    if dims.iter().any(|d| !(1..=3).contains(d)) {
        return Err(ConfigError::new("dims", "dimensions must be 1, 2 or 3"));
    }
    let samples_raw = s.required("samples")?;
    let samples: usize = s.parse("samples", samples_raw, "a positive integer")?;
    if samples == 0 {
        return Err(ConfigError::new("samples", "sample count must be positive"));
    }
    let cells = s.usize("cells")?.unwrap_or(64);
    if cells < crate::grid::MIN_CELLS {
        return Err(ConfigError::new("cells", "needs at least 4 cells per axis"));
    }
    let seed = match s.raw("seed") {
        None => 0,
        Some(r) => s.parse("seed", r, "a nonnegative integer")?,
    };
    let constant_scale = s.f64("constant_scale")?.unwrap_or(1.0);
    if !(constant_scale > 0.0) {
        return Err(ConfigError::new("constant_scale", "must be positive"));
    }
    let csv = s.raw("csv").unwrap_or("batch.csv").to_string();
    if csv.is_empty() || csv.contains('/') {
        return Err(ConfigError::new("csv", "must be a plain file name"));
    }
    s.finish()?;
    Ok(VerifyConfig {
        batch: BatchSpec {
            checks,
            dims,
            samples,
            cells,
            seed,
            constant_scale,
        },
        csv,
    })
}
