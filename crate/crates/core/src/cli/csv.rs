//! Comma-separated output for time series and inequality batches.
//!
//! Floats are written in shortest round-trip exponent form (`1.5e0`), so a
//! reader recovers every value bit for bit. Missing values are empty cells.

use crate::diagnostics::{DiagnosticsRecord, RECORD_COLUMNS};
use crate::ineqlab::BatchRow;
use std::io::{self, BufRead, Write};

/// Schema tag written to run summaries alongside [`timeseries_header`].
pub const TIMESERIES_SCHEMA: &str = "chemorep-timeseries/1";

/// Header of the batch CSV.
pub const BATCH_HEADER: &str = "check,seed,n,h,lhs,rhs,ratio,bound,pass,anomaly";

/// `step` followed by the diagnostics columns.
pub fn timeseries_header() -> String {
    let mut h = String::from("step");
    for c in RECORD_COLUMNS {
        h.push(',');
        h.push_str(c);
    }
    h
}

pub fn fmt_value(x: f64) -> String {
    format!("{x:e}")
}

pub struct TimeseriesWriter<W: Write> {
    out: W,
}

impl<W: Write> TimeseriesWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{}", timeseries_header())?;
        Ok(Self { out })
    }

    pub fn row(&mut self, step: usize, r: &DiagnosticsRecord) -> io::Result<()> {
        let mut line = step.to_string();
        for v in r.columns() {
            line.push(',');
            if let Some(x) = v {
                line.push_str(&fmt_value(x));
            }
        }
        writeln!(self.out, "{line}")
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn bad(line: usize, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
}

/// Reads a time-series CSV back into `(step, record)` pairs.
pub fn read_timeseries<R: BufRead>(input: R) -> io::Result<Vec<(usize, DiagnosticsRecord)>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file"))??;
    if header != timeseries_header() {
        return Err(bad(1, "header does not match the time-series schema"));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let n = k + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != RECORD_COLUMNS.len() + 1 {
            return Err(bad(n, format!("expected {} cells", RECORD_COLUMNS.len() + 1)));
        }
        let step: usize = cells[0].parse().map_err(|_| bad(n, "bad step"))?;
        let mut vals = [None; 20];
        for (slot, c) in vals.iter_mut().zip(&cells[1..]) {
            if !c.is_empty() {
                *slot = Some(c.parse::<f64>().map_err(|_| bad(n, format!("bad number `{c}`")))?);
            }
        }
        let rec = DiagnosticsRecord::from_columns(&vals).ok_or_else(|| bad(n, "missing value"))?;
        out.push((step, rec));
    }
    Ok(out)
}

pub fn write_batch<W: Write>(mut out: W, rows: &[BatchRow]) -> io::Result<()> {
    writeln!(out, "{BATCH_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.check,
            r.seed,
            r.n,
            fmt_value(r.h),
            fmt_value(r.lhs),
            fmt_value(r.rhs),
            fmt_value(r.ratio),
            fmt_value(r.bound),
            r.pass,
            r.anomaly
        )?;
    }
    out.flush()
}
