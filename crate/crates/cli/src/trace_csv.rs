//! CSV trace files.
//!
//! One header line, one row per record, and a trailing sentinel comment
//! written only after the run finished:
//!
//! ```text
//! t,residual,residual_mbbg,regret_x,regret_y,max_stability_violation,wall_ms
//! 2,9.1666666666666674e-1,...
//! # summary final_residual=... exponent=... constant=... rows=512
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use spcfr_core::metrics::{residual_to_mbbg, RateFit};
use spcfr_core::TraceRecord;

use crate::error::CliError;

pub const HEADER: &str = "t,residual,residual_mbbg,regret_x,regret_y,max_stability_violation,wall_ms";
pub const SENTINEL_PREFIX: &str = "# summary ";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_row(r: &TraceRecord, big_blind: f64, timing: bool) -> String {
    let wall = if timing { r.wall_ms } else { 0.0 };
    [
        r.residual,
        residual_to_mbbg(r.residual, big_blind),
        r.regret_x,
        r.regret_y,
        r.max_stability_violation,
        wall,
    ]
    .iter()
    .fold(r.t.to_string(), |mut line, v| {
        line.push(',');
        line.push_str(&format_float(*v));
        line
    })
}

/// End-of-run statistics stored in the sentinel line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub final_residual: f64,
    /// `None` when the trace is too short to fit.
    pub fit: Option<RateFit>,
    pub rows: usize,
}

impl Summary {
    pub fn sentinel(&self) -> String {
        let (exponent, constant) = match self.fit {
            Some(f) => (format_float(f.exponent), format_float(f.constant)),
            None => ("nan".into(), "nan".into()),
        };
        format!(
            "{SENTINEL_PREFIX}final_residual={} exponent={exponent} constant={constant} rows={}",
            format_float(self.final_residual),
            self.rows
        )
    }

    pub fn parse_sentinel(line: &str) -> Option<Summary> {
        let rest = line.strip_prefix(SENTINEL_PREFIX)?;
        let mut final_residual = None;
        let mut exponent = None;
        let mut constant = None;
        let mut rows = None;
        for field in rest.split_whitespace() {
            let (key, value) = field.split_once('=')?;
            match key {
                "final_residual" => final_residual = value.parse::<f64>().ok(),
                "exponent" => exponent = value.parse::<f64>().ok(),
                "constant" => constant = value.parse::<f64>().ok(),
                "rows" => rows = value.parse::<usize>().ok(),
                _ => {}
            }
        }
        let (exponent, constant) = (exponent?, constant?);
        Some(Summary {
            final_residual: final_residual?,
            fit: (!exponent.is_nan()).then_some(RateFit { exponent, constant }),
            rows: rows?,
        })
    }
}

/// Streams rows to a sink, flushing after every row.
pub struct TraceWriter<W: Write> {
    sink: W,
    big_blind: f64,
    timing: bool,
    rows: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut sink: W, big_blind: f64, timing: bool) -> std::io::Result<Self> {
        writeln!(sink, "{HEADER}")?;
        sink.flush()?;
        Ok(Self {
            sink,
            big_blind,
            timing,
            rows: 0,
        })
    }

    pub fn write_record(&mut self, r: &TraceRecord) -> std::io::Result<()> {
        writeln!(self.sink, "{}", format_row(r, self.big_blind, self.timing))?;
        self.rows += 1;
        self.sink.flush()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self, summary: &Summary) -> std::io::Result<W> {
        writeln!(self.sink, "{}", summary.sentinel())?;
        self.sink.flush()?;
        Ok(self.sink)
    }
}

/// The sentinel of a finished trace file, or `None` if the file is missing,
/// truncated or malformed.
pub fn completed_summary(path: &Path) -> Option<Summary> {
    let file = File::open(path).ok()?;
    let mut lines = BufReader::new(file).lines();
    if lines.next()?.ok()? != HEADER {
        return None;
    }
    let mut rows = 0;
    let mut sentinel = None;
    for line in lines {
        let line = line.ok()?;
        if sentinel.is_some() {
            return None;
        }
        if line.starts_with('#') {
            sentinel = Some(Summary::parse_sentinel(&line)?);
        } else {
            rows += 1;
        }
    }
    sentinel.filter(|s: &Summary| s.rows == rows)
}

/// Parsed data rows of a trace file, ignoring the sentinel.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(CliError::Config(format!("{}: header mismatch", path.display())));
    }
    lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            l.split(',')
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| CliError::Config(format!("{}: bad row {l:?}: {e}", path.display())))
        })
        .collect()
}
