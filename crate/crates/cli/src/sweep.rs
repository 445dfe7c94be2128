use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use rayon::prelude::*;
use spcfr_core::cfr::{Algorithm, UpdateMode};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::run_on;
use crate::trace_csv::{completed_summary, format_float, Summary};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Game, budget and shared options; algorithm, update mode and output
    /// are overridden per run.
    pub base: RunConfig,
    pub algorithms: Vec<Algorithm>,
    pub updates: Vec<UpdateMode>,
    pub out_dir: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ran,
    /// A complete CSV was already present.
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub label: String,
    pub algorithm: Algorithm,
    pub updates: UpdateMode,
    pub path: PathBuf,
    pub summary: Option<Summary>,
    pub status: RunStatus,
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: &str = "label,algorithm,updates,regularizer,final_residual,exponent,constant,rows,status";

fn run_label(config: &RunConfig) -> String {
    format!(
        "{}_{}_{}_{}",
        config.game.label(),
        config.algorithm.to_string().replace(':', "-"),
        config.updates,
        config.regularizer.name()
    )
}

/// Runs every algorithm × update mode on one game, skipping runs whose CSV
/// is already complete, and writes `summary.csv` sorted by final residual.
/// Failures of individual runs are recorded, not propagated.
pub fn sweep(config: &SweepConfig) -> Result<Vec<SweepEntry>, CliError> {
    if config.algorithms.is_empty() || config.updates.is_empty() {
        return Err(CliError::Config("sweep needs at least one algorithm and one update mode".into()));
    }
    if config.workers == 0 {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    config.base.validate()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::io(&config.out_dir, e))?;
    let game = config.base.game.load()?;

    let mut jobs = Vec::new();
    for &algorithm in &config.algorithms {
        for &updates in &config.updates {
            let mut run = RunConfig {
                algorithm,
                updates,
                ..config.base.clone()
            };
            let label = run_label(&run);
            run.output = Some(config.out_dir.join(format!("{label}.csv")));
            jobs.push((label, run));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let mut entries: Vec<SweepEntry> = pool.install(|| {
        jobs.par_iter()
            .map(|(label, run)| {
                let path = run.output.clone().expect("set above");
                let (summary, status) = match completed_summary(&path) {
                    Some(s) => (Some(s), RunStatus::Skipped),
                    None => {
                        let outcome = File::create(&path)
                            .map_err(|e| CliError::io(&path, e))
                            .and_then(|f| run_on(&game, run, BufWriter::new(f)));
                        match outcome {
                            Ok(report) => (Some(report.summary), RunStatus::Ran),
                            Err(e) => (None, RunStatus::Failed(e.to_string())),
                        }
                    }
                };
                SweepEntry {
                    label: label.clone(),
                    algorithm: run.algorithm,
                    updates: run.updates,
                    path,
                    summary,
                    status,
                }
            })
            .collect()
    });
    entries.sort_by(|a, b| {
        let key = |e: &SweepEntry| e.summary.map_or(f64::INFINITY, |s| s.final_residual);
        key(a).total_cmp(&key(b)).then_with(|| a.label.cmp(&b.label))
    });
    let table = summary_table(&entries, &config.base);
    let path = config.out_dir.join(SUMMARY_FILE);
    std::fs::write(&path, table).map_err(|e| CliError::io(&path, e))?;
    Ok(entries)
}

pub fn summary_table(entries: &[SweepEntry], base: &RunConfig) -> String {
    let mut out = String::new();
    writeln!(out, "{SUMMARY_HEADER}").unwrap();
    for e in entries {
        let (residual, exponent, constant, rows) = match e.summary {
            Some(s) => (
                format_float(s.final_residual),
                s.fit.map_or("nan".into(), |f| format_float(f.exponent)),
                s.fit.map_or("nan".into(), |f| format_float(f.constant)),
                s.rows.to_string(),
            ),
            None => ("nan".into(), "nan".into(), "nan".into(), "0".into()),
        };
        let status = match &e.status {
            RunStatus::Ran => "ran".to_string(),
            RunStatus::Skipped => "skipped".to_string(),
            RunStatus::Failed(m) => format!("failed: {}", m.replace([',', '\n'], ";")),
        };
        writeln!(
            out,
            "{},{},{},{},{residual},{exponent},{constant},{rows},{status}",
            e.label,
            e.algorithm,
            e.updates,
            base.regularizer.name()
        )
        .unwrap();
    }
    out
}
