use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use spcfr_core::cfr::Solver;
use spcfr_core::metrics::fit_convergence_rate;
use spcfr_core::{GameInstance, SolverError};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::trace_csv::{Summary, TraceWriter};

/// Outcome of one finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: Summary,
    pub wall_ms: f64,
}

impl RunReport {
    pub fn line(&self, config: &RunConfig) -> String {
        let exponent = self
            .summary
            .fit
            .map_or_else(|| "nan".to_string(), |f| format!("{:.4}", f.exponent));
        format!(
            "{} {} {} {}: final_residual={:.6e} exponent={exponent} rows={} wall_ms={:.1}",
            config.game,
            config.algorithm,
            config.updates,
            config.regularizer.name(),
            self.summary.final_residual,
            self.summary.rows,
            self.wall_ms
        )
    }
}

/// Loads the game and runs the configuration, writing the CSV trace to
/// `config.output` (or standard output).
pub fn run(config: &RunConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let game = config.game.load()?;
    match &config.output {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            run_on(&game, config, BufWriter::new(file)).map_err(|e| match e {
                CliError::Io { source, .. } => CliError::io(path, source),
                other => other,
            })
        }
        None => run_on(&game, config, std::io::stdout().lock()),
    }
}

/// Runs an already-built game into any sink.
pub fn run_on<W: Write>(game: &GameInstance, config: &RunConfig, sink: W) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let io = |e: std::io::Error| CliError::io("<trace>", e);
    let mut writer = TraceWriter::new(sink, config.big_blind, config.timing).map_err(io)?;
    let solver = Solver::new(game, config.solve_config())?;
    let mut write_error = None;
    let trace = solver.run_with(|record| {
        writer.write_record(record).map_err(|e| {
            let message = e.to_string();
            write_error = Some(e);
            SolverError::Config(format!("writing trace: {message}"))
        })
    });
    if let Some(e) = write_error {
        return Err(io(e));
    }
    let trace = trace?;
    let fit = match fit_convergence_rate(&trace.records) {
        Ok(f) => Some(f),
        Err(SolverError::InsufficientData(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let summary = Summary {
        final_residual: trace.final_residual().ok_or(SolverError::EmptyTrace)?,
        fit,
        rows: writer.rows(),
    };
    writer.finish(&summary).map_err(io)?;
    Ok(RunReport {
        summary,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
