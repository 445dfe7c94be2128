use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spcfr_cli::config::parse_list;
use spcfr_cli::sweep::RunStatus;
use spcfr_cli::{CliError, GameSpec, RunConfig, SweepConfig};
use spcfr_core::cfr::{Algorithm, UpdateMode};
use spcfr_core::games::{export_game_file, kuhn_efg, leduc_efg, random_efg};
use spcfr_core::Regularizer;

#[derive(Parser)]
#[command(name = "spcfr", version, about = "Stable-predictive CFR experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its CSV trace.
    Solve(SolveArgs),
    /// Run every algorithm × update mode on one game.
    Sweep(SweepArgs),
    /// Write a built-in game in the game file format.
    ExportGame(ExportArgs),
    /// Run the invariant suites.
    Check(CheckArgs),
}

#[derive(Args, Clone)]
struct GameArgs {
    /// kuhn, leduc, random or file:<path>
    #[arg(long, default_value = "kuhn")]
    game: String,
    /// Random-game seed (overridden by SPCFR_SEED).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 3)]
    branching: usize,
}

impl GameArgs {
    fn spec(&self) -> Result<GameSpec, CliError> {
        GameSpec::parse(&self.game, self.seed, self.depth, self.branching)?.with_env_seed()
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    game: GameArgs,
    #[arg(short = 'T', long = "iterations", default_value_t = 1024)]
    iterations: usize,
    #[arg(long, default_value = "entropy")]
    regularizer: Regularizer,
    /// c in kappa* = c * T^(-1/4)
    #[arg(long, default_value_t = 1.0)]
    kappa_constant: f64,
    /// Defaults to 2^ceil(log2 T) / 512.
    #[arg(long)]
    record_every: Option<usize>,
    /// Converts residuals to milli big blinds per game.
    #[arg(long, default_value_t = 1.0)]
    big_blind: f64,
    /// Record wall-clock times in the CSV (breaks byte-for-byte reproducibility).
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn config(&self, algorithm: Algorithm, updates: UpdateMode) -> Result<RunConfig, CliError> {
        Ok(RunConfig {
            updates,
            regularizer: self.regularizer,
            kappa_constant: self.kappa_constant,
            record_every: self.record_every,
            big_blind: self.big_blind,
            timing: self.timing,
            ..RunConfig::new(self.game.spec()?, algorithm, self.iterations)
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// oftrl_theory, oftrl_scaled:D (D in 1..=3) or cfr_rm
    #[arg(long, default_value = "oftrl_theory")]
    algo: Algorithm,
    #[arg(long, default_value = "simultaneous")]
    updates: UpdateMode,
    /// CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value = "oftrl_theory,oftrl_scaled:2,cfr_rm")]
    algos: String,
    #[arg(long, default_value = "simultaneous,alternating")]
    updates: String,
    #[arg(long, default_value = "traces")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn solve(args: SolveArgs) -> Result<(), CliError> {
    let mut config = args.run.config(args.algo, args.updates)?;
    config.output = args.out;
    let report = spcfr_cli::run(&config)?;
    let line = report.line(&config);
    if config.output.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<bool, CliError> {
    let config = SweepConfig {
        base: args.run.config(Algorithm::OftrlTheory, UpdateMode::Simultaneous)?,
        algorithms: parse_list(&args.algos)?,
        updates: parse_list(&args.updates)?,
        out_dir: args.out_dir,
        workers: args.workers,
    };
    let entries = spcfr_cli::sweep(&config)?;
    print!("{}", spcfr_cli::sweep::summary_table(&entries, &config.base));
    let mut ok = true;
    for e in &entries {
        if let RunStatus::Failed(m) = &e.status {
            eprintln!("run {} failed: {m}", e.label);
            ok = false;
        }
    }
    Ok(ok)
}

fn export(args: ExportArgs) -> Result<(), CliError> {
    let efg = match args.game.spec()? {
        GameSpec::Kuhn => kuhn_efg(),
        GameSpec::Leduc => leduc_efg(),
        GameSpec::Random { seed, depth, branching } => {
            random_efg(seed, depth, branching).map_err(|e| match e {
                spcfr_core::GameError::TooLarge { .. } => CliError::SizeGuard(e),
                other => CliError::Config(other.to_string()),
            })?
        }
        GameSpec::File(_) => return Err(CliError::Config("export-game takes a built-in game".into())),
    };
    let text = export_game_file(&efg);
    match args.out {
        Some(path) => std::fs::write(&path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check(args: CheckArgs) -> Result<bool, CliError> {
    let outcomes = spcfr_core::checks::run_invariant_suites(args.seed)?;
    let mut ok = true;
    for o in &outcomes {
        println!("{o}");
        ok &= o.passed() || !o.enforced;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a).map(|_| true),
        Command::Sweep(a) => sweep(a),
        Command::ExportGame(a) => export(a).map(|_| true),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
