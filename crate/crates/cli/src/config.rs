use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use spcfr_core::cfr::{default_record_every, Algorithm, SolveConfig, UpdateMode};
use spcfr_core::games::{build_kuhn, build_leduc, build_random_game, parse_game_file, to_sequence_form_game};
use spcfr_core::{GameInstance, Regularizer};

use crate::error::CliError;

/// Environment variable that overrides the seed of random games.
pub const SEED_ENV: &str = "SPCFR_SEED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GameSpec {
    Kuhn,
    Leduc,
    Random { seed: u64, depth: usize, branching: usize },
    File(PathBuf),
}

impl GameSpec {
    /// Parses `kuhn`, `leduc`, `random` or `file:<path>`; the random
    /// parameters come from separate flags.
    pub fn parse(name: &str, seed: u64, depth: usize, branching: usize) -> Result<Self, CliError> {
        match name {
            "kuhn" => Ok(GameSpec::Kuhn),
            "leduc" => Ok(GameSpec::Leduc),
            "random" => Ok(GameSpec::Random { seed, depth, branching }),
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(GameSpec::File(PathBuf::from(path))),
                _ => Err(CliError::Config(format!(
                    "unknown game {other:?} (expected kuhn, leduc, random or file:<path>)"
                ))),
            },
        }
    }

    /// Replaces the random-game seed with `SPCFR_SEED` when it is set.
    pub fn with_env_seed(self) -> Result<Self, CliError> {
        match (self, std::env::var(SEED_ENV)) {
            (GameSpec::Random { depth, branching, .. }, Ok(raw)) => {
                let seed = raw
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{SEED_ENV} must be an unsigned integer, got {raw:?}")))?;
                Ok(GameSpec::Random { seed, depth, branching })
            }
            (spec, _) => Ok(spec),
        }
    }

    /// Short name used in file names and summaries.
    pub fn label(&self) -> String {
        match self {
            GameSpec::Kuhn => "kuhn".into(),
            GameSpec::Leduc => "leduc".into(),
            GameSpec::Random { seed, depth, branching } => format!("random-{seed}-{depth}-{branching}"),
            GameSpec::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into()),
        }
    }

    pub fn load(&self) -> Result<GameInstance, CliError> {
        match self {
            GameSpec::Kuhn => Ok(build_kuhn()),
            GameSpec::Leduc => Ok(build_leduc()),
            GameSpec::Random { seed, depth, branching } => {
                build_random_game(*seed, *depth, *branching).map_err(|e| CliError::from_game("random", e))
            }
            GameSpec::File(path) => {
                let shown = path.display().to_string();
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read game file {shown}: {e}")))?;
                let efg = parse_game_file(&text).map_err(|e| CliError::from_game(&shown, e))?;
                to_sequence_form_game(&self.label(), &efg).map_err(|e| CliError::from_game(&shown, e))
            }
        }
    }
}

impl fmt::Display for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameSpec::File(p) => write!(f, "file:{}", p.display()),
            other => f.write_str(&other.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub game: GameSpec,
    pub algorithm: Algorithm,
    pub updates: UpdateMode,
    pub regularizer: Regularizer,
    pub iterations: usize,
    pub kappa_constant: f64,
    /// `None` picks `default_record_every(iterations)`.
    pub record_every: Option<usize>,
    /// CSV destination; `None` writes to standard output.
    pub output: Option<PathBuf>,
    pub big_blind: f64,
    /// Record real wall-clock times. Off by default so identical configs
    /// produce identical files.
    pub timing: bool,
}

impl RunConfig {
    pub fn new(game: GameSpec, algorithm: Algorithm, iterations: usize) -> Self {
        Self {
            game,
            algorithm,
            updates: UpdateMode::Simultaneous,
            regularizer: Regularizer::Entropy,
            iterations,
            kappa_constant: 1.0,
            record_every: None,
            output: None,
            big_blind: 1.0,
            timing: false,
        }
    }

    pub fn record_every(&self) -> usize {
        self.record_every.unwrap_or_else(|| default_record_every(self.iterations))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.iterations < 1 {
            return Err(CliError::Config("iterations must be at least 1".into()));
        }
        if self.record_every == Some(0) {
            return Err(CliError::Config("record_every must be at least 1".into()));
        }
        if !(self.big_blind > 0.0 && self.big_blind.is_finite()) {
            return Err(CliError::Config(format!("big blind must be positive, got {}", self.big_blind)));
        }
        self.solve_config().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            algorithm: self.algorithm,
            regularizer: self.regularizer,
            updates: self.updates,
            iterations: self.iterations,
            kappa_constant: self.kappa_constant,
            record_every: self.record_every(),
            track_stability: true,
        }
    }
}

/// Parses a comma-separated list with the element type's `FromStr`.
pub fn parse_list<T: FromStr<Err = String>>(raw: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(CliError::Config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn game_specs() {
        assert_eq!(GameSpec::parse("kuhn", 0, 1, 1).unwrap(), GameSpec::Kuhn);
        assert_eq!(
            GameSpec::parse("random", 7, 3, 2).unwrap(),
            GameSpec::Random {
                seed: 7,
                depth: 3,
                branching: 2
            }
        );
        assert_eq!(
            GameSpec::parse("file:a/b.efg", 0, 1, 1).unwrap(),
            GameSpec::File("a/b.efg".into())
        );
        assert!(GameSpec::parse("file:", 0, 1, 1).is_err());
        assert_eq!(GameSpec::parse("chess", 0, 1, 1).unwrap_err().exit_code(), 2);
        assert_eq!(GameSpec::File("x/kuhn.efg".into()).label(), "kuhn");
        assert_eq!(GameSpec::File("x/kuhn.efg".into()).to_string(), "file:x/kuhn.efg");
    }

    #[test]
    fn size_guard_maps_to_exit_four() {
        let spec = GameSpec::Random {
            seed: 0,
            depth: 12,
            branching: 9,
        };
        assert_eq!(spec.load().unwrap_err().exit_code(), 4);
        let bad = GameSpec::Random {
            seed: 0,
            depth: 0,
            branching: 2,
        };
        assert_eq!(bad.load().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::new(GameSpec::Kuhn, Algorithm::CfrRm, 1024);
        assert_eq!(c.record_every(), 2);
        c.validate().unwrap();
        c.record_every = Some(0);
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        c.record_every = None;
        c.iterations = 0;
        assert!(c.validate().is_err());
        c.iterations = 10;
        c.big_blind = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn lists() {
        let algos: Vec<Algorithm> = parse_list("oftrl_theory, cfr_rm,oftrl_scaled:3").unwrap();
        assert_eq!(algos, vec![Algorithm::OftrlTheory, Algorithm::CfrRm, Algorithm::OftrlScaled(3)]);
        assert!(parse_list::<UpdateMode>("sideways").is_err());
    }
}
