//! Counterfactual regret minimization for two-player zero-sum
//! extensive-form games, including a stable-predictive variant whose local
//! minimizers are optimistic FTRL instances with stepsizes set by their
//! position in the decision tree.
//!
//! The crate is organized bottom-up:
//!
//! - [`treeplex`]: sequential decision processes and sequence-form vectors.
//! - [`games`]: extensive-form games, the game file format, Kuhn/Leduc/random
//!   builders and the reduction to a bilinear saddle-point problem.
//! - [`local_rm`]: regret minimizers over a single simplex (OFTRL, regret
//!   matching) and regret accounting.
//! - [`cfr`]: composition of local minimizers over a treeplex, the stability
//!   schedule, and the simultaneous/alternating solve loops.
//! - [`metrics`]: best responses, saddle-point residuals, brute-force regret
//!   oracles and rate fitting.
//! - [`checks`]: the invariant suites run by `spcfr check`.

pub mod cfr;
pub mod checks;
pub mod error;
pub mod games;
pub mod local_rm;
pub mod metrics;
pub mod treeplex;

pub use cfr::{Algorithm, SolveConfig, SolveTrace, TraceRecord, UpdateMode};
pub use error::{GameError, RegretError, SolverError, TreeplexError};
pub use games::{ExtensiveFormGame, GameInstance};
pub use local_rm::Regularizer;
pub use treeplex::{BehavioralStrategy, NodeId, SequenceVector, TreePlex, VectorKind};
