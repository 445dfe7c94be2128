//! Extensive-form games and their reduction to the bilinear saddle-point
//! problem `max_x min_y xᵀAy` over two sequence-form polytopes.
//!
//! Payoffs are stored from player 1's point of view. Player 1 (`x`) receives
//! the loss vector `−Ay` and player 2 (`y`) receives `Aᵀx`; both are
//! multiplied by [`GameInstance::loss_scale`] before reaching a regret
//! minimizer.

mod builders;
mod efg;
mod format;

use std::collections::{BTreeMap, HashMap};

pub use builders::{
    build_kuhn, build_leduc, build_random_game, kuhn_efg, leduc_efg, random_efg, random_game_sequences,
    MAX_RANDOM_NODES, MAX_RANDOM_SEQUENCES,
};
pub use efg::{EfgBuilder, EfgNode, EfgNodeKind, ExtensiveFormGame, Player, CHANCE_SUM_TOL};
pub use format::{export_game_file, parse_game_file};

use crate::error::{GameError, TreeplexError};
use crate::treeplex::{NodeId, TreePlex, TreePlexBuilder};

/// One nonzero entry of the payoff matrix `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffEntry {
    pub x: usize,
    pub y: usize,
    pub value: f64,
}

/// Two treeplexes and a sparse payoff operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    pub name: String,
    pub treeplex_x: TreePlex,
    pub treeplex_y: TreePlex,
    /// Sorted by `(x, y)`, no duplicate index pairs.
    pub payoff: Vec<PayoffEntry>,
    /// Upper bound on the spectral norm of `A`.
    pub payoff_norm: f64,
    /// Factor applied to losses so every counterfactual loss and prediction
    /// has 2-norm at most 1/3.
    pub loss_scale: f64,
}

/// Per-player treeplex construction state.
struct SideBuilder {
    builder: TreePlexBuilder,
    /// Decision node and parent sequence (as `(node, action)`) per infoset.
    infosets: HashMap<String, (NodeId, (NodeId, usize))>,
}

impl SideBuilder {
    fn new() -> Self {
        Self {
            builder: TreePlexBuilder::with_start_root(),
            infosets: HashMap::new(),
        }
    }

    fn decision_for(
        &mut self,
        infoset: &str,
        actions: &[(String, usize)],
        last: (NodeId, usize),
    ) -> Result<NodeId, GameError> {
        if let Some(&(j, parent)) = self.infosets.get(infoset) {
            if parent != last {
                return Err(GameError::PerfectRecall {
                    infoset: infoset.to_string(),
                    line: 0,
                });
            }
            return Ok(j);
        }
        let k = self.builder.observe(last.0, last.1)?;
        let labels: Vec<&str> = actions.iter().map(|a| a.0.as_str()).collect();
        let j = self.builder.decide(k, infoset, infoset, &labels)?;
        self.infosets.insert(infoset.to_string(), (j, last));
        Ok(j)
    }
}

/// Builds the sequence-form representation of `efg`.
///
/// Each information set becomes a decision node. The observation node below
/// a sequence `(j, a)` has one signal per information set whose owner's last
/// sequence is `(j, a)`, in the order the sets are first met by a depth-first
/// walk. Chance probabilities are folded into the payoff entries.
pub fn to_sequence_form_game(name: &str, efg: &ExtensiveFormGame) -> Result<GameInstance, GameError> {
    let mut sides = [SideBuilder::new(), SideBuilder::new()];
    let start = (0, 0);
    // Terminal contributions as ((node, action) per player, weighted payoff).
    let mut leaves: Vec<([(NodeId, usize); 2], f64)> = Vec::new();

    let nodes = efg.nodes();
    let mut stack = vec![(efg.root(), [start, start], 1.0f64)];
    while let Some((i, last, reach)) = stack.pop() {
        match &nodes[i].kind {
            EfgNodeKind::Terminal { payoff } => leaves.push((last, payoff * reach)),
            EfgNodeKind::Chance { outcomes } => {
                for &(p, c) in outcomes.iter().rev() {
                    stack.push((c, last, reach * p));
                }
            }
            EfgNodeKind::Player {
                player,
                infoset,
                actions,
            } => {
                let me = *player as usize;
                let j = sides[me]
                    .decision_for(infoset, actions, last[me])
                    .map_err(|e| match e {
                        GameError::PerfectRecall { infoset, .. } => GameError::PerfectRecall {
                            infoset,
                            line: nodes[i].line,
                        },
                        other => other,
                    })?;
                for (a, &(_, c)) in actions.iter().enumerate().rev() {
                    let mut next = last;
                    next[me] = (j, a);
                    stack.push((c, next, reach));
                }
            }
        }
    }

    let [x, y] = sides;
    let treeplex_x = x.builder.build()?;
    let treeplex_y = y.builder.build()?;
    let index = |tree: &TreePlex, (j, a): (NodeId, usize)| -> Result<usize, TreeplexError> {
        Ok(tree.action_range(j)?.start + a)
    };
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (last, value) in leaves {
        let key = (index(&treeplex_x, last[0])?, index(&treeplex_y, last[1])?);
        *merged.entry(key).or_insert(0.0) += value;
    }
    let payoff = merged
        .into_iter()
        .map(|((x, y), value)| PayoffEntry { x, y, value })
        .collect();
    GameInstance::new(name, treeplex_x, treeplex_y, payoff)
}

impl GameInstance {
    /// Assembles an instance, validating the entries and computing the
    /// norm bound and loss scale.
    pub fn new(
        name: &str,
        treeplex_x: TreePlex,
        treeplex_y: TreePlex,
        mut payoff: Vec<PayoffEntry>,
    ) -> Result<Self, GameError> {
        let (nx, ny) = (treeplex_x.num_sequences(), treeplex_y.num_sequences());
        for e in &payoff {
            if e.x >= nx || e.y >= ny || !e.value.is_finite() {
                return Err(GameError::InvalidParameter(format!(
                    "payoff entry ({}, {}, {}) is out of range",
                    e.x, e.y, e.value
                )));
            }
        }
        payoff.sort_by_key(|e| (e.x, e.y));
        if payoff.windows(2).any(|w| (w[0].x, w[0].y) == (w[1].x, w[1].y)) {
            return Err(GameError::InvalidParameter("duplicate payoff entry".into()));
        }
        let mut game = Self {
            name: name.to_string(),
            treeplex_x,
            treeplex_y,
            payoff,
            payoff_norm: 0.0,
            loss_scale: 1.0,
        };
        game.payoff_norm = game.norm_bound();
        let estimate = game.power_iteration_norm(30);
        if estimate > game.payoff_norm * (1.0 + 1e-9) + 1e-12 {
            return Err(GameError::InvalidParameter(format!(
                "norm bound {} is below the power-iteration estimate {estimate}",
                game.payoff_norm
            )));
        }
        game.loss_scale = game.compute_loss_scale();
        Ok(game)
    }

    fn norm_bound(&self) -> f64 {
        let frobenius = self.payoff.iter().map(|e| e.value * e.value).sum::<f64>().sqrt();
        let mut rows = vec![0.0; self.treeplex_x.num_sequences()];
        let mut cols = vec![0.0; self.treeplex_y.num_sequences()];
        for e in &self.payoff {
            rows[e.x] += e.value.abs();
            cols[e.y] += e.value.abs();
        }
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        // ‖A‖₂ ≤ sqrt(‖A‖₁‖A‖∞).
        frobenius.min((max(&rows) * max(&cols)).sqrt())
    }

    fn compute_loss_scale(&self) -> f64 {
        if self.payoff_norm == 0.0 {
            return 1.0;
        }
        let bx = self.treeplex_x.subtree_norm_bounds()[self.treeplex_x.root()];
        let by = self.treeplex_y.subtree_norm_bounds()[self.treeplex_y.root()];
        1.0 / (3.0 * self.payoff_norm * bx * by)
    }

    /// Lower estimate of the spectral norm of `A` from power iteration on
    /// `AᵀA` started at the all-ones vector.
    pub fn power_iteration_norm(&self, iterations: usize) -> f64 {
        let ny = self.treeplex_y.num_sequences();
        let mut v = vec![1.0 / (ny as f64).sqrt(); ny];
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let av = self.a_times_y(&v);
            let norm_av = av.iter().map(|x| x * x).sum::<f64>().sqrt();
            estimate = f64::max(estimate, norm_av);
            if norm_av == 0.0 {
                break;
            }
            let w = self.a_t_times_x(&av);
            let norm_w = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm_w == 0.0 {
                break;
            }
            v = w.into_iter().map(|x| x / norm_w).collect();
        }
        estimate
    }

    pub fn num_sequences_x(&self) -> usize {
        self.treeplex_x.num_sequences()
    }

    pub fn num_sequences_y(&self) -> usize {
        self.treeplex_y.num_sequences()
    }

    fn check_dims(&self, x: Option<&[f64]>, y: Option<&[f64]>) -> Result<(), TreeplexError> {
        if let Some(x) = x {
            self.treeplex_x.check_len(x.len())?;
        }
        if let Some(y) = y {
            self.treeplex_y.check_len(y.len())?;
        }
        Ok(())
    }

    /// `xᵀAy`: expected payoff to player 1.
    pub fn expected_payoff(&self, x: &[f64], y: &[f64]) -> Result<f64, TreeplexError> {
        self.check_dims(Some(x), Some(y))?;
        Ok(self.payoff.iter().map(|e| x[e.x] * e.value * y[e.y]).sum())
    }

    /// `Ay`. Panics if `y` has the wrong length.
    pub fn a_times_y(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.treeplex_x.num_sequences()];
        for e in &self.payoff {
            out[e.x] += e.value * y[e.y];
        }
        out
    }

    /// `Aᵀx`. Panics if `x` has the wrong length.
    pub fn a_t_times_x(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.treeplex_y.num_sequences()];
        for e in &self.payoff {
            out[e.y] += e.value * x[e.x];
        }
        out
    }

    /// Scaled loss of player 1 against `y`: `−loss_scale·Ay`.
    pub fn loss_x(&self, y: &[f64]) -> Result<Vec<f64>, TreeplexError> {
        self.check_dims(None, Some(y))?;
        let s = self.loss_scale;
        Ok(self.a_times_y(y).into_iter().map(|v| -s * v).collect())
    }

    /// Scaled loss of player 2 against `x`: `loss_scale·Aᵀx`.
    pub fn loss_y(&self, x: &[f64]) -> Result<Vec<f64>, TreeplexError> {
        self.check_dims(Some(x), None)?;
        let s = self.loss_scale;
        Ok(self.a_t_times_x(x).into_iter().map(|v| s * v).collect())
    }

    /// The same game with every payoff multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, GameError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(GameError::InvalidParameter(format!("scale must be positive, got {c}")));
        }
        let payoff = self
            .payoff
            .iter()
            .map(|e| PayoffEntry {
                value: e.value * c,
                ..*e
            })
            .collect();
        Self::new(&self.name, self.treeplex_x.clone(), self.treeplex_y.clone(), payoff)
    }
}
