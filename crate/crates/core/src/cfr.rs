//! Counterfactual regret minimization over a treeplex.
//!
//! A [`TreeplexMinimizer`] owns one local regret minimizer per decision node.
//! Decisions are produced bottom-up: the prediction seen by node `j` is its
//! counterfactual prediction
//! `m̂_j[a] = m̃[(j,a)] + Σ_{j′ ∈ C_{ja}} ⟨[m̃]_{↓j′}, x̃_{j′}⟩`, built from the
//! decisions already chosen below `j` in the same pass. Losses are forwarded
//! the same way. The vectors `x̃_{j′}` are subtree-local: sequence forms
//! rooted at `j′`, with no reach probability from above.
//!
//! [`StabilitySchedule`] assigns OFTRL stepsizes so the composed minimizer is
//! stable with parameter `κ*`, and [`Solver`] runs self-play between two
//! treeplex minimizers on a [`GameInstance`].

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{RegretError, SolverError, TreeplexError};
use crate::games::GameInstance;
use crate::local_rm::{
    norm2, CompensatedSum, Oftrl, PredictiveRegretMinimizer, RegretAccount, RegretMatching, Regularizer,
};
use crate::metrics;
use crate::treeplex::{dot, Node, NodeId, TreePlex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// OFTRL at every decision node with `η_j = κ_j`.
    OftrlTheory,
    /// OFTRL with `η_j = κ_j · 10^d`, `d ∈ {1, 2, 3}`.
    OftrlScaled(u32),
    /// Vanilla CFR: regret matching at every decision node.
    CfrRm,
}

impl Algorithm {
    /// Factor applied to the theory stepsizes.
    pub fn stepsize_multiplier(self) -> f64 {
        match self {
            Algorithm::OftrlScaled(d) => 10f64.powi(d as i32),
            _ => 1.0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::OftrlTheory => write!(f, "oftrl_theory"),
            Algorithm::OftrlScaled(d) => write!(f, "oftrl_scaled:{d}"),
            Algorithm::CfrRm => write!(f, "cfr_rm"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    /// Accepts `oftrl_theory`, `cfr_rm`, `oftrl_scaled:D` and `oftrl_scaled(D)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oftrl_theory" => return Ok(Algorithm::OftrlTheory),
            "cfr_rm" => return Ok(Algorithm::CfrRm),
            _ => {}
        }
        let digits = s
            .strip_prefix("oftrl_scaled:")
            .or_else(|| s.strip_prefix("oftrl_scaled(").and_then(|r| r.strip_suffix(')')));
        match digits.map(str::parse::<u32>) {
            Some(Ok(d)) if (1..=3).contains(&d) => Ok(Algorithm::OftrlScaled(d)),
            Some(_) => Err(format!("oftrl_scaled needs d in 1..=3, got {s:?}")),
            None => Err(format!(
                "unknown algorithm {s:?} (expected oftrl_theory, oftrl_scaled:D or cfr_rm)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateMode {
    Simultaneous,
    /// Player 1 moves first; player 2 then updates against the fresh iterate.
    Alternating,
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateMode::Simultaneous => "simultaneous",
            UpdateMode::Alternating => "alternating",
        })
    }
}

impl FromStr for UpdateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simultaneous" => Ok(UpdateMode::Simultaneous),
            "alternating" => Ok(UpdateMode::Alternating),
            other => Err(format!("unknown update mode {other:?} (expected simultaneous or alternating)")),
        }
    }
}

/// At most 512 records for any budget.
pub fn default_record_every(iterations: usize) -> usize {
    (iterations.max(1).next_power_of_two() / 512).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub algorithm: Algorithm,
    pub regularizer: Regularizer,
    pub updates: UpdateMode,
    pub iterations: usize,
    /// `c` in `κ* = c · T^{-1/4}`.
    pub kappa_constant: f64,
    pub record_every: usize,
    /// Measure per-node iterate movement against the theory schedule.
    pub track_stability: bool,
}

impl SolveConfig {
    pub fn new(algorithm: Algorithm, iterations: usize) -> Self {
        Self {
            algorithm,
            regularizer: Regularizer::Euclidean,
            updates: UpdateMode::Simultaneous,
            iterations,
            kappa_constant: 1.0,
            record_every: default_record_every(iterations),
            track_stability: true,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.iterations == 0 {
            return Err(SolverError::Config("iterations must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(SolverError::Config("record_every must be at least 1".into()));
        }
        if !(self.kappa_constant > 0.0 && self.kappa_constant.is_finite()) {
            return Err(SolverError::Config(format!(
                "kappa constant must be positive, got {}",
                self.kappa_constant
            )));
        }
        if let Algorithm::OftrlScaled(d) = self.algorithm {
            if !(1..=3).contains(&d) {
                return Err(SolverError::Config(format!("oftrl_scaled needs d in 1..=3, got {d}")));
            }
        }
        Ok(())
    }

    /// `κ* = c · T^{-1/4}`.
    pub fn kappa_star(&self) -> f64 {
        self.kappa_constant * (self.iterations as f64).powf(-0.25)
    }
}

/// Per-node stability targets. Vectors are indexed by node id; `kappa` and
/// `eta` are zero at observation nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySchedule {
    pub kappa_star: f64,
    pub gamma: Vec<f64>,
    pub kappa: Vec<f64>,
    pub eta: Vec<f64>,
    pub bounds: Vec<f64>,
}

/// `γ_root = κ*`; a child of a decision node `u` gets `γ_u / (2√n_u)`, a
/// child of an observation node gets `γ_u / √n_u`; `κ_j = γ_j / (2√n_j B_j)`.
pub fn assign_stability(tree: &TreePlex, kappa_star: f64) -> Result<StabilitySchedule, SolverError> {
    if !(kappa_star > 0.0 && kappa_star.is_finite()) {
        return Err(SolverError::Config(format!("kappa* must be positive, got {kappa_star}")));
    }
    let bounds = tree.subtree_norm_bounds();
    let mut gamma = vec![0.0; tree.num_nodes()];
    let mut kappa = vec![0.0; tree.num_nodes()];
    gamma[tree.root()] = kappa_star;
    let mut stack = vec![tree.root()];
    while let Some(v) = stack.pop() {
        match &tree.nodes()[v] {
            Node::Decision(d) => {
                let n = d.actions.len() as f64;
                kappa[v] = gamma[v] / (2.0 * n.sqrt() * bounds[v]);
                for &k in d.children.iter().flatten() {
                    gamma[k] = gamma[v] / (2.0 * n.sqrt());
                    stack.push(k);
                }
            }
            Node::Observation(o) => {
                let n = o.children.len() as f64;
                for &j in &o.children {
                    gamma[j] = gamma[v] / n.sqrt();
                    stack.push(j);
                }
            }
        }
    }
    Ok(StabilitySchedule {
        kappa_star,
        gamma,
        eta: kappa.clone(),
        kappa,
        bounds,
    })
}

/// Counterfactual vectors of `v` against the behavioral strategy `probs`.
///
/// Returns the stacked counterfactual vectors (entry `(j, a)` is
/// `v̂_j[a]`) and, per node, the subtree value `⟨[v]_{↓u}, x̃_u⟩`.
pub fn counterfactual_vectors(
    tree: &TreePlex,
    v: &[f64],
    probs: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), TreeplexError> {
    tree.check_len(v.len())?;
    tree.check_len(probs.len())?;
    let mut cf = v.to_vec();
    let mut value = vec![0.0; tree.num_nodes()];
    for &j in tree.decision_nodes().iter().rev() {
        let range = tree.action_range(j)?;
        for s in range.clone() {
            cf[s] += tree.child_decisions(s).iter().map(|&c| value[c]).sum::<f64>();
        }
        value[j] = dot(&cf[range.clone()], &probs[range]);
    }
    for (k, node) in tree.nodes().iter().enumerate() {
        if let Node::Observation(o) = node {
            value[k] = o.children.iter().map(|&j| value[j]).sum();
        }
    }
    Ok((cf, value))
}

/// `ℓ̂_j[a] = [ℓ]_j[a] + Σ_{j′ ∈ C_{ja}} ⟨[ℓ]_{↓j′}, x̃_{j′}⟩`.
pub fn counterfactual_loss(tree: &TreePlex, j: NodeId, loss: &[f64], probs: &[f64]) -> Result<Vec<f64>, TreeplexError> {
    let range = tree.action_range(j)?;
    let (cf, _) = counterfactual_vectors(tree, loss, probs)?;
    Ok(cf[range].to_vec())
}

/// Same construction as [`counterfactual_loss`] applied to a prediction.
pub fn counterfactual_prediction(
    tree: &TreePlex,
    j: NodeId,
    prediction: &[f64],
    probs: &[f64],
) -> Result<Vec<f64>, TreeplexError> {
    counterfactual_loss(tree, j, prediction, probs)
}

/// Subtree-local sequence form `x̃_j` of decision node `j`, as the entries of
/// `tree.subtree_range(j)`.
pub fn local_sequence_form(tree: &TreePlex, j: NodeId, probs: &[f64]) -> Result<Vec<f64>, TreeplexError> {
    tree.check_len(probs.len())?;
    let range = tree.subtree_range(j)?;
    tree.decision(j)?;
    let offset = range.start;
    let mut out = vec![0.0; range.len()];
    for s in range.clone() {
        let owner = tree.sequence_owner(s);
        let mass = if owner == j {
            1.0
        } else {
            let p = tree.parent_sequence(owner).expect("non-root owner");
            out[p - offset]
        };
        out[s - offset] = probs[s] * mass;
    }
    Ok(out)
}

/// How far one iterate moved from the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `‖x̃ᵗ_v − x̃ᵗ⁻¹_v‖₂²` per node.
    pub subtree_sq: Vec<f64>,
    /// `‖x̂ᵗ_j − x̂ᵗ⁻¹_j‖₂` per decision node, zero at observation nodes.
    pub local: Vec<f64>,
}

impl StabilityReport {
    /// Largest excess `‖Δx̃_v‖₂² − γ_v²` over all nodes, clipped at zero.
    pub fn subtree_violation(&self, schedule: &StabilitySchedule) -> f64 {
        self.subtree_sq
            .iter()
            .zip(&schedule.gamma)
            .map(|(d, g)| d - g * g)
            .fold(0.0, f64::max)
    }

    /// Largest excess `‖Δx̂_j‖₂ − κ_j` over decision nodes, clipped at zero.
    pub fn local_violation(&self, tree: &TreePlex, schedule: &StabilitySchedule) -> f64 {
        tree.decision_nodes()
            .iter()
            .map(|&j| self.local[j] - schedule.kappa[j])
            .fold(0.0, f64::max)
    }

    /// Largest of the ratios `‖Δx̃_v‖₂ / γ_v` and `‖Δx̂_j‖₂ / κ_j`.
    pub fn max_ratio(&self, tree: &TreePlex, schedule: &StabilitySchedule) -> f64 {
        let subtree = self
            .subtree_sq
            .iter()
            .zip(&schedule.gamma)
            .map(|(d, g)| d.sqrt() / g)
            .fold(0.0, f64::max);
        tree.decision_nodes()
            .iter()
            .map(|&j| self.local[j] / schedule.kappa[j])
            .fold(subtree, f64::max)
    }
}

/// Compares two behavioral strategies node by node. Costs
/// `O(num_sequences · depth)`.
pub fn stability_report(tree: &TreePlex, previous: &[f64], current: &[f64]) -> Result<StabilityReport, TreeplexError> {
    tree.check_len(previous.len())?;
    tree.check_len(current.len())?;
    let mut subtree_sq = vec![0.0; tree.num_nodes()];
    let mut local = vec![0.0; tree.num_nodes()];
    let mut before = vec![0.0; tree.num_sequences()];
    let mut after = vec![0.0; tree.num_sequences()];
    for &j in tree.decision_nodes() {
        let range = tree.subtree_range(j)?;
        let mut sq = 0.0;
        for s in range.clone() {
            let owner = tree.sequence_owner(s);
            let (mb, ma) = if owner == j {
                (1.0, 1.0)
            } else {
                let p = tree.parent_sequence(owner).expect("non-root owner");
                (before[p], after[p])
            };
            before[s] = previous[s] * mb;
            after[s] = current[s] * ma;
            let d = after[s] - before[s];
            sq += d * d;
        }
        subtree_sq[j] = sq;
        let block = tree.action_range(j)?;
        let diff: Vec<f64> = block.map(|s| current[s] - previous[s]).collect();
        local[j] = norm2(&diff);
    }
    for (k, node) in tree.nodes().iter().enumerate() {
        if let Node::Observation(o) = node {
            subtree_sq[k] = o.children.iter().map(|&j| subtree_sq[j]).sum();
        }
    }
    Ok(StabilityReport { subtree_sq, local })
}

#[derive(Debug, Clone)]
enum Local {
    Oftrl(Oftrl),
    RegretMatching(RegretMatching),
}

impl Local {
    fn as_dyn(&mut self) -> &mut dyn PredictiveRegretMinimizer {
        match self {
            Local::Oftrl(m) => m,
            Local::RegretMatching(m) => m,
        }
    }
}

/// Which local regret minimizer sits at every decision node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalRule {
    /// OFTRL with `η_j = multiplier · schedule.eta[j]`.
    Oftrl { regularizer: Regularizer, multiplier: f64 },
    RegretMatching,
}

/// The composed regret minimizer `ℛ△` over a treeplex.
#[derive(Debug, Clone)]
pub struct TreeplexMinimizer {
    tree: TreePlex,
    schedule: StabilitySchedule,
    locals: Vec<Option<Local>>,
    accounts: Vec<Option<RegretAccount>>,
    probs: Vec<f64>,
    previous: Option<Vec<f64>>,
    sequence_form: Vec<f64>,
    cf_prediction: Vec<f64>,
    cf_loss: Vec<f64>,
    values: Vec<f64>,
    pending: bool,
    iterations: usize,
}

impl TreeplexMinimizer {
    pub fn new(tree: &TreePlex, schedule: StabilitySchedule, rule: LocalRule) -> Result<Self, SolverError> {
        if schedule.gamma.len() != tree.num_nodes() {
            return Err(TreeplexError::DimensionMismatch {
                expected: tree.num_nodes(),
                found: schedule.gamma.len(),
            }
            .into());
        }
        let mut locals = Vec::with_capacity(tree.num_nodes());
        let mut accounts = Vec::with_capacity(tree.num_nodes());
        for (v, node) in tree.nodes().iter().enumerate() {
            match node {
                Node::Decision(d) => {
                    let n = d.actions.len();
                    let local = match rule {
                        LocalRule::Oftrl { regularizer, multiplier } => {
                            Local::Oftrl(Oftrl::new(n, schedule.eta[v] * multiplier, regularizer)?)
                        }
                        LocalRule::RegretMatching => Local::RegretMatching(RegretMatching::new(n)),
                    };
                    locals.push(Some(local));
                    accounts.push(Some(RegretAccount::new(n)));
                }
                Node::Observation(_) => {
                    locals.push(None);
                    accounts.push(None);
                }
            }
        }
        let n = tree.num_sequences();
        Ok(Self {
            tree: tree.clone(),
            schedule,
            locals,
            accounts,
            probs: vec![0.0; n],
            previous: None,
            sequence_form: vec![0.0; n],
            cf_prediction: vec![0.0; n],
            cf_loss: vec![0.0; n],
            values: vec![0.0; tree.num_nodes()],
            pending: false,
            iterations: 0,
        })
    }

    pub fn tree(&self) -> &TreePlex {
        &self.tree
    }

    pub fn schedule(&self) -> &StabilitySchedule {
        &self.schedule
    }

    /// Behavioral strategy of the latest decision, in sequence order.
    pub fn behavioral(&self) -> &[f64] {
        &self.probs
    }

    /// Behavioral strategy of the decision before the latest one.
    pub fn previous_behavioral(&self) -> Option<&[f64]> {
        self.previous.as_deref()
    }

    /// Sequence form of the latest decision.
    pub fn sequence_form(&self) -> &[f64] {
        &self.sequence_form
    }

    /// Stacked counterfactual predictions `m̂_j` of the latest decision pass.
    pub fn counterfactual_predictions(&self) -> &[f64] {
        &self.cf_prediction
    }

    /// Stacked counterfactual losses `ℓ̂_j` of the latest observation.
    pub fn counterfactual_losses(&self) -> &[f64] {
        &self.cf_loss
    }

    /// Number of observed losses.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `R̂ᵀ_j`, maintained incrementally.
    pub fn counterfactual_regret(&self, j: NodeId) -> Result<f64, TreeplexError> {
        match self.accounts.get(j) {
            Some(Some(a)) => Ok(a.regret()),
            Some(None) => Err(TreeplexError::NotDecision(j)),
            None => Err(TreeplexError::UnknownNode(j)),
        }
    }

    /// Bottom-up decision pass against the prediction `m̃`.
    pub fn next_decision(&mut self, prediction: &[f64]) -> Result<&[f64], SolverError> {
        if self.pending {
            return Err(RegretError::DecisionPending.into());
        }
        self.tree.check_len(prediction.len())?;
        if prediction.iter().any(|x| !x.is_finite()) {
            return Err(RegretError::NonFinite.into());
        }
        if self.iterations > 0 {
            self.previous = Some(self.probs.clone());
        }
        self.cf_prediction.copy_from_slice(prediction);
        for &j in self.tree.decision_nodes().iter().rev() {
            let range = self.tree.action_range(j)?;
            for s in range.clone() {
                let below: f64 = self.tree.child_decisions(s).iter().map(|&c| self.values[c]).sum();
                self.cf_prediction[s] += below;
            }
            let local = self.locals[j].as_mut().expect("decision node").as_dyn();
            let x = local.next_decision(&self.cf_prediction[range.clone()])?;
            self.probs[range.clone()].copy_from_slice(x);
            self.values[j] = dot(&self.cf_prediction[range.clone()], &self.probs[range]);
        }
        for &j in self.tree.decision_nodes() {
            let mass = self.tree.parent_sequence(j).map_or(1.0, |p| self.sequence_form[p]);
            for s in self.tree.action_range(j)? {
                self.sequence_form[s] = self.probs[s] * mass;
            }
        }
        self.pending = true;
        Ok(&self.sequence_form)
    }

    /// Forwards `ℓ̃` to every local minimizer as its counterfactual loss.
    pub fn observe_loss(&mut self, loss: &[f64]) -> Result<(), SolverError> {
        if !self.pending {
            return Err(RegretError::NoPendingDecision.into());
        }
        self.tree.check_len(loss.len())?;
        if loss.iter().any(|x| !x.is_finite()) {
            return Err(RegretError::NonFinite.into());
        }
        self.cf_loss.copy_from_slice(loss);
        for &j in self.tree.decision_nodes().iter().rev() {
            let range = self.tree.action_range(j)?;
            for s in range.clone() {
                let below: f64 = self.tree.child_decisions(s).iter().map(|&c| self.values[c]).sum();
                self.cf_loss[s] += below;
            }
            let block = &self.cf_loss[range.clone()];
            self.locals[j].as_mut().expect("decision node").as_dyn().observe_loss(block)?;
            self.accounts[j]
                .as_mut()
                .expect("decision node")
                .record(&self.probs[range.clone()], block);
            self.values[j] = dot(block, &self.probs[range]);
        }
        self.pending = false;
        self.iterations += 1;
        Ok(())
    }

    /// Movement of the latest decision relative to the previous one.
    pub fn stability(&self) -> Option<StabilityReport> {
        let previous = self.previous.as_ref()?;
        Some(stability_report(&self.tree, previous, &self.probs).expect("dimensions match"))
    }
}

/// One sampled point of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    /// Saddle-point residual of the running averages, in payoff units.
    pub residual: f64,
    /// Regret of each player's iterates against the opponent's iterates,
    /// in payoff units.
    pub regret_x: f64,
    pub regret_y: f64,
    /// Largest stability excess since the previous record (zero when the
    /// theory schedule is met at every node).
    pub max_stability_violation: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub game: String,
    pub config: SolveConfig,
    pub records: Vec<TraceRecord>,
    pub average_x: Vec<f64>,
    pub average_y: Vec<f64>,
    /// Largest stability excess over the whole run.
    pub max_stability_violation: f64,
}

impl SolveTrace {
    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual)
    }
}

/// Uniform averages `(1/T) Σ x̃ᵗ` and `(1/T) Σ ỹᵗ`.
pub fn average_strategies(trace: &SolveTrace) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    if trace.records.is_empty() {
        return Err(SolverError::EmptyTrace);
    }
    Ok((trace.average_x.clone(), trace.average_y.clone()))
}

/// Self-play between two treeplex minimizers.
#[derive(Debug)]
pub struct Solver<'g> {
    game: &'g GameInstance,
    config: SolveConfig,
    x: TreeplexMinimizer,
    y: TreeplexMinimizer,
    prediction_x: Vec<f64>,
    prediction_y: Vec<f64>,
    sum_x: Vec<f64>,
    sum_y: Vec<f64>,
    /// `Σ xᵗᵀA yᵗ`.
    payoff: CompensatedSum,
    t: usize,
    window_violation: f64,
    total_violation: f64,
    last_x: Vec<f64>,
    last_y: Vec<f64>,
    started: Instant,
}

impl<'g> Solver<'g> {
    pub fn new(game: &'g GameInstance, config: SolveConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let kappa_star = config.kappa_star();
        let rule = match config.algorithm {
            Algorithm::CfrRm => LocalRule::RegretMatching,
            a => LocalRule::Oftrl {
                regularizer: config.regularizer,
                multiplier: a.stepsize_multiplier(),
            },
        };
        let sx = assign_stability(&game.treeplex_x, kappa_star)?;
        let sy = assign_stability(&game.treeplex_y, kappa_star)?;
        let (nx, ny) = (game.num_sequences_x(), game.num_sequences_y());
        Ok(Self {
            game,
            x: TreeplexMinimizer::new(&game.treeplex_x, sx, rule)?,
            y: TreeplexMinimizer::new(&game.treeplex_y, sy, rule)?,
            config,
            prediction_x: vec![0.0; nx],
            prediction_y: vec![0.0; ny],
            sum_x: vec![0.0; nx],
            sum_y: vec![0.0; ny],
            payoff: CompensatedSum::default(),
            t: 0,
            window_violation: 0.0,
            total_violation: 0.0,
            last_x: vec![0.0; nx],
            last_y: vec![0.0; ny],
            started: Instant::now(),
        })
    }

    pub fn config(&self) -> &SolveConfig {
        &self.config
    }

    pub fn game(&self) -> &GameInstance {
        self.game
    }

    /// Completed iterations.
    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn minimizer_x(&self) -> &TreeplexMinimizer {
        &self.x
    }

    pub fn minimizer_y(&self) -> &TreeplexMinimizer {
        &self.y
    }

    /// Latest iterates `(xᵗ, yᵗ)` in sequence form.
    pub fn iterates(&self) -> (&[f64], &[f64]) {
        (&self.last_x, &self.last_y)
    }

    fn track(&mut self) {
        if !self.config.track_stability {
            return;
        }
        for m in [&self.x, &self.y] {
            if let Some(report) = m.stability() {
                let v = report
                    .subtree_violation(m.schedule())
                    .max(report.local_violation(m.tree(), m.schedule()));
                self.window_violation = self.window_violation.max(v);
                self.total_violation = self.total_violation.max(v);
            }
        }
    }

    fn check_finite(v: &[f64]) -> Result<(), SolverError> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(RegretError::NonFinite.into())
        }
    }

    /// Runs one iteration.
    pub fn step(&mut self) -> Result<(), SolverError> {
        match self.config.updates {
            UpdateMode::Simultaneous => {
                let x = self.x.next_decision(&self.prediction_x)?.to_vec();
                let y = self.y.next_decision(&self.prediction_y)?.to_vec();
                let lx = self.game.loss_x(&y)?;
                let ly = self.game.loss_y(&x)?;
                Self::check_finite(&lx)?;
                Self::check_finite(&ly)?;
                self.x.observe_loss(&lx)?;
                self.y.observe_loss(&ly)?;
                self.prediction_x = lx;
                self.prediction_y = ly;
                self.last_x = x;
                self.last_y = y;
            }
            UpdateMode::Alternating => {
                let x = self.x.next_decision(&self.prediction_x)?.to_vec();
                if self.t > 0 {
                    // Player 2's previous decision is scored against the fresh xᵗ.
                    let ly = self.game.loss_y(&x)?;
                    Self::check_finite(&ly)?;
                    self.y.observe_loss(&ly)?;
                    self.prediction_y = ly;
                }
                let y = self.y.next_decision(&self.prediction_y)?.to_vec();
                let lx = self.game.loss_x(&y)?;
                Self::check_finite(&lx)?;
                self.x.observe_loss(&lx)?;
                self.prediction_x = lx;
                self.last_x = x;
                self.last_y = y;
            }
        }
        self.payoff.add(self.game.expected_payoff(&self.last_x, &self.last_y)?);
        for (s, v) in self.sum_x.iter_mut().zip(&self.last_x) {
            *s += v;
        }
        for (s, v) in self.sum_y.iter_mut().zip(&self.last_y) {
            *s += v;
        }
        self.t += 1;
        self.track();
        Ok(())
    }

    /// Current running averages.
    pub fn averages(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.t.max(1) as f64;
        (
            self.sum_x.iter().map(|v| v / n).collect(),
            self.sum_y.iter().map(|v| v / n).collect(),
        )
    }

    /// Residual and regrets at the current iteration; resets the stability
    /// window.
    pub fn snapshot(&mut self) -> Result<TraceRecord, SolverError> {
        let (avg_x, avg_y) = self.averages();
        let residual = metrics::saddle_residual(self.game, &avg_x, &avg_y)?;
        // R_X = −Σ xᵗAyᵗ + max_x xᵀA Σyᵗ and R_Y = Σ xᵗAyᵗ − min_y (Σxᵗ)ᵀA y.
        let (best_x, _) = metrics::best_response_value(self.game, metrics::Side::X, &self.sum_y)?;
        let (best_y, _) = metrics::best_response_value(self.game, metrics::Side::Y, &self.sum_x)?;
        let record = TraceRecord {
            t: self.t,
            residual,
            regret_x: best_x - self.payoff.value(),
            regret_y: self.payoff.value() - best_y,
            max_stability_violation: self.window_violation,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        self.window_violation = 0.0;
        Ok(record)
    }

    /// Whether the iteration just completed is a record point.
    pub fn is_record_point(&self) -> bool {
        self.t > 0 && (self.t.is_multiple_of(self.config.record_every) || self.t == self.config.iterations)
    }

    /// Runs all remaining iterations, calling `on_record` at record points.
    pub fn run_with(
        mut self,
        mut on_record: impl FnMut(&TraceRecord) -> Result<(), SolverError>,
    ) -> Result<SolveTrace, SolverError> {
        let mut records = Vec::new();
        while self.t < self.config.iterations {
            self.step()?;
            if self.is_record_point() {
                let record = self.snapshot()?;
                on_record(&record)?;
                records.push(record);
            }
        }
        let (average_x, average_y) = self.averages();
        Ok(SolveTrace {
            game: self.game.name.clone(),
            config: self.config,
            records,
            average_x,
            average_y,
            max_stability_violation: self.total_violation,
        })
    }
}

pub fn solve(game: &GameInstance, config: SolveConfig) -> Result<SolveTrace, SolverError> {
    Solver::new(game, config)?.run_with(|_| Ok(()))
}

pub fn run_simultaneous(game: &GameInstance, iterations: usize, config: &SolveConfig) -> Result<SolveTrace, SolverError> {
    solve(
        game,
        SolveConfig {
            iterations,
            updates: UpdateMode::Simultaneous,
            ..config.clone()
        },
    )
}

pub fn run_alternating(game: &GameInstance, iterations: usize, config: &SolveConfig) -> Result<SolveTrace, SolverError> {
    solve(
        game,
        SolveConfig {
            iterations,
            updates: UpdateMode::Alternating,
            ..config.clone()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::build_kuhn;
    use crate::treeplex::{BehavioralStrategy, TreePlexBuilder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wide_root() -> TreePlex {
        let mut b = TreePlexBuilder::new("r", &["a", "b", "c", "d"]);
        let k = b.observe(0, 0).unwrap();
        b.decide(k, "s", "leaf", &["x", "y"]).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn algorithm_parsing() {
        assert_eq!("oftrl_theory".parse(), Ok(Algorithm::OftrlTheory));
        assert_eq!("cfr_rm".parse(), Ok(Algorithm::CfrRm));
        assert_eq!("oftrl_scaled:2".parse(), Ok(Algorithm::OftrlScaled(2)));
        assert_eq!("oftrl_scaled(3)".parse(), Ok(Algorithm::OftrlScaled(3)));
        assert!("oftrl_scaled:4".parse::<Algorithm>().is_err());
        assert!("oftrl".parse::<Algorithm>().is_err());
        for a in [Algorithm::OftrlTheory, Algorithm::OftrlScaled(1), Algorithm::CfrRm] {
            assert_eq!(a.to_string().parse(), Ok(a));
        }
        assert_eq!(Algorithm::OftrlScaled(2).stepsize_multiplier(), 100.0);
    }

    #[test]
    fn record_every_default() {
        assert_eq!(default_record_every(1), 1);
        assert_eq!(default_record_every(512), 1);
        assert_eq!(default_record_every(1024), 2);
        assert_eq!(default_record_every(1025), 4);
        assert_eq!(default_record_every(4096), 8);
    }

    #[test]
    fn schedule_on_wide_root() {
        let tree = wide_root();
        let s = assign_stability(&tree, 1.0).unwrap();
        let k = tree.decision(0).unwrap().children[0].unwrap();
        assert_eq!(s.gamma[k], 0.25);
        assert!(assign_stability(&tree, 0.0).is_err());
    }

    #[test]
    fn kappa_formula() {
        // n = 4 at the root and B = 2 (three leaf decisions below one action).
        let mut b = TreePlexBuilder::new("r", &["a", "b", "c", "d"]);
        let k = b.observe(0, 0).unwrap();
        for s in ["s1", "s2", "s3"] {
            b.decide(k, s, "leaf", &["x", "y"]).unwrap();
        }
        let tree = b.build().unwrap();
        let s = assign_stability(&tree, 1.0).unwrap();
        assert_eq!(s.bounds[0], 2.0);
        assert_eq!(s.kappa[0], 0.125);
        assert_eq!(s.eta, s.kappa);
    }

    #[test]
    fn kuhn_schedule() {
        let g = build_kuhn();
        let t = &g.treeplex_x;
        let s = assign_stability(t, 1.0).unwrap();
        let k = t.decision(t.root()).unwrap().children[0].unwrap();
        assert_eq!(s.gamma[k], 0.5);
        for &j in t.decision_nodes() {
            if t.parent(j) == Some(k) {
                assert!((s.gamma[j] - 1.0 / (2.0 * 3.0f64.sqrt())).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn counterfactual_formula() {
        let mut b = TreePlexBuilder::new("r", &["a1", "a2"]);
        let k = b.observe(0, 0).unwrap();
        b.decide(k, "s", "c", &["u", "v"]).unwrap();
        let tree = b.build().unwrap();
        // [ℓ]_r = (0.3, 0.1); the child subtree value is 0.5·0.2 + 0.5·0.2 = 0.2.
        let loss = [0.3, 0.1, 0.2, 0.2];
        let probs = [0.5, 0.5, 0.5, 0.5];
        let cf = counterfactual_loss(&tree, 0, &loss, &probs).unwrap();
        assert!((cf[0] - 0.5).abs() < 1e-15 && (cf[1] - 0.1).abs() < 1e-15);
        let leaf = tree.decision_nodes()[1];
        assert_eq!(counterfactual_loss(&tree, leaf, &loss, &probs).unwrap(), vec![0.2, 0.2]);
        let zero = counterfactual_prediction(&tree, 0, &[0.0; 4], &probs).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn first_decision_is_uniform() {
        let g = build_kuhn();
        let s = assign_stability(&g.treeplex_x, 0.5).unwrap();
        let rule = LocalRule::Oftrl {
            regularizer: Regularizer::Entropy,
            multiplier: 1.0,
        };
        let mut m = TreeplexMinimizer::new(&g.treeplex_x, s, rule).unwrap();
        let x = m.next_decision(&[0.0; 13]).unwrap().to_vec();
        let uniform = g
            .treeplex_x
            .to_sequence_form(&BehavioralStrategy::uniform(&g.treeplex_x))
            .unwrap();
        assert_eq!(x, uniform.values);
        assert!(m.next_decision(&[0.0; 13]).is_err());
        m.observe_loss(&[0.0; 13]).unwrap();
        assert!(m.observe_loss(&[0.0; 13]).is_err());
    }

    #[test]
    fn local_sequence_form_is_renormalized() {
        let g = build_kuhn();
        let t = &g.treeplex_x;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = BehavioralStrategy::random(t, &mut rng);
        let root = local_sequence_form(t, t.root(), &b.probs).unwrap();
        assert_eq!(root, t.to_sequence_form(&b).unwrap().values);
        for &j in t.decision_nodes() {
            let local = local_sequence_form(t, j, &b.probs).unwrap();
            let n = t.action_range(j).unwrap().len();
            assert!((local[..n].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stability_report_of_identical_iterates() {
        let g = build_kuhn();
        let t = &g.treeplex_x;
        let b = BehavioralStrategy::uniform(t);
        let r = stability_report(t, &b.probs, &b.probs).unwrap();
        assert!(r.subtree_sq.iter().all(|&v| v == 0.0));
        assert!(r.local.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_iteration_gives_uniform_averages() {
        let g = build_kuhn();
        let trace = solve(&g, SolveConfig::new(Algorithm::OftrlTheory, 1)).unwrap();
        assert_eq!(trace.records.len(), 1);
        let uniform = g
            .treeplex_x
            .to_sequence_form(&BehavioralStrategy::uniform(&g.treeplex_x))
            .unwrap();
        let uniform_y = g
            .treeplex_y
            .to_sequence_form(&BehavioralStrategy::uniform(&g.treeplex_y))
            .unwrap();
        let (ax, ay) = average_strategies(&trace).unwrap();
        assert_eq!(ax, uniform.values);
        assert_eq!(ay, uniform_y.values);
        assert!(trace.records[0].residual > 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = SolveConfig::new(Algorithm::CfrRm, 0);
        assert!(c.validate().is_err());
        c.iterations = 4;
        c.record_every = 0;
        assert!(c.validate().is_err());
        c.record_every = 1;
        c.kappa_constant = -1.0;
        assert!(c.validate().is_err());
        c.kappa_constant = 1.0;
        c.algorithm = Algorithm::OftrlScaled(7);
        assert!(c.validate().is_err());
    }

    #[test]
    fn record_points() {
        let g = build_kuhn();
        let mut c = SolveConfig::new(Algorithm::CfrRm, 10);
        c.record_every = 4;
        let trace = solve(&g, c).unwrap();
        let ts: Vec<usize> = trace.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![4, 8, 10]);
    }
}
