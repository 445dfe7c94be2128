//! Regret minimizers over a single probability simplex.
//!
//! [`Oftrl`] is the optimistic follow-the-regularized-leader update with a
//! pluggable [`Regularizer`]; [`RegretMatching`] is the prediction-free
//! baseline used by vanilla CFR. Both implement
//! [`PredictiveRegretMinimizer`], whose calls must alternate
//! `next_decision`, `observe_loss`, `next_decision`, ...

use crate::error::RegretError;

/// Strongly convex regularizer on the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regularizer {
    /// Negative entropy `Σ x ln x`; 1-strongly convex in ℓ₁, dual norm ℓ∞.
    Entropy,
    /// `½‖x‖²`; 1-strongly convex in ℓ₂, self-dual.
    Euclidean,
}

impl Regularizer {
    /// `Δ_R = max R − min R` over the `n`-simplex.
    pub fn diameter(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Regularizer::Entropy => n.ln(),
            Regularizer::Euclidean => 0.5 * (1.0 - 1.0 / n),
        }
    }

    /// Norm in which the regularizer is strongly convex.
    pub fn primal_norm(self, v: &[f64]) -> f64 {
        match self {
            Regularizer::Entropy => v.iter().map(|x| x.abs()).sum(),
            Regularizer::Euclidean => norm2(v),
        }
    }

    pub fn dual_norm(self, v: &[f64]) -> f64 {
        match self {
            Regularizer::Entropy => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Regularizer::Euclidean => norm2(v),
        }
    }

    pub fn value(self, x: &[f64]) -> f64 {
        match self {
            Regularizer::Entropy => x.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum(),
            Regularizer::Euclidean => 0.5 * x.iter().map(|p| p * p).sum::<f64>(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regularizer::Entropy => "entropy",
            Regularizer::Euclidean => "euclidean",
        }
    }
}

impl std::str::FromStr for Regularizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entropy" => Ok(Regularizer::Entropy),
            "euclidean" => Ok(Regularizer::Euclidean),
            other => Err(format!("unknown regularizer {other:?} (expected entropy or euclidean)")),
        }
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `argmin_{x ∈ Δⁿ} ⟨x, L⟩ + R(x)/η`.
pub fn argmin_reg(cumulative: &[f64], eta: f64, reg: Regularizer) -> Result<Vec<f64>, RegretError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(RegretError::BadStepsize(eta));
    }
    if cumulative.iter().any(|x| !x.is_finite()) {
        return Err(RegretError::NonFinite);
    }
    let scores: Vec<f64> = cumulative.iter().map(|l| -eta * l).collect();
    Ok(match reg {
        Regularizer::Entropy => softmax(&scores),
        Regularizer::Euclidean => project_simplex(&scores),
    })
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores
        .iter()
        .map(|s| {
            let e = (s - max).exp();
            if e < 1e-300 {
                0.0
            } else {
                e
            }
        })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        prefix += u;
        let candidate = (prefix - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// A regret minimizer that may use a prediction of the upcoming loss.
pub trait PredictiveRegretMinimizer: Send {
    fn dim(&self) -> usize;

    /// Produces the next decision given a prediction of the next loss.
    fn next_decision(&mut self, prediction: &[f64]) -> Result<&[f64], RegretError>;

    /// Observes the loss that evaluates the most recent decision.
    fn observe_loss(&mut self, loss: &[f64]) -> Result<(), RegretError>;

    /// The most recent decision (uniform before the first call).
    fn last_decision(&self) -> &[f64];
}

fn check_dim(expected: usize, v: &[f64]) -> Result<(), RegretError> {
    if v.len() != expected {
        return Err(RegretError::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(RegretError::NonFinite);
    }
    Ok(())
}

/// Optimistic follow-the-regularized-leader on the simplex.
#[derive(Debug, Clone)]
pub struct Oftrl {
    eta: f64,
    regularizer: Regularizer,
    cumulative_loss: Vec<f64>,
    last_prediction: Vec<f64>,
    last_decision: Vec<f64>,
    t: usize,
    pending: bool,
}

impl Oftrl {
    pub fn new(n: usize, eta: f64, regularizer: Regularizer) -> Result<Self, RegretError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(RegretError::BadStepsize(eta));
        }
        Ok(Self {
            eta,
            regularizer,
            cumulative_loss: vec![0.0; n],
            last_prediction: vec![0.0; n],
            last_decision: vec![1.0 / n as f64; n],
            t: 0,
            pending: false,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn cumulative_loss(&self) -> &[f64] {
        &self.cumulative_loss
    }

    pub fn last_prediction(&self) -> &[f64] {
        &self.last_prediction
    }

    /// Number of losses observed so far.
    pub fn iterations(&self) -> usize {
        self.t
    }
}

impl PredictiveRegretMinimizer for Oftrl {
    fn dim(&self) -> usize {
        self.cumulative_loss.len()
    }

    fn next_decision(&mut self, prediction: &[f64]) -> Result<&[f64], RegretError> {
        if self.pending {
            return Err(RegretError::DecisionPending);
        }
        check_dim(self.dim(), prediction)?;
        let target: Vec<f64> = self
            .cumulative_loss
            .iter()
            .zip(prediction)
            .map(|(l, m)| l + m)
            .collect();
        self.last_decision = argmin_reg(&target, self.eta, self.regularizer)?;
        self.last_prediction.copy_from_slice(prediction);
        self.pending = true;
        Ok(&self.last_decision)
    }

    fn observe_loss(&mut self, loss: &[f64]) -> Result<(), RegretError> {
        if !self.pending {
            return Err(RegretError::NoPendingDecision);
        }
        check_dim(self.dim(), loss)?;
        for (acc, l) in self.cumulative_loss.iter_mut().zip(loss) {
            *acc += l;
        }
        self.t += 1;
        self.pending = false;
        Ok(())
    }

    fn last_decision(&self) -> &[f64] {
        &self.last_decision
    }
}

/// Regret matching: play proportionally to positive cumulative regret.
#[derive(Debug, Clone)]
pub struct RegretMatching {
    cumulative_regret: Vec<f64>,
    last_decision: Vec<f64>,
    pending: bool,
}

impl RegretMatching {
    pub fn new(n: usize) -> Self {
        Self {
            cumulative_regret: vec![0.0; n],
            last_decision: vec![1.0 / n as f64; n],
            pending: false,
        }
    }

    pub fn cumulative_regret(&self) -> &[f64] {
        &self.cumulative_regret
    }
}

impl PredictiveRegretMinimizer for RegretMatching {
    fn dim(&self) -> usize {
        self.cumulative_regret.len()
    }

    /// The prediction is ignored.
    fn next_decision(&mut self, prediction: &[f64]) -> Result<&[f64], RegretError> {
        if self.pending {
            return Err(RegretError::DecisionPending);
        }
        check_dim(self.dim(), prediction)?;
        let positive: f64 = self.cumulative_regret.iter().map(|r| r.max(0.0)).sum();
        let n = self.dim();
        for (x, r) in self.last_decision.iter_mut().zip(&self.cumulative_regret) {
            *x = if positive > 0.0 {
                r.max(0.0) / positive
            } else {
                1.0 / n as f64
            };
        }
        self.pending = true;
        Ok(&self.last_decision)
    }

    fn observe_loss(&mut self, loss: &[f64]) -> Result<(), RegretError> {
        if !self.pending {
            return Err(RegretError::NoPendingDecision);
        }
        check_dim(self.dim(), loss)?;
        let expected: f64 = loss.iter().zip(&self.last_decision).map(|(l, x)| l * x).sum();
        for (r, l) in self.cumulative_regret.iter_mut().zip(loss) {
            *r += expected - l;
        }
        self.pending = false;
        Ok(())
    }

    fn last_decision(&self) -> &[f64] {
        &self.last_decision
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Incremental bookkeeping of `R^T = Σ⟨ℓᵗ, xᵗ⟩ − min_x Σ⟨ℓᵗ, x⟩` over a simplex.
#[derive(Debug, Clone)]
pub struct RegretAccount {
    cumulative_loss: Vec<f64>,
    incurred: CompensatedSum,
    rounds: usize,
}

impl RegretAccount {
    pub fn new(n: usize) -> Self {
        Self {
            cumulative_loss: vec![0.0; n],
            incurred: CompensatedSum::default(),
            rounds: 0,
        }
    }

    pub fn record(&mut self, decision: &[f64], loss: &[f64]) {
        let mut inner = 0.0;
        for ((acc, l), x) in self.cumulative_loss.iter_mut().zip(loss).zip(decision) {
            *acc += l;
            inner += l * x;
        }
        self.incurred.add(inner);
        self.rounds += 1;
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn cumulative_loss(&self) -> &[f64] {
        &self.cumulative_loss
    }

    /// Regret against the best fixed action (a simplex vertex).
    pub fn regret(&self) -> f64 {
        let best = self.cumulative_loss.iter().copied().fold(f64::INFINITY, f64::min);
        if self.rounds == 0 {
            return 0.0;
        }
        self.incurred.value() - best
    }
}

/// Cumulative regret of a decision sequence against a loss sequence.
pub fn cumulative_regret(decisions: &[Vec<f64>], losses: &[Vec<f64>]) -> Result<f64, RegretError> {
    if decisions.len() != losses.len() {
        return Err(RegretError::DimensionMismatch {
            expected: decisions.len(),
            found: losses.len(),
        });
    }
    let Some(first) = decisions.first() else {
        return Ok(0.0);
    };
    let mut account = RegretAccount::new(first.len());
    for (x, l) in decisions.iter().zip(losses) {
        check_dim(first.len(), x)?;
        check_dim(first.len(), l)?;
        account.record(x, l);
    }
    Ok(account.regret())
}
