//! Sequential decision processes (treeplexes) and their sequence-form
//! strategy spaces.
//!
//! A [`TreePlex`] alternates decision nodes, where the agent picks a point on
//! a simplex over its actions, and observation nodes, where the environment
//! reveals one of several signals. Every treeplex has a decision-node root;
//! builders for games insert a single-action `start` root.
//!
//! Sequences `(j, a)` are numbered by a depth-first pre-order walk with
//! actions in declared order. The entries of a decision node are therefore
//! contiguous and immediately followed by the entries of every subtree below
//! it, so the slice `[v]_{↓j}` of any vector is a contiguous range.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::TreeplexError;

/// Index of a node inside a [`TreePlex`].
pub type NodeId = usize;

/// Absolute tolerance for simplex and flow-conservation checks.
pub const STRATEGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionNode {
    pub label: String,
    pub actions: Vec<String>,
    /// `ρ(j, a)`: the observation node reached after each action, if any.
    pub children: Vec<Option<NodeId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationNode {
    pub signals: Vec<String>,
    /// `ρ(k, s)`: the decision node reached after each signal.
    pub children: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Decision(DecisionNode),
    Observation(ObservationNode),
}

impl Node {
    pub fn is_decision(&self) -> bool {
        matches!(self, Node::Decision(_))
    }
}

/// Incremental constructor for a [`TreePlex`].
#[derive(Debug, Clone)]
pub struct TreePlexBuilder {
    nodes: Vec<Node>,
    parent: Vec<Option<NodeId>>,
}

impl TreePlexBuilder {
    /// Starts a treeplex whose root decision node has the given actions.
    pub fn new(root_label: &str, root_actions: &[&str]) -> Self {
        let mut builder = Self {
            nodes: Vec::new(),
            parent: Vec::new(),
        };
        builder.push(
            Node::Decision(DecisionNode {
                label: root_label.to_string(),
                actions: root_actions.iter().map(|a| a.to_string()).collect(),
                children: vec![None; root_actions.len()],
            }),
            None,
        );
        builder
    }

    /// Starts a treeplex with the single-action `start` root.
    pub fn with_start_root() -> Self {
        Self::new("start", &["start"])
    }

    pub fn root(&self) -> NodeId {
        0
    }

    fn push(&mut self, node: Node, parent: Option<NodeId>) -> NodeId {
        self.nodes.push(node);
        self.parent.push(parent);
        self.nodes.len() - 1
    }

    /// Returns the observation node below `(decision, action)`, creating it
    /// on first use.
    pub fn observe(&mut self, decision: NodeId, action: usize) -> Result<NodeId, TreeplexError> {
        let existing = match self.nodes.get(decision) {
            Some(Node::Decision(d)) => *d
                .children
                .get(action)
                .ok_or(TreeplexError::UnknownAction { node: decision, action })?,
            Some(Node::Observation(_)) => return Err(TreeplexError::NotDecision(decision)),
            None => return Err(TreeplexError::UnknownNode(decision)),
        };
        if let Some(k) = existing {
            return Ok(k);
        }
        let k = self.push(
            Node::Observation(ObservationNode {
                signals: Vec::new(),
                children: Vec::new(),
            }),
            Some(decision),
        );
        if let Node::Decision(d) = &mut self.nodes[decision] {
            d.children[action] = Some(k);
        }
        Ok(k)
    }

    /// Adds a decision node reached from observation node `obs` via `signal`.
    pub fn decide(
        &mut self,
        obs: NodeId,
        signal: &str,
        label: &str,
        actions: &[&str],
    ) -> Result<NodeId, TreeplexError> {
        match self.nodes.get(obs) {
            Some(Node::Observation(_)) => {}
            Some(Node::Decision(_)) => return Err(TreeplexError::NotObservation(obs)),
            None => return Err(TreeplexError::UnknownNode(obs)),
        }
        let j = self.push(
            Node::Decision(DecisionNode {
                label: label.to_string(),
                actions: actions.iter().map(|a| a.to_string()).collect(),
                children: vec![None; actions.len()],
            }),
            Some(obs),
        );
        if let Node::Observation(k) = &mut self.nodes[obs] {
            k.signals.push(signal.to_string());
            k.children.push(j);
        }
        Ok(j)
    }

    pub fn build(self) -> Result<TreePlex, TreeplexError> {
        TreePlex::from_parts(self.nodes, self.parent)
    }
}

/// An immutable sequential decision process with its sequence indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePlex {
    nodes: Vec<Node>,
    parent: Vec<Option<NodeId>>,
    /// Sequence preceding each node; `None` for the root.
    parent_sequence: Vec<Option<usize>>,
    /// First sequence of each decision node's own action block.
    first_sequence: Vec<usize>,
    /// Sequence range covered by the subtree rooted at each node.
    subtree: Vec<Range<usize>>,
    /// Decision nodes in pre-order (parents before children).
    decision_order: Vec<NodeId>,
    /// Decision node owning each sequence.
    sequence_owner: Vec<NodeId>,
    /// Decision nodes directly below each sequence (children of `ρ(j, a)`).
    child_decisions: Vec<Vec<NodeId>>,
}

impl TreePlex {
    fn from_parts(nodes: Vec<Node>, parent: Vec<Option<NodeId>>) -> Result<Self, TreeplexError> {
        if nodes.is_empty() || !nodes[0].is_decision() {
            return Err(TreeplexError::Structure("root must be a decision node".into()));
        }
        for (id, node) in nodes.iter().enumerate() {
            match node {
                Node::Decision(d) if d.actions.is_empty() => {
                    return Err(TreeplexError::Structure(format!("decision node {id} has no actions")))
                }
                Node::Observation(k) if k.children.is_empty() => {
                    return Err(TreeplexError::Structure(format!(
                        "observation node {id} has no signals"
                    )))
                }
                _ => {}
            }
        }

        let n = nodes.len();
        let mut tree = TreePlex {
            parent,
            parent_sequence: vec![None; n],
            first_sequence: vec![usize::MAX; n],
            subtree: vec![0..0; n],
            decision_order: Vec::new(),
            sequence_owner: Vec::new(),
            child_decisions: Vec::new(),
            nodes,
        };

        // Iterative pre-order walk. Each frame is (node, entering?).
        let mut visited = vec![false; n];
        let mut stack = vec![(0usize, true)];
        while let Some((id, entering)) = stack.pop() {
            if !entering {
                tree.subtree[id].end = tree.sequence_owner.len();
                continue;
            }
            if std::mem::replace(&mut visited[id], true) {
                return Err(TreeplexError::Structure(format!("node {id} reached twice")));
            }
            let start = tree.sequence_owner.len();
            tree.subtree[id] = start..start;
            stack.push((id, false));
            match &tree.nodes[id] {
                Node::Decision(d) => {
                    tree.first_sequence[id] = start;
                    tree.decision_order.push(id);
                    for (a, child) in d.children.iter().enumerate() {
                        tree.sequence_owner.push(id);
                        tree.child_decisions.push(Vec::new());
                        if let Some(k) = *child {
                            tree.parent_sequence[k] = Some(start + a);
                        }
                    }
                    for &child in d.children.iter().rev().flatten() {
                        stack.push((child, true));
                    }
                }
                Node::Observation(k) => {
                    let seq = tree.parent_sequence[id]
                        .ok_or_else(|| TreeplexError::Structure(format!("orphan observation node {id}")))?;
                    for &j in &k.children {
                        tree.parent_sequence[j] = Some(seq);
                    }
                    tree.child_decisions[seq] = k.children.clone();
                    for &j in k.children.iter().rev() {
                        stack.push((j, true));
                    }
                }
            }
        }
        if let Some(id) = visited.iter().position(|v| !v) {
            return Err(TreeplexError::Structure(format!("node {id} unreachable from root")));
        }
        for (id, node) in tree.nodes.iter().enumerate() {
            let children: Vec<NodeId> = match node {
                Node::Decision(d) => d.children.iter().flatten().copied().collect(),
                Node::Observation(k) => k.children.clone(),
            };
            for c in children {
                if tree.parent[c] != Some(id) {
                    return Err(TreeplexError::Structure(format!("node {c} has inconsistent parent")));
                }
                if tree.nodes[c].is_decision() == node.is_decision() {
                    return Err(TreeplexError::Structure(format!(
                        "node {c} does not alternate kind with its parent {id}"
                    )));
                }
            }
        }
        Ok(tree)
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, TreeplexError> {
        self.nodes.get(id).ok_or(TreeplexError::UnknownNode(id))
    }

    pub fn decision(&self, id: NodeId) -> Result<&DecisionNode, TreeplexError> {
        match self.node(id)? {
            Node::Decision(d) => Ok(d),
            Node::Observation(_) => Err(TreeplexError::NotDecision(id)),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_sequences(&self) -> usize {
        self.sequence_owner.len()
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id]
    }

    /// The sequence `(j, a)` leading to `id`, or `None` at the root.
    pub fn parent_sequence(&self, id: NodeId) -> Option<usize> {
        self.parent_sequence[id]
    }

    /// Decision nodes in pre-order; iterate in reverse for bottom-up passes.
    pub fn decision_nodes(&self) -> &[NodeId] {
        &self.decision_order
    }

    pub fn sequence_owner(&self, seq: usize) -> NodeId {
        self.sequence_owner[seq]
    }

    /// The contiguous range of sequences `[v]_j` of decision node `j`.
    pub fn action_range(&self, j: NodeId) -> Result<Range<usize>, TreeplexError> {
        let d = self.decision(j)?;
        let start = self.first_sequence[j];
        Ok(start..start + d.actions.len())
    }

    /// The contiguous range of sequences at or below any node.
    pub fn subtree_range(&self, id: NodeId) -> Result<Range<usize>, TreeplexError> {
        self.subtree.get(id).cloned().ok_or(TreeplexError::UnknownNode(id))
    }

    /// Decision nodes reached from sequence `seq` through its observation node.
    pub fn child_decisions(&self, seq: usize) -> &[NodeId] {
        &self.child_decisions[seq]
    }

    /// Returns `[v]_{↓j}`, the entries at or below decision node `j`.
    pub fn slice_down<'v>(&self, v: &'v [f64], j: NodeId) -> Result<&'v [f64], TreeplexError> {
        self.decision(j)?;
        self.check_len(v.len())?;
        Ok(&v[self.subtree[j].clone()])
    }

    pub fn check_len(&self, len: usize) -> Result<(), TreeplexError> {
        if len != self.num_sequences() {
            return Err(TreeplexError::DimensionMismatch {
                expected: self.num_sequences(),
                found: len,
            });
        }
        Ok(())
    }

    /// Upper bounds `B_v` on the 2-norm of any sequence-form strategy of the
    /// subtree rooted at each node, indexed by node id.
    pub fn subtree_norm_bounds(&self) -> Vec<f64> {
        let mut bounds = vec![0.0; self.nodes.len()];
        for &j in self.decision_order.iter().rev() {
            let Node::Decision(d) = &self.nodes[j] else { unreachable!() };
            let mut max_child_sq: f64 = 0.0;
            for &k in d.children.iter().flatten() {
                let Node::Observation(obs) = &self.nodes[k] else { unreachable!() };
                let sq: f64 = obs.children.iter().map(|&c| bounds[c] * bounds[c]).sum();
                bounds[k] = sq.sqrt();
                max_child_sq = max_child_sq.max(sq);
            }
            bounds[j] = (1.0 + max_child_sq).sqrt();
        }
        bounds
    }

    /// Converts a behavioral strategy into its sequence form.
    pub fn to_sequence_form(&self, b: &BehavioralStrategy) -> Result<SequenceVector, TreeplexError> {
        self.check_len(b.probs.len())?;
        let mut values = vec![0.0; self.num_sequences()];
        for &j in &self.decision_order {
            let mass = self.parent_sequence[j].map_or(1.0, |p| values[p]);
            for s in self.action_range(j)? {
                values[s] = mass * b.probs[s];
            }
        }
        Ok(SequenceVector::strategy(values))
    }

    /// Recovers behavioral probabilities from a sequence-form strategy.
    ///
    /// Decision nodes whose parent sequence has zero mass get the uniform
    /// distribution.
    pub fn to_behavioral(&self, v: &SequenceVector) -> Result<BehavioralStrategy, TreeplexError> {
        self.check_len(v.values.len())?;
        let mut probs = vec![0.0; self.num_sequences()];
        for &j in &self.decision_order {
            let range = self.action_range(j)?;
            let mass = self.parent_sequence[j].map_or(1.0, |p| v.values[p]);
            let n = range.len() as f64;
            for s in range {
                probs[s] = if mass > 0.0 { v.values[s] / mass } else { 1.0 / n };
            }
        }
        Ok(BehavioralStrategy { probs })
    }

    /// Largest violation of non-negativity or flow conservation.
    pub fn flow_residual(&self, v: &[f64]) -> Result<f64, TreeplexError> {
        self.check_len(v.len())?;
        let mut worst: f64 = 0.0;
        for &x in v {
            worst = worst.max(-x);
        }
        for &j in &self.decision_order {
            let mass = self.parent_sequence[j].map_or(1.0, |p| v[p]);
            let sum: f64 = v[self.action_range(j)?].iter().sum();
            worst = worst.max((sum - mass).abs());
        }
        Ok(worst)
    }

    /// Checks the strategy-kind invariants within [`STRATEGY_TOL`].
    pub fn check_strategy(&self, v: &[f64]) -> Result<(), TreeplexError> {
        let residual = self.flow_residual(v)?;
        if residual > STRATEGY_TOL {
            return Err(TreeplexError::NotAStrategy(residual));
        }
        Ok(())
    }

    /// A random treeplex for tests and invariant checks. `depth` counts
    /// decision levels below the root.
    pub fn random(seed: u64, depth: usize, max_actions: usize, max_signals: usize) -> TreePlex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut builder = TreePlexBuilder::new("root", &["a0", "a1"][..rng.gen_range(1..=2)]);
        let mut frontier = vec![builder.root()];
        for level in 0..depth {
            let mut next = Vec::new();
            for j in frontier {
                let n = match &builder.nodes[j] {
                    Node::Decision(d) => d.actions.len(),
                    Node::Observation(_) => unreachable!(),
                };
                for a in 0..n {
                    // Some actions end the process.
                    if rng.gen_bool(0.25) {
                        continue;
                    }
                    let k = builder.observe(j, a).expect("fresh decision node");
                    for s in 0..rng.gen_range(1..=max_signals.max(1)) {
                        let actions: Vec<String> = (0..rng.gen_range(1..=max_actions.max(1)))
                            .map(|i| format!("a{i}"))
                            .collect();
                        let refs: Vec<&str> = actions.iter().map(String::as_str).collect();
                        let child = builder
                            .decide(k, &format!("s{s}"), &format!("L{level}"), &refs)
                            .expect("fresh observation node");
                        next.push(child);
                    }
                }
            }
            frontier = next;
        }
        builder.build().expect("random treeplex is well formed")
    }
}

/// Which role a sequence-form vector plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorKind {
    Strategy,
    Loss,
    Prediction,
}

/// A dense vector with one entry per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceVector {
    pub kind: VectorKind,
    pub values: Vec<f64>,
}

impl SequenceVector {
    pub fn strategy(values: Vec<f64>) -> Self {
        Self {
            kind: VectorKind::Strategy,
            values,
        }
    }

    pub fn loss(values: Vec<f64>) -> Self {
        Self {
            kind: VectorKind::Loss,
            values,
        }
    }

    pub fn prediction(values: Vec<f64>) -> Self {
        Self {
            kind: VectorKind::Prediction,
            values,
        }
    }

    pub fn zeros(kind: VectorKind, len: usize) -> Self {
        Self {
            kind,
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.values, other)
    }
}

/// Local action probabilities `x̂_j`, stored flat in sequence order so that
/// the block of decision node `j` sits at `tree.action_range(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralStrategy {
    pub probs: Vec<f64>,
}

impl BehavioralStrategy {
    pub fn uniform(tree: &TreePlex) -> Self {
        let mut probs = vec![0.0; tree.num_sequences()];
        for &j in tree.decision_nodes() {
            let range = tree.action_range(j).expect("decision node");
            let p = 1.0 / range.len() as f64;
            probs[range].fill(p);
        }
        Self { probs }
    }

    /// Random interior point at every decision node.
    pub fn random<R: Rng>(tree: &TreePlex, rng: &mut R) -> Self {
        let mut probs = vec![0.0; tree.num_sequences()];
        for &j in tree.decision_nodes() {
            let range = tree.action_range(j).expect("decision node");
            let block = &mut probs[range];
            for p in block.iter_mut() {
                *p = rng.gen_range(0.01..1.0);
            }
            let total: f64 = block.iter().sum();
            block.iter_mut().for_each(|p| *p /= total);
        }
        Self { probs }
    }

    pub fn at(&self, tree: &TreePlex, j: NodeId) -> Result<&[f64], TreeplexError> {
        Ok(&self.probs[tree.action_range(j)?])
    }

    pub fn set(&mut self, tree: &TreePlex, j: NodeId, point: &[f64]) -> Result<(), TreeplexError> {
        let range = tree.action_range(j)?;
        if range.len() != point.len() {
            return Err(TreeplexError::DimensionMismatch {
                expected: range.len(),
                found: point.len(),
            });
        }
        self.probs[range].copy_from_slice(point);
        Ok(())
    }

    pub fn validate(&self, tree: &TreePlex) -> Result<(), TreeplexError> {
        tree.check_len(self.probs.len())?;
        for &j in tree.decision_nodes() {
            let block = self.at(tree, j)?;
            let sum: f64 = block.iter().sum();
            if block.iter().any(|&p| p < -STRATEGY_TOL) || (sum - 1.0).abs() > STRATEGY_TOL {
                return Err(TreeplexError::NotASimplexPoint(j));
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
