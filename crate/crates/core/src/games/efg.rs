//! Two-player zero-sum extensive-form games with chance.

use std::collections::HashMap;

use crate::error::GameError;

/// Tolerance on chance probabilities summing to one.
pub const CHANCE_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn number(self) -> u8 {
        match self {
            Player::One => 1,
            Player::Two => 2,
        }
    }

    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EfgNodeKind {
    /// Outcome probabilities and the child reached by each outcome.
    Chance { outcomes: Vec<(f64, usize)> },
    Player {
        player: Player,
        infoset: String,
        actions: Vec<(String, usize)>,
    },
    /// Payoff to player 1.
    Terminal { payoff: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfgNode {
    pub id: String,
    /// Source line for parsed games, 0 for programmatically built ones.
    pub line: usize,
    pub kind: EfgNodeKind,
}

impl EfgNode {
    fn children(&self) -> Vec<usize> {
        match &self.kind {
            EfgNodeKind::Chance { outcomes } => outcomes.iter().map(|o| o.1).collect(),
            EfgNodeKind::Player { actions, .. } => actions.iter().map(|a| a.1).collect(),
            EfgNodeKind::Terminal { .. } => Vec::new(),
        }
    }
}

/// A validated game tree: chance distributions sum to one, information sets
/// are consistent and both players have perfect recall.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensiveFormGame {
    nodes: Vec<EfgNode>,
    root: usize,
}

pub(crate) fn is_valid_id(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_valid_label(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace) && !s.starts_with('#')
}

impl ExtensiveFormGame {
    pub fn new(nodes: Vec<EfgNode>, root: usize) -> Result<Self, GameError> {
        let semantic = |line: usize, message: String| GameError::Semantic { line, message };
        if root >= nodes.len() {
            return Err(semantic(0, format!("root index {root} out of range")));
        }

        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut parent: Vec<Option<usize>> = vec![None; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if !is_valid_id(&node.id) {
                return Err(semantic(node.line, format!("invalid node id {:?}", node.id)));
            }
            if ids.insert(&node.id, i).is_some() {
                return Err(semantic(node.line, format!("duplicate node id {}", node.id)));
            }
            for c in node.children() {
                if c >= nodes.len() {
                    return Err(semantic(node.line, format!("node {} has a dangling child", node.id)));
                }
                if c == root || parent[c].replace(i).is_some() {
                    return Err(semantic(
                        node.line,
                        format!("node {} has more than one parent", nodes[c].id),
                    ));
                }
            }
            match &node.kind {
                EfgNodeKind::Chance { outcomes } => {
                    if outcomes.is_empty() {
                        return Err(semantic(node.line, format!("chance node {} has no outcomes", node.id)));
                    }
                    if outcomes.iter().any(|(p, _)| !p.is_finite() || *p < 0.0) {
                        return Err(semantic(
                            node.line,
                            format!("chance node {} has an invalid probability", node.id),
                        ));
                    }
                    let sum: f64 = outcomes.iter().map(|o| o.0).sum();
                    if (sum - 1.0).abs() > CHANCE_SUM_TOL {
                        return Err(semantic(
                            node.line,
                            format!("chance node {}: probabilities sum to {sum}", node.id),
                        ));
                    }
                }
                EfgNodeKind::Player { infoset, actions, .. } => {
                    if actions.is_empty() {
                        return Err(semantic(node.line, format!("player node {} has no actions", node.id)));
                    }
                    if !is_valid_label(infoset) {
                        return Err(semantic(node.line, format!("invalid information set label {infoset:?}")));
                    }
                    for (k, (label, _)) in actions.iter().enumerate() {
                        if !is_valid_label(label) || label.contains(':') {
                            return Err(semantic(node.line, format!("invalid action label {label:?}")));
                        }
                        if actions[..k].iter().any(|(other, _)| other == label) {
                            return Err(semantic(node.line, format!("duplicate action label {label:?}")));
                        }
                    }
                }
                EfgNodeKind::Terminal { payoff } => {
                    if !payoff.is_finite() {
                        return Err(semantic(node.line, format!("terminal {} has a non-finite payoff", node.id)));
                    }
                }
            }
        }
        if let Some(orphan) = (0..nodes.len()).find(|&i| i != root && parent[i].is_none()) {
            return Err(semantic(
                nodes[orphan].line,
                format!("node {} is unreachable from the root", nodes[orphan].id),
            ));
        }

        let game = Self { nodes, root };
        game.check_information_sets()?;
        Ok(game)
    }

    /// Owner/action consistency and perfect recall for every information set.
    fn check_information_sets(&self) -> Result<(), GameError> {
        struct Seen<'a> {
            player: Player,
            actions: Vec<&'a str>,
            history: Vec<(&'a str, usize)>,
        }
        let mut seen: HashMap<&str, Seen> = HashMap::new();
        // Depth-first walk carrying each player's (infoset, action) history.
        let mut stack: Vec<(usize, [Vec<(&str, usize)>; 2])> = vec![(self.root, [Vec::new(), Vec::new()])];
        while let Some((i, histories)) = stack.pop() {
            let node = &self.nodes[i];
            match &node.kind {
                EfgNodeKind::Terminal { .. } => {}
                EfgNodeKind::Chance { outcomes } => {
                    for &(_, c) in outcomes.iter().rev() {
                        stack.push((c, histories.clone()));
                    }
                }
                EfgNodeKind::Player {
                    player,
                    infoset,
                    actions,
                } => {
                    let me = *player as usize;
                    let labels: Vec<&str> = actions.iter().map(|a| a.0.as_str()).collect();
                    match seen.get(infoset.as_str()) {
                        None => {
                            seen.insert(
                                infoset,
                                Seen {
                                    player: *player,
                                    actions: labels,
                                    history: histories[me].clone(),
                                },
                            );
                        }
                        Some(s) => {
                            if s.player != *player || s.actions != labels {
                                return Err(GameError::Semantic {
                                    line: node.line,
                                    message: format!(
                                        "information set {infoset:?} is inconsistent across its nodes"
                                    ),
                                });
                            }
                            if s.history != histories[me] {
                                return Err(GameError::PerfectRecall {
                                    infoset: infoset.clone(),
                                    line: node.line,
                                });
                            }
                        }
                    }
                    for (a, &(_, c)) in actions.iter().enumerate().rev() {
                        let mut next = histories.clone();
                        next[me].push((infoset.as_str(), a));
                        stack.push((c, next));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[EfgNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// The same game with the players' roles exchanged: owners swap and
    /// payoffs change sign.
    pub fn mirrored(&self) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| EfgNode {
                id: n.id.clone(),
                line: n.line,
                kind: match &n.kind {
                    EfgNodeKind::Player {
                        player,
                        infoset,
                        actions,
                    } => EfgNodeKind::Player {
                        player: player.opponent(),
                        infoset: infoset.clone(),
                        actions: actions.clone(),
                    },
                    EfgNodeKind::Terminal { payoff } => EfgNodeKind::Terminal { payoff: -payoff },
                    chance => chance.clone(),
                },
            })
            .collect();
        Self {
            nodes,
            root: self.root,
        }
    }
}

/// Bottom-up construction of games: children are created before parents.
#[derive(Debug, Default)]
pub struct EfgBuilder {
    nodes: Vec<EfgNode>,
}

impl EfgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, kind: EfgNodeKind) -> usize {
        let id = self.nodes.len();
        self.nodes.push(EfgNode {
            id: format!("n{id}"),
            line: 0,
            kind,
        });
        id
    }

    pub fn terminal(&mut self, payoff: f64) -> usize {
        self.push(EfgNodeKind::Terminal { payoff })
    }

    pub fn chance(&mut self, outcomes: Vec<(f64, usize)>) -> usize {
        self.push(EfgNodeKind::Chance { outcomes })
    }

    pub fn player(&mut self, player: Player, infoset: impl Into<String>, actions: Vec<(String, usize)>) -> usize {
        self.push(EfgNodeKind::Player {
            player,
            infoset: infoset.into(),
            actions,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn finish(self, root: usize) -> Result<ExtensiveFormGame, GameError> {
        ExtensiveFormGame::new(self.nodes, root)
    }
}
