//! Best responses, saddle-point residuals, brute-force regret oracles and
//! convergence-rate fits.
//!
//! Player 1 (`x`) maximizes `xᵀAy` and player 2 (`y`) minimizes it, so the
//! residual of a profile is `max_x̂ x̂ᵀAȳ − min_ŷ x̄ᵀAŷ`.

use crate::cfr::{counterfactual_vectors, local_sequence_form, TraceRecord};
use crate::error::{SolverError, TreeplexError};
use crate::games::GameInstance;
use crate::treeplex::{dot, Node, NodeId, TreePlex};

/// Largest subtree handed to the vertex-enumeration oracles, in sequences.
pub const MAX_ORACLE_SEQUENCES: usize = 1000;
/// Largest number of vertices the oracles will enumerate.
pub const MAX_ORACLE_VERTICES: u128 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

/// `min_{x ∈ X△} ⟨loss, x⟩` by backward induction, with the minimizing pure
/// strategy in sequence form. Ties go to the lowest action index.
pub fn treeplex_best_response(tree: &TreePlex, loss: &[f64]) -> Result<(f64, Vec<f64>), TreeplexError> {
    tree.check_len(loss.len())?;
    let mut value = vec![0.0; tree.num_nodes()];
    let mut choice = vec![0usize; tree.num_nodes()];
    for &j in tree.decision_nodes().iter().rev() {
        let range = tree.action_range(j)?;
        let mut best = f64::INFINITY;
        for (a, s) in range.enumerate() {
            let q = loss[s] + tree.child_decisions(s).iter().map(|&c| value[c]).sum::<f64>();
            if q < best {
                best = q;
                choice[j] = a;
            }
        }
        value[j] = best;
    }
    let mut x = vec![0.0; tree.num_sequences()];
    for &j in tree.decision_nodes() {
        let mass = tree.parent_sequence(j).map_or(1.0, |p| x[p]);
        x[tree.action_range(j)?.start + choice[j]] = mass;
    }
    Ok((value[tree.root()], x))
}

/// Best response of `side` to `opponent`. The value is in player 1's payoff
/// units: `max_x xᵀAy` for the x side, `min_y xᵀAy` for the y side.
pub fn best_response_value(game: &GameInstance, side: Side, opponent: &[f64]) -> Result<(f64, Vec<f64>), SolverError> {
    match side {
        Side::X => {
            game.treeplex_y.check_len(opponent.len())?;
            let loss: Vec<f64> = game.a_times_y(opponent).into_iter().map(|v| -v).collect();
            let (v, x) = treeplex_best_response(&game.treeplex_x, &loss)?;
            Ok((-v, x))
        }
        Side::Y => {
            game.treeplex_x.check_len(opponent.len())?;
            let loss = game.a_t_times_x(opponent);
            Ok(treeplex_best_response(&game.treeplex_y, &loss)?)
        }
    }
}

/// `ξ = max_x̂ x̂ᵀAȳ − min_ŷ x̄ᵀAŷ`.
pub fn saddle_residual(game: &GameInstance, x: &[f64], y: &[f64]) -> Result<f64, SolverError> {
    let (up, _) = best_response_value(game, Side::X, y)?;
    let (down, _) = best_response_value(game, Side::Y, x)?;
    Ok(up - down)
}

fn decision_children(tree: &TreePlex, v: NodeId) -> Result<Vec<NodeId>, TreeplexError> {
    match tree.node(v)? {
        Node::Observation(o) => Ok(o.children.clone()),
        Node::Decision(_) => Ok(vec![v]),
    }
}

/// Number of deterministic strategies below `v`, saturating.
pub fn vertex_count(tree: &TreePlex, v: NodeId) -> Result<u128, TreeplexError> {
    match tree.node(v)? {
        Node::Observation(o) => o
            .children
            .iter()
            .try_fold(1u128, |acc, &j| Ok(acc.saturating_mul(vertex_count(tree, j)?))),
        Node::Decision(d) => d.children.iter().try_fold(0u128, |acc, child| {
            let below = match child {
                Some(k) => vertex_count(tree, *k)?,
                None => 1,
            };
            Ok(acc.saturating_add(below))
        }),
    }
}

fn subtree_len(tree: &TreePlex, v: NodeId) -> Result<usize, TreeplexError> {
    decision_children(tree, v)?
        .iter()
        .map(|&j| tree.subtree_range(j).map(|r| r.len()))
        .sum()
}

fn guard(tree: &TreePlex, v: NodeId) -> Result<(), SolverError> {
    let len = subtree_len(tree, v)?;
    if len > MAX_ORACLE_SEQUENCES {
        return Err(SolverError::OracleLimit(format!(
            "{len} sequences below node {v} exceed {MAX_ORACLE_SEQUENCES}"
        )));
    }
    let count = vertex_count(tree, v)?;
    if count > MAX_ORACLE_VERTICES {
        return Err(SolverError::OracleLimit(format!(
            "{count} vertices below node {v} exceed {MAX_ORACLE_VERTICES}"
        )));
    }
    Ok(())
}

fn vertices_below(tree: &TreePlex, v: NodeId) -> Vec<Vec<usize>> {
    match &tree.nodes()[v] {
        Node::Observation(o) => {
            let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
            for &j in &o.children {
                let child = vertices_below(tree, j);
                acc = acc
                    .iter()
                    .flat_map(|prefix| {
                        child.iter().map(move |suffix| {
                            let mut joined = prefix.clone();
                            joined.extend_from_slice(suffix);
                            joined
                        })
                    })
                    .collect();
            }
            acc
        }
        Node::Decision(d) => {
            let start = tree.action_range(v).expect("decision node").start;
            let mut out = Vec::new();
            for (a, child) in d.children.iter().enumerate() {
                let below = match child {
                    Some(k) => vertices_below(tree, *k),
                    None => vec![Vec::new()],
                };
                for mut support in below {
                    support.insert(0, start + a);
                    out.push(support);
                }
            }
            out
        }
    }
}

/// Every deterministic strategy below `v`, as the set of sequences it plays.
/// Guarded by [`MAX_ORACLE_SEQUENCES`] and [`MAX_ORACLE_VERTICES`].
pub fn enumerate_vertices(tree: &TreePlex, v: NodeId) -> Result<Vec<Vec<usize>>, SolverError> {
    guard(tree, v)?;
    Ok(vertices_below(tree, v))
}

/// One round seen by a treeplex regret minimizer: its behavioral strategy
/// and the loss vector it observed.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryStep {
    pub probs: Vec<f64>,
    pub loss: Vec<f64>,
}

/// `R̃ᵀ_v`, with the comparator minimized by enumerating the vertices of the
/// strategy space below `v`.
pub fn brute_force_regret(tree: &TreePlex, v: NodeId, history: &[HistoryStep]) -> Result<f64, SolverError> {
    let vertices = enumerate_vertices(tree, v)?;
    let mut cumulative = vec![0.0; tree.num_sequences()];
    let mut incurred = 0.0;
    for step in history {
        tree.check_len(step.probs.len())?;
        tree.check_len(step.loss.len())?;
        for j in decision_children(tree, v)? {
            let range = tree.subtree_range(j)?;
            let local = local_sequence_form(tree, j, &step.probs)?;
            incurred += dot(&step.loss[range.clone()], &local);
        }
        for (c, l) in cumulative.iter_mut().zip(&step.loss) {
            *c += l;
        }
    }
    let best = vertices
        .iter()
        .map(|support| support.iter().map(|&s| cumulative[s]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(if history.is_empty() { 0.0 } else { incurred - best })
}

/// `R̂ᵀ_j` recomputed from its definition: counterfactual losses built with
/// each round's own subtree decisions, compared with the best fixed action.
pub fn brute_force_counterfactual_regret(tree: &TreePlex, j: NodeId, history: &[HistoryStep]) -> Result<f64, SolverError> {
    let range = tree.action_range(j)?;
    let mut cumulative = vec![0.0; range.len()];
    let mut incurred = 0.0;
    for step in history {
        let (cf, _) = counterfactual_vectors(tree, &step.loss, &step.probs)?;
        incurred += dot(&cf[range.clone()], &step.probs[range.clone()]);
        for (c, s) in cumulative.iter_mut().zip(range.clone()) {
            *c += cf[s];
        }
    }
    let best = cumulative.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if history.is_empty() { 0.0 } else { incurred - best })
}

/// `ξ ≈ constant · t^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub constant: f64,
}

/// Least-squares fit of `ln ξ` against `ln t` over the records in the last
/// half of the run (`t ≥ t_last / 2`). Records with non-positive residuals
/// are skipped. The run must reach `t = 64`.
pub fn fit_convergence_rate(records: &[TraceRecord]) -> Result<RateFit, SolverError> {
    let last = records.last().ok_or(SolverError::EmptyTrace)?.t;
    if last < 64 {
        return Err(SolverError::InsufficientData(format!(
            "rate fits need at least 64 iterations, trace ends at {last}"
        )));
    }
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| 2 * r.t >= last && r.residual > 0.0 && r.residual.is_finite())
        .map(|r| ((r.t as f64).ln(), r.residual.ln()))
        .collect();
    if points.len() < 2 {
        return Err(SolverError::InsufficientData(format!(
            "{} usable records in the last half of the trace",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(SolverError::InsufficientData("all usable records share one t".into()));
    }
    let exponent = sxy / sxx;
    Ok(RateFit {
        exponent,
        constant: (my - exponent * mx).exp(),
    })
}

/// Envelope `C · t^exponent` through the record at `anchor`, and the largest
/// ratio `ξᵗ / (C · t^exponent)` over the records with `t ≥ anchor`.
pub fn power_envelope(records: &[TraceRecord], anchor: usize, exponent: f64) -> Option<(f64, f64)> {
    let at = records.iter().find(|r| r.t == anchor)?;
    let c = at.residual / (anchor as f64).powf(exponent);
    let worst = records
        .iter()
        .filter(|r| r.t >= anchor)
        .map(|r| r.residual / (c * (r.t as f64).powf(exponent)))
        .fold(0.0, f64::max);
    Some((c, worst))
}

/// Residual in milli big blinds per game.
pub fn residual_to_mbbg(residual: f64, big_blind: f64) -> f64 {
    residual / big_blind * 1000.0
}
