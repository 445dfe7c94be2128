//! Oracles shared by the integration tests. Nothing here calls into the
//! solver; the goal is an independent second computation.

#![allow(dead_code)]

use std::collections::HashMap;

use spcfr_core::games::{EfgNodeKind, ExtensiveFormGame, GameInstance, Player};
use spcfr_core::treeplex::{BehavioralStrategy, TreePlex};

const EPS: f64 = 1e-11;

/// Dense two-phase simplex with Bland's rule:
/// minimize `c·z` subject to `A z = b`, `z ≥ 0`. Returns `(value, z)`, or
/// `None` if infeasible or unbounded.
pub fn simplex_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let rhs = n + m;
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width];
        for j in 0..n {
            row[j] = sign * a[i][j];
        }
        row[n + i] = 1.0;
        row[rhs] = sign * b[i];
        t.push(row);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase one: minimize the sum of artificials.
    let mut obj = vec![0.0; width];
    for row in &t {
        for j in 0..n {
            obj[j] -= row[j];
        }
        obj[rhs] -= row[rhs];
    }
    run(&mut t, &mut obj, &mut basis, |j| j < n + m)?;
    if -obj[rhs] > 1e-8 {
        return None;
    }
    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut r = 0;
    while r < t.len() {
        if basis[r] >= n {
            match (0..n).find(|&j| t[r][j].abs() > 1e-9) {
                Some(j) => pivot(&mut t, &mut obj, &mut basis, r, j),
                None => {
                    t.remove(r);
                    basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // Phase two.
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(c);
    for (i, row) in t.iter().enumerate() {
        let cb = c[basis[i]];
        if cb != 0.0 {
            for j in 0..width {
                obj[j] -= cb * row[j];
            }
        }
    }
    run(&mut t, &mut obj, &mut basis, |j| j < n)?;
    let mut z = vec![0.0; n];
    for (i, row) in t.iter().enumerate() {
        z[basis[i]] = row[rhs];
    }
    let value = c.iter().zip(&z).map(|(a, b)| a * b).sum();
    Some((value, z))
}

fn pivot(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], r: usize, c: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r && row[c] != 0.0 {
            let f = row[c];
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
        }
    }
    let f = obj[c];
    for (v, pr) in obj.iter_mut().zip(&pivot_row) {
        *v -= f * pr;
    }
    basis[r] = c;
}

fn run(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], allowed: impl Fn(usize) -> bool) -> Option<()> {
    let rhs = obj.len() - 1;
    loop {
        let Some(entering) = (0..rhs).find(|&j| allowed(j) && obj[j] < -EPS) else {
            return Some(());
        };
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[entering] > EPS {
                let ratio = row[rhs] / row[entering];
                leave = match leave {
                    Some((l, best)) if ratio > best + EPS => Some((l, best)),
                    Some((l, best)) if (ratio - best).abs() <= EPS && basis[l] < basis[i] => Some((l, best)),
                    _ => Some((i, ratio)),
                };
            }
        }
        let (r, _) = leave?;
        pivot(t, obj, basis, r, entering);
    }
}

/// Rows `Σ_a v[ja] − v[parent(j)] = [j is root]`, one per decision node.
fn constraint_rows(tree: &TreePlex) -> Vec<(Vec<(usize, f64)>, f64)> {
    tree.decision_nodes()
        .iter()
        .map(|&j| {
            let mut row: Vec<(usize, f64)> = tree.action_range(j).unwrap().map(|s| (s, 1.0)).collect();
            let rhs = match tree.parent_sequence(j) {
                Some(p) => {
                    row.push((p, -1.0));
                    0.0
                }
                None => 1.0,
            };
            (row, rhs)
        })
        .collect()
}

/// `max_x min_y xᵀAy` by the sequence-form LP. Returns the value and the
/// maximizing x.
pub fn sequence_form_value(game: &GameInstance) -> (f64, Vec<f64>) {
    let nx = game.num_sequences_x();
    let ny = game.num_sequences_y();
    let ex = constraint_rows(&game.treeplex_x);
    let fy = constraint_rows(&game.treeplex_y);
    let my = fy.len();
    // Variables: x (nx), v⁺ (my), v⁻ (my), slack (ny).
    let n = nx + 2 * my + ny;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (row, rhs) in &ex {
        let mut r = vec![0.0; n];
        for &(s, v) in row {
            r[s] += v;
        }
        a.push(r);
        b.push(*rhs);
    }
    // Fᵀv − Aᵀx + slack = 0 for every y sequence.
    for s in 0..ny {
        let mut r = vec![0.0; n];
        for (k, (row, _)) in fy.iter().enumerate() {
            for &(seq, v) in row {
                if seq == s {
                    r[nx + k] += v;
                    r[nx + my + k] -= v;
                }
            }
        }
        for e in game.payoff.iter().filter(|e| e.y == s) {
            r[e.x] -= e.value;
        }
        r[nx + 2 * my + s] = 1.0;
        a.push(r);
        b.push(0.0);
    }
    let mut c = vec![0.0; n];
    for (k, (_, rhs)) in fy.iter().enumerate() {
        c[nx + k] = -rhs;
        c[nx + my + k] = *rhs;
    }
    let (value, z) = simplex_min(&a, &b, &c).expect("sequence-form LP is feasible and bounded");
    (-value, z[..nx].to_vec())
}

/// `max_x min_j Σ_i x_i M[i][j]` for a plain matrix game.
pub fn matrix_game_value(m: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let rows = m.len();
    let cols = m[0].len();
    // Variables: x (rows), v⁺, v⁻, slack (cols).
    let n = rows + 2 + cols;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut simplex = vec![0.0; n];
    simplex[..rows].iter_mut().for_each(|v| *v = 1.0);
    a.push(simplex);
    b.push(1.0);
    for j in 0..cols {
        // v − Σ x_i M_ij + s_j = 0
        let mut r = vec![0.0; n];
        for i in 0..rows {
            r[i] = -m[i][j];
        }
        r[rows] = 1.0;
        r[rows + 1] = -1.0;
        r[rows + 2 + j] = 1.0;
        a.push(r);
        b.push(0.0);
    }
    let mut c = vec![0.0; n];
    c[rows] = -1.0;
    c[rows + 1] = 1.0;
    let (value, z) = simplex_min(&a, &b, &c).expect("matrix game LP is feasible and bounded");
    (-value, z[..rows].to_vec())
}

/// Behavioral strategy keyed by decision-node label (= information set).
pub fn by_label(tree: &TreePlex, b: &BehavioralStrategy) -> HashMap<String, Vec<f64>> {
    tree.decision_nodes()
        .iter()
        .map(|&j| {
            let d = tree.decision(j).unwrap();
            (d.label.clone(), b.probs[tree.action_range(j).unwrap()].to_vec())
        })
        .collect()
}

/// Rebuilds a behavioral strategy on `tree` from a label map.
pub fn from_label(tree: &TreePlex, map: &HashMap<String, Vec<f64>>) -> BehavioralStrategy {
    let mut probs = vec![0.0; tree.num_sequences()];
    for &j in tree.decision_nodes() {
        let label = &tree.decision(j).unwrap().label;
        let p = map.get(label).unwrap_or_else(|| panic!("label {label} missing"));
        probs[tree.action_range(j).unwrap()].copy_from_slice(p);
    }
    BehavioralStrategy { probs }
}

/// Expected payoff to player 1 by walking the game tree recursively.
pub fn tree_walk(
    efg: &ExtensiveFormGame,
    p1: &HashMap<String, Vec<f64>>,
    p2: &HashMap<String, Vec<f64>>,
) -> f64 {
    fn walk(
        efg: &ExtensiveFormGame,
        i: usize,
        p1: &HashMap<String, Vec<f64>>,
        p2: &HashMap<String, Vec<f64>>,
    ) -> f64 {
        match &efg.nodes()[i].kind {
            EfgNodeKind::Terminal { payoff } => *payoff,
            EfgNodeKind::Chance { outcomes } => outcomes.iter().map(|&(p, c)| p * walk(efg, c, p1, p2)).sum(),
            EfgNodeKind::Player {
                player,
                infoset,
                actions,
            } => {
                let probs = match player {
                    Player::One => &p1[infoset],
                    Player::Two => &p2[infoset],
                };
                actions
                    .iter()
                    .zip(probs)
                    .filter(|(_, &p)| p != 0.0)
                    .map(|((_, c), p)| p * walk(efg, *c, p1, p2))
                    .sum()
            }
        }
    }
    walk(efg, efg.root(), p1, p2)
}

/// All pure strategies of a treeplex as sequence-form 0/1 vectors, by
/// choosing one action at every decision node (reachable or not) and
/// zeroing unreachable sequences.
pub fn pure_strategies(tree: &TreePlex) -> Vec<Vec<f64>> {
    let decisions = tree.decision_nodes();
    let mut choice = vec![0usize; decisions.len()];
    let mut out = Vec::new();
    loop {
        let mut probs = vec![0.0; tree.num_sequences()];
        for (k, &j) in decisions.iter().enumerate() {
            probs[tree.action_range(j).unwrap().start + choice[k]] = 1.0;
        }
        let seq = tree.to_sequence_form(&BehavioralStrategy { probs }).unwrap().values;
        if !out.contains(&seq) {
            out.push(seq);
        }
        let mut k = 0;
        loop {
            if k == decisions.len() {
                return out;
            }
            choice[k] += 1;
            if choice[k] < tree.decision(decisions[k]).unwrap().actions.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

pub fn bilinear(game: &GameInstance, x: &[f64], y: &[f64]) -> f64 {
    game.payoff.iter().map(|e| x[e.x] * e.value * y[e.y]).sum()
}
