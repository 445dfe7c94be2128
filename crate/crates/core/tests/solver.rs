mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spcfr_core::cfr::{
    assign_stability, counterfactual_loss, counterfactual_prediction, counterfactual_vectors, solve, Algorithm,
    SolveConfig, UpdateMode,
};
use spcfr_core::games::{build_kuhn, build_leduc, build_random_game};
use spcfr_core::metrics::saddle_residual;
use spcfr_core::treeplex::{BehavioralStrategy, Node, NodeId, TreePlex};
use spcfr_core::Regularizer;

/// Expected loss below `j` when playing `probs` everywhere, by recursion over
/// the tree rather than through sequence-form vectors.
fn walk_loss(tree: &TreePlex, j: NodeId, loss: &[f64], probs: &[f64]) -> f64 {
    let d = tree.decision(j).unwrap();
    let start = tree.action_range(j).unwrap().start;
    d.children
        .iter()
        .enumerate()
        .map(|(a, child)| {
            let below = match child {
                Some(k) => match &tree.nodes()[*k] {
                    Node::Observation(o) => o.children.iter().map(|&c| walk_loss(tree, c, loss, probs)).sum(),
                    Node::Decision(_) => unreachable!("actions lead to observation nodes"),
                },
                None => 0.0,
            };
            probs[start + a] * (loss[start + a] + below)
        })
        .sum()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

#[test]
fn counterfactual_loss_matches_tree_walk() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut cases = 0;
    for seed in 0..40 {
        let tree = TreePlex::random(seed, 3, 3, 2);
        let mut b = BehavioralStrategy::random(&tree, &mut rng);
        let loss = random_vec(&mut rng, tree.num_sequences());
        for &j in tree.decision_nodes() {
            let range = tree.action_range(j).unwrap();
            let xj = random_simplex(&mut rng, range.len());
            let cf = counterfactual_loss(&tree, j, &loss, &b.probs).unwrap();
            let lhs: f64 = cf.iter().zip(&xj).map(|(a, b)| a * b).sum();
            let saved = b.probs[range.clone()].to_vec();
            b.probs[range.clone()].copy_from_slice(&xj);
            let rhs = walk_loss(&tree, j, &loss, &b.probs);
            b.probs[range].copy_from_slice(&saved);
            assert!((lhs - rhs).abs() < 1e-10, "seed {seed} node {j}: {lhs} vs {rhs}");
            cases += 1;
        }
    }
    assert!(cases >= 100, "{cases}");
}

#[test]
fn root_value_telescopes_to_the_sequence_form_inner_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for seed in 0..50 {
        let tree = TreePlex::random(seed, 3, 3, 3);
        let b = BehavioralStrategy::random(&tree, &mut rng);
        let loss = random_vec(&mut rng, tree.num_sequences());
        let (_, values) = counterfactual_vectors(&tree, &loss, &b.probs).unwrap();
        let x = tree.to_sequence_form(&b).unwrap().values;
        let direct: f64 = loss.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((values[tree.root()] - direct).abs() < 1e-10);
    }
}

#[test]
fn prediction_error_bound_chain() {
    // ‖ℓ̂_j − m̂_j‖₂² ≤ (Σ_{k∈C_j} B_k² + 1)·‖[ℓ − m]_{↓j}‖₂²
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for seed in 0..30 {
        let tree = TreePlex::random(seed, 3, 3, 3);
        let bounds = tree.subtree_norm_bounds();
        let b = BehavioralStrategy::random(&tree, &mut rng);
        let loss = random_vec(&mut rng, tree.num_sequences());
        let prediction = random_vec(&mut rng, tree.num_sequences());
        for &j in tree.decision_nodes() {
            let l = counterfactual_loss(&tree, j, &loss, &b.probs).unwrap();
            let m = counterfactual_prediction(&tree, j, &prediction, &b.probs).unwrap();
            let lhs: f64 = l.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum();
            let children: f64 = tree
                .decision(j)
                .unwrap()
                .children
                .iter()
                .flatten()
                .map(|&k| bounds[k].powi(2))
                .sum();
            let below: f64 = tree
                .subtree_range(j)
                .unwrap()
                .map(|s| (loss[s] - prediction[s]).powi(2))
                .sum();
            assert!(lhs <= (children + 1.0) * below + 1e-12, "seed {seed} node {j}");
        }
    }
}

#[test]
fn schedule_edges_follow_the_recursion() {
    for game in [build_kuhn(), build_leduc()] {
        let tree = &game.treeplex_x;
        let s = assign_stability(tree, 0.3).unwrap();
        assert_eq!(s.gamma[tree.root()], 0.3);
        for (v, node) in tree.nodes().iter().enumerate() {
            let (children, factor): (Vec<NodeId>, f64) = match node {
                Node::Decision(d) => (
                    d.children.iter().flatten().copied().collect(),
                    2.0 * (d.actions.len() as f64).sqrt(),
                ),
                Node::Observation(o) => (o.children.clone(), (o.children.len() as f64).sqrt()),
            };
            for c in children {
                assert!((s.gamma[c] * factor / s.gamma[v] - 1.0).abs() < 1e-14);
            }
            if let Node::Decision(d) = node {
                let expected = s.gamma[v] / (2.0 * (d.actions.len() as f64).sqrt() * s.bounds[v]);
                assert_eq!(s.kappa[v], expected);
                assert_eq!(s.eta[v], s.kappa[v]);
                assert!(s.kappa[v] > 0.0);
            }
        }
    }
}

#[test]
fn kuhn_schedule_example() {
    let game = build_kuhn();
    let tree = &game.treeplex_x;
    let s = assign_stability(tree, 1.0).unwrap();
    let first: Vec<f64> = tree
        .decision_nodes()
        .iter()
        .filter(|&&j| tree.decision(j).unwrap().label.matches('.').count() == 1)
        .map(|&j| s.gamma[j])
        .collect();
    assert_eq!(first.len(), 3);
    for g in first {
        assert!((g - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-15);
    }
}

#[test]
fn alternating_cfr_beats_simultaneous_on_kuhn() {
    let game = build_kuhn();
    let run = |updates| {
        let config = SolveConfig {
            updates,
            ..SolveConfig::new(Algorithm::CfrRm, 1024)
        };
        solve(&game, config).unwrap().final_residual().unwrap()
    };
    let alternating = run(UpdateMode::Alternating);
    let simultaneous = run(UpdateMode::Simultaneous);
    assert!(alternating < simultaneous, "{alternating} vs {simultaneous}");
}

#[test]
fn recorded_residual_matches_recomputation() {
    let game = build_random_game(12, 2, 3).unwrap();
    for algorithm in [Algorithm::OftrlTheory, Algorithm::OftrlScaled(1), Algorithm::CfrRm] {
        for updates in [UpdateMode::Simultaneous, UpdateMode::Alternating] {
            let config = SolveConfig {
                updates,
                regularizer: Regularizer::Entropy,
                ..SolveConfig::new(algorithm, 300)
            };
            let trace = solve(&game, config).unwrap();
            let last = trace.records.last().unwrap();
            assert_eq!(last.t, 300);
            game.treeplex_x.check_strategy(&trace.average_x).unwrap();
            game.treeplex_y.check_strategy(&trace.average_y).unwrap();
            assert!(game.treeplex_x.flow_residual(&trace.average_x).unwrap() <= 1e-9);
            let again = saddle_residual(&game, &trace.average_x, &trace.average_y).unwrap();
            assert!((again - last.residual).abs() < 1e-10);
            for r in &trace.records {
                assert!(r.residual >= -1e-9);
                assert!((r.t as f64 * r.residual - r.regret_x - r.regret_y).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn identical_configs_give_identical_traces() {
    let game = build_random_game(7, 2, 3).unwrap();
    let config = SolveConfig::new(Algorithm::OftrlScaled(2), 500);
    let strip = |mut t: spcfr_core::SolveTrace| {
        t.records.iter_mut().for_each(|r| r.wall_ms = 0.0);
        t
    };
    let a = strip(solve(&game, config.clone()).unwrap());
    let b = strip(solve(&game, config).unwrap());
    assert_eq!(a, b);
}

#[test]
fn trace_schema_is_shared_by_both_modes() {
    let game = build_kuhn();
    for updates in [UpdateMode::Simultaneous, UpdateMode::Alternating] {
        let config = SolveConfig {
            updates,
            record_every: 4,
            ..SolveConfig::new(Algorithm::OftrlTheory, 10)
        };
        let trace = solve(&game, config).unwrap();
        let ts: Vec<usize> = trace.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![4, 8, 10]);
        assert!(trace.records.iter().all(|r| r.residual.is_finite()));
    }
}

#[test]
fn euclidean_theory_runs_meet_the_schedule() {
    for game in [build_kuhn(), build_random_game(2, 2, 3).unwrap()] {
        for updates in [UpdateMode::Simultaneous, UpdateMode::Alternating] {
            let config = SolveConfig {
                updates,
                regularizer: Regularizer::Euclidean,
                ..SolveConfig::new(Algorithm::OftrlTheory, 400)
            };
            let trace = solve(&game, config).unwrap();
            assert_eq!(trace.max_stability_violation, 0.0, "{} {updates}", game.name);
        }
    }
}
