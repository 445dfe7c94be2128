//! Kuhn poker, Leduc poker and seeded random games.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::efg::{EfgBuilder, ExtensiveFormGame, Player};
use super::{to_sequence_form_game, GameInstance};
use crate::error::GameError;

/// Largest random game accepted, in sequences per player.
pub const MAX_RANDOM_SEQUENCES: u128 = 1_000_000;
/// Largest random game accepted, in game-tree nodes.
pub const MAX_RANDOM_NODES: u128 = 10_000_000;

const RANKS: [&str; 3] = ["J", "Q", "K"];

fn edges(list: &[(&str, usize)]) -> Vec<(String, usize)> {
    list.iter().map(|&(a, c)| (a.to_string(), c)).collect()
}

/// Kuhn poker: three cards, antes of 1, a single bet of 1.
pub fn kuhn_efg() -> ExtensiveFormGame {
    let mut b = EfgBuilder::new();
    let mut deals = Vec::new();
    for c1 in 0..3 {
        for c2 in 0..3 {
            if c1 == c2 {
                continue;
            }
            let (r1, r2) = (RANKS[c1], RANKS[c2]);
            let win = if c1 > c2 { 1.0 } else { -1.0 };

            let check_check = b.terminal(win);
            let raise_fold = b.terminal(-1.0);
            let raise_call = b.terminal(2.0 * win);
            let p1_after_raise = b.player(
                Player::One,
                format!("P1.{r1}.cr"),
                edges(&[("fold", raise_fold), ("call", raise_call)]),
            );
            let p2_after_check = b.player(
                Player::Two,
                format!("P2.{r2}.c"),
                edges(&[("check", check_check), ("raise", p1_after_raise)]),
            );
            let fold = b.terminal(1.0);
            let call = b.terminal(2.0 * win);
            let p2_after_raise = b.player(Player::Two, format!("P2.{r2}.r"), edges(&[("fold", fold), ("call", call)]));
            let p1 = b.player(
                Player::One,
                format!("P1.{r1}"),
                edges(&[("check", p2_after_check), ("raise", p2_after_raise)]),
            );
            deals.push((1.0 / 6.0, p1));
        }
    }
    let root = b.chance(deals);
    b.finish(root).expect("kuhn poker is well formed")
}

pub fn build_kuhn() -> GameInstance {
    to_sequence_form_game("kuhn", &kuhn_efg()).expect("kuhn poker converts")
}

struct Leduc {
    cards: [usize; 2],
    public: Option<usize>,
    first_round: String,
}

impl Leduc {
    const BETS: [f64; 2] = [2.0, 4.0];
    const MAX_RAISES: usize = 2;

    fn label(&self, me: usize, history: &str) -> String {
        let rank = RANKS[self.cards[me] / 2];
        let h = if history.is_empty() { "_" } else { history };
        match self.public {
            None => format!("P{}.{rank}.{h}", me + 1),
            Some(p) => format!("P{}.{rank}.{}.{}.{h}", me + 1, self.first_round, RANKS[p / 2]),
        }
    }

    /// Payoff to player 1 at a showdown with equal contributions.
    fn showdown(&self, pot: f64) -> f64 {
        let public = self.public.expect("showdown after the public card") / 2;
        // A pair beats every unpaired rank.
        let strength = |c: usize| if c / 2 == public { RANKS.len() } else { c / 2 };
        let (s1, s2) = (strength(self.cards[0]), strength(self.cards[1]));
        match s1.cmp(&s2) {
            std::cmp::Ordering::Greater => pot,
            std::cmp::Ordering::Less => -pot,
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    fn end_round(&mut self, b: &mut EfgBuilder, history: &str, pot: [f64; 2]) -> usize {
        if self.public.is_some() {
            return b.terminal(self.showdown(pot[0]));
        }
        let remaining: Vec<usize> = (0..6).filter(|c| !self.cards.contains(c)).collect();
        self.first_round = history.to_string();
        let mut outcomes = Vec::new();
        for &card in &remaining {
            self.public = Some(card);
            let child = self.betting(b, String::new(), 0, 0, pot);
            outcomes.push((1.0 / remaining.len() as f64, child));
        }
        self.public = None;
        b.chance(outcomes)
    }

    fn betting(&mut self, b: &mut EfgBuilder, history: String, me: usize, raises: usize, pot: [f64; 2]) -> usize {
        let opp = 1 - me;
        let bet = Self::BETS[usize::from(self.public.is_some())];
        let mut actions = Vec::new();
        if pot[opp] > pot[me] {
            let loss = if me == 0 { -pot[0] } else { pot[1] };
            actions.push(("fold".to_string(), b.terminal(loss)));
            let mut called = pot;
            called[me] = pot[opp];
            let child = self.end_round(b, &format!("{history}c"), called);
            actions.push(("call".to_string(), child));
        } else {
            let child = if history.is_empty() {
                self.betting(b, format!("{history}k"), opp, raises, pot)
            } else {
                self.end_round(b, &format!("{history}k"), pot)
            };
            actions.push(("check".to_string(), child));
        }
        if raises < Self::MAX_RAISES {
            let mut raised = pot;
            raised[me] = pot[opp] + bet;
            let child = self.betting(b, format!("{history}r"), opp, raises + 1, raised);
            actions.push(("raise".to_string(), child));
        }
        let player = if me == 0 { Player::One } else { Player::Two };
        b.player(player, self.label(me, &history), actions)
    }
}

/// Leduc poker: six cards (three ranks, two suits), antes of 1, two betting
/// rounds with bets of 2 and 4 and at most two raises each. A private card
/// pairing the public card wins; otherwise the higher rank wins.
pub fn leduc_efg() -> ExtensiveFormGame {
    let mut b = EfgBuilder::new();
    let mut deals = Vec::new();
    for c1 in 0..6 {
        for c2 in 0..6 {
            if c1 == c2 {
                continue;
            }
            let mut state = Leduc {
                cards: [c1, c2],
                public: None,
                first_round: String::new(),
            };
            let child = state.betting(&mut b, String::new(), 0, 0, [1.0, 1.0]);
            deals.push((1.0 / 30.0, child));
        }
    }
    let root = b.chance(deals);
    b.finish(root).expect("leduc poker is well formed")
}

pub fn build_leduc() -> GameInstance {
    to_sequence_form_game("leduc", &leduc_efg()).expect("leduc poker converts")
}

fn pow(b: u128, e: usize) -> Option<u128> {
    b.checked_pow(u32::try_from(e).ok()?)
}

/// Sequences per player of `random_efg(_, depth, branching)`.
pub fn random_game_sequences(depth: usize, branching: usize) -> Option<u128> {
    let b = branching as u128;
    let mut total: u128 = 0;
    for r in 0..depth {
        total = total.checked_add(pow(b, 3 * r)?)?;
    }
    total.checked_mul(b)?.checked_add(1)
}

fn random_game_nodes(depth: usize, branching: usize) -> Option<u128> {
    let b = branching as u128;
    let mut total: u128 = 0;
    for r in 0..depth {
        for k in 0..3 {
            total = total.checked_add(pow(b, 3 * r + k)?)?;
        }
    }
    Some(total)
}

fn random_round(
    b: &mut EfgBuilder,
    rng: &mut ChaCha8Rng,
    round: usize,
    depth: usize,
    branching: usize,
    public: &str,
) -> usize {
    let mut p1_actions = Vec::with_capacity(branching);
    for a1 in 0..branching {
        let mut p2_actions = Vec::with_capacity(branching);
        for a2 in 0..branching {
            let child = if round + 1 == depth {
                b.terminal(rng.gen_range(-1.0..=1.0))
            } else {
                let weights: Vec<f64> = (0..branching).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = weights.iter().sum();
                let mut outcomes = Vec::with_capacity(branching);
                for (s, w) in weights.iter().enumerate() {
                    let next = format!("{public}-{a1}.{a2}.{s}");
                    let node = random_round(b, rng, round + 1, depth, branching, &next);
                    outcomes.push((w / total, node));
                }
                b.chance(outcomes)
            };
            p2_actions.push((format!("a{a2}"), child));
        }
        let p2 = b.player(Player::Two, format!("Y{round}.{public}"), p2_actions);
        p1_actions.push((format!("a{a1}"), p2));
    }
    b.player(Player::One, format!("X{round}.{public}"), p1_actions)
}

/// A seeded random game with `depth` rounds. In each round player 1 picks
/// one of `branching` actions, player 2 picks one without seeing it, both
/// actions become public, and chance draws one of `branching` public
/// outcomes with random probabilities. Terminal payoffs are uniform in
/// `[−1, 1]`.
pub fn random_efg(seed: u64, depth: usize, branching: usize) -> Result<ExtensiveFormGame, GameError> {
    if depth == 0 || branching == 0 {
        return Err(GameError::InvalidParameter(format!(
            "random game needs depth >= 1 and branching >= 1, got depth {depth}, branching {branching}"
        )));
    }
    let sequences = random_game_sequences(depth, branching).unwrap_or(u128::MAX);
    if sequences > MAX_RANDOM_SEQUENCES {
        return Err(GameError::TooLarge {
            what: "sequences",
            count: sequences,
            limit: MAX_RANDOM_SEQUENCES,
        });
    }
    let nodes = random_game_nodes(depth, branching).unwrap_or(u128::MAX);
    if nodes > MAX_RANDOM_NODES {
        return Err(GameError::TooLarge {
            what: "nodes",
            count: nodes,
            limit: MAX_RANDOM_NODES,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = EfgBuilder::new();
    let root = random_round(&mut b, &mut rng, 0, depth, branching, "r");
    b.finish(root)
}

pub fn build_random_game(seed: u64, depth: usize, branching: usize) -> Result<GameInstance, GameError> {
    let efg = random_efg(seed, depth, branching)?;
    to_sequence_form_game(&format!("random-{seed}-{depth}-{branching}"), &efg)
}
