//! Line-based game file format.
//!
//! ```text
//! # comment
//! root <id>
//! chance <id> <prob>:<child-id> ...
//! player <id> <1|2> <infoset-label> <action-label>:<child-id> ...
//! terminal <id> <payoff-to-player-1>
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use super::efg::{is_valid_id, EfgNode, EfgNodeKind, ExtensiveFormGame, Player};
use crate::error::GameError;

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let content = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in content.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push(Token {
                    text: &content[s..i],
                    column: content[..s].chars().count() + 1,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &content[s..],
            column: content[..s].chars().count() + 1,
        });
    }
    tokens
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> GameError {
    GameError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn parse_id(line: usize, tok: &Token) -> Result<String, GameError> {
    if is_valid_id(tok.text) {
        Ok(tok.text.to_string())
    } else {
        Err(syntax(line, tok.column, format!("invalid node id {:?}", tok.text)))
    }
}

fn parse_number(line: usize, column: usize, text: &str) -> Result<f64, GameError> {
    match text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(syntax(line, column, format!("expected a decimal number, found {text:?}"))),
    }
}

/// Splits `<label>:<child>` at the last colon.
fn split_edge<'a>(line: usize, tok: &Token<'a>) -> Result<(&'a str, &'a str, usize), GameError> {
    let Some(at) = tok.text.rfind(':') else {
        return Err(syntax(line, tok.column, format!("expected <label>:<child-id>, found {:?}", tok.text)));
    };
    let (label, child) = (&tok.text[..at], &tok.text[at + 1..]);
    if label.is_empty() {
        return Err(syntax(line, tok.column, "empty label before ':'"));
    }
    let child_column = tok.column + tok.text[..=at].chars().count();
    if !is_valid_id(child) {
        return Err(syntax(line, child_column, format!("invalid child id {child:?}")));
    }
    Ok((label, child, child_column))
}

enum Pending {
    Chance(Vec<(f64, String)>),
    Player(Player, String, Vec<(String, String)>),
    Terminal(f64),
}

/// Parses and validates a game file.
pub fn parse_game_file(text: &str) -> Result<ExtensiveFormGame, GameError> {
    let mut root: Option<(String, usize)> = None;
    let mut pending: Vec<(String, usize, Pending)> = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let tokens = tokenize(raw);
        let Some(keyword) = tokens.first() else { continue };
        let need = |n: usize, what: &str| -> Result<(), GameError> {
            if tokens.len() < n {
                let column = raw.trim_end().chars().count() + 1;
                return Err(syntax(line, column, format!("missing {what}")));
            }
            Ok(())
        };
        match keyword.text {
            "root" => {
                need(2, "root id")?;
                if tokens.len() > 2 {
                    return Err(syntax(line, tokens[2].column, "unexpected token after root id"));
                }
                if root.is_some() {
                    return Err(GameError::Semantic {
                        line,
                        message: "duplicate root line".into(),
                    });
                }
                root = Some((parse_id(line, &tokens[1])?, line));
            }
            "chance" => {
                need(3, "chance outcome")?;
                let id = parse_id(line, &tokens[1])?;
                let mut outcomes = Vec::new();
                for tok in &tokens[2..] {
                    let (prob, child, _) = split_edge(line, tok)?;
                    outcomes.push((parse_number(line, tok.column, prob)?, child.to_string()));
                }
                pending.push((id, line, Pending::Chance(outcomes)));
            }
            "player" => {
                need(5, "player action")?;
                let id = parse_id(line, &tokens[1])?;
                let player = match tokens[2].text {
                    "1" => Player::One,
                    "2" => Player::Two,
                    other => return Err(syntax(line, tokens[2].column, format!("player must be 1 or 2, found {other:?}"))),
                };
                let infoset = tokens[3].text.to_string();
                let mut actions = Vec::new();
                for tok in &tokens[4..] {
                    let (label, child, _) = split_edge(line, tok)?;
                    actions.push((label.to_string(), child.to_string()));
                }
                pending.push((id, line, Pending::Player(player, infoset, actions)));
            }
            "terminal" => {
                need(3, "terminal payoff")?;
                if tokens.len() > 3 {
                    return Err(syntax(line, tokens[3].column, "unexpected token after payoff"));
                }
                let id = parse_id(line, &tokens[1])?;
                let payoff = parse_number(line, tokens[2].column, tokens[2].text)?;
                pending.push((id, line, Pending::Terminal(payoff)));
            }
            other => {
                return Err(syntax(line, keyword.column, format!("unknown keyword {other:?}")));
            }
        }
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, (id, line, _)) in pending.iter().enumerate() {
        if index.insert(id.as_str(), i).is_some() {
            return Err(GameError::Semantic {
                line: *line,
                message: format!("duplicate node id {id}"),
            });
        }
    }
    let resolve = |child: &str, line: usize| -> Result<usize, GameError> {
        index.get(child).copied().ok_or_else(|| GameError::Semantic {
            line,
            message: format!("dangling child id {child}"),
        })
    };
    let (root_id, root_line) = root.ok_or(GameError::Semantic {
        line: 0,
        message: "missing root line".into(),
    })?;
    let root = resolve(&root_id, root_line)?;

    let mut nodes = Vec::with_capacity(pending.len());
    for (id, line, p) in &pending {
        let kind = match p {
            Pending::Chance(outcomes) => EfgNodeKind::Chance {
                outcomes: outcomes
                    .iter()
                    .map(|(prob, c)| Ok((*prob, resolve(c, *line)?)))
                    .collect::<Result<_, GameError>>()?,
            },
            Pending::Player(player, infoset, actions) => EfgNodeKind::Player {
                player: *player,
                infoset: infoset.clone(),
                actions: actions
                    .iter()
                    .map(|(a, c)| Ok((a.clone(), resolve(c, *line)?)))
                    .collect::<Result<_, GameError>>()?,
            },
            Pending::Terminal(payoff) => EfgNodeKind::Terminal { payoff: *payoff },
        };
        nodes.push(EfgNode {
            id: id.clone(),
            line: *line,
            kind,
        });
    }
    ExtensiveFormGame::new(nodes, root)
}

/// Serializes a game in depth-first order. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn export_game_file(game: &ExtensiveFormGame) -> String {
    let nodes = game.nodes();
    let mut out = String::new();
    writeln!(out, "root {}", nodes[game.root()].id).unwrap();
    let mut stack = vec![game.root()];
    while let Some(i) = stack.pop() {
        let node = &nodes[i];
        match &node.kind {
            EfgNodeKind::Chance { outcomes } => {
                write!(out, "chance {}", node.id).unwrap();
                for (p, c) in outcomes {
                    write!(out, " {}:{}", p, nodes[*c].id).unwrap();
                }
                stack.extend(outcomes.iter().rev().map(|o| o.1));
            }
            EfgNodeKind::Player {
                player,
                infoset,
                actions,
            } => {
                write!(out, "player {} {} {}", node.id, player.number(), infoset).unwrap();
                for (a, c) in actions {
                    write!(out, " {}:{}", a, nodes[*c].id).unwrap();
                }
                stack.extend(actions.iter().rev().map(|a| a.1));
            }
            EfgNodeKind::Terminal { payoff } => {
                write!(out, "terminal {} {}", node.id, payoff).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let g = parse_game_file("# tiny\nroot c\nchance c 1.0:z\nterminal z 3.5\n").unwrap();
        assert_eq!(g.nodes().len(), 2);
        assert_eq!(g.nodes()[g.root()].id, "c");
    }

    #[test]
    fn chance_sum_is_checked() {
        let err = parse_game_file("root c\nchance c 0.5:a 0.4:b\nterminal a 1\nterminal b 2\n").unwrap_err();
        match err {
            GameError::Semantic { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("chance node c"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_have_positions() {
        let err = parse_game_file("root a\nterminal a x1\n").unwrap_err();
        assert_eq!(err, syntax(2, 12, "expected a decimal number, found \"x1\""));
        let err = parse_game_file("root a\nbogus a\n").unwrap_err();
        assert!(matches!(err, GameError::Syntax { line: 2, column: 1, .. }));
        let err = parse_game_file("root a\nplayer a 3 I x:b\nterminal b 0\n").unwrap_err();
        assert!(matches!(err, GameError::Syntax { line: 2, column: 10, .. }));
        let err = parse_game_file("root a\nchance a 1.0\n").unwrap_err();
        assert!(matches!(err, GameError::Syntax { line: 2, .. }));
    }

    #[test]
    fn semantic_errors() {
        let dangling = parse_game_file("root a\nchance a 1:b\n").unwrap_err();
        assert_eq!(dangling.line(), Some(2));
        let dup = parse_game_file("root a\nterminal a 0\nterminal a 1\n").unwrap_err();
        assert_eq!(dup.line(), Some(3));
        let missing = parse_game_file("terminal a 0\n").unwrap_err();
        assert!(matches!(missing, GameError::Semantic { .. }));
        let shared = parse_game_file("root a\nchance a 0.5:t 0.5:t\nterminal t 0\n").unwrap_err();
        assert_eq!(shared.line(), Some(2));
    }

    #[test]
    fn perfect_recall_violation() {
        // Player 1 forgets its first move when reaching the second infoset.
        let text = "\
root a
player a 1 I l:b r:c
player b 1 J x:t1 y:t2
player c 1 J x:t3 y:t4
terminal t1 0
terminal t2 0
terminal t3 0
terminal t4 0
";
        let err = parse_game_file(text).unwrap_err();
        assert_eq!(
            err,
            GameError::PerfectRecall {
                infoset: "J".into(),
                line: 4
            }
        );
    }

    #[test]
    fn inconsistent_infoset() {
        let text = "\
root c
chance c 0.5:a 0.5:b
player a 1 I l:t1 r:t2
player b 2 I l:t3 r:t4
terminal t1 0
terminal t2 0
terminal t3 0
terminal t4 0
";
        assert!(matches!(parse_game_file(text), Err(GameError::Semantic { line: 4, .. })));
    }

    #[test]
    fn export_round_trips() {
        let text = "root c\nchance c 0.25:a 0.75:t3\nplayer a 2 I l:t1 r:t2\nterminal t1 -1.5\nterminal t2 0.1\nterminal t3 2\n";
        let g = parse_game_file(text).unwrap();
        let again = parse_game_file(&export_game_file(&g)).unwrap();
        assert_eq!(export_game_file(&again), export_game_file(&g));
    }
}
