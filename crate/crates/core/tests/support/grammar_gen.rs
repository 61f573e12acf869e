//! Random grammars over a small vocabulary, and utterances that either come
//! from the same vocabulary or instantiate one of the rules.

#![allow(dead_code)]

use proptest::prelude::*;
use voxd_core::grammar::{Grammar, GrammarRule, IntentKind, PatternToken};

pub const WORDS: &[&str] = &["play", "in", "for", "to", "me", "a", "b", "c", "search", "music"];

pub type RuleSpec = (Vec<PatternToken>, i32);

pub fn pattern() -> impl Strategy<Value = Vec<PatternToken>> {
    prop::collection::vec((any::<bool>(), 0..WORDS.len()), 1..6).prop_map(|raw| {
        let mut out: Vec<PatternToken> = Vec::new();
        let mut slot_no = 0;
        for (is_slot, w) in raw {
            let prev_slot = matches!(out.last(), Some(PatternToken::Slot(_)));
            if is_slot && !prev_slot {
                out.push(PatternToken::Slot(format!("s{slot_no}")));
                slot_no += 1;
            } else {
                out.push(PatternToken::Literal(WORDS[w].to_string()));
            }
        }
        if !out.iter().any(|t| matches!(t, PatternToken::Literal(_))) {
            out.push(PatternToken::Literal("a".into()));
        }
        out
    })
}

pub fn rules() -> impl Strategy<Value = Vec<RuleSpec>> {
    prop::collection::vec((pattern(), 0..4i32), 1..8)
}

/// Registers `rules` in the given order; ids and kinds follow the rule, not
/// its position.
pub fn build(rules: &[RuleSpec], order: &[usize]) -> Grammar {
    let mut g = Grammar::new();
    for &i in order {
        let (pattern, prio) = &rules[i];
        let kind = IntentKind::ALL[i % 12];
        g.register_rule(GrammarRule::new(format!("rule{i}"), kind, *prio, pattern.clone()))
            .unwrap();
    }
    g
}

pub fn utterance(rules: Vec<RuleSpec>) -> impl Strategy<Value = String> {
    let n = rules.len();
    let random = prop::collection::vec(0..WORDS.len(), 1..9)
        .prop_map(|ws| ws.into_iter().map(|w| WORDS[w]).collect::<Vec<_>>().join(" "));
    let instantiated = (0..n, prop::collection::vec(prop::collection::vec(0..WORDS.len(), 1..4), 6))
        .prop_map(move |(r, fills)| {
            let mut fills = fills.into_iter();
            rules[r]
                .0
                .iter()
                .map(|t| match t {
                    PatternToken::Literal(w) => w.clone(),
                    PatternToken::Slot(_) => fills
                        .next()
                        .unwrap()
                        .into_iter()
                        .map(|w| WORDS[w])
                        .collect::<Vec<_>>()
                        .join(" "),
                })
                .collect::<Vec<_>>()
                .join(" ")
        });
    prop_oneof![random, instantiated]
}

pub fn case() -> impl Strategy<Value = (Vec<RuleSpec>, String)> {
    rules().prop_flat_map(|rules| {
        let utt = utterance(rules.clone());
        (Just(rules), utt)
    })
}

/// Keeps the first rule for each (literal count, priority) key.
pub fn distinct_keys(rules: Vec<RuleSpec>) -> Vec<RuleSpec> {
    let mut seen = std::collections::HashSet::new();
    rules
        .into_iter()
        .filter(|(p, prio)| {
            let lits = p.iter().filter(|t| matches!(t, PatternToken::Literal(_))).count();
            seen.insert((lits, *prio))
        })
        .collect()
}

/// Rebuilds the matched text from the winning rule and its captures.
pub fn reconstruct(g: &Grammar, text: &str) -> Option<String> {
    let m = g.best_match(text)?;
    let mut slots = m.slots.iter();
    Some(
        m.rule
            .pattern
            .iter()
            .map(|t| match t {
                PatternToken::Literal(w) => w.clone(),
                PatternToken::Slot(_) => slots.next().unwrap().1.clone(),
            })
            .collect::<Vec<_>>()
            .join(" "),
    )
}
