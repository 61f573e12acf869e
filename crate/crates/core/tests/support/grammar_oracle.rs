//! Brute-force reference matcher for the token grammar.
//!
//! Enumerates every assignment of slot lengths, keeps the ones whose literals
//! line up with the input, and prefers the assignment whose slot lengths are
//! lexicographically largest (earlier slots capture the most).

#![allow(dead_code)]

use voxd_core::grammar::{Grammar, GrammarRule, PatternToken};

/// Slot captures of `rule` over `tokens`, if the rule covers them.
pub fn match_rule(rule: &GrammarRule, tokens: &[&str]) -> Option<Vec<(String, String)>> {
    let slots = rule
        .pattern
        .iter()
        .filter(|t| matches!(t, PatternToken::Slot(_)))
        .count();
    let literals = rule.pattern.len() - slots;
    if tokens.len() < literals + slots {
        return None;
    }
    let budget = tokens.len() - literals;
    let mut best: Option<Vec<usize>> = None;
    let mut lens = vec![1usize; slots];
    enumerate(&mut lens, 0, budget, &mut |lens| {
        if aligns(rule, tokens, lens) && best.as_ref().is_none_or(|b| lens > b.as_slice()) {
            best = Some(lens.to_vec());
        }
    });
    let lens = best?;
    let mut out = Vec::new();
    let mut pos = 0;
    let mut slot = 0;
    for tok in &rule.pattern {
        match tok {
            PatternToken::Literal(_) => pos += 1,
            PatternToken::Slot(name) => {
                out.push((name.clone(), tokens[pos..pos + lens[slot]].join(" ")));
                pos += lens[slot];
                slot += 1;
            }
        }
    }
    Some(out)
}

fn enumerate(lens: &mut [usize], idx: usize, remaining: usize, visit: &mut dyn FnMut(&[usize])) {
    if idx == lens.len() {
        if remaining == 0 {
            visit(lens);
        }
        return;
    }
    for len in 1..=remaining {
        lens[idx] = len;
        enumerate(lens, idx + 1, remaining - len, visit);
    }
}

fn aligns(rule: &GrammarRule, tokens: &[&str], lens: &[usize]) -> bool {
    let mut pos = 0;
    let mut slot = 0;
    for tok in &rule.pattern {
        match tok {
            PatternToken::Literal(word) => {
                if tokens.get(pos) != Some(&word.as_str()) {
                    return false;
                }
                pos += 1;
            }
            PatternToken::Slot(_) => {
                pos += lens[slot];
                slot += 1;
            }
        }
    }
    pos == tokens.len()
}

/// Winning rule id and slots, by (literal count, priority, earliest registration).
pub fn best(grammar: &Grammar, text: &str) -> Option<(String, Vec<(String, String)>)> {
    let tokens: Vec<&str> = text.split(' ').collect();
    let mut winner: Option<(&GrammarRule, Vec<(String, String)>)> = None;
    for rule in grammar.rules() {
        let Some(slots) = match_rule(rule, &tokens) else {
            continue;
        };
        let key = |r: &GrammarRule| {
            let lits = r
                .pattern
                .iter()
                .filter(|t| matches!(t, PatternToken::Literal(_)))
                .count();
            (lits, r.priority, -(r.registration_index() as i64))
        };
        if winner.as_ref().is_none_or(|(w, _)| key(rule) > key(w)) {
            winner = Some((rule, slots));
        }
    }
    winner.map(|(r, s)| (r.id.clone(), s))
}
