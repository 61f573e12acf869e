//! Plain-text grammar files: `<priority> <intent-kind> :: <pattern>` per line,
//! `#` starts a comment.

use std::collections::HashMap;

use thiserror::Error;

use super::{Grammar, GrammarError, GrammarRule, IntentKind};

pub const DEFAULT_GRAMMAR: &str = include_str!("../../data/default.grammar");

#[derive(Debug, Error)]
pub enum GrammarFileError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Rule {
        line: usize,
        #[source]
        source: GrammarError,
    },
}

/// Parses grammar text. Rule ids are `<kind-lowercase>-<n>`, numbered from 1
/// per kind in file order.
pub fn parse_grammar_file(text: &str) -> Result<Grammar, GrammarFileError> {
    let mut grammar = Grammar::new();
    let mut per_kind: HashMap<IntentKind, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |reason: &str| GrammarFileError::Syntax {
            line: line_no,
            reason: reason.to_string(),
        };
        let (head, pattern) = line.split_once("::").ok_or_else(|| syntax("missing `::`"))?;
        let mut head = head.split_whitespace();
        let priority: i32 = head
            .next()
            .ok_or_else(|| syntax("missing priority"))?
            .parse()
            .map_err(|_| syntax("priority is not an integer"))?;
        let kind: IntentKind = head
            .next()
            .ok_or_else(|| syntax("missing intent kind"))?
            .parse()
            .map_err(|e: super::UnknownIntentKind| syntax(&e.to_string()))?;
        if head.next().is_some() {
            return Err(syntax("unexpected token before `::`"));
        }
        let n = per_kind.entry(kind).or_default();
        *n += 1;
        let id = format!("{}-{}", kind.as_str().to_lowercase(), n);
        let rule = GrammarRule::new(id, kind, priority, GrammarRule::parse_pattern(pattern));
        grammar
            .register_rule(rule)
            .map_err(|source| GrammarFileError::Rule { line: line_no, source })?;
    }
    Ok(grammar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::PatternToken;

    #[test]
    fn default_grammar_loads() {
        let g = parse_grammar_file(DEFAULT_GRAMMAR).unwrap();
        assert_eq!(g.len(), 17);
        let kinds: std::collections::BTreeSet<_> = g.rules().iter().map(|r| r.kind).collect();
        assert_eq!(kinds.len(), 12);
    }

    #[test]
    fn example_line() {
        let g = parse_grammar_file("10 SetReminder :: remind me to <message> in <n> minutes # c")
            .unwrap();
        let r = &g.rules()[0];
        assert_eq!(r.id, "setreminder-1");
        assert_eq!(r.priority, 10);
        assert_eq!(r.pattern[3], PatternToken::Slot("message".into()));
        assert_eq!(r.to_string(), "10 SetReminder :: remind me to <message> in <n> minutes");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_grammar_file("# c\n\nten Exit :: exit").unwrap_err();
        assert!(err.to_string().starts_with("line 3"));
        let err = parse_grammar_file("1 Exit :: exit\n1 Bogus :: x").unwrap_err();
        assert!(err.to_string().contains("Bogus"));
        let err = parse_grammar_file("1 Exit :: <a> <b> x").unwrap_err();
        assert!(matches!(err, GrammarFileError::Rule { line: 1, .. }));
        assert!(parse_grammar_file("1 Exit exit").is_err());
    }
}
