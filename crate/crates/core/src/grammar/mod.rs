//! Deterministic token-pattern grammar.
//!
//! Utterances are normalized to lowercase space-separated tokens and matched
//! against rules made of literal words and named slots. A rule must cover the
//! whole utterance: literals match exact tokens, every slot captures at least
//! one token, and a literal that follows a slot binds to its rightmost
//! feasible occurrence so earlier slots capture maximally.

mod file;
mod normalize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use file::{parse_grammar_file, GrammarFileError, DEFAULT_GRAMMAR};
pub use normalize::{normalize, EmptyUtterance};

/// What the user asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IntentKind {
    PlayMedia,
    WikipediaSearch,
    WebSearch,
    Weather,
    OpenApplication,
    RunCommand,
    SetReminder,
    SetAlarm,
    CheckMail,
    ReadNews,
    GetTime,
    Exit,
    Unknown,
}

impl IntentKind {
    pub const ALL: [IntentKind; 13] = [
        IntentKind::PlayMedia,
        IntentKind::WikipediaSearch,
        IntentKind::WebSearch,
        IntentKind::Weather,
        IntentKind::OpenApplication,
        IntentKind::RunCommand,
        IntentKind::SetReminder,
        IntentKind::SetAlarm,
        IntentKind::CheckMail,
        IntentKind::ReadNews,
        IntentKind::GetTime,
        IntentKind::Exit,
        IntentKind::Unknown,
    ];

    /// Every kind a skill must handle.
    pub fn dispatchable() -> impl Iterator<Item = IntentKind> {
        Self::ALL.into_iter().filter(|k| *k != IntentKind::Unknown)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            IntentKind::PlayMedia => "PlayMedia",
            IntentKind::WikipediaSearch => "WikipediaSearch",
            IntentKind::WebSearch => "WebSearch",
            IntentKind::Weather => "Weather",
            IntentKind::OpenApplication => "OpenApplication",
            IntentKind::RunCommand => "RunCommand",
            IntentKind::SetReminder => "SetReminder",
            IntentKind::SetAlarm => "SetAlarm",
            IntentKind::CheckMail => "CheckMail",
            IntentKind::ReadNews => "ReadNews",
            IntentKind::GetTime => "GetTime",
            IntentKind::Exit => "Exit",
            IntentKind::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for IntentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown intent kind `{0}`")]
pub struct UnknownIntentKind(pub String);

impl FromStr for IntentKind {
    type Err = UnknownIntentKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownIntentKind(s.to_string()))
    }
}

/// Where an utterance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Voice,
    Typed,
}

/// A normalized phrase ready for matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    text: String,
    confidence: f64,
    source: Source,
    received_at: i64,
}

#[derive(Debug, Error, PartialEq)]
pub enum UtteranceError {
    #[error(transparent)]
    Empty(#[from] EmptyUtterance),
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
}

impl Utterance {
    /// Normalizes `raw` and checks the confidence range.
    pub fn new(
        raw: &str,
        confidence: f64,
        source: Source,
        received_at: i64,
    ) -> Result<Self, UtteranceError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(UtteranceError::Confidence(confidence));
        }
        Ok(Self {
            text: normalize(raw)?,
            confidence,
            source,
            received_at,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn received_at(&self) -> i64 {
        self.received_at
    }
}

/// A resolved intent. `matched_rule_id` is absent iff the kind is `Unknown`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub kind: IntentKind,
    pub slots: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matched_rule_id: Option<String>,
}

impl Intent {
    pub fn unknown() -> Self {
        Self {
            kind: IntentKind::Unknown,
            slots: BTreeMap::new(),
            matched_rule_id: None,
        }
    }

    /// An intent built by hand, outside of any grammar match.
    pub fn with_slots<'a>(
        kind: IntentKind,
        slots: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Self {
        Self {
            kind,
            slots: slots
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            matched_rule_id: (kind != IntentKind::Unknown).then(|| "manual".to_string()),
        }
    }

    pub fn slot(&self, name: &str) -> Option<&str> {
        self.slots.get(name).map(String::as_str)
    }

    pub fn is_unknown(&self) -> bool {
        self.kind == IntentKind::Unknown
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternToken {
    Literal(String),
    Slot(String),
}

impl fmt::Display for PatternToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternToken::Literal(w) => f.write_str(w),
            PatternToken::Slot(n) => write!(f, "<{n}>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarRule {
    pub id: String,
    pub pattern: Vec<PatternToken>,
    pub kind: IntentKind,
    pub priority: i32,
    registration_index: usize,
}

impl GrammarRule {
    pub fn new(id: impl Into<String>, kind: IntentKind, priority: i32, pattern: Vec<PatternToken>) -> Self {
        Self {
            id: id.into(),
            pattern,
            kind,
            priority,
            registration_index: 0,
        }
    }

    /// Parses a pattern such as `remind me to <message> in <n> minutes`.
    pub fn parse_pattern(pattern: &str) -> Vec<PatternToken> {
        pattern
            .split_whitespace()
            .map(|tok| match tok.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
                Some(name) => PatternToken::Slot(name.to_string()),
                None => PatternToken::Literal(tok.to_string()),
            })
            .collect()
    }

    pub fn registration_index(&self) -> usize {
        self.registration_index
    }

    pub fn specificity(&self) -> usize {
        self.pattern
            .iter()
            .filter(|t| matches!(t, PatternToken::Literal(_)))
            .count()
    }

    fn validate(&self) -> Result<(), GrammarError> {
        let invalid = |reason: &str| GrammarError::InvalidRule {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if self.kind == IntentKind::Unknown {
            return Err(invalid("rules cannot produce Unknown"));
        }
        if self.specificity() == 0 {
            return Err(invalid("pattern needs at least one literal"));
        }
        let mut names = BTreeSet::new();
        let mut prev_slot = false;
        for tok in &self.pattern {
            match tok {
                PatternToken::Slot(name) => {
                    if prev_slot {
                        return Err(invalid("adjacent slots"));
                    }
                    if name.is_empty() || name.contains(char::is_whitespace) {
                        return Err(invalid("bad slot name"));
                    }
                    if !names.insert(name.as_str()) {
                        return Err(invalid("duplicate slot name"));
                    }
                    prev_slot = true;
                }
                PatternToken::Literal(word) => {
                    if word.is_empty() || normalize(word).ok().as_deref() != Some(word.as_str()) {
                        return Err(invalid("literal is not a normalized single token"));
                    }
                    prev_slot = false;
                }
            }
        }
        Ok(())
    }

    /// Matches this rule against the whole token sequence. Returns slot
    /// captures as token ranges, in pattern order.
    fn match_tokens(&self, tokens: &[&str]) -> Option<Vec<(usize, usize)>> {
        let mut captures = Vec::new();
        if self.match_from(tokens, 0, 0, &mut captures) {
            Some(captures)
        } else {
            None
        }
    }

    fn match_from(
        &self,
        tokens: &[&str],
        pat: usize,
        pos: usize,
        captures: &mut Vec<(usize, usize)>,
    ) -> bool {
        let Some(tok) = self.pattern.get(pat) else {
            return pos == tokens.len();
        };
        match tok {
            PatternToken::Literal(word) => {
                tokens.get(pos) == Some(&word.as_str())
                    && self.match_from(tokens, pat + 1, pos + 1, captures)
            }
            PatternToken::Slot(_) => {
                if pos >= tokens.len() {
                    return false;
                }
                let anchor = match self.pattern.get(pat + 1) {
                    None => {
                        captures.push((pos, tokens.len()));
                        return true;
                    }
                    Some(PatternToken::Literal(word)) => word.as_str(),
                    Some(PatternToken::Slot(_)) => unreachable!("validated: no adjacent slots"),
                };
                // rightmost anchor first
                for end in (pos + 1..tokens.len()).rev() {
                    if tokens[end] != anchor {
                        continue;
                    }
                    captures.push((pos, end));
                    if self.match_from(tokens, pat + 1, end, captures) {
                        return true;
                    }
                    captures.pop();
                }
                false
            }
        }
    }
}

impl fmt::Display for GrammarRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ::", self.priority, self.kind)?;
        for tok in &self.pattern {
            write!(f, " {tok}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("invalid rule `{id}`: {reason}")]
    InvalidRule { id: String, reason: String },
    #[error("duplicate rule id `{0}`")]
    DuplicateRuleId(String),
}

/// An ordered rule set. Immutable once handed to the session.
#[derive(Debug, Clone, Default)]
pub struct Grammar {
    rules: Vec<GrammarRule>,
}

/// A successful rule match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMatch<'g> {
    pub rule: &'g GrammarRule,
    pub slots: Vec<(String, String)>,
}

impl Grammar {
    pub fn new() -> Self {
        Self::default()
    }

    /// The built-in rule set.
    pub fn default_rules() -> Self {
        parse_grammar_file(DEFAULT_GRAMMAR).expect("built-in grammar is valid")
    }

    pub fn register_rule(&mut self, mut rule: GrammarRule) -> Result<(), GrammarError> {
        rule.validate()?;
        if self.rules.iter().any(|r| r.id == rule.id) {
            return Err(GrammarError::DuplicateRuleId(rule.id));
        }
        rule.registration_index = self.rules.len();
        self.rules.push(rule);
        Ok(())
    }

    /// Builder-style registration.
    pub fn with_rule(mut self, rule: GrammarRule) -> Result<Self, GrammarError> {
        self.register_rule(rule)?;
        Ok(self)
    }

    pub fn rules(&self) -> &[GrammarRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The winning rule for already-normalized `text`, if any.
    pub fn best_match(&self, text: &str) -> Option<RuleMatch<'_>> {
        let tokens: Vec<&str> = text.split(' ').filter(|t| !t.is_empty()).collect();
        let mut best: Option<(&GrammarRule, Vec<(usize, usize)>)> = None;
        for rule in &self.rules {
            let Some(caps) = rule.match_tokens(&tokens) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((cur, _)) => {
                    (rule.specificity(), rule.priority, std::cmp::Reverse(rule.registration_index))
                        > (cur.specificity(), cur.priority, std::cmp::Reverse(cur.registration_index))
                }
            };
            if better {
                best = Some((rule, caps));
            }
        }
        best.map(|(rule, caps)| {
            let names = rule.pattern.iter().filter_map(|t| match t {
                PatternToken::Slot(n) => Some(n.clone()),
                PatternToken::Literal(_) => None,
            });
            let slots = names
                .zip(caps)
                .map(|(name, (s, e))| (name, tokens[s..e].join(" ")))
                .collect();
            RuleMatch { rule, slots }
        })
    }

    /// Resolves an utterance to an intent; `Unknown` when nothing matches.
    pub fn parse(&self, utterance: &Utterance) -> Intent {
        match self.best_match(utterance.text()) {
            Some(m) => Intent {
                kind: m.rule.kind,
                slots: m.slots.into_iter().collect(),
                matched_rule_id: Some(m.rule.id.clone()),
            },
            None => Intent::unknown(),
        }
    }
}
