use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("utterance is empty after normalization")]
pub struct EmptyUtterance;

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}").expect("static regex"))
}

/// Lowercases, replaces every Unicode punctuation character with a space,
/// collapses whitespace runs and trims.
pub fn normalize(raw: &str) -> Result<String, EmptyUtterance> {
    let lowered = raw.to_lowercase();
    let spaced = punctuation().replace_all(&lowered, " ");
    let out = spaced.split_whitespace().collect::<Vec<_>>().join(" ");
    if out.is_empty() {
        Err(EmptyUtterance)
    } else {
        Ok(out)
    }
}
