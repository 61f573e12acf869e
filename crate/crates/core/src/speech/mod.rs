//! Speech input/output seams: energy-threshold voice activity detection,
//! speech-to-text adapters and text-to-speech adapters.

mod stt;
mod tts;
pub mod vad;
pub mod wav;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use stt::{ExternalStt, MockStt, RecognitionOutcome, SpeechToText, SttError};
pub use tts::{ExternalTts, MockTts, TextToSpeech, TtsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voice {
    Male,
    #[default]
    Female,
}

impl fmt::Display for Voice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Voice::Male => "male",
            Voice::Female => "female",
        })
    }
}

impl FromStr for Voice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" => Ok(Voice::Male),
            "female" => Ok(Voice::Female),
            other => Err(format!("voice must be `male` or `female`, got `{other}`")),
        }
    }
}

/// Splits a command template on whitespace and substitutes `{name}`
/// placeholders per argument. A substituted value stays one argument even if
/// it contains spaces.
pub(crate) fn expand_template(template: &str, vars: &[(&str, &str)]) -> Vec<String> {
    template
        .split_whitespace()
        .map(|tok| {
            vars.iter().fold(tok.to_string(), |acc, (name, value)| {
                acc.replace(&format!("{{{name}}}"), value)
            })
        })
        .collect()
}
