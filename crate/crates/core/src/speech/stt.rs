use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tracing::warn;

use super::expand_template;
use super::vad::{detect_speech, VadParams};
use super::wav::read_frames;
use crate::clock::Clock;
use crate::exec::CommandRunner;
use crate::grammar::{Source, Utterance};

#[derive(Debug, Clone, PartialEq)]
pub enum RecognitionOutcome {
    Success(Utterance),
    Failure,
    Timeout,
}

impl RecognitionOutcome {
    pub fn utterance(&self) -> Option<&Utterance> {
        match self {
            RecognitionOutcome::Success(u) => Some(u),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SttError {
    #[error("cannot read STT script {path}: {source}")]
    Script {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("STT command template is empty")]
    EmptyCommand,
}

pub trait SpeechToText: Send {
    /// Listens for at most `window` and reports what was heard.
    fn transcribe(&mut self, window: Duration) -> RecognitionOutcome;

    /// True once the adapter can never produce another utterance.
    fn is_exhausted(&self) -> bool {
        false
    }
}

/// Replays a script, one outcome per line.
///
/// A plain line is a confident success, `conf=<x>;<text>` sets the
/// confidence, `!fail` and `!timeout` produce those outcomes. Blank lines are
/// skipped. An exhausted script yields `Timeout`.
pub struct MockStt {
    lines: VecDeque<String>,
    clock: Arc<dyn Clock>,
}

impl MockStt {
    pub fn from_script(script: &str, clock: Arc<dyn Clock>) -> Self {
        Self {
            lines: script
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
            clock,
        }
    }

    pub fn from_file(path: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, SttError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SttError::Script {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_script(&text, clock))
    }

    pub fn remaining(&self) -> usize {
        self.lines.len()
    }

    fn outcome(&self, line: &str) -> RecognitionOutcome {
        match line {
            "!fail" => return RecognitionOutcome::Failure,
            "!timeout" => return RecognitionOutcome::Timeout,
            _ => {}
        }
        let (confidence, text) = match line.strip_prefix("conf=").and_then(|r| r.split_once(';')) {
            Some((c, text)) => match c.trim().parse::<f64>() {
                Ok(c) => (c, text),
                Err(_) => {
                    warn!(line, "malformed confidence in STT script");
                    return RecognitionOutcome::Failure;
                }
            },
            None => (1.0, line),
        };
        match Utterance::new(text, confidence, Source::Voice, self.clock.now_ms()) {
            Ok(u) => RecognitionOutcome::Success(u),
            Err(_) => RecognitionOutcome::Failure,
        }
    }
}

impl SpeechToText for MockStt {
    fn transcribe(&mut self, _window: Duration) -> RecognitionOutcome {
        match self.lines.pop_front() {
            Some(line) => self.outcome(&line),
            None => RecognitionOutcome::Timeout,
        }
    }

    fn is_exhausted(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Delegates recognition to an external command whose stdout is the text.
///
/// With a WAV input configured, the audio is gated by the voice activity
/// detector first and the command is skipped when no speech is present.
pub struct ExternalStt {
    template: String,
    wav: Option<PathBuf>,
    vad: VadParams<f32>,
    runner: Arc<dyn CommandRunner>,
    clock: Arc<dyn Clock>,
}

impl ExternalStt {
    pub fn new(
        template: impl Into<String>,
        runner: Arc<dyn CommandRunner>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, SttError> {
        let template = template.into();
        if template.trim().is_empty() {
            return Err(SttError::EmptyCommand);
        }
        Ok(Self {
            template,
            wav: None,
            vad: VadParams::default(),
            runner,
            clock,
        })
    }

    pub fn with_wav(mut self, wav: impl Into<PathBuf>, vad: VadParams<f32>) -> Self {
        self.wav = Some(wav.into());
        self.vad = vad;
        self
    }
}

impl SpeechToText for ExternalStt {
    fn transcribe(&mut self, window: Duration) -> RecognitionOutcome {
        let wav = self.wav.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        if let Some(path) = &self.wav {
            match read_frames(path) {
                Ok(frames) if detect_speech(&frames, &self.vad).is_empty() => {
                    return RecognitionOutcome::Failure;
                }
                Ok(_) => {}
                Err(e) => {
                    warn!(error = %e, "cannot read audio input");
                    return RecognitionOutcome::Failure;
                }
            }
        }
        let argv = expand_template(&self.template, &[("wav", &wav)]);
        let Some((program, args)) = argv.split_first() else {
            return RecognitionOutcome::Failure;
        };
        match self.runner.run(program, args, window) {
            Ok(out) if out.timed_out => RecognitionOutcome::Timeout,
            Ok(out) if out.exit_code == Some(0) => {
                let text = String::from_utf8_lossy(&out.stdout);
                Utterance::new(&text, 1.0, Source::Voice, self.clock.now_ms())
                    .map(RecognitionOutcome::Success)
                    .unwrap_or(RecognitionOutcome::Failure)
            }
            Ok(_) => RecognitionOutcome::Failure,
            Err(e) => {
                warn!(error = %e, "STT command failed");
                RecognitionOutcome::Failure
            }
        }
    }
}
