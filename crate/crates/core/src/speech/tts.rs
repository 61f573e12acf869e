use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use thiserror::Error;

use super::{expand_template, Voice};
use crate::exec::CommandRunner;

#[derive(Debug, Error)]
pub enum TtsError {
    #[error("nothing to say")]
    EmptyText,
    #[error("tts log: {0}")]
    Io(#[from] std::io::Error),
    #[error("tts command failed: {0}")]
    ExternalCommandFailure(String),
}

pub trait TextToSpeech: Send {
    fn synthesize(&mut self, text: &str, voice: Voice) -> Result<(), TtsError>;
}

enum MockSink {
    File(File),
    Memory(Arc<Mutex<Vec<String>>>),
}

/// Writes `[TTS voice=<voice>] <text>` lines instead of producing audio.
pub struct MockTts {
    sink: MockSink,
}

impl MockTts {
    /// Appends to a log file, creating it if needed.
    pub fn to_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            sink: MockSink::File(file),
        })
    }

    /// Collects lines in memory; the returned handle observes them.
    pub fn in_memory() -> (Self, Arc<Mutex<Vec<String>>>) {
        let lines = Arc::new(Mutex::new(Vec::new()));
        (
            Self {
                sink: MockSink::Memory(lines.clone()),
            },
            lines,
        )
    }

    pub fn line(text: &str, voice: Voice) -> String {
        format!("[TTS voice={voice}] {text}")
    }
}

impl TextToSpeech for MockTts {
    fn synthesize(&mut self, text: &str, voice: Voice) -> Result<(), TtsError> {
        if text.is_empty() {
            return Err(TtsError::EmptyText);
        }
        let line = Self::line(text, voice);
        match &mut self.sink {
            MockSink::File(f) => f.write_all(format!("{line}\n").as_bytes())?,
            MockSink::Memory(lines) => lines.lock().push(line),
        }
        Ok(())
    }
}

/// Runs a synthesis command with `{text}` and `{voice}` placeholders.
pub struct ExternalTts {
    template: String,
    runner: Arc<dyn CommandRunner>,
    timeout: Duration,
}

impl ExternalTts {
    pub fn new(template: impl Into<String>, runner: Arc<dyn CommandRunner>, timeout: Duration) -> Self {
        Self {
            template: template.into(),
            runner,
            timeout,
        }
    }
}

impl TextToSpeech for ExternalTts {
    fn synthesize(&mut self, text: &str, voice: Voice) -> Result<(), TtsError> {
        if text.is_empty() {
            return Err(TtsError::EmptyText);
        }
        let voice = voice.to_string();
        let argv = expand_template(&self.template, &[("text", text), ("voice", &voice)]);
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| TtsError::ExternalCommandFailure("empty command".into()))?;
        let out = self
            .runner
            .run(program, args, self.timeout)
            .map_err(|e| TtsError::ExternalCommandFailure(e.to_string()))?;
        match out.exit_code {
            Some(0) => Ok(()),
            Some(code) => Err(TtsError::ExternalCommandFailure(format!("exit code {code}"))),
            None => Err(TtsError::ExternalCommandFailure("killed".into())),
        }
    }
}
