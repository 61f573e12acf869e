//! Dialog session: prompt, listen, recognize, parse, dispatch, speak, with
//! bounded reprompts on failure.

use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::clock::Clock;
use crate::exec::ExecStatus;
use crate::grammar::{Grammar, Intent, IntentKind, Source};
use crate::skills::reminders::{announcement_text, Announcer, Reminder};
use crate::skills::{Dispatcher, SkillResult, SkillStatus};
use crate::speech::{RecognitionOutcome, SpeechToText, TextToSpeech, TtsError, Voice};

/// First words of every session.
pub const START_PROMPT: &str = "Start to speak";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub listen_timeout_ms: u64,
    pub max_retries: u32,
    pub min_confidence: f64,
    pub voice: Voice,
    pub server_url: Option<String>,
    pub reprompt_text: String,
    pub abort_text: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            listen_timeout_ms: 5000,
            max_retries: 3,
            min_confidence: 0.0,
            voice: Voice::Female,
            server_url: None,
            reprompt_text: "please say that again".into(),
            abort_text: "sorry, i could not understand you".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("listen_timeout_ms must be at least 100, got {0}")]
    ListenTimeout(u64),
    #[error("min_confidence must be within [0, 1], got {0}")]
    MinConfidence(f64),
    #[error("{0} must not be empty")]
    EmptyText(&'static str),
}

impl SessionConfig {
    pub const MIN_LISTEN_TIMEOUT_MS: u64 = 100;

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.listen_timeout_ms < Self::MIN_LISTEN_TIMEOUT_MS {
            return Err(ConfigError::ListenTimeout(self.listen_timeout_ms));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(ConfigError::MinConfidence(self.min_confidence));
        }
        if self.reprompt_text.is_empty() {
            return Err(ConfigError::EmptyText("reprompt_text"));
        }
        if self.abort_text.is_empty() {
            return Err(ConfigError::EmptyText("abort_text"));
        }
        Ok(())
    }

    pub fn listen_window(&self) -> Duration {
        Duration::from_millis(self.listen_timeout_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Listening,
    Recognizing,
    Parsing,
    Dispatching,
    Speaking,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub retry_count: u32,
    pub last_intent: Option<Intent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionEventKind {
    PromptIssued,
    UtteranceReceived,
    RecognitionFailed,
    IntentResolved,
    SkillDispatched,
    ResponseSpoken,
    RetryExhausted,
    SessionStopped,
}

impl SessionEventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionEventKind::PromptIssued => "PromptIssued",
            SessionEventKind::UtteranceReceived => "UtteranceReceived",
            SessionEventKind::RecognitionFailed => "RecognitionFailed",
            SessionEventKind::IntentResolved => "IntentResolved",
            SessionEventKind::SkillDispatched => "SkillDispatched",
            SessionEventKind::ResponseSpoken => "ResponseSpoken",
            SessionEventKind::RetryExhausted => "RetryExhausted",
            SessionEventKind::SessionStopped => "SessionStopped",
        }
    }
}

/// Why a recognition attempt did not produce a usable intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NotRecognized,
    Timeout,
    LowConfidence,
    UnknownIntent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EventPayload {
    // untagged: variants with more required fields come first
    Dispatch {
        intent: Intent,
        result: SkillResult,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exec_status: Option<ExecStatus>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exit_code: Option<i32>,
    },
    Utterance {
        text: String,
        confidence: f64,
        source: Source,
    },
    Spoken {
        text: String,
        voice: Voice,
    },
    Failure {
        reason: FailureReason,
        retry_count: u32,
    },
    Exhausted {
        reason: FailureReason,
        max_retries: u32,
    },
    Intent {
        intent: Intent,
    },
    Prompt {
        text: String,
    },
    Stopped {
        last_intent: Option<IntentKind>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub kind: SessionEventKind,
    pub payload: EventPayload,
    pub at: i64,
}

impl SessionEvent {
    /// Spoken or prompt text carried by the event, if any.
    pub fn text(&self) -> Option<&str> {
        match &self.payload {
            EventPayload::Prompt { text }
            | EventPayload::Spoken { text, .. }
            | EventPayload::Utterance { text, .. } => Some(text),
            _ => None,
        }
    }
}

/// Destination for session events, in emission order.
pub trait EventSink: Send {
    fn emit(&mut self, event: &SessionEvent);
}

/// Keeps events in a shared vector.
#[derive(Clone, Default)]
pub struct MemorySink {
    events: Arc<Mutex<Vec<SessionEvent>>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> Vec<SessionEvent> {
        self.events.lock().clone()
    }
}

impl EventSink for MemorySink {
    fn emit(&mut self, event: &SessionEvent) {
        self.events.lock().push(event.clone());
    }
}

/// Writes events to the tracing log.
#[derive(Debug, Default, Clone, Copy)]
pub struct LogSink;

impl EventSink for LogSink {
    fn emit(&mut self, event: &SessionEvent) {
        info!(
            kind = event.kind.as_str(),
            payload = %serde_json::to_string(&event.payload).unwrap_or_default(),
            "session event"
        );
    }
}

/// Forwards each event to every inner sink.
pub struct FanoutSink(pub Vec<Box<dyn EventSink>>);

impl EventSink for FanoutSink {
    fn emit(&mut self, event: &SessionEvent) {
        for sink in &mut self.0 {
            sink.emit(event);
        }
    }
}

#[derive(Debug, Error)]
pub enum SpeakError {
    #[error("nothing to say")]
    EmptyText,
    #[error(transparent)]
    Tts(#[from] TtsError),
}

/// The single speech output queue. Each call holds the adapter for the whole
/// utterance, so concurrent announcements never interleave.
#[derive(Clone)]
pub struct SpeechOutput {
    tts: Arc<Mutex<Box<dyn TextToSpeech>>>,
    voice: Voice,
}

impl SpeechOutput {
    pub fn new(tts: Box<dyn TextToSpeech>, voice: Voice) -> Self {
        Self {
            tts: Arc::new(Mutex::new(tts)),
            voice,
        }
    }

    pub fn voice(&self) -> Voice {
        self.voice
    }

    pub fn speak(&self, text: &str) -> Result<(), SpeakError> {
        if text.is_empty() {
            return Err(SpeakError::EmptyText);
        }
        self.tts.lock().synthesize(text, self.voice)?;
        Ok(())
    }
}

impl Announcer for SpeechOutput {
    fn announce(&self, reminder: &Reminder) {
        if let Err(e) = self.speak(&announcement_text(reminder)) {
            warn!(error = %e, id = %reminder.id, "reminder announcement not spoken");
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    Config(#[from] ConfigError),
    #[error("adapter initialization failed: {0}")]
    AdapterInitFailure(String),
    #[error("session already stopped")]
    SessionAlreadyStopped,
}

/// How [`Session::run`] ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunEnd {
    /// An Exit intent stopped the session.
    Exited,
    /// The recognizer has nothing more to offer.
    InputExhausted,
}

pub struct Session {
    config: SessionConfig,
    stt: Box<dyn SpeechToText>,
    speech: SpeechOutput,
    grammar: Arc<Grammar>,
    dispatcher: Arc<Dispatcher>,
    sink: Box<dyn EventSink>,
    clock: Arc<dyn Clock>,
    state: SessionState,
    deadline: Option<Instant>,
}

impl Session {
    /// Validates the configuration, issues the start prompt and begins
    /// listening.
    pub fn start(
        config: SessionConfig,
        stt: Box<dyn SpeechToText>,
        speech: SpeechOutput,
        grammar: Arc<Grammar>,
        dispatcher: Arc<Dispatcher>,
        sink: Box<dyn EventSink>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, SessionError> {
        config.validate()?;
        if grammar.is_empty() {
            return Err(SessionError::AdapterInitFailure("grammar has no rules".into()));
        }
        if let Err(e) = dispatcher.registry().ensure_total() {
            return Err(SessionError::AdapterInitFailure(e.to_string()));
        }
        let mut session = Self {
            config,
            stt,
            speech,
            grammar,
            dispatcher,
            sink,
            clock,
            state: SessionState {
                phase: Phase::Idle,
                retry_count: 0,
                last_intent: None,
            },
            deadline: None,
        };
        session.emit(
            SessionEventKind::PromptIssued,
            EventPayload::Prompt {
                text: START_PROMPT.to_string(),
            },
        );
        if let Err(e) = session.speech.speak(START_PROMPT) {
            warn!(error = %e, "start prompt not spoken");
        }
        session.listen();
        Ok(session)
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// End of the current listening window.
    pub fn deadline(&self) -> Option<Instant> {
        self.deadline
    }

    fn emit(&mut self, kind: SessionEventKind, payload: EventPayload) {
        let event = SessionEvent {
            kind,
            payload,
            at: self.clock.now_ms(),
        };
        self.sink.emit(&event);
    }

    fn listen(&mut self) {
        self.state.phase = Phase::Listening;
        self.deadline = Some(Instant::now() + self.config.listen_window());
    }

    fn say(&mut self, text: &str) {
        let prior = self.state.phase;
        self.state.phase = Phase::Speaking;
        match self.speech.speak(text) {
            Ok(()) => {
                let voice = self.speech.voice();
                self.emit(
                    SessionEventKind::ResponseSpoken,
                    EventPayload::Spoken {
                        text: text.to_string(),
                        voice,
                    },
                );
            }
            Err(e) => warn!(error = %e, "response not spoken"),
        }
        self.state.phase = prior;
    }

    /// Feeds one recognition outcome through the state machine.
    pub fn step(&mut self, outcome: RecognitionOutcome) -> Result<SessionState, SessionError> {
        if self.state.phase == Phase::Stopped {
            return Err(SessionError::SessionAlreadyStopped);
        }
        self.state.phase = Phase::Recognizing;
        let utterance = match outcome {
            RecognitionOutcome::Success(u) => u,
            RecognitionOutcome::Failure => return Ok(self.fail(FailureReason::NotRecognized)),
            RecognitionOutcome::Timeout => return Ok(self.fail(FailureReason::Timeout)),
        };
        self.emit(
            SessionEventKind::UtteranceReceived,
            EventPayload::Utterance {
                text: utterance.text().to_string(),
                confidence: utterance.confidence(),
                source: utterance.source(),
            },
        );
        if utterance.confidence() < self.config.min_confidence {
            return Ok(self.fail(FailureReason::LowConfidence));
        }
        self.state.phase = Phase::Parsing;
        let intent = self.grammar.parse(&utterance);
        if intent.is_unknown() {
            return Ok(self.fail(FailureReason::UnknownIntent));
        }
        self.state.retry_count = 0;
        self.emit(
            SessionEventKind::IntentResolved,
            EventPayload::Intent {
                intent: intent.clone(),
            },
        );

        self.state.phase = Phase::Dispatching;
        let (result, exec_status, exit_code) = match self.dispatcher.dispatch(&intent) {
            Ok(d) => {
                let exec = d.execution.as_ref();
                (d.result, exec.map(|e| e.status), exec.and_then(|e| e.exit_code))
            }
            Err(e) => (
                SkillResult::backend_error("sorry, i cannot do that right now", e.to_string()),
                None,
                None,
            ),
        };
        let spoken = result.spoken_text.clone();
        self.emit(
            SessionEventKind::SkillDispatched,
            EventPayload::Dispatch {
                intent: intent.clone(),
                result,
                exec_status,
                exit_code,
            },
        );
        self.say(if spoken.is_empty() { "done" } else { &spoken });
        self.state.last_intent = Some(intent.clone());

        if intent.kind == IntentKind::Exit {
            self.state.phase = Phase::Stopped;
            self.deadline = None;
            self.emit(
                SessionEventKind::SessionStopped,
                EventPayload::Stopped {
                    last_intent: Some(IntentKind::Exit),
                },
            );
        } else {
            self.listen();
        }
        Ok(self.state.clone())
    }

    fn fail(&mut self, reason: FailureReason) -> SessionState {
        if self.state.retry_count < self.config.max_retries {
            self.state.retry_count += 1;
            let retry_count = self.state.retry_count;
            self.emit(
                SessionEventKind::RecognitionFailed,
                EventPayload::Failure { reason, retry_count },
            );
            let text = self.config.reprompt_text.clone();
            self.say(&text);
            self.listen();
        } else {
            let text = self.config.abort_text.clone();
            self.say(&text);
            let max_retries = self.config.max_retries;
            self.emit(
                SessionEventKind::RetryExhausted,
                EventPayload::Exhausted { reason, max_retries },
            );
            self.state.retry_count = 0;
            self.state.phase = Phase::Idle;
            self.deadline = None;
        }
        self.state.clone()
    }

    /// Listens once (re-entering Listening from Idle) and steps.
    pub fn listen_once(&mut self) -> Result<SessionState, SessionError> {
        if self.state.phase == Phase::Stopped {
            return Err(SessionError::SessionAlreadyStopped);
        }
        if self.state.phase == Phase::Idle {
            self.listen();
        }
        let outcome = self.stt.transcribe(self.config.listen_window());
        self.step(outcome)
    }

    /// Keeps listening until Exit or until the recognizer is exhausted.
    pub fn run(&mut self) -> Result<RunEnd, SessionError> {
        loop {
            if self.state.phase == Phase::Stopped {
                return Ok(RunEnd::Exited);
            }
            if self.stt.is_exhausted() {
                return Ok(RunEnd::InputExhausted);
            }
            self.listen_once()?;
        }
    }

    /// Stops the session from outside, e.g. on a shutdown signal.
    pub fn stop(&mut self) {
        if self.state.phase != Phase::Stopped {
            self.state.phase = Phase::Stopped;
            self.deadline = None;
            let last_intent = self.state.last_intent.as_ref().map(|i| i.kind);
            self.emit(SessionEventKind::SessionStopped, EventPayload::Stopped { last_intent });
        }
    }
}

/// Status counted toward a process exit code.
pub fn worst_status(events: &[SessionEvent]) -> Option<SkillStatus> {
    events
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::Dispatch { result, .. } => Some(result.status),
            _ => None,
        })
        .max_by_key(|s| match s {
            SkillStatus::Ok => 0,
            SkillStatus::UserError => 1,
            SkillStatus::BackendError => 2,
        })
}
