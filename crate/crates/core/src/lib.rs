//! Core of the voxd voice assistant: intent grammar, dialog session,
//! built-in skills, speech adapters and the command execution policy.

pub mod clock;
pub mod dialog;
pub mod exec;
pub mod grammar;
pub mod skills;
pub mod speech;

pub use clock::{Clock, ManualClock, SystemClock};
pub use grammar::{Grammar, Intent, IntentKind, Utterance};

/// Single-precision audio frame, the format decoded from WAV input.
pub type AudioFrame = speech::vad::AudioFrame<f32>;
/// Double-precision audio frame for analysis and tests.
pub type AudioFrame64 = speech::vad::AudioFrame<f64>;
pub type VadParams = speech::vad::VadParams<f32>;
pub type VadParams64 = speech::vad::VadParams<f64>;
