//! 16 kHz mono PCM16 WAV input.

use std::path::Path;

use thiserror::Error;

use super::vad::{frames_from_samples, AudioFrame, VadError, SAMPLE_RATE_HZ};

#[derive(Debug, Error)]
pub enum WavError {
    #[error("wav: {0}")]
    Read(#[from] hound::Error),
    #[error("wav must be {SAMPLE_RATE_HZ} Hz mono 16-bit PCM, got {rate} Hz, {channels} ch, {bits} bit")]
    Format { rate: u32, channels: u16, bits: u16 },
    #[error(transparent)]
    Frame(#[from] VadError),
}

/// Reads a WAV file into normalized frames (sample / 32768).
pub fn read_frames(path: impl AsRef<Path>) -> Result<Vec<AudioFrame<f32>>, WavError> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE_HZ
        || spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(WavError::Format {
            rate: spec.sample_rate,
            channels: spec.channels,
            bits: spec.bits_per_sample,
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f32::from(v) / 32768.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(frames_from_samples(&samples)?)
}
