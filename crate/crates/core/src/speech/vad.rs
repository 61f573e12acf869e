//! Energy-threshold voice activity detection over fixed 20 ms frames.

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SAMPLE_RATE_HZ: u32 = 16_000;
/// 20 ms at 16 kHz.
pub const FRAME_LEN: usize = 320;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VadError {
    #[error("frame must hold exactly {FRAME_LEN} samples, got {0}")]
    FrameLength(usize),
    #[error("sample {index} out of range [-1, 1]")]
    SampleRange { index: usize },
    #[error("threshold must be positive")]
    Threshold,
    #[error("onset and hangover must be at least 1 frame")]
    FrameCount,
}

/// One frame of normalized mono samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrame<T> {
    samples: Vec<T>,
}

impl<T: Float> AudioFrame<T> {
    pub fn new(samples: Vec<T>) -> Result<Self, VadError> {
        if samples.len() != FRAME_LEN {
            return Err(VadError::FrameLength(samples.len()));
        }
        if let Some(index) = samples.iter().position(|s| s.is_nan() || s.abs() > T::one()) {
            return Err(VadError::SampleRange { index });
        }
        Ok(Self { samples })
    }

    pub fn silent() -> Self {
        Self {
            samples: vec![T::zero(); FRAME_LEN],
        }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn rms(&self) -> T {
        frame_rms(self)
    }
}

/// Root mean square of the frame's samples.
pub fn frame_rms<T: Float>(frame: &AudioFrame<T>) -> T {
    let sum = frame
        .samples
        .iter()
        .fold(T::zero(), |acc, &s| acc + s * s);
    let n = T::from(frame.samples.len()).expect("frame length fits the scalar type");
    (sum / n).sqrt()
}

/// Splits samples into whole frames, dropping a trailing partial frame.
pub fn frames_from_samples<T: Float>(samples: &[T]) -> Result<Vec<AudioFrame<T>>, VadError> {
    samples
        .chunks_exact(FRAME_LEN)
        .map(|c| AudioFrame::new(c.to_vec()))
        .collect()
}

/// Inclusive frame range classified as speech.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechSegment {
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadParams<T> {
    threshold: T,
    onset: usize,
    hangover: usize,
}

impl<T: Float> VadParams<T> {
    pub fn new(threshold: T, onset: usize, hangover: usize) -> Result<Self, VadError> {
        if threshold.is_nan() || threshold <= T::zero() {
            return Err(VadError::Threshold);
        }
        if onset == 0 || hangover == 0 {
            return Err(VadError::FrameCount);
        }
        Ok(Self {
            threshold,
            onset,
            hangover,
        })
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn onset(&self) -> usize {
        self.onset
    }

    pub fn hangover(&self) -> usize {
        self.hangover
    }
}

impl<T: Float> Default for VadParams<T> {
    /// θ = 0.02, k = 3 onset frames, m = 25 hangover frames (500 ms).
    fn default() -> Self {
        Self {
            threshold: T::from(0.02).expect("0.02 fits the scalar type"),
            onset: 3,
            hangover: 25,
        }
    }
}

pub fn detect_speech<T: Float>(frames: &[AudioFrame<T>], params: &VadParams<T>) -> Vec<SpeechSegment> {
    let levels: Vec<T> = frames.iter().map(frame_rms).collect();
    detect_speech_levels(&levels, params)
}

/// Segmentation over precomputed frame energies.
///
/// A segment opens on the first of `onset` consecutive loud frames and closes
/// on the last loud frame followed by `hangover` quiet frames or end of input.
pub fn detect_speech_levels<T: Float>(levels: &[T], params: &VadParams<T>) -> Vec<SpeechSegment> {
    let loud: Vec<bool> = levels.iter().map(|&r| r > params.threshold).collect();
    let n = loud.len();
    let mut segments = Vec::new();
    let mut i = 0;
    while i < n {
        if i + params.onset > n || !loud[i..i + params.onset].iter().all(|&l| l) {
            i += 1;
            continue;
        }
        let start = i;
        let mut last_loud = i + params.onset - 1;
        let mut quiet = 0;
        let mut j = last_loud + 1;
        while j < n && quiet < params.hangover {
            if loud[j] {
                last_loud = j;
                quiet = 0;
            } else {
                quiet += 1;
            }
            j += 1;
        }
        segments.push(SpeechSegment {
            start_frame: start,
            end_frame: last_loud,
        });
        i = j;
    }
    segments
}
