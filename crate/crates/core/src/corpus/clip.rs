use crate::error::{Error, Result};
use crate::framing;

pub const MIN_SAMPLE_RATE: u32 = 8_000;

/// Mono waveform with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Validates and wraps a waveform. The clip must hold at least one 25 ms
    /// analysis window.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(Error::InvalidClip(format!(
                "sample rate {sample_rate} Hz is below {MIN_SAMPLE_RATE} Hz"
            )));
        }
        let min_len = framing::window_len(sample_rate);
        if samples.len() < min_len {
            return Err(Error::InvalidClip(format!(
                "{} samples is shorter than one {min_len}-sample window",
                samples.len()
            )));
        }
        if let Some((i, x)) = samples
            .iter()
            .enumerate()
            .find(|(_, x)| !x.is_finite() || x.abs() > 1.0)
        {
            return Err(Error::InvalidClip(format!(
                "sample {i} = {x} is outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(seconds: f64, sample_rate: u32) -> Result<Self> {
        let n = (seconds * sample_rate as f64).round() as usize;
        Self::new(vec![0.0; n], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `gain`; fails if the result leaves `[-1, 1]`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|x| x * gain).collect(),
            self.sample_rate,
        )
    }

    /// Samples in `[start, end)` seconds as a new clip.
    pub fn slice_seconds(&self, start: f64, end: f64) -> Result<Self> {
        let sr = self.sample_rate as f64;
        let a = ((start * sr).round() as usize).min(self.samples.len());
        let b = ((end * sr).round() as usize).clamp(a, self.samples.len());
        Self::new(self.samples[a..b].to_vec(), self.sample_rate)
    }
}
