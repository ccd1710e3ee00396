//! Harmonic-tone synthesis with a controllable terminal glide.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::error::{Error, Result};
use crate::features::FINAL_WINDOW_SECONDS;

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Relative levels of the fundamental and the two harmonics (0, -6, -12 dB).
const PARTIAL_DB: [f64; 3] = [0.0, -6.0, -12.0];
/// Peak level of the noiseless tone.
const TONE_PEAK: f64 = 0.5;

/// Direction of the terminal pitch glide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contour {
    Fall,
    Rise,
}

impl Contour {
    fn sign(self) -> f64 {
        match self {
            Contour::Fall => -1.0,
            Contour::Rise => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Seconds, in `[0.3, 10]`.
    pub duration: f64,
    /// Hz, in `[80, 400]`.
    pub base_f0: f64,
    pub contour: Contour,
    /// Semitones reached at the end of the final window, in `[0, 12]`.
    pub terminal_shift: f64,
    /// Signal-to-noise ratio of the additive Gaussian noise, dB.
    pub snr_db: f64,
    pub seed: u64,
    pub sample_rate: u32,
}

impl SynthSpec {
    pub fn new(duration: f64, base_f0: f64, contour: Contour, terminal_shift: f64) -> Self {
        Self {
            duration,
            base_f0,
            contour,
            terminal_shift,
            snr_db: 40.0,
            seed: 0,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidSpec(what));
        if !(0.3..=10.0).contains(&self.duration) {
            return bad(format!("duration {} s not in [0.3, 10]", self.duration));
        }
        if !(80.0..=400.0).contains(&self.base_f0) {
            return bad(format!("base_f0 {} Hz not in [80, 400]", self.base_f0));
        }
        if !(0.0..=12.0).contains(&self.terminal_shift) {
            return bad(format!(
                "terminal_shift {} st not in [0, 12]",
                self.terminal_shift
            ));
        }
        if !self.snr_db.is_finite() {
            return bad("snr must be finite".into());
        }
        if self.sample_rate < super::clip::MIN_SAMPLE_RATE {
            return bad(format!("sample rate {} too low", self.sample_rate));
        }
        Ok(())
    }

    /// Instantaneous fundamental at time `t` seconds: flat at `base_f0`, then a
    /// glide linear in semitones across the final window.
    pub fn f0_at(&self, t: f64) -> f64 {
        let start = (self.duration - FINAL_WINDOW_SECONDS).max(0.0);
        if t <= start {
            return self.base_f0;
        }
        let progress = ((t - start) / (self.duration - start)).min(1.0);
        let semitones = self.contour.sign() * self.terminal_shift * progress;
        self.base_f0 * (semitones / 12.0).exp2()
    }

    /// F0 reached at the end of the clip.
    pub fn endpoint_f0(&self) -> f64 {
        self.base_f0 * (self.contour.sign() * self.terminal_shift / 12.0).exp2()
    }
}

/// Renders `spec` to a clip. The phase is accumulated sample by sample so the
/// instantaneous frequency follows [`SynthSpec::f0_at`] exactly.
pub fn generate_clip(spec: &SynthSpec) -> Result<AudioClip> {
    spec.validate()?;
    let sr = spec.sample_rate as f64;
    let n = (spec.duration * sr).round() as usize;

    let amps: Vec<f64> = PARTIAL_DB.iter().map(|db| 10f64.powf(db / 20.0)).collect();
    let norm = TONE_PEAK / amps.iter().sum::<f64>();
    let tone_rms = norm * (amps.iter().map(|a| a * a).sum::<f64>() / 2.0).sqrt();
    let noise_sd = tone_rms / 10f64.powf(spec.snr_db / 20.0);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidSpec(e.to_string()))?;

    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        let tone: f64 = amps
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * phase).sin())
            .sum();
        let x = norm * tone + noise.sample(&mut rng);
        samples.push(x.clamp(-1.0, 1.0));
        phase = (phase + TAU * spec.f0_at(t) / sr) % TAU;
    }
    AudioClip::new(samples, spec.sample_rate)
}
