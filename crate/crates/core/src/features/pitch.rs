//! Frame-wise F0 tracking with the YIN cumulative-mean-normalized difference
//! function.
//!
//! For a frame `x` of `N` samples the mean squared difference at lag `τ` is
//!
//! ```text
//! d(τ)  = 1/(N-τ) · Σ_{j<N-τ} (x_j - x_{j+τ})²
//! d'(τ) = d(τ) / ( (1/τ) · Σ_{k=1..τ} d(k) ),   d'(0) = 1
//! ```
//!
//! The period is the first lag in the 60–500 Hz search range whose `d'` dips
//! under [`ABSOLUTE_THRESHOLD`] (followed down to its local minimum), or the
//! global minimum of `d'` when nothing dips that low. Confidence is
//! `1 - d'(τ)`; frames under [`VOICING_THRESHOLD`] are unvoiced.

use serde::{Deserialize, Serialize};

use crate::corpus::AudioClip;
use crate::error::{Error, Result};
use crate::framing;

pub const F0_MIN: f64 = 60.0;
pub const F0_MAX: f64 = 500.0;
pub const VOICING_THRESHOLD: f64 = 0.5;
pub const ABSOLUTE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchFrame {
    /// Hz; `None` when unvoiced.
    pub f0: Option<f64>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    /// Seconds between frame starts.
    pub hop: f64,
    /// Analysis window length in seconds.
    pub window: f64,
    pub frames: Vec<PitchFrame>,
}

impl PitchTrack {
    pub fn new(hop: f64, window: f64, frames: Vec<PitchFrame>) -> Result<Self> {
        if !(hop > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "hop {hop} must be positive"
            )));
        }
        if let Some(f) = frames
            .iter()
            .filter_map(|f| f.f0)
            .find(|f0| !(F0_MIN..=F0_MAX).contains(f0))
        {
            return Err(Error::InvalidArgument(format!(
                "voiced f0 {f} Hz outside [{F0_MIN}, {F0_MAX}]"
            )));
        }
        Ok(Self {
            hop,
            window,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Center time of frame `i`, seconds from the start of the analysed audio.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.hop + self.window / 2.0
    }

    /// `(time, f0)` for every voiced frame.
    pub fn voiced(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frames
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.f0.map(|f0| (self.time(i), f0)))
    }

    pub fn voiced_ratio(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().filter(|f| f.f0.is_some()).count() as f64 / self.frames.len() as f64
    }

    /// Median F0 of the voiced frames whose centers fall in `[t0, t1]`.
    pub fn median_f0_between(&self, t0: f64, t1: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .voiced()
            .filter(|(t, _)| *t >= t0 && *t <= t1)
            .map(|(_, f)| f)
            .collect();
        median(&mut v)
    }

    /// F0 at time `t_end`, from a least-squares line through the voiced frames
    /// centered within `span` seconds before `t_end`. Frame estimates trail the
    /// end of the audio by half a window; extrapolating the local trend
    /// recovers the value at the end itself.
    pub fn terminal_f0(&self, t_end: f64, span: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .voiced()
            .filter(|(t, _)| *t >= t_end - span && *t <= t_end)
            .collect();
        match pts.len() {
            0 => None,
            1 => Some(pts[0].1),
            _ => {
                let n = pts.len() as f64;
                let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
                let mf = pts.iter().map(|p| p.1).sum::<f64>() / n;
                Some(mf + super::ols_slope(&pts) * (t_end - mt))
            }
        }
    }

    pub fn median_f0(&self) -> Option<f64> {
        self.median_f0_between(f64::NEG_INFINITY, f64::INFINITY)
    }
}

pub(crate) fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Cumulative-mean-normalized difference for lags `0..=max_lag`.
fn cmnd(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let n = frame.len();
    let mut out = vec![1.0; max_lag + 1];
    let mut running = 0.0;
    for tau in 1..=max_lag {
        let terms = n - tau;
        let d: f64 = frame[..terms]
            .iter()
            .zip(&frame[tau..])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / terms as f64;
        running += d;
        out[tau] = if running > 0.0 {
            d * tau as f64 / running
        } else {
            1.0
        };
    }
    out
}

fn analyse_frame(frame: &[f64], sample_rate: u32) -> PitchFrame {
    let unvoiced = PitchFrame {
        f0: None,
        confidence: 0.0,
    };
    if frame.iter().all(|&x| x == 0.0) {
        return unvoiced;
    }
    let sr = sample_rate as f64;
    let min_lag = ((sr / F0_MAX).floor() as usize).max(2);
    let max_lag = ((sr / F0_MIN).ceil() as usize).min(frame.len() - 2);
    if min_lag >= max_lag {
        return unvoiced;
    }
    let d = cmnd(frame, max_lag + 1);

    let mut tau = (min_lag..=max_lag).find(|&t| d[t] < ABSOLUTE_THRESHOLD);
    if let Some(mut t) = tau {
        while t < max_lag && d[t + 1] < d[t] {
            t += 1;
        }
        tau = Some(t);
    }
    let tau = tau.unwrap_or_else(|| {
        (min_lag..=max_lag)
            .min_by(|&a, &b| d[a].total_cmp(&d[b]))
            .expect("non-empty lag range")
    });

    let confidence = (1.0 - d[tau]).clamp(0.0, 1.0);
    let (a, b, c) = (d[tau - 1], d[tau], d[tau + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom > 0.0 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let f0 = sr / (tau as f64 + shift);

    if confidence < VOICING_THRESHOLD || !(F0_MIN..=F0_MAX).contains(&f0) {
        PitchFrame {
            f0: None,
            confidence,
        }
    } else {
        PitchFrame {
            f0: Some(f0),
            confidence,
        }
    }
}

/// Tracks F0 over 25 ms windows advanced by 10 ms.
pub fn estimate_f0(clip: &AudioClip) -> Result<PitchTrack> {
    let sr = clip.sample_rate();
    let win = framing::window_len(sr);
    if clip.len() < win {
        return Err(Error::InvalidClip(format!(
            "{} samples is shorter than one {win}-sample window",
            clip.len()
        )));
    }
    let samples = clip.samples();
    let frames = framing::frame_starts(samples.len(), sr)
        .map(|s| analyse_frame(&samples[s..s + win], sr))
        .collect();
    PitchTrack::new(
        framing::hop_len(sr) as f64 / sr as f64,
        win as f64 / sr as f64,
        frames,
    )
}
