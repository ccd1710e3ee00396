//! Final-syllable window and the prosody feature vector fed to the ranker.
//!
//! The final syllable is approximated by the last 0.52 s of the clip (mean
//! English final-syllable length plus one standard deviation). Pitch and
//! energy are measured inside that window only.

mod pitch;
mod standardize;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use pitch::{
    estimate_f0, PitchFrame, PitchTrack, ABSOLUTE_THRESHOLD, F0_MAX, F0_MIN, VOICING_THRESHOLD,
};
pub use standardize::{Standardizer, STD_FLOOR};

use crate::corpus::AudioClip;
use crate::error::{Error, Result};
use crate::framing;

/// 0.37 s mean final-syllable duration + 0.15 s standard deviation.
pub const FINAL_WINDOW_SECONDS: f64 = 0.52;
pub const FEATURE_DIM: usize = 8;
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "window_duration",
    "mean_f0",
    "endpoint_f0",
    "terminal_slope",
    "f0_range",
    "voiced_ratio",
    "mean_log_energy",
    "energy_slope",
];
/// Voiced frames averaged for the endpoint F0.
const ENDPOINT_FRAMES: usize = 3;
const ENERGY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalSyllableWindow {
    pub start: f64,
    pub end: f64,
}

impl FinalSyllableWindow {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// `[max(0, T - 0.52), T]` for a clip of duration `T`.
pub fn final_window(clip: &AudioClip) -> FinalSyllableWindow {
    let end = clip.duration();
    FinalSyllableWindow {
        start: (end - FINAL_WINDOW_SECONDS).max(0.0),
        end,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodyFeatureVector {
    /// s
    pub window_duration: f64,
    /// Hz, over voiced frames
    pub mean_f0: f64,
    /// Hz, mean of the last three voiced frames
    pub endpoint_f0: f64,
    /// Hz/s, least-squares slope over voiced frames
    pub terminal_slope: f64,
    /// Hz
    pub f0_range: f64,
    pub voiced_ratio: f64,
    /// dB
    pub mean_log_energy: f64,
    /// dB/s
    pub energy_slope: f64,
}

impl ProsodyFeatureVector {
    pub const TERMINAL_SLOPE: usize = 3;

    pub fn from_array(a: [f64; FEATURE_DIM]) -> Self {
        Self {
            window_duration: a[0],
            mean_f0: a[1],
            endpoint_f0: a[2],
            terminal_slope: a[3],
            f0_range: a[4],
            voiced_ratio: a[5],
            mean_log_energy: a[6],
            energy_slope: a[7],
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let a: [f64; FEATURE_DIM] = v.try_into().map_err(|_| Error::DimensionMismatch {
            expected: FEATURE_DIM,
            got: v.len(),
        })?;
        Ok(Self::from_array(a))
    }

    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        [
            self.window_duration,
            self.mean_f0,
            self.endpoint_f0,
            self.terminal_slope,
            self.f0_range,
            self.voiced_ratio,
            self.mean_log_energy,
            self.energy_slope,
        ]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.to_array().to_vec()
    }
}

/// Ordinary least-squares slope of `y` on `x`; 0 with fewer than two points
/// or no spread in `x`.
pub(crate) fn ols_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Per-frame log energy `10·log10(mean(x²) + 1e-10)` with frame-center times.
pub fn log_energy_contour(clip: &AudioClip) -> Vec<(f64, f64)> {
    let sr = clip.sample_rate();
    let win = framing::window_len(sr);
    let s = clip.samples();
    framing::frame_starts(s.len(), sr)
        .map(|start| {
            let frame = &s[start..start + win];
            let power = frame.iter().map(|x| x * x).sum::<f64>() / win as f64;
            let t = (start as f64 + win as f64 / 2.0) / sr as f64;
            (t, 10.0 * (power + ENERGY_FLOOR).log10())
        })
        .collect()
}

/// Features of the final-syllable window of `clip`.
pub fn extract_features(clip: &AudioClip) -> Result<ProsodyFeatureVector> {
    extract_with_track(clip).map(|(f, _, _)| f)
}

/// Like [`extract_features`] but also returns the window and the pitch track
/// of the window (frame times relative to the window start).
pub fn extract_with_track(
    clip: &AudioClip,
) -> Result<(ProsodyFeatureVector, FinalSyllableWindow, PitchTrack)> {
    let window = final_window(clip);
    let tail = clip.slice_seconds(window.start, window.end)?;
    let track = estimate_f0(&tail)?;
    let voiced: Vec<(f64, f64)> = track.voiced().collect();

    let (mean_f0, endpoint_f0, terminal_slope, f0_range) = if voiced.len() >= 2 {
        let n = voiced.len() as f64;
        let mean = voiced.iter().map(|v| v.1).sum::<f64>() / n;
        let last = &voiced[voiced.len().saturating_sub(ENDPOINT_FRAMES)..];
        let endpoint = last.iter().map(|v| v.1).sum::<f64>() / last.len() as f64;
        let (lo, hi) = voiced
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v.1), hi.max(v.1))
            });
        (mean, endpoint, ols_slope(&voiced), hi - lo)
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };

    let energy = log_energy_contour(&tail);
    let mean_log_energy = energy.iter().map(|e| e.1).sum::<f64>() / energy.len() as f64;

    let features = ProsodyFeatureVector {
        window_duration: window.width(),
        mean_f0,
        endpoint_f0,
        terminal_slope,
        f0_range,
        voiced_ratio: track.voiced_ratio(),
        mean_log_energy,
        energy_slope: ols_slope(&energy),
    };
    if features.to_array().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("prosody features".into()));
    }
    Ok((features, window, track))
}

/// Extracts features for many clips in parallel; output order matches input.
pub fn extract_many(clips: &[AudioClip]) -> Result<Vec<ProsodyFeatureVector>> {
    clips.par_iter().map(extract_features).collect()
}

/// One line of the JSONL feature dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub path: String,
    pub features: [f64; FEATURE_DIM],
    pub window: [f64; 2],
}

impl FeatureRecord {
    pub fn new(path: impl Into<String>, f: &ProsodyFeatureVector, w: FinalSyllableWindow) -> Self {
        Self {
            path: path.into(),
            features: f.to_array(),
            window: [w.start, w.end],
        }
    }
}
