//! Objective comparison of synthesized speech against a reference: mel
//! cepstral distortion, F0 frame error and duration MSE. Frames are aligned
//! one-to-one and the longer input is truncated (no time warping).

use std::f64::consts::{LN_10, PI};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::corpus::AudioClip;
use crate::error::{Error, Result};
use crate::features::{estimate_f0, PitchTrack};
use crate::framing;

pub const MEL_BANDS: usize = 40;
/// Cepstral coefficients kept per frame (c1..c13; c0 is dropped).
pub const CEPSTRAL_ORDER: usize = 13;
const LOG_FLOOR: f64 = 1e-10;
/// Relative F0 deviation beyond which a voiced frame counts as an error.
pub const FFE_DEVIATION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelCepstra {
    /// One row of `order` coefficients per frame.
    pub frames: Vec<Vec<f64>>,
    pub order: usize,
}

impl MelCepstra {
    pub fn new(frames: Vec<Vec<f64>>, order: usize) -> Result<Self> {
        if let Some(r) = frames.iter().find(|r| r.len() != order) {
            return Err(Error::DimensionMismatch {
                expected: order,
                got: r.len(),
            });
        }
        if frames.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("cepstral coefficient".into()));
        }
        Ok(Self { frames, order })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on mel-spaced centers from 0 Hz to Nyquist, evaluated
/// at each FFT bin frequency. Row `b` holds the weights of band `b`.
fn mel_filterbank(sample_rate: u32, n_fft: usize) -> Vec<Vec<f64>> {
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..MEL_BANDS + 2)
        .map(|i| mel_to_hz(top * i as f64 / (MEL_BANDS + 1) as f64))
        .collect();
    let bins = n_fft / 2 + 1;
    (0..MEL_BANDS)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / n_fft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II coefficients `1..=order` of `x`.
fn dct2_tail(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len() as f64;
    let scale = (2.0 / n).sqrt();
    (1..=order)
        .map(|k| {
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Hann-windowed STFT (25 ms / 10 ms) → 40-band mel power → natural log
/// (floored at 1e-10) → orthonormal DCT-II, keeping c1..c13.
pub fn mel_cepstra(clip: &AudioClip) -> Result<MelCepstra> {
    let sr = clip.sample_rate();
    let win = framing::window_len(sr);
    if clip.len() < win {
        return Err(Error::InvalidClip("clip is shorter than one frame".into()));
    }
    let n_fft = win.next_power_of_two();
    let hann: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (win - 1) as f64).cos())
        .collect();
    let bank = mel_filterbank(sr, n_fft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let s = clip.samples();

    let frames = framing::frame_starts(s.len(), sr)
        .map(|start| {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (i, (x, w)) in s[start..start + win].iter().zip(&hann).enumerate() {
                buf[i].re = x * w;
            }
            fft.process(&mut buf);
            let power: Vec<f64> = buf[..n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
            let log_mel: Vec<f64> = bank
                .iter()
                .map(|w| {
                    let e: f64 = w.iter().zip(&power).map(|(a, p)| a * p).sum();
                    e.max(LOG_FLOOR).ln()
                })
                .collect();
            dct2_tail(&log_mel, CEPSTRAL_ORDER)
        })
        .collect();
    MelCepstra::new(frames, CEPSTRAL_ORDER)
}

/// Mean over aligned frames of `(10/ln 10)·√(2·Σ_k (c_k − c'_k)²)`, in dB.
pub fn mcd(reference: &MelCepstra, synthesized: &MelCepstra) -> Result<f64> {
    if reference.is_empty() || synthesized.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    if reference.order != synthesized.order {
        return Err(Error::DimensionMismatch {
            expected: reference.order,
            got: synthesized.order,
        });
    }
    let n = reference.len().min(synthesized.len());
    let k = 10.0 / LN_10;
    let total: f64 = reference
        .frames
        .iter()
        .zip(&synthesized.frames)
        .map(|(a, b)| {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            k * (2.0 * d2).sqrt()
        })
        .sum();
    Ok(total / n as f64)
}

/// Fraction of aligned frames with a voicing mismatch or, when both are
/// voiced, an F0 more than 20% away from the reference.
pub fn ffe(reference: &PitchTrack, synthesized: &PitchTrack) -> Result<f64> {
    if (reference.hop - synthesized.hop).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "hop mismatch: {} s vs {} s",
            reference.hop, synthesized.hop
        )));
    }
    let n = reference.len().min(synthesized.len());
    if n == 0 {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let errors = reference
        .frames
        .iter()
        .zip(&synthesized.frames)
        .filter(|(r, s)| match (r.f0, s.f0) {
            (Some(fr), Some(fs)) => (fs - fr).abs() > FFE_DEVIATION * fr,
            (None, None) => false,
            _ => true,
        })
        .count();
    Ok(errors as f64 / n as f64)
}

/// Mean squared difference of paired durations.
pub fn duration_mse(reference: &[f64], synthesized: &[f64]) -> Result<f64> {
    if reference.len() != synthesized.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            got: synthesized.len(),
        });
    }
    if reference.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    Ok(reference
        .iter()
        .zip(synthesized)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64)
}

/// The `eval-metrics` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mcd_db: f64,
    pub ffe: f64,
    pub duration_mse: f64,
    pub frames_compared: usize,
}

/// Compares two clips. Without explicit duration lists the clip lengths
/// themselves are the durations compared.
pub fn evaluate_pair(
    reference: &AudioClip,
    synthesized: &AudioClip,
    durations: Option<(&[f64], &[f64])>,
) -> Result<EvalReport> {
    let (cr, cs) = (mel_cepstra(reference)?, mel_cepstra(synthesized)?);
    let (pr, ps) = (estimate_f0(reference)?, estimate_f0(synthesized)?);
    let duration_mse = match durations {
        Some((r, s)) => duration_mse(r, s)?,
        None => duration_mse(&[reference.duration()], &[synthesized.duration()])?,
    };
    Ok(EvalReport {
        mcd_db: mcd(&cr, &cs)?,
        ffe: ffe(&pr, &ps)?,
        duration_mse,
        frames_compared: cr.len().min(cs.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::PitchFrame;
    use proptest::prelude::*;

    fn voiced(f0: f64) -> PitchFrame {
        PitchFrame {
            f0: Some(f0),
            confidence: 0.9,
        }
    }

    fn unvoiced() -> PitchFrame {
        PitchFrame {
            f0: None,
            confidence: 0.1,
        }
    }

    fn track(frames: Vec<PitchFrame>) -> PitchTrack {
        PitchTrack::new(0.01, 0.025, frames).unwrap()
    }

    #[test]
    fn silence_has_zero_cepstra_and_expected_frame_count() {
        let c = mel_cepstra(&AudioClip::silence(1.0, 16_000).unwrap()).unwrap();
        assert_eq!(c.len(), 98);
        assert!(c.frames.iter().flatten().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn mcd_unit_gap() {
        let a = MelCepstra::new(vec![vec![0.0; 13]], 13).unwrap();
        let mut row = vec![0.0; 13];
        row[0] = 1.0;
        let b = MelCepstra::new(vec![row.clone()], 13).unwrap();
        let expect = 10.0 / LN_10 * 2f64.sqrt();
        assert!((mcd(&a, &b).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 6.1418).abs() < 1e-4);
        row[0] = 2.0;
        let c = MelCepstra::new(vec![row], 13).unwrap();
        assert!((mcd(&a, &c).unwrap() - 2.0 * expect).abs() < 1e-12);
        assert_eq!(mcd(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mcd_errors() {
        let a = MelCepstra::new(vec![vec![0.0; 13]], 13).unwrap();
        let empty = MelCepstra::new(vec![], 13).unwrap();
        assert!(mcd(&a, &empty).is_err());
        let other = MelCepstra::new(vec![vec![0.0; 12]], 12).unwrap();
        assert!(mcd(&a, &other).is_err());
        assert!(MelCepstra::new(vec![vec![0.0; 3]], 13).is_err());
    }

    #[test]
    fn ffe_definition() {
        let r = track((0..10).map(|_| voiced(200.0)).collect());
        assert_eq!(ffe(&r, &r).unwrap(), 0.0);
        let mut s = r.clone();
        s.frames[4] = voiced(260.0);
        assert!((ffe(&r, &s).unwrap() - 0.1).abs() < 1e-15);
        s.frames[4] = voiced(239.0);
        assert_eq!(ffe(&r, &s).unwrap(), 0.0);
        let flipped = track((0..10).map(|_| unvoiced()).collect());
        assert_eq!(ffe(&r, &flipped).unwrap(), 1.0);
        let other_hop = PitchTrack::new(0.005, 0.025, r.frames.clone()).unwrap();
        assert!(ffe(&r, &other_hop).is_err());
    }

    #[test]
    fn ffe_threshold_is_relative_to_reference() {
        // 200 → 245 deviates 22.5% of 200 but only 18.4% of 245
        let a = track(vec![voiced(200.0)]);
        let b = track(vec![voiced(245.0)]);
        assert_eq!(ffe(&a, &b).unwrap(), 1.0);
        assert_eq!(ffe(&b, &a).unwrap(), 0.0);
    }

    #[test]
    fn duration_values() {
        assert_eq!(duration_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(duration_mse(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5);
        assert_eq!(duration_mse(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), 2.5);
        assert!(duration_mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn cepstra_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 13), 1..12)
    }

    proptest! {
        #[test]
        fn mcd_symmetric_and_padding_invariant(
            a in cepstra_strategy(), b in cepstra_strategy(),
            pad in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 13), 1..5),
        ) {
            let n = a.len().min(b.len());
            let (a, b) = (a[..n].to_vec(), b[..n].to_vec());
            let ma = MelCepstra::new(a.clone(), 13).unwrap();
            let mb = MelCepstra::new(b.clone(), 13).unwrap();
            let d = mcd(&ma, &mb).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!((d - mcd(&mb, &ma).unwrap()).abs() < 1e-12);
            // identical trailing frames add zero-distance frames; the mean is
            // invariant once those zero terms are weighed out
            let mut ap = a.clone();
            ap.extend(pad.iter().cloned());
            let mut bp = b.clone();
            bp.extend(pad.iter().cloned());
            let padded = mcd(&MelCepstra::new(ap, 13).unwrap(), &MelCepstra::new(bp, 13).unwrap()).unwrap();
            let total = n + pad.len();
            prop_assert!((padded * total as f64 - d * n as f64).abs() < 1e-9);
        }

        #[test]
        fn ffe_monotone_under_corruption(
            f0s in proptest::collection::vec(proptest::option::of(80.0f64..400.0), 1..40),
            order in proptest::collection::vec(0usize..1000, 1..40),
        ) {
            let reference = track(f0s.iter().map(|f| f.map_or(unvoiced(), voiced)).collect());
            let mut corrupted = reference.clone();
            let mut prev = ffe(&reference, &corrupted).unwrap();
            prop_assert_eq!(prev, 0.0);
            for o in order {
                let i = o % corrupted.len();
                corrupted.frames[i] = match reference.frames[i].f0 {
                    Some(_) => unvoiced(),
                    None => voiced(200.0),
                };
                let e = ffe(&reference, &corrupted).unwrap();
                prop_assert!(e >= prev && (0.0..=1.0).contains(&e));
                prev = e;
            }
        }
    }
}
