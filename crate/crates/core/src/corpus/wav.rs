//! 16-bit PCM mono RIFF/WAVE I/O.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioClip;
use crate::error::{Error, Result};

const FULL_SCALE: f64 = 32767.0;

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Wav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Reads a 16-bit PCM mono WAV file. Samples are scaled so that 32767 maps
/// to `1.0`; `-32768` is clamped to `-1.0`.
pub fn wav_read(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::WavFormat(format!(
            "{}: expected mono, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::WavFormat(format!(
            "{}: expected 16-bit PCM, found {:?} {}-bit",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| {
            s.map(|v| (v as f64 / FULL_SCALE).max(-1.0))
                .map_err(|e| wav_err(path, e))
        })
        .collect::<Result<Vec<_>>>()?;
    AudioClip::new(samples, spec.sample_rate)
}

/// Encodes a sample in `[-1, 1]` as a PCM16 word.
pub fn quantize(x: f64) -> i16 {
    (x * FULL_SCALE).round().clamp(-FULL_SCALE, FULL_SCALE) as i16
}

/// Writes `clip` as a 16-bit PCM mono WAV file.
pub fn wav_write(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    // re-validate: clips built through `AudioClip::new` always pass
    AudioClip::new(clip.samples().to_vec(), clip.sample_rate())?;
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &x in clip.samples() {
        writer
            .write_sample(quantize(x))
            .map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}
