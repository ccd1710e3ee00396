//! Synthetic labeled corpus: audio clips, WAV I/O, manifests and k-means
//! statement/question labeling.

mod clip;
mod kmeans;
mod manifest;
mod synth;
mod wav;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use clip::{AudioClip, MIN_SAMPLE_RATE};
pub use kmeans::{kmeans, kmeans_label, KMeansFit, KMEANS_MAX_ITERS};
pub use manifest::{
    parse_jsonl, read_manifest, to_jsonl, write_manifest, Emotion, Intonation, ManifestEntry,
};
pub use synth::{generate_clip, Contour, SynthSpec, DEFAULT_SAMPLE_RATE};
pub use wav::{quantize, wav_read, wav_write};

use crate::error::{Error, Result};
use crate::fsutil;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Sampling ranges used by [`generate_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRanges {
    pub base_f0: (f64, f64),
    pub duration: (f64, f64),
    pub terminal_shift: (f64, f64),
    pub snr_db: f64,
    pub speakers: usize,
}

impl Default for CorpusRanges {
    fn default() -> Self {
        Self {
            base_f0: (170.0, 250.0),
            duration: (1.0, 2.5),
            terminal_shift: (2.0, 8.0),
            snr_db: 30.0,
            speakers: 10,
        }
    }
}

/// Draws the synthesis spec and manifest metadata for every clip, without
/// rendering audio. Statements fall and questions rise; the order of the two
/// classes is shuffled.
pub fn plan_corpus(
    n_statement: usize,
    n_question: usize,
    seed: u64,
    ranges: &CorpusRanges,
) -> Result<Vec<(SynthSpec, ManifestEntry)>> {
    if n_statement == 0 || n_question == 0 {
        return Err(Error::InvalidArgument(
            "corpus needs at least one statement and one question".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds: Vec<Intonation> = std::iter::repeat_n(Intonation::Statement, n_statement)
        .chain(std::iter::repeat_n(Intonation::Question, n_question))
        .collect();
    kinds.shuffle(&mut rng);

    let mut plan = Vec::with_capacity(kinds.len());
    for (i, intonation) in kinds.into_iter().enumerate() {
        let contour = match intonation {
            Intonation::Question => Contour::Rise,
            _ => Contour::Fall,
        };
        let spec = SynthSpec {
            duration: rng.random_range(ranges.duration.0..=ranges.duration.1),
            base_f0: rng.random_range(ranges.base_f0.0..=ranges.base_f0.1),
            contour,
            terminal_shift: rng.random_range(ranges.terminal_shift.0..=ranges.terminal_shift.1),
            snr_db: ranges.snr_db,
            seed: rng.random(),
            sample_rate: DEFAULT_SAMPLE_RATE,
        };
        let entry = ManifestEntry {
            path: format!("clip_{i:05}.wav"),
            speaker: format!("spk{:02}", rng.random_range(0..ranges.speakers.max(1))),
            emotion: Emotion::ALL[rng.random_range(0..Emotion::ALL.len())],
            intonation,
            terminal_shift: Some(spec.terminal_shift),
        };
        plan.push((spec, entry));
    }
    Ok(plan)
}

/// Renders a corpus of `n_statement` falling and `n_question` rising clips
/// into `out_dir`, writes `manifest.jsonl` there and returns its entries.
/// Output is byte-identical for a fixed seed.
pub fn generate_corpus(
    n_statement: usize,
    n_question: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<ManifestEntry>> {
    let out_dir = out_dir.as_ref();
    let plan = plan_corpus(n_statement, n_question, seed, &CorpusRanges::default())?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    plan.par_iter().try_for_each(|(spec, entry)| {
        let clip = generate_clip(spec)?;
        let dest = out_dir.join(&entry.path);
        let tmp = fsutil::temp_path(&dest);
        wav_write(&clip, &tmp)?;
        fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))
    })?;

    let entries: Vec<ManifestEntry> = plan.into_iter().map(|(_, e)| e).collect();
    write_manifest(out_dir.join(MANIFEST_FILE), &entries)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn corpus_counts_ranges_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let entries = generate_corpus(6, 4, 9, &a).unwrap();
        assert_eq!(entries.len(), 10);
        let q = entries
            .iter()
            .filter(|e| e.intonation == Intonation::Question)
            .count();
        assert_eq!(q, 4);
        for e in &entries {
            let shift = e.terminal_shift.unwrap();
            assert!((2.0..=8.0).contains(&shift));
            assert!(a.join(&e.path).exists());
        }
        generate_corpus(6, 4, 9, &b).unwrap();
        let ma = std::fs::read(a.join(MANIFEST_FILE)).unwrap();
        let mb = std::fs::read(b.join(MANIFEST_FILE)).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(read_manifest(a.join(MANIFEST_FILE)).unwrap(), entries);
        for e in &entries {
            assert_eq!(
                std::fs::read(a.join(&e.path)).unwrap(),
                std::fs::read(b.join(&e.path)).unwrap()
            );
        }
    }

    #[test]
    fn empty_class_counts_are_rejected() {
        assert!(plan_corpus(0, 3, 1, &CorpusRanges::default()).is_err());
        assert!(plan_corpus(3, 0, 1, &CorpusRanges::default()).is_err());
    }

    #[test]
    fn unwritable_directory() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, b"x").unwrap();
        assert!(matches!(
            generate_corpus(1, 1, 0, file.join("sub")),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn generated_clips_are_valid(
            duration in 0.3f64..3.0,
            base in 80.0f64..400.0,
            shift in 0.0f64..12.0,
            snr in 0.0f64..60.0,
            rise in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let contour = if rise { Contour::Rise } else { Contour::Fall };
            let spec = SynthSpec::new(duration, base, contour, shift).with_snr(snr).with_seed(seed);
            let clip = generate_clip(&spec).unwrap();
            prop_assert_eq!(clip.len(), (duration * 16_000.0).round() as usize);
            prop_assert!(clip.samples().iter().all(|x| x.is_finite() && x.abs() <= 1.0));
            // revalidation through the public constructor
            prop_assert!(AudioClip::new(clip.samples().to_vec(), clip.sample_rate()).is_ok());
        }
    }
}
