//! JSONL manifest of a corpus: one [`ManifestEntry`] per line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Sad,
    Happy,
    Angry,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; 5] = [
        Emotion::Neutral,
        Emotion::Sad,
        Emotion::Happy,
        Emotion::Angry,
        Emotion::Surprise,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intonation {
    Statement,
    Question,
    Unlabeled,
}

impl fmt::Display for Intonation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Intonation::Statement => "statement",
            Intonation::Question => "question",
            Intonation::Unlabeled => "unlabeled",
        })
    }
}

impl FromStr for Intonation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statement" => Ok(Intonation::Statement),
            "question" => Ok(Intonation::Question),
            "unlabeled" => Ok(Intonation::Unlabeled),
            other => Err(Error::InvalidArgument(format!(
                "unknown intonation `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Audio path relative to the manifest's directory.
    pub path: String,
    pub speaker: String,
    pub emotion: Emotion,
    pub intonation: Intonation,
    /// Ground-truth glide size in semitones; only known for synthetic clips.
    pub terminal_shift: Option<f64>,
}

impl ManifestEntry {
    fn check(&self) -> std::result::Result<(), String> {
        if self.path.is_empty() {
            return Err("empty path".into());
        }
        Ok(())
    }
}

/// Serializes entries as JSONL, one object per line with a trailing newline.
pub fn to_jsonl(entries: &[ManifestEntry]) -> Result<String> {
    let mut out = String::new();
    for e in entries {
        e.check()
            .map_err(|m| Error::InvalidArgument(format!("manifest entry: {m}")))?;
        out.push_str(&serde_json::to_string(e).expect("manifest entry serializes"));
        out.push('\n');
    }
    Ok(out)
}

/// Parses JSONL text. Blank lines are skipped.
pub fn parse_jsonl(text: &str) -> Result<Vec<ManifestEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let entry: ManifestEntry = serde_json::from_str(l).map_err(|e| Error::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
            entry.check().map_err(|message| Error::Manifest {
                line: i + 1,
                message,
            })?;
            Ok(entry)
        })
        .collect()
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    fsutil::write_atomic(path, to_jsonl(entries)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn line_format_uses_documented_keys() {
        let e = ManifestEntry {
            path: "clip_0001.wav".into(),
            speaker: "spk03".into(),
            emotion: Emotion::Surprise,
            intonation: Intonation::Question,
            terminal_shift: None,
        };
        let line = to_jsonl(&[e]).unwrap();
        assert_eq!(
            line,
            "{\"path\":\"clip_0001.wav\",\"speaker\":\"spk03\",\"emotion\":\"surprise\",\
             \"intonation\":\"question\",\"terminal_shift\":null}\n"
        );
    }

    #[test]
    fn bad_lines_report_line_numbers() {
        let text = "{\"path\":\"a.wav\",\"speaker\":\"s\",\"emotion\":\"sad\",\"intonation\":\"statement\",\"terminal_shift\":2.0}\n\
                    {\"path\":\"b.wav\",\"speaker\":\"s\",\"emotion\":\"bored\",\"intonation\":\"statement\",\"terminal_shift\":null}\n";
        match parse_jsonl(text) {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let empty_path = "{\"path\":\"\",\"speaker\":\"s\",\"emotion\":\"sad\",\"intonation\":\"statement\",\"terminal_shift\":null}";
        assert!(parse_jsonl(empty_path).is_err());
    }

    fn entry_strategy() -> impl Strategy<Value = ManifestEntry> {
        (
            "[a-z0-9_/]{1,20}\\.wav",
            "[a-z0-9]{1,8}",
            0usize..5,
            prop_oneof![
                Just(Intonation::Statement),
                Just(Intonation::Question),
                Just(Intonation::Unlabeled)
            ],
            proptest::option::of(0.0f64..12.0),
        )
            .prop_map(
                |(path, speaker, emo, intonation, terminal_shift)| ManifestEntry {
                    path,
                    speaker,
                    emotion: Emotion::ALL[emo],
                    intonation,
                    terminal_shift,
                },
            )
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(entries in proptest::collection::vec(entry_strategy(), 0..20)) {
            let text = to_jsonl(&entries).unwrap();
            prop_assert_eq!(parse_jsonl(&text).unwrap(), entries);
        }
    }
}
