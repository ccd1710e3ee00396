use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use intonarank::ranker::RankerConfig;
use intonarank::stylemath::DEFAULT_STYLE_DIM;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

pub const SEED_ENV: &str = "INTONARANK_SEED";

/// Settings shared by all subcommands. Every field may be omitted in the
/// config file; command-line flags take precedence over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub ranker: RankerConfig,
    pub sigma: Sigma,
    pub d_style: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            paths: Paths::default(),
            ranker: RankerConfig::default(),
            sigma: Sigma::Auto,
            d_style: DEFAULT_STYLE_DIM,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub model_file: Option<PathBuf>,
    pub report_file: Option<PathBuf>,
}

/// Weight on the question class in the intonation loss: either a fixed
/// value or `"auto"`, the statement/question count ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Sigma {
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for Sigma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Sigma::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| format!("expected `auto` or a number, got `{s}`"))?;
        if v.is_finite() && v >= 0.0 {
            Ok(Sigma::Fixed(v))
        } else {
            Err(format!("sigma must be a finite value >= 0, got {v}"))
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::Auto => f.write_str("auto"),
            Sigma::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Sigma {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Sigma::Auto => s.serialize_str("auto"),
            Sigma::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Sigma::from_str(&v.to_string()),
            Raw::Str(s) => Sigma::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Flag, then config file, then `INTONARANK_SEED`.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        if let Some(s) = flag.or(self.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("{SEED_ENV}={v} is not a valid seed"))),
            Err(_) => Err(CliError::usage(format!(
                "a seed is required: pass --seed, set `seed` in the config, or set {SEED_ENV}"
            ))),
        }
    }
}

/// `flag` if present, otherwise the config value, otherwise a usage error
/// naming the flag.
pub fn require_path(
    flag: Option<PathBuf>,
    config: &Option<PathBuf>,
    name: &str,
) -> Result<PathBuf, CliError> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| CliError::usage(format!("missing required path --{name}")))
}
