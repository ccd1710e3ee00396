use std::path::{Path, PathBuf};

use intonarank::corpus::{
    generate_corpus, kmeans_label, read_manifest, wav_read, write_manifest, AudioClip, Intonation,
    ManifestEntry, MANIFEST_FILE,
};
use intonarank::features::{extract_many, final_window, FeatureRecord};
use intonarank::fsutil::write_atomic;
use intonarank::metrics::evaluate_pair;
use intonarank::ranker::{fit_ranker, pair_order_accuracy, RankerModel, SolverKind};
use intonarank::stylemath::{
    balance_sigma, grad_suite, intensity_embed, random_intensity_layer, DEFAULT_TOKEN_COUNT,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{require_path, RunConfig, Sigma};
use crate::CliError;

/// Prints `report` as one JSON line and mirrors it to `report_file` if set.
fn emit(report: &impl Serialize, report_file: Option<&Path>) -> Result<(), CliError> {
    let line = serde_json::to_string(report).expect("reports serialize");
    println!("{line}");
    if let Some(path) = report_file {
        write_atomic(path, format!("{line}\n").as_bytes())?;
    }
    Ok(())
}

fn report_path(flag: Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.or_else(|| cfg.paths.report_file.clone())
}

/// Manifest paths are relative to the manifest's directory.
fn resolve_clip(manifest: &Path, entry: &ManifestEntry) -> PathBuf {
    let p = Path::new(&entry.path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn load_clips(manifest: &Path, entries: &[ManifestEntry]) -> Result<Vec<AudioClip>, CliError> {
    entries
        .iter()
        .map(|e| wav_read(resolve_clip(manifest, e)).map_err(CliError::from))
        .collect()
}

pub struct GenCorpusArgs {
    pub statements: usize,
    pub questions: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

pub fn gen_corpus(args: GenCorpusArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.resolve_seed(args.seed)?;
    let out = require_path(args.out, &cfg.paths.corpus_dir, "out")?;
    if args.statements == 0 || args.questions == 0 {
        return Err(CliError::usage(
            "--statements and --questions must both be at least 1",
        ));
    }
    let entries = generate_corpus(args.statements, args.questions, seed, &out)?;
    emit(
        &json!({
            "command": "gen-corpus",
            "manifest": out.join(MANIFEST_FILE),
            "clips": entries.len(),
            "statements": args.statements,
            "questions": args.questions,
            "seed": seed,
        }),
        report_path(args.report, cfg).as_deref(),
    )
}

pub struct LabelArgs {
    pub manifest: Option<PathBuf>,
    pub seed: Option<u64>,
    pub features_out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

pub fn label(args: LabelArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.resolve_seed(args.seed)?;
    let manifest = require_path(args.manifest, &cfg.paths.manifest, "manifest")?;
    let mut entries = read_manifest(&manifest)?;
    let clips = load_clips(&manifest, &entries)?;
    let features = extract_many(&clips)?;
    let predicted = kmeans_label(&features, seed)?;

    // agreement with whatever labels the manifest carried before
    let mut compared = 0usize;
    let mut matched = 0usize;
    for (e, p) in entries.iter().zip(&predicted) {
        if e.intonation != Intonation::Unlabeled {
            compared += 1;
            matched += usize::from(e.intonation == *p);
        }
    }

    if let Some(path) = &args.features_out {
        let mut text = String::new();
        for ((e, f), clip) in entries.iter().zip(&features).zip(&clips) {
            let rec = FeatureRecord::new(e.path.clone(), f, final_window(clip));
            text.push_str(&serde_json::to_string(&rec).expect("records serialize"));
            text.push('\n');
        }
        write_atomic(path, text.as_bytes())?;
    }

    for (e, p) in entries.iter_mut().zip(&predicted) {
        e.intonation = *p;
    }
    write_manifest(&manifest, &entries)?;

    let questions = predicted
        .iter()
        .filter(|l| **l == Intonation::Question)
        .count();
    emit(
        &json!({
            "command": "label",
            "manifest": manifest,
            "entries": entries.len(),
            "statements": entries.len() - questions,
            "questions": questions,
            "compared": compared,
            "agreement": (compared > 0).then(|| matched as f64 / compared as f64),
        }),
        report_path(args.report, cfg).as_deref(),
    )
}

pub struct TrainArgs {
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub seed: Option<u64>,
    pub c: Option<f64>,
    pub max_iters: Option<usize>,
    pub solver: Option<SolverKind>,
    pub sigma: Option<Sigma>,
    pub report: Option<PathBuf>,
}

pub fn train(args: TrainArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.resolve_seed(args.seed)?;
    let manifest = require_path(args.manifest, &cfg.paths.manifest, "manifest")?;
    let model_path = require_path(args.model, &cfg.paths.model_file, "model")?;
    let mut rc = cfg.ranker.clone();
    rc.seed = seed;
    if let Some(c) = args.c {
        rc.c = c;
    }
    if let Some(n) = args.max_iters {
        rc.max_iters = n;
    }
    if let Some(s) = args.solver {
        rc.solver = s;
    }
    rc.validate().map_err(|e| CliError::usage(e.to_string()))?;

    // unlabeled entries take no part in ranking
    let labeled: Vec<ManifestEntry> = read_manifest(&manifest)?
        .into_iter()
        .filter(|e| e.intonation != Intonation::Unlabeled)
        .collect();
    let labels: Vec<Intonation> = labeled.iter().map(|e| e.intonation).collect();
    let questions = labels
        .iter()
        .filter(|l| **l == Intonation::Question)
        .count();
    let statements = labels.len() - questions;
    if statements == 0 {
        return Err(intonarank::Error::EmptyClass("statement").into());
    }
    if questions == 0 {
        return Err(intonarank::Error::EmptyClass("question").into());
    }
    let sigma = match args.sigma.unwrap_or(cfg.sigma) {
        Sigma::Auto => balance_sigma(statements, questions)?,
        Sigma::Fixed(v) => v,
    };

    let clips = load_clips(&manifest, &labeled)?;
    let features = extract_many(&clips)?;
    let (report, z, constraints) = fit_ranker(&features, &labels, &rc)?;
    let scores = z
        .iter()
        .map(|x| report.model.score_standardized(x))
        .collect::<Result<Vec<f64>, _>>()?;
    let summary = json!({
        "command": "train",
        "model": model_path,
        "objective": report.objective,
        "pair_accuracy": pair_order_accuracy(&scores, &constraints),
        "pairs": constraints.ordered.len(),
        "similar_pairs": constraints.similar.len(),
        "iterations": report.iterations,
        "grad_norm": report.grad_norm,
        "converged": report.converged,
        "statements": statements,
        "questions": questions,
        "sigma": sigma,
        "score_min": report.model.score_min,
        "score_max": report.model.score_max,
    });
    if !report.converged {
        eprintln!(
            "{}",
            serde_json::to_string(&summary).expect("reports serialize")
        );
        return Err(CliError::new(
            crate::EXIT_NO_CONVERGENCE,
            format!(
                "solver did not converge within {} iterations (gradient norm {:.3e})",
                rc.max_iters, report.grad_norm
            ),
        ));
    }
    report.model.save(&model_path)?;
    emit(&summary, report_path(args.report, cfg).as_deref())
}

pub struct ScoreArgs {
    pub model: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub intensity: Option<f64>,
    pub seed: Option<u64>,
    pub d_style: Option<usize>,
    pub report: Option<PathBuf>,
}

pub fn score(args: ScoreArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let model_path = require_path(args.model, &cfg.paths.model_file, "model")?;
    let report = report_path(args.report, cfg);
    match (args.input, args.intensity) {
        (Some(input), None) => {
            let model = RankerModel::load(&model_path)?;
            let clip = wav_read(&input)?;
            let features = extract_many(std::slice::from_ref(&clip))?;
            let raw = model.score_features(&features[0])?;
            emit(
                &json!({
                    "path": input,
                    "raw_score": raw,
                    "intensity": model.normalize_intensity(raw),
                }),
                report.as_deref(),
            )
        }
        (None, Some(value)) => {
            if !(0.0..=1.0).contains(&value) {
                return Err(CliError::new(
                    crate::EXIT_INTENSITY_RANGE,
                    format!("manual intensity {value} is outside [0, 1]"),
                ));
            }
            // validates the model even though the manual path does not score
            RankerModel::load(&model_path)?;
            let dim = args.d_style.unwrap_or(cfg.d_style);
            if dim == 0 {
                return Err(CliError::usage("--d-style must be at least 1"));
            }
            let (w, b) = random_intensity_layer(dim, args.seed.unwrap_or(0));
            let h = intensity_embed(value, &w, &b)?;
            emit(
                &json!({ "intensity": value, "h_i": h.data }),
                report.as_deref(),
            )
        }
        _ => Err(CliError::usage(
            "exactly one of --input or --intensity is required",
        )),
    }
}

pub struct EvalArgs {
    pub reference: PathBuf,
    pub synthesized: PathBuf,
    pub ref_durations: Option<Vec<f64>>,
    pub syn_durations: Option<Vec<f64>>,
    pub report: Option<PathBuf>,
}

pub fn eval_metrics(args: EvalArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let durations = match (&args.ref_durations, &args.syn_durations) {
        (Some(r), Some(s)) => Some((r.as_slice(), s.as_slice())),
        (None, None) => None,
        _ => {
            return Err(CliError::usage(
                "--ref-durations and --syn-durations must be given together",
            ))
        }
    };
    let r = wav_read(&args.reference)?;
    let s = wav_read(&args.synthesized)?;
    let report = evaluate_pair(&r, &s, durations)?;
    emit(&report, report_path(args.report, cfg).as_deref())
}

pub struct GradCheckArgs {
    pub seed: Option<u64>,
    pub points: usize,
    pub d_style: Option<usize>,
    pub tokens: usize,
    pub report: Option<PathBuf>,
}

pub fn grad_check(args: GradCheckArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.resolve_seed(args.seed)?;
    if args.points == 0 || args.tokens == 0 {
        return Err(CliError::usage("--points and --tokens must be at least 1"));
    }
    let dim = args.d_style.unwrap_or(cfg.d_style);
    let results = grad_suite(seed, args.points, dim, args.tokens)?;
    for r in &results {
        println!("{}", serde_json::to_string(r).expect("reports serialize"));
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    emit(
        &json!({
            "command": "grad-check",
            "seed": seed,
            "points": args.points,
            "checks": results.len(),
            "failed": failed,
            "max_error": results
                .iter()
                .filter(|r| r.tolerance > 0.0)
                .map(|r| r.max_error)
                .fold(0.0, f64::max),
        }),
        report_path(args.report, cfg).as_deref(),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(
            crate::EXIT_GRAD_CHECK,
            format!("gradient check failed: {}", failed.join(", ")),
        ))
    }
}

pub const DEFAULT_GRAD_POINTS: usize = 50;
pub const DEFAULT_TOKENS: usize = DEFAULT_TOKEN_COUNT;
