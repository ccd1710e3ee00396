//! `intonarank` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use intonarank::ranker::SolverKind;

use crate::commands::{DEFAULT_GRAD_POINTS, DEFAULT_TOKENS};
use crate::config::{RunConfig, Sigma};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_EMPTY_CLASS: u8 = 4;
pub const EXIT_NO_CONVERGENCE: u8 = 5;
pub const EXIT_INTENSITY_RANGE: u8 = 6;
pub const EXIT_GRAD_CHECK: u8 = 7;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(EXIT_IO, message)
    }
}

impl From<intonarank::Error> for CliError {
    fn from(e: intonarank::Error) -> Self {
        use intonarank::Error as E;
        let code = match &e {
            E::Io { .. }
            | E::Wav { .. }
            | E::WavFormat(_)
            | E::Manifest { .. }
            | E::ModelFormat(_) => EXIT_IO,
            E::EmptyClass(_) => EXIT_EMPTY_CLASS,
            E::NonFiniteObjective { .. } => EXIT_NO_CONVERGENCE,
            E::InvalidArgument(_) | E::InvalidSpec(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "intonarank",
    version,
    about = "Question-intensity ranking from prosody"
)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic statement/question corpus with a manifest.
    GenCorpus {
        #[arg(long)]
        statements: usize,
        #[arg(long)]
        questions: usize,
        /// Falls back to the config file, then INTONARANK_SEED.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Relabel manifest intonation by clustering prosody features.
    Label {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write per-clip feature vectors as JSON lines.
        #[arg(long, value_name = "FILE")]
        features_out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Train the intensity ranker on a labeled manifest.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Output model file.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long, value_parser = parse_solver)]
        solver: Option<SolverKind>,
        /// Question-class weight: a number or `auto`.
        #[arg(long)]
        sigma: Option<Sigma>,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Score a clip, or validate a manual intensity and embed it.
    Score {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_name = "WAV", conflicts_with = "intensity")]
        input: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        intensity: Option<f64>,
        /// Seed of the intensity embedding layer (default 0).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        d_style: Option<usize>,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Objective metrics between a reference and a synthesized clip.
    EvalMetrics {
        #[arg(long = "ref", value_name = "WAV")]
        reference: PathBuf,
        #[arg(long = "syn", value_name = "WAV")]
        synthesized: PathBuf,
        /// Comma-separated reference phone durations.
        #[arg(long, value_delimiter = ',')]
        ref_durations: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        syn_durations: Option<Vec<f64>>,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Finite-difference check of the style-model gradients.
    GradCheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_GRAD_POINTS)]
        points: usize,
        #[arg(long)]
        d_style: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TOKENS)]
        tokens: usize,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    match s {
        "newton" => Ok(SolverKind::Newton),
        "gradient_descent" | "gd" => Ok(SolverKind::GradientDescent),
        _ => Err(format!("unknown solver `{s}` (newton, gradient_descent)")),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::GenCorpus {
            statements,
            questions,
            seed,
            out,
            report,
        } => commands::gen_corpus(
            commands::GenCorpusArgs {
                statements,
                questions,
                seed,
                out,
                report,
            },
            &cfg,
        ),
        Command::Label {
            manifest,
            seed,
            features_out,
            report,
        } => commands::label(
            commands::LabelArgs {
                manifest,
                seed,
                features_out,
                report,
            },
            &cfg,
        ),
        Command::Train {
            manifest,
            model,
            seed,
            c,
            max_iters,
            solver,
            sigma,
            report,
        } => commands::train(
            commands::TrainArgs {
                manifest,
                model,
                seed,
                c,
                max_iters,
                solver,
                sigma,
                report,
            },
            &cfg,
        ),
        Command::Score {
            model,
            input,
            intensity,
            seed,
            d_style,
            report,
        } => commands::score(
            commands::ScoreArgs {
                model,
                input,
                intensity,
                seed,
                d_style,
                report,
            },
            &cfg,
        ),
        Command::EvalMetrics {
            reference,
            synthesized,
            ref_durations,
            syn_durations,
            report,
        } => commands::eval_metrics(
            commands::EvalArgs {
                reference,
                synthesized,
                ref_durations,
                syn_durations,
                report,
            },
            &cfg,
        ),
        Command::GradCheck {
            seed,
            points,
            d_style,
            tokens,
            report,
        } => commands::grad_check(
            commands::GradCheckArgs {
                seed,
                points,
                d_style,
                tokens,
                report,
            },
            &cfg,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = subcommand_name(&cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if e.code == EXIT_USAGE {
                let mut cmd = Cli::command().bin_name("intonarank");
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            ExitCode::from(e.code)
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::GenCorpus { .. } => "gen-corpus",
        Command::Label { .. } => "label",
        Command::Train { .. } => "train",
        Command::Score { .. } => "score",
        Command::EvalMetrics { .. } => "eval-metrics",
        Command::GradCheck { .. } => "grad-check",
    }
}
