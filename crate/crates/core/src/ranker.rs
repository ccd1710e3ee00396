//! Relative-attribute ranking of questioning intensity.
//!
//! A linear scorer `f(x) = wᵀx` is learned from two kinds of pairs over
//! standardized prosody vectors: ordered pairs (every question against every
//! statement, which should score at least one unit apart) and similar pairs
//! (two samples of the same class, which should score alike). With squared
//! slacks the constrained problem reduces to the smooth objective
//!
//! ```text
//! J(w) = ½‖w‖² + C·[ Σ_ordered max(0, 1 − wᵀ(x_a − x_b))² + Σ_similar (wᵀ(x_a − x_b))² ]
//! ```
//!
//! which is minimized from `w = 0` by a descent method with a backtracking
//! (Armijo) line search. The default direction is the generalized Newton step
//! of the piecewise-quadratic objective; plain steepest descent is available
//! through [`SolverKind::GradientDescent`].

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Intonation;
use crate::error::{Error, Result};
use crate::features::{ProsodyFeatureVector, Standardizer, FEATURE_DIM, FEATURE_NAMES};
use crate::fsutil;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

/// Search direction used by [`train_ranker`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// `-H⁻¹∇J` with `H = I + 2C(S + Σ_active ΔΔᵀ)`.
    #[default]
    Newton,
    /// `-∇J`, with Barzilai–Borwein trial step lengths.
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerConfig {
    /// Trade-off between the margin and the squared slacks.
    pub c: f64,
    pub max_iters: usize,
    /// Stop once ‖∇J‖ falls to this value.
    pub grad_tol: f64,
    pub max_similar_pairs: usize,
    pub seed: u64,
    pub solver: SolverKind,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            c: 0.1,
            max_iters: 10_000,
            grad_tol: 1e-8,
            max_similar_pairs: 5_000,
            seed: 0,
            solver: SolverKind::Newton,
        }
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "C = {} must be >= 0",
                self.c
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("grad_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Index pairs into the training set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairConstraints {
    /// `(question, statement)`: the first should outrank the second.
    pub ordered: Vec<(usize, usize)>,
    /// Same-class pairs that should score alike.
    pub similar: Vec<(usize, usize)>,
}

impl PairConstraints {
    fn check(&self, n: usize) -> Result<()> {
        if let Some(&(a, b)) = self
            .ordered
            .iter()
            .chain(&self.similar)
            .find(|(a, b)| *a >= n || *b >= n)
        {
            return Err(Error::InvalidArgument(format!(
                "pair ({a}, {b}) indexes past {n} samples"
            )));
        }
        Ok(())
    }
}

/// Questions form the higher-ranked set, statements the lower one.
/// `Unlabeled` samples take part in no pair.
pub fn build_constraints(labels: &[Intonation], config: &RankerConfig) -> Result<PairConstraints> {
    let idx = |want: Intonation| -> Vec<usize> {
        labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == want)
            .map(|(i, _)| i)
            .collect()
    };
    let questions = idx(Intonation::Question);
    let statements = idx(Intonation::Statement);
    if questions.is_empty() {
        return Err(Error::EmptyClass("question"));
    }
    if statements.is_empty() {
        return Err(Error::EmptyClass("statement"));
    }

    let ordered = questions
        .iter()
        .flat_map(|&a| statements.iter().map(move |&b| (a, b)))
        .collect();

    let within = |set: &[usize]| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                out.push((a, b));
            }
        }
        out
    };
    let mut similar = within(&questions);
    similar.extend(within(&statements));
    if similar.len() > config.max_similar_pairs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut picked =
            rand::seq::index::sample(&mut rng, similar.len(), config.max_similar_pairs).into_vec();
        picked.sort_unstable();
        similar = picked.into_iter().map(|i| similar[i]).collect();
    }
    Ok(PairConstraints { ordered, similar })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Direct evaluation of `J(w)` from the samples and pair lists.
pub fn objective(features: &[Vec<f64>], constraints: &PairConstraints, c: f64, w: &[f64]) -> f64 {
    let ordered: f64 = constraints
        .ordered
        .iter()
        .map(|&(a, b)| {
            let m = dot(w, &features[a]) - dot(w, &features[b]);
            (1.0 - m).max(0.0).powi(2)
        })
        .sum();
    let similar: f64 = constraints
        .similar
        .iter()
        .map(|&(a, b)| (dot(w, &features[a]) - dot(w, &features[b])).powi(2))
        .sum();
    0.5 * dot(w, w) + c * (ordered + similar)
}

/// Pair differences precomputed for the solver. The similar-pair term is a
/// quadratic form `C·wᵀSw` with `S = Σ ΔΔᵀ`.
struct Problem {
    dim: usize,
    c: f64,
    ordered: Vec<Vec<f64>>,
    similar_gram: Vec<f64>,
}

impl Problem {
    fn new(features: &[Vec<f64>], constraints: &PairConstraints, c: f64) -> Self {
        let dim = features.first().map_or(0, Vec::len);
        let ordered = constraints
            .ordered
            .iter()
            .map(|&(a, b)| diff(&features[a], &features[b]))
            .collect();
        let mut similar_gram = vec![0.0; dim * dim];
        for &(a, b) in &constraints.similar {
            let d = diff(&features[a], &features[b]);
            for i in 0..dim {
                for j in 0..dim {
                    similar_gram[i * dim + j] += d[i] * d[j];
                }
            }
        }
        Self {
            dim,
            c,
            ordered,
            similar_gram,
        }
    }

    fn gram_times(&self, w: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| dot(&self.similar_gram[i * self.dim..(i + 1) * self.dim], w))
            .collect()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let hinge: f64 = self
            .ordered
            .iter()
            .map(|d| (1.0 - dot(w, d)).max(0.0).powi(2))
            .sum();
        0.5 * dot(w, w) + self.c * (hinge + dot(w, &self.gram_times(w)))
    }

    /// Generalized Hessian at `w`: the identity, the similar-pair Gram matrix,
    /// and the ordered pairs whose slack is active.
    fn hessian(&self, w: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut h: Vec<f64> = self.similar_gram.iter().map(|g| 2.0 * self.c * g).collect();
        for i in 0..n {
            h[i * n + i] += 1.0;
        }
        for d in &self.ordered {
            if 1.0 - dot(w, d) > 0.0 {
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] += 2.0 * self.c * d[i] * d[j];
                    }
                }
            }
        }
        h
    }

    fn value_and_grad(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let sw = self.gram_times(w);
        let mut grad: Vec<f64> = w
            .iter()
            .zip(&sw)
            .map(|(wi, si)| wi + 2.0 * self.c * si)
            .collect();
        let mut hinge = 0.0;
        for d in &self.ordered {
            let slack = 1.0 - dot(w, d);
            if slack > 0.0 {
                hinge += slack * slack;
                for (g, di) in grad.iter_mut().zip(d) {
                    *g -= 2.0 * self.c * slack * di;
                }
            }
        }
        let value = 0.5 * dot(w, w) + self.c * (hinge + dot(w, &sw));
        (value, grad)
    }
}

/// Solves `A x = b` for a symmetric positive-definite row-major `A` by
/// Cholesky factorization; `None` if `A` is not numerically positive definite.
fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerModel {
    pub w: Vec<f64>,
    pub config: RankerConfig,
    pub standardizer: Standardizer,
    pub score_min: f64,
    pub score_max: f64,
}

/// Outcome of [`train_ranker`].
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: RankerModel,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `J` at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Minimizes `J` over already-standardized `features`. The training scores set
/// the model's min-max normalization range.
///
/// Each step starts from a Barzilai–Borwein trial length and halves it until
/// the Armijo condition holds, so `J` never increases.
pub fn train_ranker(
    features: &[Vec<f64>],
    constraints: &PairConstraints,
    config: &RankerConfig,
    standardizer: Standardizer,
) -> Result<TrainReport> {
    config.validate()?;
    if features.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let dim = standardizer.dim();
    if let Some(v) = features.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    constraints.check(features.len())?;
    if features.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }

    let problem = Problem::new(features, constraints, config.c);
    let mut w = vec![0.0; dim];
    let (mut value, mut grad) = problem.value_and_grad(&w);
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut trace = vec![value];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut grad_norm = dot(&grad, &grad).sqrt();

    while grad_norm > config.grad_tol && iterations < config.max_iters {
        iterations += 1;
        let direction: Vec<f64> = match config.solver {
            SolverKind::Newton => {
                let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                let h = problem.hessian(&w);
                if h.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteObjective {
                        iteration: iterations,
                    });
                }
                // H is symmetric positive definite (identity plus PSD terms)
                solve_spd(&h, &neg).unwrap_or(neg)
            }
            SolverKind::GradientDescent => grad.iter().map(|g| -g).collect(),
        };
        if direction.iter().chain(&grad).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteObjective {
                iteration: iterations,
            });
        }
        let slope = dot(&grad, &direction);
        let mut t = match config.solver {
            SolverKind::Newton => 1.0,
            SolverKind::GradientDescent => step,
        };
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = w
                .iter()
                .zip(&direction)
                .map(|(wi, di)| wi + t * di)
                .collect();
            let v = problem.value(&cand);
            if !v.is_finite() {
                return Err(Error::NonFiniteObjective {
                    iteration: iterations,
                });
            }
            if v <= value + ARMIJO * t * slope {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            // no representable decrease left along the search direction
            break;
        };
        let (v, g) = problem.value_and_grad(&next);
        let s = diff(&next, &w);
        let y = diff(&g, &grad);
        let sy = dot(&s, &y);
        step = if sy > 0.0 { dot(&s, &s) / sy } else { t * 2.0 };
        w = next;
        value = v;
        grad = g;
        grad_norm = dot(&grad, &grad).sqrt();
        trace.push(value);
    }

    let scores: Vec<f64> = features.iter().map(|x| dot(&w, x)).collect();
    let score_min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let score_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TrainReport {
        model: RankerModel {
            w,
            config: config.clone(),
            standardizer,
            score_min,
            score_max,
        },
        objective: value,
        grad_norm,
        iterations,
        converged: grad_norm <= config.grad_tol,
        objective_trace: trace,
    })
}

/// Standardizes raw prosody vectors, builds pairs from `labels` and trains.
pub fn fit_ranker(
    raw: &[ProsodyFeatureVector],
    labels: &[Intonation],
    config: &RankerConfig,
) -> Result<(TrainReport, Vec<Vec<f64>>, PairConstraints)> {
    if raw.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: raw.len(),
            got: labels.len(),
        });
    }
    let constraints = build_constraints(labels, config)?;
    let arrays: Vec<[f64; FEATURE_DIM]> = raw.iter().map(|f| f.to_array()).collect();
    let standardizer = Standardizer::fit(&arrays)?;
    let z = standardizer.apply_all(&arrays)?;
    let report = train_ranker(&z, &constraints, config, standardizer)?;
    Ok((report, z, constraints))
}

/// Fraction of ordered pairs whose first element strictly outscores the second.
pub fn pair_order_accuracy(scores: &[f64], constraints: &PairConstraints) -> f64 {
    if constraints.ordered.is_empty() {
        return 1.0;
    }
    let ok = constraints
        .ordered
        .iter()
        .filter(|&&(a, b)| scores[a] > scores[b])
        .count();
    ok as f64 / constraints.ordered.len() as f64
}

impl RankerModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `wᵀx` for an already standardized vector.
    pub fn score_standardized(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(dot(&self.w, z))
    }

    /// Raw ranking score of an unstandardized feature vector.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.score_standardized(&self.standardizer.apply(x)?)
    }

    pub fn score_features(&self, f: &ProsodyFeatureVector) -> Result<f64> {
        self.score(&f.to_array())
    }

    /// Min-max normalizes against the training score range, clamped to
    /// `[0, 1]`; a degenerate range maps everything to 0.5.
    pub fn normalize_intensity(&self, raw: f64) -> f64 {
        let span = self.score_max - self.score_min;
        if !(span > 0.0) {
            return 0.5;
        }
        ((raw - self.score_min) / span).clamp(0.0, 1.0)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            w: self.w.clone(),
            c: self.config.c,
            score_min: self.score_min,
            score_max: self.score_max,
            standardizer: self.standardizer.clone(),
            feature_order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        doc.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fsutil::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub w: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub score_min: f64,
    pub score_max: f64,
    pub standardizer: Standardizer,
    pub feature_order: Vec<String>,
}

impl ModelDocument {
    pub fn into_model(self) -> Result<RankerModel> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        for (name, len) in [
            ("w", self.w.len()),
            ("standardizer.mean", self.standardizer.mean.len()),
            ("standardizer.std", self.standardizer.std.len()),
            ("feature_order", self.feature_order.len()),
        ] {
            if len != FEATURE_DIM {
                return Err(Error::ModelFormat(format!(
                    "{name} has {len} entries, expected {FEATURE_DIM}"
                )));
            }
        }
        if self
            .feature_order
            .iter()
            .zip(FEATURE_NAMES)
            .any(|(a, b)| a != b)
        {
            return Err(Error::ModelFormat("feature_order does not match".into()));
        }
        if self.w.iter().any(|x| !x.is_finite()) {
            return Err(Error::ModelFormat("w is not finite".into()));
        }
        if !(self.score_min <= self.score_max) {
            return Err(Error::ModelFormat("score_min > score_max".into()));
        }
        Ok(RankerModel {
            w: self.w,
            config: RankerConfig {
                c: self.c,
                ..RankerConfig::default()
            },
            standardizer: self.standardizer,
            score_min: self.score_min,
            score_max: self.score_max,
        })
    }
}

/// Axis-aligned search grid: `steps` evenly spaced points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.steps - 1) as f64
    }

    fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }
}

/// Exhaustive grid minimization of `J` for one- or two-dimensional problems,
/// used as an independent check on the solver.
pub fn brute_force_oracle(
    features: &[Vec<f64>],
    constraints: &PairConstraints,
    c: f64,
    grid: Grid,
) -> Result<(Vec<f64>, f64)> {
    let dim = features.first().map_or(0, Vec::len);
    if dim == 0 || dim > 2 {
        return Err(Error::InvalidArgument(format!(
            "grid oracle supports 1 or 2 dimensions, got {dim}"
        )));
    }
    if grid.steps < 100 || !(grid.hi > grid.lo) {
        return Err(Error::InvalidArgument(
            "grid needs hi > lo and at least 100 steps per axis".into(),
        ));
    }
    constraints.check(features.len())?;
    let mut best = (Vec::new(), f64::INFINITY);
    let second_axis = if dim == 2 { grid.steps } else { 1 };
    for i in 0..grid.steps {
        for j in 0..second_axis {
            let w = if dim == 2 {
                vec![grid.point(i), grid.point(j)]
            } else {
                vec![grid.point(i)]
            };
            let v = objective(features, constraints, c, &w);
            if v < best.1 {
                best = (w, v);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(dim: usize) -> Standardizer {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    fn labels(q: usize, s: usize) -> Vec<Intonation> {
        let mut l = vec![Intonation::Question; q];
        l.extend(vec![Intonation::Statement; s]);
        l
    }

    #[test]
    fn constraint_counts() {
        let cfg = RankerConfig::default();
        let c = build_constraints(&labels(2, 3), &cfg).unwrap();
        assert_eq!(c.ordered.len(), 6);
        assert_eq!(c.similar.len(), 4);
        assert!(c.ordered.iter().all(|&(a, b)| a < 2 && b >= 2));
        let c = build_constraints(&labels(1, 1), &cfg).unwrap();
        assert_eq!((c.ordered.len(), c.similar.len()), (1, 0));
    }

    #[test]
    fn similar_pairs_are_capped_deterministically() {
        let cfg = RankerConfig {
            max_similar_pairs: 10,
            seed: 4,
            ..RankerConfig::default()
        };
        // 10 + 10 samples -> 45 + 45 = 90 within-class pairs
        let l = labels(10, 10);
        let a = build_constraints(&l, &cfg).unwrap();
        let b = build_constraints(&l, &cfg).unwrap();
        assert_eq!(a.similar.len(), 10);
        assert_eq!(a, b);
        let mut uniq = a.similar.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 10);
    }

    #[test]
    fn empty_class_is_an_error() {
        let cfg = RankerConfig::default();
        assert!(matches!(
            build_constraints(&labels(0, 3), &cfg),
            Err(Error::EmptyClass("question"))
        ));
        assert!(matches!(
            build_constraints(&labels(3, 0), &cfg),
            Err(Error::EmptyClass("statement"))
        ));
    }

    #[test]
    fn one_dimensional_closed_form() {
        // J(w) = ½w² + (1 − w)², stationary at w = 2/3 with J = 1/3
        let feats = vec![vec![2.0], vec![1.0]];
        let cons = build_constraints(&labels(1, 1), &RankerConfig::default()).unwrap();
        let cfg = RankerConfig {
            c: 1.0,
            ..RankerConfig::default()
        };
        let r = train_ranker(&feats, &cons, &cfg, identity(1)).unwrap();
        assert!(r.converged);
        assert!((r.model.w[0] - 2.0 / 3.0).abs() < 1e-8);
        assert!((r.objective - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn both_solvers_agree() {
        let feats = vec![
            vec![1.0, 0.3],
            vec![0.8, -0.2],
            vec![-0.5, 0.1],
            vec![-1.1, 0.4],
            vec![0.1, 0.9],
        ];
        let l = vec![
            Intonation::Question,
            Intonation::Question,
            Intonation::Statement,
            Intonation::Statement,
            Intonation::Statement,
        ];
        let cons = build_constraints(&l, &RankerConfig::default()).unwrap();
        let newton = train_ranker(&feats, &cons, &RankerConfig::default(), identity(2)).unwrap();
        let gd_cfg = RankerConfig {
            solver: SolverKind::GradientDescent,
            ..RankerConfig::default()
        };
        let gd = train_ranker(&feats, &cons, &gd_cfg, identity(2)).unwrap();
        assert!(newton.converged && gd.converged);
        for (a, b) in newton.model.w.iter().zip(&gd.model.w) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        for r in [&newton, &gd] {
            for w in r.objective_trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
        }
    }

    #[test]
    fn cholesky_solve() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = solve_spd(&a, &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!(solve_spd(&[1.0, 2.0, 2.0, 1.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn regularizer_only_solutions() {
        let feats = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        let cons = PairConstraints {
            ordered: vec![],
            similar: vec![(0, 1), (1, 2)],
        };
        let r = train_ranker(&feats, &cons, &RankerConfig::default(), identity(2)).unwrap();
        assert_eq!(r.model.w, vec![0.0, 0.0]);
        assert_eq!(r.objective, 0.0);

        let feats = vec![vec![3.0, -1.0], vec![0.0, 2.0]];
        let cons = build_constraints(&labels(1, 1), &RankerConfig::default()).unwrap();
        let cfg = RankerConfig {
            c: 0.0,
            ..RankerConfig::default()
        };
        let r = train_ranker(&feats, &cons, &cfg, identity(2)).unwrap();
        assert_eq!(r.model.w, vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_features_are_reported() {
        let feats = vec![vec![f64::INFINITY], vec![1.0]];
        let cons = build_constraints(&labels(1, 1), &RankerConfig::default()).unwrap();
        assert!(matches!(
            train_ranker(&feats, &cons, &RankerConfig::default(), identity(1)),
            Err(Error::NonFiniteObjective { .. })
        ));
        let feats = vec![vec![1e200], vec![-1e200]];
        assert!(matches!(
            train_ranker(&feats, &cons, &RankerConfig::default(), identity(1)),
            Err(Error::NonFiniteObjective { .. })
        ));
    }

    #[test]
    fn scoring_and_normalization() {
        let mut model = RankerModel {
            w: vec![2.0, -1.0, 0.0],
            config: RankerConfig::default(),
            standardizer: identity(3),
            score_min: -1.0,
            score_max: 3.0,
        };
        assert_eq!(model.score(&[3.0, 4.0, 0.0]).unwrap(), 2.0);
        assert_eq!(model.score(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(model.score(&[1.0]).is_err());
        assert_eq!(model.normalize_intensity(0.0), 0.25);
        assert_eq!(model.normalize_intensity(3.0), 1.0);
        assert_eq!(model.normalize_intensity(7.0), 1.0);
        assert_eq!(model.normalize_intensity(-5.0), 0.0);
        model.score_max = model.score_min;
        assert_eq!(model.normalize_intensity(10.0), 0.5);
    }

    #[test]
    fn oracle_matches_closed_form() {
        let feats = vec![vec![2.0], vec![1.0]];
        let cons = build_constraints(&labels(1, 1), &RankerConfig::default()).unwrap();
        let grid = Grid {
            lo: -2.0,
            hi: 2.0,
            steps: 4001,
        };
        let (w, j) = brute_force_oracle(&feats, &cons, 1.0, grid).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-3);
        assert!((j - 1.0 / 3.0).abs() < 1e-6);
        let (w, _) = brute_force_oracle(&feats, &cons, 0.0, grid).unwrap();
        assert!(w[0].abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_high_dimension_and_coarse_grids() {
        let feats = vec![vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]];
        let cons = build_constraints(&labels(1, 1), &RankerConfig::default()).unwrap();
        let grid = Grid {
            lo: -1.0,
            hi: 1.0,
            steps: 101,
        };
        assert!(brute_force_oracle(&feats, &cons, 1.0, grid).is_err());
        let coarse = Grid { steps: 50, ..grid };
        assert!(brute_force_oracle(&[vec![1.0], vec![0.0]], &cons, 1.0, coarse).is_err());
    }

    #[test]
    fn model_document_validation() {
        let model = RankerModel {
            w: vec![0.5; FEATURE_DIM],
            config: RankerConfig::default(),
            standardizer: identity(FEATURE_DIM),
            score_min: -2.0,
            score_max: 2.0,
        };
        let json = model.to_json();
        let back = RankerModel::from_json(&json).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_json(), json);

        let mut doc = model.to_document();
        doc.schema_version = 2;
        assert!(doc.into_model().is_err());
        let mut doc = model.to_document();
        doc.w.pop();
        assert!(doc.into_model().is_err());
        let mut doc = model.to_document();
        doc.feature_order.swap(0, 1);
        assert!(doc.into_model().is_err());
        assert!(RankerModel::from_json("{\"schema_version\":1}").is_err());
    }
}
