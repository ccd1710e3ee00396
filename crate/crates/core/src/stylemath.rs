//! Differentiable auxiliary math of the multi-style extractor: the weighted
//! intonation cross-entropy, the gradient reversal layer with its L1 content
//! loss, the residual final-syllable embedding, single-head style-token
//! attention, and the linear intensity embedding. Every operation that takes
//! part in training exposes its analytic backward pass so it can be compared
//! against central finite differences with [`grad_check`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::Intonation;
use crate::error::{Error, Result};

pub const DEFAULT_STYLE_DIM: usize = 16;
pub const DEFAULT_TOKEN_COUNT: usize = 10;
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Largest finite-difference error accepted by [`grad_suite`] checks.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

/// A parameter vector with an optional accumulated gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub values: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Param {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("parameter values".into()));
        }
        Ok(Self { values, grad: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Adds `g` into the stored gradient.
    pub fn accumulate(&mut self, g: &[f64]) -> Result<()> {
        check_len(self.values.len(), g.len())?;
        let grad = self.grad.get_or_insert_with(|| vec![0.0; g.len()]);
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Intonation loss

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn check_binary(probs: [f64; 2], onehot: [f64; 2], sigma: f64) -> Result<()> {
    if !(probs[0] > 0.0 && probs[1] > 0.0) || (probs[0] + probs[1] - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "probabilities {probs:?} must be positive and sum to 1"
        )));
    }
    if onehot != [1.0, 0.0] && onehot != [0.0, 1.0] {
        return Err(Error::InvalidArgument(format!(
            "target {onehot:?} is not one-hot"
        )));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma {sigma} must be >= 0"
        )));
    }
    Ok(())
}

/// `L = −y₁·log p₁ − σ·y₂·log p₂` over (statement, question) probabilities.
pub fn weighted_ce(probs: [f64; 2], onehot: [f64; 2], sigma: f64) -> Result<f64> {
    check_binary(probs, onehot, sigma)?;
    // skip zero-target terms so log p never multiplies a hard zero weight into NaN
    let mut loss = 0.0;
    if onehot[0] != 0.0 {
        loss -= onehot[0] * probs[0].ln();
    }
    if onehot[1] != 0.0 {
        loss -= sigma * onehot[1] * probs[1].ln();
    }
    Ok(loss)
}

/// `∂L/∂p` for [`weighted_ce`].
pub fn weighted_ce_grad(probs: [f64; 2], onehot: [f64; 2], sigma: f64) -> Result<[f64; 2]> {
    check_binary(probs, onehot, sigma)?;
    Ok([-onehot[0] / probs[0], -sigma * onehot[1] / probs[1]])
}

/// One-hot (statement, question) target.
pub fn intonation_onehot(label: Intonation) -> Result<[f64; 2]> {
    match label {
        Intonation::Statement => Ok([1.0, 0.0]),
        Intonation::Question => Ok([0.0, 1.0]),
        Intonation::Unlabeled => Err(Error::InvalidArgument(
            "unlabeled sample has no intonation target".into(),
        )),
    }
}

/// Weighted CE applied to softmax(logits); returns the loss and `∂L/∂logits`.
pub fn weighted_ce_logits(
    logits: [f64; 2],
    label: Intonation,
    sigma: f64,
) -> Result<(f64, [f64; 2])> {
    let y = intonation_onehot(label)?;
    let p = softmax(&logits);
    let probs = [p[0], p[1]];
    // log-softmax keeps extreme logits finite
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    let weight = if y[1] == 1.0 { sigma } else { 1.0 };
    let class = if y[1] == 1.0 { 1 } else { 0 };
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma {sigma} must be >= 0"
        )));
    }
    let loss = -weight * (logits[class] - lse);
    let grad = [weight * (probs[0] - y[0]), weight * (probs[1] - y[1])];
    Ok((loss, grad))
}

/// Class-balance weight `σ = #statements / #questions`.
pub fn balance_sigma(statements: usize, questions: usize) -> Result<f64> {
    if questions == 0 {
        return Err(Error::EmptyClass("question"));
    }
    Ok(statements as f64 / questions as f64)
}

// ---------------------------------------------------------------------------
// Gradient reversal and content loss

/// Identity on the way forward, `−λ·g` on the way back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientReversal {
    pub lambda: f64,
}

impl Default for GradientReversal {
    fn default() -> Self {
        Self { lambda: 1.0 }
    }
}

impl GradientReversal {
    pub fn new(lambda: f64) -> Self {
        Self { lambda }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    pub fn backward(&self, upstream: &[f64]) -> Vec<f64> {
        upstream.iter().map(|g| -self.lambda * g).collect()
    }
}

/// Mean absolute error between predicted and true content representations,
/// with its (sub)gradient `sign(ĉ − c)/n` (0 at ties).
pub fn content_l1(c_hat: &[f64], c: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(c.len(), c_hat.len())?;
    if c.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let n = c.len() as f64;
    let loss = c_hat.iter().zip(c).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let grad = c_hat
        .iter()
        .zip(c)
        .map(|(a, b)| {
            let d = a - b;
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((loss, grad))
}

// ---------------------------------------------------------------------------
// Style embeddings

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StyleRole {
    /// R_s: sentence-level reference embedding.
    SentenceReference,
    /// R_f: final-syllable reference embedding.
    FinalReference,
    /// R_f − R_s.
    FinalResidual,
    /// G_s: emotion style embedding.
    EmotionStyle,
    /// G_f: intonation style embedding.
    IntonationStyle,
    /// h_i: intonation intensity embedding.
    Intensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleEmbedding {
    pub role: StyleRole,
    pub data: Vec<f64>,
}

impl StyleEmbedding {
    pub fn new(role: StyleRole, data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("style embedding".into()));
        }
        Ok(Self { role, data })
    }

    pub fn zeros(role: StyleRole, dim: usize) -> Self {
        Self {
            role,
            data: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }
}

fn expect_role(e: &StyleEmbedding, role: StyleRole) -> Result<()> {
    if e.role != role {
        return Err(Error::InvalidArgument(format!(
            "expected a {role:?} embedding, got {:?}",
            e.role
        )));
    }
    Ok(())
}

/// `R_f − R_s`: the final-syllable embedding with the sentence level removed.
pub fn residual_style(
    final_ref: &StyleEmbedding,
    sentence_ref: &StyleEmbedding,
) -> Result<StyleEmbedding> {
    expect_role(final_ref, StyleRole::FinalReference)?;
    expect_role(sentence_ref, StyleRole::SentenceReference)?;
    check_len(final_ref.dim(), sentence_ref.dim())?;
    Ok(StyleEmbedding {
        role: StyleRole::FinalResidual,
        data: final_ref
            .data
            .iter()
            .zip(&sentence_ref.data)
            .map(|(f, s)| f - s)
            .collect(),
    })
}

/// `K × d` bank of style tokens, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBank {
    rows: usize,
    dim: usize,
    tokens: Vec<f64>,
}

impl TokenBank {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidArgument("token bank is empty".into()));
        };
        let dim = first.len();
        for r in rows {
            check_len(dim, r.len())?;
        }
        let tokens: Vec<f64> = rows.iter().flatten().copied().collect();
        if tokens.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("token bank".into()));
        }
        Ok(Self {
            rows: rows.len(),
            dim,
            tokens,
        })
    }

    /// Tokens drawn from N(0, 0.5²).
    pub fn random(rows: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 0.5).expect("valid normal");
        let rows: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..dim).map(|_| n.sample(&mut rng)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn token(&self, k: usize) -> &[f64] {
        &self.tokens[k * self.dim..(k + 1) * self.dim]
    }

    /// Row-major copy of all tokens.
    pub fn flat(&self) -> &[f64] {
        &self.tokens
    }
}

/// Attention weights and the resulting style embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub weights: Vec<f64>,
    pub output: StyleEmbedding,
}

/// Gradients of a scalar loss with respect to the attention inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrad {
    pub query: Vec<f64>,
    /// Row-major, same layout as [`TokenBank::flat`].
    pub tokens: Vec<f64>,
}

fn attention_output_role(query: StyleRole) -> Result<StyleRole> {
    match query {
        StyleRole::SentenceReference => Ok(StyleRole::EmotionStyle),
        StyleRole::FinalReference | StyleRole::FinalResidual => Ok(StyleRole::IntonationStyle),
        other => Err(Error::InvalidArgument(format!(
            "{other:?} embedding cannot query a token bank"
        ))),
    }
}

/// Single-head scaled dot-product attention over the token bank:
/// `a = softmax(q·Tᵀ/√d)`, output `aᵀT`. A sentence reference yields an
/// emotion embedding; a final-syllable reference or residual yields an
/// intonation embedding.
pub fn style_token_attention(query: &StyleEmbedding, bank: &TokenBank) -> Result<Attention> {
    if bank.is_empty() {
        return Err(Error::InvalidArgument("token bank is empty".into()));
    }
    check_len(bank.dim(), query.dim())?;
    let role = attention_output_role(query.role)?;
    let scale = (bank.dim() as f64).sqrt();
    let logits: Vec<f64> = (0..bank.len())
        .map(|k| dot(&query.data, bank.token(k)) / scale)
        .collect();
    let weights = softmax(&logits);
    let mut out = vec![0.0; bank.dim()];
    for (k, a) in weights.iter().enumerate() {
        for (o, t) in out.iter_mut().zip(bank.token(k)) {
            *o += a * t;
        }
    }
    Ok(Attention {
        weights,
        output: StyleEmbedding { role, data: out },
    })
}

/// Backward pass of [`style_token_attention`] for an upstream gradient on the
/// output embedding.
pub fn style_token_attention_backward(
    query: &StyleEmbedding,
    bank: &TokenBank,
    attention: &Attention,
    upstream: &[f64],
) -> Result<AttentionGrad> {
    check_len(bank.dim(), upstream.len())?;
    check_len(bank.dim(), query.dim())?;
    let scale = (bank.dim() as f64).sqrt();
    let a = &attention.weights;
    let d_weights: Vec<f64> = (0..bank.len())
        .map(|k| dot(upstream, bank.token(k)))
        .collect();
    let mean = dot(a, &d_weights);
    let d_logits: Vec<f64> = a
        .iter()
        .zip(&d_weights)
        .map(|(ak, dk)| ak * (dk - mean))
        .collect();

    let mut g_query = vec![0.0; bank.dim()];
    let mut g_tokens = vec![0.0; bank.len() * bank.dim()];
    for k in 0..bank.len() {
        let row = &mut g_tokens[k * bank.dim()..(k + 1) * bank.dim()];
        for (i, g) in row.iter_mut().enumerate() {
            *g = a[k] * upstream[i] + d_logits[k] * query.data[i] / scale;
        }
        for (gq, t) in g_query.iter_mut().zip(bank.token(k)) {
            *gq += d_logits[k] * t / scale;
        }
    }
    Ok(AttentionGrad {
        query: g_query,
        tokens: g_tokens,
    })
}

/// FC map from a normalized intensity to `h_i = intensity·weights + bias`.
pub fn intensity_embed(intensity: f64, weights: &[f64], bias: &[f64]) -> Result<StyleEmbedding> {
    if !(0.0..=1.0).contains(&intensity) {
        return Err(Error::InvalidArgument(format!(
            "intensity {intensity} is outside [0, 1]"
        )));
    }
    check_len(weights.len(), bias.len())?;
    StyleEmbedding::new(
        StyleRole::Intensity,
        weights
            .iter()
            .zip(bias)
            .map(|(w, b)| intensity * w + b)
            .collect(),
    )
}

/// Gradients of [`intensity_embed`]: `(∂/∂intensity, ∂/∂weights, ∂/∂bias)`.
pub fn intensity_embed_backward(
    intensity: f64,
    weights: &[f64],
    upstream: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_len(weights.len(), upstream.len())?;
    Ok((
        dot(weights, upstream),
        upstream.iter().map(|g| intensity * g).collect(),
        upstream.to_vec(),
    ))
}

/// Seeded FC parameters for [`intensity_embed`], each entry from N(0, 1/d).
pub fn random_intensity_layer(dim: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0 / (dim.max(1) as f64).sqrt()).expect("valid normal");
    let weights = (0..dim).map(|_| n.sample(&mut rng)).collect();
    let bias = (0..dim).map(|_| n.sample(&mut rng)).collect();
    (weights, bias)
}

/// Multi-style embedding `[G_s, G_f, h_i]`.
pub fn concat_multistyle(
    emotion: &StyleEmbedding,
    intonation: &StyleEmbedding,
    intensity: &StyleEmbedding,
) -> Result<Vec<f64>> {
    check_len(emotion.dim(), intonation.dim())?;
    check_len(emotion.dim(), intensity.dim())?;
    let mut out = Vec::with_capacity(3 * emotion.dim());
    out.extend_from_slice(&emotion.data);
    out.extend_from_slice(&intonation.data);
    out.extend_from_slice(&intensity.data);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Finite-difference checking

/// Central-difference gradient of `f` at `x`.
pub fn numerical_grad<F>(f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let hi = f(&probe);
        probe[i] = x[i] - eps;
        let lo = f(&probe);
        probe[i] = x[i];
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::NonFinite(format!(
                "function value near coordinate {i}"
            )));
        }
        out.push((hi - lo) / (2.0 * eps));
    }
    Ok(out)
}

/// Largest `|g_fd − g| / max(1, |g_fd|)` over coordinates, comparing the
/// analytic gradient `analytic` of `f` at `x` with central differences.
pub fn grad_check<F>(f: F, analytic: &[f64], x: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    check_len(x.len(), analytic.len())?;
    if analytic.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("analytic gradient".into()));
    }
    let fd = numerical_grad(f, x, eps)?;
    Ok(fd
        .iter()
        .zip(analytic)
        .map(|(n, a)| (n - a).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max))
}

/// Result of one named check in [`grad_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckResult {
    pub name: String,
    pub points: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckResult {
    fn new(name: &str, points: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            points,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let d = Normal::new(0.0, 1.0).expect("valid normal");
    (0..n).map(|_| d.sample(rng)).collect()
}

/// Finite-difference checks of every backward pass in this module at `points`
/// seeded random inputs, plus an exactness check of the GRL negation.
pub fn grad_suite(
    seed: u64,
    points: usize,
    dim: usize,
    tokens: usize,
) -> Result<Vec<GradCheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = DEFAULT_FD_STEP;
    let mut worst = [0.0f64; 6];
    let mut grl_exact = 0.0f64;

    for _ in 0..points {
        // weighted CE through softmax, w.r.t. the two logits
        let logits = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let sigma = rng.random_range(0.2..4.0);
        let label = if rng.random::<bool>() {
            Intonation::Question
        } else {
            Intonation::Statement
        };
        let (_, g) = weighted_ce_logits(logits, label, sigma)?;
        let f = |z: &[f64]| {
            weighted_ce_logits([z[0], z[1]], label, sigma)
                .map(|r| r.0)
                .unwrap_or(f64::NAN)
        };
        worst[0] = worst[0].max(grad_check(f, &g, &logits, eps)?);

        // L1 content loss, keeping every coordinate well away from its kink
        let c = normal_vec(&mut rng, dim);
        let c_hat: Vec<f64> = c
            .iter()
            .map(|ci| {
                let gap = rng.random_range(0.01..1.0);
                if rng.random::<bool>() {
                    ci + gap
                } else {
                    ci - gap
                }
            })
            .collect();
        let (_, g) = content_l1(&c_hat, &c)?;
        let f = |x: &[f64]| content_l1(x, &c).map(|r| r.0).unwrap_or(f64::NAN);
        worst[1] = worst[1].max(grad_check(f, &g, &c_hat, eps)?);

        // intensity FC under a random linear head, w.r.t. [intensity, weights, bias]
        let intensity = rng.random_range(0.05..0.95);
        let weights = normal_vec(&mut rng, dim);
        let bias = normal_vec(&mut rng, dim);
        let head = normal_vec(&mut rng, dim);
        let (gi, gw, gb) = intensity_embed_backward(intensity, &weights, &head)?;
        let mut x = vec![intensity];
        x.extend(&weights);
        x.extend(&bias);
        let mut g = vec![gi];
        g.extend(gw);
        g.extend(gb);
        let f = |x: &[f64]| {
            let e = intensity_embed(x[0].clamp(0.0, 1.0), &x[1..=dim], &x[dim + 1..]);
            e.map(|e| dot(&e.data, &head)).unwrap_or(f64::NAN)
        };
        worst[2] = worst[2].max(grad_check(f, &g, &x, eps)?);

        // token attention under a random linear head, w.r.t. [query, tokens]
        let query = StyleEmbedding::new(StyleRole::FinalResidual, normal_vec(&mut rng, dim))?;
        let bank = TokenBank::random(tokens, dim, rng.random())?;
        let head = normal_vec(&mut rng, dim);
        let att = style_token_attention(&query, &bank)?;
        let grads = style_token_attention_backward(&query, &bank, &att, &head)?;
        let mut x = query.data.clone();
        x.extend_from_slice(bank.flat());
        let mut g = grads.query;
        g.extend(grads.tokens);
        let f = |x: &[f64]| {
            let q = StyleEmbedding {
                role: StyleRole::FinalResidual,
                data: x[..dim].to_vec(),
            };
            let rows: Vec<Vec<f64>> = x[dim..].chunks(dim).map(<[f64]>::to_vec).collect();
            TokenBank::from_rows(&rows)
                .and_then(|b| style_token_attention(&q, &b))
                .map(|a| dot(&a.output.data, &head))
                .unwrap_or(f64::NAN)
        };
        worst[3] = worst[3].max(grad_check(f, &g, &x, eps)?);

        // GRL composed with a smooth head h(x) = Σ vᵢ·tanh(xᵢ): the gradient
        // reaching the input must be −λ∇h, i.e. the gradient of −λ·h
        let lambda = rng.random_range(0.1..2.0);
        let grl = GradientReversal::new(lambda);
        let v = normal_vec(&mut rng, dim);
        let x = normal_vec(&mut rng, dim);
        let h = |z: &[f64]| -> f64 { z.iter().zip(&v).map(|(zi, vi)| vi * zi.tanh()).sum() };
        let dh: Vec<f64> = grl
            .forward(&x)
            .iter()
            .zip(&v)
            .map(|(zi, vi)| vi * (1.0 - zi.tanh().powi(2)))
            .collect();
        let through = grl.backward(&dh);
        worst[4] = worst[4].max(grad_check(|z| -lambda * h(z), &through, &x, eps)?);

        // the same head trained with the CE-style default λ = 1
        let unit = GradientReversal::default();
        let through = unit.backward(&dh);
        worst[5] = worst[5].max(grad_check(|z| -h(z), &through, &x, eps)?);
        grl_exact = grl_exact.max(
            through
                .iter()
                .zip(&dh)
                .map(|(a, b)| (a + b).abs())
                .fold(0.0, f64::max),
        );
    }

    let tol = GRAD_CHECK_TOLERANCE;
    Ok(vec![
        GradCheckResult::new("weighted_ce_softmax", points, worst[0], tol),
        GradCheckResult::new("content_l1", points, worst[1], tol),
        GradCheckResult::new("intensity_embed", points, worst[2], tol),
        GradCheckResult::new("style_token_attention", points, worst[3], tol),
        GradCheckResult::new("grl_head", points, worst[4], tol),
        GradCheckResult::new("grl_head_unit_lambda", points, worst[5], tol),
        GradCheckResult::new("grl_negation_exact", points, grl_exact, 0.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn weighted_ce_values() {
        let s = weighted_ce([0.5, 0.5], [1.0, 0.0], 2.0).unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-12);
        let q = weighted_ce([0.5, 0.5], [0.0, 1.0], 2.0).unwrap();
        assert!((q - 1.386294).abs() < 1e-6);
        assert!((q - 2.0 * LN2).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-8, 1e-12] {
            let l = weighted_ce([1.0 - eps, eps], [1.0, 0.0], 3.0).unwrap();
            assert!(l < prev && l >= 0.0);
            prev = l;
        }
        assert!(prev < 1e-11);
    }

    #[test]
    fn weighted_ce_rejects_bad_inputs() {
        assert!(weighted_ce([0.6, 0.6], [1.0, 0.0], 1.0).is_err());
        assert!(weighted_ce([0.0, 1.0], [1.0, 0.0], 1.0).is_err());
        assert!(weighted_ce([0.5, 0.5], [0.5, 0.5], 1.0).is_err());
        assert!(weighted_ce([0.5, 0.5], [1.0, 1.0], 1.0).is_err());
        assert!(weighted_ce([0.5, 0.5], [1.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn logits_form_matches_probability_form() {
        let logits = [0.3, -1.2];
        let p = softmax(&logits);
        for (label, y) in [
            (Intonation::Statement, [1.0, 0.0]),
            (Intonation::Question, [0.0, 1.0]),
        ] {
            let (l, _) = weighted_ce_logits(logits, label, 1.7).unwrap();
            let direct = weighted_ce([p[0], p[1]], y, 1.7).unwrap();
            assert!((l - direct).abs() < 1e-12);
        }
        assert!(weighted_ce_logits(logits, Intonation::Unlabeled, 1.0).is_err());
        let (l, g) = weighted_ce_logits([800.0, -800.0], Intonation::Question, 1.0).unwrap();
        assert!(l.is_finite() && g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn sigma_balances_counts() {
        assert_eq!(balance_sigma(300, 100).unwrap(), 3.0);
        assert!(balance_sigma(3, 0).is_err());
    }

    #[test]
    fn grl_forward_backward() {
        let grl = GradientReversal::default();
        assert_eq!(grl.forward(&[0.3, -2.0]), vec![0.3, -2.0]);
        assert_eq!(grl.backward(&[1.0, -2.0]), vec![-1.0, 2.0]);
        assert_eq!(
            GradientReversal::new(0.0).backward(&[1.0, -2.0]),
            vec![-0.0, 0.0]
        );
    }

    #[test]
    fn content_loss_values() {
        let (l, g) = content_l1(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let (l, g) = content_l1(&[2.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_eq!(l, 1.5);
        assert_eq!(g, vec![0.5, 0.5]);
        assert!(content_l1(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn emb(role: StyleRole, v: &[f64]) -> StyleEmbedding {
        StyleEmbedding::new(role, v.to_vec()).unwrap()
    }

    #[test]
    fn residual_values() {
        let rf = emb(StyleRole::FinalReference, &[1.0, 1.0]);
        let rs = emb(StyleRole::SentenceReference, &[0.5, 2.0]);
        let r = residual_style(&rf, &rs).unwrap();
        assert_eq!(r.role, StyleRole::FinalResidual);
        assert_eq!(r.data, vec![0.5, -1.0]);
        let same = emb(StyleRole::SentenceReference, &[1.0, 1.0]);
        assert_eq!(residual_style(&rf, &same).unwrap().data, vec![0.0, 0.0]);
        let zero = StyleEmbedding::zeros(StyleRole::SentenceReference, 2);
        assert_eq!(residual_style(&rf, &zero).unwrap().data, rf.data);
        assert!(residual_style(&rs, &rf).is_err());
        let short = emb(StyleRole::SentenceReference, &[1.0]);
        assert!(residual_style(&rf, &short).is_err());
    }

    #[test]
    fn attention_symmetric_and_single_token() {
        let bank = TokenBank::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let q = emb(StyleRole::SentenceReference, &[0.7, 0.7]);
        let a = style_token_attention(&q, &bank).unwrap();
        assert!((a.weights[0] - 0.5).abs() < 1e-15);
        assert_eq!(a.output.data, vec![0.5, 0.5]);
        assert_eq!(a.output.role, StyleRole::EmotionStyle);

        let single = TokenBank::from_rows(&[vec![0.3, -0.4]]).unwrap();
        let a = style_token_attention(&q, &single).unwrap();
        assert_eq!(a.weights, vec![1.0]);
        assert_eq!(a.output.data, vec![0.3, -0.4]);
        assert!(TokenBank::from_rows(&[]).is_err());
        let wrong = emb(StyleRole::Intensity, &[0.7, 0.7]);
        assert!(style_token_attention(&wrong, &bank).is_err());
    }

    fn orthonormal_bank(k: usize, d: usize) -> TokenBank {
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|r| (0..d).map(|i| if i == r { 1.0 } else { 0.0 }).collect())
            .collect();
        TokenBank::from_rows(&rows).unwrap()
    }

    #[test]
    fn attention_sharpens_on_scaled_token() {
        // query 10·t₁ against orthonormal rows: logit 10/√d on t₁, 0 elsewhere,
        // so the weight on t₁ is e^g / (e^g + K − 1) with g = 10/√d
        for (k, d) in [(2, 4), (10, 16)] {
            let bank = orthonormal_bank(k, d);
            let mut q = vec![0.0; d];
            q[0] = 10.0;
            let a = style_token_attention(&emb(StyleRole::FinalResidual, &q), &bank).unwrap();
            let g = 10.0 / (d as f64).sqrt();
            let expect = g.exp() / (g.exp() + (k - 1) as f64);
            assert!((a.weights[0] - expect).abs() < 1e-12);
        }
        let bank = orthonormal_bank(2, 4);
        let a = style_token_attention(
            &emb(StyleRole::FinalResidual, &[10.0, 0.0, 0.0, 0.0]),
            &bank,
        )
        .unwrap();
        assert!(a.weights[0] > 0.99);
    }

    #[test]
    fn intensity_embedding_values() {
        let w = [1.0, -2.0, 0.5];
        let zero_b = [0.0; 3];
        assert_eq!(
            intensity_embed(0.0, &w, &zero_b).unwrap().data,
            vec![0.0; 3]
        );
        let b = [0.1, 0.2, 0.3];
        let h1 = intensity_embed(1.0, &w, &b).unwrap();
        assert_eq!(h1.data, vec![1.1, -1.8, 0.8]);
        let h0 = intensity_embed(0.0, &w, &b).unwrap();
        let hm = intensity_embed(0.5, &w, &b).unwrap();
        for i in 0..3 {
            assert!((hm.data[i] - 0.5 * (h0.data[i] + h1.data[i])).abs() < 1e-15);
        }
        assert!(intensity_embed(1.5, &w, &b).is_err());
        assert!(intensity_embed(-0.1, &w, &b).is_err());
    }

    #[test]
    fn concat_layout() {
        let d = DEFAULT_STYLE_DIM;
        let gs = emb(StyleRole::EmotionStyle, &vec![1.0; d]);
        let gf = emb(StyleRole::IntonationStyle, &vec![2.0; d]);
        let hi = emb(StyleRole::Intensity, &vec![3.0; d]);
        let m = concat_multistyle(&gs, &gf, &hi).unwrap();
        assert_eq!(m.len(), 48);
        assert_eq!(&m[..d], &gs.data[..]);
        assert_eq!(&m[d..2 * d], &gf.data[..]);
        assert_eq!(&m[2 * d..], &hi.data[..]);
        let z = StyleEmbedding::zeros(StyleRole::EmotionStyle, d);
        assert_eq!(concat_multistyle(&z, &z, &z).unwrap(), vec![0.0; 3 * d]);
        let short = emb(StyleRole::Intensity, &[1.0]);
        assert!(concat_multistyle(&gs, &gf, &short).is_err());
    }

    #[test]
    fn grad_check_on_quadratic() {
        let x = [0.3, -1.2, 2.0];
        let f = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>();
        let g: Vec<f64> = x.iter().map(|t| 2.0 * t).collect();
        assert!(grad_check(f, &g, &x, DEFAULT_FD_STEP).unwrap() <= 1e-7);
        let wrong = vec![0.0; 3];
        assert!(grad_check(f, &wrong, &x, DEFAULT_FD_STEP).unwrap() > 0.5);
        assert!(grad_check(|_| f64::NAN, &g, &x, 1e-5).is_err());
    }

    #[test]
    fn suite_passes() {
        let results = grad_suite(3, 50, DEFAULT_STYLE_DIM, DEFAULT_TOKEN_COUNT).unwrap();
        for r in &results {
            assert!(r.passed, "{r:?}");
        }
        assert_eq!(results.last().unwrap().max_error, 0.0);
    }

    proptest! {
        #[test]
        fn attention_weights_are_a_distribution(
            seed in 0u64..1000, k in 1usize..12, scale in 0.1f64..20.0
        ) {
            let bank = TokenBank::random(k, 6, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let q: Vec<f64> = normal_vec(&mut rng, 6).into_iter().map(|x| x * scale).collect();
            let a = style_token_attention(&emb(StyleRole::SentenceReference, &q), &bank).unwrap();
            prop_assert!(a.weights.iter().all(|w| *w >= 0.0));
            prop_assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            // output is the convex combination of the rows
            for i in 0..6 {
                let lo = (0..k).map(|r| bank.token(r)[i]).fold(f64::INFINITY, f64::min);
                let hi = (0..k).map(|r| bank.token(r)[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(a.output.data[i] >= lo - 1e-12 && a.output.data[i] <= hi + 1e-12);
            }
        }

        #[test]
        fn weighted_ce_monotone_in_sigma(p2 in 0.01f64..0.99, s1 in 0.0f64..5.0, ds in 0.01f64..5.0) {
            let probs = [1.0 - p2, p2];
            let q = [0.0, 1.0];
            let a = weighted_ce(probs, q, s1).unwrap();
            let b = weighted_ce(probs, q, s1 + ds).unwrap();
            prop_assert!(b > a);
            prop_assert!(a >= 0.0);
            let plain = -(p2.ln());
            prop_assert!((weighted_ce(probs, q, 1.0).unwrap() - plain).abs() < 1e-15);
        }

        #[test]
        fn residual_and_concat_are_linear(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            c in proptest::collection::vec(-10.0f64..10.0, 4),
            d in proptest::collection::vec(-10.0f64..10.0, 4),
            k in -5.0f64..5.0,
        ) {
            let rf = |v: &[f64]| emb(StyleRole::FinalReference, v);
            let rs = |v: &[f64]| emb(StyleRole::SentenceReference, v);
            let sum = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + q).collect::<Vec<_>>();
            let lhs = residual_style(&rf(&sum(&a, &c)), &rs(&sum(&b, &d))).unwrap().data;
            let r1 = residual_style(&rf(&a), &rs(&b)).unwrap().data;
            let r2 = residual_style(&rf(&c), &rs(&d)).unwrap().data;
            for (l, r) in lhs.iter().zip(sum(&r1, &r2)) {
                prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()));
            }
            let scaled: Vec<f64> = a.iter().map(|x| k * x).collect();
            let sb: Vec<f64> = b.iter().map(|x| k * x).collect();
            let hom = residual_style(&rf(&scaled), &rs(&sb)).unwrap().data;
            for (h, r) in hom.iter().zip(&r1) {
                prop_assert!((h - k * r).abs() <= 1e-12 * (1.0 + h.abs()));
            }
            let e = |v: &[f64], role| emb(role, v);
            let m1 = concat_multistyle(&e(&a, StyleRole::EmotionStyle), &e(&b, StyleRole::IntonationStyle), &e(&c, StyleRole::Intensity)).unwrap();
            let m2 = concat_multistyle(&e(&d, StyleRole::EmotionStyle), &e(&a, StyleRole::IntonationStyle), &e(&b, StyleRole::Intensity)).unwrap();
            let m12 = concat_multistyle(&e(&sum(&a, &d), StyleRole::EmotionStyle), &e(&sum(&b, &a), StyleRole::IntonationStyle), &e(&sum(&c, &b), StyleRole::Intensity)).unwrap();
            prop_assert_eq!(m12, sum(&m1, &m2));
        }
    }
}
