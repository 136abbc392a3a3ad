//! Token encoder: static embeddings followed by trainable tanh projection
//! layers, plus the weakly supervised training loop that fits them.

mod embeddings;
pub mod synthetic;
mod triples;

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aligner::{cosine_rows, TokenFilter};
use crate::restater::RestatedUtterance;

pub use embeddings::{EmbeddingTable, UnknownVector};
pub use triples::{make_triples, question_tokens, NegativeKind, TrainingTriple};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("io error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("embedding file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize, context: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot encode an empty utterance")]
    EmptyUtterance,
    #[error("example {index}: {message}")]
    Example { index: usize, message: String },
    #[error("need at least two examples with distinct restatements to draw random negatives")]
    TooFewExamples,
    #[error("non-finite loss {loss} at epoch {epoch}, triple {triple} (s_pos {s_pos}, s_neg {s_neg})")]
    NonFinite { epoch: usize, triple: usize, loss: f64, s_pos: f64, s_neg: f64 },
    #[error("no training triples")]
    NoTriples,
    #[error("model file {path}: {message}")]
    Model { path: String, message: String },
}

/// One `tanh(W·e + b)` layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ProjectionLayer {
    pub fn identity(dim: usize) -> Self {
        Self { weight: Array2::eye(dim), bias: Array1::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    /// Rows of `input` are token vectors.
    fn forward(&self, input: &Array2<f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weight.t());
        z += &self.bias;
        z.mapv_inplace(f64::tanh);
        z
    }
}

/// A stack of projection layers (depth 1 by default).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub layers: Vec<ProjectionLayer>,
}

impl Projection {
    pub fn identity(dim: usize, depth: usize) -> Self {
        Self { layers: (0..depth).map(|_| ProjectionLayer::identity(dim)).collect() }
    }

    /// Identity plus seeded Gaussian-ish noise of the given scale.
    pub fn seeded(dim: usize, depth: usize, noise: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::identity(dim, depth);
        for layer in &mut p.layers {
            layer.weight.mapv_inplace(|w| w + noise * (rng.gen::<f64>() - 0.5) * 2.0);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.layers.first().map_or(0, ProjectionLayer::dim)
    }

    pub fn forward(&self, input: &Array2<f64>) -> Array2<f64> {
        let mut x = input.clone();
        for l in &self.layers {
            x = l.forward(&x);
        }
        x
    }

    /// Input followed by every layer's output.
    fn forward_cached(&self, input: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![input.clone()];
        for l in &self.layers {
            let next = l.forward(acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    fn zeros_like(&self) -> Gradient {
        Gradient {
            weights: self.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            biases: self.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    /// Backpropagates `grad_out` (gradient w.r.t. the final outputs) through
    /// the cached activations, accumulating into `grad`.
    fn backward(&self, acts: &[Array2<f64>], grad_out: Array2<f64>, grad: &mut Gradient) {
        let mut g = grad_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &acts[i + 1];
            let gz = g * &out.mapv(|h| 1.0 - h * h);
            grad.weights[i] += &gz.t().dot(&acts[i]);
            grad.biases[i] += &gz.sum_axis(Axis(0));
            g = gz.dot(&layer.weight);
        }
    }

    fn step(&mut self, grad: &Gradient, lr: f64) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.weight.scaled_add(-lr, &grad.weights[i]);
            l.bias.scaled_add(-lr, &grad.biases[i]);
        }
    }

    /// All parameters flattened, layer by layer, weight rows then bias.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>()).collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) {
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("parameter vector too short");
            }
        }
    }
}

/// Gradient with the same shapes as a [`Projection`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradient {
    pub fn flatten(&self) -> Vec<f64> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>()).collect()
    }
}

/// Token vectors of one utterance, one column per token (`d × n`).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedUtterance {
    pub matrix: Array2<f64>,
}

impl EncodedUtterance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    /// Token vectors as rows (`n × d`).
    pub fn rows(&self) -> Array2<f64> {
        self.matrix.t().to_owned()
    }
}

/// Static embeddings of `tokens` stacked as rows.
pub fn embed_rows<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Array2<f64> {
    let mut m = Array2::zeros((tokens.len(), table.dim()));
    for (i, t) in tokens.iter().enumerate() {
        m.row_mut(i).assign(&table.lookup(t.as_ref()));
    }
    m
}

pub fn encode<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable, proj: &Projection) -> Result<EncodedUtterance, EncoderError> {
    if tokens.is_empty() {
        return Err(EncoderError::EmptyUtterance);
    }
    if proj.dim() != table.dim() {
        return Err(EncoderError::Dimension { expected: table.dim(), found: proj.dim(), context: "projection layer".into() });
    }
    let h = proj.forward(&embed_rows(tokens, table));
    Ok(EncodedUtterance { matrix: h.t().to_owned() })
}

/// Mean over rows of the row maximum.
pub fn sentence_similarity(a: &Array2<f64>) -> f64 {
    row_maxima(a).iter().map(|(_, v)| v).sum::<f64>() / a.nrows() as f64
}

/// `(argmax, max)` per row; the lowest index wins ties.
fn row_maxima(a: &Array2<f64>) -> Vec<(usize, f64)> {
    a.rows()
        .into_iter()
        .map(|r| {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, &v) in r.iter().enumerate() {
                if v > best.1 {
                    best = (j, v);
                }
            }
            best
        })
        .collect()
}

fn l1(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Margin hinge on the two sentence similarities plus an L1 penalty on both
/// similarity matrices.
pub fn loss(a_pos: &Array2<f64>, a_neg: &Array2<f64>, margin: f64, lambda: f64) -> f64 {
    let hinge = (margin - (sentence_similarity(a_pos) - sentence_similarity(a_neg))).max(0.0);
    hinge + lambda * (l1(a_pos) + l1(a_neg))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradients of a cosine matrix `A = cos(H rows, U rows)` given `dL/dA`.
fn cosine_backward(h: &Array2<f64>, u: &Array2<f64>, a: &Array2<f64>, ga: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let norms = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect::<Vec<f64>>();
    let (nh, nu) = (norms(h), norms(u));
    let unit = |m: &Array2<f64>, n: &[f64]| {
        let mut out = m.clone();
        for (mut r, &k) in out.rows_mut().into_iter().zip(n) {
            if k > 0.0 {
                r /= k;
            } else {
                r.fill(0.0);
            }
        }
        out
    };
    let (hu, uu) = (unit(h, &nh), unit(u, &nu));
    let gaa = ga * a;
    let mut gh = ga.dot(&uu);
    for (n, mut r) in gh.rows_mut().into_iter().enumerate() {
        if nh[n] > 0.0 {
            let c: f64 = gaa.row(n).sum();
            r /= nh[n];
            r.scaled_add(-c / (nh[n] * nh[n]), &h.row(n));
        } else {
            r.fill(0.0);
        }
    }
    let mut gu = ga.t().dot(&hu);
    for (m, mut r) in gu.rows_mut().into_iter().enumerate() {
        if nu[m] > 0.0 {
            let c: f64 = gaa.column(m).sum();
            r /= nu[m];
            r.scaled_add(-c / (nu[m] * nu[m]), &u.row(m));
        } else {
            r.fill(0.0);
        }
    }
    (gh, gu)
}

/// Static-embedding rows of the content tokens of one training triple.
#[derive(Debug, Clone)]
pub struct PreparedTriple {
    pub question: Array2<f64>,
    pub positive: Array2<f64>,
    pub negative: Array2<f64>,
}

impl PreparedTriple {
    pub fn new(triple: &TrainingTriple, table: &EmbeddingTable, filter: &TokenFilter) -> Self {
        Self {
            question: question_rows(&triple.question, table, filter),
            positive: restated_rows(&triple.positive, table, filter),
            negative: restated_rows(&triple.negative, table, filter),
        }
    }
}

/// Embeddings of the non-exempt question tokens (all tokens if none remain).
pub fn question_rows(tokens: &[String], table: &EmbeddingTable, filter: &TokenFilter) -> Array2<f64> {
    let keep: Vec<&String> = tokens.iter().filter(|t| !filter.is_exempt_row(t)).collect();
    if keep.is_empty() {
        embed_rows(tokens, table)
    } else {
        embed_rows(&keep, table)
    }
}

/// Embeddings of the matchable restatement tokens (all tokens if none remain).
pub fn restated_rows(r: &RestatedUtterance, table: &EmbeddingTable, filter: &TokenFilter) -> Array2<f64> {
    let keep: Vec<&str> = r.tokens.iter().filter(|t| !filter.is_excluded_column(t)).map(|t| t.surface.as_str()).collect();
    if keep.is_empty() {
        embed_rows(&r.surfaces(), table)
    } else {
        embed_rows(&keep, table)
    }
}

/// `s(x, x')` for prepared rows under a projection.
pub fn pair_similarity(proj: &Projection, question: &Array2<f64>, restated: &Array2<f64>) -> f64 {
    sentence_similarity(&cosine_rows(&proj.forward(question), &proj.forward(restated)))
}

/// Loss of one triple and its gradient w.r.t. every projection parameter.
pub fn loss_and_gradient(proj: &Projection, t: &PreparedTriple, margin: f64, lambda: f64) -> (f64, Gradient) {
    let acts_x = proj.forward_cached(&t.question);
    let acts_p = proj.forward_cached(&t.positive);
    let acts_n = proj.forward_cached(&t.negative);
    let hx = acts_x.last().unwrap();
    let hp = acts_p.last().unwrap();
    let hn = acts_n.last().unwrap();
    let a_pos = cosine_rows(hx, hp);
    let a_neg = cosine_rows(hx, hn);
    let value = loss(&a_pos, &a_neg, margin, lambda);

    let n = hx.nrows() as f64;
    let active = margin - (sentence_similarity(&a_pos) - sentence_similarity(&a_neg)) > 0.0;
    let mut g_pos = a_pos.mapv(|v| lambda * sign(v));
    let mut g_neg = a_neg.mapv(|v| lambda * sign(v));
    if active {
        for (row, (j, _)) in row_maxima(&a_pos).into_iter().enumerate() {
            g_pos[[row, j]] -= 1.0 / n;
        }
        for (row, (j, _)) in row_maxima(&a_neg).into_iter().enumerate() {
            g_neg[[row, j]] += 1.0 / n;
        }
    }
    let (gx1, gp) = cosine_backward(hx, hp, &a_pos, &g_pos);
    let (gx2, gn) = cosine_backward(hx, hn, &a_neg, &g_neg);

    let mut grad = proj.zeros_like();
    proj.backward(&acts_x, gx1 + gx2, &mut grad);
    proj.backward(&acts_p, gp, &mut grad);
    proj.backward(&acts_n, gn, &mut grad);
    (value, grad)
}

fn default_margin() -> f64 {
    1.0
}
fn default_lambda() -> f64 {
    0.5
}
fn default_lr() -> f64 {
    0.01
}
fn default_epochs() -> usize {
    20
}
fn default_negatives() -> usize {
    50
}
fn default_depth() -> usize {
    1
}
fn default_noise() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_negatives")]
    pub random_negatives: usize,
    #[serde(default = "default_negatives")]
    pub perturbed_negatives: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Scale of the uniform noise added to the identity at initialization.
    #[serde(default = "default_noise")]
    pub init_noise: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: default_margin(),
            lambda: default_lambda(),
            learning_rate: default_lr(),
            epochs: default_epochs(),
            random_negatives: default_negatives(),
            perturbed_negatives: default_negatives(),
            seed: 0,
            depth: default_depth(),
            init_noise: default_noise(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.margin.is_nan() || self.margin <= 0.0 {
            return Err(EncoderError::Config("margin must be positive".into()));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(EncoderError::Config("lambda must be nonnegative".into()));
        }
        if self.depth == 0 {
            return Err(EncoderError::Config("depth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub projection: Projection,
    pub threshold: f64,
    /// Mean loss per epoch, in order.
    pub epoch_losses: Vec<f64>,
}

/// Average of `s(x, x'_pos)` and `s(x, x'_neg)` over every triple.
pub fn threshold(proj: &Projection, triples: &[PreparedTriple]) -> f64 {
    let total: f64 = triples
        .iter()
        .map(|t| pair_similarity(proj, &t.question, &t.positive) + pair_similarity(proj, &t.question, &t.negative))
        .sum();
    total / (2 * triples.len()) as f64
}

/// Per-triple SGD starting from a seeded near-identity projection.
pub fn train(
    triples: &[TrainingTriple],
    table: &EmbeddingTable,
    filter: &TokenFilter,
    config: &TrainConfig,
) -> Result<TrainOutcome, EncoderError> {
    let init = Projection::seeded(table.dim(), config.depth, config.init_noise, config.seed);
    let prepared: Vec<PreparedTriple> = triples.iter().map(|t| PreparedTriple::new(t, table, filter)).collect();
    train_prepared(init, &prepared, config)
}

pub fn train_prepared(mut proj: Projection, triples: &[PreparedTriple], config: &TrainConfig) -> Result<TrainOutcome, EncoderError> {
    config.validate()?;
    if triples.is_empty() {
        return Err(EncoderError::NoTriples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (l, grad) = loss_and_gradient(&proj, &triples[i], config.margin, config.lambda);
            if !l.is_finite() {
                let t = &triples[i];
                return Err(EncoderError::NonFinite {
                    epoch,
                    triple: i,
                    loss: l,
                    s_pos: pair_similarity(&proj, &t.question, &t.positive),
                    s_neg: pair_similarity(&proj, &t.question, &t.negative),
                });
            }
            total += l;
            proj.step(&grad, config.learning_rate);
        }
        let mean = total / triples.len() as f64;
        log::debug!("epoch {} mean loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }
    let threshold = threshold(&proj, triples);
    Ok(TrainOutcome { projection: proj, threshold, epoch_losses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerRecord {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// A trained projection plus its similarity threshold, persisted as JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub projection: Projection,
    pub threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    dim: usize,
    layers: Vec<LayerRecord>,
    threshold: f64,
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        let record = ModelRecord {
            dim: self.projection.dim(),
            layers: self
                .projection
                .layers
                .iter()
                .map(|l| LayerRecord {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            threshold: self.threshold,
        };
        serde_json::to_string_pretty(&record).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let record: ModelRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if record.layers.is_empty() {
            return Err("model has no layers".into());
        }
        let d = record.dim;
        let mut layers = Vec::new();
        for (i, l) in record.layers.into_iter().enumerate() {
            if l.bias.len() != d || l.weight.len() != d || l.weight.iter().any(|r| r.len() != d) {
                return Err(format!("layer {i} does not match dimension {d}"));
            }
            let flat: Vec<f64> = l.weight.into_iter().flatten().collect();
            if flat.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(format!("layer {i} has non-finite entries"));
            }
            layers.push(ProjectionLayer {
                weight: Array2::from_shape_vec((d, d), flat).map_err(|e| e.to_string())?,
                bias: Array1::from(l.bias),
            });
        }
        Ok(Self { projection: Projection { layers }, threshold: record.threshold })
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        fs::write(path, self.to_json()).map_err(|e| EncoderError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let text = fs::read_to_string(path).map_err(|e| EncoderError::Io(path.display().to_string(), e))?;
        Self::from_json(&text).map_err(|message| EncoderError::Model { path: path.display().to_string(), message })
    }
}
