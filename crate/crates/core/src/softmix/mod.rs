//! Soft embeddings and a small hand-differentiated consumer.
//!
//! A soft word's embedding is the expectation of embedding rows under its
//! distribution, `e_w = sum_j p_j(w) E_j`. The [`ToyModel`] mean-pools
//! position embeddings and applies an affine layer and a softmax, which is
//! enough to show that gradients flow into every row a soft word touches.

mod grad;
mod train;

pub use grad::{grad_check, random_instance, GradCheckReport, FD_STEP, PASS_THRESHOLD};
pub use train::{evaluate, train_toy, write_loss_trace, TrainConfig};

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::augment::{Position, SoftSentence};
use crate::corpus::TokenId;
use crate::error::{Error, Result};

/// Row-major `|V| x d` embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::invalid("embedding dimensions must be positive"));
        }
        if data.len() != rows * dim {
            return Err(Error::invalid(format!(
                "expected {} embedding values, got {}",
                rows * dim,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("embedding contains non-finite values"));
        }
        Ok(EmbeddingMatrix { rows, dim, data })
    }

    /// Entries uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(rows: usize, dim: usize, scale: f64, rng: &mut R) -> Result<Self> {
        let data = (0..rows * dim)
            .map(|_| rng.gen_range(-scale..=scale))
            .collect();
        Self::new(rows, dim, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, id: TokenId) -> Result<&[f64]> {
        let j = id.index();
        if j >= self.rows {
            return Err(Error::IdOutOfRange {
                id: j,
                size: self.rows,
            });
        }
        Ok(&self.data[j * self.dim..(j + 1) * self.dim])
    }

    fn row_mut(&mut self, id: TokenId) -> &mut [f64] {
        let j = id.index();
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// First line `|V| d`, then one row per line with 17 significant digits.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.rows, self.dim)?;
        for row in self.data.chunks(self.dim) {
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R, name: &str) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(name, e))?
            .ok_or_else(|| Error::parse(name, 1, "missing header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(name, 1, "expected \"|V| d\""))?;
        let [rows, dim] = dims[..] else {
            return Err(Error::parse(name, 1, "expected \"|V| d\""));
        };
        let mut data = Vec::with_capacity(rows * dim);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(name, e))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(name, i + 2, "bad number"))?;
            if row.len() != dim {
                return Err(Error::parse(name, i + 2, format!("expected {dim} values")));
            }
            data.extend(row);
        }
        Self::new(rows, dim, data).map_err(|e| Error::parse(name, 0, e.to_string()))
    }
}

/// Embedding of one position: the row itself for a hard token, the
/// probability-weighted sum of rows for a soft word.
pub fn mix_embedding(pos: &Position, e: &EmbeddingMatrix) -> Result<Vec<f64>> {
    match pos {
        Position::Hard(id) => Ok(e.row(*id)?.to_vec()),
        Position::Soft(w) => {
            let mut entries = w.dist.entries();
            let Some((j, p)) = entries.next() else {
                return Err(Error::invalid("soft word with empty support"));
            };
            let mut acc: Vec<f64> = e.row(j)?.iter().map(|x| p * x).collect();
            for (j, p) in entries {
                for (a, x) in acc.iter_mut().zip(e.row(j)?) {
                    *a += p * x;
                }
            }
            Ok(acc)
        }
    }
}

/// Mean-pool classifier: `softmax(W * mean_t(e_t) + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub embedding: EmbeddingMatrix,
    /// `classes x dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of the loss; only touched embedding rows are stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    pub embedding: BTreeMap<TokenId, Vec<f64>>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    fn zeros(model: &ToyModel) -> Self {
        Gradients {
            embedding: BTreeMap::new(),
            weights: vec![0.0; model.weights.len()],
            bias: vec![0.0; model.bias.len()],
        }
    }

    fn scale(&mut self, s: f64) {
        for g in self
            .embedding
            .values_mut()
            .flat_map(|r| r.iter_mut())
            .chain(self.weights.iter_mut())
            .chain(self.bias.iter_mut())
        {
            *g *= s;
        }
    }
}

impl ToyModel {
    /// Embedding uniform in `[-0.1, 0.1]`, zero classifier.
    pub fn init<R: Rng + ?Sized>(vocab: usize, dim: usize, classes: usize, rng: &mut R) -> Result<Self> {
        let embedding = EmbeddingMatrix::random(vocab, dim, 0.1, rng)?;
        Self::with_embedding(embedding, classes)
    }

    pub fn with_embedding(embedding: EmbeddingMatrix, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::invalid("need at least one class"));
        }
        let dim = embedding.dim();
        Ok(ToyModel {
            embedding,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        })
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.embedding.dim()
    }

    fn pooled(&self, s: &SoftSentence) -> Result<Vec<f64>> {
        if s.is_empty() {
            return Err(Error::invalid("empty sentence"));
        }
        let mut h = vec![0.0; self.dim()];
        for pos in s.positions() {
            for (a, x) in h.iter_mut().zip(mix_embedding(pos, &self.embedding)?) {
                *a += x;
            }
        }
        let t = s.len() as f64;
        for a in &mut h {
            *a /= t;
        }
        Ok(h)
    }

    fn probs_from_pooled(&self, h: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let logits: Vec<f64> = self
            .bias
            .iter()
            .enumerate()
            .map(|(c, b)| {
                b + self.weights[c * d..(c + 1) * d]
                    .iter()
                    .zip(h)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
            })
            .collect();
        softmax(&logits)
    }

    /// Class probabilities.
    pub fn forward(&self, s: &SoftSentence) -> Result<Vec<f64>> {
        Ok(self.probs_from_pooled(&self.pooled(s)?))
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.classes() {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                self.classes()
            )));
        }
        Ok(())
    }

    /// Cross-entropy `-ln p[label]`.
    pub fn loss(&self, s: &SoftSentence, label: usize) -> Result<f64> {
        self.check_label(label)?;
        Ok(-self.forward(s)?[label].ln())
    }

    /// Loss and analytic gradients for one example.
    pub fn backward(&self, s: &SoftSentence, label: usize) -> Result<(f64, Gradients)> {
        let mut g = Gradients::zeros(self);
        let loss = self.accumulate(s, label, &mut g)?;
        Ok((loss, g))
    }

    fn accumulate(&self, s: &SoftSentence, label: usize, g: &mut Gradients) -> Result<f64> {
        self.check_label(label)?;
        let d = self.dim();
        let h = self.pooled(s)?;
        let mut dz = self.probs_from_pooled(&h);
        let loss = -dz[label].ln();
        dz[label] -= 1.0;

        let mut dh = vec![0.0; d];
        for (c, &dzc) in dz.iter().enumerate() {
            g.bias[c] += dzc;
            let w = &self.weights[c * d..(c + 1) * d];
            let gw = &mut g.weights[c * d..(c + 1) * d];
            for i in 0..d {
                gw[i] += dzc * h[i];
                dh[i] += w[i] * dzc;
            }
        }
        let t = s.len() as f64;
        let de: Vec<f64> = dh.iter().map(|x| x / t).collect();
        for pos in s.positions() {
            match pos {
                Position::Hard(id) => add_row(&mut g.embedding, *id, 1.0, &de, d),
                Position::Soft(w) => {
                    for (j, p) in w.dist.entries() {
                        add_row(&mut g.embedding, j, p, &de, d);
                    }
                }
            }
        }
        Ok(loss)
    }

    /// Mean loss and mean gradients over `batch`, reduced in order.
    pub fn batch_backward(&self, batch: &[(&SoftSentence, usize)]) -> Result<(f64, Gradients)> {
        let mut g = Gradients::zeros(self);
        let mut loss = 0.0;
        for (s, label) in batch {
            loss += self.accumulate(s, *label, &mut g)?;
        }
        let n = batch.len().max(1) as f64;
        g.scale(1.0 / n);
        Ok((loss / n, g))
    }

    /// Mean loss over `batch`.
    pub fn batch_loss(&self, batch: &[(&SoftSentence, usize)]) -> Result<f64> {
        let mut loss = 0.0;
        for (s, label) in batch {
            loss += self.loss(s, *label)?;
        }
        Ok(loss / batch.len().max(1) as f64)
    }

    /// Plain gradient step.
    pub fn apply(&mut self, g: &Gradients, lr: f64) {
        for (w, gw) in self.weights.iter_mut().zip(&g.weights) {
            *w -= lr * gw;
        }
        for (b, gb) in self.bias.iter_mut().zip(&g.bias) {
            *b -= lr * gb;
        }
        for (&id, grow) in &g.embedding {
            for (e, ge) in self.embedding.row_mut(id).iter_mut().zip(grow) {
                *e -= lr * ge;
            }
        }
    }
}

fn add_row(rows: &mut BTreeMap<TokenId, Vec<f64>>, id: TokenId, p: f64, de: &[f64], d: usize) {
    let row = rows.entry(id).or_insert_with(|| vec![0.0; d]);
    for (r, x) in row.iter_mut().zip(de) {
        *r += p * x;
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
