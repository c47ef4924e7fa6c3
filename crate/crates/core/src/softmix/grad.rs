//! Central finite-difference verification of [`ToyModel`] gradients.

use std::collections::BTreeSet;

use rand::Rng;

use super::{EmbeddingMatrix, ToyModel};
use crate::augment::{Position, SoftSentence, SoftWord};
use crate::corpus::TokenId;
use crate::dist::Distribution;
use crate::error::Result;
use crate::rng::SplitMix64;

pub const FD_STEP: f64 = 1e-5;
pub const PASS_THRESHOLD: f64 = 1e-4;
/// Denominator floor for the relative error of near-zero gradients.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub embedding_max_rel: f64,
    pub weights_max_rel: f64,
    pub bias_max_rel: f64,
    pub checked: usize,
    pub step: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn max_rel(&self) -> f64 {
        self.embedding_max_rel
            .max(self.weights_max_rel)
            .max(self.bias_max_rel)
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients of the mean batch loss with central
/// differences of step [`FD_STEP`] on every weight, bias, and coordinate of
/// every embedding row the batch touches.
pub fn grad_check(model: &ToyModel, batch: &[(SoftSentence, usize)]) -> Result<GradCheckReport> {
    let refs: Vec<(&SoftSentence, usize)> = batch.iter().map(|(s, l)| (s, *l)).collect();
    let (_, g) = model.batch_backward(&refs)?;
    let h = FD_STEP;
    let mut probe = model.clone();
    let numeric = |probe: &mut ToyModel, get: &dyn Fn(&mut ToyModel) -> &mut f64| -> Result<f64> {
        let orig = *get(probe);
        *get(probe) = orig + h;
        let plus = probe.batch_loss(&refs)?;
        *get(probe) = orig - h;
        let minus = probe.batch_loss(&refs)?;
        *get(probe) = orig;
        Ok((plus - minus) / (2.0 * h))
    };

    let mut checked = 0;
    let mut weights_max_rel: f64 = 0.0;
    for i in 0..model.weights.len() {
        let n = numeric(&mut probe, &|m| &mut m.weights[i])?;
        weights_max_rel = weights_max_rel.max(rel_err(g.weights[i], n));
        checked += 1;
    }
    let mut bias_max_rel: f64 = 0.0;
    for i in 0..model.bias.len() {
        let n = numeric(&mut probe, &|m| &mut m.bias[i])?;
        bias_max_rel = bias_max_rel.max(rel_err(g.bias[i], n));
        checked += 1;
    }
    let touched: BTreeSet<TokenId> = batch
        .iter()
        .flat_map(|(s, _)| s.positions())
        .flat_map(|p| match p {
            Position::Hard(id) => vec![*id],
            Position::Soft(w) => w.dist.entries().map(|(j, _)| j).collect(),
        })
        .collect();
    let d = model.dim();
    let mut embedding_max_rel: f64 = 0.0;
    for id in touched {
        for i in 0..d {
            let k = id.index() * d + i;
            let n = numeric(&mut probe, &|m| &mut m.embedding.data[k])?;
            let a = g.embedding.get(&id).map_or(0.0, |r| r[i]);
            embedding_max_rel = embedding_max_rel.max(rel_err(a, n));
            checked += 1;
        }
    }
    let mut report = GradCheckReport {
        embedding_max_rel,
        weights_max_rel,
        bias_max_rel,
        checked,
        step: h,
        pass: false,
    };
    report.pass = report.max_rel() <= PASS_THRESHOLD;
    Ok(report)
}

/// A random model with non-zero classifier and a batch mixing hard tokens,
/// sparse soft words and the occasional dense soft word.
pub fn random_instance(
    seed: u64,
    vocab_size: usize,
    dim: usize,
    classes: usize,
) -> (ToyModel, Vec<(SoftSentence, usize)>) {
    let vocab_size = vocab_size.max(TokenId::NUM_SPECIALS + 2);
    let classes = classes.max(2);
    let dim = dim.max(1);
    let mut rng = SplitMix64::derive(seed, 0);
    let embedding = EmbeddingMatrix::random(vocab_size, dim, 0.5, &mut rng).expect("valid dims");
    let mut model = ToyModel::with_embedding(embedding, classes).expect("classes > 0");
    for w in model.weights.iter_mut().chain(model.bias.iter_mut()) {
        *w = rng.gen_range(-1.0..=1.0);
    }
    let content = TokenId::NUM_SPECIALS as u32..vocab_size as u32;
    let batch = (0..4)
        .map(|_| {
            let len = rng.gen_range(2..=7);
            let positions = (0..len)
                .map(|_| {
                    let orig = TokenId::new(rng.gen_range(content.clone()));
                    match rng.gen_range(0..4) {
                        0 | 1 => Position::Soft(SoftWord {
                            dist: random_sparse(&mut rng, vocab_size),
                            original_id: orig,
                        }),
                        2 if rng.gen_bool(0.3) => {
                            let raw: Vec<f64> = (0..vocab_size).map(|_| rng.gen::<f64>()).collect();
                            let total: f64 = raw.iter().sum();
                            Position::Soft(SoftWord {
                                dist: Distribution::Dense(raw.iter().map(|x| x / total).collect()),
                                original_id: orig,
                            })
                        }
                        _ => Position::Hard(orig),
                    }
                })
                .collect();
            (SoftSentence::new(positions), rng.gen_range(0..classes))
        })
        .collect();
    (model, batch)
}

fn random_sparse<R: Rng>(rng: &mut R, vocab_size: usize) -> Distribution {
    let k = rng.gen_range(2..=6.min(vocab_size));
    let mut ids: Vec<u32> = Vec::with_capacity(k);
    while ids.len() < k {
        let j = rng.gen_range(0..vocab_size as u32);
        if !ids.contains(&j) {
            ids.push(j);
        }
    }
    let raw: Vec<f64> = ids.iter().map(|_| rng.gen::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    Distribution::sparse(
        ids.into_iter()
            .zip(raw)
            .map(|(j, p)| (TokenId::new(j), p / total))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_pass() {
        for seed in 0..5 {
            let (model, batch) = random_instance(seed, 16, 6, 3);
            let r = grad_check(&model, &batch).unwrap();
            assert!(r.pass, "seed {seed}: {r:?}");
            assert!(r.checked > model.weights.len() + model.bias.len());
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // Compare against a model whose analytic gradient is for different
        // labels: the check must fail.
        let (model, batch) = random_instance(1, 16, 6, 3);
        let refs: Vec<(&SoftSentence, usize)> = batch.iter().map(|(s, l)| (s, *l)).collect();
        let (_, good) = model.batch_backward(&refs).unwrap();
        let flipped: Vec<(&SoftSentence, usize)> =
            batch.iter().map(|(s, l)| (s, (l + 1) % 3)).collect();
        let (_, bad) = model.batch_backward(&flipped).unwrap();
        let worst = good
            .bias
            .iter()
            .zip(&bad.bias)
            .map(|(a, b)| rel_err(*a, *b))
            .fold(0.0, f64::max);
        assert!(worst > PASS_THRESHOLD);
    }
}
