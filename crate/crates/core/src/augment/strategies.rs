use rand::Rng;

use super::{AugmentStats, Position, SoftSentence, SoftWord};
use crate::corpus::{Sentence, TokenId};
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::lm::NGramLM;

fn is_eligible(t: TokenId) -> bool {
    t != TokenId::BLANK && t != TokenId::BOS && t != TokenId::EOS
}

pub(super) fn eligible(s: &Sentence) -> usize {
    s.tokens().iter().filter(|&&t| is_eligible(t)).count()
}

#[inline]
fn select<R: Rng + ?Sized>(rng: &mut R, gamma: f64) -> bool {
    rng.gen::<f64>() < gamma
}

fn rebuild(tokens: Vec<TokenId>) -> Sentence {
    Sentence::new(tokens).expect("augmentation keeps sentences non-empty and unframed")
}

/// Local shuffle: position `i` gets key `i + u_i * (k + 1)` with `u_i`
/// uniform on `[0, 1)`, and tokens are stably sorted by key. No token moves
/// more than `k` places.
pub fn augment_swap<R: Rng + ?Sized>(s: &Sentence, k: usize, rng: &mut R) -> Sentence {
    let width = (k + 1) as f64;
    let mut keyed: Vec<(f64, TokenId)> = s
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, &t)| (i as f64 + rng.gen::<f64>() * width, t))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    rebuild(keyed.into_iter().map(|(_, t)| t).collect())
}

/// Drops each eligible token with probability `gamma`. If every token would
/// be dropped, one uniformly chosen position survives.
pub fn augment_dropout<R: Rng + ?Sized>(
    s: &Sentence,
    gamma: f64,
    rng: &mut R,
) -> (Sentence, AugmentStats) {
    let mut stats = AugmentStats::default();
    let mut kept = Vec::with_capacity(s.len());
    for &t in s.tokens() {
        if is_eligible(t) {
            stats.eligible += 1;
            if select(rng, gamma) {
                stats.selected += 1;
                continue;
            }
        }
        kept.push(t);
    }
    if kept.is_empty() {
        let survivor = rng.gen_range(0..s.len());
        kept.push(s.tokens()[survivor]);
        stats.selected -= 1;
    }
    (rebuild(kept), stats)
}

fn replace_each<R, F>(s: &Sentence, gamma: f64, rng: &mut R, mut f: F) -> (Sentence, AugmentStats)
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> TokenId,
{
    let mut stats = AugmentStats::default();
    let mut out = s.tokens().to_vec();
    for (i, slot) in out.iter_mut().enumerate() {
        if !is_eligible(*slot) {
            continue;
        }
        stats.eligible += 1;
        if select(rng, gamma) {
            stats.selected += 1;
            *slot = f(i, rng);
        }
    }
    (rebuild(out), stats)
}

/// Replaces each selected token with the BLANK placeholder.
pub fn augment_blank<R: Rng + ?Sized>(s: &Sentence, gamma: f64, rng: &mut R) -> (Sentence, AugmentStats) {
    replace_each(s, gamma, rng, |_, _| TokenId::BLANK)
}

/// Replaces each selected token with a draw from `unigram`.
pub fn augment_smooth<R: Rng + ?Sized>(
    s: &Sentence,
    gamma: f64,
    unigram: &Distribution,
    rng: &mut R,
) -> (Sentence, AugmentStats) {
    let original = s.tokens();
    replace_each(s, gamma, rng, |i, rng| {
        unigram
            .sample_excluding(rng, TokenId::is_special)
            .unwrap_or(original[i])
    })
}

/// Replaces each selected token at position `t` with a draw from the
/// model's next-token distribution after the original tokens `x_<t`,
/// restricted to non-special tokens.
pub fn augment_lm_sample<R: Rng + ?Sized>(
    s: &Sentence,
    gamma: f64,
    lm: &NGramLM,
    rng: &mut R,
) -> (Sentence, AugmentStats) {
    let original = s.tokens();
    replace_each(s, gamma, rng, |i, rng| {
        lm.next_dist(&lm.prefix(&original[..i]))
            .sample_excluding(rng, TokenId::is_special)
            .unwrap_or(original[i])
    })
}

/// Replaces each selected token at position `t` with the soft word
/// `next_dist(x_<t)`, truncated to the `topk` most probable entries and
/// renormalized when `topk > 0`.
pub fn augment_soft<R: Rng + ?Sized>(
    s: &Sentence,
    gamma: f64,
    lm: &NGramLM,
    topk: usize,
    rng: &mut R,
) -> (SoftSentence, AugmentStats) {
    let original = s.tokens();
    let mut stats = AugmentStats::default();
    let positions = original
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if !is_eligible(t) {
                return Position::Hard(t);
            }
            stats.eligible += 1;
            if !select(rng, gamma) {
                return Position::Hard(t);
            }
            stats.selected += 1;
            let dist = lm.next_dist(&lm.prefix(&original[..i]));
            Position::Soft(SoftWord {
                dist: dist.top_k(topk),
                original_id: t,
            })
        })
        .collect();
    (SoftSentence::new(positions), stats)
}

/// Unigram frequency distribution over the non-special tokens of `corpus`.
pub fn unigram_distribution(corpus: &[Sentence], vocab_len: usize) -> Result<Distribution> {
    let mut counts = vec![0u64; vocab_len];
    for s in corpus {
        for &t in s.tokens() {
            if t.is_special() {
                continue;
            }
            let slot = counts.get_mut(t.index()).ok_or(Error::IdOutOfRange {
                id: t.index(),
                size: vocab_len,
            })?;
            *slot += 1;
        }
    }
    Distribution::from_counts(&counts).ok_or(Error::EmptyCorpus)
}
