//! Next-token language model: interpolated absolute discounting over
//! n-gram counts, grounded in an additively smoothed unigram.
//!
//! For a history `h` seen `c(h)` times,
//!
//! ```text
//! P(w | h) = max(c(h,w) - D, 0) / c(h) + D * N1+(h) / c(h) * P(w | h')
//! ```
//!
//! where `h'` drops the oldest token of `h` and `N1+(h)` is the number of
//! distinct followers of `h`. Unseen histories fall through to `P(w | h')`.
//! The empty history uses `P0(w) = (c(w) + alpha) / (C + alpha * |V|)`.

mod arpa;

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::corpus::{Sentence, TokenId, Vocabulary};
use crate::dist::Distribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub order: usize,
    pub discount: f64,
    pub alpha: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: 3,
            discount: 0.75,
            alpha: 0.1,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::invalid("order must be at least 1"));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::invalid(format!(
                "discount must lie in (0, 1), got {}",
                self.discount
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// The `order - 1` most recent tokens, oldest first, BOS-padded on the left.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Prefix(Vec<TokenId>);

impl Prefix {
    /// Prefix for predicting the token after `context` under a model of `order`.
    pub fn new(order: usize, context: &[TokenId]) -> Self {
        let width = order.saturating_sub(1);
        let take = context.len().min(width);
        let mut tokens = vec![TokenId::BOS; width - take];
        tokens.extend_from_slice(&context[context.len() - take..]);
        Prefix(tokens)
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Context {
    total: u64,
    /// Sorted by id.
    followers: Vec<(TokenId, u64)>,
}

/// Ids that carry only floor mass and are never sampled.
pub fn is_non_emittable(id: TokenId) -> bool {
    id == TokenId::BOS || id == TokenId::UNK || id == TokenId::BLANK
}

/// Trained n-gram model. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLM {
    config: LmConfig,
    vocab: Vocabulary,
    /// Full-order grams (history of `order - 1` tokens, then the predicted token).
    ngrams: BTreeMap<Vec<TokenId>, u64>,
    unigram: Vec<u64>,
    total: u64,
    base: Vec<f64>,
    /// `levels[l - 1]` maps histories of length `l` to their followers.
    levels: Vec<HashMap<Vec<TokenId>, Context>>,
}

/// Counts events over BOS-padded, EOS-terminated sentences.
pub fn train_lm(corpus: &[Sentence], vocab: &Vocabulary, config: LmConfig) -> Result<NGramLM> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let width = config.order - 1;
    let mut ngrams: BTreeMap<Vec<TokenId>, u64> = BTreeMap::new();
    let mut padded = Vec::new();
    for s in corpus {
        for &t in s.tokens() {
            vocab.check(t)?;
        }
        padded.clear();
        padded.resize(width, TokenId::BOS);
        padded.extend_from_slice(s.tokens());
        padded.push(TokenId::EOS);
        for i in width..padded.len() {
            if is_non_emittable(padded[i]) {
                continue;
            }
            *ngrams.entry(padded[i - width..=i].to_vec()).or_default() += 1;
        }
    }
    NGramLM::from_ngrams(config, vocab.clone(), ngrams)
}

impl NGramLM {
    fn from_ngrams(
        config: LmConfig,
        vocab: Vocabulary,
        ngrams: BTreeMap<Vec<TokenId>, u64>,
    ) -> Result<Self> {
        config.validate()?;
        let n = config.order;
        let mut unigram = vec![0u64; vocab.len()];
        let mut raw: Vec<BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>>> =
            vec![BTreeMap::new(); n - 1];
        for (gram, &count) in &ngrams {
            if gram.len() != n {
                return Err(Error::invalid(format!(
                    "gram of length {} in an order-{n} model",
                    gram.len()
                )));
            }
            for &t in gram {
                vocab.check(t)?;
            }
            let w = gram[n - 1];
            unigram[w.index()] += count;
            for len in 1..n {
                let h = gram[n - 1 - len..n - 1].to_vec();
                *raw[len - 1].entry(h).or_default().entry(w).or_default() += count;
            }
        }
        let total: u64 = unigram.iter().sum();
        if total == 0 {
            return Err(Error::EmptyCorpus);
        }
        let denom = total as f64 + config.alpha * vocab.len() as f64;
        let base = unigram
            .iter()
            .map(|&c| (c as f64 + config.alpha) / denom)
            .collect();
        let levels = raw
            .into_iter()
            .map(|level| {
                level
                    .into_iter()
                    .map(|(h, f)| {
                        let followers: Vec<_> = f.into_iter().collect();
                        let total = followers.iter().map(|&(_, c)| c).sum();
                        (h, Context { total, followers })
                    })
                    .collect()
            })
            .collect();
        Ok(NGramLM {
            config,
            vocab,
            ngrams,
            unigram,
            total,
            base,
            levels,
        })
    }

    pub fn config(&self) -> LmConfig {
        self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Prefix for predicting the token after `context`.
    pub fn prefix(&self, context: &[TokenId]) -> Prefix {
        Prefix::new(self.order(), context)
    }

    /// Raw count of `word` after `history` (`history` shorter than the
    /// model order selects the corresponding lower level).
    pub fn count(&self, history: &[TokenId], word: TokenId) -> u64 {
        if history.is_empty() {
            return self.unigram.get(word.index()).copied().unwrap_or(0);
        }
        self.context(history)
            .and_then(|c| {
                c.followers
                    .binary_search_by_key(&word, |&(w, _)| w)
                    .ok()
                    .map(|i| c.followers[i].1)
            })
            .unwrap_or(0)
    }

    /// Number of events following `history`; the empty history gives the token total.
    pub fn history_count(&self, history: &[TokenId]) -> u64 {
        if history.is_empty() {
            return self.total;
        }
        self.context(history).map_or(0, |c| c.total)
    }

    fn context(&self, history: &[TokenId]) -> Option<&Context> {
        self.levels.get(history.len().checked_sub(1)?)?.get(history)
    }

    /// Dense next-token distribution after `prefix`.
    pub fn next_dist(&self, prefix: &Prefix) -> Distribution {
        Distribution::Dense(self.dist_given(prefix.tokens()))
    }

    /// Dense distribution for an arbitrary history of at most `order - 1` tokens.
    pub fn dist_given(&self, history: &[TokenId]) -> Vec<f64> {
        let d = self.config.discount;
        let mut p = self.base.clone();
        let max_len = history.len().min(self.order() - 1);
        for len in 1..=max_len {
            let h = &history[history.len() - len..];
            let Some(ctx) = self.context(h) else { continue };
            let c = ctx.total as f64;
            let lambda = d * ctx.followers.len() as f64 / c;
            for x in p.iter_mut() {
                *x *= lambda;
            }
            for &(w, cnt) in &ctx.followers {
                p[w.index()] += (cnt as f64 - d).max(0.0) / c;
            }
        }
        p
    }

    /// `P(word | history)` by walking the recursion for one entry.
    pub fn prob_given(&self, history: &[TokenId], word: TokenId) -> f64 {
        let d = self.config.discount;
        let Some(&base) = self.base.get(word.index()) else {
            return 0.0;
        };
        let mut p = base;
        let max_len = history.len().min(self.order() - 1);
        for len in 1..=max_len {
            let h = &history[history.len() - len..];
            let Some(ctx) = self.context(h) else { continue };
            let c = ctx.total as f64;
            let lambda = d * ctx.followers.len() as f64 / c;
            p *= lambda;
            if let Ok(i) = ctx.followers.binary_search_by_key(&word, |&(w, _)| w) {
                p += (ctx.followers[i].1 as f64 - d).max(0.0) / c;
            }
        }
        p
    }

    /// Interpolation weight of `history`; 1 when the history was never seen.
    pub(crate) fn backoff_weight(&self, history: &[TokenId]) -> f64 {
        match self.context(history) {
            Some(ctx) => self.config.discount * ctx.followers.len() as f64 / ctx.total as f64,
            None => 1.0,
        }
    }

    /// Natural log of `P(token | prefix)`.
    pub fn logprob(&self, prefix: &Prefix, token: TokenId) -> f64 {
        self.prob_given(prefix.tokens(), token).ln()
    }

    /// `exp` of the mean negative log-likelihood over every token and the
    /// closing EOS of each sentence.
    pub fn perplexity(&self, corpus: &[Sentence]) -> f64 {
        let mut nll = 0.0;
        let mut n = 0usize;
        for s in corpus {
            let toks = s.tokens();
            for t in 0..=toks.len() {
                let target = toks.get(t).copied().unwrap_or(TokenId::EOS);
                nll -= self.logprob(&self.prefix(&toks[..t]), target);
                n += 1;
            }
        }
        if n == 0 {
            return 1.0;
        }
        (nll / n as f64).exp()
    }

    /// Inverse-CDF draw from `next_dist`, excluding BOS, UNK and BLANK.
    pub fn sample<R: Rng + ?Sized>(&self, prefix: &Prefix, rng: &mut R) -> TokenId {
        self.next_dist(prefix)
            .sample_excluding(rng, is_non_emittable)
            .unwrap_or(TokenId::EOS)
    }
}
