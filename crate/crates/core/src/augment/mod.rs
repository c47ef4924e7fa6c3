//! Token-level augmentation: the discrete baselines and soft contextual
//! replacement.
//!
//! Each eligible position is selected independently with probability
//! `gamma`. Selected positions are dropped, blanked, resampled from the
//! unigram, resampled from the language model, or replaced by the model's
//! full next-token distribution (a soft word). Language-model contexts are
//! always the original tokens, so positions never depend on one another.

mod jsonl;
mod strategies;

pub use jsonl::{parse_soft_line, write_soft_line};
pub use strategies::{
    augment_blank, augment_dropout, augment_lm_sample, augment_smooth, augment_soft, augment_swap,
    unigram_distribution,
};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{Sentence, TokenId};
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::lm::NGramLM;
use crate::rng::SplitMix64;

/// Replacement probabilities swept by default.
pub const GAMMA_GRID: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Base,
    Swap,
    Dropout,
    Blank,
    Smooth,
    LmSample,
    Soft,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Base,
        Strategy::Swap,
        Strategy::Dropout,
        Strategy::Blank,
        Strategy::Smooth,
        Strategy::LmSample,
        Strategy::Soft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Base => "base",
            Strategy::Swap => "swap",
            Strategy::Dropout => "dropout",
            Strategy::Blank => "blank",
            Strategy::Smooth => "smooth",
            Strategy::LmSample => "lm_sample",
            Strategy::Soft => "soft",
        }
    }

    pub fn needs_lm(self) -> bool {
        matches!(self, Strategy::LmSample | Strategy::Soft)
    }

    pub fn preserves_length(self) -> bool {
        self != Strategy::Dropout
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub strategy: Strategy,
    pub gamma: f64,
    /// Maximum displacement for `swap`.
    pub window_k: usize,
    /// Entries kept per soft word; 0 keeps the dense distribution.
    pub topk: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            strategy: Strategy::Base,
            gamma: 0.0,
            window_k: 3,
            topk: 32,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.window_k == 0 {
            return Err(Error::invalid("window must be at least 1"));
        }
        Ok(())
    }
}

/// A replaced position: the distribution that stands in for `original_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftWord {
    pub dist: Distribution,
    pub original_id: TokenId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Position {
    Hard(TokenId),
    Soft(SoftWord),
}

impl Position {
    /// The token this position stands for (the original id for soft words).
    pub fn token(&self) -> TokenId {
        match self {
            Position::Hard(t) => *t,
            Position::Soft(w) => w.original_id,
        }
    }
}

/// A sentence whose positions are hard ids or soft words.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoftSentence(Vec<Position>);

impl SoftSentence {
    pub fn new(positions: Vec<Position>) -> Self {
        SoftSentence(positions)
    }

    pub fn positions(&self) -> &[Position] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn soft_count(&self) -> usize {
        self.0
            .iter()
            .filter(|p| matches!(p, Position::Soft(_)))
            .count()
    }
}

impl From<&Sentence> for SoftSentence {
    fn from(s: &Sentence) -> Self {
        SoftSentence(s.tokens().iter().map(|&t| Position::Hard(t)).collect())
    }
}

/// Output of one augmented sentence.
#[derive(Debug, Clone, PartialEq)]
pub enum Augmented {
    Hard(Sentence),
    Soft(SoftSentence),
}

impl Augmented {
    pub fn to_soft(&self) -> SoftSentence {
        match self {
            Augmented::Hard(s) => SoftSentence::from(s),
            Augmented::Soft(s) => s.clone(),
        }
    }
}

/// Counts of positions eligible for selection and actually selected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AugmentStats {
    pub eligible: usize,
    pub selected: usize,
}

impl AugmentStats {
    pub fn rate(&self) -> f64 {
        if self.eligible == 0 {
            0.0
        } else {
            self.selected as f64 / self.eligible as f64
        }
    }
}

impl std::ops::AddAssign for AugmentStats {
    fn add_assign(&mut self, rhs: Self) {
        self.eligible += rhs.eligible;
        self.selected += rhs.selected;
    }
}

/// Models a strategy may need.
#[derive(Debug, Clone, Copy, Default)]
pub struct Resources<'a> {
    pub lm: Option<&'a NGramLM>,
    pub unigram: Option<&'a Distribution>,
}

impl Resources<'_> {
    fn check(&self, strategy: Strategy) -> Result<()> {
        if strategy.needs_lm() && self.lm.is_none() {
            return Err(Error::Config(format!(
                "strategy {strategy} requires a language model"
            )));
        }
        if strategy == Strategy::Smooth && self.unigram.is_none() {
            return Err(Error::Config(
                "strategy smooth requires a unigram distribution".into(),
            ));
        }
        Ok(())
    }
}

/// Augments sentence number `index` of a corpus with its own derived stream.
pub fn augment_sentence(
    sentence: &Sentence,
    index: u64,
    config: &AugmentConfig,
    res: &Resources<'_>,
) -> Result<(Augmented, AugmentStats)> {
    res.check(config.strategy)?;
    let mut rng = SplitMix64::derive(config.seed, index);
    let gamma = config.gamma;
    let out = match config.strategy {
        Strategy::Base => (
            Augmented::Hard(sentence.clone()),
            AugmentStats {
                eligible: strategies::eligible(sentence),
                selected: 0,
            },
        ),
        Strategy::Swap => {
            let eligible = sentence.len();
            if gamma == 0.0 {
                (Augmented::Hard(sentence.clone()), AugmentStats { eligible, selected: 0 })
            } else {
                let out = augment_swap(sentence, config.window_k, &mut rng);
                let moved = out
                    .tokens()
                    .iter()
                    .zip(sentence.tokens())
                    .filter(|(a, b)| a != b)
                    .count();
                (Augmented::Hard(out), AugmentStats { eligible, selected: moved })
            }
        }
        Strategy::Dropout => {
            let (s, st) = augment_dropout(sentence, gamma, &mut rng);
            (Augmented::Hard(s), st)
        }
        Strategy::Blank => {
            let (s, st) = augment_blank(sentence, gamma, &mut rng);
            (Augmented::Hard(s), st)
        }
        Strategy::Smooth => {
            let unigram = res.unigram.expect("checked");
            let (s, st) = augment_smooth(sentence, gamma, unigram, &mut rng);
            (Augmented::Hard(s), st)
        }
        Strategy::LmSample => {
            let lm = res.lm.expect("checked");
            let (s, st) = augment_lm_sample(sentence, gamma, lm, &mut rng);
            (Augmented::Hard(s), st)
        }
        Strategy::Soft => {
            let lm = res.lm.expect("checked");
            let (s, st) = augment_soft(sentence, gamma, lm, config.topk, &mut rng);
            (Augmented::Soft(s), st)
        }
    };
    Ok(out)
}

/// Augments a whole corpus. Sentence `i` uses the stream derived from
/// `(seed, first_index + i)`, so the output does not depend on how rayon
/// schedules the work.
pub fn augment_corpus(
    corpus: &[Sentence],
    first_index: u64,
    config: &AugmentConfig,
    res: &Resources<'_>,
) -> Result<(Vec<Augmented>, AugmentStats)> {
    config.validate()?;
    res.check(config.strategy)?;
    let results: Vec<(Augmented, AugmentStats)> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, s)| augment_sentence(s, first_index + i as u64, config, res))
        .collect::<Result<_>>()?;
    let mut stats = AugmentStats::default();
    let out = results
        .into_iter()
        .map(|(a, st)| {
            stats += st;
            a
        })
        .collect();
    Ok((out, stats))
}
