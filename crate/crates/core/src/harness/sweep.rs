use std::time::Instant;

use rayon::prelude::*;

use super::task::{SyntheticTask, TaskSpec};
use crate::augment::{
    augment_corpus, unigram_distribution, AugmentConfig, Resources, SoftSentence, Strategy,
    GAMMA_GRID,
};
use crate::corpus::Sentence;
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::lm::{train_lm, LmConfig, NGramLM};
use crate::rng::{derive_seed, SplitMix64};
use crate::softmix::{evaluate, train_toy, ToyModel, TrainConfig};

// Stream tags under the base seed, kept apart from the per-rep streams.
const TASK_STREAM: u64 = u64::MAX;
const TRAIN_STREAM: u64 = u64::MAX - 1;
const AUGMENT_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub strategies: Vec<Strategy>,
    pub gammas: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub task: TaskSpec,
    /// Fraction of the task held out for evaluation.
    pub holdout: f64,
    /// Independently augmented copies of the training split per cell.
    pub copies: usize,
    pub dim: usize,
    pub train: TrainConfig,
    pub topk: usize,
    pub window: usize,
    pub lm: LmConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            strategies: Strategy::ALL.to_vec(),
            gammas: GAMMA_GRID.to_vec(),
            reps: 5,
            seed: 0,
            task: TaskSpec::default(),
            holdout: 0.2,
            copies: 4,
            dim: 16,
            train: TrainConfig {
                lr: 0.5,
                steps: 1500,
                batch_size: 32,
            },
            topk: 32,
            window: 3,
            lm: LmConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies given".into()));
        }
        if self.gammas.is_empty() {
            return Err(Error::Config("no gammas given".into()));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::Config(format!("gamma {g} outside [0, 1]")));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::Config(format!(
                "holdout must lie in (0, 1), got {}",
                self.holdout
            )));
        }
        if self.copies == 0 || self.dim == 0 || self.window == 0 {
            return Err(Error::Config("copies, dim and window must be positive".into()));
        }
        if !(self.train.lr > 0.0 && self.train.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.train.lr)));
        }
        self.lm
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::with_capacity(self.strategies.len() * self.gammas.len() * self.reps);
        for &strategy in &self.strategies {
            for &gamma in &self.gammas {
                for rep in 0..self.reps {
                    out.push(CellKey { strategy, gamma, rep });
                }
            }
        }
        out
    }

    /// The task this spec describes, generated from its seed.
    pub fn make_task(&self) -> Result<SyntheticTask> {
        super::task::make_synthetic_task(&self.task, &mut SplitMix64::derive(self.seed, TASK_STREAM))
    }

    /// Number of task sentences used for training; the rest are held out.
    pub fn train_len(&self, total: usize) -> usize {
        let n = ((1.0 - self.holdout) * total as f64).round() as usize;
        n.clamp(1.min(total), total.saturating_sub(1).max(1))
    }

    /// Language model over the training split of `task`.
    pub fn train_task_lm(&self, task: &SyntheticTask) -> Result<NGramLM> {
        let n = self.train_len(task.sentences.len());
        train_lm(&task.sentences[..n], &task.vocab, self.lm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub strategy: Strategy,
    pub gamma: f64,
    pub rep: usize,
}

impl CellKey {
    /// Seed for model initialisation and batch order. It depends only on
    /// the repetition, so every strategy starts from the same model.
    pub fn train_seed(&self, base: u64) -> u64 {
        derive_seed(derive_seed(base, TRAIN_STREAM), self.rep as u64)
    }

    /// Seed for the augmentation of this cell.
    pub fn augment_seed(&self, base: u64) -> u64 {
        let s = derive_seed(base, AUGMENT_STREAM);
        let s = derive_seed(s, self.strategy as u64);
        let s = derive_seed(s, self.gamma.to_bits());
        derive_seed(s, self.rep as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub strategy: Strategy,
    pub gamma: f64,
    pub rep: usize,
    pub accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub strategy: Strategy,
    pub gamma: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single repetition.
    pub sd: f64,
    pub reps: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<CellResult>,
}

impl SweepResult {
    /// Strategies in first-appearance order.
    pub fn strategies(&self) -> Vec<Strategy> {
        let mut out: Vec<Strategy> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.strategy) {
                out.push(r.strategy);
            }
        }
        out
    }

    /// Gammas in first-appearance order.
    pub fn gammas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|g| g.to_bits() == r.gamma.to_bits()) {
                out.push(r.gamma);
            }
        }
        out
    }

    pub fn summary(&self, strategy: Strategy, gamma: f64) -> Option<CellSummary> {
        let rows: Vec<&CellResult> = self
            .rows
            .iter()
            .filter(|r| r.strategy == strategy && r.gamma.to_bits() == gamma.to_bits())
            .collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r.accuracy).sum::<f64>() / n;
        let sd = if rows.len() > 1 {
            (rows.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(CellSummary {
            strategy,
            gamma,
            mean,
            sd,
            reps: rows.len(),
            seconds: rows.iter().map(|r| r.seconds).sum(),
        })
    }

    pub fn summaries(&self) -> Vec<CellSummary> {
        let gammas = self.gammas();
        self.strategies()
            .into_iter()
            .flat_map(|s| gammas.iter().filter_map(move |&g| self.summary(s, g)).collect::<Vec<_>>())
            .collect()
    }

    pub fn mean_accuracy(&self, strategy: Strategy, gamma: f64) -> Option<f64> {
        self.summary(strategy, gamma).map(|s| s.mean)
    }
}

/// Training split, held-out split and the resources shared by all cells.
struct Prepared<'a> {
    train: &'a [Sentence],
    train_labels: &'a [usize],
    test: Vec<SoftSentence>,
    test_labels: &'a [usize],
    lm: &'a NGramLM,
    unigram: Distribution,
    vocab_len: usize,
}

/// Trains and evaluates every cell of `spec`. `lm` should be trained on the
/// training split of `task` (see [`SweepSpec::train_task_lm`]).
pub fn run_sweep(spec: &SweepSpec, task: &SyntheticTask, lm: &NGramLM) -> Result<SweepResult> {
    spec.validate()?;
    if lm.vocab_size() != task.vocab.len() {
        return Err(Error::invalid(format!(
            "language model vocabulary has {} entries, task has {}",
            lm.vocab_size(),
            task.vocab.len()
        )));
    }
    let n = spec.train_len(task.sentences.len());
    let prepared = Prepared {
        train: &task.sentences[..n],
        train_labels: &task.labels[..n],
        test: task.sentences[n..].iter().map(SoftSentence::from).collect(),
        test_labels: &task.labels[n..],
        lm,
        unigram: unigram_distribution(&task.sentences[..n], task.vocab.len())?,
        vocab_len: task.vocab.len(),
    };
    let rows = spec
        .cells()
        .into_par_iter()
        .map(|key| run_cell(spec, &prepared, key))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

/// Runs a single cell of a sweep on its own.
pub fn run_single_cell(
    spec: &SweepSpec,
    task: &SyntheticTask,
    lm: &NGramLM,
    key: CellKey,
) -> Result<CellResult> {
    let one = SweepSpec {
        strategies: vec![key.strategy],
        gammas: vec![key.gamma],
        ..spec.clone()
    };
    let mut res = run_sweep(&SweepSpec { reps: key.rep + 1, ..one }, task, lm)?;
    Ok(res.rows.swap_remove(key.rep))
}

fn run_cell(spec: &SweepSpec, p: &Prepared<'_>, key: CellKey) -> Result<CellResult> {
    let start = Instant::now();
    let config = AugmentConfig {
        strategy: key.strategy,
        gamma: key.gamma,
        window_k: spec.window,
        topk: spec.topk,
        seed: key.augment_seed(spec.seed),
    };
    let res = Resources {
        lm: Some(p.lm),
        unigram: Some(&p.unigram),
    };
    let mut data = Vec::with_capacity(p.train.len() * spec.copies);
    let mut labels = Vec::with_capacity(data.capacity());
    for copy in 0..spec.copies {
        let (aug, _) = augment_corpus(p.train, (copy * p.train.len()) as u64, &config, &res)?;
        data.extend(aug.iter().map(|a| a.to_soft()));
        labels.extend_from_slice(p.train_labels);
    }
    let train_seed = key.train_seed(spec.seed);
    let init = ToyModel::init(p.vocab_len, spec.dim, SyntheticTask::NUM_LABELS, &mut SplitMix64::derive(train_seed, 0))?;
    let (model, _) = train_toy(&init, &data, &labels, &spec.train, &mut SplitMix64::derive(train_seed, 1))?;
    let accuracy = evaluate(&model, &p.test, p.test_labels)?;
    Ok(CellResult {
        strategy: key.strategy,
        gamma: key.gamma,
        rep: key.rep,
        accuracy,
        seconds: start.elapsed().as_secs_f64(),
    })
}
