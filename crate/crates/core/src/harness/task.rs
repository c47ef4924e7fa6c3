//! Synonym-class classification task.
//!
//! Content tokens `w0 .. w{V-1}` are split into classes by `i % classes`.
//! Each sentence walks a fixed random permutation of the classes from a
//! uniform start class and emits a uniformly chosen member of each class it
//! visits, so the previous token determines the next token's class. The
//! label is 1 iff the sentence visits a marker class. A language model
//! trained on these sentences spreads its mass over the members of the
//! right class, so soft replacement keeps the label intact.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Sentence, TokenId, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    pub vocab_size: usize,
    pub classes: usize,
    pub sentences: usize,
    pub length: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            vocab_size: 500,
            classes: 50,
            sentences: 2000,
            length: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub vocab: Vocabulary,
    pub sentences: Vec<Sentence>,
    pub labels: Vec<usize>,
    /// Class of each vocabulary id; `None` for specials.
    pub class_of: Vec<Option<usize>>,
    /// `next_class[c]` follows class `c` in every sentence.
    pub next_class: Vec<usize>,
    pub marker: Vec<bool>,
}

impl SyntheticTask {
    pub const NUM_LABELS: usize = 2;

    /// Label the generator assigns to `s`.
    pub fn label_of(&self, s: &Sentence) -> usize {
        let hit = s.tokens().iter().any(|t| {
            self.class_of
                .get(t.index())
                .copied()
                .flatten()
                .is_some_and(|c| self.marker[c])
        });
        usize::from(hit)
    }
}

pub fn token_surface(i: usize) -> String {
    format!("w{i}")
}

fn visits(start: usize, next: &[usize], length: usize) -> Vec<usize> {
    let mut c = start;
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        out.push(c);
        c = next[c];
    }
    out
}

pub fn make_synthetic_task<R: Rng + ?Sized>(spec: &TaskSpec, rng: &mut R) -> Result<SyntheticTask> {
    let TaskSpec {
        vocab_size,
        classes,
        sentences,
        length,
    } = *spec;
    if classes == 0 || sentences == 0 || length == 0 {
        return Err(Error::invalid("classes, sentences and length must be positive"));
    }
    if vocab_size < classes {
        return Err(Error::invalid(format!(
            "vocab_size {vocab_size} is smaller than the number of classes {classes}"
        )));
    }

    let mut next_class: Vec<usize> = (0..classes).collect();
    next_class.shuffle(rng);

    // Grow the marker set in random order until about half of the start
    // classes reach a marker.
    let mut order: Vec<usize> = (0..classes).collect();
    order.shuffle(rng);
    let reach: Vec<Vec<usize>> = (0..classes)
        .map(|c| visits(c, &next_class, length))
        .collect();
    let mut marker = vec![false; classes];
    for &c in &order {
        let hits = reach.iter().filter(|r| r.iter().any(|&x| marker[x])).count();
        if 2 * hits >= classes {
            break;
        }
        marker[c] = true;
    }

    let members: Vec<Vec<usize>> = (0..classes)
        .map(|c| (c..vocab_size).step_by(classes).collect())
        .collect();
    let mut content: Vec<Vec<usize>> = Vec::with_capacity(sentences);
    let mut counts = vec![0u64; vocab_size];
    for _ in 0..sentences {
        let start = rng.gen_range(0..classes);
        let toks: Vec<usize> = visits(start, &next_class, length)
            .into_iter()
            .map(|c| *members[c].choose(rng).expect("classes are non-empty"))
            .collect();
        for &t in &toks {
            counts[t] += 1;
        }
        content.push(toks);
    }

    let vocab = Vocabulary::from_counts(
        (0..vocab_size).map(|i| (token_surface(i), counts[i])),
        None,
    )?;
    let id_of: Vec<TokenId> = (0..vocab_size)
        .map(|i| vocab.id(&token_surface(i)).expect("every token is in the vocabulary"))
        .collect();
    let mut class_of = vec![None; vocab.len()];
    for i in 0..vocab_size {
        class_of[id_of[i].index()] = Some(i % classes);
    }
    let sentences: Vec<Sentence> = content
        .iter()
        .map(|toks| Sentence::new(toks.iter().map(|&i| id_of[i]).collect()))
        .collect::<Result<_>>()?;
    let mut task = SyntheticTask {
        vocab,
        sentences,
        labels: Vec::new(),
        class_of,
        next_class,
        marker,
    };
    task.labels = task.sentences.iter().map(|s| task.label_of(s)).collect();
    Ok(task)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn small() -> TaskSpec {
        TaskSpec {
            vocab_size: 40,
            classes: 8,
            sentences: 300,
            length: 5,
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = make_synthetic_task(&small(), &mut SplitMix64::new(1)).unwrap();
        let b = make_synthetic_task(&small(), &mut SplitMix64::new(1)).unwrap();
        assert_eq!(a, b);
        let c = make_synthetic_task(&small(), &mut SplitMix64::new(2)).unwrap();
        assert_ne!(a.sentences, c.sentences);
    }

    #[test]
    fn labels_recomputed_from_surfaces() {
        let spec = small();
        let task = make_synthetic_task(&spec, &mut SplitMix64::new(3)).unwrap();
        let markers: Vec<usize> = (0..spec.classes).filter(|&c| task.marker[c]).collect();
        for (s, &label) in task.sentences.iter().zip(&task.labels) {
            let expected = s.tokens().iter().any(|&t| {
                let surface = task.vocab.surface(t).unwrap();
                let i: usize = surface[1..].parse().unwrap();
                markers.contains(&(i % spec.classes))
            });
            assert_eq!(label, usize::from(expected));
        }
    }

    #[test]
    fn labels_are_reasonably_balanced() {
        let task = make_synthetic_task(&TaskSpec::default(), &mut SplitMix64::new(4)).unwrap();
        let ones = task.labels.iter().sum::<usize>() as f64 / task.labels.len() as f64;
        assert!((0.3..=0.7).contains(&ones), "{ones}");
        assert_eq!(task.vocab.len(), 504);
    }

    #[test]
    fn class_walk_is_followed() {
        let task = make_synthetic_task(&small(), &mut SplitMix64::new(5)).unwrap();
        for s in &task.sentences {
            for w in s.tokens().windows(2) {
                let (a, b) = (task.class_of[w[0].index()].unwrap(), task.class_of[w[1].index()].unwrap());
                assert_eq!(task.next_class[a], b);
            }
        }
    }

    #[test]
    fn singleton_classes() {
        let spec = TaskSpec { vocab_size: 6, classes: 6, sentences: 20, length: 3 };
        let task = make_synthetic_task(&spec, &mut SplitMix64::new(6)).unwrap();
        // each class has exactly one member, so the token is the class
        for id in 4..task.vocab.len() {
            let surface = task.vocab.surface(TokenId::new(id as u32)).unwrap();
            let i: usize = surface[1..].parse().unwrap();
            assert_eq!(task.class_of[id], Some(i));
        }
    }

    #[test]
    fn too_many_classes() {
        let spec = TaskSpec { vocab_size: 5, classes: 6, sentences: 20, length: 3 };
        assert!(make_synthetic_task(&spec, &mut SplitMix64::new(0)).is_err());
    }
}
