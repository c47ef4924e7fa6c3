//! Soft contextual data augmentation for sequence training corpora.
//!
//! The pipeline is: segment text with byte-pair encoding ([`corpus`]), train
//! a next-token model on the segmented corpus ([`lm`]), replace randomly
//! selected tokens with the model's next-token distribution ([`augment`]),
//! and feed the resulting soft words into an embedding layer as the
//! expectation of embedding rows ([`softmix`]). The [`harness`] module runs
//! every augmentation strategy over a grid of replacement probabilities on a
//! synthetic task and tabulates the results.

pub mod augment;
pub mod corpus;
pub mod dist;
pub mod error;
pub mod harness;
pub mod lm;
pub mod rng;
pub mod softmix;

pub use corpus::{MergeTable, Sentence, TokenId, Vocabulary};
pub use dist::Distribution;
pub use lm::{LmConfig, NGramLM, Prefix};
pub use augment::{AugmentConfig, Position, SoftSentence, SoftWord, Strategy};
pub use softmix::{EmbeddingMatrix, ToyModel};
pub use error::{Error, Result};

pub use rng::SplitMix64;

