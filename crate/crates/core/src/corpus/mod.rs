//! Text ingestion: vocabularies, byte-pair encoding and sentence encoding.

mod bpe;
mod vocab;

pub use bpe::{apply_bpe, join_subwords, learn_bpe, MergeTable, CONTINUATION, END_OF_WORD};
pub use vocab::{build_vocab, count_tokens, Vocabulary, SPECIALS};
pub(crate) use vocab::parse_entry as vocab_entry;

use std::fmt;

use crate::error::{Error, Result};

/// Index of a token in a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(u32);

impl TokenId {
    pub const BOS: TokenId = TokenId(0);
    pub const EOS: TokenId = TokenId(1);
    pub const UNK: TokenId = TokenId(2);
    pub const BLANK: TokenId = TokenId(3);

    /// Number of reserved ids at the bottom of every vocabulary.
    pub const NUM_SPECIALS: usize = 4;

    pub const fn new(id: u32) -> Self {
        TokenId(id)
    }

    pub const fn get(self) -> u32 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_special(self) -> bool {
        self.index() < Self::NUM_SPECIALS
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A tokenized sentence. BOS/EOS framing is implicit and never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence(Vec<TokenId>);

impl Sentence {
    pub fn new(tokens: Vec<TokenId>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("empty sentence"));
        }
        if let Some(t) = tokens
            .iter()
            .find(|t| **t == TokenId::BOS || **t == TokenId::EOS)
        {
            return Err(Error::invalid(format!("framing token {t} inside sentence")));
        }
        Ok(Sentence(tokens))
    }

    pub fn from_ids(ids: &[u32]) -> Result<Self> {
        Self::new(ids.iter().map(|&i| TokenId(i)).collect())
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_tokens(self) -> Vec<TokenId> {
        self.0
    }
}

/// Segments `text` with `merges` and maps the subwords to ids, using UNK for
/// subwords missing from `vocab`.
pub fn encode(text: &str, merges: &MergeTable, vocab: &Vocabulary) -> Result<Sentence> {
    let subwords = apply_bpe(text, merges);
    vocab.encode_tokens(subwords.iter().map(String::as_str))
}

/// Inverse of [`encode`] for sentences without UNK.
pub fn decode(sentence: &Sentence, vocab: &Vocabulary) -> Result<String> {
    let surfaces = vocab.surfaces(sentence.tokens())?;
    Ok(join_subwords(&surfaces))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_rejects_framing_and_empty() {
        assert!(Sentence::new(vec![]).is_err());
        assert!(Sentence::from_ids(&[5, 0]).is_err());
        assert!(Sentence::from_ids(&[5, 1]).is_err());
        assert!(Sentence::from_ids(&[5, 2, 3]).is_ok());
    }

    #[test]
    fn encode_decode_round_trip() {
        let vocab = build_vocab(b"a b", None).unwrap();
        let merges = MergeTable::default();
        let s = encode("a b", &merges, &vocab).unwrap();
        assert_eq!(decode(&s, &vocab).unwrap(), "a b");
    }

    #[test]
    fn unknown_subword_maps_to_unk() {
        let vocab = build_vocab(b"a b", None).unwrap();
        let s = encode("a z b", &MergeTable::default(), &vocab).unwrap();
        assert_eq!(s.tokens()[1], TokenId::UNK);
    }

    #[test]
    fn decode_out_of_range() {
        let vocab = build_vocab(b"a b", None).unwrap();
        let s = Sentence::from_ids(&[vocab.len() as u32]).unwrap();
        let err = decode(&s, &vocab).unwrap_err();
        assert!(err.to_string().contains("id out of range"));
    }
}
