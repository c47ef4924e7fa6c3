use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{Sentence, TokenId};
use crate::error::{Error, Result};

/// Surface strings of the reserved ids, in id order.
pub const SPECIALS: [&str; 4] = ["<s>", "</s>", "<unk>", "<blank>"];

/// Bijection between token strings and dense ids.
///
/// Ids `0..4` are BOS, EOS, UNK and BLANK. The remaining entries are sorted
/// by corpus count descending, ties broken by byte-wise ascending surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from surface counts, keeping at most `max_size`
    /// non-special entries. Surfaces equal to a special symbol are ignored.
    pub fn from_counts<I, S>(counts: I, max_size: Option<usize>) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        if max_size == Some(0) {
            return Err(Error::invalid("max_size must be positive"));
        }
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (s, c) in counts {
            let s = s.into();
            if SPECIALS.contains(&s.as_str()) || s.is_empty() {
                continue;
            }
            *merged.entry(s).or_default() += c;
        }
        let mut sorted: Vec<(String, u64)> = merged.into_iter().collect();
        sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(max) = max_size {
            sorted.truncate(max);
        }
        let entries = SPECIALS
            .iter()
            .map(|s| (s.to_string(), 0))
            .chain(sorted)
            .collect();
        Ok(Self::from_entries_unchecked(entries))
    }

    fn from_entries_unchecked(entries: Vec<(String, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (s.clone(), TokenId::new(i as u32)))
            .collect();
        Vocabulary { entries, index }
    }

    /// |V|, including the specials.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.entries.get(id.index()).map(|(s, _)| s.as_str())
    }

    pub fn count(&self, id: TokenId) -> Option<u64> {
        self.entries.get(id.index()).map(|&(_, c)| c)
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn check(&self, id: TokenId) -> Result<()> {
        if id.index() < self.len() {
            Ok(())
        } else {
            Err(Error::IdOutOfRange {
                id: id.index(),
                size: self.len(),
            })
        }
    }

    /// Maps already-segmented tokens to ids; unknown surfaces become UNK.
    pub fn encode_tokens<'a, I>(&self, tokens: I) -> Result<Sentence>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let ids = tokens
            .into_iter()
            .map(|t| match self.id(t) {
                Some(id) if id != TokenId::BOS && id != TokenId::EOS => id,
                _ => TokenId::UNK,
            })
            .collect();
        Sentence::new(ids)
    }

    /// Encodes one whitespace-tokenized line.
    pub fn encode_line(&self, line: &str) -> Result<Sentence> {
        self.encode_tokens(line.split_whitespace())
    }

    pub fn surfaces(&self, ids: &[TokenId]) -> Result<Vec<&str>> {
        ids.iter()
            .map(|&id| {
                self.surface(id).ok_or(Error::IdOutOfRange {
                    id: id.index(),
                    size: self.len(),
                })
            })
            .collect()
    }

    /// Space-joined surfaces of `ids`.
    pub fn render(&self, ids: &[TokenId]) -> Result<String> {
        Ok(self.surfaces(ids)?.join(" "))
    }

    /// Writes one `token<TAB>count` line per id.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (s, c) in &self.entries {
            writeln!(w, "{s}\t{c}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Vocabulary::write`]. `name` labels errors.
    pub fn read<R: BufRead>(r: R, name: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(name, e))?;
            if line.is_empty() {
                continue;
            }
            entries.push(parse_entry(&line).ok_or_else(|| {
                Error::parse(name, i + 1, "expected token<TAB>count")
            })?);
        }
        Self::from_entries(entries).map_err(|msg| Error::parse(name, 0, msg))
    }

    /// Validates entries against the vocabulary invariants.
    pub(crate) fn from_entries(entries: Vec<(String, u64)>) -> std::result::Result<Self, String> {
        if entries.len() < SPECIALS.len() {
            return Err("missing special tokens".into());
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            if entries[i].0 != *s || entries[i].1 != 0 {
                return Err(format!("id {i} must be special {s} with count 0"));
            }
        }
        let body = &entries[SPECIALS.len()..];
        for w in body.windows(2) {
            let ordered = w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0);
            if !ordered {
                return Err(format!("entries out of order near {:?}", w[1].0));
            }
        }
        let vocab = Self::from_entries_unchecked(entries);
        if vocab.index.len() != vocab.entries.len() {
            return Err("duplicate surface strings".into());
        }
        Ok(vocab)
    }
}

pub(crate) fn parse_entry(line: &str) -> Option<(String, u64)> {
    let (s, c) = line.rsplit_once('\t')?;
    Some((s.to_string(), c.parse().ok()?))
}

/// Counts whitespace-separated tokens, reading line by line. `offset` is the
/// byte position of the reader's start within the overall input and is used
/// to report UTF-8 errors. Returns the counts and the number of bytes read.
pub fn count_tokens<R: BufRead>(
    mut reader: R,
    counts: &mut HashMap<String, u64>,
    offset: usize,
) -> Result<usize> {
    let mut buf = Vec::new();
    let mut pos = offset;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io("<input>", e))?;
        if n == 0 {
            break;
        }
        let line = std::str::from_utf8(&buf).map_err(|e| Error::Utf8 {
            offset: pos + e.valid_up_to(),
        })?;
        for tok in line.split_whitespace() {
            if let Some(c) = counts.get_mut(tok) {
                *c += 1;
            } else {
                counts.insert(tok.to_string(), 1);
            }
        }
        pos += n;
    }
    Ok(pos - offset)
}

/// Builds a vocabulary from line-separated, whitespace-tokenized text.
pub fn build_vocab(corpus: &[u8], max_size: Option<usize>) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts = HashMap::new();
    count_tokens(corpus, &mut counts, 0)?;
    Vocabulary::from_counts(counts, max_size)
}
