//! Greedy byte-pair encoding over characters, with an explicit end-of-word
//! marker during learning and `@@` continuation markers on output.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Appended to the last symbol of each word while learning and applying merges.
pub const END_OF_WORD: &str = "</w>";
/// Suffix marking a subword that continues into the next one.
pub const CONTINUATION: &str = "@@";

const HEADER: &str = "#bpe v1";

/// Ordered merge operations. Earlier merges take priority when applying.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
    ranks: HashMap<String, HashMap<String, usize>>,
}

impl MergeTable {
    pub fn new(merges: Vec<(String, String)>) -> Result<Self> {
        let mut table = MergeTable::default();
        for (l, r) in merges {
            if l.is_empty() || r.is_empty() || l.contains(char::is_whitespace) || r.contains(char::is_whitespace) {
                return Err(Error::invalid(format!("malformed merge {l:?} {r:?}")));
            }
            if table.rank(&l, &r).is_some() {
                return Err(Error::invalid(format!("duplicate merge {l} {r}")));
            }
            table.push(l, r);
        }
        Ok(table)
    }

    fn push(&mut self, left: String, right: String) {
        let rank = self.merges.len();
        self.ranks
            .entry(left.clone())
            .or_default()
            .insert(right.clone(), rank);
        self.merges.push((left, right));
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn rank(&self, left: &str, right: &str) -> Option<usize> {
        self.ranks.get(left)?.get(right).copied()
    }

    /// Splits one word into symbols; the last keeps its [`END_OF_WORD`] marker.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols = initial_symbols(word);
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.rank(&w[0], &w[1]))
                .min();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges[rank];
            symbols = merge_symbols(&symbols, left, right);
        }
        symbols
    }

    /// Writes the `#bpe v1 <n>` header followed by one `left right` line per merge.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{HEADER} {}", self.merges.len())?;
        for (l, r) in &self.merges {
            writeln!(w, "{l} {r}")?;
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
        let declared: usize = header
            .strip_prefix(HEADER)
            .and_then(|rest| rest.trim().parse().ok())
            .ok_or_else(|| Error::parse(name, 1, format!("expected \"{HEADER} <n>\"")))?;
        let mut merges = Vec::with_capacity(declared);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(name, e))?;
            if line.is_empty() {
                continue;
            }
            let (l, r) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(name, i + 2, "expected \"left right\""))?;
            merges.push((l.to_string(), r.to_string()));
        }
        if merges.len() != declared {
            return Err(Error::parse(
                name,
                1,
                format!("header declares {declared} merges, found {}", merges.len()),
            ));
        }
        Self::new(merges).map_err(|e| Error::parse(name, 0, e.to_string()))
    }
}

fn initial_symbols(word: &str) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END_OF_WORD);
    }
    symbols
}

/// Replaces every non-overlapping occurrence of `(left, right)`, scanning left to right.
fn merge_symbols<S: AsRef<str>>(symbols: &[S], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i].as_ref() == left && symbols[i + 1].as_ref() == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(symbols[i].as_ref().to_string());
            i += 1;
        }
    }
    out
}

/// Learns up to `num_merges` merges from word frequencies.
///
/// Each step merges the adjacent symbol pair with the highest weighted count,
/// ties broken by the lexicographically smallest `(left, right)`. Learning
/// stops early once no adjacent pair is left in any word.
pub fn learn_bpe<I, S>(word_counts: I, num_merges: usize) -> Result<MergeTable>
where
    I: IntoIterator<Item = (S, u64)>,
    S: AsRef<str>,
{
    if num_merges == 0 {
        return Err(Error::invalid("num_merges must be at least 1"));
    }
    let mut words: Vec<(Vec<String>, u64)> = word_counts
        .into_iter()
        .filter(|(w, c)| *c > 0 && !w.as_ref().is_empty())
        .map(|(w, c)| (initial_symbols(w.as_ref()), c))
        .collect();
    if words.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    // Sorting makes the occurrence index independent of input order.
    words.sort();

    let mut stats = PairStats::default();
    for (idx, (symbols, count)) in words.iter().enumerate() {
        stats.add_word(idx, symbols, *count as i64);
    }

    let mut table = MergeTable::default();
    while table.len() < num_merges {
        let Some((left, right)) = stats.best() else { break };
        let mut touched: Vec<usize> = stats
            .occurrences
            .remove(&(left.clone(), right.clone()))
            .unwrap_or_default()
            .into_iter()
            .collect();
        touched.sort_unstable();
        for idx in touched {
            let (symbols, count) = &mut words[idx];
            let merged = merge_symbols(symbols, &left, &right);
            if merged.len() == symbols.len() {
                continue;
            }
            stats.add_word(idx, symbols, -(*count as i64));
            stats.add_word(idx, &merged, *count as i64);
            *symbols = merged;
        }
        table.push(left, right);
    }
    Ok(table)
}

#[derive(Default)]
struct PairStats {
    counts: HashMap<(String, String), i64>,
    // Ordered by count descending, then pair ascending.
    ranked: BTreeSet<(Reverse<i64>, String, String)>,
    occurrences: HashMap<(String, String), HashSet<usize>>,
}

impl PairStats {
    fn add_word(&mut self, idx: usize, symbols: &[String], weight: i64) {
        for w in symbols.windows(2) {
            let key = (w[0].clone(), w[1].clone());
            let old = self.counts.get(&key).copied().unwrap_or(0);
            let new = old + weight;
            if old > 0 {
                self.ranked.remove(&(Reverse(old), key.0.clone(), key.1.clone()));
            }
            if new > 0 {
                self.ranked.insert((Reverse(new), key.0.clone(), key.1.clone()));
                self.counts.insert(key.clone(), new);
            } else {
                self.counts.remove(&key);
            }
            if weight > 0 {
                self.occurrences.entry(key).or_default().insert(idx);
            }
        }
    }

    fn best(&self) -> Option<(String, String)> {
        self.ranked
            .iter()
            .next()
            .map(|(_, l, r)| (l.clone(), r.clone()))
    }
}

/// Segments every whitespace-separated word of `text`. Non-final subwords
/// carry the [`CONTINUATION`] suffix.
pub fn apply_bpe(text: &str, merges: &MergeTable) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut symbols = merges.segment_word(word);
        let last = symbols.len() - 1;
        for (i, s) in symbols.iter_mut().enumerate() {
            if i == last {
                let keep = s.len() - END_OF_WORD.len();
                s.truncate(keep);
            } else {
                s.push_str(CONTINUATION);
            }
        }
        out.extend(symbols);
    }
    out
}

/// Joins subwords with spaces and removes continuation boundaries.
pub fn join_subwords<S: AsRef<str>>(subwords: &[S]) -> String {
    let joined = subwords
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ");
    joined.replace("@@ ", "")
}
