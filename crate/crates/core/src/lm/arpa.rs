//! ARPA-style model files.
//!
//! The standard `\data\` and `\k-grams:` sections carry log10 probabilities
//! and backoff weights. After `\end\`, where ARPA readers stop, the file
//! carries the vocabulary and the raw full-order counts; reloading rebuilds
//! the model from those, so a reloaded model is bit-identical.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{LmConfig, NGramLM};
use crate::corpus::{TokenId, Vocabulary};
use crate::error::{Error, Result};

const MAGIC: &str = "# softaug n-gram model";

fn log10_or_floor(p: f64) -> f64 {
    if p > 0.0 {
        p.log10()
    } else {
        -99.0
    }
}

impl NGramLM {
    fn gram_text(&self, gram: &[TokenId]) -> String {
        gram.iter()
            .map(|&t| self.vocab.surface(t).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Grams listed in the `k`-gram section, sorted by ids.
    fn listed_grams(&self, k: usize) -> Vec<Vec<TokenId>> {
        if k == 1 {
            return (0..self.vocab.len())
                .map(|j| vec![TokenId::new(j as u32)])
                .collect();
        }
        let mut grams: Vec<Vec<TokenId>> = self.levels[k - 2]
            .iter()
            .flat_map(|(h, ctx)| {
                ctx.followers.iter().map(move |&(w, _)| {
                    let mut g = h.clone();
                    g.push(w);
                    g
                })
            })
            .collect();
        grams.sort();
        grams
    }

    pub fn write_arpa<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.order();
        let LmConfig {
            order,
            discount,
            alpha,
        } = self.config;
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "# order={order} discount={discount:?} alpha={alpha:?}")?;
        writeln!(w)?;
        writeln!(w, "\\data\\")?;
        let sections: Vec<Vec<Vec<TokenId>>> = (1..=n).map(|k| self.listed_grams(k)).collect();
        for (k, grams) in sections.iter().enumerate() {
            writeln!(w, "ngram {}={}", k + 1, grams.len())?;
        }
        for (k, grams) in sections.iter().enumerate() {
            let k = k + 1;
            writeln!(w)?;
            writeln!(w, "\\{k}-grams:")?;
            for g in grams {
                let (h, word) = g.split_at(k - 1);
                let lp = log10_or_floor(self.prob_given(h, word[0]));
                if k < n {
                    let bow = self.backoff_weight(g).log10();
                    writeln!(w, "{lp:.6}\t{}\t{bow:.6}", self.gram_text(g))?;
                } else {
                    writeln!(w, "{lp:.6}\t{}", self.gram_text(g))?;
                }
            }
        }
        writeln!(w)?;
        writeln!(w, "\\end\\")?;
        writeln!(w, "\\vocab\\")?;
        self.vocab.write(&mut w)?;
        writeln!(w, "\\counts\\")?;
        for (g, c) in &self.ngrams {
            writeln!(w, "{c}\t{}", self.gram_text(g))?;
        }
        Ok(())
    }

    pub fn to_arpa_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_arpa(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("model text is UTF-8")
    }

    /// Reloads a model written by [`NGramLM::write_arpa`]. `name` labels errors.
    pub fn read_arpa<R: BufRead>(r: R, name: &str) -> Result<NGramLM> {
        #[derive(PartialEq)]
        enum Section {
            Header,
            Body,
            Vocab,
            Counts,
        }
        let mut config: Option<LmConfig> = None;
        let mut section = Section::Header;
        let mut vocab_entries = Vec::new();
        let mut count_lines = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(name, e))?;
            let lineno = i + 1;
            match section {
                Section::Header => {
                    if let Some(rest) = line.strip_prefix("# order=") {
                        config = Some(parse_config(rest).ok_or_else(|| {
                            Error::parse(name, lineno, "malformed model parameters")
                        })?);
                    } else if line == "\\data\\" {
                        section = Section::Body;
                    }
                }
                Section::Body => {
                    if line == "\\end\\" {
                        section = Section::Vocab;
                    }
                }
                Section::Vocab => {
                    if line == "\\vocab\\" {
                        continue;
                    }
                    if line == "\\counts\\" {
                        section = Section::Counts;
                        continue;
                    }
                    if line.is_empty() {
                        continue;
                    }
                    let entry = crate::corpus::vocab_entry(&line)
                        .ok_or_else(|| Error::parse(name, lineno, "expected token<TAB>count"))?;
                    vocab_entries.push(entry);
                }
                Section::Counts => {
                    if line.is_empty() {
                        continue;
                    }
                    let (c, g) = line
                        .split_once('\t')
                        .ok_or_else(|| Error::parse(name, lineno, "expected count<TAB>gram"))?;
                    let c: u64 = c
                        .parse()
                        .map_err(|_| Error::parse(name, lineno, "bad count"))?;
                    count_lines.push((lineno, c, g.to_string()));
                }
            }
        }
        let config =
            config.ok_or_else(|| Error::parse(name, 0, "missing \"# order=\" header"))?;
        if section != Section::Counts {
            return Err(Error::parse(name, 0, "missing \\counts\\ section"));
        }
        let vocab =
            Vocabulary::from_entries(vocab_entries).map_err(|m| Error::parse(name, 0, m))?;
        let mut ngrams = BTreeMap::new();
        for (lineno, c, g) in count_lines {
            let gram = g
                .split(' ')
                .map(|s| vocab.id(s))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::parse(name, lineno, "gram uses unknown token"))?;
            if ngrams.insert(gram, c).is_some() {
                return Err(Error::parse(name, lineno, "duplicate gram"));
            }
        }
        NGramLM::from_ngrams(config, vocab, ngrams).map_err(|e| Error::parse(name, 0, e.to_string()))
    }
}

fn parse_config(rest: &str) -> Option<LmConfig> {
    let mut parts = rest.split_whitespace();
    let order = parts.next()?.parse().ok()?;
    let discount = parts.next()?.strip_prefix("discount=")?.parse().ok()?;
    let alpha = parts.next()?.strip_prefix("alpha=")?.parse().ok()?;
    Some(LmConfig {
        order,
        discount,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::super::train_lm;
    use super::*;
    use crate::corpus::build_vocab;

    fn model() -> (NGramLM, Vec<crate::corpus::Sentence>) {
        let text = "the cat sat\nthe dog sat down\na cat ran\n";
        let v = build_vocab(text.as_bytes(), None).unwrap();
        let corpus: Vec<_> = text.lines().map(|l| v.encode_line(l).unwrap()).collect();
        let cfg = LmConfig {
            order: 3,
            discount: 0.6,
            alpha: 0.05,
        };
        (train_lm(&corpus, &v, cfg).unwrap(), corpus)
    }

    #[test]
    fn reload_is_exact() {
        let (lm, corpus) = model();
        let text = lm.to_arpa_string();
        let back = NGramLM::read_arpa(text.as_bytes(), "mem").unwrap();
        assert_eq!(back, lm);
        assert_eq!(back.perplexity(&corpus).to_bits(), lm.perplexity(&corpus).to_bits());
        assert_eq!(back.to_arpa_string(), text);
    }

    #[test]
    fn data_section_counts_match_sections() {
        let (lm, _) = model();
        let text = lm.to_arpa_string();
        for k in 1..=3 {
            let declared: usize = text
                .lines()
                .find_map(|l| l.strip_prefix(&format!("ngram {k}=")))
                .unwrap()
                .parse()
                .unwrap();
            let header = format!("\\{k}-grams:");
            let listed = text
                .lines()
                .skip_while(|l| *l != header)
                .skip(1)
                .take_while(|l| !l.is_empty())
                .count();
            assert_eq!(declared, listed);
        }
        assert!(text.contains("# order=3 discount=0.6 alpha=0.05"));
    }

    #[test]
    fn listed_probabilities_are_model_values() {
        let (lm, _) = model();
        let text = lm.to_arpa_string();
        let line = text
            .lines()
            .skip_while(|l| *l != "\\2-grams:")
            .find(|l| l.split('\t').nth(1) == Some("the cat"))
            .unwrap();
        let lp: f64 = line.split('\t').next().unwrap().parse().unwrap();
        let v = lm.vocab();
        let p = lm.prob_given(&[v.id("the").unwrap()], v.id("cat").unwrap());
        assert!((lp - p.log10()).abs() < 1e-6);
    }

    #[test]
    fn rejects_truncated_file() {
        let (lm, _) = model();
        let text = lm.to_arpa_string();
        let cut = &text[..text.find("\\vocab\\").unwrap()];
        assert!(NGramLM::read_arpa(cut.as_bytes(), "mem").is_err());
    }
}
