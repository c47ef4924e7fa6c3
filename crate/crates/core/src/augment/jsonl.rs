//! JSON Lines encoding of soft sentences:
//! `{"toks": [id, ...], "soft": {"<pos>": {"orig": id, "p": [[id, prob], ...]}}}`.
//! `toks` holds the original id at every position; probabilities carry 12
//! significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;

use super::{Position, SoftSentence, SoftWord};
use crate::corpus::TokenId;
use crate::dist::Distribution;
use crate::error::{Error, Result};

/// Appends one JSON line (without the trailing newline) to `out`.
pub fn write_soft_line(s: &SoftSentence, out: &mut String) {
    out.push_str("{\"toks\":[");
    for (i, p) in s.positions().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{}", p.token()).unwrap();
    }
    out.push_str("],\"soft\":{");
    let mut first = true;
    for (i, p) in s.positions().iter().enumerate() {
        let Position::Soft(w) = p else { continue };
        if !first {
            out.push(',');
        }
        first = false;
        write!(out, "\"{i}\":{{\"orig\":{},\"p\":[", w.original_id).unwrap();
        let entries: Vec<(TokenId, f64)> = w.dist.entries().collect();
        for (k, (id, prob)) in entries.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "[{id},{prob:.11e}]").unwrap();
        }
        out.push_str("]}");
    }
    out.push_str("}}");
}

#[derive(Deserialize)]
struct Line {
    toks: Vec<u32>,
    #[serde(default)]
    soft: BTreeMap<String, Entry>,
}

#[derive(Deserialize)]
struct Entry {
    orig: u32,
    p: Vec<(u32, f64)>,
}

/// Parses one line written by [`write_soft_line`]. Soft words whose ids
/// run `0, 1, 2, ...` are restored as dense distributions.
pub fn parse_soft_line(line: &str) -> Result<SoftSentence> {
    let parsed: Line =
        serde_json::from_str(line).map_err(|e| Error::Format(format!("soft line: {e}")))?;
    let mut positions: Vec<Position> = parsed
        .toks
        .iter()
        .map(|&t| Position::Hard(TokenId::new(t)))
        .collect();
    for (key, entry) in parsed.soft {
        let pos: usize = key
            .parse()
            .map_err(|_| Error::Format(format!("bad soft position {key:?}")))?;
        let slot = positions
            .get_mut(pos)
            .ok_or_else(|| Error::Format(format!("soft position {pos} beyond sentence")))?;
        let dense = entry.p.len() > 1
            && entry.p.iter().enumerate().all(|(i, &(id, _))| id as usize == i);
        let dist = if dense {
            Distribution::Dense(entry.p.iter().map(|&(_, p)| p).collect())
        } else {
            Distribution::Sparse(
                entry
                    .p
                    .iter()
                    .map(|&(id, p)| (TokenId::new(id), p))
                    .collect(),
            )
        };
        *slot = Position::Soft(SoftWord {
            dist,
            original_id: TokenId::new(entry.orig),
        });
    }
    Ok(SoftSentence::new(positions))
}
