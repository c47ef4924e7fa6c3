//! Sweep output files.
//!
//! `sweep.csv` holds one accuracy per cell and `timing.csv` the matching
//! wall-clock seconds. Every file except `timing.csv` is a pure function of
//! the spec. `summary.csv` has mean and sample standard deviation
//! per (strategy, gamma), `pivot.csv` lays the means out as a strategy by
//! gamma table with the best gamma column last, and `report.txt` states
//! whether the ordering claims hold on this run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sweep::{CellResult, SweepResult};
use crate::augment::Strategy;
use crate::error::{Error, Result};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PIVOT_FILE: &str = "pivot.csv";
pub const REPORT_FILE: &str = "report.txt";

const SWEEP_HEADER: &str = "strategy,gamma,rep,accuracy";
const TIMING_HEADER: &str = "strategy,gamma,rep,seconds";

/// Soft may trail base by at most this much at `CLAIM_GAMMA`.
pub const SOFT_MARGIN: f64 = 0.02;
pub const CLAIM_GAMMA: f64 = 0.15;

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in &result.rows {
        let _ = writeln!(s, "{},{},{},{}", r.strategy, r.gamma, r.rep, r.accuracy);
    }
    s
}

pub fn timing_csv(result: &SweepResult) -> String {
    let mut s = String::from(TIMING_HEADER);
    s.push('\n');
    for r in &result.rows {
        let _ = writeln!(s, "{},{},{},{}", r.strategy, r.gamma, r.rep, r.seconds);
    }
    s
}

pub fn summary_csv(result: &SweepResult) -> String {
    let mut s = String::from("strategy,gamma,reps,mean,sd\n");
    for c in result.summaries() {
        let _ = writeln!(s, "{},{},{},{:.6},{:.6}", c.strategy, c.gamma, c.reps, c.mean, c.sd);
    }
    s
}

pub fn pivot_csv(result: &SweepResult) -> String {
    let gammas = result.gammas();
    let mut s = String::from("strategy");
    for g in &gammas {
        let _ = write!(s, ",{g}");
    }
    s.push_str(",best\n");
    for strategy in result.strategies() {
        s.push_str(strategy.name());
        let mut best = f64::NEG_INFINITY;
        for &g in &gammas {
            match result.mean_accuracy(strategy, g) {
                Some(m) => {
                    best = best.max(m);
                    let _ = write!(s, ",{m:.6}");
                }
                None => s.push(','),
            }
        }
        let _ = writeln!(s, ",{best:.6}");
    }
    s
}

/// One line per claim, each ending in `holds` or `does not hold`.
pub fn claims(result: &SweepResult) -> Vec<String> {
    let mut out = Vec::new();
    let verdict = |ok: bool| if ok { "holds" } else { "does not hold" };
    let gammas = result.gammas();

    let zero: Vec<f64> = result
        .strategies()
        .into_iter()
        .filter_map(|s| result.mean_accuracy(s, 0.0))
        .collect();
    if zero.len() > 1 {
        let equal = zero.iter().all(|m| m.to_bits() == zero[0].to_bits());
        out.push(format!("gamma=0 accuracy identical across strategies: {}", verdict(equal)));
    }

    if let (Some(soft), Some(base)) = (
        result.mean_accuracy(Strategy::Soft, CLAIM_GAMMA),
        result.mean_accuracy(Strategy::Base, CLAIM_GAMMA),
    ) {
        out.push(format!(
            "soft at gamma={CLAIM_GAMMA} ({soft:.4}) >= base ({base:.4}) - {SOFT_MARGIN}: {}",
            verdict(soft >= base - SOFT_MARGIN)
        ));
    }

    let discrete: Vec<Strategy> = result
        .strategies()
        .into_iter()
        .filter(|s| !matches!(s, Strategy::Base | Strategy::Soft))
        .collect();
    if result.strategies().contains(&Strategy::Soft) && !discrete.is_empty() {
        let positive: Vec<f64> = gammas.iter().copied().filter(|&g| g > 0.0).collect();
        let soft_best = positive.iter().all(|&g| {
            let soft = result.mean_accuracy(Strategy::Soft, g).unwrap_or(f64::NEG_INFINITY);
            discrete
                .iter()
                .filter_map(|&s| result.mean_accuracy(s, g))
                .all(|m| soft >= m)
        });
        out.push(format!(
            "soft at least as accurate as every discrete strategy at every gamma > 0: {}",
            verdict(soft_best)
        ));
    }

    if result.strategies().contains(&Strategy::Base) {
        let high: Vec<f64> = gammas.iter().copied().filter(|&g| g > CLAIM_GAMMA).collect();
        for &s in discrete.iter().filter(|_| !high.is_empty()) {
            let drops = high.iter().all(|&g| {
                match (result.mean_accuracy(s, g), result.mean_accuracy(Strategy::Base, g)) {
                    (Some(m), Some(base)) => m < base,
                    _ => false,
                }
            });
            out.push(format!("{s} below base for gamma > {CLAIM_GAMMA}: {}", verdict(drops)));
        }
    }
    out
}

pub fn report_text(result: &SweepResult) -> String {
    let mut s = format!("cells: {}\n", result.rows.len());
    let _ = writeln!(s, "\nmean accuracy (sd) per strategy and gamma:");
    for c in result.summaries() {
        let _ = writeln!(
            s,
            "  {:<10} gamma={:<5} {:.4} ({:.4})",
            c.strategy.name(),
            c.gamma,
            c.mean,
            c.sd
        );
    }
    let _ = writeln!(s, "\nclaims:");
    for c in claims(result) {
        let _ = writeln!(s, "  {c}");
    }
    s
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes every report file into `dir`, creating it if needed, and returns
/// the paths written.
pub fn emit_report(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(vec![
        write_file(dir, SWEEP_FILE, &sweep_csv(result))?,
        write_file(dir, TIMING_FILE, &timing_csv(result))?,
        write_file(dir, SUMMARY_FILE, &summary_csv(result))?,
        write_file(dir, PIVOT_FILE, &pivot_csv(result))?,
        write_file(dir, REPORT_FILE, &report_text(result))?,
    ])
}

type Key = (Strategy, u64, usize);

fn parse_rows(text: &str, name: &str, header: &str) -> Result<Vec<(Key, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => return Err(Error::parse(name, 1, format!("expected header {header:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let bad = |msg: String| Error::parse(name, i + 1, msg);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", fields.len())));
        }
        let strategy: Strategy = fields[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let gamma: f64 = fields[1].parse().map_err(|_| bad(format!("bad gamma {:?}", fields[1])))?;
        let rep: usize = fields[2].parse().map_err(|_| bad(format!("bad rep {:?}", fields[2])))?;
        let value: f64 = fields[3].parse().map_err(|_| bad(format!("bad value {:?}", fields[3])))?;
        out.push(((strategy, gamma.to_bits(), rep), value));
    }
    Ok(out)
}

/// Reads `sweep.csv` text, and `timing.csv` text if given, back into a
/// result. Cells missing from the timing file get 0 seconds.
pub fn parse_report(sweep: &str, timing: Option<&str>) -> Result<SweepResult> {
    let acc = parse_rows(sweep, SWEEP_FILE, SWEEP_HEADER)?;
    let times = match timing {
        Some(t) => parse_rows(t, TIMING_FILE, TIMING_HEADER)?,
        None => Vec::new(),
    };
    let rows = acc
        .into_iter()
        .map(|((strategy, gamma, rep), accuracy)| CellResult {
            strategy,
            gamma: f64::from_bits(gamma),
            rep,
            accuracy,
            seconds: times
                .iter()
                .find(|(k, _)| *k == (strategy, gamma, rep))
                .map_or(0.0, |(_, s)| *s),
        })
        .collect();
    Ok(SweepResult { rows })
}

/// Reads a report directory written by [`emit_report`].
pub fn read_report(dir: &Path) -> Result<SweepResult> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
    };
    let sweep = read(SWEEP_FILE)?;
    let timing = read(TIMING_FILE).ok();
    parse_report(&sweep, timing.as_deref())
}
