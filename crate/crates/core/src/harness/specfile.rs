//! `key=value` sweep spec files.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Keys not present keep their defaults; unknown keys are
//! rejected.
//!
//! ```text
//! strategies = base, soft
//! gammas = 0, 0.1
//! reps = 3
//! seed = 7
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use super::sweep::SweepSpec;
use crate::augment::Strategy;
use crate::error::{Error, Result};

pub const KEYS: [&str; 19] = [
    "strategies",
    "gammas",
    "reps",
    "seed",
    "vocab_size",
    "classes",
    "sentences",
    "length",
    "holdout",
    "copies",
    "dim",
    "lr",
    "steps",
    "batch_size",
    "topk",
    "window",
    "order",
    "discount",
    "alpha",
];

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| scalar(key, v))
        .collect()
}

/// Parses a spec file over the defaults and validates the result.
pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec> {
    let mut spec = SweepSpec::default();
    let mut seen: Vec<&str> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key {key:?}", i + 1)));
        }
        if seen.contains(&key) {
            return Err(Error::Config(format!("line {}: duplicate key {key:?}", i + 1)));
        }
        seen.push(key);
        match key {
            "strategies" => {
                spec.strategies = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(|v| v.parse::<Strategy>().map_err(|e| Error::Config(e.to_string())))
                    .collect::<Result<_>>()?
            }
            "gammas" => spec.gammas = list(key, value)?,
            "reps" => spec.reps = scalar(key, value)?,
            "seed" => spec.seed = scalar(key, value)?,
            "vocab_size" => spec.task.vocab_size = scalar(key, value)?,
            "classes" => spec.task.classes = scalar(key, value)?,
            "sentences" => spec.task.sentences = scalar(key, value)?,
            "length" => spec.task.length = scalar(key, value)?,
            "holdout" => spec.holdout = scalar(key, value)?,
            "copies" => spec.copies = scalar(key, value)?,
            "dim" => spec.dim = scalar(key, value)?,
            "lr" => spec.train.lr = scalar(key, value)?,
            "steps" => spec.train.steps = scalar(key, value)?,
            "batch_size" => spec.train.batch_size = scalar(key, value)?,
            "topk" => spec.topk = scalar(key, value)?,
            "window" => spec.window = scalar(key, value)?,
            "order" => spec.lm.order = scalar(key, value)?,
            "discount" => spec.lm.discount = scalar(key, value)?,
            "alpha" => spec.lm.alpha = scalar(key, value)?,
            _ => unreachable!("key list checked above"),
        }
    }
    spec.validate()?;
    if spec.task.classes == 0 || spec.task.sentences < 2 || spec.task.length == 0 {
        return Err(Error::Config(
            "classes and length must be positive and sentences at least 2".into(),
        ));
    }
    if spec.task.vocab_size < spec.task.classes {
        return Err(Error::Config(format!(
            "vocab_size {} is smaller than classes {}",
            spec.task.vocab_size, spec.task.classes
        )));
    }
    Ok(spec)
}

/// Every key with its resolved value, in [`KEYS`] order. Parsing the output
/// gives back `spec`.
pub fn render_sweep_spec(spec: &SweepSpec) -> String {
    let join = |v: Vec<String>| v.join(",");
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    put("strategies", join(spec.strategies.iter().map(|s| s.name().to_string()).collect()));
    put("gammas", join(spec.gammas.iter().map(|g| g.to_string()).collect()));
    put("reps", spec.reps.to_string());
    put("seed", spec.seed.to_string());
    put("vocab_size", spec.task.vocab_size.to_string());
    put("classes", spec.task.classes.to_string());
    put("sentences", spec.task.sentences.to_string());
    put("length", spec.task.length.to_string());
    put("holdout", spec.holdout.to_string());
    put("copies", spec.copies.to_string());
    put("dim", spec.dim.to_string());
    put("lr", spec.train.lr.to_string());
    put("steps", spec.train.steps.to_string());
    put("batch_size", spec.train.batch_size.to_string());
    put("topk", spec.topk.to_string());
    put("window", spec.window.to_string());
    put("order", spec.lm.order.to_string());
    put("discount", spec.lm.discount.to_string());
    put("alpha", spec.lm.alpha.to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_sweep_spec("").unwrap(), SweepSpec::default());
        assert_eq!(parse_sweep_spec("# nothing\n\n").unwrap(), SweepSpec::default());
    }

    #[test]
    fn overrides() {
        let spec = parse_sweep_spec("strategies = base, soft\ngammas=0,0.1\nreps=2\nseed=9\nlr=0.25\n").unwrap();
        assert_eq!(spec.strategies, vec![Strategy::Base, Strategy::Soft]);
        assert_eq!(spec.gammas, vec![0.0, 0.1]);
        assert_eq!(spec.reps, 2);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.train.lr, 0.25);
    }

    #[test]
    fn render_round_trips() {
        let spec = parse_sweep_spec("strategies=swap,blank\ngammas=0.05\nreps=4\nseed=3\ndiscount=0.5\n").unwrap();
        assert_eq!(parse_sweep_spec(&render_sweep_spec(&spec)).unwrap(), spec);
        let d = SweepSpec::default();
        assert_eq!(parse_sweep_spec(&render_sweep_spec(&d)).unwrap(), d);
    }

    #[test]
    fn errors_are_usage_errors() {
        for bad in [
            "strategies=",
            "strategies=base,frobnicate",
            "gammas=",
            "gammas=1.5",
            "reps=0",
            "colour=blue",
            "reps",
            "reps=1\nreps=2",
            "seed=-1",
            "discount=1.0",
            "vocab_size=10\nclasses=20",
        ] {
            let e = parse_sweep_spec(bad).unwrap_err();
            assert!(e.is_usage(), "{bad:?}: {e}");
        }
    }
}
