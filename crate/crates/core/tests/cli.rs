use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use softaug::corpus::build_vocab;
use softaug::harness::{parse_sweep_spec, run_sweep, sweep_csv};
use softaug::lm::train_lm;
use softaug::{LmConfig, NGramLM, SplitMix64, Strategy};

use rand::Rng;
use tempfile::TempDir;

fn softaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softaug"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = softaug(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TEXT: &str = "the cat sat on the mat\nthe dog sat on the log\na cat saw a dog\nthe mat was red\nlow lower lowest newer newest\n";

/// Random corpus of `tokens` whitespace tokens over a small alphabet.
fn random_corpus(tokens: usize, seed: u64) -> String {
    let mut rng = SplitMix64::new(seed);
    let mut out = String::new();
    let mut left = tokens;
    while left > 0 {
        let len = rng.gen_range(3..15).min(left);
        let words: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..60))).collect();
        out.push_str(&words.join(" "));
        out.push('\n');
        left -= len;
    }
    out
}

#[test]
fn bpe_pipeline_round_trips_and_is_repeatable() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "in.txt");
    fs::write(&input, TEXT).unwrap();
    let codes = path(&dir, "codes");
    ok(&["train-bpe", "--input", s(&input), "--merges", "15", "--output", s(&codes)]);
    let text = fs::read_to_string(&codes).unwrap();
    assert!(text.starts_with("#bpe v1 "));
    assert!(text.lines().count() - 1 <= 15);

    let again = path(&dir, "codes2");
    ok(&["train-bpe", "--input", s(&input), "--merges", "15", "--output", s(&again)]);
    assert_eq!(fs::read(&codes).unwrap(), fs::read(&again).unwrap());

    let seg = path(&dir, "seg");
    ok(&["apply-bpe", "--input", s(&input), "--codes", s(&codes), "--output", s(&seg)]);
    assert!(fs::read_to_string(&seg).unwrap().contains("@@"));
    let back = path(&dir, "back");
    ok(&["detok", "--input", s(&seg), "--output", s(&back)]);
    assert_eq!(fs::read_to_string(&back).unwrap(), TEXT);
}

#[test]
fn vocab_counts_and_ties() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "in.txt");
    fs::write(&input, "b a\na\n").unwrap();
    let out = ok(&["vocab", "--input", s(&input)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["<s>\t0", "</s>\t0", "<unk>\t0", "<blank>\t0", "a\t2", "b\t1"]);

    let empty = path(&dir, "empty.txt");
    fs::write(&empty, "").unwrap();
    let out = softaug(&["vocab", "--input", s(&empty)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty corpus"));

    let out = softaug(&["vocab", "--input", s(&input), "--max-size", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lm_training_and_perplexity() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "in.txt");
    fs::write(&input, TEXT).unwrap();
    let lm_path = path(&dir, "lm.arpa");
    ok(&["train-lm", "--input", s(&input), "--output", s(&lm_path)]);
    let out = ok(&["ppl", "--lm", s(&lm_path), "--input", s(&input)]);
    let printed = String::from_utf8(out.stdout).unwrap();
    let (int, frac) = printed.trim().split_once('.').unwrap();
    assert_eq!(frac.len(), 4);
    assert!(int.parse::<u32>().is_ok());
    let ppl: f64 = printed.trim().parse().unwrap();

    let vocab = build_vocab(TEXT.as_bytes(), None).unwrap();
    let corpus: Vec<_> = TEXT.lines().map(|l| vocab.encode_line(l).unwrap()).collect();
    let lm = train_lm(&corpus, &vocab, LmConfig::default()).unwrap();
    let direct = lm.perplexity(&corpus);
    assert_eq!(printed.trim(), format!("{direct:.4}"));
    assert!(ppl <= vocab.len() as f64);

    let reloaded =
        NGramLM::read_arpa(fs::read(&lm_path).unwrap().as_slice(), "lm").unwrap();
    assert!((reloaded.perplexity(&corpus) - direct).abs() <= 1e-9);
}

#[test]
fn usage_and_data_errors() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "in.txt");
    fs::write(&input, TEXT).unwrap();
    let code = |args: &[&str]| softaug(args).status.code();

    assert_eq!(code(&["train-lm", "--input", s(&input), "--discount", "1.0"]), Some(2));
    assert_eq!(code(&["train-lm", "--input", s(&input), "--order", "0"]), Some(2));
    assert_eq!(code(&["vocab", "--input", s(&input), "--bogus"]), Some(2));
    assert_eq!(code(&["augment", "--input", s(&input), "--strategy", "nope", "--gamma", "0.1"]), Some(2));
    assert_eq!(code(&["augment", "--input", s(&input), "--strategy", "blank", "--gamma", "1.5"]), Some(2));
    assert_eq!(code(&["augment", "--input", s(&input), "--strategy", "soft", "--gamma", "0.1"]), Some(2));
    assert_eq!(code(&["train-bpe", "--input", s(&input), "--merges", "0"]), Some(2));
    assert_eq!(code(&["grad-check", "--classes", "1"]), Some(2));

    let missing = path(&dir, "missing.txt");
    let out = softaug(&["apply-bpe", "--input", s(&missing), "--codes", s(&input)]);
    assert_eq!(out.status.code(), Some(1));
    let out = softaug(&["vocab", "--input", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));

    let bad = path(&dir, "bad.txt");
    fs::write(&bad, b"ok line\nab\xffcd\n").unwrap();
    let out = softaug(&["vocab", "--input", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("byte offset 10"), "{err}");
}

#[test]
fn resolved_configuration_goes_to_stderr() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "in.txt");
    fs::write(&input, TEXT).unwrap();
    let out = ok(&["augment", "--input", s(&input), "--strategy", "blank", "--gamma", "0.2"]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("using seed 0"));
    for key in ["strategy = blank", "gamma = 0.2", "seed = 0", "topk = 32", "window = 3"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }
    let out = ok(&["augment", "--input", s(&input), "--strategy", "blank", "--gamma", "0.2", "--seed", "4"]);
    assert!(!String::from_utf8(out.stderr).unwrap().contains("using seed 0"));
}

#[test]
fn identity_augmentations_copy_the_input() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "in.txt");
    let text = format!("{TEXT}\n  spaced   out  line \n");
    fs::write(&input, &text).unwrap();
    let lm_path = path(&dir, "lm.arpa");
    ok(&["train-lm", "--input", s(&input), "--output", s(&lm_path)]);

    let out = ok(&["augment", "--input", s(&input), "--strategy", "base", "--gamma", "0.5", "--seed", "1"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), text);
    for strategy in Strategy::ALL {
        let out = ok(&[
            "augment", "--input", s(&input), "--strategy", strategy.name(), "--gamma", "0",
            "--seed", "1", "--lm", s(&lm_path),
        ]);
        let got = String::from_utf8(out.stdout).unwrap();
        if strategy == Strategy::Soft {
            for (line, orig) in got.lines().zip(text.lines()) {
                if orig.trim().is_empty() {
                    assert_eq!(line, orig);
                } else {
                    let soft = softaug::augment::parse_soft_line(line).unwrap();
                    assert_eq!(soft.soft_count(), 0);
                }
            }
        } else {
            assert_eq!(got, text, "{strategy}");
        }
    }
}

#[test]
fn realized_rate_tracks_gamma() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "in.txt");
    fs::write(&input, random_corpus(100_000, 5)).unwrap();
    let out = ok(&["augment", "--input", s(&input), "--strategy", "blank", "--gamma", "0.1", "--seed", "2", "--output", s(&path(&dir, "o"))]);
    let err = String::from_utf8(out.stderr).unwrap();
    let rate: f64 = err
        .lines()
        .find_map(|l| l.strip_prefix("replacement rate: "))
        .and_then(|r| r.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((rate - 0.1).abs() <= 0.01, "{rate}");
}

#[test]
fn grad_check_passes_by_default() {
    let out = ok(&["grad-check"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("result: pass"), "{text}");
}

#[test]
fn sweep_command_matches_library_and_rejects_empty_strategies() {
    let dir = TempDir::new().unwrap();
    let spec_text = "strategies=base\ngammas=0\nreps=1\nseed=3\nvocab_size=40\nclasses=8\nsentences=200\nlength=5\nsteps=200\n";
    let spec_path = path(&dir, "spec.txt");
    fs::write(&spec_path, spec_text).unwrap();
    let outdir = path(&dir, "out");
    ok(&["sweep", "--spec", s(&spec_path), "--outdir", s(&outdir)]);
    for f in ["sweep.csv", "pivot.csv", "summary.csv", "timing.csv", "report.txt"] {
        assert!(outdir.join(f).exists(), "{f}");
    }
    let spec = parse_sweep_spec(spec_text).unwrap();
    let task = spec.make_task().unwrap();
    let lm = spec.train_task_lm(&task).unwrap();
    let direct = run_sweep(&spec, &task, &lm).unwrap();
    assert_eq!(fs::read_to_string(outdir.join("sweep.csv")).unwrap(), sweep_csv(&direct));

    fs::write(&spec_path, "strategies=\n").unwrap();
    let out = softaug(&["sweep", "--spec", s(&spec_path), "--outdir", s(&outdir)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn make_task_writes_corpus_and_labels() {
    let dir = TempDir::new().unwrap();
    let spec_path = path(&dir, "spec.txt");
    fs::write(&spec_path, "vocab_size=30\nclasses=6\nsentences=50\nlength=4\n").unwrap();
    let outdir = path(&dir, "task");
    ok(&["make-task", "--spec", s(&spec_path), "--outdir", s(&outdir)]);
    let corpus = fs::read_to_string(outdir.join("corpus.txt")).unwrap();
    let labels = fs::read_to_string(outdir.join("labels.txt")).unwrap();
    assert_eq!(corpus.lines().count(), 50);
    assert_eq!(labels.lines().count(), 50);
    assert!(corpus.lines().all(|l| l.split(' ').count() == 4));
    assert!(labels.lines().all(|l| l == "0" || l == "1"));
    let again = path(&dir, "task2");
    ok(&["make-task", "--spec", s(&spec_path), "--outdir", s(&again)]);
    assert_eq!(corpus, fs::read_to_string(again.join("corpus.txt")).unwrap());
}
