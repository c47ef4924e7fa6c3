//! Command-line front end: BPE, vocabularies, language models, augmentation
//! and sweeps. Exit status is 0 on success, 2 for bad flags or
//! configuration, and 1 for unreadable or invalid data.

mod io;

use std::collections::HashMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use softaug::augment::{augment_sentence, write_soft_line, AugmentStats, Augmented, Resources};
use softaug::corpus::{apply_bpe, join_subwords, learn_bpe};
use softaug::harness::{
    emit_report, parse_sweep_spec, pivot_csv, render_sweep_spec, report_text, SweepSpec,
};
use softaug::lm::train_lm;
use softaug::softmix::{grad_check, random_instance, PASS_THRESHOLD};
use softaug::{
    AugmentConfig, Distribution, Error, LmConfig, MergeTable, NGramLM, Sentence, Strategy,
    TokenId, Vocabulary,
};

use io::{Lines, Output};

/// Lines handed to the worker pool at once by `augment`.
const CHUNK_LINES: usize = 4096;

#[derive(Parser)]
#[command(name = "softaug", version, about = "Soft contextual data augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn BPE merges from one or more corpora (joint when repeated).
    TrainBpe(TrainBpeArgs),
    /// Segment a corpus with learned merges.
    ApplyBpe(ApplyBpeArgs),
    /// Undo BPE segmentation by joining "@@" continuations.
    Detok(DetokArgs),
    /// Build a vocabulary file.
    Vocab(VocabArgs),
    /// Train an n-gram language model.
    TrainLm(TrainLmArgs),
    /// Perplexity of a corpus under a language model.
    Ppl(PplArgs),
    /// Augment a corpus with one strategy.
    Augment(AugmentArgs),
    /// Compare analytic and finite-difference gradients of the toy model.
    GradCheck(GradCheckArgs),
    /// Run a strategy by gamma sweep on the synthetic task.
    Sweep(SweepArgs),
    /// Write the synthetic task described by a sweep spec.
    MakeTask(MakeTaskArgs),
}

#[derive(Args)]
struct TrainBpeArgs {
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    merges: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ApplyBpeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DetokArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VocabArgs {
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Maximum number of non-special entries; unlimited when absent.
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainLmArgs {
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 0.75)]
    discount: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Vocabulary file; built from the inputs when absent.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PplArgs {
    #[arg(long)]
    lm: PathBuf,
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Language model; its vocabulary is used when given.
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    topk: usize,
    #[arg(long, default_value_t = 3)]
    window: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    vocab_size: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// key=value spec file; defaults apply when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct MakeTaskArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    outdir: PathBuf,
}

enum CliError {
    Usage(String),
    Data(Error),
    /// The command ran but its check failed.
    Failed,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

fn usage_err(msg: impl Display) -> CliError {
    CliError::Usage(msg.to_string())
}

/// Classifies errors from configuration checks.
fn check<T>(r: softaug::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| if e.is_usage() { usage_err(e) } else { CliError::Data(e) })
}

type CliResult = Result<(), CliError>;

fn show(cmd: &str, settings: &[(&str, String)]) {
    eprintln!("softaug {cmd}");
    for (k, v) in settings {
        eprintln!("  {k} = {v}");
    }
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string())
}

fn show_paths(ps: &[PathBuf]) -> String {
    ps.iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        eprintln!("softaug: --seed not given, using seed 0");
        0
    })
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(usage_err)
}

fn word_counts(inputs: &[PathBuf]) -> Result<(HashMap<String, u64>, bool), Error> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut any_bytes = false;
    for path in inputs {
        for line in Lines::open(path)? {
            any_bytes = true;
            for tok in line?.split_whitespace() {
                *counts.entry(tok.to_string()).or_insert(0) += 1;
            }
        }
    }
    Ok((counts, any_bytes))
}

fn vocab_from_inputs(inputs: &[PathBuf], max_size: Option<usize>) -> Result<Vocabulary, CliError> {
    let (counts, any_bytes) = word_counts(inputs)?;
    if !any_bytes {
        return Err(Error::EmptyCorpus.into());
    }
    check(Vocabulary::from_counts(counts, max_size))
}

fn read_vocab(path: &Path) -> Result<Vocabulary, Error> {
    Vocabulary::read(io::open(path)?, &path.display().to_string())
}

fn read_lm(path: &Path) -> Result<NGramLM, Error> {
    NGramLM::read_arpa(io::open(path)?, &path.display().to_string())
}

/// Non-blank lines of `inputs` encoded with `vocab`.
fn read_sentences(inputs: &[PathBuf], vocab: &Vocabulary) -> Result<Vec<Sentence>, Error> {
    let mut out = Vec::new();
    for path in inputs {
        for line in Lines::open(path)? {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(vocab.encode_line(&line)?);
            }
        }
    }
    Ok(out)
}

fn cmd_train_bpe(a: TrainBpeArgs) -> CliResult {
    show(
        "train-bpe",
        &[
            ("input", show_paths(&a.input)),
            ("merges", a.merges.to_string()),
            ("output", show_path(&a.output)),
        ],
    );
    if a.merges == 0 {
        return Err(usage_err("--merges must be at least 1"));
    }
    let (counts, _) = word_counts(&a.input)?;
    let mut words: Vec<(String, u64)> = counts.into_iter().collect();
    words.sort();
    let table = learn_bpe(words, a.merges)?;
    eprintln!("learned {} merges", table.len());
    let mut out = Output::create(a.output.as_deref())?;
    out.with(|w| table.write(w))?;
    out.finish()?;
    Ok(())
}

fn cmd_apply_bpe(a: ApplyBpeArgs) -> CliResult {
    show(
        "apply-bpe",
        &[
            ("input", a.input.display().to_string()),
            ("codes", a.codes.display().to_string()),
            ("output", show_path(&a.output)),
        ],
    );
    let table = MergeTable::read(io::open(&a.codes)?, &a.codes.display().to_string())?;
    let mut out = Output::create(a.output.as_deref())?;
    for line in Lines::open(&a.input)? {
        let mut s = apply_bpe(&line?, &table).join(" ");
        s.push('\n');
        out.write_all(s.as_bytes())?;
    }
    out.finish()?;
    Ok(())
}

fn cmd_detok(a: DetokArgs) -> CliResult {
    show(
        "detok",
        &[
            ("input", a.input.display().to_string()),
            ("output", show_path(&a.output)),
        ],
    );
    let mut out = Output::create(a.output.as_deref())?;
    for line in Lines::open(&a.input)? {
        let line = line?;
        let words: Vec<&str> = line.split_whitespace().collect();
        let mut s = join_subwords(&words);
        s.push('\n');
        out.write_all(s.as_bytes())?;
    }
    out.finish()?;
    Ok(())
}

fn cmd_vocab(a: VocabArgs) -> CliResult {
    show(
        "vocab",
        &[
            ("input", show_paths(&a.input)),
            (
                "max-size",
                a.max_size.map_or("unlimited".to_string(), |m| m.to_string()),
            ),
            ("output", show_path(&a.output)),
        ],
    );
    if a.max_size == Some(0) {
        return Err(usage_err("--max-size must be positive"));
    }
    let vocab = vocab_from_inputs(&a.input, a.max_size)?;
    let mut out = Output::create(a.output.as_deref())?;
    out.with(|w| vocab.write(w))?;
    out.finish()?;
    Ok(())
}

fn cmd_train_lm(a: TrainLmArgs) -> CliResult {
    let config = LmConfig {
        order: a.order,
        discount: a.discount,
        alpha: a.alpha,
    };
    show(
        "train-lm",
        &[
            ("input", show_paths(&a.input)),
            ("order", a.order.to_string()),
            ("discount", a.discount.to_string()),
            ("alpha", a.alpha.to_string()),
            (
                "vocab",
                a.vocab
                    .as_ref()
                    .map_or("<built from input>".to_string(), |p| p.display().to_string()),
            ),
            ("output", show_path(&a.output)),
        ],
    );
    check(config.validate())?;
    let vocab = match &a.vocab {
        Some(p) => read_vocab(p)?,
        None => vocab_from_inputs(&a.input, None)?,
    };
    let corpus = read_sentences(&a.input, &vocab)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    let lm = train_lm(&corpus, &vocab, config)?;
    let mut out = Output::create(a.output.as_deref())?;
    out.with(|w| lm.write_arpa(w))?;
    out.finish()?;
    Ok(())
}

fn cmd_ppl(a: PplArgs) -> CliResult {
    show(
        "ppl",
        &[
            ("lm", a.lm.display().to_string()),
            ("input", a.input.display().to_string()),
        ],
    );
    let lm = read_lm(&a.lm)?;
    let corpus = read_sentences(std::slice::from_ref(&a.input), lm.vocab())?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    println!("{:.4}", lm.perplexity(&corpus));
    Ok(())
}

enum AugmentedLine {
    Verbatim,
    Text(String),
}

fn augment_line(
    line: &str,
    index: u64,
    vocab: &Vocabulary,
    config: &AugmentConfig,
    res: &Resources<'_>,
) -> softaug::Result<(AugmentedLine, AugmentStats)> {
    if line.trim().is_empty() {
        return Ok((AugmentedLine::Verbatim, AugmentStats::default()));
    }
    let sentence = vocab.encode_line(line)?;
    let (aug, stats) = augment_sentence(&sentence, index, config, res)?;
    let out = match aug {
        Augmented::Hard(s) if s == sentence => AugmentedLine::Verbatim,
        Augmented::Hard(s) => AugmentedLine::Text(vocab.render(s.tokens())?),
        Augmented::Soft(s) => {
            let mut text = String::new();
            write_soft_line(&s, &mut text);
            AugmentedLine::Text(text)
        }
    };
    Ok((out, stats))
}

fn cmd_augment(a: AugmentArgs) -> CliResult {
    let seed = resolve_seed(a.seed);
    let config = AugmentConfig {
        strategy: a.strategy,
        gamma: a.gamma,
        window_k: a.window,
        topk: a.topk,
        seed,
    };
    show(
        "augment",
        &[
            ("input", a.input.display().to_string()),
            ("strategy", a.strategy.to_string()),
            ("gamma", a.gamma.to_string()),
            ("seed", seed.to_string()),
            (
                "lm",
                a.lm.as_ref()
                    .map_or("<none>".to_string(), |p| p.display().to_string()),
            ),
            ("topk", a.topk.to_string()),
            ("window", a.window.to_string()),
            ("output", show_path(&a.output)),
            ("threads", a.threads.to_string()),
        ],
    );
    check(config.validate())?;
    if a.strategy.needs_lm() && a.lm.is_none() {
        return Err(usage_err(format!("strategy {} requires --lm", a.strategy)));
    }
    let lm = a.lm.as_deref().map(read_lm).transpose()?;
    let vocab = match &lm {
        Some(lm) => lm.vocab().clone(),
        None => vocab_from_inputs(std::slice::from_ref(&a.input), None)?,
    };
    let unigram = if a.strategy == Strategy::Smooth {
        let counts: Vec<u64> = vocab
            .entries()
            .iter()
            .enumerate()
            .map(|(i, (_, c))| if TokenId::new(i as u32).is_special() { 0 } else { *c })
            .collect();
        Some(Distribution::from_counts(&counts).ok_or(Error::EmptyCorpus)?)
    } else {
        None
    };
    let res = Resources {
        lm: lm.as_ref(),
        unigram: unigram.as_ref(),
    };

    let workers = pool(a.threads)?;
    let mut out = Output::create(a.output.as_deref())?;
    let mut lines = Lines::open(&a.input)?;
    let mut stats = AugmentStats::default();
    let mut next_index: u64 = 0;
    loop {
        let chunk: Vec<String> = lines
            .by_ref()
            .take(CHUNK_LINES)
            .collect::<Result<_, _>>()?;
        if chunk.is_empty() {
            break;
        }
        let first = next_index;
        let results: Vec<(AugmentedLine, AugmentStats)> = workers.install(|| {
            chunk
                .par_iter()
                .enumerate()
                .map(|(i, line)| augment_line(line, first + i as u64, &vocab, &config, &res))
                .collect::<softaug::Result<_>>()
        })?;
        next_index += chunk.len() as u64;
        for (line, (aug, st)) in chunk.iter().zip(results) {
            stats += st;
            match aug {
                AugmentedLine::Verbatim => out.write_all(line.as_bytes())?,
                AugmentedLine::Text(t) => out.write_all(t.as_bytes())?,
            }
            out.write_all(b"\n")?;
        }
    }
    out.finish()?;
    eprintln!(
        "replacement rate: {:.4} ({} of {} tokens)",
        stats.rate(),
        stats.selected,
        stats.eligible
    );
    Ok(())
}

fn cmd_grad_check(a: GradCheckArgs) -> CliResult {
    let seed = resolve_seed(a.seed);
    show(
        "grad-check",
        &[
            ("seed", seed.to_string()),
            ("vocab-size", a.vocab_size.to_string()),
            ("dim", a.dim.to_string()),
            ("classes", a.classes.to_string()),
        ],
    );
    if a.vocab_size < TokenId::NUM_SPECIALS + 2 {
        return Err(usage_err(format!(
            "--vocab-size must be at least {}",
            TokenId::NUM_SPECIALS + 2
        )));
    }
    if a.dim == 0 || a.classes < 2 {
        return Err(usage_err("--dim must be positive and --classes at least 2"));
    }
    let (model, batch) = random_instance(seed, a.vocab_size, a.dim, a.classes);
    let report = grad_check(&model, &batch)?;
    println!("checked parameters: {}", report.checked);
    println!("embedding max relative error: {:.3e}", report.embedding_max_rel);
    println!("weights max relative error: {:.3e}", report.weights_max_rel);
    println!("bias max relative error: {:.3e}", report.bias_max_rel);
    println!(
        "result: {} (threshold {PASS_THRESHOLD:e})",
        if report.pass { "pass" } else { "fail" }
    );
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}

fn load_spec(path: Option<&Path>) -> Result<SweepSpec, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    let spec = check(parse_sweep_spec(&text))?;
    let has_seed = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .any(|(k, _)| k.trim() == "seed");
    if !has_seed {
        eprintln!("softaug: spec has no seed, using seed 0");
    }
    Ok(spec)
}

fn show_spec(cmd: &str, spec: &SweepSpec, extra: &[(&str, String)]) {
    let rendered = render_sweep_spec(spec);
    let mut settings: Vec<(&str, String)> = rendered
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k, v.to_string()))
        .collect();
    settings.extend(extra.iter().cloned());
    show(cmd, &settings);
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let spec = load_spec(a.spec.as_deref())?;
    show_spec(
        "sweep",
        &spec,
        &[
            ("outdir", a.outdir.display().to_string()),
            ("threads", a.threads.to_string()),
        ],
    );
    let task = check(spec.make_task())?;
    let lm = spec.train_task_lm(&task)?;
    let workers = pool(a.threads)?;
    let result = workers.install(|| softaug::harness::run_sweep(&spec, &task, &lm))?;
    create_dir(&a.outdir)?;
    for path in emit_report(&result, &a.outdir)? {
        eprintln!("wrote {}", path.display());
    }
    eprint!("{}", report_text(&result));
    print!("{}", pivot_csv(&result));
    Ok(())
}

fn cmd_make_task(a: MakeTaskArgs) -> CliResult {
    let spec = load_spec(a.spec.as_deref())?;
    show_spec("make-task", &spec, &[("outdir", a.outdir.display().to_string())]);
    let task = check(spec.make_task())?;
    create_dir(&a.outdir)?;

    let mut corpus = Output::create(Some(&a.outdir.join("corpus.txt")))?;
    for s in &task.sentences {
        let mut line = task.vocab.render(s.tokens())?;
        line.push('\n');
        corpus.write_all(line.as_bytes())?;
    }
    corpus.finish()?;

    let mut labels = Output::create(Some(&a.outdir.join("labels.txt")))?;
    for l in &task.labels {
        labels.write_all(format!("{l}\n").as_bytes())?;
    }
    labels.finish()?;

    let mut vocab = Output::create(Some(&a.outdir.join("vocab.txt")))?;
    vocab.with(|w| task.vocab.write(w))?;
    vocab.finish()?;
    eprintln!(
        "wrote {} sentences to {}",
        task.sentences.len(),
        a.outdir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::TrainBpe(a) => cmd_train_bpe(a),
        Command::ApplyBpe(a) => cmd_apply_bpe(a),
        Command::Detok(a) => cmd_detok(a),
        Command::Vocab(a) => cmd_vocab(a),
        Command::TrainLm(a) => cmd_train_lm(a),
        Command::Ppl(a) => cmd_ppl(a),
        Command::Augment(a) => cmd_augment(a),
        Command::GradCheck(a) => cmd_grad_check(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::MakeTask(a) => cmd_make_task(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("softaug: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(e)) => {
            eprintln!("softaug: error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Failed) => ExitCode::from(1),
    }
}
