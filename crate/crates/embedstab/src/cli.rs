//! The `embedstab` command line. Every report is a TSV file (or stdout) with
//! a commented header carrying the tool version, seeds, parameters and input
//! hashes; `--json` adds a JSON twin with the same content.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use embedstab_core::align::{aligned_average_tree, Pairing, TreeConfig};
use embedstab_core::change::{
    classify_targets, evaluate, report_from, scored_vocabulary, semantic_change_all,
};
use embedstab_core::corpus::{dedup_lines, sample, Corpus, SamplingMode};
use embedstab_core::gaussian::{
    estimate_profile, expected_overlap, predict_p_hash1_all, predict_p_hash2_all, structure_factor,
    PredictionConfig, SigmaEstimator,
};
use embedstab_core::instability::{frequency_profile, Extrinsic, PairMoments};
use embedstab_core::overlap::{consistency, mean_overlap};
use embedstab_core::pip::{ProxySample, DEFAULT_PROXY_SIZE};
use embedstab_core::runs::{pairs, RunSet};
use embedstab_core::sgns::{train, SgnsConfig};
use embedstab_core::{analogy_score, joint_vocabulary, EmbeddingSpace};

use crate::config::KeyValues;
use crate::error::{Context, Result, ToolError};
use crate::experiment::{
    parallel_map, run_experiment, train_run, ExperimentConfig, Mode, CONFIG_KEYS,
};
use crate::io;
use crate::parallel;
use crate::pipeline::{self, ConformityConfig};
use crate::report::{Cell, Report};

#[derive(Debug, Parser)]
#[command(
    name = "embedstab",
    version,
    about = "Measure, predict and reduce run-to-run instability of word embeddings"
)]
pub struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Flat `key = value` config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Also write every report as JSON (`<out>.json`; on stdout, JSON replaces TSV).
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train skip-gram vectors: one space (`--out`) or a seeded multi-run experiment (`--out-dir`).
    Train(TrainArgs),
    /// Write a fixed, shuffled or bootstrapped document sample of a corpus.
    Sample(SampleArgs),
    /// Intrinsic and extrinsic instability (mean reduced PIP over run pairs).
    Instability(InstabilityArgs),
    /// Mean nearest-neighbor overlap p@n / j@n of targets over run pairs.
    Overlap(OverlapArgs),
    /// Gaussian-model prediction of nearest-neighbor overlap, with measured values.
    Predict(PredictArgs),
    /// PIP loss between two spaces or between all runs in a directory.
    Pip(PipArgs),
    /// Aligned tree average of several spaces.
    Average(AverageArgs),
    /// 3CosAdd analogy accuracy.
    Analogy(AnalogyArgs),
    /// Semantic change between two epoch spaces, with optional gold evaluation.
    Change(ChangeArgs),
    /// Frequency effect on semantic change (law of conformity) over epoch corpora.
    Conformity(ConformityArgs),
    /// Stability report of a run directory: one row per run pair.
    Report(ReportArgs),
}

/// Trainer flags; each falls back to the config file, then to the built-in
/// default. The number of passes is declared by each command, because
/// `conformity` uses `--epochs` for its corpus directory.
#[derive(Debug, Args)]
struct SgnsArgs {
    /// Vector dimension [default: 300].
    #[arg(long)]
    dim: Option<usize>,
    /// Maximum context window on each side [default: 5].
    #[arg(long)]
    window: Option<usize>,
    /// Negative samples per positive pair [default: 5].
    #[arg(long = "neg")]
    negatives: Option<usize>,
    /// Initial learning rate, decayed linearly per token [default: 0.025].
    #[arg(long)]
    lr: Option<f64>,
    /// Minimum corpus count for a word to be trained [default: 5].
    #[arg(long)]
    min_count: Option<u64>,
    /// Subsampling threshold t [default: 1e-5].
    #[arg(long)]
    sample: Option<f64>,
    /// Use the full window at every position instead of a random shrink.
    #[arg(long)]
    fixed_window: bool,
}

impl SgnsArgs {
    fn resolve(&self, kv: &KeyValues, epochs: Option<usize>) -> Result<SgnsConfig> {
        let d = SgnsConfig::default();
        let fixed = if self.fixed_window { Some(true) } else { None };
        Ok(SgnsConfig {
            dim: kv.pick(self.dim, "dim", d.dim)?,
            window: kv.pick(self.window, "window", d.window)?,
            negatives: kv.pick(self.negatives, "negatives", d.negatives)?,
            epochs: kv.pick(epochs, "epochs", d.epochs)?,
            initial_lr: kv.pick(self.lr, "lr", d.initial_lr)?,
            min_count: kv.pick(self.min_count, "min_count", d.min_count)?,
            subsample_t: kv.pick(self.sample, "sample", d.subsample_t)?,
            dynamic_window: !kv.pick(fixed, "fixed_window", false)?,
            seed: d.seed,
        })
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Corpus: one document per line, whitespace-tokenized.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    sgns: SgnsArgs,
    /// Passes over the corpus [default: 5].
    #[arg(long)]
    epochs: Option<usize>,
    /// Trainer seed; in experiment mode run `i` uses `seed + i` [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Lowercase the corpus while reading.
    #[arg(long)]
    lowercase: bool,
    /// Output vector file for a single run on the corpus as given; a `.freq` sidecar is written next to it.
    #[arg(long, conflicts_with_all = ["runs", "mode", "out_dir"])]
    out: Option<PathBuf>,
    /// Experiment mode: number of runs [default: 2].
    #[arg(long)]
    runs: Option<usize>,
    /// Experiment mode: document sampling per run [default: shuffled].
    #[arg(long)]
    mode: Option<Mode>,
    /// Experiment mode: directory for `run_XXX.vec` files and `manifest.json` [default: runs].
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// fixed, shuffled or bootstrapped.
    #[arg(long, default_value = "shuffled")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop repeated documents (first occurrence kept) before sampling.
    #[arg(long)]
    dedup: bool,
    #[arg(long)]
    lowercase: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProxyArgs {
    /// Size of the proxy vocabulary sampled from the joint vocabulary [default: 20000].
    #[arg(long)]
    proxy_size: Option<usize>,
    /// Proxy sampling seed (also the base training seed when training) [default: 0].
    #[arg(long)]
    seed: Option<u64>,
}

impl ProxyArgs {
    fn resolve(&self, kv: &KeyValues) -> Result<(usize, u64)> {
        let size = kv.pick(self.proxy_size, "proxy_size", DEFAULT_PROXY_SIZE)?;
        if size == 0 {
            return Err(ToolError::Usage("proxy size must be >= 1".into()));
        }
        let seed = match self.seed {
            Some(s) => s,
            None => match kv.get("proxy_seed")? {
                Some(s) => s,
                None => kv.pick(None, "seed", 0)?,
            },
        };
        Ok((size, seed))
    }
}

#[derive(Debug, Args)]
struct InstabilityArgs {
    /// Directory of shuffled-corpus runs (`*.vec`).
    #[arg(long, conflicts_with = "corpus")]
    shuffled: Option<PathBuf>,
    /// Directory of bootstrapped-corpus runs; enables extrinsic instability.
    #[arg(long, conflicts_with = "bootstrap")]
    bootstrapped: Option<PathBuf>,
    /// Train the runs from this corpus instead of reading directories.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// With `--corpus`: also train bootstrapped runs.
    #[arg(long, requires = "corpus")]
    bootstrap: bool,
    /// With `--corpus`: runs per sampling mode [default: 2]. Two runs on independently
    /// shuffled corpora already pin the intrinsic instability down well: the PIP loss
    /// averages over |V'|² entries, so its pair-to-pair spread is small.
    #[arg(long, requires = "corpus")]
    runs: Option<usize>,
    #[arg(long, requires = "corpus")]
    lowercase: bool,
    #[command(flatten)]
    sgns: SgnsArgs,
    /// Passes over the corpus [default: 5].
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    proxy: ProxyArgs,
    /// Words for word-wise instability (one per line).
    #[arg(long, requires = "wordwise_out")]
    words: Option<PathBuf>,
    /// Word-wise report (needs `--words`).
    #[arg(long, requires = "words")]
    wordwise_out: Option<PathBuf>,
    /// Word-wise intrinsic instability by frequency batch (needs `--words` and frequency sidecars).
    #[arg(long, requires = "words")]
    profile_out: Option<PathBuf>,
    /// Frequency batches for `--profile-out`.
    #[arg(long, default_value_t = 20)]
    batches: usize,
    /// Summary report (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OverlapArgs {
    /// Directory of runs (`*.vec`).
    #[arg(long)]
    runs: PathBuf,
    /// Target words (one per line).
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Directory of runs (`*.vec`) from which the Gaussian profiles are estimated.
    #[arg(long)]
    runs: PathBuf,
    /// Target words (one per line).
    #[arg(long)]
    targets: PathBuf,
    /// Query words (one per line) [default: the whole joint vocabulary].
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Estimate σ with the `r − 1` denominator instead of maximum likelihood.
    #[arg(long)]
    unbiased: bool,
    /// Competitors less likely than this to outrank a query are ignored.
    #[arg(long, default_value_t = 1e-5)]
    prune: f64,
    /// Per-query table: μ, σ, predicted p#1/p#2 and measured top-1/top-2 frequency.
    #[arg(long)]
    profile_out: Option<PathBuf>,
    /// Per-target report (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipArgs {
    #[arg(long, requires = "b", conflicts_with = "runs")]
    a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    /// Directory of runs; every unordered pair is compared.
    #[arg(long)]
    runs: Option<PathBuf>,
    #[command(flatten)]
    proxy: ProxyArgs,
    /// Words for word-wise PIP (one per line).
    #[arg(long, requires = "wordwise_out")]
    words: Option<PathBuf>,
    #[arg(long, requires = "words")]
    wordwise_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PairingArg {
    Given,
    Seeded,
}

#[derive(Debug, Args)]
struct AverageArgs {
    /// Vector files to average (normalized before averaging).
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Output vector file.
    #[arg(long)]
    out: PathBuf,
    /// Keep raw intermediate averages instead of renormalizing them.
    #[arg(long)]
    no_renorm: bool,
    /// How spaces are paired at each tree level.
    #[arg(long, value_enum, default_value = "given")]
    pairing: PairingArg,
    /// Seed for `--pairing seeded`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AnalogyArgs {
    #[arg(long)]
    vectors: PathBuf,
    /// Questions `a b c d` per line; `:` section headers and `#` comments are skipped.
    #[arg(long)]
    dataset: PathBuf,
    /// Evaluate over these words only (one per line).
    #[arg(long, conflicts_with = "top")]
    restrict: Option<PathBuf>,
    /// Evaluate over the N most frequent words (file order without a `.freq` sidecar).
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChangeArgs {
    /// Earlier epoch vectors (with optional `.freq` sidecar).
    #[arg(long)]
    t1: PathBuf,
    /// Later epoch vectors.
    #[arg(long)]
    t2: PathBuf,
    /// Target words (one per line).
    #[arg(long)]
    targets: PathBuf,
    /// Gold binary labels: `word<TAB>0|1`.
    #[arg(long)]
    gold_binary: Option<PathBuf>,
    /// Gold graded scores: `word<TAB>score`.
    #[arg(long)]
    gold_graded: Option<PathBuf>,
    /// Words counted at least this often in both epochs form the vocabulary the
    /// threshold statistics are computed over (needs `.freq` sidecars when > 1).
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConformityArgs {
    /// Directory of epoch corpora, one file per epoch in file-name order.
    #[arg(long)]
    epochs: PathBuf,
    /// Shuffled runs trained per epoch.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Largest averaging size; powers of two below it are reported too.
    #[arg(long, default_value_t = 1)]
    avg: usize,
    /// Also fit the randomized control: all epochs pooled and re-split into this many batches.
    #[arg(long, value_name = "BATCHES")]
    control: Option<usize>,
    /// Minimum count in both epochs of a transition for a word to be observed.
    #[arg(long, default_value_t = 500)]
    obs_min_count: u64,
    /// Restrict observations to these words (one per line).
    #[arg(long)]
    words: Option<PathBuf>,
    #[command(flatten)]
    sgns: SgnsArgs,
    /// Trainer passes over each corpus [default: 5].
    #[arg(long)]
    train_epochs: Option<usize>,
    /// Base seed for training and the control split [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lowercase: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory of runs (`*.vec`).
    #[arg(long)]
    runs: PathBuf,
    #[command(flatten)]
    proxy: ProxyArgs,
    /// Second, independent run directory: adds the Spearman consistency of per-target p@n.
    #[arg(long, requires = "targets")]
    consistency: Option<PathBuf>,
    /// Targets for `--consistency`.
    #[arg(long, requires = "consistency")]
    targets: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("embedstab: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    kv: KeyValues,
    jobs: usize,
    json: bool,
}

pub fn execute(cli: &Cli) -> Result<()> {
    let kv = match &cli.global.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::default(),
    };
    let unknown = kv.unknown_keys(CONFIG_KEYS);
    if !unknown.is_empty() {
        return Err(ToolError::Usage(format!(
            "unknown config keys: {}",
            unknown.join(", ")
        )));
    }
    let jobs = kv.pick(cli.global.jobs, "jobs", 1usize)?;
    if jobs == 0 {
        return Err(ToolError::Usage("jobs must be >= 1".into()));
    }
    let ctx = Ctx {
        kv,
        jobs,
        json: cli.global.json,
    };
    match &cli.command {
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Sample(a) => cmd_sample(a),
        Command::Instability(a) => cmd_instability(&ctx, a),
        Command::Overlap(a) => cmd_overlap(&ctx, a),
        Command::Predict(a) => cmd_predict(&ctx, a),
        Command::Pip(a) => cmd_pip(&ctx, a),
        Command::Average(a) => cmd_average(a),
        Command::Analogy(a) => cmd_analogy(&ctx, a),
        Command::Change(a) => cmd_change(&ctx, a),
        Command::Conformity(a) => cmd_conformity(&ctx, a),
        Command::Report(a) => cmd_report(&ctx, a),
    }
}

fn emit(ctx: &Ctx, report: &Report, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            report.write_tsv(p)?;
            if ctx.json {
                report.write_json(&p.with_extension("json"))?;
            }
        }
        None if ctx.json => print!("{}", report.to_json()),
        None => print!("{}", report.to_tsv()),
    }
    Ok(())
}

fn corpus_path(flag: Option<&PathBuf>, kv: &KeyValues) -> Result<PathBuf> {
    flag.cloned()
        .or_else(|| kv.get_str("corpus").map(PathBuf::from))
        .ok_or_else(|| {
            ToolError::Usage("a corpus is required (--corpus or `corpus` in the config)".into())
        })
}

fn lowercase(flag: bool, kv: &KeyValues) -> Result<bool> {
    Ok(flag || kv.pick(None, "lowercase", false)?)
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let kv = &ctx.kv;
    let corpus = corpus_path(a.corpus.as_ref(), kv)?;
    let sgns = a.sgns.resolve(kv, a.epochs)?;
    let seed = kv.pick(a.seed, "seed", 0u64)?;
    let lower = lowercase(a.lowercase, kv)?;
    if let Some(out) = &a.out {
        sgns.validate().context(|| "trainer config".into())?;
        let c = io::load_corpus(&corpus, lower)?;
        let space = train(&c, &SgnsConfig { seed, ..sgns }).context(|| "training".into())?;
        io::save_text_vectors(&space, out)?;
        io::save_frequencies(space.vocab(), &io::sidecar_path(out))?;
        log::info!("wrote {} vectors to {}", space.len(), out.display());
        return Ok(());
    }
    let mode = match a.mode {
        Some(m) => m,
        None => match kv.get_str("mode") {
            Some(m) => m.parse().map_err(ToolError::Usage)?,
            None => Mode::default(),
        },
    };
    let cfg = ExperimentConfig {
        corpus,
        lowercase: lower,
        mode,
        runs: kv.pick(a.runs, "runs", 2)?,
        sgns,
        proxy_size: kv.pick(None, "proxy_size", DEFAULT_PROXY_SIZE)?,
        proxy_seed: kv.pick(None, "proxy_seed", 0)?,
        out_dir: a
            .out_dir
            .clone()
            .or_else(|| kv.get_str("out_dir").map(PathBuf::from))
            .unwrap_or_else(|| "runs".into()),
        global_seed: seed,
        jobs: ctx.jobs,
    };
    let (manifest, _) = run_experiment(&cfg)?;
    log::info!(
        "wrote {} runs to {}",
        manifest.runs.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let lines = io::read_lines(&a.corpus)?;
    let lines = if a.dedup { dedup_lines(&lines) } else { lines };
    let corpus = Corpus::from_lines(&lines, a.lowercase);
    let out = sample(&corpus, a.mode.with_seed(a.seed)).context(|| "sampling".into())?;
    io::save_corpus(&out, &a.out)
}

fn load_runs(dir: &Path, mode: SamplingMode) -> Result<(RunSet, Vec<PathBuf>)> {
    io::load_runset(dir, mode)
}

fn normalized(set: RunSet) -> Result<RunSet> {
    let spaces = set
        .spaces
        .iter()
        .map(|s| s.normalize())
        .collect::<std::result::Result<Vec<_>, _>>()
        .context(|| set.label.clone())?;
    Ok(RunSet { spaces, ..set })
}

fn proxy_for(sets: &[&RunSet], size: usize, seed: u64) -> ProxySample {
    let spaces: Vec<&EmbeddingSpace> = sets.iter().flat_map(|s| s.spaces.iter()).collect();
    ProxySample::sample(&joint_vocabulary(&spaces), size, seed)
}

fn trained_runs(corpus: &Corpus, cfg: &ExperimentConfig) -> Result<RunSet> {
    let spaces = parallel_map(cfg.runs, cfg.jobs, |i| train_run(corpus, cfg, i))?;
    RunSet::new(spaces, cfg.mode.with_seed(cfg.global_seed), cfg.mode.name())
        .context(|| "run set".into())
}

fn moments_row(name: &str, m: &PairMoments) -> Vec<Cell> {
    vec![
        name.into(),
        Cell::float(m.mean),
        Cell::float(m.std),
        m.pair_count.into(),
    ]
}

fn cmd_instability(ctx: &Ctx, a: &InstabilityArgs) -> Result<()> {
    let kv = &ctx.kv;
    let (proxy_size, seed) = a.proxy.resolve(kv)?;
    let mut report = Report::new("instability", &["quantity", "value", "std", "pair_count"]);
    let (shuffled, boot) = match (&a.shuffled, &a.corpus) {
        (Some(dir), None) => {
            let (s, files) = load_runs(dir, SamplingMode::Shuffled { seed: 0 })?;
            report.inputs(&files)?;
            let b = match &a.bootstrapped {
                Some(d) => {
                    let (b, files) = load_runs(d, SamplingMode::Bootstrapped { seed: 0 })?;
                    report.inputs(&files)?;
                    Some(b)
                }
                None => None,
            };
            (s, b)
        }
        (None, Some(path)) => {
            let lower = lowercase(a.lowercase, kv)?;
            let corpus = io::load_corpus(path, lower)?;
            report.input(path)?;
            let runs = kv.pick(a.runs, "runs", 2usize)?;
            let cfg = ExperimentConfig {
                corpus: path.clone(),
                lowercase: lower,
                mode: Mode::Shuffled,
                runs,
                sgns: a.sgns.resolve(kv, a.epochs)?,
                global_seed: seed,
                jobs: ctx.jobs,
                ..ExperimentConfig::default()
            };
            cfg.validate()?;
            report
                .param("runs", runs)
                .param("runs_rationale", "two independently shuffled runs suffice");
            for (k, v) in cfg.echo() {
                if [
                    "dim",
                    "window",
                    "negatives",
                    "epochs",
                    "lr",
                    "min_count",
                    "sample",
                    "fixed_window",
                ]
                .contains(&k.as_str())
                {
                    report.param(&k, v);
                }
            }
            report.seed("train", seed);
            let s = trained_runs(&corpus, &cfg)?;
            let b = if a.bootstrap {
                Some(trained_runs(
                    &corpus,
                    &ExperimentConfig {
                        mode: Mode::Bootstrapped,
                        ..cfg.clone()
                    },
                )?)
            } else {
                None
            };
            (s, b)
        }
        _ => {
            return Err(ToolError::Usage(
                "give either --shuffled DIR or --corpus FILE".into(),
            ))
        }
    };
    let shuffled = normalized(shuffled)?;
    let boot = boot.map(normalized).transpose()?;
    let mut sets = vec![&shuffled];
    sets.extend(boot.as_ref());
    let proxy = proxy_for(&sets, proxy_size, seed);
    report
        .seed("proxy", seed)
        .param("proxy_size", proxy.len())
        .param("proxy_size_requested", proxy_size);
    let rep = parallel::instability_report(&shuffled, boot.as_ref(), &proxy, ctx.jobs)?;
    report.push(moments_row("intrinsic", &rep.intrinsic));
    if let Some(b) = &rep.bootstrapped {
        report.push(moments_row("bootstrap_mean", b));
    }
    match rep.extrinsic {
        Some(Extrinsic::Defined { value, std }) => report.push(vec![
            "extrinsic".into(),
            Cell::float(value),
            Cell::float(std),
            rep.intrinsic.pair_count.into(),
        ]),
        Some(Extrinsic::Undefined { .. }) => report.push(vec![
            "extrinsic".into(),
            Cell::undefined(),
            Cell::undefined(),
            rep.intrinsic.pair_count.into(),
        ]),
        None => {}
    }
    emit(ctx, &report, a.out.as_deref())?;

    if let Some(words_path) = &a.words {
        let words = io::load_word_list(words_path)?;
        let s_pips = parallel::pair_wordwise_pips(&shuffled, &proxy, &words, ctx.jobs)?;
        let b_pips = boot
            .as_ref()
            .map(|b| parallel::pair_wordwise_pips(b, &proxy, &words, ctx.jobs))
            .transpose()?;
        let column = |rows: &[Vec<f64>], k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
        let intrinsic: Vec<PairMoments> = (0..words.len())
            .map(|k| PairMoments::of(&column(&s_pips, k)))
            .collect();
        let freq = |w: &str| shuffled.spaces[0].vocab().frequency(w);
        if let Some(out) = &a.wordwise_out {
            let mut ww = Report::new(
                "instability-wordwise",
                &[
                    "word",
                    "frequency",
                    "j_int",
                    "j_int_std",
                    "j_ext",
                    "j_ext_std",
                ],
            );
            ww.input(words_path)?
                .seed("proxy", seed)
                .param("proxy_size", proxy.len());
            for (k, w) in words.iter().enumerate() {
                let f = freq(w).map(Cell::from).unwrap_or_else(Cell::undefined);
                let int = intrinsic[k];
                let ext = b_pips.as_ref().map(|b| {
                    let bm = PairMoments::of(&column(b, k));
                    Extrinsic::from_moments(bm.mean, bm.std, int.mean, int.std)
                });
                let (e, es) = match ext {
                    Some(Extrinsic::Defined { value, std }) => {
                        (Cell::float(value), Cell::float(std))
                    }
                    _ => (Cell::undefined(), Cell::undefined()),
                };
                ww.push(vec![
                    w.as_str().into(),
                    f,
                    Cell::float(int.mean),
                    Cell::float(int.std),
                    e,
                    es,
                ]);
            }
            emit(ctx, &ww, Some(out))?;
        }
        if let Some(out) = &a.profile_out {
            let freqs: Vec<u64> = words
                .iter()
                .map(|w| {
                    freq(w).ok_or_else(|| {
                        ToolError::Usage(format!("no frequency for '{w}' (missing .freq sidecar?)"))
                    })
                })
                .collect::<Result<_>>()?;
            let means: Vec<f64> = intrinsic.iter().map(|m| m.mean).collect();
            let prof = frequency_profile(&freqs, &means, a.batches)
                .context(|| "frequency profile".into())?;
            let mut pr = Report::new(
                "instability-frequency",
                &["batch", "words", "mean_frequency", "mean_j_int"],
            );
            pr.input(words_path)?
                .seed("proxy", seed)
                .param("batches", a.batches);
            match &prof.spearman {
                Some(t) => pr
                    .param("spearman_rho", t.statistic)
                    .param("spearman_p", t.p_value),
                None => pr.param("spearman_rho", "undefined"),
            };
            for (i, b) in prof.batches.iter().enumerate() {
                pr.push(vec![
                    i.into(),
                    b.words.into(),
                    Cell::float(b.mean_frequency),
                    Cell::float(b.mean_intrinsic),
                ]);
            }
            emit(ctx, &pr, Some(out))?;
        }
    }
    Ok(())
}

fn cmd_overlap(ctx: &Ctx, a: &OverlapArgs) -> Result<()> {
    let (runs, files) = load_runs(&a.runs, SamplingMode::Shuffled { seed: 0 })?;
    let targets = io::load_word_list(&a.targets)?;
    let rows = mean_overlap(&runs, &targets, a.n).context(|| "overlap".into())?;
    let mut report = Report::new(
        "overlap",
        &["target", "n", "mean_p", "mean_j", "pair_count"],
    );
    report.inputs(&files)?.input(&a.targets)?.param("n", a.n);
    for m in rows {
        report.push(vec![
            m.target.into(),
            m.n.into(),
            Cell::float(m.mean_p),
            Cell::float(m.mean_j),
            m.pair_count.into(),
        ]);
    }
    emit(ctx, &report, a.out.as_deref())
}

/// Fraction of runs in which each query is among the `n` nearest neighbors of `target`.
fn measured_top_n(
    spaces: &[EmbeddingSpace],
    target: &str,
    n: usize,
) -> Result<BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for s in spaces {
        for (w, _) in s
            .nearest_neighbors(target, n)
            .context(|| format!("neighbors of '{target}'"))?
        {
            *counts.entry(w).or_default() += 1.0;
        }
    }
    counts.values_mut().for_each(|c| *c /= spaces.len() as f64);
    Ok(counts)
}

fn cmd_predict(ctx: &Ctx, a: &PredictArgs) -> Result<()> {
    let (runs, files) = load_runs(&a.runs, SamplingMode::Shuffled { seed: 0 })?;
    let runs = normalized(runs)?;
    let targets = io::load_word_list(&a.targets)?;
    let queries = a.queries.as_deref().map(io::load_word_list).transpose()?;
    let est = if a.unbiased {
        SigmaEstimator::Unbiased
    } else {
        SigmaEstimator::MaximumLikelihood
    };
    let cfg = PredictionConfig {
        pruning_threshold: a.prune,
        ..PredictionConfig::default()
    };
    let aligned = runs.aligned_rows().context(|| "joint vocabulary".into())?;
    let measured = mean_overlap(&runs, &targets, 1).context(|| "measured p@1".into())?;
    let measured2 = mean_overlap(&runs, &targets, 2).context(|| "measured p@2".into())?;

    let mut report = Report::new(
        "predict",
        &[
            "target",
            "predicted_p1",
            "measured_p1",
            "structure_factor_1",
            "predicted_p2",
            "measured_p2",
            "structure_factor_2",
            "mean_sigma",
        ],
    );
    report
        .inputs(&files)?
        .input(&a.targets)?
        .param("runs", runs.len())
        .param("sigma", if a.unbiased { "unbiased" } else { "ml" })
        .param("prune", a.prune);
    if let Some(q) = &a.queries {
        report.input(q)?;
    }
    let mut profile_report = Report::new(
        "predict-profile",
        &[
            "target",
            "query",
            "mu",
            "sigma",
            "p_hash1",
            "measured_top1",
            "p_hash2",
            "measured_top2",
        ],
    );
    profile_report.inputs(&files)?.input(&a.targets)?;

    let per_target = parallel_map(targets.len(), ctx.jobs, |k| {
        let t = &targets[k];
        let profile = estimate_profile(&runs, t, queries.as_deref(), est)
            .context(|| format!("profile of '{t}'"))?;
        let p1 = predict_p_hash1_all(&profile, &cfg).context(|| format!("p#1 of '{t}'"))?;
        let p2 = predict_p_hash2_all(&profile, &cfg).context(|| format!("p#2 of '{t}'"))?;
        let e1 = expected_overlap(&profile, 1, &cfg).context(|| t.clone())?;
        let e2 = expected_overlap(&profile, 2, &cfg).context(|| t.clone())?;
        let s1 = structure_factor(&profile, 1, None, &cfg).context(|| t.clone())?;
        let s2 = structure_factor(&profile, 2, None, &cfg).context(|| t.clone())?;
        let ms = profile.mean_sigma().context(|| t.clone())?;
        let top1 = measured_top_n(&aligned, t, 1)?;
        let top2 = measured_top_n(&aligned, t, 2)?;
        Ok((profile, p1, p2, [e1, e2, s1, s2, ms], top1, top2))
    })?;
    for (k, (profile, p1, p2, [e1, e2, s1, s2, ms], top1, top2)) in
        per_target.into_iter().enumerate()
    {
        let t = &targets[k];
        report.push(vec![
            t.as_str().into(),
            Cell::float(e1),
            Cell::float(measured[k].mean_p),
            Cell::float(s1),
            Cell::float(e2),
            Cell::float(measured2[k].mean_p),
            Cell::float(s2),
            Cell::float(ms),
        ]);
        for (i, e) in profile.entries.iter().enumerate() {
            let (m1, m2) = (
                top1.get(&e.query).copied().unwrap_or(0.0),
                top2.get(&e.query).copied().unwrap_or(0.0),
            );
            if p1[i] > 0.0 || p2[i] > 0.0 || m1 > 0.0 || m2 > 0.0 {
                profile_report.push(vec![
                    t.as_str().into(),
                    e.query.as_str().into(),
                    Cell::float(e.mu),
                    Cell::float(e.sigma),
                    Cell::float(p1[i]),
                    Cell::float(m1),
                    Cell::float(p2[i]),
                    Cell::float(m2),
                ]);
            }
        }
    }
    emit(ctx, &report, a.out.as_deref())?;
    if let Some(p) = &a.profile_out {
        emit(ctx, &profile_report, Some(p))?;
    }
    Ok(())
}

fn cmd_pip(ctx: &Ctx, a: &PipArgs) -> Result<()> {
    let (proxy_size, seed) = a.proxy.resolve(&ctx.kv)?;
    let (runs, files) = match (&a.a, &a.b, &a.runs) {
        (Some(x), Some(y), None) => {
            let spaces = vec![io::load_text_vectors(x)?, io::load_text_vectors(y)?];
            let set =
                RunSet::new(spaces, SamplingMode::Fixed, "pair").context(|| "inputs".into())?;
            (set, vec![x.clone(), y.clone()])
        }
        (None, None, Some(dir)) => load_runs(dir, SamplingMode::Fixed)?,
        _ => return Err(ToolError::Usage("give --a F --b F, or --runs DIR".into())),
    };
    let runs = normalized(runs)?;
    runs.require(2).context(|| "pip".into())?;
    let proxy = proxy_for(&[&runs], proxy_size, seed);
    let name = |i: usize| {
        files[i]
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let mut report = Report::new(
        "pip",
        &["run_a", "run_b", "proxy_size", "pip_loss", "reduced_pip"],
    );
    report
        .inputs(&files)?
        .seed("proxy", seed)
        .param("proxy_size", proxy.len());
    let words = a.words.as_deref().map(io::load_word_list).transpose()?;
    let mut ww = Report::new("pip-wordwise", &["run_a", "run_b", "word", "d_pip"]);
    ww.inputs(&files)?
        .seed("proxy", seed)
        .param("proxy_size", proxy.len());
    for (i, j) in pairs(runs.len()) {
        let cmp = parallel::comparison(&runs.spaces[i], &runs.spaces[j], &proxy, ctx.jobs)?;
        report.push(vec![
            name(i).into(),
            name(j).into(),
            proxy.len().into(),
            Cell::float(cmp.pip_loss()),
            Cell::float(cmp.reduced()),
        ]);
        for w in words.iter().flatten() {
            let d = cmp
                .wordwise(w)
                .context(|| format!("word-wise PIP of '{w}'"))?;
            ww.push(vec![
                name(i).into(),
                name(j).into(),
                w.as_str().into(),
                Cell::float(d),
            ]);
        }
    }
    emit(ctx, &report, a.out.as_deref())?;
    if let Some(p) = &a.wordwise_out {
        emit(ctx, &ww, Some(p))?;
    }
    Ok(())
}

fn cmd_average(a: &AverageArgs) -> Result<()> {
    let spaces = a
        .inputs
        .iter()
        .map(|p| {
            io::load_text_vectors(p)?
                .normalize()
                .context(|| p.display().to_string())
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = TreeConfig {
        renormalize: !a.no_renorm,
        pairing: match a.pairing {
            PairingArg::Given => Pairing::Given,
            PairingArg::Seeded => Pairing::Seeded(a.seed),
        },
    };
    let avg = aligned_average_tree(&spaces, &cfg).context(|| "average".into())?;
    io::save_text_vectors(&avg, &a.out)
}

fn cmd_analogy(ctx: &Ctx, a: &AnalogyArgs) -> Result<()> {
    let space = io::load_vectors_with_sidecar(&a.vectors)?;
    let dataset = io::load_analogies(&a.dataset)?;
    let restrict: Option<Vec<String>> = match (&a.restrict, a.top) {
        (Some(p), _) => Some(io::load_word_list(p)?),
        (None, Some(n)) => {
            let v = space.vocab();
            let mut order: Vec<usize> = (0..v.len()).collect();
            if let Some(f) = v.frequencies() {
                order.sort_by(|&x, &y| f[y].cmp(&f[x]).then(x.cmp(&y)));
            }
            Some(
                order
                    .into_iter()
                    .take(n)
                    .map(|i| v.word(i).to_string())
                    .collect(),
            )
        }
        (None, None) => None,
    };
    let score =
        analogy_score(&space, &dataset, restrict.as_deref()).context(|| "analogy".into())?;
    let mut report = Report::new("analogy", &["accuracy", "coverage", "answered", "total"]);
    report.input(&a.vectors)?.input(&a.dataset)?;
    if let Some(p) = &a.restrict {
        report.input(p)?;
    }
    if let Some(n) = a.top {
        report.param("top", n);
    }
    report.push(vec![
        Cell::float(score.accuracy),
        Cell::float(score.coverage),
        score.answered.into(),
        score.total.into(),
    ]);
    emit(ctx, &report, a.out.as_deref())
}

fn cmd_change(ctx: &Ctx, a: &ChangeArgs) -> Result<()> {
    let t1 = io::load_vectors_with_sidecar(&a.t1)?;
    let t2 = io::load_vectors_with_sidecar(&a.t2)?;
    let targets = io::load_word_list(&a.targets)?;
    let gold = io::load_gold(a.gold_binary.as_deref(), a.gold_graded.as_deref())?;
    let (_, deltas) = semantic_change_all(&t1, &t2).context(|| "alignment".into())?;
    let scored = scored_vocabulary(&t1, &t2, a.min_count).context(|| "scored vocabulary".into())?;
    let cls = classify_targets(&deltas, &scored).context(|| "threshold".into())?;
    let rep = report_from(&deltas, &cls, &targets).context(|| "targets".into())?;
    let eval = evaluate(&rep, &gold).context(|| "evaluation".into())?;

    let mut inputs = vec![a.t1.clone(), a.t2.clone(), a.targets.clone()];
    inputs.extend(a.gold_binary.iter().cloned());
    inputs.extend(a.gold_graded.iter().cloned());
    let header = |command: &str, columns: &[&str]| -> Result<Report> {
        let mut r = Report::new(command, columns);
        r.inputs(&inputs)?.param("min_count", a.min_count);
        Ok(r)
    };
    let mut ranking = header("change", &["rank", "word", "delta", "changed"])?;
    for (i, (w, d)) in rep.ranking.iter().enumerate() {
        ranking.push(vec![
            (i + 1).into(),
            w.as_str().into(),
            Cell::float(*d),
            rep.labels[w].into(),
        ]);
    }
    let mut summary = header("change-summary", &["metric", "value"])?;
    summary.push(vec!["tau".into(), Cell::float(rep.tau)]);
    summary.push(vec!["mu".into(), Cell::float(rep.mu)]);
    summary.push(vec!["sigma".into(), Cell::float(rep.sigma)]);
    summary.push(vec![
        "scored_vocab_size".into(),
        rep.scored_vocab_size.into(),
    ]);
    if let Some(acc) = eval.accuracy {
        summary.push(vec!["accuracy".into(), Cell::float(acc)]);
    }
    if let Some(t) = eval.spearman {
        summary.push(vec!["spearman_rho".into(), Cell::float(t.statistic)]);
        summary.push(vec!["spearman_p".into(), Cell::float(t.p_value)]);
    }
    let out = &a.out;
    emit(ctx, &ranking, Some(&out.join("ranking.tsv")))?;
    emit(ctx, &summary, Some(&out.join("summary.tsv")))?;
    let binary: Vec<(String, u8)> = targets
        .iter()
        .map(|t| (t.clone(), rep.labels[t] as u8))
        .collect();
    io::write_answers(&binary, &out.join("binary.txt"))?;
    let graded: Vec<(String, String)> = targets
        .iter()
        .map(|t| {
            (
                t.clone(),
                crate::report::format_float(rep.delta(t).expect("target scored")),
            )
        })
        .collect();
    io::write_answers(&graded, &out.join("graded.txt"))?;
    let mut vocab = scored.join("\n");
    if !vocab.is_empty() {
        vocab.push('\n');
    }
    io::write_string(&out.join("scored_vocab.txt"), &vocab)
}

fn cmd_conformity(ctx: &Ctx, a: &ConformityArgs) -> Result<()> {
    let kv = &ctx.kv;
    let files = io::corpus_files(&a.epochs)?;
    let lower = lowercase(a.lowercase, kv)?;
    let corpora = files
        .iter()
        .map(|f| io::load_corpus(f, lower))
        .collect::<Result<Vec<_>>>()?;
    let words = a.words.as_deref().map(io::load_word_list).transpose()?;
    let seed = kv.pick(a.seed, "seed", 0u64)?;
    let cfg = ConformityConfig {
        sgns: a.sgns.resolve(kv, a.train_epochs)?,
        runs: a.runs,
        avg: a.avg,
        min_count: a.obs_min_count,
        tree: TreeConfig::default(),
        seed,
        jobs: ctx.jobs,
    };
    cfg.sgns.validate().context(|| "trainer config".into())?;
    let mut report = Report::new(
        "conformity",
        &[
            "condition",
            "avg",
            "beta_f",
            "beta_0",
            "var_explained",
            "sigma_z",
            "sigma_eps",
            "lambda",
            "n_obs",
            "n_groups",
            "fit_method",
        ],
    );
    report
        .inputs(&files)?
        .seed("train", seed)
        .param("runs", a.runs)
        .param("avg", a.avg)
        .param("obs_min_count", a.obs_min_count);
    if let Some(w) = &a.words {
        report.input(w)?;
    }
    let mut conditions = vec![("genuine", corpora.clone())];
    if let Some(b) = a.control {
        report.seed("control", seed).param("control_batches", b);
        conditions.push(("control", pipeline::control_corpora(&corpora, b, seed)?));
    }
    for (name, cs) in conditions {
        for fit in pipeline::conformity(&cs, &cfg, words.as_deref())? {
            let r = &fit.result;
            report.push(vec![
                name.into(),
                fit.avg.into(),
                Cell::float(r.beta_f),
                Cell::float(r.beta_0),
                Cell::float(r.var_explained),
                Cell::float(r.sigma_z),
                Cell::float(r.sigma_eps),
                Cell::float(r.lambda),
                r.n_observations.into(),
                r.n_groups.into(),
                r.fit_method.into(),
            ]);
        }
    }
    emit(ctx, &report, a.out.as_deref())
}

fn cmd_report(ctx: &Ctx, a: &ReportArgs) -> Result<()> {
    let (proxy_size, seed) = a.proxy.resolve(&ctx.kv)?;
    let (runs, files) = load_runs(&a.runs, SamplingMode::Shuffled { seed: 0 })?;
    let runs = normalized(runs)?;
    runs.require(2).context(|| "report".into())?;
    let proxy = proxy_for(&[&runs], proxy_size, seed);
    let pips = parallel::pair_reduced_pips(&runs, &proxy, ctx.jobs)?;
    let name = |i: usize| {
        files[i]
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let mut report = Report::new("report", &["pair", "run_a", "run_b", "reduced_pip"]);
    report
        .inputs(&files)?
        .seed("proxy", seed)
        .param("proxy_size", proxy.len())
        .param("runs", runs.len());
    let m = PairMoments::of(&pips);
    report
        .param("mean_reduced_pip", crate::report::format_float(m.mean))
        .param("std_reduced_pip", crate::report::format_float(m.std));
    if let (Some(dir), Some(t)) = (&a.consistency, &a.targets) {
        let (other, other_files) = load_runs(dir, SamplingMode::Shuffled { seed: 0 })?;
        let targets = io::load_word_list(t)?;
        let c = consistency(&runs, &normalized(other)?, &targets, a.n)
            .context(|| "consistency".into())?;
        report.inputs(&other_files)?.input(t)?.param("n", a.n);
        report
            .param("consistency_rho", crate::report::format_float(c.statistic))
            .param("consistency_p", crate::report::format_float(c.p_value));
    }
    for (k, ((i, j), v)) in pairs(runs.len()).zip(&pips).enumerate() {
        report.push(vec![
            k.into(),
            name(i).into(),
            name(j).into(),
            Cell::float(*v),
        ]);
    }
    emit(ctx, &report, a.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["embedstab", "nope"]), 2);
        assert_eq!(run(["embedstab", "train", "--dim", "x"]), 2);
        assert_eq!(run(["embedstab", "--help"]), 0);
    }

    #[test]
    fn missing_input_is_a_data_error() {
        assert_eq!(
            run([
                "embedstab",
                "overlap",
                "--runs",
                "/nonexistent/dir",
                "--targets",
                "/nonexistent/t"
            ]),
            3
        );
    }
}
