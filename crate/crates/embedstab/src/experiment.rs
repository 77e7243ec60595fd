//! Seeded multi-run experiments: sample the corpus, train one space per run,
//! write the vector files and a manifest with the config echo and hashes.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use embedstab_core::corpus::{sample, Corpus, SamplingMode};
use embedstab_core::runs::RunSet;
use embedstab_core::sgns::{train, SgnsConfig};
use embedstab_core::EmbeddingSpace;
use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::error::{Context, Result, ToolError};
use crate::io;
use crate::report::{TOOL, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Fixed,
    #[default]
    Shuffled,
    Bootstrapped,
}

impl Mode {
    pub fn with_seed(self, seed: u64) -> SamplingMode {
        match self {
            Mode::Fixed => SamplingMode::Fixed,
            Mode::Shuffled => SamplingMode::Shuffled { seed },
            Mode::Bootstrapped => SamplingMode::Bootstrapped { seed },
        }
    }

    pub fn name(self) -> &'static str {
        self.with_seed(0).name()
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(Mode::Fixed),
            "shuffled" => Ok(Mode::Shuffled),
            "bootstrapped" => Ok(Mode::Bootstrapped),
            _ => Err(format!(
                "unknown sampling mode '{s}' (fixed, shuffled, bootstrapped)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub lowercase: bool,
    pub mode: Mode,
    pub runs: usize,
    /// `seed` inside is ignored; each run uses `global_seed + index`.
    pub sgns: SgnsConfig,
    pub proxy_size: usize,
    pub proxy_seed: u64,
    pub out_dir: PathBuf,
    pub global_seed: u64,
    /// Worker threads; runs are independent so the output does not depend on it.
    pub jobs: usize,
}

pub const CONFIG_KEYS: &[&str] = &[
    "corpus",
    "lowercase",
    "mode",
    "runs",
    "dim",
    "window",
    "negatives",
    "epochs",
    "lr",
    "min_count",
    "sample",
    "fixed_window",
    "proxy_size",
    "proxy_seed",
    "out_dir",
    "seed",
    "jobs",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: PathBuf::new(),
            lowercase: false,
            mode: Mode::Shuffled,
            runs: 2,
            sgns: SgnsConfig::default(),
            proxy_size: embedstab_core::pip::DEFAULT_PROXY_SIZE,
            proxy_seed: 0,
            out_dir: PathBuf::from("runs"),
            global_seed: 0,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    /// Fills every field present in the file; absent keys keep their defaults.
    pub fn from_key_values(kv: &KeyValues) -> Result<ExperimentConfig> {
        let unknown = kv.unknown_keys(CONFIG_KEYS);
        if !unknown.is_empty() {
            return Err(ToolError::Usage(format!(
                "unknown config keys: {}",
                unknown.join(", ")
            )));
        }
        let d = ExperimentConfig::default();
        let s = &d.sgns;
        let mode = match kv.get_str("mode") {
            Some(m) => m.parse().map_err(ToolError::Usage)?,
            None => d.mode,
        };
        Ok(ExperimentConfig {
            corpus: kv.get_str("corpus").map(PathBuf::from).unwrap_or(d.corpus),
            lowercase: kv.pick(None, "lowercase", d.lowercase)?,
            mode,
            runs: kv.pick(None, "runs", d.runs)?,
            sgns: SgnsConfig {
                dim: kv.pick(None, "dim", s.dim)?,
                window: kv.pick(None, "window", s.window)?,
                negatives: kv.pick(None, "negatives", s.negatives)?,
                epochs: kv.pick(None, "epochs", s.epochs)?,
                initial_lr: kv.pick(None, "lr", s.initial_lr)?,
                min_count: kv.pick(None, "min_count", s.min_count)?,
                subsample_t: kv.pick(None, "sample", s.subsample_t)?,
                dynamic_window: !kv.pick(None, "fixed_window", !s.dynamic_window)?,
                seed: s.seed,
            },
            proxy_size: kv.pick(None, "proxy_size", d.proxy_size)?,
            proxy_seed: kv.pick(None, "proxy_seed", d.proxy_seed)?,
            out_dir: kv
                .get_str("out_dir")
                .map(PathBuf::from)
                .unwrap_or(d.out_dir),
            global_seed: kv.pick(None, "seed", d.global_seed)?,
            jobs: kv.pick(None, "jobs", d.jobs)?,
        })
    }

    /// The config as `key = value` pairs; parsing them back gives the same config.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let s = &self.sgns;
        [
            ("corpus", self.corpus.display().to_string()),
            ("lowercase", self.lowercase.to_string()),
            ("mode", self.mode.name().to_string()),
            ("runs", self.runs.to_string()),
            ("dim", s.dim.to_string()),
            ("window", s.window.to_string()),
            ("negatives", s.negatives.to_string()),
            ("epochs", s.epochs.to_string()),
            ("lr", s.initial_lr.to_string()),
            ("min_count", s.min_count.to_string()),
            ("sample", s.subsample_t.to_string()),
            ("fixed_window", (!s.dynamic_window).to_string()),
            ("proxy_size", self.proxy_size.to_string()),
            ("proxy_seed", self.proxy_seed.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("seed", self.global_seed.to_string()),
            ("jobs", self.jobs.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(ToolError::Usage("runs must be >= 1".into()));
        }
        if self.jobs == 0 {
            return Err(ToolError::Usage("jobs must be >= 1".into()));
        }
        self.sgns.validate().context(|| "trainer config".into())
    }

    pub fn run_seed(&self, index: usize) -> u64 {
        self.global_seed.wrapping_add(index as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    pub vectors: String,
    pub vectors_sha256: String,
    pub frequencies: String,
    pub frequencies_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub corpus_sha256: String,
    pub runs: Vec<RunRecord>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn run_file(index: usize) -> String {
    format!("run_{index:03}.vec")
}

/// Trains one run: sample with the run seed, then train with the same seed.
pub fn train_run(corpus: &Corpus, cfg: &ExperimentConfig, index: usize) -> Result<EmbeddingSpace> {
    let seed = cfg.run_seed(index);
    let sampled =
        sample(corpus, cfg.mode.with_seed(seed)).context(|| format!("run {index}: sampling"))?;
    train(
        &sampled,
        &SgnsConfig {
            seed,
            ..cfg.sgns.clone()
        },
    )
    .context(|| format!("run {index}: training"))
}

/// Rejects corpora on which no run could train, before any run starts: no
/// tokens, or no word reaching `min_count`.
pub fn check_trainable(corpus: &Corpus, min_count: u64) -> std::result::Result<(), String> {
    if corpus.token_count() == 0 {
        return Err("corpus has no tokens".into());
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for w in corpus.documents.iter().flatten() {
        *counts.entry(w.as_str()).or_default() += 1;
    }
    if counts.values().all(|&c| c < min_count) {
        return Err(format!("no word occurs at least {min_count} times"));
    }
    Ok(())
}

/// Writes `run_XXX.vec` (+ `.freq`) for every run and `manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Manifest, RunSet)> {
    cfg.validate()?;
    let corpus = io::load_corpus(&cfg.corpus, cfg.lowercase)?;
    check_trainable(&corpus, cfg.sgns.min_count)
        .map_err(|m| ToolError::Data(format!("{}: {m}", cfg.corpus.display())))?;
    let corpus_sha256 = io::sha256_file(&cfg.corpus)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| ToolError::io(&cfg.out_dir, e))?;
    let spaces = parallel_map(cfg.runs, cfg.jobs, |i| train_run(&corpus, cfg, i))?;
    let mut runs = Vec::with_capacity(cfg.runs);
    for (i, s) in spaces.iter().enumerate() {
        let vec_path = cfg.out_dir.join(run_file(i));
        let freq_path = io::sidecar_path(&vec_path);
        io::save_text_vectors(s, &vec_path)?;
        io::save_frequencies(s.vocab(), &freq_path)?;
        runs.push(RunRecord {
            index: i,
            seed: cfg.run_seed(i),
            vectors: run_file(i),
            vectors_sha256: io::sha256_file(&vec_path)?,
            frequencies: freq_path
                .file_name()
                .expect("file name")
                .to_string_lossy()
                .into_owned(),
            frequencies_sha256: io::sha256_file(&freq_path)?,
        });
    }
    let manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        config: cfg.echo(),
        corpus_sha256,
        runs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    io::write_string(&cfg.out_dir.join(MANIFEST), &text)?;
    let set = RunSet::new(
        spaces,
        cfg.mode.with_seed(cfg.global_seed),
        cfg.out_dir.display().to_string(),
    )
    .context(|| "run set".into())?;
    Ok((manifest, set))
}

/// Applies `f` to `0..n` on up to `jobs` scoped threads; results come back in
/// index order and the first error (by index) wins.
pub fn parallel_map<T: Send>(
    n: usize,
    jobs: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let mut slots: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = (0..jobs)
            .map(|k| {
                scope.spawn(move || (k..n).step_by(jobs).map(|i| (i, f(i))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every index computed"))
        .collect()
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let p = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&p).map_err(|e| ToolError::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig {
            corpus: "c.txt".into(),
            mode: Mode::Bootstrapped,
            runs: 4,
            sgns: SgnsConfig {
                dim: 20,
                initial_lr: 0.05,
                subsample_t: 1e-3,
                dynamic_window: false,
                ..Default::default()
            },
            global_seed: 9,
            ..Default::default()
        };
        let text: String = cfg
            .echo()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let back = ExperimentConfig::from_key_values(
            &KeyValues::parse(&text, Path::new("e.conf")).unwrap(),
        )
        .unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_modes() {
        let kv = KeyValues::parse("dimm = 3\n", Path::new("e.conf")).unwrap();
        assert!(matches!(
            ExperimentConfig::from_key_values(&kv),
            Err(ToolError::Usage(_))
        ));
        let kv = KeyValues::parse("mode = sorted\n", Path::new("e.conf")).unwrap();
        assert!(matches!(
            ExperimentConfig::from_key_values(&kv),
            Err(ToolError::Usage(_))
        ));
    }

    #[test]
    fn parallel_map_keeps_order() {
        let out = parallel_map(10, 3, |i| Ok(i * i)).unwrap();
        assert_eq!(out, (0..10).map(|i| i * i).collect::<Vec<_>>());
        let e = parallel_map(10, 4, |i| {
            if i % 4 == 3 {
                Err(ToolError::Usage(format!("{i}")))
            } else {
                Ok(i)
            }
        });
        assert!(matches!(e, Err(ToolError::Usage(m)) if m == "3"));
    }
}
