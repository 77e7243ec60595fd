//! Multi-run pipelines over several epoch corpora: averaged epoch spaces and
//! the frequency-effect (law of conformity) fit for each averaging size.

use embedstab_core::align::{aligned_average_tree, TreeConfig};
use embedstab_core::change::{
    control_condition, epoch_observations, frequency_effect, EpochCounts, FrequencyEffectResult,
    Observation,
};
use embedstab_core::corpus::{sample, Corpus, SamplingMode};
use embedstab_core::sgns::{train, SgnsConfig};
use embedstab_core::EmbeddingSpace;

use crate::error::{Context, Result, ToolError};
use crate::experiment::parallel_map;

#[derive(Debug, Clone, PartialEq)]
pub struct ConformityConfig {
    pub sgns: SgnsConfig,
    /// Shuffled runs trained per epoch.
    pub runs: usize,
    /// Largest aligned-average size; results are reported for every power of
    /// two below it and for `avg` itself. Must not exceed `runs`.
    pub avg: usize,
    pub min_count: u64,
    pub tree: TreeConfig,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for ConformityConfig {
    fn default() -> Self {
        ConformityConfig {
            sgns: SgnsConfig::default(),
            runs: 1,
            avg: 1,
            min_count: 500,
            tree: TreeConfig::default(),
            seed: 0,
            jobs: 1,
        }
    }
}

/// Seed of run `run` on epoch `epoch`; distinct for all realistic sizes.
pub fn run_seed(seed: u64, epoch: usize, run: usize) -> u64 {
    seed.wrapping_add((epoch as u64) << 32)
        .wrapping_add(run as u64)
}

/// `1, 2, 4, …` below `avg`, then `avg`.
pub fn average_sizes(avg: usize) -> Vec<usize> {
    let mut v: Vec<usize> = std::iter::successors(Some(1usize), |n| Some(n * 2))
        .take_while(|&n| n < avg)
        .collect();
    v.push(avg.max(1));
    v
}

/// Normalized shuffled-corpus runs for every epoch: `out[epoch][run]`.
pub fn train_epoch_runs(
    corpora: &[Corpus],
    sgns: &SgnsConfig,
    runs: usize,
    seed: u64,
    jobs: usize,
) -> Result<Vec<Vec<EmbeddingSpace>>> {
    let flat = parallel_map(corpora.len() * runs, jobs, |k| {
        let (e, i) = (k / runs, k % runs);
        let s = run_seed(seed, e, i);
        let shuffled = sample(&corpora[e], SamplingMode::Shuffled { seed: s })
            .context(|| format!("epoch {e}, run {i}"))?;
        let space = train(
            &shuffled,
            &SgnsConfig {
                seed: s,
                ..sgns.clone()
            },
        )
        .context(|| format!("epoch {e}, run {i}"))?;
        space.normalize().context(|| format!("epoch {e}, run {i}"))
    })?;
    let mut it = flat.into_iter();
    Ok((0..corpora.len())
        .map(|_| it.by_ref().take(runs).collect())
        .collect())
}

/// Tree average of the first `n` runs (a single run is returned as is).
pub fn average_first(
    runs: &[EmbeddingSpace],
    n: usize,
    tree: &TreeConfig,
) -> Result<EmbeddingSpace> {
    if n == 0 || n > runs.len() {
        return Err(ToolError::Usage(format!(
            "cannot average {n} of {} runs",
            runs.len()
        )));
    }
    aligned_average_tree(&runs[..n], tree).context(|| format!("{n}-fold average"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformityFit {
    pub avg: usize,
    pub result: FrequencyEffectResult,
    pub observations: Vec<Observation>,
}

/// Trains every epoch, then fits the frequency effect on the `n`-fold aligned
/// averages for each size in [`average_sizes`].
pub fn conformity(
    corpora: &[Corpus],
    cfg: &ConformityConfig,
    words: Option<&[String]>,
) -> Result<Vec<ConformityFit>> {
    if corpora.len() < 2 {
        return Err(ToolError::Usage("need at least 2 epochs".into()));
    }
    if cfg.avg == 0 || cfg.avg > cfg.runs {
        return Err(ToolError::Usage(format!(
            "avg must be in 1..={} (runs)",
            cfg.runs
        )));
    }
    let counts: Vec<EpochCounts> = corpora.iter().map(EpochCounts::of).collect();
    let runs = train_epoch_runs(corpora, &cfg.sgns, cfg.runs, cfg.seed, cfg.jobs)?;
    average_sizes(cfg.avg)
        .into_iter()
        .map(|n| {
            let spaces = runs
                .iter()
                .map(|r| average_first(r, n, &cfg.tree))
                .collect::<Result<Vec<_>>>()?;
            let observations = epoch_observations(&spaces, &counts, cfg.min_count, words)
                .context(|| format!("{n}-fold"))?;
            let result =
                frequency_effect(&observations).context(|| format!("{n}-fold frequency effect"))?;
            Ok(ConformityFit {
                avg: n,
                result,
                observations,
            })
        })
        .collect()
}

/// The randomized control: all epochs pooled and re-split into `batches`.
pub fn control_corpora(corpora: &[Corpus], batches: usize, seed: u64) -> Result<Vec<Corpus>> {
    control_condition(corpora, batches, seed).context(|| "control condition".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(average_sizes(1), [1]);
        assert_eq!(average_sizes(8), [1, 2, 4, 8]);
        assert_eq!(average_sizes(6), [1, 2, 4, 6]);
    }

    #[test]
    fn seeds_are_distinct() {
        let mut s: Vec<u64> = (0..3)
            .flat_map(|e| (0..40).map(move |i| run_seed(7, e, i)))
            .collect();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 120);
    }

    #[test]
    fn rejects_bad_sizes() {
        let c = vec![Corpus::from_lines(["a b"], false); 2];
        let cfg = ConformityConfig {
            runs: 2,
            avg: 3,
            ..Default::default()
        };
        assert!(matches!(
            conformity(&c, &cfg, None),
            Err(ToolError::Usage(_))
        ));
        assert!(matches!(
            conformity(&c[..1], &ConformityConfig::default(), None),
            Err(ToolError::Usage(_))
        ));
    }
}
