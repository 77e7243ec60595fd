//! Intrinsic and extrinsic instability, for whole spaces (`I_int`, `I_ext`)
//! and single words (`J_int`, `J_ext`).
//!
//! Intrinsic instability is the mean reduced PIP loss over all pairs of
//! shuffled-corpus runs. Extrinsic instability is `sqrt(mean_boot − I_int)`,
//! where `mean_boot` is the same mean over bootstrapped-corpus runs. The
//! square root of a difference of first moments is kept as displayed, even
//! though its units are odd. When `mean_boot < I_int`, the value is an
//! explicit [`Extrinsic::Undefined`] rather than a NaN.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pip::{PipComparison, ProxySample};
use crate::runs::{pairs, RunSet};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extrinsic {
    /// `sqrt(mean_boot − intrinsic)` with the propagated standard deviation.
    Defined { value: f64, std: f64 },
    /// `mean_boot < intrinsic`; both inputs are kept for the report.
    Undefined { mean_boot: f64, intrinsic: f64 },
}

impl Extrinsic {
    /// `sqrt(b − i)` with std `sqrt(sb² + si²) / (2·value)`. At a value of
    /// exactly zero the derivative is singular; the std then falls back to
    /// the bound `sqrt(sqrt(sb² + si²))`.
    pub fn from_moments(mean_boot: f64, std_boot: f64, intrinsic: f64, std_int: f64) -> Extrinsic {
        let diff = mean_boot - intrinsic;
        if diff < 0.0 {
            return Extrinsic::Undefined {
                mean_boot,
                intrinsic,
            };
        }
        let value = libm::sqrt(diff);
        let spread = libm::sqrt(std_boot * std_boot + std_int * std_int);
        let std = if value > 0.0 {
            spread / (2.0 * value)
        } else {
            libm::sqrt(spread)
        };
        Extrinsic::Defined { value, std }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Extrinsic::Defined { value, .. } => Some(value),
            Extrinsic::Undefined { .. } => None,
        }
    }
}

/// Mean and population std of a metric over run pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMoments {
    pub mean: f64,
    pub std: f64,
    pub pair_count: usize,
}

impl PairMoments {
    pub fn of(values: &[f64]) -> PairMoments {
        PairMoments {
            mean: stats::mean(values),
            std: stats::std_dev(values),
            pair_count: values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityReport {
    pub intrinsic: PairMoments,
    /// Pair moments of the bootstrapped set, when one was given.
    pub bootstrapped: Option<PairMoments>,
    pub extrinsic: Option<Extrinsic>,
    pub proxy_size: usize,
    pub proxy_seed: u64,
}

impl InstabilityReport {
    /// Builds a report from per-pair reduced PIP values computed elsewhere.
    pub fn from_pair_values(
        shuffled: &[f64],
        bootstrapped: Option<&[f64]>,
        proxy: &ProxySample,
    ) -> Result<Self> {
        if shuffled.is_empty() {
            return Err(Error::InsufficientRuns { needed: 2, got: 1 });
        }
        let intrinsic = PairMoments::of(shuffled);
        let boot = match bootstrapped {
            Some([]) => return Err(Error::InsufficientRuns { needed: 2, got: 1 }),
            Some(b) => Some(PairMoments::of(b)),
            None => None,
        };
        let extrinsic =
            boot.map(|b| Extrinsic::from_moments(b.mean, b.std, intrinsic.mean, intrinsic.std));
        Ok(InstabilityReport {
            intrinsic,
            bootstrapped: boot,
            extrinsic,
            proxy_size: proxy.len(),
            proxy_seed: proxy.seed,
        })
    }
}

/// Reduced PIP loss of every unordered run pair, in [`pairs`] order.
pub fn pair_reduced_pips(runs: &RunSet, proxy: &ProxySample) -> Result<Vec<f64>> {
    runs.require(2)?;
    pairs(runs.len())
        .map(|(i, j)| Ok(PipComparison::new(&runs.spaces[i], &runs.spaces[j], proxy)?.reduced()))
        .collect()
}

/// Word-wise reduced PIP of each word (columns) for every run pair (rows).
pub fn pair_wordwise_pips(
    runs: &RunSet,
    proxy: &ProxySample,
    words: &[String],
) -> Result<Vec<Vec<f64>>> {
    runs.require(2)?;
    pairs(runs.len())
        .map(|(i, j)| {
            let cmp = PipComparison::new(&runs.spaces[i], &runs.spaces[j], proxy)?;
            words.iter().map(|w| cmp.wordwise(w)).collect()
        })
        .collect()
}

/// `I_int`: mean and std of reduced PIP over all shuffled-run pairs.
pub fn intrinsic_instability(shuffled: &RunSet, proxy: &ProxySample) -> Result<InstabilityReport> {
    InstabilityReport::from_pair_values(&pair_reduced_pips(shuffled, proxy)?, None, proxy)
}

/// `I_int` together with `I_ext` from a bootstrapped run set on the same proxy.
pub fn extrinsic_instability(
    shuffled: &RunSet,
    bootstrapped: &RunSet,
    proxy: &ProxySample,
) -> Result<InstabilityReport> {
    let s = pair_reduced_pips(shuffled, proxy)?;
    let b = pair_reduced_pips(bootstrapped, proxy)?;
    InstabilityReport::from_pair_values(&s, Some(&b), proxy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordInstability {
    pub word: String,
    pub intrinsic: PairMoments,
    pub extrinsic: Extrinsic,
}

/// `(J_int, J_ext)` for many words; one PIP preparation per run pair.
pub fn wordwise_instability_many(
    words: &[String],
    shuffled: &RunSet,
    bootstrapped: &RunSet,
    proxy: &ProxySample,
) -> Result<Vec<WordInstability>> {
    let s = pair_wordwise_pips(shuffled, proxy, words)?;
    let b = pair_wordwise_pips(bootstrapped, proxy, words)?;
    Ok(words
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let si: Vec<f64> = s.iter().map(|row| row[k]).collect();
            let bi: Vec<f64> = b.iter().map(|row| row[k]).collect();
            let (int, boot) = (PairMoments::of(&si), PairMoments::of(&bi));
            WordInstability {
                word: w.clone(),
                intrinsic: int,
                extrinsic: Extrinsic::from_moments(boot.mean, boot.std, int.mean, int.std),
            }
        })
        .collect())
}

/// `(J_int, J_ext)` of one word.
pub fn wordwise_instability(
    word: &str,
    shuffled: &RunSet,
    bootstrapped: &RunSet,
    proxy: &ProxySample,
) -> Result<WordInstability> {
    let mut v = wordwise_instability_many(&[word.into()], shuffled, bootstrapped, proxy)?;
    Ok(v.remove(0))
}

/// `J_int` alone for many words: moments of word-wise reduced PIP over the
/// shuffled pairs.
pub fn wordwise_intrinsic(
    words: &[String],
    shuffled: &RunSet,
    proxy: &ProxySample,
) -> Result<Vec<PairMoments>> {
    let s = pair_wordwise_pips(shuffled, proxy, words)?;
    Ok((0..words.len())
        .map(|k| PairMoments::of(&s.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBatch {
    pub words: usize,
    pub mean_frequency: f64,
    pub mean_intrinsic: f64,
}

/// How `J_int` varies with word frequency: words sorted by descending count
/// and cut into consecutive batches of near-equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    pub batches: Vec<FrequencyBatch>,
    /// Spearman between batch mean frequency and batch mean `J_int`; `None`
    /// when either is constant.
    pub spearman: Option<stats::TestResult>,
}

pub fn frequency_profile(
    frequencies: &[u64],
    intrinsic: &[f64],
    batches: usize,
) -> Result<FrequencyProfile> {
    if frequencies.len() != intrinsic.len() {
        return Err(Error::DimensionMismatch {
            expected: frequencies.len(),
            got: intrinsic.len(),
        });
    }
    if batches < 3 || frequencies.len() < batches {
        return Err(Error::InvalidArgument(alloc::format!(
            "need >= 3 batches and at least one word per batch ({} words, {batches} batches)",
            frequencies.len()
        )));
    }
    let mut order: Vec<usize> = (0..frequencies.len()).collect();
    order.sort_by(|&a, &b| frequencies[b].cmp(&frequencies[a]).then(a.cmp(&b)));
    let n = order.len();
    let out: Vec<FrequencyBatch> = (0..batches)
        .map(|k| {
            let idx = &order[k * n / batches..(k + 1) * n / batches];
            let f: Vec<f64> = idx.iter().map(|&i| frequencies[i] as f64).collect();
            let j: Vec<f64> = idx.iter().map(|&i| intrinsic[i]).collect();
            FrequencyBatch {
                words: idx.len(),
                mean_frequency: stats::mean(&f),
                mean_intrinsic: stats::mean(&j),
            }
        })
        .collect();
    let f: Vec<f64> = out.iter().map(|b| b.mean_frequency).collect();
    let j: Vec<f64> = out.iter().map(|b| b.mean_intrinsic).collect();
    Ok(FrequencyProfile {
        spearman: stats::spearman(&f, &j).ok(),
        batches: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SamplingMode;
    use crate::linalg::random_orthogonal;
    use crate::rng::{self, seeded};
    use crate::space::{EmbeddingSpace, Vocabulary};
    use alloc::format;
    use alloc::vec;

    fn base(seed: u64, v: usize, d: usize) -> EmbeddingSpace {
        let mut r = seeded(seed);
        let words: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
        let data = (0..v * d).map(|_| rng::normal(&mut r)).collect();
        EmbeddingSpace::new(Vocabulary::new(words).unwrap(), data, d)
            .unwrap()
            .normalize()
            .unwrap()
    }

    fn noisy(b: &EmbeddingSpace, eps: f64, seed: u64) -> EmbeddingSpace {
        let mut r = seeded(seed);
        let data = b
            .data()
            .iter()
            .map(|x| x + eps * rng::normal(&mut r))
            .collect();
        EmbeddingSpace::new(b.vocab().clone(), data, b.dim())
            .unwrap()
            .normalize()
            .unwrap()
    }

    fn set(spaces: Vec<EmbeddingSpace>) -> RunSet {
        RunSet::new(spaces, SamplingMode::Shuffled { seed: 0 }, "t").unwrap()
    }

    #[test]
    fn identical_and_rotated_runs() {
        let b = base(1, 60, 6);
        let proxy = ProxySample::sample(b.vocab(), 1000, 0);
        let same = set(vec![b.clone(), b.clone(), b.clone()]);
        let rep = intrinsic_instability(&same, &proxy).unwrap();
        assert_eq!(rep.intrinsic.mean, 0.0);
        assert_eq!(rep.intrinsic.pair_count, 3);
        let mut r = seeded(2);
        let rot = set((0..4)
            .map(|_| b.transform(&random_orthogonal(&mut r, 6)).unwrap())
            .collect());
        assert!(intrinsic_instability(&rot, &proxy).unwrap().intrinsic.mean < 1e-6);
        let w = wordwise_instability("w3", &same, &same, &proxy).unwrap();
        assert_eq!((w.intrinsic.mean, w.extrinsic.value()), (0.0, Some(0.0)));
    }

    #[test]
    fn requires_two_runs() {
        let b = base(1, 10, 3);
        let proxy = ProxySample::sample(b.vocab(), 1000, 0);
        assert_eq!(
            intrinsic_instability(&set(vec![b]), &proxy),
            Err(Error::InsufficientRuns { needed: 2, got: 1 })
        );
    }

    #[test]
    fn undefined_marker() {
        let b = base(3, 50, 5);
        let proxy = ProxySample::sample(b.vocab(), 1000, 0);
        let noisy_set = set((0..3).map(|s| noisy(&b, 0.3, s)).collect());
        let quiet_set = set((0..3).map(|s| noisy(&b, 0.01, 10 + s)).collect());
        let rep = extrinsic_instability(&noisy_set, &quiet_set, &proxy).unwrap();
        match rep.extrinsic.unwrap() {
            Extrinsic::Undefined {
                mean_boot,
                intrinsic,
            } => assert!(mean_boot < intrinsic),
            other => panic!("expected undefined, got {other:?}"),
        }
        let rep = extrinsic_instability(&quiet_set, &noisy_set, &proxy).unwrap();
        let v = rep.extrinsic.unwrap().value().unwrap();
        assert!((v * v - (rep.bootstrapped.unwrap().mean - rep.intrinsic.mean)).abs() < 1e-12);
    }

    #[test]
    fn oov_word() {
        let b = base(4, 20, 3);
        let proxy = ProxySample::sample(b.vocab(), 1000, 0);
        let s = set(vec![b.clone(), b.clone()]);
        assert_eq!(
            wordwise_instability("zzz", &s, &s, &proxy).unwrap_err(),
            Error::OutOfVocabulary("zzz".into())
        );
    }

    #[test]
    fn space_level_is_aggregate_of_word_level() {
        let b = base(5, 120, 8);
        let proxy = ProxySample::sample(b.vocab(), 1000, 0);
        let runs = set((0..4).map(|s| noisy(&b, 0.2, s)).collect());
        let words = b.vocab().words().to_vec();
        let ww = pair_wordwise_pips(&runs, &proxy, &words).unwrap();
        let agg: Vec<f64> = ww
            .iter()
            .map(|row| libm::sqrt(stats::mean(&row.iter().map(|x| x * x).collect::<Vec<_>>())))
            .collect();
        let direct = pair_reduced_pips(&runs, &proxy).unwrap();
        for (a, d) in agg.iter().zip(&direct) {
            assert!((a - d).abs() < 1e-9);
        }
        assert!(
            (stats::mean(&agg) - intrinsic_instability(&runs, &proxy).unwrap().intrinsic.mean)
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn deterministic() {
        let b = base(6, 40, 4);
        let runs = set((0..3).map(|s| noisy(&b, 0.1, s)).collect());
        let p1 = ProxySample::sample(b.vocab(), 20, 7);
        let p2 = ProxySample::sample(b.vocab(), 20, 7);
        assert_eq!(
            intrinsic_instability(&runs, &p1).unwrap(),
            intrinsic_instability(&runs, &p2).unwrap()
        );
    }

    #[test]
    fn frequency_batches() {
        let f: Vec<u64> = (1..=100).collect();
        let j: Vec<f64> = f.iter().map(|&x| 1.0 / x as f64).collect();
        let p = frequency_profile(&f, &j, 20).unwrap();
        assert_eq!(p.batches.len(), 20);
        assert!(p.batches.iter().all(|b| b.words == 5));
        assert_eq!(p.batches[0].mean_frequency, 98.0);
        assert!((p.spearman.unwrap().statistic + 1.0).abs() < 1e-12);
        let flat = frequency_profile(&f, &[0.1; 100], 20).unwrap();
        assert!(flat.spearman.is_none());
        assert!(frequency_profile(&f[..10], &j[..10], 20).is_err());
        let b = base(7, 30, 4);
        let runs = set((0..3).map(|s| noisy(&b, 0.1, s)).collect());
        let proxy = ProxySample::sample(b.vocab(), 1000, 0);
        let words = b.vocab().words().to_vec();
        let ji = wordwise_intrinsic(&words, &runs, &proxy).unwrap();
        let full = wordwise_instability_many(&words, &runs, &runs, &proxy).unwrap();
        assert!(ji.iter().zip(&full).all(|(a, b)| *a == b.intrinsic));
    }

    #[test]
    fn propagated_std() {
        match Extrinsic::from_moments(0.5, 0.03, 0.25, 0.04) {
            Extrinsic::Defined { value, std } => {
                assert!((value - 0.5).abs() < 1e-15);
                assert!((std - 0.05).abs() < 1e-15);
            }
            _ => panic!(),
        }
    }
}
