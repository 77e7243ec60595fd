//! Gaussian model of pairwise cosine similarities across runs, and analytic
//! predictions of nearest-neighbor probabilities and expected overlap.
//!
//! Each (target, query) cosine is modelled as an independent normal variable
//! `N(μ, σ²)`. A query is the target's nearest neighbor when its cosine
//! exceeds all others, so
//!
//! ```text
//! p#1(s) = ∫ N(x; μ_s, σ_s²) · Π_{j≠s} Φ((x − μ_j)/σ_j) dx
//! ```

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::runs::RunSet;
use crate::special::{erfc, normal_cdf, normal_pdf};

#[derive(Debug, Clone, PartialEq)]
pub struct PairStatistics {
    pub target: String,
    pub query: String,
    pub mu: f64,
    pub sigma: f64,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityProfile {
    pub target: String,
    pub entries: Vec<PairStatistics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaEstimator {
    /// Maximum likelihood, divides by `r`.
    #[default]
    MaximumLikelihood,
    /// Bessel-corrected, divides by `r − 1`.
    Unbiased,
}

/// `(μ, σ)` of a sample of cosines.
pub fn fit_normal(samples: &[f64], est: SigmaEstimator) -> Result<(f64, f64)> {
    let r = samples.len();
    if r == 0 {
        return Err(Error::InsufficientRuns { needed: 1, got: 0 });
    }
    let mu = samples.iter().sum::<f64>() / r as f64;
    let ss: f64 = samples.iter().map(|c| (c - mu) * (c - mu)).sum();
    let denom = match est {
        SigmaEstimator::MaximumLikelihood => r as f64,
        SigmaEstimator::Unbiased if r > 1 => (r - 1) as f64,
        SigmaEstimator::Unbiased => return Err(Error::InsufficientRuns { needed: 2, got: 1 }),
    };
    Ok((mu, libm::sqrt(ss / denom)))
}

pub fn estimate_pair_stats(runs: &RunSet, target: &str, query: &str) -> Result<PairStatistics> {
    estimate_pair_stats_with(runs, target, query, SigmaEstimator::default())
}

pub fn estimate_pair_stats_with(
    runs: &RunSet,
    target: &str,
    query: &str,
    est: SigmaEstimator,
) -> Result<PairStatistics> {
    let cos: Vec<f64> = runs
        .spaces
        .iter()
        .map(|s| s.cosine(target, query))
        .collect::<Result<_>>()?;
    let (mu, sigma) = fit_normal(&cos, est)?;
    Ok(PairStatistics {
        target: target.to_string(),
        query: query.to_string(),
        mu,
        sigma,
        r: cos.len(),
    })
}

/// Profile of `target` against `queries` (default: the joint vocabulary
/// without the target). The target itself is always excluded.
pub fn estimate_profile(
    runs: &RunSet,
    target: &str,
    queries: Option<&[String]>,
    est: SigmaEstimator,
) -> Result<StabilityProfile> {
    let spaces = runs.aligned_rows()?;
    let vocab = spaces[0].vocab();
    let t = vocab.lookup(target)?;
    let q_idx: Vec<usize> = match queries {
        Some(qs) => qs
            .iter()
            .map(|q| vocab.lookup(q))
            .filter(|r| *r != Ok(t))
            .collect::<Result<_>>()?,
        None => (0..vocab.len()).filter(|&j| j != t).collect(),
    };
    let cos: Vec<Vec<f64>> = spaces
        .iter()
        .map(|s| s.cosines_from(t))
        .collect::<Result<_>>()?;
    let mut samples = vec![0.0; spaces.len()];
    let entries = q_idx
        .into_iter()
        .map(|j| {
            for (k, c) in cos.iter().enumerate() {
                samples[k] = c[j];
            }
            let (mu, sigma) = fit_normal(&samples, est)?;
            Ok(PairStatistics {
                target: target.to_string(),
                query: vocab.word(j).to_string(),
                mu,
                sigma,
                r: spaces.len(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(StabilityProfile {
        target: target.to_string(),
        entries,
    })
}

impl StabilityProfile {
    /// Profile from raw parameters; queries are named `q0, q1, …`.
    pub fn from_params(target: &str, params: &[(f64, f64)], r: usize) -> Self {
        let entries = params
            .iter()
            .enumerate()
            .map(|(i, &(mu, sigma))| PairStatistics {
                target: target.to_string(),
                query: alloc::format!("q{i}"),
                mu,
                sigma,
                r,
            })
            .collect();
        StabilityProfile {
            target: target.to_string(),
            entries,
        }
    }

    pub fn position(&self, query: &str) -> Result<usize> {
        self.entries
            .iter()
            .position(|e| e.query == query)
            .ok_or_else(|| Error::OutOfVocabulary(query.to_string()))
    }

    pub fn mean_sigma(&self) -> Result<f64> {
        if self.entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(self.entries.iter().map(|e| e.sigma).sum::<f64>() / self.entries.len() as f64)
    }

    /// Same means, every σ replaced by `gamma`.
    pub fn with_constant_sigma(&self, gamma: f64) -> StabilityProfile {
        let mut p = self.clone();
        p.entries.iter_mut().for_each(|e| e.sigma = gamma);
        p
    }
}

/// Argument of the error function in `prob_greater`.
pub fn erf_argument(mu_a: f64, sigma_a: f64, mu_b: f64, sigma_b: f64) -> f64 {
    let s = libm::sqrt(2.0 * (sigma_a * sigma_a + sigma_b * sigma_b));
    if s == 0.0 {
        return match mu_a.partial_cmp(&mu_b) {
            Some(core::cmp::Ordering::Greater) => f64::INFINITY,
            Some(core::cmp::Ordering::Less) => f64::NEG_INFINITY,
            _ => 0.0,
        };
    }
    (mu_a - mu_b) / s
}

/// `P(X_a > X_b)` for independent normals. Equal point masses give 0.5.
/// Evaluated through `erfc` on the tail side so that tiny probabilities keep
/// full relative precision and `p(a, b) + p(b, a) = 1`.
pub fn prob_greater_params(mu_a: f64, sigma_a: f64, mu_b: f64, sigma_b: f64) -> f64 {
    let a = erf_argument(mu_a, sigma_a, mu_b, sigma_b);
    if a < 0.0 {
        0.5 * erfc(-a)
    } else {
        1.0 - 0.5 * erfc(a)
    }
}

pub fn prob_greater(a: &PairStatistics, b: &PairStatistics) -> f64 {
    prob_greater_params(a.mu, a.sigma, b.mu, b.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionConfig {
    /// Competitors less likely than this to beat the reference entry are ignored.
    pub pruning_threshold: f64,
    /// Absolute tolerance of the adaptive Simpson integration.
    pub tolerance: f64,
    /// Integration half-width in units of the query's σ.
    pub width: f64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            pruning_threshold: 1e-5,
            tolerance: 1e-6,
            width: 8.0,
        }
    }
}

fn step_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        normal_cdf((x - mu) / sigma)
    } else if x > mu {
        1.0
    } else if x < mu {
        0.0
    } else {
        0.5
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature over `[a, b]` split at `breaks` plus a uniform
/// pre-partition, with the absolute tolerance shared across panels.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    const PANELS: usize = 16;
    let mut pts: Vec<f64> = (0..=PANELS)
        .map(|i| a + (b - a) * i as f64 / PANELS as f64)
        .collect();
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    pts.dedup();
    let per = tol / (pts.len() - 1) as f64;
    pts.windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_rec(f, lo, hi, fa, fm, fb, whole, per, 40)
        })
        .sum()
}

/// Indices kept as competitors: the `n` highest means plus every entry with a
/// non-negligible chance of beating at least one of them.
fn retained(profile: &StabilityProfile, n: usize, threshold: f64) -> Vec<usize> {
    let mut by_mu: Vec<usize> = (0..profile.entries.len()).collect();
    by_mu.sort_by(|&a, &b| {
        let (ea, eb) = (&profile.entries[a], &profile.entries[b]);
        eb.mu
            .partial_cmp(&ea.mu)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let n = n.min(by_mu.len());
    let (refs, rest) = by_mu.split_at(n);
    let mut keep = refs.to_vec();
    keep.extend(rest.iter().copied().filter(|&j| {
        refs.iter()
            .any(|&r| prob_greater(&profile.entries[j], &profile.entries[r]) >= threshold)
    }));
    keep.sort_unstable();
    keep
}

/// `P(query in top-n)` for one retained query against the other retained
/// competitors, n ∈ {1, 2}.
fn top_n_probability(
    profile: &StabilityProfile,
    s: usize,
    competitors: &[usize],
    n: usize,
    cfg: &PredictionConfig,
) -> f64 {
    let es = &profile.entries[s];
    let others: Vec<(f64, f64)> = competitors
        .iter()
        .filter(|&&j| j != s)
        .map(|&j| (profile.entries[j].mu, profile.entries[j].sigma))
        .collect();
    let k = others.len();
    let mut prefix = vec![1.0; k + 1];
    let mut suffix = vec![1.0; k + 1];
    let mut phi = vec![0.0; k];
    let cell = core::cell::RefCell::new((
        prefix.as_mut_slice(),
        suffix.as_mut_slice(),
        phi.as_mut_slice(),
    ));
    // Π Φ_j(x), plus for n = 2 the one-above term Σ_m (1 − Φ_m) Π_{j≠m} Φ_j.
    let competition = |x: f64| -> f64 {
        let mut guard = cell.borrow_mut();
        let (prefix, suffix, phi) = &mut *guard;
        for (i, &(mu, sd)) in others.iter().enumerate() {
            phi[i] = step_cdf(x, mu, sd);
            prefix[i + 1] = prefix[i] * phi[i];
        }
        let all = prefix[k];
        if n == 1 {
            return all;
        }
        for i in (0..k).rev() {
            suffix[i] = suffix[i + 1] * phi[i];
        }
        all + (0..k)
            .map(|i| (1.0 - phi[i]) * prefix[i] * suffix[i + 1])
            .sum::<f64>()
    };
    if es.sigma == 0.0 {
        return competition(es.mu).clamp(0.0, 1.0);
    }
    let integrand = |x: f64| normal_pdf((x - es.mu) / es.sigma) / es.sigma * competition(x);
    let (lo, hi) = (es.mu - cfg.width * es.sigma, es.mu + cfg.width * es.sigma);
    let breaks: Vec<f64> = others.iter().filter(|o| o.1 == 0.0).map(|o| o.0).collect();
    integrate(&integrand, lo, hi, &breaks, cfg.tolerance).clamp(0.0, 1.0)
}

fn predict_all(profile: &StabilityProfile, n: usize, cfg: &PredictionConfig) -> Result<Vec<f64>> {
    if profile.entries.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    if !(n == 1 || n == 2) {
        return Err(Error::InvalidArgument(alloc::format!(
            "prediction supports n = 1 or 2, got {n}"
        )));
    }
    let kept = retained(profile, n, cfg.pruning_threshold);
    let mut out = vec![0.0; profile.entries.len()];
    if profile.entries.len() <= n {
        out.iter_mut().for_each(|p| *p = 1.0);
        return Ok(out);
    }
    for &s in &kept {
        out[s] = top_n_probability(profile, s, &kept, n, cfg);
    }
    Ok(out)
}

/// `p#1` for every entry of the profile (pruned entries get 0).
pub fn predict_p_hash1_all(profile: &StabilityProfile, cfg: &PredictionConfig) -> Result<Vec<f64>> {
    predict_all(profile, 1, cfg)
}

/// `p#2` for every entry: the probability of landing among the two nearest.
pub fn predict_p_hash2_all(profile: &StabilityProfile, cfg: &PredictionConfig) -> Result<Vec<f64>> {
    predict_all(profile, 2, cfg)
}

pub fn predict_p_hash1(profile: &StabilityProfile, query: &str) -> Result<f64> {
    let i = profile.position(query)?;
    Ok(predict_p_hash1_all(profile, &PredictionConfig::default())?[i])
}

pub fn predict_p_hash2(profile: &StabilityProfile, query: &str) -> Result<f64> {
    let i = profile.position(query)?;
    Ok(predict_p_hash2_all(profile, &PredictionConfig::default())?[i])
}

/// Expected `p@n` between two independent runs: `(1/n) Σ_s p#n(s)²`.
pub fn expected_overlap(
    profile: &StabilityProfile,
    n: usize,
    cfg: &PredictionConfig,
) -> Result<f64> {
    let p = predict_all(profile, n, cfg)?;
    Ok((p.iter().map(|x| x * x).sum::<f64>() / n as f64).clamp(0.0, 1.0))
}

/// Expected overlap with all σ replaced by `gamma` (default: mean σ).
pub fn structure_factor(
    profile: &StabilityProfile,
    n: usize,
    gamma: Option<f64>,
    cfg: &PredictionConfig,
) -> Result<f64> {
    let g = match gamma {
        Some(g) if g >= 0.0 => g,
        Some(g) => {
            return Err(Error::InvalidArgument(alloc::format!(
                "gamma = {g} must be >= 0"
            )))
        }
        None => profile.mean_sigma()?,
    };
    expected_overlap(&profile.with_constant_sigma(g), n, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SamplingMode;
    use crate::linalg::random_orthogonal;
    use crate::rng;
    use crate::space::{EmbeddingSpace, Vocabulary};
    use core::f64::consts::SQRT_2;

    fn cfg() -> PredictionConfig {
        PredictionConfig::default()
    }

    #[test]
    fn fit_examples() {
        assert_eq!(
            fit_normal(&[0.5, 0.5, 0.5], SigmaEstimator::MaximumLikelihood).unwrap(),
            (0.5, 0.0)
        );
        let (m, s) = fit_normal(&[0.4, 0.6], SigmaEstimator::MaximumLikelihood).unwrap();
        assert!((m - 0.5).abs() < 1e-15 && (s - 0.1).abs() < 1e-15);
        let (_, s) = fit_normal(&[0.4, 0.6], SigmaEstimator::Unbiased).unwrap();
        assert!((s - 0.1 * SQRT_2).abs() < 1e-15);
        assert!(fit_normal(&[], SigmaEstimator::MaximumLikelihood).is_err());
    }

    #[test]
    fn fit_recovers_parameters() {
        let mut r = rng::seeded(13);
        for _ in 0..20 {
            let xs: Vec<f64> = (0..128).map(|_| 0.6 + 0.01 * rng::normal(&mut r)).collect();
            let (m, s) = fit_normal(&xs, SigmaEstimator::MaximumLikelihood).unwrap();
            let se_mu = 0.01 / libm::sqrt(128.0);
            let se_sigma = 0.01 / libm::sqrt(256.0);
            assert!((m - 0.6).abs() < 3.5 * se_mu);
            assert!((s - 0.01).abs() < 3.5 * se_sigma);
        }
    }

    #[test]
    fn prob_greater_examples() {
        // mpmath, 30 digits: A = -8.461972..., p = erfc(-A)/2
        let p = prob_greater_params(0.489, 0.009, 0.650, 0.010);
        assert!((erf_argument(0.489, 0.009, 0.650, 0.010) + 8.461_972_132_764_95).abs() < 1e-12);
        assert!(
            (p / 2.644_220_858_685_932_7e-33 - 1.0).abs() < 1e-10,
            "{p:e}"
        );
        assert_eq!(prob_greater_params(0.3, 0.1, 0.3, 0.1), 0.5);
        assert_eq!(prob_greater_params(0.3, 0.0, 0.3, 0.0), 0.5);
        assert_eq!(prob_greater_params(0.4, 0.0, 0.3, 0.0), 1.0);
        assert_eq!(prob_greater_params(0.2, 0.0, 0.3, 0.0), 0.0);
    }

    #[test]
    fn prob_greater_complementary() {
        let mut r = rng::seeded(2);
        for _ in 0..1000 {
            let (ma, mb) = (rng::unit(&mut r), rng::unit(&mut r));
            let (sa, sb) = (0.1 * rng::unit(&mut r), 0.1 * rng::unit(&mut r));
            assert_eq!(
                prob_greater_params(ma, sa, mb, sb) + prob_greater_params(mb, sb, ma, sa),
                1.0
            );
        }
    }

    #[test]
    fn dominant_query() {
        let p = StabilityProfile::from_params("t", &[(0.9, 0.01), (0.8, 0.01)], 16);
        assert!(predict_p_hash1(&p, "q0").unwrap() >= 1.0 - 1e-6);
        assert_eq!(expected_overlap(&p, 1, &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn exchangeable_queries() {
        let p = StabilityProfile::from_params("t", &[(0.5, 0.05), (0.5, 0.05)], 16);
        for q in ["q0", "q1"] {
            assert!((predict_p_hash1(&p, q).unwrap() - 0.5).abs() < 1e-4);
            assert_eq!(predict_p_hash2(&p, q).unwrap(), 1.0);
        }
        assert!((expected_overlap(&p, 1, &cfg()).unwrap() - 0.5).abs() < 1e-4);
        let three = StabilityProfile::from_params("t", &[(0.5, 0.05); 3], 16);
        for q in ["q0", "q1", "q2"] {
            assert!((predict_p_hash2(&three, q).unwrap() - 2.0 / 3.0).abs() < 1e-3);
            assert!((predict_p_hash1(&three, q).unwrap() - 1.0 / 3.0).abs() < 1e-4);
        }
    }

    #[test]
    fn point_masses() {
        let p = StabilityProfile::from_params("t", &[(0.3, 0.0), (0.7, 0.0), (0.5, 0.0)], 16);
        let p1 = predict_p_hash1_all(&p, &cfg()).unwrap();
        assert_eq!(p1, [0.0, 1.0, 0.0]);
        let p2 = predict_p_hash2_all(&p, &cfg()).unwrap();
        assert_eq!(p2, [0.0, 1.0, 1.0]);
        // a spread competitor against a point mass
        let q = StabilityProfile::from_params("t", &[(0.5, 0.0), (0.5, 0.1)], 16);
        let p1 = predict_p_hash1_all(&q, &cfg()).unwrap();
        assert!((p1[0] - 0.5).abs() < 1e-9 && (p1[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn structure_factor_cases() {
        let p = StabilityProfile::from_params("t", &[(0.5, 0.02), (0.52, 0.02), (0.4, 0.02)], 16);
        let c = cfg();
        assert_eq!(
            structure_factor(&p, 1, None, &c).unwrap(),
            expected_overlap(&p, 1, &c).unwrap()
        );
        assert_eq!(structure_factor(&p, 1, Some(0.0), &c).unwrap(), 1.0);
        let empty = StabilityProfile {
            target: "t".into(),
            entries: vec![],
        };
        assert!(structure_factor(&empty, 1, None, &c).is_err());
    }

    fn random_profile(seed: u64, k: usize) -> StabilityProfile {
        let mut r = rng::seeded(seed);
        let params: Vec<(f64, f64)> = (0..k)
            .map(|_| {
                (
                    0.3 + 0.1 * rng::unit(&mut r),
                    0.005 + 0.03 * rng::unit(&mut r),
                )
            })
            .collect();
        StabilityProfile::from_params("t", &params, 128)
    }

    fn monte_carlo(p: &StabilityProfile, n: usize, draws: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::seeded(seed);
        let k = p.entries.len();
        let mut counts = vec![0u64; k];
        let mut x = vec![0.0; k];
        for _ in 0..draws {
            for (i, e) in p.entries.iter().enumerate() {
                x[i] = e.mu + e.sigma * rng::normal(&mut r);
            }
            let mut idx: Vec<usize> = (0..k).collect();
            idx.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap());
            for &i in &idx[..n] {
                counts[i] += 1;
            }
        }
        counts
            .into_iter()
            .map(|c| c as f64 / draws as f64)
            .collect()
    }

    #[test]
    fn ten_word_profile_matches_monte_carlo() {
        for seed in 0..3 {
            let p = random_profile(seed, 10);
            let mc1 = monte_carlo(&p, 1, 200_000, seed + 100);
            let mc2 = monte_carlo(&p, 2, 200_000, seed + 200);
            let p1 = predict_p_hash1_all(&p, &cfg()).unwrap();
            let p2 = predict_p_hash2_all(&p, &cfg()).unwrap();
            for i in 0..10 {
                assert!(
                    (p1[i] - mc1[i]).abs() < 0.005,
                    "p#1 {i}: {} vs {}",
                    p1[i],
                    mc1[i]
                );
                assert!(
                    (p2[i] - mc2[i]).abs() < 0.01,
                    "p#2 {i}: {} vs {}",
                    p2[i],
                    mc2[i]
                );
                assert!(p2[i] >= p1[i], "{i}: {} < {}", p2[i], p1[i]);
            }
            let s1: f64 = p1.iter().sum();
            assert!((s1 - 1.0).abs() < 1e-3, "sum {s1}");
            let s2: f64 = p2.iter().sum();
            assert!((s2 - 2.0).abs() < 2e-3, "sum {s2}");
        }
    }

    #[test]
    fn estimate_profile_rotation_invariant() {
        let mut r = rng::seeded(5);
        let words: Vec<String> = (0..12).map(|i| alloc::format!("w{i}")).collect();
        let spaces: Vec<EmbeddingSpace> = (0..4)
            .map(|_| {
                let data = (0..12 * 3).map(|_| rng::normal(&mut r)).collect();
                EmbeddingSpace::new(Vocabulary::new(words.clone()).unwrap(), data, 3).unwrap()
            })
            .collect();
        let rot = random_orthogonal(&mut r, 3);
        let runs = RunSet::new(spaces.clone(), SamplingMode::Fixed, "a").unwrap();
        let rotated = RunSet::new(
            spaces.iter().map(|s| s.transform(&rot).unwrap()).collect(),
            SamplingMode::Fixed,
            "b",
        )
        .unwrap();
        let pa = estimate_profile(&runs, "w0", None, SigmaEstimator::default()).unwrap();
        let pb = estimate_profile(&rotated, "w0", None, SigmaEstimator::default()).unwrap();
        assert_eq!(pa.entries.len(), 11);
        assert!(pa.entries.iter().all(|e| e.query != "w0"));
        for (a, b) in pa.entries.iter().zip(&pb.entries) {
            assert!((a.mu - b.mu).abs() < 1e-12 && (a.sigma - b.sigma).abs() < 1e-9);
        }
        let single = estimate_pair_stats(&runs, "w0", "w3").unwrap();
        assert_eq!(single, pa.entries[2]);
        assert!(estimate_pair_stats(&runs, "w0", "zz").is_err());
    }

    proptest::proptest! {
        #[test]
        fn prop_tail_complements(mu_a in -1.0f64..1.0, mu_b in -1.0f64..1.0, sa in 1e-3f64..0.2, sb in 1e-3f64..0.2) {
            let p = prob_greater_params(mu_a, sa, mu_b, sb);
            let q = prob_greater_params(mu_b, sb, mu_a, sa);
            proptest::prop_assert!((0.0..=1.0).contains(&p));
            proptest::prop_assert!((p + q - 1.0).abs() < 1e-12);
            proptest::prop_assert!(prob_greater_params(mu_a + 0.01, sa, mu_b, sb) >= p);
        }
    }
}
