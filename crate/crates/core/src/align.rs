//! Orthogonal Procrustes alignment and aligned averaging of spaces.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gaussian::{fit_normal, SigmaEstimator};
use crate::linalg::{row_times, to_row_major};
use crate::rng;
use crate::runs::RunSet;
use crate::space::{joint_vocabulary, EmbeddingSpace, Vocabulary};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// Row-major `d×d` orthogonal matrix mapping the first space onto the second.
    pub rotation: Vec<f64>,
    pub dim: usize,
    /// `‖V_a R − V_b‖_F` over the joint rows.
    pub residual: f64,
    pub joint_vocab: Vocabulary,
}

impl AlignmentResult {
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        row_times(row, &self.rotation, &mut out);
        out
    }
}

/// Rotation `R` (reflections allowed) minimizing `‖A R − B‖_F` over the joint
/// vocabulary: `R = U Wᵀ` for the SVD `U Σ Wᵀ` of `Aᵀ B`.
pub fn procrustes(a: &EmbeddingSpace, b: &EmbeddingSpace) -> Result<AlignmentResult> {
    if !a.is_normalized() || !b.is_normalized() {
        return Err(Error::NotNormalized);
    }
    solve(a, b)
}

/// Same solve without the normalization precondition.
pub(crate) fn solve(a: &EmbeddingSpace, b: &EmbeddingSpace) -> Result<AlignmentResult> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let joint = joint_vocabulary(&[a, b]);
    if joint.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let d = a.dim();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for w in joint.words() {
        let (ra, rb) = (a.vector(w)?, b.vector(w)?);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += ra[i] * rb[j];
            }
        }
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite cross-covariance".into()));
    }
    let svd = m.svd(true, true);
    let (u, wt) = match (svd.u, svd.v_t) {
        (Some(u), Some(wt)) => (u, wt),
        _ => return Err(Error::Numerical("SVD did not converge".into())),
    };
    let rotation = to_row_major(&(u * wt));
    let mut out = vec![0.0; d];
    let mut res = 0.0;
    for w in joint.words() {
        row_times(a.vector(w)?, &rotation, &mut out);
        res += out
            .iter()
            .zip(b.vector(w)?)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
    }
    Ok(AlignmentResult {
        rotation,
        dim: d,
        residual: libm::sqrt(res),
        joint_vocab: joint,
    })
}

/// `½(a_w R + b_w)` for joint words, where `R` aligns `a` onto `b`. Words only
/// in `b` keep their row; words only in `a` are rotated. Rows follow `b`'s
/// order, then `a`-only words in `a`'s order. The result is not normalized.
pub fn aligned_average_pair(a: &EmbeddingSpace, b: &EmbeddingSpace) -> Result<EmbeddingSpace> {
    if !a.is_normalized() || !b.is_normalized() {
        return Err(Error::NotNormalized);
    }
    average_with(a, b, &solve(a, b)?)
}

fn average_with(
    a: &EmbeddingSpace,
    b: &EmbeddingSpace,
    al: &AlignmentResult,
) -> Result<EmbeddingSpace> {
    let d = a.dim();
    let mut words: Vec<String> = Vec::with_capacity(a.len() + b.len());
    let mut data = Vec::with_capacity((a.len() + b.len()) * d);
    let mut rotated = vec![0.0; d];
    for (i, w) in b.vocab().words().iter().enumerate() {
        words.push(w.clone());
        match a.vocab().get(w) {
            Some(k) => {
                row_times(a.row(k), &al.rotation, &mut rotated);
                data.extend(rotated.iter().zip(b.row(i)).map(|(x, y)| 0.5 * (x + y)));
            }
            None => data.extend_from_slice(b.row(i)),
        }
    }
    for (k, w) in a.vocab().words().iter().enumerate() {
        if !b.vocab().contains(w) {
            words.push(w.clone());
            row_times(a.row(k), &al.rotation, &mut rotated);
            data.extend_from_slice(&rotated);
        }
    }
    Ok(EmbeddingSpace::from_parts(
        Vocabulary::new(words)?,
        data,
        d,
        false,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pairing {
    /// Adjacent spaces in input order.
    #[default]
    Given,
    /// Adjacent spaces after a seeded shuffle at every level.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    /// Renormalize each intermediate average (and the final result).
    pub renormalize: bool,
    pub pairing: Pairing,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            renormalize: true,
            pairing: Pairing::Given,
        }
    }
}

/// Averaged rows shorter than this are cancellation residue, treated as zero.
pub const ZERO_NORM: f64 = 1e-10;

fn renormalized(s: EmbeddingSpace) -> EmbeddingSpace {
    let (keep, dropped): (Vec<usize>, Vec<usize>) =
        (0..s.len()).partition(|&i| crate::linalg::norm(s.row(i)) > ZERO_NORM);
    if dropped.is_empty() {
        return s.normalize().expect("no zero rows");
    }
    let names = |ix: &[usize]| {
        ix.iter()
            .map(|&i| String::from(s.vocab().word(i)))
            .collect::<Vec<_>>()
    };
    log::warn!(
        "dropped {} zero-norm rows after averaging: {:?}",
        dropped.len(),
        names(&dropped)
    );
    s.restrict(&names(&keep))
        .expect("own words")
        .normalize()
        .expect("no zero rows")
}

/// Binary-tree aligned average: adjacent spaces are averaged pairwise level
/// by level, an odd space is carried up unchanged, and (by default) every
/// average is renormalized before the next level. With renormalization the
/// returned space is normalized; without it the raw final average is returned.
pub fn aligned_average_tree(spaces: &[EmbeddingSpace], cfg: &TreeConfig) -> Result<EmbeddingSpace> {
    if spaces.is_empty() {
        return Err(Error::InsufficientRuns { needed: 1, got: 0 });
    }
    if spaces.iter().any(|s| !s.is_normalized()) {
        return Err(Error::NotNormalized);
    }
    let mut level: Vec<EmbeddingSpace> = spaces.to_vec();
    let mut r = match cfg.pairing {
        Pairing::Seeded(seed) => Some(rng::seeded(seed)),
        Pairing::Given => None,
    };
    while level.len() > 1 {
        if let Some(r) = r.as_mut() {
            rng::shuffle(r, &mut level);
        }
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(x) = it.next() {
            match it.next() {
                Some(y) => {
                    let avg = average_with(&x, &y, &solve(&x, &y)?)?;
                    next.push(if cfg.renormalize {
                        renormalized(avg)
                    } else {
                        avg
                    });
                }
                None => next.push(x),
            }
        }
        level = next;
    }
    Ok(level.pop().expect("non-empty"))
}

/// `n` distinct-word pairs drawn uniformly (with replacement across pairs)
/// from a vocabulary of at least two words.
pub fn sample_word_pairs(vocab: &Vocabulary, n: usize, seed: u64) -> Result<Vec<(String, String)>> {
    if vocab.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need >= 2 words, have {}",
            vocab.len()
        )));
    }
    let mut r = rng::seeded(seed);
    Ok((0..n)
        .map(|_| {
            let i = rng::index(&mut r, vocab.len());
            let mut j = rng::index(&mut r, vocab.len() - 1);
            if j >= i {
                j += 1;
            }
            (vocab.word(i).into(), vocab.word(j).into())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVariance {
    pub sigma_original: f64,
    pub sigma_averaged: f64,
    pub mu_original: f64,
    pub mu_averaged: f64,
    pub sigma_ratio: f64,
    pub mu_ratio: f64,
}

/// Mean over `pairs` of the per-pair cosine mean and (maximum-likelihood) std.
pub fn cosine_moments(runs: &RunSet, pairs: &[(String, String)]) -> Result<(f64, f64)> {
    runs.require(2)?;
    let mut mus = Vec::with_capacity(pairs.len());
    let mut sigmas = Vec::with_capacity(pairs.len());
    let mut xs = Vec::with_capacity(runs.len());
    for (k, l) in pairs {
        xs.clear();
        for s in &runs.spaces {
            xs.push(s.cosine(k, l)?);
        }
        let (mu, sigma) = fit_normal(&xs, SigmaEstimator::MaximumLikelihood)?;
        mus.push(mu);
        sigmas.push(sigma);
    }
    Ok((stats::mean(&mus), stats::mean(&sigmas)))
}

/// Ratios (averaged / original) of the mean pair std and mean pair cosine.
pub fn bias_variance_report(
    runs: &RunSet,
    averaged: &RunSet,
    pairs: &[(String, String)],
) -> Result<BiasVariance> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no word pairs".into()));
    }
    let (mu_o, s_o) = cosine_moments(runs, pairs)?;
    let (mu_a, s_a) = cosine_moments(averaged, pairs)?;
    if s_o == 0.0 || mu_o == 0.0 {
        return Err(Error::Degenerate(
            "original runs have zero mean cosine or zero spread".into(),
        ));
    }
    Ok(BiasVariance {
        sigma_original: s_o,
        sigma_averaged: s_a,
        mu_original: mu_o,
        mu_averaged: mu_a,
        sigma_ratio: s_a / s_o,
        mu_ratio: mu_a / mu_o,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SamplingMode;
    use crate::linalg::{norm, orthogonality_defect, random_orthogonal};
    use crate::rng::seeded;

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

    fn frob(a: &[f64], b: &[f64]) -> f64 {
        libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
    }

    #[test]
    fn identity_and_exact_recovery() {
        let a = base(1, 100, 6);
        let id = procrustes(&a, &a).unwrap();
        let eye: Vec<f64> = (0..36)
            .map(|k| if k % 7 == 0 { 1.0 } else { 0.0 })
            .collect();
        assert!(frob(&id.rotation, &eye) < 1e-8);
        assert!(id.residual < 1e-8);
        let mut r = seeded(2);
        for _ in 0..5 {
            let rot = random_orthogonal(&mut r, 6);
            let res = procrustes(&a, &a.transform(&rot).unwrap()).unwrap();
            assert!(res.residual < 1e-6);
            assert!(frob(&res.rotation, &rot) < 1e-6);
            assert!(orthogonality_defect(&res.rotation, 6) < 1e-8);
        }
    }

    #[test]
    fn beats_random_rotations() {
        let a = base(3, 80, 4);
        let b = noisy(
            &a.transform(&random_orthogonal(&mut seeded(4), 4)).unwrap(),
            0.3,
            5,
        );
        let best = procrustes(&a, &b).unwrap().residual;
        let mut r = seeded(6);
        let eye: Vec<f64> = (0..16)
            .map(|k| if k % 5 == 0 { 1.0 } else { 0.0 })
            .collect();
        let resid = |m: &[f64]| {
            let t = a.transform(m).unwrap();
            frob(t.data(), b.data())
        };
        assert!(best <= resid(&eye));
        for _ in 0..100 {
            assert!(best <= resid(&random_orthogonal(&mut r, 4)) + 1e-12);
        }
    }

    #[test]
    fn reflections_allowed() {
        let a = base(7, 30, 3);
        let mut refl = vec![0.0; 9];
        refl[0] = -1.0;
        refl[4] = 1.0;
        refl[8] = 1.0;
        let res = procrustes(&a, &a.transform(&refl).unwrap()).unwrap();
        assert!(frob(&res.rotation, &refl) < 1e-8);
    }

    #[test]
    fn errors() {
        let a = base(1, 5, 2);
        let raw = EmbeddingSpace::new(a.vocab().clone(), a.data().to_vec(), 2).unwrap();
        assert_eq!(procrustes(&a, &raw), Err(Error::NotNormalized));
        let other = EmbeddingSpace::from_rows([("zz", vec![1.0, 0.0])])
            .unwrap()
            .normalize()
            .unwrap();
        assert_eq!(procrustes(&a, &other), Err(Error::EmptyVocabulary));
        assert!(aligned_average_tree(&[], &TreeConfig::default()).is_err());
    }

    #[test]
    fn pair_average_cases() {
        let a = base(8, 50, 5);
        let same = aligned_average_pair(&a, &a).unwrap();
        assert!(!same.is_normalized());
        assert!(frob(same.data(), a.data()) < 1e-9);
        let b = a.transform(&random_orthogonal(&mut seeded(9), 5)).unwrap();
        let avg = aligned_average_pair(&a, &b).unwrap();
        assert!(frob(avg.data(), b.data()) < 1e-6);
        let c = noisy(&a, 0.5, 10);
        let avg = aligned_average_pair(&a, &c).unwrap();
        for i in 0..avg.len() {
            assert!(norm(avg.row(i)) <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn pair_average_footnote_rule() {
        let a = EmbeddingSpace::from_rows([
            ("x", vec![1.0, 0.0]),
            ("y", vec![0.0, 1.0]),
            ("only_a", vec![1.0, 0.0]),
        ])
        .unwrap()
        .normalize()
        .unwrap();
        // b is a 90° rotation of a on the joint words
        let b = EmbeddingSpace::from_rows([
            ("x", vec![0.0, 1.0]),
            ("y", vec![-1.0, 0.0]),
            ("only_b", vec![0.6, 0.8]),
        ])
        .unwrap()
        .normalize()
        .unwrap();
        let avg = aligned_average_pair(&a, &b).unwrap();
        assert_eq!(avg.vocab().words(), &["x", "y", "only_b", "only_a"]);
        assert!(frob(avg.vector("only_b").unwrap(), &[0.6, 0.8]) < 1e-12);
        assert!(frob(avg.vector("only_a").unwrap(), &[0.0, 1.0]) < 1e-12);
        assert!(frob(avg.vector("x").unwrap(), &[0.0, 1.0]) < 1e-12);
    }

    #[test]
    fn pair_average_near_symmetric_geometry() {
        let a = base(11, 60, 5);
        let b = noisy(&a, 0.4, 12);
        let ab = aligned_average_pair(&a, &b).unwrap();
        let ba = aligned_average_pair(&b, &a).unwrap();
        for i in 0..60 {
            let w = ab.vocab().word(i);
            for j in (0..60).step_by(7) {
                let v = ab.vocab().word(j);
                assert!((ab.cosine(w, v).unwrap() - ba.cosine(w, v).unwrap()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn tree_cases() {
        let a = base(13, 40, 4);
        assert_eq!(
            aligned_average_tree(core::slice::from_ref(&a), &TreeConfig::default()).unwrap(),
            a
        );
        let four = vec![a.clone(), a.clone(), a.clone(), a.clone()];
        let t = aligned_average_tree(&four, &TreeConfig::default()).unwrap();
        assert!(t.is_normalized());
        assert!(frob(t.data(), a.data()) < 1e-9);
        let raw = aligned_average_tree(
            &four,
            &TreeConfig {
                renormalize: false,
                pairing: Pairing::Given,
            },
        )
        .unwrap();
        assert!(!raw.is_normalized());
        let five: Vec<EmbeddingSpace> = (0..5).map(|s| noisy(&a, 0.2, 20 + s)).collect();
        let seeded_t = aligned_average_tree(
            &five,
            &TreeConfig {
                renormalize: true,
                pairing: Pairing::Seeded(3),
            },
        )
        .unwrap();
        assert_eq!(seeded_t.len(), 40);
        assert_eq!(
            seeded_t,
            aligned_average_tree(
                &five,
                &TreeConfig {
                    renormalize: true,
                    pairing: Pairing::Seeded(3)
                }
            )
            .unwrap()
        );
    }

    #[test]
    fn tree_drops_zero_rows() {
        let pins = [
            ("x1", [1.0, 0.0]),
            ("x2", [1.0, 0.0]),
            ("y1", [0.0, 1.0]),
            ("y2", [0.0, 1.0]),
        ];
        let with_z = |z: [f64; 2]| {
            EmbeddingSpace::from_rows(
                pins.iter()
                    .map(|(w, r)| (*w, r.to_vec()))
                    .chain([("z", z.to_vec())]),
            )
            .unwrap()
            .normalize()
            .unwrap()
        };
        // z flips sign but the pinned words keep the rotation at the identity,
        // so z averages to (numerically) zero
        let t = aligned_average_tree(
            &[with_z([1.0, 1.0]), with_z([-1.0, -1.0])],
            &TreeConfig::default(),
        )
        .unwrap();
        assert_eq!(t.vocab().words(), &["x1", "x2", "y1", "y2"]);
    }

    fn run_set(spaces: Vec<EmbeddingSpace>) -> RunSet {
        RunSet::new(spaces, SamplingMode::Shuffled { seed: 0 }, "t").unwrap()
    }

    #[test]
    fn bias_variance_identity_and_halving() {
        let b = base(30, 300, 10);
        let runs = run_set((0..40).map(|s| noisy(&b, 0.05, 100 + s)).collect());
        let pairs = sample_word_pairs(b.vocab(), 200, 1).unwrap();
        let same = bias_variance_report(&runs, &runs, &pairs).unwrap();
        assert_eq!((same.sigma_ratio, same.mu_ratio), (1.0, 1.0));
        let avg: Vec<EmbeddingSpace> = (0..40)
            .map(|s| {
                let x = noisy(&b, 0.05, 1000 + 2 * s);
                let y = noisy(&b, 0.05, 1001 + 2 * s);
                aligned_average_tree(&[x, y], &TreeConfig::default()).unwrap()
            })
            .collect();
        let rep = bias_variance_report(&runs, &run_set(avg), &pairs).unwrap();
        // per-pair σ estimates from 40 runs carry ~11% relative error; 200
        // pairs bring the ratio's standard error to ~0.011
        assert!(
            (rep.sigma_ratio - core::f64::consts::FRAC_1_SQRT_2).abs() < 3.0 * 0.011,
            "{rep:?}"
        );
    }

    #[test]
    fn averaging_does_not_increase_variance() {
        let b = base(31, 200, 8);
        let pairs = sample_word_pairs(b.vocab(), 150, 2).unwrap();
        let runs = run_set((0..16).map(|s| noisy(&b, 0.1, 200 + s)).collect());
        let avg = run_set(
            (0..16)
                .map(|s| {
                    let xs: Vec<EmbeddingSpace> =
                        (0..4).map(|k| noisy(&b, 0.1, 500 + 4 * s + k)).collect();
                    aligned_average_tree(&xs, &TreeConfig::default()).unwrap()
                })
                .collect(),
        );
        let rep = bias_variance_report(&runs, &avg, &pairs).unwrap();
        assert!(rep.sigma_ratio < 1.0);
    }

    #[test]
    fn hub_baseline_varies_more_than_tree() {
        // Rejected baseline: rotate every space onto one hub, then average flat.
        fn hub_average(spaces: &[EmbeddingSpace], hub: usize) -> EmbeddingSpace {
            let h = &spaces[hub];
            let d = h.dim();
            let mut acc = vec![0.0; h.data().len()];
            for s in spaces {
                let rot = s.transform(&procrustes(s, h).unwrap().rotation).unwrap();
                for (x, y) in acc.iter_mut().zip(rot.data()) {
                    *x += y;
                }
            }
            EmbeddingSpace::new(h.vocab().clone(), acc, d)
                .unwrap()
                .normalize()
                .unwrap()
        }
        // the difference only shows once the rotations themselves are noisy
        // (d not small against |V| and the noise); at d = 6, |V| = 150 both agree
        let b = base(40, 100, 20);
        let spaces: Vec<EmbeddingSpace> = (0..8).map(|s| noisy(&b, 1.0, 300 + s)).collect();
        let proxy = crate::pip::ProxySample::sample(b.vocab(), 1000, 0);
        let hubs: Vec<EmbeddingSpace> = (0..8).map(|h| hub_average(&spaces, h)).collect();
        let trees: Vec<EmbeddingSpace> = (0..8)
            .map(|s| {
                aligned_average_tree(
                    &spaces,
                    &TreeConfig {
                        renormalize: true,
                        pairing: Pairing::Seeded(s),
                    },
                )
                .unwrap()
            })
            .collect();
        let spread = |xs: &[EmbeddingSpace]| {
            let v: Vec<f64> = crate::runs::pairs(xs.len())
                .map(|(i, j)| crate::pip::reduced_pip_loss(&xs[i], &xs[j], &proxy).unwrap())
                .collect();
            stats::mean(&v)
        };
        // both average the same eight runs; only the alignment scheme differs
        let (h, t) = (spread(&hubs), spread(&trees));
        assert!(h > t, "hub spread {h} vs tree spread {t}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn prop_procrustes_recovers_rotation(seed in 0u64..10_000, d in 2usize..10) {
            let a = crate::synthetic::gaussian_space(40, d, seed);
            let r = random_orthogonal(&mut seeded(seed ^ 0x55), d);
            let al = procrustes(&a, &a.transform(&r).unwrap()).unwrap();
            proptest::prop_assert!(al.residual < 1e-8);
            proptest::prop_assert!(orthogonality_defect(&al.rotation, d) < 1e-10);
            for (x, y) in al.rotation.iter().zip(&r) {
                proptest::prop_assert!((x - y).abs() < 1e-8);
            }
        }
    }
}
