//! Nearest-neighbor overlap `p@n` and its Jaccard form `j@n`.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::runs::{pairs, RunSet};
use crate::space::{joint_vocabulary, EmbeddingSpace};
use crate::stats::{spearman, TestResult};

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMeasurement {
    pub target: String,
    pub n: usize,
    pub m: usize,
    pub p_at_n: f64,
    pub j_at_n: f64,
}

impl OverlapMeasurement {
    pub fn from_counts(target: impl Into<String>, n: usize, m: usize) -> Self {
        assert!(m <= n && n > 0);
        OverlapMeasurement {
            target: target.into(),
            n,
            m,
            p_at_n: m as f64 / n as f64,
            j_at_n: m as f64 / (2 * n - m) as f64,
        }
    }
}

/// Overlap of the top-`n` prefixes of two ranked lists.
pub fn overlap_of_lists<S: AsRef<str>>(
    target: &str,
    a: &[S],
    b: &[S],
    n: usize,
) -> Result<OverlapMeasurement> {
    if n == 0 || a.len() < n || b.len() < n {
        return Err(Error::InvalidArgument(alloc::format!(
            "lists shorter than n = {n}"
        )));
    }
    let top: BTreeSet<&str> = a[..n].iter().map(AsRef::as_ref).collect();
    let m = b[..n].iter().filter(|w| top.contains(w.as_ref())).count();
    Ok(OverlapMeasurement::from_counts(target, n, m))
}

/// `p@n` and `j@n` of `target` between two spaces, with neighbors searched
/// over their joint vocabulary.
pub fn p_at_n(
    a: &EmbeddingSpace,
    b: &EmbeddingSpace,
    target: &str,
    n: usize,
) -> Result<OverlapMeasurement> {
    a.vocab().lookup(target)?;
    b.vocab().lookup(target)?;
    let joint = joint_vocabulary(&[a, b]);
    let (ra, rb) = (a.restrict(joint.words())?, b.restrict(joint.words())?);
    let la = neighbor_words(&ra, target, n)?;
    let lb = neighbor_words(&rb, target, n)?;
    overlap_of_lists(target, &la, &lb, n)
}

fn neighbor_words(s: &EmbeddingSpace, target: &str, n: usize) -> Result<Vec<String>> {
    Ok(s.nearest_neighbors(target, n)?
        .into_iter()
        .map(|(w, _)| w)
        .collect())
}

pub fn p_to_j(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(alloc::format!(
            "p = {p} outside [0, 1]"
        )));
    }
    Ok(p / (2.0 - p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanOverlap {
    pub target: String,
    pub n: usize,
    pub mean_p: f64,
    pub mean_j: f64,
    pub pair_count: usize,
}

/// Mean `p@n` / `j@n` per target over all unordered run pairs. Neighbor
/// lists use the joint vocabulary of the whole run set.
pub fn mean_overlap(runs: &RunSet, targets: &[String], n: usize) -> Result<Vec<MeanOverlap>> {
    runs.require(2)?;
    let spaces = runs.aligned_rows()?;
    let joint = spaces[0].vocab();
    for t in targets {
        joint.lookup(t)?;
    }
    let mut out = Vec::with_capacity(targets.len());
    for t in targets {
        let lists: Vec<Vec<String>> = spaces
            .iter()
            .map(|s| neighbor_words(s, t, n))
            .collect::<Result<_>>()?;
        let (mut sp, mut sj, mut count) = (0.0, 0.0, 0usize);
        for (i, j) in pairs(lists.len()) {
            let m = overlap_of_lists(t, &lists[i], &lists[j], n)?;
            sp += m.p_at_n;
            sj += m.j_at_n;
            count += 1;
        }
        out.push(MeanOverlap {
            target: t.to_string(),
            n,
            mean_p: sp / count as f64,
            mean_j: sj / count as f64,
            pair_count: count,
        });
    }
    Ok(out)
}

/// Agreement between two independent run sets: Spearman correlation of the
/// per-target mean `p@n` vectors.
pub fn consistency(a: &RunSet, b: &RunSet, targets: &[String], n: usize) -> Result<TestResult> {
    let pa: Vec<f64> = mean_overlap(a, targets, n)?
        .iter()
        .map(|m| m.mean_p)
        .collect();
    let pb: Vec<f64> = mean_overlap(b, targets, n)?
        .iter()
        .map(|m| m.mean_p)
        .collect();
    spearman(&pa, &pb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SamplingMode;
    use crate::linalg::random_orthogonal;
    use crate::rng;
    use crate::space::Vocabulary;
    use alloc::vec;

    fn random_space(seed: u64, v: usize, d: usize) -> EmbeddingSpace {
        let mut r = rng::seeded(seed);
        let words: Vec<String> = (0..v).map(|i| alloc::format!("w{i}")).collect();
        let data = (0..v * d).map(|_| rng::normal(&mut r)).collect();
        EmbeddingSpace::new(Vocabulary::new(words).unwrap(), data, d).unwrap()
    }

    #[test]
    fn identical_spaces_overlap_fully() {
        let s = random_space(1, 40, 5);
        for n in [1, 5, 20, 39] {
            let m = p_at_n(&s, &s, "w3", n).unwrap();
            assert_eq!((m.p_at_n, m.j_at_n), (1.0, 1.0));
        }
        assert!(p_at_n(&s, &s, "w3", 40).is_err());
        assert!(p_at_n(&s, &s, "nope", 2).is_err());
    }

    #[test]
    fn rotation_does_not_change_overlap() {
        let s = random_space(2, 60, 6);
        let t = random_space(3, 60, 6);
        let r = random_orthogonal(&mut rng::seeded(4), 6);
        for n in [1, 3, 10] {
            assert_eq!(
                p_at_n(&s, &t, "w0", n).unwrap(),
                p_at_n(&s.transform(&r).unwrap(), &t, "w0", n).unwrap()
            );
        }
    }

    #[test]
    fn conversion_examples() {
        assert_eq!(p_to_j(1.0).unwrap(), 1.0);
        assert_eq!(p_to_j(0.0).unwrap(), 0.0);
        assert!((p_to_j(0.8).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(p_to_j(1.1).is_err());
    }

    #[test]
    fn mean_overlap_pairs() {
        let s = random_space(5, 30, 4);
        let runs = RunSet::new(vec![s.clone(), s], SamplingMode::Fixed, "same").unwrap();
        let r = mean_overlap(&runs, &["w1".into()], 5).unwrap();
        assert_eq!(r[0].mean_p, 1.0);
        assert_eq!(r[0].pair_count, 1);
        let many = RunSet::new(
            (0..16).map(|i| random_space(i, 30, 4)).collect(),
            SamplingMode::Fixed,
            "x",
        )
        .unwrap();
        let r = mean_overlap(&many, &["w1".into(), "w2".into()], 5).unwrap();
        assert!(r.iter().all(|m| m.pair_count == 120));
        let one = RunSet::new(vec![random_space(1, 30, 4)], SamplingMode::Fixed, "x").unwrap();
        assert!(mean_overlap(&one, &["w1".into()], 5).is_err());
    }

    proptest::proptest! {
        #[test]
        fn prop_counts_match_conversion(n in 1usize..200, frac in 0.0f64..=1.0) {
            let m = (frac * n as f64) as usize;
            let o = OverlapMeasurement::from_counts("t", n, m);
            proptest::prop_assert!((0.0..=1.0).contains(&o.p_at_n) && o.j_at_n <= o.p_at_n);
            proptest::prop_assert!((o.j_at_n - p_to_j(o.p_at_n).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn prop_list_overlap_is_symmetric(seed in 0u64..1000, n in 1usize..20) {
            let mut r = rng::seeded(seed);
            let draw = |r: &mut crate::rng::Rng| {
                let mut v: Vec<String> = (0..40).map(|i| alloc::format!("w{i}")).collect();
                rng::shuffle(r, &mut v);
                v.truncate(20);
                v
            };
            let (a, b) = (draw(&mut r), draw(&mut r));
            let ab = overlap_of_lists("t", &a, &b, n).unwrap();
            proptest::prop_assert_eq!(ab.m, overlap_of_lists("t", &b, &a, n).unwrap().m);
            proptest::prop_assert_eq!(overlap_of_lists("t", &a, &a, n).unwrap().m, n);
        }
    }
}
