//! Pairwise-inner-product (PIP) losses between two normalized spaces,
//! evaluated over a proxy subset of the vocabulary.
//!
//! The full loss `‖A Aᵀ − B Bᵀ‖_F` over the proxy rows is computed through the
//! `d×d` cross-Gram matrices: `‖AᵀA‖² + ‖BᵀB‖² − 2‖AᵀB‖²`. That is `O(|V′|·d²)`
//! instead of `O(|V′|²·d)`, and the word-wise loss of any word costs `O(d²)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gaussian::StabilityProfile;
use crate::rng;
use crate::space::{EmbeddingSpace, Vocabulary};

pub use crate::special::chi_relative_width;

pub const DEFAULT_PROXY_SIZE: usize = 20_000;

/// The proxy vocabulary `V′` over which PIP entries are compared.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxySample {
    pub words: Vec<String>,
    pub seed: u64,
}

impl ProxySample {
    /// Uniform sample without replacement of `size` words from `joint`, in
    /// vocabulary order; the whole vocabulary when it is not larger than `size`.
    pub fn sample(joint: &Vocabulary, size: usize, seed: u64) -> ProxySample {
        let n = joint.len();
        let mut idx: Vec<usize> = (0..n).collect();
        if size < n {
            let mut r = rng::seeded(seed);
            // partial Fisher–Yates: the first `size` slots are the sample
            for i in 0..size {
                let j = i + rng::index(&mut r, n - i);
                idx.swap(i, j);
            }
            idx.truncate(size);
            idx.sort_unstable();
        }
        ProxySample {
            words: idx.into_iter().map(|i| joint.word(i).into()).collect(),
            seed,
        }
    }

    pub fn from_words(words: Vec<String>) -> Result<ProxySample> {
        Vocabulary::new(words.iter().cloned())?;
        Ok(ProxySample { words, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Proxy rows of a normalized space, row-major.
pub fn proxy_rows(space: &EmbeddingSpace, proxy: &ProxySample) -> Result<Vec<f64>> {
    if !space.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let mut out = Vec::with_capacity(proxy.len() * space.dim());
    for w in &proxy.words {
        out.extend_from_slice(space.vector(w)?);
    }
    Ok(out)
}

/// Accumulated `AᵀA`, `BᵀB` and `AᵀB` over a set of proxy rows. Partial
/// accumulations over disjoint row blocks can be merged in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossGram {
    pub dim: usize,
    pub rows: usize,
    aa: Vec<f64>,
    bb: Vec<f64>,
    ab: Vec<f64>,
}

impl CrossGram {
    pub fn zeros(dim: usize) -> Self {
        CrossGram {
            dim,
            rows: 0,
            aa: vec![0.0; dim * dim],
            bb: vec![0.0; dim * dim],
            ab: vec![0.0; dim * dim],
        }
    }

    pub fn from_rows(a: &[f64], b: &[f64], dim: usize) -> Self {
        let mut g = CrossGram::zeros(dim);
        g.accumulate(a, b);
        g
    }

    pub fn accumulate(&mut self, a: &[f64], b: &[f64]) {
        let d = self.dim;
        for (ra, rb) in a.chunks(d).zip(b.chunks(d)) {
            for i in 0..d {
                let (ai, bi) = (ra[i], rb[i]);
                let row = i * d;
                for j in 0..d {
                    self.aa[row + j] += ai * ra[j];
                    self.bb[row + j] += bi * rb[j];
                    self.ab[row + j] += ai * rb[j];
                }
            }
            self.rows += 1;
        }
    }

    pub fn merge(&mut self, other: &CrossGram) {
        for (x, y) in self.aa.iter_mut().zip(&other.aa) {
            *x += y;
        }
        for (x, y) in self.bb.iter_mut().zip(&other.bb) {
            *x += y;
        }
        for (x, y) in self.ab.iter_mut().zip(&other.ab) {
            *x += y;
        }
        self.rows += other.rows;
    }

    /// `Σ_{k,l} (a_k·a_l − b_k·b_l)²` over the accumulated rows. Symmetric in
    /// the two spaces bit for bit: the cross term pairs `(AᵀB)_ij` with
    /// `(AᵀB)_ji`, which are exactly the entries of `BᵀA` swapped.
    pub fn pip_squared(&self) -> f64 {
        // one summation order for all three terms, so A against A cancels exactly
        let d = self.dim;
        let paired = |m: &[f64]| {
            let mut s = 0.0;
            for i in 0..d {
                s += m[i * d + i] * m[i * d + i];
                for j in i + 1..d {
                    let (x, y) = (m[i * d + j], m[j * d + i]);
                    s += x * x + y * y;
                }
            }
            s
        };
        (paired(&self.aa) + paired(&self.bb) - 2.0 * paired(&self.ab)).max(0.0)
    }

    /// `Σ_l (a·a_l − b·b_l)²` over the accumulated rows for one word's rows `a`, `b`.
    pub fn wordwise_squared(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            let row = i * d;
            let (mut ga, mut gb, mut gab) = (0.0, 0.0, 0.0);
            for j in 0..d {
                ga += self.aa[row + j] * a[j];
                gb += self.bb[row + j] * b[j];
                gab += self.ab[row + j] * b[j];
            }
            s += a[i] * ga + b[i] * gb - 2.0 * a[i] * gab;
        }
        s.max(0.0)
    }
}

/// Two spaces prepared for repeated PIP queries over one proxy.
#[derive(Debug, Clone)]
pub struct PipComparison<'a> {
    a: &'a EmbeddingSpace,
    b: &'a EmbeddingSpace,
    gram: CrossGram,
}

impl<'a> PipComparison<'a> {
    pub fn new(a: &'a EmbeddingSpace, b: &'a EmbeddingSpace, proxy: &ProxySample) -> Result<Self> {
        let gram = CrossGram::from_rows(
            &proxy_rows(a, proxy)?,
            &proxy_rows(b, proxy)?,
            check_dims(a, b)?,
        );
        Ok(PipComparison { a, b, gram })
    }

    /// Uses a Gram accumulation computed elsewhere (e.g. in parallel blocks).
    pub fn with_gram(
        a: &'a EmbeddingSpace,
        b: &'a EmbeddingSpace,
        gram: CrossGram,
    ) -> Result<Self> {
        if !a.is_normalized() || !b.is_normalized() {
            return Err(Error::NotNormalized);
        }
        check_dims(a, b)?;
        Ok(PipComparison { a, b, gram })
    }

    pub fn proxy_len(&self) -> usize {
        self.gram.rows
    }

    pub fn pip_loss(&self) -> f64 {
        libm::sqrt(self.gram.pip_squared())
    }

    pub fn reduced(&self) -> f64 {
        self.pip_loss() / (2.0 * self.gram.rows as f64)
    }

    pub fn wordwise(&self, word: &str) -> Result<f64> {
        let (a, b) = (self.a.vector(word)?, self.b.vector(word)?);
        Ok(
            libm::sqrt(self.gram.wordwise_squared(a, b))
                / (2.0 * libm::sqrt(self.gram.rows as f64)),
        )
    }
}

fn check_dims(a: &EmbeddingSpace, b: &EmbeddingSpace) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.dim())
}

/// `D_PIP = ‖A Aᵀ − B Bᵀ‖_F` over proxy × proxy entries.
pub fn pip_loss(a: &EmbeddingSpace, b: &EmbeddingSpace, proxy: &ProxySample) -> Result<f64> {
    Ok(PipComparison::new(a, b, proxy)?.pip_loss())
}

/// `D_rPIP = D_PIP / (2|V′|)`, in `[0, 1]` for normalized spaces.
pub fn reduced_pip_loss(
    a: &EmbeddingSpace,
    b: &EmbeddingSpace,
    proxy: &ProxySample,
) -> Result<f64> {
    Ok(PipComparison::new(a, b, proxy)?.reduced())
}

/// `d_PIP(w) = sqrt(Σ_{l∈V′} (a_w·a_l − b_w·b_l)²) / (2 sqrt|V′|)`.
pub fn wordwise_reduced_pip_loss(
    word: &str,
    a: &EmbeddingSpace,
    b: &EmbeddingSpace,
    proxy: &ProxySample,
) -> Result<f64> {
    PipComparison::new(a, b, proxy)?.wordwise(word)
}

/// Expected `d_PIP` of the profile's target under the Gaussian model:
/// `sqrt(Σ_l σ_l² / (2|V′|))` with `V′` the profile's queries.
pub fn expected_wordwise_pip(profile: &StabilityProfile) -> Result<f64> {
    if profile.entries.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let ss: f64 = profile.entries.iter().map(|e| e.sigma * e.sigma).sum();
    Ok(libm::sqrt(ss / (2.0 * profile.entries.len() as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, random_orthogonal};
    use crate::rng::seeded;

    fn unit_space(seed: u64, v: usize, d: usize) -> EmbeddingSpace {
        let mut r = seeded(seed);
        let words: Vec<String> = (0..v).map(|i| alloc::format!("w{i}")).collect();
        let data = (0..v * d).map(|_| rng::normal(&mut r)).collect();
        EmbeddingSpace::new(Vocabulary::new(words).unwrap(), data, d)
            .unwrap()
            .normalize()
            .unwrap()
    }

    fn full(s: &EmbeddingSpace) -> ProxySample {
        ProxySample::sample(s.vocab(), usize::MAX, 0)
    }

    fn direct(a: &EmbeddingSpace, b: &EmbeddingSpace) -> f64 {
        let mut s = 0.0;
        for k in 0..a.len() {
            for l in 0..a.len() {
                let x = dot(a.row(k), a.row(l)) - dot(b.row(k), b.row(l));
                s += x * x;
            }
        }
        libm::sqrt(s)
    }

    fn one_dim(signs: &[f64]) -> EmbeddingSpace {
        EmbeddingSpace::from_rows(
            signs
                .iter()
                .enumerate()
                .map(|(i, &s)| (alloc::format!("w{i}"), vec![s])),
        )
        .unwrap()
        .normalize()
        .unwrap()
    }

    #[test]
    fn hand_enumerated_two_words() {
        let a = one_dim(&[1.0, 1.0]);
        let b = one_dim(&[1.0, -1.0]);
        let p = full(&a);
        assert!((pip_loss(&a, &b, &p).unwrap() - 2.0 * core::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(
            (reduced_pip_loss(&a, &b, &p).unwrap() - core::f64::consts::FRAC_1_SQRT_2).abs()
                < 1e-12
        );
    }

    #[test]
    fn antipodal_closed_form_and_order_independent() {
        for v in [3usize, 10, 31] {
            let signs: Vec<f64> = (0..v)
                .map(|i| if i % 3 == 0 { -1.0 } else { 1.0 })
                .collect();
            let q = signs.iter().filter(|&&s| s < 0.0).count() as f64;
            let p = v as f64 - q;
            let a = one_dim(&vec![1.0; v]);
            let b = one_dim(&signs);
            let expect = 2.0 * libm::sqrt(2.0 * p * q) / (2.0 * v as f64);
            let proxy = full(&a);
            assert!((reduced_pip_loss(&a, &b, &proxy).unwrap() - expect).abs() < 1e-12);
            let mut rev = proxy.words.clone();
            rev.reverse();
            let rproxy = ProxySample::from_words(rev).unwrap();
            assert!((reduced_pip_loss(&a, &b, &rproxy).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_rotation_and_symmetry() {
        let a = unit_space(1, 80, 7);
        let b = unit_space(2, 80, 7);
        let p = full(&a);
        assert_eq!(pip_loss(&a, &a, &p).unwrap(), 0.0);
        let r = random_orthogonal(&mut seeded(3), 7);
        assert!(reduced_pip_loss(&a, &a.transform(&r).unwrap(), &p).unwrap() < 1e-6);
        assert_eq!(pip_loss(&a, &b, &p).unwrap(), pip_loss(&b, &a, &p).unwrap());
        let common = (
            pip_loss(&a, &b, &p).unwrap(),
            pip_loss(&a.transform(&r).unwrap(), &b.transform(&r).unwrap(), &p).unwrap(),
        );
        assert!((common.0 - common.1).abs() < 1e-9);
    }

    #[test]
    fn matches_direct_summation() {
        let a = unit_space(4, 60, 5);
        let b = unit_space(5, 60, 5);
        let p = full(&a);
        assert!((pip_loss(&a, &b, &p).unwrap() - direct(&a, &b)).abs() < 1e-9);
        for w in ["w0", "w17"] {
            let k = a.vocab().lookup(w).unwrap();
            let s: f64 = (0..60)
                .map(|l| {
                    let x = dot(a.row(k), a.row(l)) - dot(b.row(k), b.row(l));
                    x * x
                })
                .sum();
            let expect = libm::sqrt(s) / (2.0 * libm::sqrt(60.0));
            assert!((wordwise_reduced_pip_loss(w, &a, &b, &p).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn wordwise_aggregates_to_reduced() {
        let a = unit_space(6, 100, 8);
        let b = unit_space(7, 100, 8);
        let p = full(&a);
        let cmp = PipComparison::new(&a, &b, &p).unwrap();
        let mean_sq: f64 = a
            .vocab()
            .words()
            .iter()
            .map(|w| cmp.wordwise(w).unwrap().powi(2))
            .sum::<f64>()
            / 100.0;
        assert!((libm::sqrt(mean_sq) - cmp.reduced()).abs() < 1e-9);
        assert!(cmp.wordwise("w3").unwrap() > 0.0);
        let same = PipComparison::new(&a, &a, &p).unwrap();
        assert_eq!(same.wordwise("w3").unwrap(), 0.0);
    }

    #[test]
    fn bounded_and_triangle() {
        for s in 0..10 {
            let (a, b, c) = (
                unit_space(3 * s, 40, 3),
                unit_space(3 * s + 1, 40, 3),
                unit_space(3 * s + 2, 40, 3),
            );
            let p = full(&a);
            let (ab, bc, ac) = (
                pip_loss(&a, &b, &p).unwrap(),
                pip_loss(&b, &c, &p).unwrap(),
                pip_loss(&a, &c, &p).unwrap(),
            );
            assert!(ac <= ab + bc + 1e-9);
            let r = reduced_pip_loss(&a, &b, &p).unwrap();
            assert!((0.0..=1.0).contains(&r));
            assert!((0.0..=1.0).contains(&wordwise_reduced_pip_loss("w1", &a, &b, &p).unwrap()));
        }
    }

    #[test]
    fn refuses_unnormalized_and_oov() {
        let a = unit_space(1, 10, 3);
        let raw = EmbeddingSpace::new(a.vocab().clone(), a.data().to_vec(), 3).unwrap();
        assert_eq!(pip_loss(&a, &raw, &full(&a)), Err(Error::NotNormalized));
        let bad = ProxySample::from_words(vec!["nope".into()]).unwrap();
        assert!(pip_loss(&a, &a, &bad).is_err());
        assert!(ProxySample::from_words(vec!["x".into(), "x".into()]).is_err());
    }

    #[test]
    fn proxy_sampling() {
        let a = unit_space(1, 500, 2);
        let p = ProxySample::sample(a.vocab(), 100, 9);
        assert_eq!(p.len(), 100);
        assert!(Vocabulary::new(p.words.iter().cloned()).is_ok());
        assert_eq!(p, ProxySample::sample(a.vocab(), 100, 9));
        assert_ne!(p, ProxySample::sample(a.vocab(), 100, 10));
        assert_eq!(ProxySample::sample(a.vocab(), 1000, 9).len(), 500);
    }

    #[test]
    fn merged_blocks_equal_whole() {
        let a = unit_space(11, 90, 4);
        let b = unit_space(12, 90, 4);
        let p = full(&a);
        let (ra, rb) = (proxy_rows(&a, &p).unwrap(), proxy_rows(&b, &p).unwrap());
        let whole = CrossGram::from_rows(&ra, &rb, 4);
        let mut merged = CrossGram::zeros(4);
        for (ca, cb) in ra.chunks(4 * 32).zip(rb.chunks(4 * 32)) {
            merged.merge(&CrossGram::from_rows(ca, cb, 4));
        }
        assert_eq!(merged.rows, 90);
        assert!((merged.pip_squared() - whole.pip_squared()).abs() < 1e-9);
    }

    #[test]
    fn expected_wordwise_cases() {
        let zero = StabilityProfile::from_params("t", &[(0.1, 0.0); 5], 2);
        assert_eq!(expected_wordwise_pip(&zero).unwrap(), 0.0);
        let c = StabilityProfile::from_params("t", &[(0.1, 0.03); 7], 2);
        assert!(
            (expected_wordwise_pip(&c).unwrap() - 0.03 / core::f64::consts::SQRT_2).abs() < 1e-15
        );
        let empty = StabilityProfile {
            target: "t".into(),
            entries: vec![],
        };
        assert!(expected_wordwise_pip(&empty).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn prop_pip_symmetric_and_rotation_invariant(seed in 0u64..10_000, d in 2usize..8) {
            let a = crate::synthetic::gaussian_space(30, d, seed);
            let b = crate::synthetic::gaussian_space(30, d, seed + 1);
            let proxy = ProxySample::sample(a.vocab(), 30, seed);
            let ab = reduced_pip_loss(&a, &b, &proxy).unwrap();
            proptest::prop_assert!(ab >= 0.0);
            proptest::prop_assert!((ab - reduced_pip_loss(&b, &a, &proxy).unwrap()).abs() < 1e-9 * ab.max(1.0));
            let r = random_orthogonal(&mut seeded(seed), d);
            let rotated = reduced_pip_loss(&a.transform(&r).unwrap(), &b, &proxy).unwrap();
            proptest::prop_assert!((ab - rotated).abs() < 1e-9 * ab.max(1.0));
        }
    }
}
