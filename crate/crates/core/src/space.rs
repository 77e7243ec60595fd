//! Vocabulary, embedding spaces and the elementary geometry on them.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, row_times};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
    freq: Option<Vec<u64>>,
}

impl Vocabulary {
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut v = Vocabulary::default();
        for w in words {
            let w = w.into();
            if v.index.contains_key(&w) {
                return Err(Error::DuplicateWord(w));
            }
            v.index.insert(w.clone(), v.words.len());
            v.words.push(w);
        }
        Ok(v)
    }

    pub fn with_frequencies<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, u64)>,
    ) -> Result<Self> {
        let (words, counts): (Vec<String>, Vec<u64>) =
            pairs.into_iter().map(|(w, c)| (w.into(), c)).unzip();
        let mut v = Vocabulary::new(words)?;
        v.set_frequencies(counts)?;
        Ok(v)
    }

    /// Attaches counts aligned with `words()`. All counts must be ≥ 1.
    pub fn set_frequencies(&mut self, counts: Vec<u64>) -> Result<()> {
        if counts.len() != self.words.len() {
            return Err(Error::DimensionMismatch {
                expected: self.words.len(),
                got: counts.len(),
            });
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "frequency of '{}' must be >= 1",
                self.words[i]
            )));
        }
        self.freq = Some(counts);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn lookup(&self, word: &str) -> Result<usize> {
        self.get(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))
    }

    pub fn frequencies(&self) -> Option<&[u64]> {
        self.freq.as_deref()
    }

    pub fn frequency(&self, word: &str) -> Option<u64> {
        let i = self.get(word)?;
        self.freq.as_ref().map(|f| f[i])
    }

    /// Sub-vocabulary in the order given; frequencies carried over when present.
    pub fn subset(&self, words: &[String]) -> Result<Vocabulary> {
        let mut v = Vocabulary::new(words.iter().cloned())?;
        if let Some(f) = &self.freq {
            let counts = words
                .iter()
                .map(|w| self.lookup(w).map(|i| f[i]))
                .collect::<Result<_>>()?;
            v.freq = Some(counts);
        } else {
            for w in words {
                self.lookup(w)?;
            }
        }
        Ok(v)
    }
}

/// Intersection of vocabularies, in the order of the first one.
pub fn joint_vocabulary(spaces: &[&EmbeddingSpace]) -> Vocabulary {
    let Some((first, rest)) = spaces.split_first() else {
        return Vocabulary::default();
    };
    let words: Vec<String> = first
        .vocab
        .words()
        .iter()
        .filter(|w| rest.iter().all(|s| s.vocab.contains(w)))
        .cloned()
        .collect();
    first
        .vocab
        .subset(&words)
        .expect("subset of a valid vocabulary")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    vocab: Vocabulary,
    data: Vec<f64>,
    dim: usize,
    normalized: bool,
}

impl EmbeddingSpace {
    /// `data` is row-major `|vocab| × dim`.
    pub fn new(vocab: Vocabulary, data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if data.len() != vocab.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: vocab.len() * dim,
                got: data.len(),
            });
        }
        Ok(EmbeddingSpace {
            vocab,
            data,
            dim,
            normalized: false,
        })
    }

    pub fn from_rows<S: Into<String>>(
        rows: impl IntoIterator<Item = (S, Vec<f64>)>,
    ) -> Result<Self> {
        let mut words = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (w, row) in rows {
            let d = *dim.get_or_insert(row.len());
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            words.push(w.into());
            data.extend_from_slice(&row);
        }
        let dim = dim.ok_or(Error::EmptyVocabulary)?;
        EmbeddingSpace::new(Vocabulary::new(words)?, data, dim)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_mut(&mut self) -> &mut Vocabulary {
        &mut self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, word: &str) -> Result<&[f64]> {
        Ok(self.row(self.vocab.lookup(word)?))
    }

    /// Rows scaled to unit length. Errors on the first zero row.
    pub fn normalize(&self) -> Result<EmbeddingSpace> {
        let mut data = self.data.clone();
        for (i, row) in data.chunks_mut(self.dim).enumerate() {
            let n = norm(row);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::ZeroVector(self.vocab.word(i).to_string()));
            }
            row.iter_mut().for_each(|x| *x /= n);
        }
        Ok(EmbeddingSpace {
            vocab: self.vocab.clone(),
            data,
            dim: self.dim,
            normalized: true,
        })
    }

    /// Like `normalize`, but zero rows are dropped and their words returned.
    pub fn normalize_dropping_zeros(&self) -> (EmbeddingSpace, Vec<String>) {
        let mut keep = Vec::new();
        let mut dropped = Vec::new();
        for (i, w) in self.vocab.words().iter().enumerate() {
            let n = norm(self.row(i));
            if n > 0.0 && n.is_finite() {
                keep.push(w.clone());
            } else {
                dropped.push(w.clone());
            }
        }
        let kept = if dropped.is_empty() {
            self.clone()
        } else {
            self.restrict(&keep).expect("own words")
        };
        (kept.normalize().expect("zero rows removed"), dropped)
    }

    pub fn cosine(&self, w1: &str, w2: &str) -> Result<f64> {
        let i = self.vocab.lookup(w1)?;
        let j = self.vocab.lookup(w2)?;
        self.cosine_idx(i, j)
    }

    pub fn cosine_idx(&self, i: usize, j: usize) -> Result<f64> {
        let (a, b) = (self.row(i), self.row(j));
        if self.normalized {
            return Ok(dot(a, b).clamp(-1.0, 1.0));
        }
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 {
            return Err(Error::ZeroVector(self.vocab.word(i).to_string()));
        }
        if nb == 0.0 {
            return Err(Error::ZeroVector(self.vocab.word(j).to_string()));
        }
        Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
    }

    /// Cosines from row `i` to every row (entry `i` included).
    pub fn cosines_from(&self, i: usize) -> Result<Vec<f64>> {
        let a = self.row(i);
        let na = if self.normalized { 1.0 } else { norm(a) };
        if na == 0.0 {
            return Err(Error::ZeroVector(self.vocab.word(i).to_string()));
        }
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.len() {
            let b = self.row(j);
            let nb = if self.normalized { 1.0 } else { norm(b) };
            out.push(if nb == 0.0 {
                0.0
            } else {
                (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
            });
        }
        Ok(out)
    }

    /// The `n` most similar words to `target` (target excluded), by descending
    /// cosine and then ascending word.
    pub fn nearest_neighbors(&self, target: &str, n: usize) -> Result<Vec<(String, f64)>> {
        let t = self.vocab.lookup(target)?;
        if n == 0 || n + 1 > self.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "n = {n} out of range for vocabulary of {}",
                self.len()
            )));
        }
        let cos = self.cosines_from(t)?;
        let mut idx: Vec<usize> = (0..self.len()).filter(|&j| j != t).collect();
        let cmp = |&a: &usize, &b: &usize| {
            rank_order(cos[a], self.vocab.word(a), cos[b], self.vocab.word(b))
        };
        if n < idx.len() {
            idx.select_nth_unstable_by(n - 1, cmp);
            idx.truncate(n);
        }
        idx.sort_unstable_by(cmp);
        Ok(idx
            .into_iter()
            .map(|j| (self.vocab.word(j).to_string(), cos[j]))
            .collect())
    }

    /// The space restricted to `words`, rows in that order.
    pub fn restrict(&self, words: &[String]) -> Result<EmbeddingSpace> {
        let vocab = self.vocab.subset(words)?;
        let mut data = Vec::with_capacity(words.len() * self.dim);
        for w in words {
            data.extend_from_slice(self.vector(w)?);
        }
        Ok(EmbeddingSpace {
            vocab,
            data,
            dim: self.dim,
            normalized: self.normalized,
        })
    }

    /// `V · M` for a row-major `d×d` matrix. An orthogonal `M` keeps the normalized flag.
    pub fn transform(&self, m: &[f64]) -> Result<EmbeddingSpace> {
        if m.len() != self.dim * self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim * self.dim,
                got: m.len(),
            });
        }
        let mut data = alloc::vec![0.0; self.data.len()];
        for (src, dst) in self.data.chunks(self.dim).zip(data.chunks_mut(self.dim)) {
            row_times(src, m, dst);
        }
        let normalized =
            self.normalized && data.chunks(self.dim).all(|r| (norm(r) - 1.0).abs() < 1e-9);
        Ok(EmbeddingSpace {
            vocab: self.vocab.clone(),
            data,
            dim: self.dim,
            normalized,
        })
    }

    /// Rebuilds a space from parts without copying; `normalized` is verified.
    pub(crate) fn from_parts(
        vocab: Vocabulary,
        data: Vec<f64>,
        dim: usize,
        normalized: bool,
    ) -> Self {
        debug_assert_eq!(data.len(), vocab.len() * dim);
        EmbeddingSpace {
            vocab,
            data,
            dim,
            normalized,
        }
    }
}

/// Ranking order used everywhere: higher score first, then lexicographic word.
pub fn rank_order(sa: f64, wa: &str, sb: f64, wb: &str) -> Ordering {
    sb.partial_cmp(&sa)
        .unwrap_or(Ordering::Equal)
        .then_with(|| wa.cmp(wb))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalogyDataset {
    pub questions: Vec<[String; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogyScore {
    pub accuracy: f64,
    pub coverage: f64,
    pub answered: usize,
    pub total: usize,
}

/// 3CosAdd analogy accuracy: the answer to `a : b :: c : ?` is the word
/// maximizing `cos(x, b) − cos(x, a) + cos(x, c)` over the evaluation
/// vocabulary, excluding `a`, `b` and `c`.
pub fn analogy_score(
    space: &EmbeddingSpace,
    dataset: &AnalogyDataset,
    restrict_to: Option<&[String]>,
) -> Result<AnalogyScore> {
    let total = dataset.questions.len();
    let eval: Vec<usize> = match restrict_to {
        Some(list) => {
            let mut idx: Vec<usize> = list.iter().filter_map(|w| space.vocab.get(w)).collect();
            idx.sort_unstable();
            idx.dedup();
            idx
        }
        None => (0..space.len()).collect(),
    };
    let mut in_eval = alloc::vec![false; space.len()];
    for &i in &eval {
        in_eval[i] = true;
    }
    let unit = if space.normalized {
        space.clone()
    } else {
        space.normalize()?
    };
    let d = space.dim;
    let mut answered = 0usize;
    let mut correct = 0usize;
    let mut query = alloc::vec![0.0; d];
    for q in &dataset.questions {
        let ids: Option<Vec<usize>> = q
            .iter()
            .map(|w| space.vocab.get(w).filter(|&i| in_eval[i]))
            .collect();
        let Some(ids) = ids else { continue };
        answered += 1;
        let (a, b, c) = (unit.row(ids[0]), unit.row(ids[1]), unit.row(ids[2]));
        for k in 0..d {
            query[k] = b[k] - a[k] + c[k];
        }
        let mut best: Option<(f64, usize)> = None;
        for &j in &eval {
            if j == ids[0] || j == ids[1] || j == ids[2] {
                continue;
            }
            let s = dot(unit.row(j), &query);
            let better = match best {
                None => true,
                Some((bs, bj)) => {
                    rank_order(s, space.vocab.word(j), bs, space.vocab.word(bj)) == Ordering::Less
                }
            };
            if better {
                best = Some((s, j));
            }
        }
        if best.map(|(_, j)| j) == Some(ids[3]) {
            correct += 1;
        }
    }
    Ok(AnalogyScore {
        accuracy: if answered == 0 {
            0.0
        } else {
            correct as f64 / answered as f64
        },
        coverage: if total == 0 {
            0.0
        } else {
            answered as f64 / total as f64
        },
        answered,
        total,
    })
}
