//! Skip-gram with negative sampling, single-threaded and fully deterministic.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::rng::{self, Rng};
use crate::space::{EmbeddingSpace, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    /// Maximum context words on each side.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub subsample_t: f64,
    pub min_count: u64,
    pub seed: u64,
    /// Draw the effective window uniformly from `1..=window` at every position.
    pub dynamic_window: bool,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            subsample_t: 1e-5,
            min_count: 5,
            seed: 1,
            dynamic_window: true,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.dim == 0 || self.window == 0 || self.negatives == 0 || self.min_count == 0 {
            return bad("dim, window, negatives and min_count must be positive");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be positive");
        }
        if !(self.subsample_t > 0.0 && self.subsample_t <= 1.0) {
            return bad("subsample_t must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Words occurring at least `min_count` times, by descending count then word.
pub fn build_vocab(corpus: &Corpus, min_count: u64) -> Vocabulary {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in &corpus.documents {
        for t in doc {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::with_frequencies(kept.into_iter().map(|(w, c)| (String::from(w), c)))
        .expect("counted words are unique and positive")
}

/// Probability of discarding a token of relative frequency `f`.
pub fn subsample_probability(f: f64, t: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::InvalidArgument(
            "relative frequency must be positive".into(),
        ));
    }
    Ok((1.0 - libm::sqrt(t / f)).max(0.0))
}

/// Unigram distribution raised to the 3/4 power.
pub fn noise_distribution(vocab: &Vocabulary) -> Result<Vec<f64>> {
    let f = vocab
        .frequencies()
        .ok_or_else(|| Error::InvalidArgument("vocabulary has no frequencies".into()))?;
    if f.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let w: Vec<f64> = f.iter().map(|&c| libm::pow(c as f64, 0.75)).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTable {
    cdf: Vec<f64>,
}

impl NoiseTable {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        NoiseTable { cdf }
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u = rng::unit(rng);
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -libm::log1p(libm::exp(-x))
    } else {
        x - libm::log1p(libm::exp(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState {
    pub dim: usize,
    /// `v_i`, row-major `v×d`.
    pub input: Vec<f64>,
    /// `v_o`, row-major `v×d`.
    pub output: Vec<f64>,
    pub noise: NoiseTable,
    negs: Vec<usize>,
    coef: Vec<f64>,
    grad: Vec<f64>,
}

impl TrainingState {
    /// `v_i` uniform in `±0.5/d`, `v_o` zero.
    pub fn new(vocab: &Vocabulary, dim: usize, rng: &mut Rng) -> Result<Self> {
        let noise = NoiseTable::new(&noise_distribution(vocab)?);
        let v = vocab.len();
        let input = (0..v * dim)
            .map(|_| (rng::unit(rng) - 0.5) / dim as f64)
            .collect();
        Ok(Self::from_parts(dim, input, vec![0.0; v * dim], noise))
    }

    pub fn from_parts(dim: usize, input: Vec<f64>, output: Vec<f64>, noise: NoiseTable) -> Self {
        TrainingState {
            dim,
            input,
            output,
            noise,
            negs: Vec::new(),
            coef: Vec::new(),
            grad: vec![0.0; dim],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.input.len() / self.dim
    }

    fn vi(&self, w: usize) -> &[f64] {
        &self.input[w * self.dim..(w + 1) * self.dim]
    }

    fn vo(&self, w: usize) -> &[f64] {
        &self.output[w * self.dim..(w + 1) * self.dim]
    }

    /// Draws `k` noise words; a draw equal to `context` is redrawn once, then kept.
    pub fn draw_negatives(&self, context: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
        (0..k)
            .map(|_| {
                let n = self.noise.sample(rng);
                if n == context {
                    self.noise.sample(rng)
                } else {
                    n
                }
            })
            .collect()
    }

    /// `log σ(v_o(c)·v_i(t)) + Σ_n log σ(−v_o(n)·v_i(t))`.
    pub fn objective(&self, target: usize, context: usize, negatives: &[usize]) -> f64 {
        let vi = self.vi(target);
        log_sigmoid(dot(self.vo(context), vi))
            + negatives
                .iter()
                .map(|&n| log_sigmoid(-dot(self.vo(n), vi)))
                .sum::<f64>()
    }

    /// One ascent step with freshly drawn negatives.
    pub fn step(&mut self, target: usize, context: usize, lr: f64, k: usize, rng: &mut Rng) {
        let mut negs = core::mem::take(&mut self.negs);
        negs.clear();
        for _ in 0..k {
            let n = self.noise.sample(rng);
            negs.push(if n == context {
                self.noise.sample(rng)
            } else {
                n
            });
        }
        self.step_with(target, context, &negs, lr);
        self.negs = negs;
    }

    /// One ascent step with the given negatives. All gradients are taken at
    /// the current parameters and then applied together, so repeated words
    /// accumulate exactly as in the gradient of `objective`.
    pub fn step_with(&mut self, target: usize, context: usize, negatives: &[usize], lr: f64) {
        let d = self.dim;
        let mut coef = core::mem::take(&mut self.coef);
        coef.clear();
        let vi = self.vi(target);
        // ∂/∂x log σ(x) = σ(−x); ∂/∂x log σ(−x) = −σ(x)
        coef.push(sigmoid(-dot(self.vo(context), vi)));
        coef.extend(negatives.iter().map(|&n| -sigmoid(dot(self.vo(n), vi))));
        self.coef = coef;
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        for (j, &w) in core::iter::once(&context).chain(negatives).enumerate() {
            let c = self.coef[j];
            for k in 0..d {
                self.grad[k] += c * self.output[w * d + k];
            }
        }
        for (j, &w) in core::iter::once(&context).chain(negatives).enumerate() {
            let c = lr * self.coef[j];
            for k in 0..d {
                self.output[w * d + k] += c * self.input[target * d + k];
            }
        }
        for k in 0..d {
            self.input[target * d + k] += lr * self.grad[k];
        }
    }
}

/// Trains on `corpus` and returns the input vectors as the embedding space
/// (unnormalized, frequencies attached).
pub fn train(corpus: &Corpus, config: &SgnsConfig) -> Result<EmbeddingSpace> {
    config.validate()?;
    let vocab = build_vocab(corpus, config.min_count);
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut rng = rng::seeded(config.seed);
    let mut state = TrainingState::new(&vocab, config.dim, &mut rng)?;
    let docs: Vec<Vec<usize>> = corpus
        .documents
        .iter()
        .map(|d| d.iter().filter_map(|t| vocab.get(t)).collect())
        .collect();
    let freqs = vocab.frequencies().expect("built with frequencies");
    let total: u64 = freqs.iter().sum();
    let discard: Vec<f64> = freqs
        .iter()
        .map(|&c| subsample_probability(c as f64 / total as f64, config.subsample_t))
        .collect::<Result<_>>()?;
    let total_steps = (config.epochs as f64) * (total as f64);
    let mut processed = 0u64;
    let mut kept: Vec<usize> = Vec::new();
    for _ in 0..config.epochs {
        for doc in &docs {
            kept.clear();
            for &w in doc {
                if discard[w] <= 0.0 || rng::unit(&mut rng) >= discard[w] {
                    kept.push(w);
                }
            }
            // Progress counts every in-vocabulary token, discarded or not.
            let stride = doc.len() as f64 / kept.len().max(1) as f64;
            for pos in 0..kept.len() {
                let progress = (processed as f64 + pos as f64 * stride) / total_steps;
                let lr = config.initial_lr * (1.0 - progress).max(1e-4);
                let b = if config.dynamic_window {
                    1 + rng::index(&mut rng, config.window)
                } else {
                    config.window
                };
                let lo = pos.saturating_sub(b);
                let hi = (pos + b).min(kept.len() - 1);
                for c in lo..=hi {
                    if c != pos {
                        state.step(kept[pos], kept[c], lr, config.negatives, &mut rng);
                    }
                }
            }
            processed += doc.len() as u64;
        }
    }
    EmbeddingSpace::new(vocab, state.input, config.dim)
}
