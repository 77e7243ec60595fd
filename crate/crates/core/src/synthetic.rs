//! Seeded synthetic data: Gaussian run sets with planted cosine statistics,
//! perturbed spaces, Monte-Carlo references, and topic-structured corpora.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Corpus, Document, SamplingMode};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::runs::RunSet;
use crate::sgns::NoiseTable;
use crate::space::{EmbeddingSpace, Vocabulary};

/// Normalized space of `v` Gaussian rows named `w0, w1, …`.
pub fn gaussian_space(v: usize, d: usize, seed: u64) -> EmbeddingSpace {
    let mut r = rng::seeded(seed);
    let words: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
    let data = (0..v * d).map(|_| rng::normal(&mut r)).collect();
    EmbeddingSpace::new(Vocabulary::new(words).expect("distinct"), data, d)
        .expect("shape")
        .normalize()
        .expect("Gaussian rows are non-zero")
}

/// `normalize(b_w + s_w·g_w)` with `g_w` standard Gaussian; `scales` holds one
/// `s_w` per row, or a single value for all rows.
pub fn perturbed_space(base: &EmbeddingSpace, scales: &[f64], seed: u64) -> Result<EmbeddingSpace> {
    if scales.len() != 1 && scales.len() != base.len() {
        return Err(Error::DimensionMismatch {
            expected: base.len(),
            got: scales.len(),
        });
    }
    let mut r = rng::seeded(seed);
    let d = base.dim();
    let data = base
        .data()
        .chunks(d)
        .enumerate()
        .flat_map(|(i, row)| {
            let s = if scales.len() == 1 {
                scales[0]
            } else {
                scales[i]
            };
            row.iter()
                .map(|x| x + s * rng::normal(&mut r))
                .collect::<Vec<_>>()
        })
        .collect();
    EmbeddingSpace::new(base.vocab().clone(), data, d)?.normalize()
}

/// Target word of the star construction.
pub const STAR_TARGET: &str = "target";

/// `target, q0, …, q{k−1}`; query names match `StabilityProfile::from_params`.
pub fn star_vocabulary(k: usize) -> Vocabulary {
    Vocabulary::new(
        core::iter::once(String::from(STAR_TARGET)).chain((0..k).map(|i| format!("q{i}"))),
    )
    .expect("distinct")
}

/// A 2-d space where `cos(target, q_l)` is drawn from `N(μ_l, σ_l²)` (clamped
/// to [−1, 1]): the target is `e₀` and `q_l = (c, sqrt(1 − c²))`. Only the
/// target's cosines are controlled.
pub fn star_space(
    vocab: &Vocabulary,
    params: &[(f64, f64)],
    rng: &mut Rng,
) -> Result<EmbeddingSpace> {
    if vocab.len() != params.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: params.len() + 1,
            got: vocab.len(),
        });
    }
    let mut data = Vec::with_capacity(2 * vocab.len());
    data.extend_from_slice(&[1.0, 0.0]);
    for &(mu, sigma) in params {
        let c = (mu + sigma * rng::normal(rng)).clamp(-1.0, 1.0);
        data.push(c);
        data.push(libm::sqrt(1.0 - c * c));
    }
    EmbeddingSpace::new(vocab.clone(), data, 2)?.normalize()
}

/// `r` independent star spaces.
pub fn star_runs(params: &[(f64, f64)], r: usize, seed: u64) -> Result<RunSet> {
    let vocab = star_vocabulary(params.len());
    let mut g = rng::seeded(seed);
    let spaces = (0..r)
        .map(|_| star_space(&vocab, params, &mut g))
        .collect::<Result<Vec<_>>>()?;
    RunSet::new(spaces, SamplingMode::Shuffled { seed }, "star")
}

/// `k` (μ, σ) pairs shaped like a nearest-neighbor profile: a leading cosine
/// near 0.5–0.7, exponentially distributed gaps whose scale varies per
/// profile, and σ uniform in [0.005, 0.03]. Varying the gap scale moves the
/// competition for the top places from near-certain to wide open.
pub fn random_profile_params(rng: &mut Rng, k: usize) -> Vec<(f64, f64)> {
    let top = 0.5 + 0.2 * rng::unit(rng);
    let gap = 0.002 + 0.03 * rng::unit(rng);
    let mut mu = top;
    (0..k)
        .map(|_| {
            let sigma = 0.005 + 0.025 * rng::unit(rng);
            let p = (mu, sigma);
            mu -= gap * -libm::log(1.0 - rng::unit(rng));
            p
        })
        .collect()
}

/// Monte-Carlo estimate of the probability that each query lands in the top
/// `n` cosines, drawing all cosines independently `samples` times.
pub fn monte_carlo_top_n(
    params: &[(f64, f64)],
    n: usize,
    samples: usize,
    rng: &mut Rng,
) -> Vec<f64> {
    let k = params.len();
    let mut hits = vec![0u64; k];
    let mut draw = vec![0.0; k];
    let mut order: Vec<usize> = (0..k).collect();
    for _ in 0..samples {
        for (x, &(mu, s)) in draw.iter_mut().zip(params) {
            *x = mu + s * rng::normal(rng);
        }
        if n == 1 {
            let best = (0..k).fold(0, |b, i| if draw[i] > draw[b] { i } else { b });
            hits[best] += 1;
        } else {
            order.sort_unstable_by(|&a, &b| draw[b].total_cmp(&draw[a]));
            for &i in &order[..n.min(k)] {
                hits[i] += 1;
            }
        }
    }
    hits.into_iter()
        .map(|h| h as f64 / samples as f64)
        .collect()
}

/// Samples from a Zipf law over `n` ranks with exponent `s`.
#[derive(Debug, Clone)]
pub struct Zipf(NoiseTable);

impl Zipf {
    pub fn new(n: usize, s: f64) -> Zipf {
        let w: Vec<f64> = (1..=n).map(|i| libm::pow(i as f64, -s)).collect();
        let total: f64 = w.iter().sum();
        Zipf(NoiseTable::new(
            &w.iter().map(|x| x / total).collect::<Vec<_>>(),
        ))
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        self.0.sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCorpusConfig {
    pub documents: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    /// Words shared by all topics (function-word stand-ins).
    pub shared_words: usize,
    pub doc_len: usize,
    /// Probability that a token is a shared word.
    pub shared_prob: f64,
    pub zipf_exponent: f64,
}

impl Default for TopicCorpusConfig {
    fn default() -> Self {
        TopicCorpusConfig {
            documents: 2000,
            topics: 10,
            words_per_topic: 40,
            shared_words: 30,
            doc_len: 30,
            shared_prob: 0.3,
            zipf_exponent: 1.0,
        }
    }
}

pub fn topic_word(topic: usize, i: usize) -> String {
    format!("t{topic}w{i}")
}

pub fn shared_word(i: usize) -> String {
    format!("s{i}")
}

/// Generates documents topic by topic; returns each document's topic too.
pub struct TopicSampler {
    cfg: TopicCorpusConfig,
    topic_zipf: Zipf,
    shared_zipf: Zipf,
    words: Vec<Vec<String>>,
    shared: Vec<String>,
}

impl TopicSampler {
    pub fn new(cfg: &TopicCorpusConfig) -> Result<Self> {
        if cfg.topics == 0 || cfg.words_per_topic == 0 || cfg.doc_len == 0 {
            return Err(Error::InvalidArgument(
                "topics, words_per_topic and doc_len must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&cfg.shared_prob)
            || (cfg.shared_words == 0 && cfg.shared_prob > 0.0)
        {
            return Err(Error::InvalidArgument(
                "shared_prob must be in [0, 1] with shared words available".into(),
            ));
        }
        Ok(TopicSampler {
            topic_zipf: Zipf::new(cfg.words_per_topic, cfg.zipf_exponent),
            shared_zipf: Zipf::new(cfg.shared_words.max(1), cfg.zipf_exponent),
            words: (0..cfg.topics)
                .map(|t| (0..cfg.words_per_topic).map(|i| topic_word(t, i)).collect())
                .collect(),
            shared: (0..cfg.shared_words).map(shared_word).collect(),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &TopicCorpusConfig {
        &self.cfg
    }

    pub fn token(&self, topic: usize, rng: &mut Rng) -> String {
        if self.cfg.shared_prob > 0.0 && rng::unit(rng) < self.cfg.shared_prob {
            self.shared[self.shared_zipf.sample(rng)].clone()
        } else {
            self.words[topic][self.topic_zipf.sample(rng)].clone()
        }
    }

    pub fn document(&self, topic: usize, rng: &mut Rng) -> Document {
        (0..self.cfg.doc_len)
            .map(|_| self.token(topic, rng))
            .collect()
    }

    /// `(topic, document)` with a uniformly drawn topic.
    pub fn draw(&self, rng: &mut Rng) -> (usize, Document) {
        let t = rng::index(rng, self.cfg.topics);
        (t, self.document(t, rng))
    }
}

/// A corpus of single-topic documents.
pub fn topic_corpus(cfg: &TopicCorpusConfig, seed: u64) -> Result<Corpus> {
    let s = TopicSampler::new(cfg)?;
    let mut r = rng::seeded(seed);
    Ok(Corpus::new(
        (0..cfg.documents).map(|_| s.draw(&mut r).1).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextSwapConfig {
    pub corpus: TopicCorpusConfig,
    pub pseudoword: String,
    /// Topic whose documents carry the pseudoword in the first epoch.
    pub from_topic: usize,
    /// Topic whose documents carry it in the second epoch.
    pub to_topic: usize,
    /// Occurrences inserted into each carrying document.
    pub per_document: usize,
    /// Number of unchanged control words.
    pub controls: usize,
}

impl Default for ContextSwapConfig {
    fn default() -> Self {
        ContextSwapConfig {
            corpus: TopicCorpusConfig::default(),
            pseudoword: "banak".into(),
            from_topic: 0,
            to_topic: 1,
            per_document: 2,
            controls: 30,
        }
    }
}

/// Two epoch corpora from the same topic model. The pseudoword replaces
/// `per_document` tokens of every `from_topic` document in the first epoch and
/// of every `to_topic` document in the second. Controls are the most frequent
/// topic words, taken round-robin over topics, used identically in both epochs.
pub fn context_swap_corpora(
    cfg: &ContextSwapConfig,
    seed: u64,
) -> Result<(Corpus, Corpus, Vec<String>)> {
    let s = TopicSampler::new(&cfg.corpus)?;
    let (k, wpt) = (cfg.corpus.topics, cfg.corpus.words_per_topic);
    if cfg.from_topic >= k || cfg.to_topic >= k || cfg.from_topic == cfg.to_topic {
        return Err(Error::InvalidArgument(
            "from_topic and to_topic must be distinct topics".into(),
        ));
    }
    if cfg.controls > k * wpt || cfg.per_document > cfg.corpus.doc_len {
        return Err(Error::InvalidArgument(
            "too many controls or insertions".into(),
        ));
    }
    let mut r = rng::seeded(seed);
    let mut epoch = |carrier: usize| {
        let docs = (0..cfg.corpus.documents)
            .map(|_| {
                let (t, mut doc) = s.draw(&mut r);
                if t == carrier {
                    for _ in 0..cfg.per_document {
                        let p = rng::index(&mut r, doc.len());
                        doc[p] = cfg.pseudoword.clone();
                    }
                }
                doc
            })
            .collect();
        Corpus::new(docs)
    };
    let t1 = epoch(cfg.from_topic);
    let t2 = epoch(cfg.to_topic);
    let controls = (0..cfg.controls)
        .map(|i| topic_word(i % k, i / k))
        .collect();
    Ok((t1, t2, controls))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiachronicConfig {
    /// Background documents per epoch.
    pub background: TopicCorpusConfig,
    /// Independent (before, after) epoch pairs.
    pub epoch_pairs: usize,
    pub targets: usize,
    /// Expected occurrences of a target per epoch, log-uniform in this range.
    pub min_frequency: f64,
    pub max_frequency: f64,
    /// Planted drift model on the standardized scale:
    /// `z(log p) = beta_f·z(log f) + sigma_z·u(w) + sigma_eps·e(w, k)`.
    pub beta_f: f64,
    pub sigma_z: f64,
    pub sigma_eps: f64,
    /// Median drift fraction and the std of `log p`.
    pub drift_median: f64,
    pub drift_log_sd: f64,
    /// Target occurrences per carrying document, and those documents' length.
    pub occurrences_per_doc: usize,
    pub doc_len: usize,
}

impl Default for DiachronicConfig {
    fn default() -> Self {
        DiachronicConfig {
            background: TopicCorpusConfig {
                documents: 1000,
                ..TopicCorpusConfig::default()
            },
            epoch_pairs: 2,
            targets: 200,
            min_frequency: 40.0,
            max_frequency: 400.0,
            beta_f: -0.6,
            sigma_z: 0.565_685_424_949_238,
            sigma_eps: 0.565_685_424_949_238,
            drift_median: 0.1,
            drift_log_sd: 1.0,
            occurrences_per_doc: 1,
            doc_len: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTarget {
    pub word: String,
    /// Expected occurrences per epoch.
    pub frequency: f64,
    pub home_topic: usize,
    pub alt_topic: usize,
    /// Fraction of carrying documents moved to `alt_topic` in the second
    /// epoch of each pair.
    pub drifts: Vec<f64>,
    /// Fraction actually moved in each pair (drift rounded to whole documents).
    pub realized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiachronicCorpus {
    /// `2·epoch_pairs` corpora: pair `k` is `(epochs[2k], epochs[2k+1])`.
    pub epochs: Vec<Corpus>,
    pub targets: Vec<PlantedTarget>,
}

/// Epoch pairs with planted, frequency-dependent change. In the first epoch
/// of a pair every target occurs only in documents of its home topic; in the
/// second exactly `round(p·n)` of its `n` carrying documents switch to a fixed
/// alternative topic. The planted relation lives on `log p`; measured change
/// is monotone in `p`, with `log Δ` close to linear in `log p`, so the
/// standardized frequency slope carries over when measurement noise is small.
pub fn diachronic_corpus(cfg: &DiachronicConfig, seed: u64) -> Result<DiachronicCorpus> {
    let k = cfg.background.topics;
    if k < 2 || cfg.targets < 2 || cfg.epoch_pairs == 0 || cfg.occurrences_per_doc == 0 {
        return Err(Error::InvalidArgument(
            "need >= 2 topics, >= 2 targets, >= 1 pair and occurrences".into(),
        ));
    }
    if cfg.occurrences_per_doc > cfg.doc_len
        || !(cfg.min_frequency > 0.0 && cfg.max_frequency >= cfg.min_frequency)
    {
        return Err(Error::InvalidArgument(
            "inconsistent document or frequency settings".into(),
        ));
    }
    let sampler = TopicSampler::new(&cfg.background)?;
    let mut r = rng::seeded(seed);
    let (llo, lhi) = (libm::log(cfg.min_frequency), libm::log(cfg.max_frequency));
    let logf: Vec<f64> = (0..cfg.targets)
        .map(|_| llo + (lhi - llo) * rng::unit(&mut r))
        .collect();
    let (m, s) = (crate::stats::mean(&logf), crate::stats::std_dev(&logf));
    let mut targets: Vec<PlantedTarget> = logf
        .iter()
        .enumerate()
        .map(|(i, &lf)| {
            let zf = if s > 0.0 { (lf - m) / s } else { 0.0 };
            let u = rng::normal(&mut r);
            let home = rng::index(&mut r, k);
            let alt = (home + 1 + rng::index(&mut r, k - 1)) % k;
            let drifts = (0..cfg.epoch_pairs)
                .map(|_| {
                    let z = cfg.beta_f * zf + cfg.sigma_z * u + cfg.sigma_eps * rng::normal(&mut r);
                    (cfg.drift_median * libm::exp(cfg.drift_log_sd * z)).min(0.95)
                })
                .collect();
            PlantedTarget {
                word: format!("x{i}"),
                frequency: libm::exp(lf),
                home_topic: home,
                alt_topic: alt,
                drifts,
                realized: Vec::new(),
            }
        })
        .collect();
    let mut epochs = Vec::with_capacity(2 * cfg.epoch_pairs);
    for pair in 0..cfg.epoch_pairs {
        for after in [false, true] {
            let mut docs: Vec<Document> = (0..cfg.background.documents)
                .map(|_| sampler.draw(&mut r).1)
                .collect();
            for t in targets.iter_mut() {
                let n = libm::round(t.frequency) as usize;
                let n_docs = n.div_ceil(cfg.occurrences_per_doc);
                // exactly round(p·n_docs) carrying documents move, so the
                // realized drift does not add binomial noise for rare words
                let moved = if after {
                    libm::round(t.drifts[pair] * n_docs as f64) as usize
                } else {
                    0
                };
                let mut topics: Vec<usize> = (0..n_docs)
                    .map(|i| if i < moved { t.alt_topic } else { t.home_topic })
                    .collect();
                rng::shuffle(&mut r, &mut topics);
                if after {
                    t.realized.push(moved as f64 / n_docs.max(1) as f64);
                }
                let mut left = n;
                for &topic in &topics {
                    let here = left.min(cfg.occurrences_per_doc);
                    left -= here;
                    let mut doc: Document = (0..cfg.doc_len)
                        .map(|_| sampler.token(topic, &mut r))
                        .collect();
                    for _ in 0..here {
                        let p = rng::index(&mut r, doc.len());
                        doc[p] = t.word.clone();
                    }
                    docs.push(doc);
                }
            }
            rng::shuffle(&mut r, &mut docs);
            epochs.push(Corpus::new(docs));
        }
    }
    Ok(DiachronicCorpus { epochs, targets })
}
