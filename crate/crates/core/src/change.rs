//! Diachronic semantic change: per-word change scores between two epoch
//! spaces, threshold classification, evaluation against gold annotations, and
//! the frequency-effect mixed model with its randomized control condition.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::align::{procrustes, AlignmentResult};
use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::rng;
use crate::space::{joint_vocabulary, rank_order, EmbeddingSpace};
use crate::stats::{self, TestResult};

/// `Δ = 1 − cos(v_t1(w)·R, v_t2(w))`, with `R` aligning `t1` onto `t2`.
pub fn semantic_change(
    word: &str,
    t1: &EmbeddingSpace,
    t2: &EmbeddingSpace,
    alignment: &AlignmentResult,
) -> Result<f64> {
    let a = alignment.apply(t1.vector(word)?);
    let b = t2.vector(word)?;
    let (na, nb) = (norm(&a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector(word.into()));
    }
    Ok((1.0 - dot(&a, b) / (na * nb)).clamp(0.0, 2.0))
}

/// Aligns `t1` onto `t2` and scores every word of the joint vocabulary.
pub fn semantic_change_all(
    t1: &EmbeddingSpace,
    t2: &EmbeddingSpace,
) -> Result<(AlignmentResult, BTreeMap<String, f64>)> {
    let al = procrustes(t1, t2)?;
    let deltas = al
        .joint_vocab
        .words()
        .iter()
        .map(|w| Ok((w.clone(), semantic_change(w, t1, t2, &al)?)))
        .collect::<Result<_>>()?;
    Ok((al, deltas))
}

/// Joint-vocabulary words occurring at least `min_count` times in both epochs.
/// Frequencies must be attached to both spaces unless `min_count <= 1`.
pub fn scored_vocabulary(
    t1: &EmbeddingSpace,
    t2: &EmbeddingSpace,
    min_count: u64,
) -> Result<Vec<String>> {
    let joint = joint_vocabulary(&[t1, t2]);
    if min_count <= 1 {
        return Ok(joint.words().to_vec());
    }
    let freq = |s: &EmbeddingSpace, w: &str| {
        s.vocab()
            .frequency(w)
            .ok_or_else(|| Error::InvalidArgument("min_count > 1 needs word frequencies".into()))
    };
    let mut out = Vec::new();
    for w in joint.words() {
        if freq(t1, w)? >= min_count && freq(t2, w)? >= min_count {
            out.push(w.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// `true` = changed.
    pub labels: BTreeMap<String, bool>,
    pub tau: f64,
    pub mu: f64,
    pub sigma: f64,
    pub scored: usize,
}

/// `τ = μ + σ/2` (population σ) over the scored vocabulary's Δ; every word in
/// `deltas` is labeled changed iff its Δ exceeds τ strictly.
pub fn classify_targets(
    deltas: &BTreeMap<String, f64>,
    scored_vocab: &[String],
) -> Result<Classification> {
    if scored_vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    if scored_vocab.len() < 2 {
        return Err(Error::InvalidArgument("need >= 2 scored words".into()));
    }
    let xs: Vec<f64> = scored_vocab
        .iter()
        .map(|w| {
            deltas
                .get(w)
                .copied()
                .ok_or_else(|| Error::OutOfVocabulary(w.clone()))
        })
        .collect::<Result<_>>()?;
    let (mu, sigma) = (stats::mean(&xs), stats::std_dev(&xs));
    let tau = mu + 0.5 * sigma;
    let labels = deltas.iter().map(|(w, &d)| (w.clone(), d > tau)).collect();
    Ok(Classification {
        labels,
        tau,
        mu,
        sigma,
        scored: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeReport {
    /// Target words with Δ, in ranking order (Δ descending, then word).
    pub ranking: Vec<(String, f64)>,
    pub labels: BTreeMap<String, bool>,
    pub tau: f64,
    pub mu: f64,
    pub sigma: f64,
    pub scored_vocab_size: usize,
}

impl ChangeReport {
    pub fn delta(&self, word: &str) -> Option<f64> {
        self.ranking
            .iter()
            .find(|(w, _)| w == word)
            .map(|&(_, d)| d)
    }

    pub fn rank(&self, word: &str) -> Option<usize> {
        self.ranking
            .iter()
            .position(|(w, _)| w == word)
            .map(|p| p + 1)
    }
}

/// Full pipeline over two epoch spaces: align, score, threshold, rank targets.
pub fn change_report(
    t1: &EmbeddingSpace,
    t2: &EmbeddingSpace,
    targets: &[String],
    min_count: u64,
) -> Result<ChangeReport> {
    let (_, deltas) = semantic_change_all(t1, t2)?;
    let scored = scored_vocabulary(t1, t2, min_count)?;
    let cls = classify_targets(&deltas, &scored)?;
    report_from(&deltas, &cls, targets)
}

/// Assembles a report for `targets` from precomputed Δ values and a classification.
pub fn report_from(
    deltas: &BTreeMap<String, f64>,
    cls: &Classification,
    targets: &[String],
) -> Result<ChangeReport> {
    let missing: Vec<String> = targets
        .iter()
        .filter(|t| !deltas.contains_key(*t))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingTargets(missing));
    }
    let mut ranking: Vec<(String, f64)> = targets.iter().map(|t| (t.clone(), deltas[t])).collect();
    ranking.sort_by(|a, b| rank_order(a.1, &a.0, b.1, &b.0));
    let labels = targets.iter().map(|t| (t.clone(), cls.labels[t])).collect();
    Ok(ChangeReport {
        ranking,
        labels,
        tau: cls.tau,
        mu: cls.mu,
        sigma: cls.sigma,
        scored_vocab_size: cls.scored,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldData {
    pub binary: BTreeMap<String, bool>,
    pub graded: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: Option<f64>,
    pub spearman: Option<TestResult>,
}

/// Binary accuracy and Spearman ρ between Δ and graded gold scores. Either
/// task is skipped when its gold set is empty.
pub fn evaluate(report: &ChangeReport, gold: &GoldData) -> Result<Evaluation> {
    let mut missing: Vec<String> = gold
        .binary
        .keys()
        .chain(gold.graded.keys())
        .filter(|w| report.delta(w).is_none())
        .cloned()
        .collect();
    missing.sort();
    missing.dedup();
    if !missing.is_empty() {
        return Err(Error::MissingTargets(missing));
    }
    let accuracy = (!gold.binary.is_empty()).then(|| {
        let hits = gold
            .binary
            .iter()
            .filter(|(w, &g)| report.labels.get(*w).copied() == Some(g))
            .count();
        hits as f64 / gold.binary.len() as f64
    });
    let spearman = if gold.graded.is_empty() {
        None
    } else {
        let (pred, truth): (Vec<f64>, Vec<f64>) = gold
            .graded
            .iter()
            .map(|(w, &g)| (report.delta(w).expect("checked"), g))
            .unzip();
        Some(stats::spearman(&pred, &truth)?)
    };
    Ok(Evaluation { accuracy, spearman })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub word: String,
    pub epoch: usize,
    pub delta: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyEffectResult {
    pub beta_0: f64,
    pub beta_f: f64,
    pub var_explained: f64,
    pub sigma_z: f64,
    pub sigma_eps: f64,
    /// `σ_z² / σ_ε²` at the likelihood optimum.
    pub lambda: f64,
    pub n_observations: usize,
    pub n_groups: usize,
    pub fit_method: &'static str,
}

fn standardized(xs: &[f64]) -> Result<Vec<f64>> {
    let (m, s) = (stats::mean(xs), stats::std_dev(xs));
    if !(s > 0.0) {
        return Err(Error::Degenerate(
            "constant variable after transform".into(),
        ));
    }
    Ok(xs.iter().map(|x| (x - m) / s).collect())
}

/// Law-of-conformity regression: Δ and frequency are log-transformed and
/// standardized over all observations, then [`fit_random_intercept`] is run
/// with one random intercept per word.
pub fn frequency_effect(obs: &[Observation]) -> Result<FrequencyEffectResult> {
    if let Some(o) = obs
        .iter()
        .find(|o| !(o.delta > 0.0) || !(o.frequency > 0.0))
    {
        return Err(Error::InvalidArgument(alloc::format!(
            "Δ and frequency must be positive for the log transform ({}: Δ={}, f={})",
            o.word,
            o.delta,
            o.frequency
        )));
    }
    let y = standardized(&obs.iter().map(|o| libm::log(o.delta)).collect::<Vec<_>>())?;
    let x = standardized(
        &obs.iter()
            .map(|o| libm::log(o.frequency))
            .collect::<Vec<_>>(),
    )?;
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let groups: Vec<usize> = obs
        .iter()
        .map(|o| {
            let n = ids.len();
            *ids.entry(o.word.as_str()).or_insert(n)
        })
        .collect();
    fit_random_intercept(&y, &x, &groups)
}

/// Per-group sufficient statistics.
#[derive(Default, Clone, Copy)]
struct Group {
    n: f64,
    x: f64,
    y: f64,
    xx: f64,
    xy: f64,
    yy: f64,
}

struct Profile {
    beta: [f64; 2],
    sigma2: f64,
    neg2ll: f64,
}

fn profile_at(gs: &[Group], lambda: f64, total: f64) -> Option<Profile> {
    // X = [1, x]; H⁻¹ = I − c·11ᵀ with c = λ / (1 + λ n) per group
    let (mut a00, mut a01, mut a11, mut b0, mut b1, mut logdet) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for g in gs {
        let c = lambda / (1.0 + lambda * g.n);
        a00 += g.n - c * g.n * g.n;
        a01 += g.x - c * g.n * g.x;
        a11 += g.xx - c * g.x * g.x;
        b0 += g.y - c * g.n * g.y;
        b1 += g.xy - c * g.x * g.y;
        logdet += libm::log1p(lambda * g.n);
    }
    let det = a00 * a11 - a01 * a01;
    if !(det.abs() > 1e-12 * (a00 * a11).abs()) {
        return None;
    }
    let beta = [(a11 * b0 - a01 * b1) / det, (a00 * b1 - a01 * b0) / det];
    let mut rss = 0.0;
    for g in gs {
        let c = lambda / (1.0 + lambda * g.n);
        // r = y − β0 − β1 x; rᵀ H⁻¹ r = Σr² − c (Σr)²
        let sr = g.y - beta[0] * g.n - beta[1] * g.x;
        let srr = g.yy + beta[0] * beta[0] * g.n + beta[1] * beta[1] * g.xx
            - 2.0 * beta[0] * g.y
            - 2.0 * beta[1] * g.xy
            + 2.0 * beta[0] * beta[1] * g.x;
        rss += srr - c * sr * sr;
    }
    let sigma2 = (rss / total).max(f64::MIN_POSITIVE);
    Some(Profile {
        beta,
        sigma2,
        neg2ll: total * libm::log(sigma2) + logdet,
    })
}

/// `y = β0 + βf·x + z(group) + ε` with `z ~ N(0, σ_z²)`, `ε ~ N(0, σ_ε²)`,
/// fitted by maximum likelihood profiled over `λ = σ_z²/σ_ε²`: a coarse grid
/// on `ln λ ∈ [ln 1e-6, ln 1e6]` followed by golden-section refinement, with
/// the generalized-least-squares `β` and closed-form `σ_ε²` at each `λ`.
/// `var_explained` is the marginal R²: `βf²·var(x) / (βf²·var(x) + σ_z² + σ_ε²)`.
pub fn fit_random_intercept(
    y: &[f64],
    x: &[f64],
    groups: &[usize],
) -> Result<FrequencyEffectResult> {
    if y.len() != x.len() || y.len() != groups.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: x.len().min(groups.len()),
        });
    }
    let n_groups = groups.iter().max().map_or(0, |m| m + 1);
    if n_groups < 2 {
        return Err(Error::InvalidArgument(
            "need observations from >= 2 words".into(),
        ));
    }
    if y.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite observation".into()));
    }
    let var_x = stats::variance(x);
    if !(var_x > 0.0) {
        return Err(Error::Degenerate("constant frequency predictor".into()));
    }
    let mut gs = alloc::vec![Group::default(); n_groups];
    for ((&yi, &xi), &g) in y.iter().zip(x).zip(groups) {
        let s = &mut gs[g];
        s.n += 1.0;
        s.x += xi;
        s.y += yi;
        s.xx += xi * xi;
        s.xy += xi * yi;
        s.yy += yi * yi;
    }
    gs.retain(|g| g.n > 0.0);
    let total = y.len() as f64;
    let f = |t: f64| profile_at(&gs, libm::exp(t), total).map_or(f64::INFINITY, |p| p.neg2ll);
    let (lo, hi) = (libm::log(1e-6), libm::log(1e6));
    let steps = 48;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|k| lo + k as f64 * h)
        .fold((lo, f64::INFINITY), |acc, t| {
            let v = f(t);
            if v < acc.1 {
                (t, v)
            } else {
                acc
            }
        });
    let t = golden_section(&f, (best.0 - h).max(lo), (best.0 + h).min(hi), 1e-10);
    let lambda = libm::exp(t);
    let p = profile_at(&gs, lambda, total)
        .ok_or_else(|| Error::Degenerate("singular design".into()))?;
    let sigma_z2 = lambda * p.sigma2;
    let fixed = p.beta[1] * p.beta[1] * var_x;
    Ok(FrequencyEffectResult {
        beta_0: p.beta[0],
        beta_f: p.beta[1],
        var_explained: (fixed / (fixed + sigma_z2 + p.sigma2)).clamp(0.0, 1.0),
        sigma_z: libm::sqrt(sigma_z2),
        sigma_eps: libm::sqrt(p.sigma2),
        lambda,
        n_observations: y.len(),
        n_groups: gs.len(),
        fit_method: "profiled-ml",
    })
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Token counts of one epoch corpus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochCounts {
    pub counts: BTreeMap<String, u64>,
    pub tokens: u64,
}

impl EpochCounts {
    pub fn of(corpus: &Corpus) -> EpochCounts {
        let mut counts = BTreeMap::new();
        for t in corpus.documents.iter().flatten() {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
        EpochCounts {
            counts,
            tokens: corpus.token_count() as u64,
        }
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }
}

/// Observations for every consecutive epoch pair `(t, t+1)`: Δ of each word
/// present in both spaces and counted at least `min_count` times in both
/// epochs (optionally restricted to `words`). The frequency attached is the
/// word's relative frequency in epoch `t`.
pub fn epoch_observations(
    spaces: &[EmbeddingSpace],
    counts: &[EpochCounts],
    min_count: u64,
    words: Option<&[String]>,
) -> Result<Vec<Observation>> {
    if spaces.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: spaces.len(),
            got: counts.len(),
        });
    }
    if spaces.len() < 2 {
        return Err(Error::InvalidArgument("need >= 2 epochs".into()));
    }
    let mut out = Vec::new();
    for t in 0..spaces.len() - 1 {
        let (a, b) = (&spaces[t], &spaces[t + 1]);
        let (ca, cb) = (&counts[t], &counts[t + 1]);
        let al = procrustes(a, b)?;
        let keep = |w: &str| ca.count(w) >= min_count.max(1) && cb.count(w) >= min_count.max(1);
        let candidates: Vec<&String> = match words {
            Some(ws) => ws.iter().filter(|w| al.joint_vocab.contains(w)).collect(),
            None => al.joint_vocab.words().iter().collect(),
        };
        for w in candidates.into_iter().filter(|w| keep(w)) {
            out.push(Observation {
                word: w.clone(),
                epoch: t,
                delta: semantic_change(w, a, b, &al)?,
                frequency: ca.count(w) as f64 / ca.tokens as f64,
            });
        }
    }
    Ok(out)
}

/// Pools all documents, shuffles them with `seed`, and deals them into
/// `batches` pseudo-epochs whose sizes differ by at most one document.
pub fn control_condition(corpora: &[Corpus], batches: usize, seed: u64) -> Result<Vec<Corpus>> {
    if corpora.is_empty() {
        return Err(Error::InvalidArgument("no corpora".into()));
    }
    if batches < 2 {
        return Err(Error::InvalidArgument("need >= 2 batches".into()));
    }
    let mut pool: Vec<Document> = corpora
        .iter()
        .flat_map(|c| c.documents.iter().cloned())
        .collect();
    if pool.len() < batches {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} documents for {batches} batches",
            pool.len()
        )));
    }
    rng::shuffle(&mut rng::seeded(seed), &mut pool);
    let (q, rem) = (pool.len() / batches, pool.len() % batches);
    let mut it = pool.into_iter();
    Ok((0..batches)
        .map(|b| Corpus::new(it.by_ref().take(q + usize::from(b < rem)).collect()))
        .collect())
}
