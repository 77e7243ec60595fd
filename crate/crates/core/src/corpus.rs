//! Corpora, line deduplication and document sampling.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use hashbrown::HashSet;

use crate::error::{Error, Result};
use crate::rng;

pub type Document = Vec<String>;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Corpus { documents }
    }

    /// One document per line, whitespace-tokenized; empty lines are skipped.
    pub fn from_lines<S: AsRef<str>>(lines: impl IntoIterator<Item = S>, lowercase: bool) -> Self {
        let documents = lines
            .into_iter()
            .filter_map(|l| {
                let doc: Document = l
                    .as_ref()
                    .split_whitespace()
                    .map(|t| {
                        if lowercase {
                            t.to_lowercase()
                        } else {
                            t.to_string()
                        }
                    })
                    .collect();
                (!doc.is_empty()).then_some(doc)
            })
            .collect();
        Corpus { documents }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }
}

/// Keeps the first occurrence of every distinct line.
pub fn dedup_lines<S: AsRef<str>>(lines: &[S]) -> Vec<String> {
    let mut seen: HashSet<&str> = HashSet::with_capacity(lines.len());
    lines
        .iter()
        .map(AsRef::as_ref)
        .filter(|l| seen.insert(l))
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Fixed,
    Shuffled { seed: u64 },
    Bootstrapped { seed: u64 },
}

impl SamplingMode {
    pub fn name(&self) -> &'static str {
        match self {
            SamplingMode::Fixed => "fixed",
            SamplingMode::Shuffled { .. } => "shuffled",
            SamplingMode::Bootstrapped { .. } => "bootstrapped",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            SamplingMode::Fixed => None,
            SamplingMode::Shuffled { seed } | SamplingMode::Bootstrapped { seed } => Some(seed),
        }
    }

    /// Same mode with a different seed (no-op for fixed).
    pub fn with_seed(&self, seed: u64) -> SamplingMode {
        match self {
            SamplingMode::Fixed => SamplingMode::Fixed,
            SamplingMode::Shuffled { .. } => SamplingMode::Shuffled { seed },
            SamplingMode::Bootstrapped { .. } => SamplingMode::Bootstrapped { seed },
        }
    }
}

/// Documents in the order a run will see them.
pub fn sample_indices(n_docs: usize, mode: SamplingMode) -> Result<Vec<usize>> {
    match mode {
        SamplingMode::Fixed => Ok((0..n_docs).collect()),
        SamplingMode::Shuffled { seed } => {
            let mut idx: Vec<usize> = (0..n_docs).collect();
            rng::shuffle(&mut rng::seeded(seed), &mut idx);
            Ok(idx)
        }
        SamplingMode::Bootstrapped { seed } => {
            if n_docs == 0 {
                return Err(Error::InvalidArgument(
                    "cannot bootstrap an empty corpus".into(),
                ));
            }
            let mut r = rng::seeded(seed);
            Ok((0..n_docs).map(|_| rng::index(&mut r, n_docs)).collect())
        }
    }
}

pub fn sample(corpus: &Corpus, mode: SamplingMode) -> Result<Corpus> {
    let idx = sample_indices(corpus.len(), mode)?;
    Ok(Corpus {
        documents: idx
            .into_iter()
            .map(|i| corpus.documents[i].clone())
            .collect(),
    })
}
