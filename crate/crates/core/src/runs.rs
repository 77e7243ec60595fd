use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::SamplingMode;
use crate::error::{Error, Result};
use crate::space::{joint_vocabulary, EmbeddingSpace, Vocabulary};

/// Spaces from repeated runs of one (technique, corpus, sampling mode) setup.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub spaces: Vec<EmbeddingSpace>,
    pub mode: SamplingMode,
    pub label: String,
}

impl RunSet {
    pub fn new(
        spaces: Vec<EmbeddingSpace>,
        mode: SamplingMode,
        label: impl Into<String>,
    ) -> Result<Self> {
        let first = spaces
            .first()
            .ok_or(Error::InsufficientRuns { needed: 1, got: 0 })?;
        if let Some(s) = spaces.iter().find(|s| s.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: s.dim(),
            });
        }
        Ok(RunSet {
            spaces,
            mode,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spaces[0].dim()
    }

    pub fn joint_vocabulary(&self) -> Vocabulary {
        let refs: Vec<&EmbeddingSpace> = self.spaces.iter().collect();
        joint_vocabulary(&refs)
    }

    /// Every space restricted to the joint vocabulary (same row order everywhere).
    pub fn aligned_rows(&self) -> Result<Vec<EmbeddingSpace>> {
        let joint = self.joint_vocabulary();
        self.spaces
            .iter()
            .map(|s| s.restrict(joint.words()))
            .collect()
    }

    pub fn require(&self, needed: usize) -> Result<()> {
        if self.len() < needed {
            return Err(Error::InsufficientRuns {
                needed,
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// Unordered pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn pairs(r: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..r).flat_map(move |i| (i + 1..r).map(move |j| (i, j)))
}
