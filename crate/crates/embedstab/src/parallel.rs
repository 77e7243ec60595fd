//! Multi-threaded PIP evaluation. The proxy is cut into fixed-size row blocks
//! independent of the thread count, and block Gram matrices are merged in
//! block order, so the result does not depend on how many threads ran.

use embedstab_core::instability::InstabilityReport;
use embedstab_core::pip::{proxy_rows, CrossGram, PipComparison, ProxySample};
use embedstab_core::runs::{pairs, RunSet};
use embedstab_core::{EmbeddingSpace, Error};

use crate::error::Result;
use crate::experiment::parallel_map;

pub const BLOCK_ROWS: usize = 1024;

pub fn cross_gram(
    a: &EmbeddingSpace,
    b: &EmbeddingSpace,
    proxy: &ProxySample,
    jobs: usize,
) -> Result<CrossGram> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        }
        .into());
    }
    let d = a.dim();
    let (ra, rb) = (proxy_rows(a, proxy)?, proxy_rows(b, proxy)?);
    let blocks = proxy.len().div_ceil(BLOCK_ROWS);
    let parts = parallel_map(blocks, jobs, |k| {
        let (lo, hi) = (
            k * BLOCK_ROWS * d,
            ((k + 1) * BLOCK_ROWS).min(proxy.len()) * d,
        );
        Ok(CrossGram::from_rows(&ra[lo..hi], &rb[lo..hi], d))
    })?;
    let mut g = CrossGram::zeros(d);
    for p in &parts {
        g.merge(p);
    }
    Ok(g)
}

pub fn comparison<'a>(
    a: &'a EmbeddingSpace,
    b: &'a EmbeddingSpace,
    proxy: &ProxySample,
    jobs: usize,
) -> Result<PipComparison<'a>> {
    Ok(PipComparison::with_gram(
        a,
        b,
        cross_gram(a, b, proxy, jobs)?,
    )?)
}

/// Reduced PIP of every unordered run pair, in lexicographic pair order.
pub fn pair_reduced_pips(runs: &RunSet, proxy: &ProxySample, jobs: usize) -> Result<Vec<f64>> {
    runs.require(2)?;
    pairs(runs.len())
        .map(|(i, j)| Ok(comparison(&runs.spaces[i], &runs.spaces[j], proxy, jobs)?.reduced()))
        .collect()
}

/// Word-wise reduced PIP (columns) for every run pair (rows).
pub fn pair_wordwise_pips(
    runs: &RunSet,
    proxy: &ProxySample,
    words: &[String],
    jobs: usize,
) -> Result<Vec<Vec<f64>>> {
    runs.require(2)?;
    pairs(runs.len())
        .map(|(i, j)| {
            let cmp = comparison(&runs.spaces[i], &runs.spaces[j], proxy, jobs)?;
            Ok(words
                .iter()
                .map(|w| cmp.wordwise(w))
                .collect::<std::result::Result<Vec<_>, _>>()?)
        })
        .collect()
}

pub fn instability_report(
    shuffled: &RunSet,
    bootstrapped: Option<&RunSet>,
    proxy: &ProxySample,
    jobs: usize,
) -> Result<InstabilityReport> {
    let s = pair_reduced_pips(shuffled, proxy, jobs)?;
    let b = bootstrapped
        .map(|b| pair_reduced_pips(b, proxy, jobs))
        .transpose()?;
    Ok(InstabilityReport::from_pair_values(
        &s,
        b.as_deref(),
        proxy,
    )?)
}
