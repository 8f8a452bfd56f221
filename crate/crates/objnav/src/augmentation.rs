//! Language-based feature augmentation: text-delta sets, alpha-scaled
//! augmentation with random sampling, and running feature standardization.

use crate::embedding::Embedding;
use ndarray::Array1;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("delta set needs at least 2 text embeddings, got {0}")]
    TooFewTexts(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("cannot sample from an empty delta set")]
    EmptyDeltaSet,
    #[error("alpha must be non-negative, got {0}")]
    NegativeAlpha(f64),
}

/// The n(n-1) ordered pairwise differences of n text embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSet {
    pub deltas: Vec<Embedding>,
    /// (i, j) index pairs in lexicographic order, i != j; delta = T_i - T_j.
    pub source_pairs: Vec<(usize, usize)>,
}

impl DeltaSet {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

/// All differences of length-2 permutations of the text embeddings, in
/// lexicographic (i, j) order.
pub fn build_delta_set(texts: &[Embedding]) -> Result<DeltaSet, AugmentError> {
    let n = texts.len();
    if n < 2 {
        return Err(AugmentError::TooFewTexts(n));
    }
    let d = texts[0].len();
    for t in texts {
        if t.len() != d {
            return Err(AugmentError::DimMismatch { expected: d, got: t.len() });
        }
    }
    let mut deltas = Vec::with_capacity(n * (n - 1));
    let mut source_pairs = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                deltas.push(&texts[i] - &texts[j]);
                source_pairs.push((i, j));
            }
        }
    }
    Ok(DeltaSet { deltas, source_pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugmentMode {
    /// Substitute the embedding with a randomly sampled augmented embedding.
    TrainSample,
    /// Pass the embedding through unchanged.
    EvalIdentity,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub alpha: f64,
    pub mode: AugmentMode,
    /// When set, the sampling pool also contains the unaugmented embedding.
    pub include_original: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { alpha: 50.0, mode: AugmentMode::TrainSample, include_original: false }
    }
}

/// `I + alpha * delta` for a uniformly sampled delta (TrainSample), or `I`
/// unchanged (EvalIdentity).
pub fn augment<R: Rng>(
    embedding: &Embedding,
    ds: &DeltaSet,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Embedding, AugmentError> {
    if cfg.alpha < 0.0 {
        return Err(AugmentError::NegativeAlpha(cfg.alpha));
    }
    match cfg.mode {
        AugmentMode::EvalIdentity => Ok(embedding.clone()),
        AugmentMode::TrainSample => {
            if ds.is_empty() {
                return Err(AugmentError::EmptyDeltaSet);
            }
            let pool = ds.len() + usize::from(cfg.include_original);
            let pick = rng.gen_range(0..pool);
            if pick == ds.len() {
                return Ok(embedding.clone());
            }
            apply_delta(embedding, ds, cfg.alpha, pick)
        }
    }
}

/// Deterministic variant with a forced delta index; used by tests and by the
/// sampling path above.
pub fn apply_delta(
    embedding: &Embedding,
    ds: &DeltaSet,
    alpha: f64,
    index: usize,
) -> Result<Embedding, AugmentError> {
    let delta = &ds.deltas[index];
    if delta.len() != embedding.len() {
        return Err(AugmentError::DimMismatch { expected: embedding.len(), got: delta.len() });
    }
    Ok(embedding + &(alpha * delta))
}

/// Streaming per-dimension standardization (Welford update). Statistics are
/// immutable once frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    m2: Array1<f64>,
    pub count: u64,
    pub frozen: bool,
}

pub const STANDARDIZER_EPS: f64 = 1e-8;

impl Standardizer {
    pub fn new(dim: usize) -> Standardizer {
        Standardizer { mean: Array1::zeros(dim), m2: Array1::zeros(dim), count: 0, frozen: false }
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn frozen_copy(&self) -> Standardizer {
        let mut s = self.clone();
        s.frozen = true;
        s
    }

    /// Fold one sample into the running statistics. No-op when frozen.
    pub fn observe(&mut self, x: &Embedding) {
        if self.frozen {
            return;
        }
        self.count += 1;
        let n = self.count as f64;
        let delta = x - &self.mean;
        self.mean = &self.mean + &(&delta / n);
        let delta2 = x - &self.mean;
        self.m2 = &self.m2 + &(&delta * &delta2);
    }

    pub fn variance(&self) -> Array1<f64> {
        if self.count == 0 {
            Array1::zeros(self.mean.len())
        } else {
            &self.m2 / self.count as f64
        }
    }

    /// Normalize with the current statistics. With fewer than 2 samples the
    /// input only gets centered.
    pub fn apply(&self, x: &Embedding) -> Embedding {
        let centered = x - &self.mean;
        if self.count < 2 {
            return centered;
        }
        let var = self.variance();
        centered / var.mapv(|v| (v + STANDARDIZER_EPS).sqrt())
    }

    /// Update-then-normalize: folds the sample in first unless frozen.
    pub fn standardize(&mut self, x: &Embedding) -> Embedding {
        self.observe(x);
        self.apply(x)
    }
}
