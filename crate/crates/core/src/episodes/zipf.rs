//! Rank-based Zipfian class sampling: p(rank r) ∝ r^{-α} with 1-based ranks
//! inside the formula and 0-based indices returned.

use rand::Rng;

use crate::{Error, Result};

/// Exact categorical sampler over the normalized Zipf weights for a fixed
/// (α, K). Building the table is O(K); each draw is a binary search.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    cdf: Vec<f64>,
    probs: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(alpha: f64, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidArg("zipf sampler needs at least one class".into()));
        }
        if !(alpha >= 0.0) {
            return Err(Error::InvalidArg("zipf exponent must be non-negative".into()));
        }
        let weights: Vec<f64> = (1..=num_classes).map(|r| (r as f64).powf(-alpha)).collect();
        let total: f64 = weights.iter().sum();
        let mut cdf = Vec::with_capacity(num_classes);
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cdf.push(acc / total);
        }
        // Guard against summation round-off at the top end.
        *cdf.last_mut().expect("non-empty") = 1.0;
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(Self { cdf, probs })
    }

    /// Exact probability of the class at 0-based rank index.
    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// One-shot draw of a class rank in [0, K) with p ∝ (rank+1)^{-α}.
///
/// Builds the weight table each call; hot paths hold a [`ZipfSampler`].
pub fn sample_class<R: Rng + ?Sized>(alpha: f64, num_classes: usize, rng: &mut R) -> Result<usize> {
    Ok(ZipfSampler::new(alpha, num_classes)?.sample(rng))
}
