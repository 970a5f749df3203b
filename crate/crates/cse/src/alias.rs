//! Constant-time weighted sampling via the alias method.
//!
//! An [`AliasTable`] over `n` weighted outcomes is built in O(n) and drawn
//! from with one uniform slot pick plus one uniform coin, independent of `n`.
//! The graph stores one flat pair of probability/alias rows shared by all
//! per-vertex neighbor distributions (compressed sparse alias rows), so the
//! same construction routine is used both here and in [`crate::graph`].

use rand::Rng;

/// O(1) sampler over a discrete distribution given by non-negative weights.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds the table from raw weights. Weights need not be normalized;
    /// they must be finite, non-negative, and sum to a positive total.
    pub fn new(weights: &[f64]) -> AliasTable {
        let mut prob = vec![0.0; weights.len()];
        let mut alias = vec![0u32; weights.len()];
        build_alias_row(weights, &mut prob, &mut alias);
        AliasTable { prob, alias }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// Draws an outcome index. Consumes exactly two uniform variates.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let slot: f64 = rng.random();
        let coin: f64 = rng.random();
        self.sample_from_uniforms(slot, coin)
    }

    /// Draws using externally supplied uniforms in `[0, 1)`.
    #[inline]
    pub fn sample_from_uniforms(&self, slot: f64, coin: f64) -> usize {
        sample_alias_row(&self.prob, &self.alias, 0, slot, coin)
    }

    /// The exact distribution the table encodes: outcome `o` is drawn with
    /// probability `sum_s [s == o]·prob[s]/n + [alias[s] == o]·(1−prob[s])/n`.
    pub fn outcome_probabilities(&self) -> Vec<f64> {
        let n = self.prob.len();
        let mut out = vec![0.0; n];
        for s in 0..n {
            out[s] += self.prob[s] / n as f64;
            out[self.alias[s] as usize] += (1.0 - self.prob[s]) / n as f64;
        }
        out
    }
}

/// Fills one alias row in place; `prob`/`alias` must have `weights.len()` slots.
///
/// Standard two-stack construction: weights are scaled so the mean slot mass
/// is 1, underfull slots borrow from overfull ones, leftovers (floating-point
/// residue) are pinned at probability 1.
pub(crate) fn build_alias_row(weights: &[f64], prob: &mut [f64], alias: &mut [u32]) {
    let n = weights.len();
    assert!(n > 0, "alias table needs at least one outcome");
    assert!(n <= u32::MAX as usize, "alias table too large");
    let total: f64 = weights.iter().sum();
    assert!(
        total.is_finite() && total > 0.0 && weights.iter().all(|w| *w >= 0.0),
        "alias weights must be non-negative with a positive finite sum"
    );

    let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
    let mut small: Vec<u32> = Vec::new();
    let mut large: Vec<u32> = Vec::new();
    for (i, s) in scaled.iter().enumerate() {
        if *s < 1.0 {
            small.push(i as u32);
        } else if *s > 1.0 {
            large.push(i as u32);
        }
        prob[i] = 1.0;
        alias[i] = i as u32;
    }

    while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
        prob[s as usize] = scaled[s as usize];
        alias[s as usize] = l;
        scaled[l as usize] += scaled[s as usize] - 1.0;
        if scaled[l as usize] < 1.0 {
            small.push(l);
        } else if scaled[l as usize] > 1.0 {
            large.push(l);
        }
    }
    // Any slot left on either stack is within rounding error of 1; its prob
    // entry already holds 1.0.
}

/// Draws from one alias row laid out at `base..base+len` within flat arrays.
#[inline]
pub(crate) fn sample_alias_row(
    prob: &[f64],
    alias: &[u32],
    base: usize,
    slot_uniform: f64,
    coin: f64,
) -> usize {
    let len = prob.len() - base;
    debug_assert!(len > 0);
    let k = ((slot_uniform * len as f64) as usize).min(len - 1);
    if coin < prob[base + k] {
        k
    } else {
        alias[base + k] as usize
    }
}
