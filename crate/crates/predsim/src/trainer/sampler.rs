//! Negative sampling from the smoothed unigram distribution.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::vocab::{TokenId, Vocabulary};

/// Exponent applied to unigram counts before normalization.
const SMOOTHING: f64 = 0.75;

/// Draws token ids with probability proportional to `count^0.75`.
///
/// Deterministic for a given seed; draws are made by binary search over the
/// cumulative mass, so identical seeds yield identical streams regardless of
/// platform.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
    rng: ChaCha8Rng,
}

impl NegativeSampler {
    pub fn new(vocab: &Vocabulary, seed: u64) -> Self {
        NegativeSampler::with_rng(vocab, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(vocab: &Vocabulary, rng: ChaCha8Rng) -> Self {
        let mut cumulative = Vec::with_capacity(vocab.len());
        let mut acc = 0.0;
        for &count in vocab.counts() {
            acc += (count as f64).powf(SMOOTHING);
            cumulative.push(acc);
        }
        NegativeSampler { cumulative, rng }
    }

    /// Probability mass assigned to `id`.
    pub fn probability(&self, id: TokenId) -> f64 {
        let i = id as usize;
        let total = *self.cumulative.last().unwrap();
        let below = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - below) / total
    }

    pub fn draw(&mut self) -> TokenId {
        let total = *self.cumulative.last().unwrap();
        let u = self.rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1) as TokenId
    }

    /// Uniform draw in [0, 1) from the sampler's stream; used for
    /// subsampling decisions so one seeded stream drives all sampling.
    pub(crate) fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Draws a negative for the positive context `exclude`, redrawing on
    /// collision. Gives up after a bounded number of attempts so single-token
    /// vocabularies cannot loop forever.
    pub fn draw_excluding(&mut self, exclude: TokenId) -> TokenId {
        for _ in 0..16 {
            let id = self.draw();
            if id != exclude {
                return id;
            }
        }
        self.draw()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_token_vocabulary_always_draws_it() {
        let vocab = Vocabulary::from_counts([("only".to_string(), 3)]).unwrap();
        let mut sampler = NegativeSampler::new(&vocab, 1);
        for _ in 0..100 {
            assert_eq!(sampler.draw(), 0);
        }
        assert_eq!(sampler.probability(0), 1.0);
    }

    #[test]
    fn smoothed_unigram_probabilities() {
        // counts [8, 1]: P(first) = 8^0.75 / (8^0.75 + 1).
        let vocab =
            Vocabulary::from_counts([("a".to_string(), 8), ("b".to_string(), 1)]).unwrap();
        let mut sampler = NegativeSampler::new(&vocab, 2);
        let expected = 8f64.powf(0.75) / (8f64.powf(0.75) + 1.0);
        assert!((expected - 0.826).abs() < 5e-4);
        assert!((sampler.probability(0) - expected).abs() < 1e-12);

        let draws = 100_000;
        let hits = (0..draws).filter(|_| sampler.draw() == 0).count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - expected).abs() <= 0.01, "empirical {freq}");
    }

    #[test]
    fn equal_counts_are_symmetric() {
        let vocab =
            Vocabulary::from_counts([("a".to_string(), 5), ("b".to_string(), 5)]).unwrap();
        let mut sampler = NegativeSampler::new(&vocab, 3);
        let draws = 100_000;
        let hits = (0..draws).filter(|_| sampler.draw() == 0).count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.01, "empirical {freq}");
    }

    #[test]
    fn same_seed_same_stream() {
        let vocab = Vocabulary::from_counts([
            ("a".to_string(), 7),
            ("b".to_string(), 3),
            ("c".to_string(), 1),
        ])
        .unwrap();
        let mut s1 = NegativeSampler::new(&vocab, 9);
        let mut s2 = NegativeSampler::new(&vocab, 9);
        let a: Vec<TokenId> = (0..200).map(|_| s1.draw()).collect();
        let b: Vec<TokenId> = (0..200).map(|_| s2.draw()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn exclusion_avoids_the_positive() {
        let vocab =
            Vocabulary::from_counts([("a".to_string(), 5), ("b".to_string(), 5)]).unwrap();
        let mut sampler = NegativeSampler::new(&vocab, 4);
        for _ in 0..100 {
            assert_eq!(sampler.draw_excluding(0), 1);
        }
    }
}
