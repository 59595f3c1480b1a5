//! Deterministic evaluation of the training objective on frozen negatives.

use crate::corpus::TrainingCorpus;
use crate::error::{Error, Result};
use crate::model::EmbeddingModel;
use crate::psim::to_f64;
use crate::trainer::loss::pair_loss;
use crate::trainer::sampler::NegativeSampler;
use crate::trainer::{TrainConfig, TrainMode};
use crate::vocab::{TokenId, Vocabulary};

/// One (target, context) co-occurrence site, tagged with the document source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSite {
    pub target: TokenId,
    pub context: TokenId,
    pub source: u32,
}

/// A corpus mapped onto vocabulary ids; out-of-vocabulary tokens are dropped
/// before windowing, so context windows span removed tokens.
#[derive(Debug, Clone)]
pub struct IndexedCorpus {
    pub docs: Vec<IndexedDoc>,
    pub source_labels: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct IndexedDoc {
    pub source: u32,
    pub tokens: Vec<TokenId>,
}

impl IndexedCorpus {
    pub fn build(corpus: &TrainingCorpus, vocab: &Vocabulary) -> Self {
        let mut source_labels: Vec<String> = Vec::new();
        let mut source_ids = std::collections::HashMap::new();
        let mut docs = Vec::with_capacity(corpus.len());
        for doc in corpus.documents() {
            let source = *source_ids.entry(doc.source.clone()).or_insert_with(|| {
                source_labels.push(doc.source.clone());
                (source_labels.len() - 1) as u32
            });
            let tokens: Vec<TokenId> =
                doc.tokens.iter().filter_map(|t| vocab.id(t)).collect();
            docs.push(IndexedDoc { source, tokens });
        }
        IndexedCorpus { docs, source_labels }
    }

    pub fn token_count(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }
}

/// Enumerates every (target, context) pair in corpus order: documents in
/// order, target positions left to right, context offsets ascending within
/// the symmetric window.
pub fn extract_pairs(corpus: &IndexedCorpus, window: usize) -> Vec<PairSite> {
    let mut pairs = Vec::new();
    for doc in &corpus.docs {
        let n = doc.tokens.len();
        for i in 0..n {
            let lo = i.saturating_sub(window);
            let hi = (i + window + 1).min(n);
            for j in lo..hi {
                if j != i {
                    pairs.push(PairSite {
                        target: doc.tokens[i],
                        context: doc.tokens[j],
                        source: doc.source,
                    });
                }
            }
        }
    }
    pairs
}

/// An explicit negative-sample assignment: one id list per pair site, in
/// [`extract_pairs`] order. Freezing the negatives makes the objective a
/// deterministic function of the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedNegatives {
    pub per_pair: Vec<Vec<TokenId>>,
}

impl FixedNegatives {
    /// Draws `per_pair_count` negatives for each site from the smoothed
    /// unigram distribution, excluding the word the negative stands in for:
    /// the context in plain skipgram, the target in source-augmented mode.
    pub fn draw(
        pairs: &[PairSite],
        vocab: &Vocabulary,
        per_pair_count: usize,
        seed: u64,
        mode: TrainMode,
    ) -> Self {
        let mut sampler = NegativeSampler::new(vocab, seed);
        let per_pair = pairs
            .iter()
            .map(|pair| {
                let exclude = match mode {
                    TrainMode::Sgns => pair.context,
                    TrainMode::SourceAugmented => pair.target,
                };
                (0..per_pair_count)
                    .map(|_| sampler.draw_excluding(exclude))
                    .collect()
            })
            .collect();
        FixedNegatives { per_pair }
    }
}

/// Total logistic loss of `model` on the corpus pairs with the given frozen
/// negatives, scored per `config.mode`.
///
/// Plain skipgram scores `s = cᵀt` and a negative replaces the context word:
/// `l(s(c,t)) + Σ_n l(-s(n,t))`. Source-augmented mode scores
/// `s = tᵀ(c + d)` with the context-plus-source combination predicting the
/// target, so a negative replaces the predicted target word:
/// `l(tᵀ(c+d)) + Σ_n l(-t_nᵀ(c+d))`.
pub fn objective_value(
    model: &EmbeddingModel,
    corpus: &TrainingCorpus,
    config: &TrainConfig,
    negatives: &FixedNegatives,
) -> Result<f64> {
    let indexed = IndexedCorpus::build(corpus, model.vocab());
    let pairs = extract_pairs(&indexed, config.window);
    if negatives.per_pair.len() != pairs.len() {
        return Err(Error::InvalidConfig(format!(
            "fixed negatives cover {} pairs but corpus yields {}",
            negatives.per_pair.len(),
            pairs.len()
        )));
    }

    let source_rows: Vec<Option<Vec<f64>>> = match config.mode {
        TrainMode::Sgns => vec![None; indexed.source_labels.len()],
        TrainMode::SourceAugmented => indexed
            .source_labels
            .iter()
            .map(|label| {
                model
                    .source_of(label)
                    .map(|row| to_f64(row))
                    .ok_or_else(|| Error::UnknownSource(label.clone()))
                    .map(Some)
            })
            .collect::<Result<_>>()?,
    };

    let mut total = 0.0;
    for (pair, negs) in pairs.iter().zip(&negatives.per_pair) {
        let target = to_f64(model.target(pair.target));
        let source = source_rows[pair.source as usize].as_deref();
        let context = to_f64(model.context(pair.context));
        total += pair_loss(&target, &context, source, true);
        for &n in negs {
            match config.mode {
                TrainMode::Sgns => {
                    let negative_context = to_f64(model.context(n));
                    total += pair_loss(&target, &negative_context, source, false);
                }
                TrainMode::SourceAugmented => {
                    let negative_target = to_f64(model.target(n));
                    total += pair_loss(&negative_target, &context, source, false);
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::model::VectorSet;
    use ndarray::{array, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn doc(source: &str, text: &str) -> Document {
        Document {
            source: source.into(),
            tokens: text.split_whitespace().map(str::to_owned).collect(),
        }
    }

    #[test]
    fn pair_extraction_order_and_window() {
        let corpus = TrainingCorpus::new(vec![doc("s", "a b c")]);
        let vocab = crate::vocab::build_vocabulary(&corpus, 1).unwrap();
        let indexed = IndexedCorpus::build(&corpus, &vocab);
        let pairs = extract_pairs(&indexed, 1);
        let ids: Vec<(TokenId, TokenId)> =
            pairs.iter().map(|p| (p.target, p.context)).collect();
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();
        let c = vocab.id("c").unwrap();
        assert_eq!(ids, vec![(a, b), (b, a), (b, c), (c, b)]);
    }

    #[test]
    fn oov_tokens_are_skipped_before_windowing() {
        let corpus = TrainingCorpus::new(vec![doc("s", "a rare b")]);
        let vocab = crate::vocab::Vocabulary::from_counts([
            ("a".to_string(), 2),
            ("b".to_string(), 2),
        ])
        .unwrap();
        let indexed = IndexedCorpus::build(&corpus, &vocab);
        let pairs = extract_pairs(&indexed, 1);
        // "rare" is gone, so a and b become adjacent.
        assert_eq!(pairs.len(), 2);
    }

    #[test]
    fn zero_vectors_give_log2_per_term() {
        let corpus = TrainingCorpus::new(vec![doc("s", "a b")]);
        let vocab = crate::vocab::build_vocabulary(&corpus, 1).unwrap();
        let model = EmbeddingModel::new(
            vocab.clone(),
            Array2::zeros((2, 3)),
            Array2::zeros((2, 3)),
            None,
        )
        .unwrap();
        let config = TrainConfig {
            window: 1,
            ..TrainConfig::default()
        };
        // Two pairs (a,b) and (b,a); keep one negative for the first pair
        // only so the example stays one positive + one negative.
        let negatives = FixedNegatives {
            per_pair: vec![vec![vocab.id("a").unwrap()], vec![]],
        };
        let value = objective_value(&model, &corpus, &config, &negatives).unwrap();
        // 3 terms, each log 2; the documented example (1 pair + 1 negative)
        // is the first pair's 2·log 2 share.
        assert!((value - 3.0 * std::f64::consts::LN_2).abs() <= 1e-12);

        let single_pair_share = 2.0 * std::f64::consts::LN_2;
        assert!((single_pair_share - 1.386_294).abs() < 1e-6);
    }

    #[test]
    fn single_pair_no_negatives_closed_form() {
        let corpus = TrainingCorpus::new(vec![doc("s", "a b")]);
        let vocab = crate::vocab::build_vocabulary(&corpus, 1).unwrap();
        // t = c = [1, 0] for both tokens: every pair scores 1.
        let ones = array![[1.0f32, 0.0], [1.0, 0.0]];
        let model =
            EmbeddingModel::new(vocab, ones.clone(), ones, None).unwrap();
        let config = TrainConfig {
            window: 1,
            ..TrainConfig::default()
        };
        let negatives = FixedNegatives {
            per_pair: vec![vec![], vec![]],
        };
        let value = objective_value(&model, &corpus, &config, &negatives).unwrap();
        let per_pair = (1.0 + (-1.0f64).exp()).ln();
        assert!((per_pair - 0.313_262).abs() < 1e-6);
        assert!((value - 2.0 * per_pair).abs() <= 1e-12);
    }

    // Term-by-term oracle with an independent scalar scoring implementation.
    #[test]
    fn matches_term_by_term_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let corpus = TrainingCorpus::new(vec![
            doc("s1", "a b c d e a b"),
            doc("s2", "c d e a b c"),
        ]);
        let vocab = crate::vocab::build_vocabulary(&corpus, 1).unwrap();
        let dim = 4;
        let targets = Array2::from_shape_fn((5, dim), |_| rng.random::<f32>() - 0.5);
        let contexts = Array2::from_shape_fn((5, dim), |_| rng.random::<f32>() - 0.5);
        let sources = VectorSet::new(
            vec!["s1".into(), "s2".into()],
            Array2::from_shape_fn((2, dim), |_| rng.random::<f32>() - 0.5),
        )
        .unwrap();
        let model = EmbeddingModel::new(
            vocab.clone(),
            targets,
            contexts,
            Some(sources),
        )
        .unwrap();

        for mode in [TrainMode::Sgns, TrainMode::SourceAugmented] {
            let config = TrainConfig {
                window: 2,
                mode,
                ..TrainConfig::default()
            };
            let indexed = IndexedCorpus::build(&corpus, &vocab);
            let pairs = extract_pairs(&indexed, 2);
            let negatives = FixedNegatives::draw(&pairs, &vocab, 2, 99, mode);
            let value = objective_value(&model, &corpus, &config, &negatives).unwrap();

            let mut expected = 0.0;
            for (pair, negs) in pairs.iter().zip(&negatives.per_pair) {
                let score = |target: TokenId, ctx: TokenId| -> f64 {
                    let mut s = 0.0;
                    for k in 0..dim {
                        let t = model.target(target)[k] as f64;
                        let c = model.context(ctx)[k] as f64;
                        let d = match mode {
                            TrainMode::Sgns => 0.0,
                            TrainMode::SourceAugmented => {
                                let label = &indexed.source_labels[pair.source as usize];
                                model.source_of(label).unwrap()[k] as f64
                            }
                        };
                        s += t * (c + d);
                    }
                    s
                };
                expected += (1.0 + (-score(pair.target, pair.context)).exp()).ln();
                for &n in negs {
                    // A negative stands in for the context word in plain
                    // skipgram and for the target word in source mode.
                    let s = match mode {
                        TrainMode::Sgns => score(pair.target, n),
                        TrainMode::SourceAugmented => score(n, pair.context),
                    };
                    expected += (1.0 + s.exp()).ln();
                }
            }
            assert!(
                (value - expected).abs() <= 1e-9,
                "{mode:?}: {value} vs {expected}"
            );
        }
    }

    #[test]
    fn missing_source_is_an_error() {
        let corpus = TrainingCorpus::new(vec![doc("unknown", "a b")]);
        let vocab = crate::vocab::build_vocabulary(&corpus, 1).unwrap();
        let model = EmbeddingModel::new(
            vocab,
            Array2::zeros((2, 2)),
            Array2::zeros((2, 2)),
            None,
        )
        .unwrap();
        let config = TrainConfig {
            window: 1,
            mode: TrainMode::SourceAugmented,
            ..TrainConfig::default()
        };
        let negatives = FixedNegatives {
            per_pair: vec![vec![], vec![]],
        };
        assert!(matches!(
            objective_value(&model, &corpus, &config, &negatives),
            Err(Error::UnknownSource(_))
        ));
    }
}
