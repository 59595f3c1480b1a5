//! Embedding storage: labelled vector sets and the trained model bundle.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary};

/// A labelled matrix: one row per label, all rows of one dimension.
///
/// This is the unit of vector file IO; target, context, and source tables
/// are each one `VectorSet` on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    labels: Vec<String>,
    index: HashMap<String, u32>,
    matrix: Array2<f32>,
}

impl VectorSet {
    pub fn new(labels: Vec<String>, matrix: Array2<f32>) -> Result<Self> {
        if labels.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: matrix.nrows(),
            });
        }
        if matrix.ncols() == 0 {
            return Err(Error::InvalidConfig("vector dimension must be >= 1".into()));
        }
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("vectors must be finite".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i as u32).is_some() {
                return Err(Error::DuplicateToken(label.clone()));
            }
        }
        Ok(VectorSet {
            labels,
            index,
            matrix,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: u32) -> &str {
        &self.labels[i as usize]
    }

    pub fn id(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn matrix(&self) -> ArrayView2<'_, f32> {
        self.matrix.view()
    }

    pub fn row(&self, i: u32) -> ArrayView1<'_, f32> {
        self.matrix.row(i as usize)
    }

    /// Vector for `label`, or `None` when absent.
    pub fn get(&self, label: &str) -> Option<ArrayView1<'_, f32>> {
        self.id(label).map(|i| self.row(i))
    }
}

/// A trained embedding model: target and context vectors over one vocabulary,
/// plus optional per-source vectors sharing the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vocabulary,
    targets: Array2<f32>,
    contexts: Array2<f32>,
    sources: Option<VectorSet>,
}

impl EmbeddingModel {
    pub fn new(
        vocab: Vocabulary,
        targets: Array2<f32>,
        contexts: Array2<f32>,
        sources: Option<VectorSet>,
    ) -> Result<Self> {
        let dim = targets.ncols();
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be >= 1".into()));
        }
        if targets.nrows() != vocab.len() || contexts.nrows() != vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                got: targets.nrows().max(contexts.nrows()),
            });
        }
        if contexts.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: contexts.ncols(),
            });
        }
        if let Some(src) = &sources {
            if src.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: src.dim(),
                });
            }
        }
        if !targets.iter().all(|v| v.is_finite()) || !contexts.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("vectors must be finite".into()));
        }
        Ok(EmbeddingModel {
            vocab,
            targets,
            contexts,
            sources,
        })
    }

    /// Model with zero context vectors, as produced by loading a plain
    /// target-vector file.
    pub fn from_targets(vocab: Vocabulary, targets: Array2<f32>) -> Result<Self> {
        let contexts = Array2::zeros(targets.raw_dim());
        EmbeddingModel::new(vocab, targets, contexts, None)
    }

    pub fn dim(&self) -> usize {
        self.targets.ncols()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn targets(&self) -> ArrayView2<'_, f32> {
        self.targets.view()
    }

    pub fn contexts(&self) -> ArrayView2<'_, f32> {
        self.contexts.view()
    }

    pub fn sources(&self) -> Option<&VectorSet> {
        self.sources.as_ref()
    }

    pub fn target(&self, id: TokenId) -> ArrayView1<'_, f32> {
        self.targets.row(id as usize)
    }

    pub fn context(&self, id: TokenId) -> ArrayView1<'_, f32> {
        self.contexts.row(id as usize)
    }

    /// Target vector for `token`, or `None` when out of vocabulary.
    pub fn target_of(&self, token: &str) -> Option<ArrayView1<'_, f32>> {
        self.vocab.id(token).map(|id| self.target(id))
    }

    /// Source vector for `label`, or `None` when the model has no vector for it.
    pub fn source_of(&self, label: &str) -> Option<ArrayView1<'_, f32>> {
        self.sources.as_ref().and_then(|s| s.get(label))
    }

    /// Replaces the vocabulary counts, e.g. when restoring frequencies saved
    /// alongside vector files. The token order must match exactly.
    pub fn with_vocab(mut self, vocab: Vocabulary) -> Result<Self> {
        if vocab.tokens() != self.vocab.tokens() {
            return Err(Error::InvalidConfig(
                "replacement vocabulary does not match model token order".into(),
            ));
        }
        self.vocab = vocab;
        Ok(self)
    }
}
