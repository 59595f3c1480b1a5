//! Skipgram-with-negative-sampling training, plain and source-augmented.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::TrainingCorpus;
use crate::error::{Error, Result};
use crate::model::{EmbeddingModel, VectorSet};
use crate::vocab::{build_vocabulary, TokenId, Vocabulary};

pub mod loss;
pub mod objective;
pub mod sampler;

use loss::score_gradient;
use objective::{IndexedCorpus, IndexedDoc};
use sampler::NegativeSampler;

/// Which scoring function the trainer optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// `s(c, t) = cᵀt`.
    Sgns,
    /// `s(t, c, d) = tᵀ(c + d)` with a per-source vector `d`; both the
    /// context and the source receive gradient.
    SourceAugmented,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub dim: usize,
    /// Symmetric context radius.
    pub window: usize,
    pub epochs: usize,
    /// Negative samples per positive example.
    pub negatives: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub min_count: u64,
    pub seed: u64,
    pub mode: TrainMode,
    /// 1 = deterministic single-threaded SGD; >1 = lock-free parallel SGD
    /// over document shards, tolerating unsynchronized updates (results are
    /// then not bit-reproducible).
    pub threads: usize,
    /// Optional frequent-word subsampling threshold (e.g. 1e-4); off by
    /// default.
    pub subsample: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            window: 8,
            epochs: 5,
            negatives: 5,
            lr_start: 0.025,
            lr_end: 1e-4,
            min_count: 5,
            seed: 42,
            mode: TrainMode::Sgns,
            threads: 1,
            subsample: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidConfig("dim must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(Error::InvalidConfig("window must be >= 1".into()));
        }
        if self.negatives < 1 {
            return Err(Error::InvalidConfig("negatives must be >= 1".into()));
        }
        if !(self.lr_start > self.lr_end && self.lr_end > 0.0) {
            return Err(Error::InvalidConfig(
                "learning rate schedule requires start > end > 0".into(),
            ));
        }
        if self.threads < 1 {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig("subsample threshold must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Row-major matrix of f64 bit patterns behind relaxed atomics.
///
/// Single-threaded use is bit-deterministic (plain loads and stores in
/// program order); the parallel path shares the same storage and simply
/// tolerates lost updates.
struct AtomicMatrix {
    data: Vec<AtomicU64>,
    dim: usize,
}

impl AtomicMatrix {
    fn zeros(rows: usize, dim: usize) -> Self {
        let data = (0..rows * dim).map(|_| AtomicU64::new(0)).collect();
        AtomicMatrix { data, dim }
    }

    fn from_fn(rows: usize, dim: usize, mut f: impl FnMut() -> f64) -> Self {
        let data = (0..rows * dim)
            .map(|_| AtomicU64::new(f().to_bits()))
            .collect();
        AtomicMatrix { data, dim }
    }

    fn rows(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    fn load_row(&self, row: usize, out: &mut [f64]) {
        let base = row * self.dim;
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f64::from_bits(self.data[base + i].load(Ordering::Relaxed));
        }
    }

    /// `row += coeff * vec`, element-wise read-modify-write.
    fn add_scaled_row(&self, row: usize, coeff: f64, vec: &[f64]) {
        let base = row * self.dim;
        for (i, v) in vec.iter().enumerate() {
            let cell = &self.data[base + i];
            let cur = f64::from_bits(cell.load(Ordering::Relaxed));
            cell.store((cur + coeff * v).to_bits(), Ordering::Relaxed);
        }
    }

    fn to_array_f32(&self) -> Array2<f32> {
        let rows = self.rows();
        Array2::from_shape_fn((rows, self.dim), |(r, c)| {
            f64::from_bits(self.data[r * self.dim + c].load(Ordering::Relaxed)) as f32
        })
    }
}

struct LrSchedule {
    start: f64,
    end: f64,
    total: usize,
}

impl LrSchedule {
    fn at(&self, position: usize) -> f64 {
        if self.total == 0 {
            return self.start;
        }
        let frac = (position as f64 / self.total as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

struct Workspace {
    target: Vec<f64>,
    combined: Vec<f64>,
    source: Vec<f64>,
    delta: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Workspace {
            target: vec![0.0; dim],
            combined: vec![0.0; dim],
            source: vec![0.0; dim],
            delta: vec![0.0; dim],
        }
    }
}

/// Runs SGD over one document. Matrices are shared storage; `clock` is the
/// global token counter driving the learning-rate decay.
#[allow(clippy::too_many_arguments)]
fn process_document(
    doc: &IndexedDoc,
    targets: &AtomicMatrix,
    contexts: &AtomicMatrix,
    sources: Option<&AtomicMatrix>,
    config: &TrainConfig,
    keep_prob: Option<&[f64]>,
    schedule: &LrSchedule,
    clock: &AtomicUsize,
    sampler: &mut NegativeSampler,
    ws: &mut Workspace,
) {
    let base = clock.fetch_add(doc.tokens.len(), Ordering::Relaxed);

    // Subsampled tokens still advance the learning-rate clock via their
    // original positions.
    let survivors: Vec<(usize, TokenId)> = match keep_prob {
        None => doc.tokens.iter().copied().enumerate().collect(),
        Some(keep) => doc
            .tokens
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, id)| sampler.uniform() < keep[id as usize])
            .collect(),
    };

    for (si, &(orig_pos, target_id)) in survivors.iter().enumerate() {
        let lr = schedule.at(base + orig_pos);
        let lo = si.saturating_sub(config.window);
        let hi = (si + config.window + 1).min(survivors.len());
        for sj in lo..hi {
            if sj == si {
                continue;
            }
            let context_id = survivors[sj].1;

            match sources {
                // Plain skipgram: the target row collects its gradient over
                // the positive and its negatives (which stand in for the
                // context word) and is updated last, from its value at the
                // start of the pair.
                None => {
                    targets.load_row(target_id as usize, &mut ws.target);
                    for example in 0..=config.negatives {
                        let positive = example == 0;
                        let row = if positive {
                            context_id
                        } else {
                            sampler.draw_excluding(context_id)
                        } as usize;

                        contexts.load_row(row, &mut ws.combined);
                        let score: f64 = ws
                            .target
                            .iter()
                            .zip(&ws.combined)
                            .map(|(t, c)| t * c)
                            .sum();
                        let g = score_gradient(score, positive);

                        accumulate(&mut ws.delta, g, &ws.combined, positive);
                        contexts.add_scaled_row(row, -lr * g, &ws.target);
                    }
                    targets.add_scaled_row(target_id as usize, -lr, &ws.delta);
                }
                // Source-augmented: the context-plus-source combination
                // predicts the target, so negatives stand in for the target
                // word; the combination collects the gradient and both the
                // context and the source rows receive it.
                Some(src) => {
                    contexts.load_row(context_id as usize, &mut ws.combined);
                    src.load_row(doc.source as usize, &mut ws.source);
                    for (c, d) in ws.combined.iter_mut().zip(&ws.source) {
                        *c += d;
                    }
                    for example in 0..=config.negatives {
                        let positive = example == 0;
                        let row = if positive {
                            target_id
                        } else {
                            sampler.draw_excluding(target_id)
                        } as usize;

                        targets.load_row(row, &mut ws.target);
                        let score: f64 = ws
                            .target
                            .iter()
                            .zip(&ws.combined)
                            .map(|(t, c)| t * c)
                            .sum();
                        let g = score_gradient(score, positive);

                        accumulate(&mut ws.delta, g, &ws.target, positive);
                        targets.add_scaled_row(row, -lr * g, &ws.combined);
                    }
                    contexts.add_scaled_row(context_id as usize, -lr, &ws.delta);
                    src.add_scaled_row(doc.source as usize, -lr, &ws.delta);
                }
            }
        }
    }
}

/// `delta = g * vec` on the positive example, `delta += g * vec` afterwards.
fn accumulate(delta: &mut [f64], g: f64, vec: &[f64], reset: bool) {
    if reset {
        for (d, v) in delta.iter_mut().zip(vec) {
            *d = g * v;
        }
    } else {
        for (d, v) in delta.iter_mut().zip(vec) {
            *d += g * v;
        }
    }
}

/// Incremental trainer exposing per-epoch stepping; [`train`] is the
/// run-to-completion wrapper.
pub struct SgnsTrainer {
    config: TrainConfig,
    vocab: Vocabulary,
    source_labels: Vec<String>,
    docs: Vec<IndexedDoc>,
    targets: AtomicMatrix,
    contexts: AtomicMatrix,
    sources: Option<AtomicMatrix>,
    sampler: NegativeSampler,
    sampler_seed: u64,
    keep_prob: Option<Vec<f64>>,
    schedule: LrSchedule,
    clock: AtomicUsize,
    epochs_run: usize,
}

impl SgnsTrainer {
    pub fn new(corpus: &TrainingCorpus, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let vocab = build_vocabulary(corpus, config.min_count)?;
        let indexed = IndexedCorpus::build(corpus, &vocab);
        let token_count = indexed.token_count();
        if token_count == 0 {
            return Err(Error::EmptyCorpus(
                "no in-vocabulary tokens after filtering".into(),
            ));
        }

        let dim = config.dim;
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let half_width = 0.5 / dim as f64;
        let targets = AtomicMatrix::from_fn(vocab.len(), dim, || {
            (init_rng.random::<f64>() - 0.5) * 2.0 * half_width
        });
        let contexts = AtomicMatrix::zeros(vocab.len(), dim);
        let sources = match config.mode {
            TrainMode::Sgns => None,
            TrainMode::SourceAugmented => {
                Some(AtomicMatrix::zeros(indexed.source_labels.len(), dim))
            }
        };
        let sampler_seed: u64 = init_rng.random();
        let sampler = NegativeSampler::new(&vocab, sampler_seed);

        let keep_prob = config.subsample.map(|threshold| {
            let total = vocab.total_count() as f64;
            vocab
                .counts()
                .iter()
                .map(|&c| {
                    let frequency = c as f64 / total;
                    (((frequency / threshold).sqrt() + 1.0) * threshold / frequency).min(1.0)
                })
                .collect()
        });

        let schedule = LrSchedule {
            start: config.lr_start,
            end: config.lr_end,
            total: config.epochs * token_count,
        };

        Ok(SgnsTrainer {
            config,
            vocab,
            source_labels: indexed.source_labels,
            docs: indexed.docs,
            targets,
            contexts,
            sources,
            sampler,
            sampler_seed,
            keep_prob,
            schedule,
            clock: AtomicUsize::new(0),
            epochs_run: 0,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// One deterministic single-threaded pass over the corpus.
    pub fn run_epoch(&mut self) {
        let mut ws = Workspace::new(self.config.dim);
        for doc in &self.docs {
            process_document(
                doc,
                &self.targets,
                &self.contexts,
                self.sources.as_ref(),
                &self.config,
                self.keep_prob.as_deref(),
                &self.schedule,
                &self.clock,
                &mut self.sampler,
                &mut ws,
            );
        }
        self.epochs_run += 1;
    }

    /// One lock-free parallel pass: document shards are trained concurrently
    /// with unsynchronized (racy but tolerated) updates to the shared
    /// matrices. Not bit-reproducible.
    pub fn run_epoch_parallel(&mut self, threads: usize) {
        let threads = threads.max(1).min(self.docs.len().max(1));
        if threads == 1 {
            return self.run_epoch();
        }
        let chunk = self.docs.len().div_ceil(threads);
        let epoch = self.epochs_run as u64;
        let config = &self.config;
        let targets = &self.targets;
        let contexts = &self.contexts;
        let sources = self.sources.as_ref();
        let keep_prob = self.keep_prob.as_deref();
        let schedule = &self.schedule;
        let clock = &self.clock;
        let vocab = &self.vocab;
        let sampler_seed = self.sampler_seed;

        std::thread::scope(|scope| {
            for (shard_idx, shard) in self.docs.chunks(chunk).enumerate() {
                scope.spawn(move || {
                    let seed = sampler_seed
                        ^ (epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15))
                        ^ (shard_idx as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
                    let mut sampler = NegativeSampler::new(vocab, seed);
                    let mut ws = Workspace::new(config.dim);
                    for doc in shard {
                        process_document(
                            doc,
                            targets,
                            contexts,
                            sources,
                            config,
                            keep_prob,
                            schedule,
                            clock,
                            &mut sampler,
                            &mut ws,
                        );
                    }
                });
            }
        });
        self.epochs_run += 1;
    }

    /// Current parameters as an immutable model (f32 storage).
    pub fn snapshot(&self) -> EmbeddingModel {
        let sources = self.sources.as_ref().map(|m| {
            VectorSet::new(self.source_labels.clone(), m.to_array_f32())
                .expect("trained source table is well-formed")
        });
        EmbeddingModel::new(
            self.vocab.clone(),
            self.targets.to_array_f32(),
            self.contexts.to_array_f32(),
            sources,
        )
        .expect("trained matrices are well-formed")
    }

    pub fn into_model(self) -> EmbeddingModel {
        self.snapshot()
    }
}

/// Trains a model on `corpus`: builds the vocabulary, initializes parameters
/// from `config.seed` (targets uniform in ±0.5/dim, contexts and sources
/// zero), and runs `config.epochs` passes of SGD with linearly decaying
/// learning rate.
pub fn train(corpus: &TrainingCorpus, config: TrainConfig) -> Result<EmbeddingModel> {
    let threads = config.threads;
    let epochs = config.epochs;
    let mut trainer = SgnsTrainer::new(corpus, config)?;
    for _ in 0..epochs {
        if threads > 1 {
            trainer.run_epoch_parallel(threads);
        } else {
            trainer.run_epoch();
        }
    }
    Ok(trainer.into_model())
}
