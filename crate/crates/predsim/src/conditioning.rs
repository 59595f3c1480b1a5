//! Conditioning distributions over target words and their second-moment
//! statistics.
//!
//! A [`WeightSpec`] assigns a nonnegative weight to every vocabulary token;
//! [`weighted_covariance`] turns target vectors plus weights into the
//! [`ConditionedMetric`] (weighted mean and covariance) that defines
//! predictive similarity under that conditioning.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// Nonnegative per-token weights over a vocabulary.
///
/// The support (tokens with strictly positive weight) must contain at least
/// two tokens; a single-point distribution has zero variance and every
/// similarity under it would be 0/0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    weights: Vec<f64>,
}

impl WeightSpec {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::DegenerateConditioning(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let support = weights.iter().filter(|&&w| w > 0.0).count();
        if support < 2 {
            return Err(Error::DegenerateConditioning(format!(
                "support has {support} token(s); at least 2 are required"
            )));
        }
        Ok(WeightSpec { weights })
    }

    /// Weight 1 for every in-vocabulary keyword, 0 elsewhere.
    pub fn indicator<S: AsRef<str>>(keywords: &[S], vocab: &Vocabulary) -> Result<Self> {
        let unique: HashSet<&str> = keywords.iter().map(|k| k.as_ref()).collect();
        let mut weights = vec![0.0; vocab.len()];
        let mut matched = 0usize;
        for keyword in unique {
            if let Some(id) = vocab.id(keyword) {
                weights[id as usize] = 1.0;
                matched += 1;
            }
        }
        if matched < 2 {
            return Err(Error::DegenerateConditioning(format!(
                "only {matched} keyword(s) matched the vocabulary; at least 2 are required"
            )));
        }
        WeightSpec::new(weights)
    }

    /// Weight `|V| - 1` for `focus` and 1 for every other token, so the focus
    /// token carries exactly half of the total weight.
    pub fn focus(focus: &str, vocab: &Vocabulary) -> Result<Self> {
        let id = vocab
            .id(focus)
            .ok_or_else(|| Error::UnknownToken(focus.to_owned()))?;
        if vocab.len() < 2 {
            return Err(Error::DegenerateConditioning(
                "focus weighting needs a vocabulary of at least 2 tokens".into(),
            ));
        }
        let mut weights = vec![1.0; vocab.len()];
        weights[id as usize] = (vocab.len() - 1) as f64;
        WeightSpec::new(weights)
    }

    /// Uniform weights over the whole vocabulary: the unconditioned default.
    pub fn uniform(vocab: &Vocabulary) -> Result<Self> {
        WeightSpec::new(vec![1.0; vocab.len()])
    }

    /// Weights proportional to corpus frequency, for callers that want the
    /// target distribution to follow the corpus rather than be flat.
    pub fn frequency(vocab: &Vocabulary) -> Result<Self> {
        WeightSpec::new(vocab.counts().iter().map(|&c| c as f64).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn support(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Weighted mean and covariance of target vectors under a conditioning
/// distribution. Immutable once built; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedMetric {
    mean: Array1<f64>,
    covariance: Array2<f64>,
    total_weight: f64,
    spectral_scale: f64,
}

impl ConditionedMetric {
    /// Wraps an explicit covariance matrix (zero mean, unit total weight).
    pub fn from_covariance(covariance: Array2<f64>) -> Result<Self> {
        let dim = covariance.nrows();
        if covariance.ncols() != dim || dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1),
                got: covariance.ncols(),
            });
        }
        if !covariance.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("covariance must be finite".into()));
        }
        let mut covariance = covariance;
        symmetrize(&mut covariance);
        let spectral_scale = dominant_eigenvalue(&covariance);
        Ok(ConditionedMetric {
            mean: Array1::zeros(dim),
            covariance,
            total_weight: 1.0,
            spectral_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &Array2<f64> {
        &self.covariance
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Largest-eigenvalue estimate, used to scale the zero-variance cutoff.
    pub fn spectral_scale(&self) -> f64 {
        self.spectral_scale
    }
}

fn symmetrize(m: &mut Array2<f64>) {
    for a in 0..m.nrows() {
        for b in (a + 1)..m.ncols() {
            let v = 0.5 * (m[[a, b]] + m[[b, a]]);
            m[[a, b]] = v;
            m[[b, a]] = v;
        }
    }
}

/// Power iteration for the dominant eigenvalue of a symmetric PSD matrix.
fn dominant_eigenvalue(m: &Array2<f64>) -> f64 {
    let dim = m.nrows();
    // Mildly uneven start vector so a direction orthogonal to e.g. the
    // all-ones vector cannot hide the dominant eigenpair.
    let mut v: Array1<f64> = Array1::from_shape_fn(dim, |i| 1.0 + (i as f64 + 1.0) * 1e-3);
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..100 {
        let next = m.dot(&v);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return 0.0;
        }
        v = next / norm;
        lambda = v.dot(&m.dot(&v));
    }
    lambda.max(0.0)
}

/// Computes the weighted mean and weighted covariance of `targets`.
///
/// `mean = Σ w_i t_i / Σ w_i` and
/// `cov = Σ w_i (t_i - mean)(t_i - mean)ᵀ / Σ w_i` (population
/// normalization: the conditioning is a distribution, not a sample).
/// Accumulation walks rows in vocabulary order with no reordering, so results
/// are deterministic; only the upper triangle is accumulated and mirrored,
/// which makes the result exactly symmetric.
pub fn weighted_covariance(targets: ArrayView2<f32>, spec: &WeightSpec) -> Result<ConditionedMetric> {
    if spec.len() != targets.nrows() {
        return Err(Error::DimensionMismatch {
            expected: targets.nrows(),
            got: spec.len(),
        });
    }
    let dim = targets.ncols();
    let weights = spec.weights();
    let total: f64 = weights.iter().sum();

    let mut mean = vec![0.0f64; dim];
    for (row, &w) in targets.rows().into_iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (m, &t) in mean.iter_mut().zip(row) {
            *m += w * t as f64;
        }
    }
    for m in mean.iter_mut() {
        *m /= total;
    }

    let mut cov = vec![0.0f64; dim * dim];
    let mut centered = vec![0.0f64; dim];
    for (row, &w) in targets.rows().into_iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for ((d, &t), m) in centered.iter_mut().zip(row).zip(&mean) {
            *d = t as f64 - m;
        }
        for a in 0..dim {
            let wd = w * centered[a];
            let row_out = &mut cov[a * dim..(a + 1) * dim];
            for b in a..dim {
                row_out[b] += wd * centered[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[a * dim + b] / total;
            cov[a * dim + b] = v;
            cov[b * dim + a] = v;
        }
    }

    let covariance = Array2::from_shape_vec((dim, dim), cov).expect("dim*dim values");
    let spectral_scale = dominant_eigenvalue(&covariance);
    Ok(ConditionedMetric {
        mean: Array1::from_vec(mean),
        covariance,
        total_weight: total,
        spectral_scale,
    })
}

/// Reads a keyword file: one token per line, `#` starts a comment, blank
/// lines are ignored. Keywords are lowercased to match the tokenizer.
pub fn read_keywords(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut keywords = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        keywords.push(entry.to_lowercase());
    }
    Ok(keywords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vocab_of(tokens: &[&str]) -> Vocabulary {
        Vocabulary::from_tokens(tokens.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn indicator_weights_match_keyword_membership() {
        let vocab = vocab_of(&["a", "b", "c"]);
        let spec = WeightSpec::indicator(&["a", "b"], &vocab).unwrap();
        assert_eq!(spec.weights(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn single_or_unmatched_keywords_are_degenerate() {
        let vocab = vocab_of(&["a", "b", "c"]);
        assert!(matches!(
            WeightSpec::indicator(&["a"], &vocab),
            Err(Error::DegenerateConditioning(_))
        ));
        assert!(matches!(
            WeightSpec::indicator(&["x", "y"], &vocab),
            Err(Error::DegenerateConditioning(_))
        ));
    }

    #[test]
    fn focus_token_carries_half_the_weight() {
        let vocab = vocab_of(&["a", "b", "c", "d"]);
        let spec = WeightSpec::focus("a", &vocab).unwrap();
        assert_eq!(spec.weights(), &[3.0, 1.0, 1.0, 1.0]);
        assert_eq!(spec.weights()[0] / spec.total(), 0.5);

        let two = vocab_of(&["a", "b"]);
        assert_eq!(WeightSpec::focus("b", &two).unwrap().weights(), &[1.0, 1.0]);

        let big = Vocabulary::from_tokens((0..10_000).map(|i| format!("t{i}")).collect()).unwrap();
        let spec = WeightSpec::focus("t123", &big).unwrap();
        assert_eq!(spec.weights()[big.id("t123").unwrap() as usize] / spec.total(), 0.5);

        assert!(matches!(
            WeightSpec::focus("missing", &vocab),
            Err(Error::UnknownToken(_))
        ));
    }

    #[test]
    fn two_point_covariance_by_hand() {
        let targets = array![[1.0f32, 0.0], [-1.0, 0.0]];
        let spec = WeightSpec::new(vec![1.0, 1.0]).unwrap();
        let metric = weighted_covariance(targets.view(), &spec).unwrap();
        assert_eq!(metric.mean().to_vec(), vec![0.0, 0.0]);
        assert_eq!(metric.covariance(), &array![[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(metric.total_weight(), 2.0);
    }

    // Unweighted population covariance, accumulated in the same row order.
    fn unweighted_covariance(points: &Array2<f32>) -> (Vec<f64>, Vec<f64>) {
        let (n, dim) = (points.nrows(), points.ncols());
        let mut mean = vec![0.0f64; dim];
        for row in points.rows() {
            for (m, &t) in mean.iter_mut().zip(row) {
                *m += t as f64;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut cov = vec![0.0f64; dim * dim];
        for row in points.rows() {
            let d: Vec<f64> = row
                .iter()
                .zip(&mean)
                .map(|(&t, m)| t as f64 - m)
                .collect();
            for a in 0..dim {
                for b in a..dim {
                    cov[a * dim + b] += d[a] * d[b];
                }
            }
        }
        for a in 0..dim {
            for b in a..dim {
                let v = cov[a * dim + b] / n as f64;
                cov[a * dim + b] = v;
                cov[b * dim + a] = v;
            }
        }
        (mean, cov)
    }

    #[test]
    fn uniform_weights_reduce_to_unweighted_covariance_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points = Array2::from_shape_fn((17, 4), |_| rng.random::<f32>() * 2.0 - 1.0);
        let spec = WeightSpec::uniform(&vocab_of(
            &(0..17).map(|i| format!("t{i}")).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        ))
        .unwrap();
        let metric = weighted_covariance(points.view(), &spec).unwrap();
        let (mean, cov) = unweighted_covariance(&points);
        assert_eq!(metric.mean().to_vec(), mean);
        assert_eq!(metric.covariance().iter().copied().collect::<Vec<_>>(), cov);
    }

    // Independent two-pass scalar-loop oracle.
    fn naive_weighted(points: &Array2<f32>, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n, dim) = (points.nrows(), points.ncols());
        let total: f64 = w.iter().sum();
        let mut mean = vec![0.0; dim];
        for i in 0..n {
            for j in 0..dim {
                mean[j] += w[i] * points[[i, j]] as f64;
            }
        }
        for m in mean.iter_mut() {
            *m /= total;
        }
        let mut cov = vec![0.0; dim * dim];
        for i in 0..n {
            for a in 0..dim {
                for b in 0..dim {
                    cov[a * dim + b] += w[i]
                        * (points[[i, a]] as f64 - mean[a])
                        * (points[[i, b]] as f64 - mean[b]);
                }
            }
        }
        for c in cov.iter_mut() {
            *c /= total;
        }
        (mean, cov)
    }

    #[test]
    fn matches_two_pass_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points = Array2::from_shape_fn((20, 5), |_| rng.random::<f32>() * 4.0 - 2.0);
        let w: Vec<f64> = (0..20).map(|_| rng.random::<f64>() + 0.01).collect();
        let spec = WeightSpec::new(w.clone()).unwrap();
        let metric = weighted_covariance(points.view(), &spec).unwrap();
        let (mean, cov) = naive_weighted(&points, &w);
        for (a, b) in metric.mean().iter().zip(&mean) {
            assert!((a - b).abs() <= 1e-10);
        }
        for (a, b) in metric.covariance().iter().zip(&cov) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn weight_scaling_leaves_the_metric_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points = Array2::from_shape_fn((12, 3), |_| rng.random::<f32>() * 2.0 - 1.0);
        let w: Vec<f64> = (0..12).map(|_| rng.random::<f64>() + 0.1).collect();
        let base = weighted_covariance(points.view(), &WeightSpec::new(w.clone()).unwrap()).unwrap();

        // Power-of-two scaling is exact in IEEE-754 arithmetic.
        for k in [0.25f64, 2.0, 1024.0] {
            let scaled: Vec<f64> = w.iter().map(|x| x * k).collect();
            let metric =
                weighted_covariance(points.view(), &WeightSpec::new(scaled).unwrap()).unwrap();
            assert_eq!(metric.covariance(), base.covariance());
            assert_eq!(metric.mean(), base.mean());
        }

        // Arbitrary positive scaling agrees to roundoff.
        for k in [3.7f64, 0.013, 171.3] {
            let scaled: Vec<f64> = w.iter().map(|x| x * k).collect();
            let metric =
                weighted_covariance(points.view(), &WeightSpec::new(scaled).unwrap()).unwrap();
            for (a, b) in metric.covariance().iter().zip(base.covariance()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn covariance_is_symmetric_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let n = rng.random_range(3..30);
            let dim = rng.random_range(2..8);
            let points = Array2::from_shape_fn((n, dim), |_| rng.random::<f32>() * 6.0 - 3.0);
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let spec = match WeightSpec::new(w) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let metric = weighted_covariance(points.view(), &spec).unwrap();
            let cov = metric.covariance();
            for a in 0..dim {
                for b in 0..dim {
                    assert_eq!(cov[[a, b]], cov[[b, a]]);
                }
            }
            let m = nalgebra::DMatrix::from_fn(dim, dim, |a, b| cov[[a, b]]);
            let eigs = m.symmetric_eigenvalues();
            let max = eigs.iter().cloned().fold(0.0f64, f64::max);
            for &e in eigs.iter() {
                assert!(e >= -1e-8 * max.max(f64::MIN_POSITIVE), "eigenvalue {e} vs max {max}");
            }
            assert!(metric.spectral_scale() <= max * (1.0 + 1e-6) + 1e-12);
            assert!(metric.spectral_scale() >= 0.0);
        }
    }

    #[test]
    fn full_vocabulary_indicator_equals_uniform() {
        let vocab = vocab_of(&["a", "b", "c", "d", "e"]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points = Array2::from_shape_fn((5, 3), |_| rng.random::<f32>());
        let all: Vec<&str> = vocab.tokens().iter().map(|s| s.as_str()).collect();
        let indicator = WeightSpec::indicator(&all, &vocab).unwrap();
        let uniform = WeightSpec::uniform(&vocab).unwrap();
        assert_eq!(
            weighted_covariance(points.view(), &indicator).unwrap(),
            weighted_covariance(points.view(), &uniform).unwrap()
        );
    }

    #[test]
    fn keyword_file_parsing() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(
            f,
            "# issue keywords\nSkatt\n\nvälfärd  # welfare\n  miljö\n#only comment\n"
        )
        .unwrap();
        let kws = read_keywords(f.path()).unwrap();
        assert_eq!(kws, vec!["skatt", "välfärd", "miljö"]);
    }
}
