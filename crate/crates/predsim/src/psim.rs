//! Predictive similarity: the correlation between the prediction scores two
//! vectors assign to a distribution of target words.
//!
//! Because the scoring function is a dot product, that correlation has the
//! closed form `xᵀ C y / sqrt(xᵀ C x · yᵀ C y)` where `C` is the (weighted)
//! covariance of the target vectors. [`psim`] evaluates the closed form;
//! [`psim_empirical`] evaluates the defining correlation directly by scoring
//! every target word, and exists as the independent cross-check.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::conditioning::{ConditionedMetric, WeightSpec};
use crate::error::{Error, Result, Side};
use crate::model::EmbeddingModel;

/// Relative cutoff below which a direction is treated as having no variance.
const VARIANCE_EPS: f64 = 1e-12;

pub fn to_f64(v: ArrayView1<f32>) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Quadratic form `xᵀ M y` accumulated so that swapping `x` and `y` yields a
/// bit-identical result for symmetric `M` (products and sums are arranged to
/// rely only on commutativity, never on associativity).
fn quadratic_form(m: &Array2<f64>, x: &[f64], y: &[f64]) -> f64 {
    let dim = m.nrows();
    let mut acc = 0.0;
    for a in 0..dim {
        let row = m.row(a);
        acc += row[a] * (x[a] * y[a]);
        for b in (a + 1)..dim {
            acc += row[b] * (x[a] * y[b] + x[b] * y[a]);
        }
    }
    acc
}

fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn check_dims(metric: &ConditionedMetric, x: &[f64], y: &[f64]) -> Result<()> {
    for v in [x, y] {
        if v.len() != metric.dim() {
            return Err(Error::DimensionMismatch {
                expected: metric.dim(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// Closed-form predictive similarity of `x` and `y` under `metric`.
///
/// Errors with [`Error::UndefinedSimilarity`] when either side has
/// (numerically) zero variance under the conditioning; reporting 0 instead
/// would fabricate orthogonality.
pub fn psim(x: &[f64], y: &[f64], metric: &ConditionedMetric) -> Result<f64> {
    check_dims(metric, x, y)?;
    let cov = metric.covariance();
    let scale = metric.spectral_scale();
    let vx = quadratic_form(cov, x, x);
    if vx <= VARIANCE_EPS * squared_norm(x) * scale {
        return Err(Error::UndefinedSimilarity { side: Side::Left });
    }
    let vy = quadratic_form(cov, y, y);
    if vy <= VARIANCE_EPS * squared_norm(y) * scale {
        return Err(Error::UndefinedSimilarity { side: Side::Right });
    }
    Ok(quadratic_form(cov, x, y) / (vx * vy).sqrt())
}

/// Predictive similarity evaluated from its definition: the weighted Pearson
/// correlation of the per-target score sequences `(xᵀ t_i)_i` and
/// `(yᵀ t_i)_i`. Slower than [`psim`] by a factor of `|V|`; retained as the
/// brute-force oracle.
pub fn psim_empirical(
    x: &[f64],
    y: &[f64],
    targets: ArrayView2<f32>,
    spec: &WeightSpec,
) -> Result<f64> {
    let dim = targets.ncols();
    if x.len() != dim || y.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: if x.len() != dim { x.len() } else { y.len() },
        });
    }
    if spec.len() != targets.nrows() {
        return Err(Error::DimensionMismatch {
            expected: targets.nrows(),
            got: spec.len(),
        });
    }
    let weights = spec.weights();
    let total: f64 = weights.iter().sum();

    let score = |v: &[f64]| -> Vec<f64> {
        targets
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(v).map(|(&t, &a)| t as f64 * a).sum())
            .collect()
    };
    let sx = score(x);
    let sy = score(y);

    let weighted_mean = |s: &[f64]| -> f64 {
        s.iter().zip(weights).map(|(a, w)| w * a).sum::<f64>() / total
    };
    let mx = weighted_mean(&sx);
    let my = weighted_mean(&sy);

    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut cov = 0.0;
    let mut sq_x = 0.0;
    let mut sq_y = 0.0;
    for ((a, b), &w) in sx.iter().zip(&sy).zip(weights) {
        let da = a - mx;
        let db = b - my;
        vx += w * da * da;
        vy += w * db * db;
        cov += w * da * db;
        sq_x += w * a * a;
        sq_y += w * b * b;
    }
    vx /= total;
    vy /= total;
    cov /= total;
    sq_x /= total;
    sq_y /= total;

    if vx <= VARIANCE_EPS * sq_x {
        return Err(Error::UndefinedSimilarity { side: Side::Left });
    }
    if vy <= VARIANCE_EPS * sq_y {
        return Err(Error::UndefinedSimilarity { side: Side::Right });
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Plain cosine similarity, the baseline metric.
pub fn cosine(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let nx = squared_norm(x);
    if nx == 0.0 {
        return Err(Error::ZeroVector { side: Side::Left });
    }
    let ny = squared_norm(y);
    if ny == 0.0 {
        return Err(Error::ZeroVector { side: Side::Right });
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(dot / (nx.sqrt() * ny.sqrt()))
}

/// Predictive similarity between the target vectors of two words.
pub fn word_psim(
    model: &EmbeddingModel,
    metric: &ConditionedMetric,
    left: &str,
    right: &str,
) -> Result<f64> {
    let x = model
        .target_of(left)
        .ok_or_else(|| Error::UnknownToken(left.to_owned()))?;
    let y = model
        .target_of(right)
        .ok_or_else(|| Error::UnknownToken(right.to_owned()))?;
    psim(&to_f64(x), &to_f64(y), metric)
}

/// Predictive similarity between two sources.
///
/// Source vectors are compared directly against the target-word covariance;
/// context vectors play no role here even though they were trained.
pub fn source_psim(
    model: &EmbeddingModel,
    metric: &ConditionedMetric,
    left: &str,
    right: &str,
) -> Result<f64> {
    let x = model
        .source_of(left)
        .ok_or_else(|| Error::UnknownSource(left.to_owned()))?;
    let y = model
        .source_of(right)
        .ok_or_else(|| Error::UnknownSource(right.to_owned()))?;
    psim(&to_f64(x), &to_f64(y), metric)
}

pub fn word_cosine(model: &EmbeddingModel, left: &str, right: &str) -> Result<f64> {
    let x = model
        .target_of(left)
        .ok_or_else(|| Error::UnknownToken(left.to_owned()))?;
    let y = model
        .target_of(right)
        .ok_or_else(|| Error::UnknownToken(right.to_owned()))?;
    cosine(&to_f64(x), &to_f64(y))
}

pub fn source_cosine(model: &EmbeddingModel, left: &str, right: &str) -> Result<f64> {
    let x = model
        .source_of(left)
        .ok_or_else(|| Error::UnknownSource(left.to_owned()))?;
    let y = model
        .source_of(right)
        .ok_or_else(|| Error::UnknownSource(right.to_owned()))?;
    cosine(&to_f64(x), &to_f64(y))
}

/// The `k` in-vocabulary tokens most predictively similar to `query` under
/// `metric`, best first. The query itself is excluded, exact ties are broken
/// lexicographically, and tokens with undefined similarity are skipped.
pub fn conditioned_knn(
    model: &EmbeddingModel,
    metric: &ConditionedMetric,
    query: &str,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let vocab = model.vocab();
    let query_id = vocab
        .id(query)
        .ok_or_else(|| Error::UnknownToken(query.to_owned()))?;
    let q = to_f64(model.target(query_id));
    if q.len() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            got: q.len(),
        });
    }

    let cov = metric.covariance();
    let scale = metric.spectral_scale();
    let vq = quadratic_form(cov, &q, &q);
    if vq <= VARIANCE_EPS * squared_norm(&q) * scale {
        return Err(Error::UndefinedSimilarity { side: Side::Left });
    }

    // One pass of dense algebra instead of |V| quadratic forms: with
    // M = T C, the numerator for row i is M_i · q and the variance is
    // M_i · T_i.
    let targets: Array2<f64> = model.targets().mapv(|v| v as f64);
    let m = targets.dot(cov);
    let numerators = m.dot(&Array1::from_vec(q.clone()));

    let mut scored: Vec<(u32, f64)> = Vec::with_capacity(vocab.len().saturating_sub(1));
    for i in 0..vocab.len() {
        if i as u32 == query_id {
            continue;
        }
        let row_t = targets.row(i);
        let variance = m.row(i).dot(&row_t);
        if variance <= VARIANCE_EPS * row_t.dot(&row_t) * scale {
            continue;
        }
        scored.push((i as u32, numerators[i] / (vq * variance).sqrt()));
    }
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| vocab.token(a.0).cmp(vocab.token(b.0)))
    });
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(id, s)| (vocab.token(id).to_owned(), s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::weighted_covariance;
    use crate::vocab::Vocabulary;
    use ndarray::{array, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_metric(
        rng: &mut ChaCha8Rng,
        n: usize,
        dim: usize,
    ) -> (Array2<f32>, WeightSpec, ConditionedMetric) {
        let targets = Array2::from_shape_fn((n, dim), |_| rng.random::<f32>() * 2.0 - 1.0);
        let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        let spec = WeightSpec::new(weights).unwrap();
        let metric = weighted_covariance(targets.view(), &spec).unwrap();
        (targets, spec, metric)
    }

    #[test]
    fn self_similarity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (_, _, metric) = random_metric(&mut rng, 30, 6);
        let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
        let r = psim(&x, &x, &metric).unwrap();
        assert!((r - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn identity_covariance_reduces_to_cosine() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let metric = ConditionedMetric::from_covariance(Array2::eye(5)).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let p = psim(&x, &y, &metric).unwrap();
            let c = cosine(&x, &y).unwrap();
            assert!((p - c).abs() <= 1e-9, "psim {p} vs cosine {c}");
        }
    }

    #[test]
    fn closed_form_matches_empirical_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let (targets, spec, metric) = random_metric(&mut rng, 50, 10);
            let x: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let y: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let closed = psim(&x, &y, &metric).unwrap();
            let empirical = psim_empirical(&x, &y, targets.view(), &spec).unwrap();
            assert!(
                (closed - empirical).abs() <= 1e-9,
                "closed {closed} vs empirical {empirical}"
            );
        }
    }

    #[test]
    fn zero_variance_direction_names_the_side() {
        // Two points on the first axis: no variance along the second.
        let targets = array![[1.0f32, 0.0], [-1.0, 0.0]];
        let spec = WeightSpec::new(vec![1.0, 1.0]).unwrap();
        let metric = weighted_covariance(targets.view(), &spec).unwrap();
        let dead = vec![0.0, 1.0];
        let live = vec![1.0, 0.0];
        match psim(&dead, &live, &metric) {
            Err(Error::UndefinedSimilarity { side: Side::Left }) => {}
            other => panic!("expected left undefined, got {other:?}"),
        }
        match psim(&live, &dead, &metric) {
            Err(Error::UndefinedSimilarity { side: Side::Right }) => {}
            other => panic!("expected right undefined, got {other:?}"),
        }
    }

    #[test]
    fn empirical_constant_scores_are_undefined() {
        let targets = array![[1.0f32, 0.0], [1.0, 0.5]];
        let spec = WeightSpec::new(vec![1.0, 1.0]).unwrap();
        // x is orthogonal to the direction in which the targets differ.
        let x = vec![0.0, 0.0];
        let y = vec![0.3, 0.7];
        assert!(matches!(
            psim_empirical(&x, &y, targets.view(), &spec),
            Err(Error::UndefinedSimilarity { side: Side::Left })
        ));
        // Identical score sequences correlate perfectly.
        let r = psim_empirical(&y, &y, targets.view(), &spec).unwrap();
        assert!((r - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let r = cosine(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert!((r - 1.0).abs() <= 1e-12);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector { side: Side::Left })
        ));

        // Scalar-loop oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.5).collect();
        let y: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut dot = 0.0;
        let mut nx = 0.0;
        let mut ny = 0.0;
        for i in 0..16 {
            dot += x[i] * y[i];
            nx += x[i] * x[i];
            ny += y[i] * y[i];
        }
        let expected = dot / (nx.sqrt() * ny.sqrt());
        assert!((cosine(&x, &y).unwrap() - expected).abs() <= 1e-12);
    }

    #[test]
    fn symmetry_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let (_, _, metric) = random_metric(&mut rng, 20, 5);
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let (Ok(a), Ok(b)) = (psim(&x, &y, &metric), psim(&y, &x, &metric)) else {
                continue;
            };
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn positive_scaling_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let (_, _, metric) = random_metric(&mut rng, 20, 5);
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let alpha = rng.random::<f64>() * 10.0 + 0.01;
            let beta = rng.random::<f64>() * 10.0 + 0.01;
            let xs: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let ys: Vec<f64> = y.iter().map(|v| v * beta).collect();
            let (Ok(a), Ok(b)) = (psim(&x, &y, &metric), psim(&xs, &ys, &metric)) else {
                continue;
            };
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    fn toy_model() -> EmbeddingModel {
        let vocab =
            Vocabulary::from_tokens(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        // Under the identity metric psim is cosine: b is the closest other
        // token to a (cos(a,b) ≈ 0.994 vs cos(a,c) = 0).
        let targets = array![[1.0f32, 0.0], [0.9, 0.1], [0.0, 1.0]];
        EmbeddingModel::from_targets(vocab, targets).unwrap()
    }

    #[test]
    fn knn_returns_hand_computed_neighbor() {
        let model = toy_model();
        let metric = ConditionedMetric::from_covariance(Array2::eye(2)).unwrap();
        let top = conditioned_knn(&model, &metric, "a", 1).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].0, "b");
        let expected = cosine(&[1.0, 0.0], &[0.9, 0.1]).unwrap();
        assert!((top[0].1 - expected).abs() <= 1e-9);
    }

    #[test]
    fn knn_large_k_returns_all_other_tokens() {
        let model = toy_model();
        let metric = ConditionedMetric::from_covariance(Array2::eye(2)).unwrap();
        let all = conditioned_knn(&model, &metric, "a", 10).unwrap();
        assert_eq!(all.len(), 2);
        let mut tokens: Vec<&str> = all.iter().map(|(t, _)| t.as_str()).collect();
        tokens.sort();
        assert_eq!(tokens, vec!["b", "c"]);
        // Scores are sorted best-first.
        assert!(all[0].1 >= all[1].1);
    }

    #[test]
    fn knn_unknown_query_errors() {
        let model = toy_model();
        let metric = ConditionedMetric::from_covariance(Array2::eye(2)).unwrap();
        assert!(matches!(
            conditioned_knn(&model, &metric, "zz", 1),
            Err(Error::UnknownToken(_))
        ));
    }
}
