//! Per-pair logistic loss and its analytic gradients.
//!
//! The scoring function is `s = tᵀc` (plain skipgram) or `s = tᵀ(c + d)`
//! (source-augmented); a positive example contributes `l(s)` and a sampled
//! negative contributes `l(-s)`, with `l(x) = log(1 + e^{-x})`.

/// `log(1 + e^{-x})`, stable for large |x|.
pub fn log_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Logistic function, stable for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn score(target: &[f64], context: &[f64], source: Option<&[f64]>) -> f64 {
    match source {
        None => target.iter().zip(context).map(|(t, c)| t * c).sum(),
        Some(src) => target
            .iter()
            .zip(context)
            .zip(src)
            .map(|((t, c), d)| t * (c + d))
            .sum(),
    }
}

/// Loss of one example: `l(s)` when `positive`, else `l(-s)`.
pub fn pair_loss(target: &[f64], context: &[f64], source: Option<&[f64]>, positive: bool) -> f64 {
    let s = score(target, context, source);
    if positive {
        log_logistic(s)
    } else {
        log_logistic(-s)
    }
}

/// Gradients of [`pair_loss`] with respect to each participating vector.
pub struct PairGradient {
    pub target: Vec<f64>,
    pub context: Vec<f64>,
    pub source: Option<Vec<f64>>,
}

/// `d loss / d s` for an example with score `s`; the chain-rule coefficient
/// shared by every vector's gradient.
pub fn score_gradient(s: f64, positive: bool) -> f64 {
    // positive: d/ds log(1+e^{-s}) = -sigmoid(-s); negative: sigmoid(s).
    if positive {
        -sigmoid(-s)
    } else {
        sigmoid(s)
    }
}

pub fn pair_gradient(
    target: &[f64],
    context: &[f64],
    source: Option<&[f64]>,
    positive: bool,
) -> PairGradient {
    let s = score(target, context, source);
    let g = score_gradient(s, positive);
    let target_grad: Vec<f64> = match source {
        None => context.iter().map(|c| g * c).collect(),
        Some(src) => context.iter().zip(src).map(|(c, d)| g * (c + d)).collect(),
    };
    let context_grad: Vec<f64> = target.iter().map(|t| g * t).collect();
    let source_grad = source.map(|_| target.iter().map(|t| g * t).collect());
    PairGradient {
        target: target_grad,
        context: context_grad,
        source: source_grad,
    }
}
