//! Loss heads: floored softmax cross entropy, floored Bernoulli cross
//! entropy, and squared error.
//!
//! "Floored" means the predicted probability is mixed with a uniform floor
//! before the log, so losses and log-ratio rewards stay bounded:
//! `q = (1 - n*eps) p + eps` per class. Gradients are exact for the floored
//! objective.

use crate::scalar::{sc, Scalar};

/// Probability floor applied to every predicted probability.
pub const PROB_FLOOR: f64 = 1e-6;

/// Numerically stable softmax.
pub fn softmax<S: Scalar>(logits: &[S], out: &mut [S]) {
    let mut max = logits[0];
    for v in logits {
        if *v > max {
            max = *v;
        }
    }
    let mut sum = S::zero();
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (*l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

/// Floored class probabilities from logits.
pub fn floored_softmax<S: Scalar>(logits: &[S], out: &mut [S]) {
    softmax(logits, out);
    let n = sc::<S>(logits.len() as f64);
    let eps = sc::<S>(PROB_FLOOR);
    let keep = S::one() - n * eps;
    for o in out.iter_mut() {
        *o = keep * *o + eps;
    }
}

/// `-ln q[target]` with `q` the floored softmax. Returns the loss and writes
/// the exact logit gradient (scaled `p - onehot`) into `dlogits`.
pub fn softmax_xent<S: Scalar>(logits: &[S], target: usize, dlogits: &mut [S]) -> S {
    let n = logits.len();
    let mut p = vec![S::zero(); n];
    softmax(logits, &mut p);
    let eps = sc::<S>(PROB_FLOOR);
    let keep = S::one() - sc::<S>(n as f64) * eps;
    let q_t = keep * p[target] + eps;
    let loss = -q_t.ln();
    let scale = keep * p[target] / q_t;
    for (i, d) in dlogits.iter_mut().enumerate() {
        let onehot = if i == target { S::one() } else { S::zero() };
        *d = scale * (p[i] - onehot);
    }
    loss
}

/// Loss only, from already-floored probabilities.
pub fn xent_from_probs<S: Scalar>(q: &[S], target: usize) -> S {
    -q[target].ln()
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Floored Bernoulli probability of "1" from a logit.
pub fn floored_sigmoid<S: Scalar>(logit: S) -> S {
    let eps = sc::<S>(PROB_FLOOR);
    (S::one() - sc::<S>(2.0) * eps) * sigmoid(logit) + eps
}

/// Binary cross entropy against `target` in {0, 1}; returns (loss, dlogit).
pub fn bernoulli_xent<S: Scalar>(logit: S, target: bool) -> (S, S) {
    let one = S::one();
    let eps = sc::<S>(PROB_FLOOR);
    let keep = one - sc::<S>(2.0) * eps;
    let s = sigmoid(logit);
    let q = keep * s + eps;
    let y = if target { one } else { S::zero() };
    let loss = -(y * q.ln() + (one - y) * (one - q).ln());
    let dlogit = keep * s * (one - s) * (q - y) / (q * (one - q));
    (loss, dlogit)
}

/// Squared Euclidean distance; writes `2 (a - b)` into `da`.
pub fn l2<S: Scalar>(a: &[S], b: &[S], da: &mut [S]) -> S {
    let mut loss = S::zero();
    for i in 0..a.len() {
        let diff = a[i] - b[i];
        loss += diff * diff;
        da[i] = sc::<S>(2.0) * diff;
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let logits = [0.0f64; 26];
        let mut p = [0.0f64; 26];
        floored_softmax(&logits, &mut p);
        for v in p {
            assert!((v - 1.0 / 26.0).abs() < 1e-12);
        }
    }

    #[test]
    fn xent_uniform_is_ln_n() {
        let logits = [0.0f64; 26];
        let mut d = [0.0f64; 26];
        let loss = softmax_xent(&logits, 3, &mut d);
        assert!((loss - (26.0f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn bernoulli_confident_and_correct_is_cheap() {
        let (loss, _) = bernoulli_xent(30.0f64, true);
        assert!(loss < 1e-5);
        let (loss, _) = bernoulli_xent(-30.0f64, false);
        assert!(loss < 1e-5);
    }

    #[test]
    fn l2_of_3_4_is_25() {
        let mut da = [0.0f64; 2];
        let loss = l2(&[0.0, 0.0], &[3.0, 4.0], &mut da);
        assert_eq!(loss, 25.0);
        assert_eq!(da, [-6.0, -8.0]);
    }
}
