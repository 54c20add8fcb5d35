//! Hand-rolled neural primitives: dense, convolution, gated recurrent cell,
//! losses, and an Adam optimizer.
//!
//! Conventions shared by every layer:
//!
//! * `forward` never mutates parameters; callers keep whatever activations
//!   the matching `backward` needs (there is no hidden tape).
//! * `backward` *accumulates* into the layer's gradient buffers and into the
//!   caller-supplied input-gradient slice, so several consumers of one
//!   activation can backpropagate independently. Callers zero buffers at the
//!   start of an accumulation.
//! * Everything is single-sample; batching is a loop plus gradient
//!   accumulation, which is plenty at the model sizes used here.

pub mod adam;
pub mod conv;
pub mod dense;
pub mod gru;
pub mod init;
pub mod loss;
pub mod mlp;

pub use adam::Adam;
pub use conv::Conv2d;
pub use dense::Dense;
pub use gru::{GruCache, GruCell};
pub use mlp::Mlp;

use crate::scalar::Scalar;

/// Access to a network's parameter and gradient tensors in a fixed order.
///
/// The visitation order defines the flat layout used by the optimizer,
/// checkpoints, and finite-difference tests.
pub trait Parameterized<S: Scalar> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [S], &mut [S]));

    fn zero_grads(&mut self) {
        self.visit_params(&mut |_, g| {
            for v in g.iter_mut() {
                *v = S::zero();
            }
        });
    }

    fn num_params(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p, _| n += p.len());
        n
    }

    fn params_flat(&mut self) -> Vec<S> {
        let mut out = Vec::new();
        self.visit_params(&mut |p, _| out.extend_from_slice(p));
        out
    }

    fn grads_flat(&mut self) -> Vec<S> {
        let mut out = Vec::new();
        self.visit_params(&mut |_, g| out.extend_from_slice(g));
        out
    }

    fn load_flat(&mut self, data: &[S]) {
        let mut at = 0;
        self.visit_params(&mut |p, _| {
            p.copy_from_slice(&data[at..at + p.len()]);
            at += p.len();
        });
        assert_eq!(at, data.len(), "flat parameter size mismatch");
    }

    /// Add `delta` to the parameter at flat index `idx`.
    fn perturb_at(&mut self, idx: usize, delta: S) {
        let mut at = 0;
        let mut done = false;
        self.visit_params(&mut |p, _| {
            if !done && idx < at + p.len() {
                p[idx - at] += delta;
                done = true;
            }
            at += p.len();
        });
        assert!(done, "parameter index out of range");
    }
}

/// In-place rectifier; returns nothing, mutates `x`.
pub fn relu<S: Scalar>(x: &mut [S]) {
    for v in x.iter_mut() {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

/// Gradient of the rectifier given its *output* `y` (valid since
/// `relu(x) > 0 <=> x > 0`). Zeroes masked entries of `dy` in place.
pub fn relu_backward<S: Scalar>(y: &[S], dy: &mut [S]) {
    for (d, o) in dy.iter_mut().zip(y) {
        if *o <= S::zero() {
            *d = S::zero();
        }
    }
}
