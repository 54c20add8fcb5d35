//! One-hidden-layer perceptron with a rectified hidden layer.

use rand_chacha::ChaCha8Rng;

use super::{relu, relu_backward, Dense, Parameterized};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Mlp<S> {
    pub fc1: Dense<S>,
    pub fc2: Dense<S>,
}

impl<S: Scalar> Mlp<S> {
    pub fn new(rng: &mut ChaCha8Rng, in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            fc1: Dense::new(rng, in_dim, hidden),
            fc2: Dense::new(rng, hidden, out_dim),
        }
    }

    /// Output layer drawn small so softmax heads start near uniform.
    pub fn new_small_out(
        rng: &mut ChaCha8Rng,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        scale: f64,
    ) -> Self {
        Self {
            fc1: Dense::new(rng, in_dim, hidden),
            fc2: Dense::new_small(rng, hidden, out_dim, scale),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.fc1.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.fc2.out_dim
    }

    /// Returns (hidden post-rectifier, output); the hidden vector feeds
    /// `backward`.
    pub fn forward(&self, x: &[S]) -> (Vec<S>, Vec<S>) {
        let mut hidden = vec![S::zero(); self.fc1.out_dim];
        self.fc1.forward(x, &mut hidden);
        relu(&mut hidden);
        let mut out = vec![S::zero(); self.fc2.out_dim];
        self.fc2.forward(&hidden, &mut out);
        (hidden, out)
    }

    /// Accumulates parameter gradients and optionally the input gradient.
    pub fn backward(&mut self, x: &[S], hidden: &[S], dout: &[S], dx: Option<&mut [S]>) {
        let mut dh = vec![S::zero(); self.fc1.out_dim];
        self.fc2.backward(hidden, dout, Some(&mut dh));
        relu_backward(hidden, &mut dh);
        self.fc1.backward(x, &dh, dx);
    }
}

impl<S: Scalar> Parameterized<S> for Mlp<S> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [S], &mut [S])) {
        self.fc1.visit_params(f);
        self.fc2.visit_params(f);
    }
}
