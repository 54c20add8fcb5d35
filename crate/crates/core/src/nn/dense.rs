//! Fully connected layer.

use rand_chacha::ChaCha8Rng;

use super::init;
use super::Parameterized;
use crate::scalar::Scalar;

/// `y = W x + b`, with `W` stored row-major `[out][in]`.
#[derive(Debug, Clone)]
pub struct Dense<S> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<S>,
    pub b: Vec<S>,
    pub gw: Vec<S>,
    pub gb: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            w: init::glorot_uniform(rng, in_dim, out_dim, in_dim * out_dim),
            b: init::zeros(out_dim),
            gw: init::zeros(in_dim * out_dim),
            gb: init::zeros(out_dim),
        }
    }

    /// Same shape, but weights drawn U(-scale, scale); near-uniform softmax
    /// heads start from small output weights.
    pub fn new_small(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize, scale: f64) -> Self {
        Self {
            in_dim,
            out_dim,
            w: init::uniform(rng, scale, in_dim * out_dim),
            b: init::zeros(out_dim),
            gw: init::zeros(in_dim * out_dim),
            gb: init::zeros(out_dim),
        }
    }

    pub fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            w: init::zeros(in_dim * out_dim),
            b: init::zeros(out_dim),
            gw: init::zeros(in_dim * out_dim),
            gb: init::zeros(out_dim),
        }
    }

    pub fn forward(&self, x: &[S], y: &mut [S]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(y.len(), self.out_dim);
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += *wi * *xi;
            }
            *yo = acc;
        }
    }

    /// Accumulates `gw`, `gb`; if `dx` is given, accumulates `W^T dy` into it.
    pub fn backward(&mut self, x: &[S], dy: &[S], dx: Option<&mut [S]>) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(dy.len(), self.out_dim);
        for (o, d) in dy.iter().enumerate() {
            self.gb[o] += *d;
            let grow = &mut self.gw[o * self.in_dim..(o + 1) * self.in_dim];
            for (g, xi) in grow.iter_mut().zip(x) {
                *g += *d * *xi;
            }
        }
        if let Some(dx) = dx {
            debug_assert_eq!(dx.len(), self.in_dim);
            for (o, d) in dy.iter().enumerate() {
                let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                for (dxi, wi) in dx.iter_mut().zip(row) {
                    *dxi += *wi * *d;
                }
            }
        }
    }
}

impl<S: Scalar> Parameterized<S> for Dense<S> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [S], &mut [S])) {
        f(&mut self.w, &mut self.gw);
        f(&mut self.b, &mut self.gb);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn forward_matches_manual() {
        let mut d = Dense::<f64>::zeroed(2, 2);
        d.w = vec![1.0, 2.0, 3.0, 4.0];
        d.b = vec![0.5, -0.5];
        let mut y = [0.0; 2];
        d.forward(&[1.0, -1.0], &mut y);
        assert_eq!(y, [1.0 - 2.0 + 0.5, 3.0 - 4.0 - 0.5]);
    }

    #[test]
    fn backward_accumulates() {
        let mut rng = stream(1, "dense");
        let mut d = Dense::<f64>::new(&mut rng, 3, 2);
        let x = [0.3, -0.7, 1.1];
        let dy = [1.0, -2.0];
        let mut dx = [0.0; 3];
        d.backward(&x, &dy, Some(&mut dx));
        d.backward(&x, &dy, Some(&mut dx));
        // double accumulation doubles every gradient
        assert!((d.gb[0] - 2.0).abs() < 1e-12);
        assert!((d.gw[0] - 2.0 * x[0]).abs() < 1e-12);
        assert!((dx[0] - 2.0 * (d.w[0] * 1.0 + d.w[3] * -2.0)).abs() < 1e-12);
    }
}
