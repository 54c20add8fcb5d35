//! Adaptive-moment optimizer over a `Parameterized` network.

use super::Parameterized;
use crate::scalar::{sc, Scalar};

/// Adam with bias correction. Moment buffers are allocated lazily on the
/// first step, in the network's visitation order.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    t: u64,
    slots: Vec<(Vec<S>, Vec<S>)>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr: sc(lr),
            beta1: sc(0.9),
            beta2: sc(0.999),
            eps: sc(1e-8),
            t: 0,
            slots: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Apply one update from the accumulated gradients, then zero them.
    pub fn step<P: Parameterized<S>>(&mut self, net: &mut P) {
        self.t += 1;
        let t = self.t;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let corr1 = S::one() - b1.powi(t as i32);
        let corr2 = S::one() - b2.powi(t as i32);
        let slots = &mut self.slots;
        let mut idx = 0;
        net.visit_params(&mut |p, g| {
            if slots.len() == idx {
                slots.push((vec![S::zero(); p.len()], vec![S::zero(); p.len()]));
            }
            let (m, v) = &mut slots[idx];
            assert_eq!(m.len(), p.len(), "parameter layout changed under Adam");
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (S::one() - b1) * g[i];
                v[i] = b2 * v[i] + (S::one() - b2) * g[i] * g[i];
                let mhat = m[i] / corr1;
                let vhat = v[i] / corr2;
                p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps);
                g[i] = S::zero();
            }
            idx += 1;
        });
    }
}
