//! Gated recurrent cell with explicit single-step forward/backward, so the
//! caller owns backpropagation through time.

use rand_chacha::ChaCha8Rng;

use super::init;
use super::Parameterized;
use crate::scalar::Scalar;

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Per-step activations needed by `backward`.
#[derive(Debug, Clone, Default)]
pub struct GruCache<S> {
    pub x: Vec<S>,
    pub h_prev: Vec<S>,
    pub r: Vec<S>,
    pub z: Vec<S>,
    pub n: Vec<S>,
}

/// Standard gated recurrent unit:
///
/// ```text
/// r = sigmoid(Wr x + Ur h + br)
/// z = sigmoid(Wz x + Uz h + bz)
/// n = tanh(Wn x + Un (r . h) + bn)
/// h' = (1 - z) . n + z . h
/// ```
#[derive(Debug, Clone)]
pub struct GruCell<S> {
    pub in_dim: usize,
    pub hidden: usize,
    pub wr: Vec<S>,
    pub ur: Vec<S>,
    pub br: Vec<S>,
    pub wz: Vec<S>,
    pub uz: Vec<S>,
    pub bz: Vec<S>,
    pub wn: Vec<S>,
    pub un: Vec<S>,
    pub bn: Vec<S>,
    pub gwr: Vec<S>,
    pub gur: Vec<S>,
    pub gbr: Vec<S>,
    pub gwz: Vec<S>,
    pub guz: Vec<S>,
    pub gbz: Vec<S>,
    pub gwn: Vec<S>,
    pub gun: Vec<S>,
    pub gbn: Vec<S>,
}

impl<S: Scalar> GruCell<S> {
    pub fn new(rng: &mut ChaCha8Rng, in_dim: usize, hidden: usize) -> Self {
        let wn = in_dim * hidden;
        let un = hidden * hidden;
        let mk_w = |r: &mut ChaCha8Rng| init::glorot_uniform::<S>(r, in_dim, hidden, wn);
        let wr = mk_w(rng);
        let wz = mk_w(rng);
        let wcand = mk_w(rng);
        let mk_u = |r: &mut ChaCha8Rng| init::glorot_uniform::<S>(r, hidden, hidden, un);
        let ur = mk_u(rng);
        let uz = mk_u(rng);
        let ucand = mk_u(rng);
        Self {
            in_dim,
            hidden,
            wr,
            ur,
            br: init::zeros(hidden),
            wz,
            uz,
            bz: init::zeros(hidden),
            wn: wcand,
            un: ucand,
            bn: init::zeros(hidden),
            gwr: init::zeros(wn),
            gur: init::zeros(un),
            gbr: init::zeros(hidden),
            gwz: init::zeros(wn),
            guz: init::zeros(un),
            gbz: init::zeros(hidden),
            gwn: init::zeros(wn),
            gun: init::zeros(un),
            gbn: init::zeros(hidden),
        }
    }

    fn matvec(w: &[S], x: &[S], out: &mut [S]) {
        let in_dim = x.len();
        for (o, yo) in out.iter_mut().enumerate() {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            let mut acc = S::zero();
            for (wi, xi) in row.iter().zip(x) {
                acc += *wi * *xi;
            }
            *yo += acc;
        }
    }

    /// One step; fills `h_out` and, if given, the cache for `backward`.
    pub fn forward(&self, x: &[S], h_prev: &[S], h_out: &mut [S], cache: Option<&mut GruCache<S>>) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(h_prev.len(), self.hidden);
        let h = self.hidden;
        let mut r = self.br.clone();
        Self::matvec(&self.wr, x, &mut r);
        Self::matvec(&self.ur, h_prev, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut z = self.bz.clone();
        Self::matvec(&self.wz, x, &mut z);
        Self::matvec(&self.uz, h_prev, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let rh: Vec<S> = (0..h).map(|i| r[i] * h_prev[i]).collect();
        let mut n = self.bn.clone();
        Self::matvec(&self.wn, x, &mut n);
        Self::matvec(&self.un, &rh, &mut n);
        n.iter_mut().for_each(|v| *v = v.tanh());

        for i in 0..h {
            h_out[i] = (S::one() - z[i]) * n[i] + z[i] * h_prev[i];
        }
        if let Some(c) = cache {
            c.x = x.to_vec();
            c.h_prev = h_prev.to_vec();
            c.r = r;
            c.z = z;
            c.n = n;
        }
    }

    /// Backward for one step. `dh` is the loss gradient w.r.t. this step's
    /// output; accumulates into parameter gradients, `dx`, and `dh_prev`.
    pub fn backward(&mut self, cache: &GruCache<S>, dh: &[S], dx: &mut [S], dh_prev: &mut [S]) {
        let h = self.hidden;
        let one = S::one();
        let mut dz = vec![S::zero(); h];
        let mut dn_pre = vec![S::zero(); h];
        for i in 0..h {
            let (z_, n_) = (cache.z[i], cache.n[i]);
            dz[i] = dh[i] * (cache.h_prev[i] - n_) * z_ * (one - z_);
            dn_pre[i] = dh[i] * (one - z_) * (one - n_ * n_);
            dh_prev[i] += dh[i] * z_;
        }
        // candidate path
        let mut drh = vec![S::zero(); h];
        Self::outer_acc(&mut self.gwn, &dn_pre, &cache.x);
        let rh: Vec<S> = (0..h).map(|i| cache.r[i] * cache.h_prev[i]).collect();
        Self::outer_acc(&mut self.gun, &dn_pre, &rh);
        for i in 0..h {
            self.gbn[i] += dn_pre[i];
        }
        Self::matvec_t(&self.wn, &dn_pre, dx);
        Self::matvec_t(&self.un, &dn_pre, &mut drh);
        // reset gate via r.h
        let mut dr_pre = vec![S::zero(); h];
        for i in 0..h {
            dh_prev[i] += drh[i] * cache.r[i];
            dr_pre[i] = drh[i] * cache.h_prev[i] * cache.r[i] * (one - cache.r[i]);
        }
        Self::outer_acc(&mut self.gwr, &dr_pre, &cache.x);
        Self::outer_acc(&mut self.gur, &dr_pre, &cache.h_prev);
        for i in 0..h {
            self.gbr[i] += dr_pre[i];
        }
        Self::matvec_t(&self.wr, &dr_pre, dx);
        Self::matvec_t(&self.ur, &dr_pre, dh_prev);
        // update gate
        Self::outer_acc(&mut self.gwz, &dz, &cache.x);
        Self::outer_acc(&mut self.guz, &dz, &cache.h_prev);
        for i in 0..h {
            self.gbz[i] += dz[i];
        }
        Self::matvec_t(&self.wz, &dz, dx);
        Self::matvec_t(&self.uz, &dz, dh_prev);
    }

    /// g += d (outer) x
    fn outer_acc(g: &mut [S], d: &[S], x: &[S]) {
        let in_dim = x.len();
        for (o, dv) in d.iter().enumerate() {
            if *dv == S::zero() {
                continue;
            }
            let row = &mut g[o * in_dim..(o + 1) * in_dim];
            for (gi, xi) in row.iter_mut().zip(x) {
                *gi += *dv * *xi;
            }
        }
    }

    /// out += W^T d
    fn matvec_t(w: &[S], d: &[S], out: &mut [S]) {
        let in_dim = out.len();
        for (o, dv) in d.iter().enumerate() {
            if *dv == S::zero() {
                continue;
            }
            let row = &w[o * in_dim..(o + 1) * in_dim];
            for (oi, wi) in out.iter_mut().zip(row) {
                *oi += *wi * *dv;
            }
        }
    }

    /// Crude Lipschitz bound of one step w.r.t. its input, from weight norms.
    /// Uses |h| < 1, |n| < 1, sigmoid' <= 1/4, tanh' <= 1.
    pub fn input_lipschitz_bound(&self) -> f64 {
        let f = |w: &[S]| {
            w.iter()
                .map(|v| {
                    let x = v.to_f64().unwrap();
                    x * x
                })
                .sum::<f64>()
                .sqrt()
        };
        let (wr, wz, wn, un) = (f(&self.wr), f(&self.wz), f(&self.wn), f(&self.un));
        // |dh'/dx| <= 0.25*|Wz|*(|h|+|n|) + |Wn| + |Un|*0.25*|Wr|*|h|
        0.25 * wz * 2.0 + wn + 0.25 * un * wr
    }
}

impl<S: Scalar> Parameterized<S> for GruCell<S> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [S], &mut [S])) {
        f(&mut self.wr, &mut self.gwr);
        f(&mut self.ur, &mut self.gur);
        f(&mut self.br, &mut self.gbr);
        f(&mut self.wz, &mut self.gwz);
        f(&mut self.uz, &mut self.guz);
        f(&mut self.bz, &mut self.gbz);
        f(&mut self.wn, &mut self.gwn);
        f(&mut self.un, &mut self.gun);
        f(&mut self.bn, &mut self.gbn);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_weights_zero_state_gives_zero_output() {
        let mut rng = stream(5, "gru");
        let mut cell = GruCell::<f64>::new(&mut rng, 3, 4);
        cell.visit_params(&mut |p, _| p.iter_mut().for_each(|v| *v = 0.0));
        let mut h = [0.0; 4];
        cell.forward(&[1.0, -2.0, 0.5], &[0.0; 4], &mut h, None);
        // gates are 1/2, candidate tanh(0) = 0, previous state 0
        assert!(h.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hidden_state_stays_in_unit_box() {
        let mut rng = stream(6, "gru2");
        let cell = GruCell::<f64>::new(&mut rng, 2, 8);
        let mut h = vec![0.0; 8];
        let mut next = vec![0.0; 8];
        for i in 0..200 {
            let x = [(i as f64).sin() * 5.0, (i as f64).cos() * 5.0];
            cell.forward(&x, &h, &mut next, None);
            std::mem::swap(&mut h, &mut next);
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }
}
