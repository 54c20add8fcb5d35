//! Small 2-D convolution over channel-major `[c][h][w]` buffers.

use rand_chacha::ChaCha8Rng;

use super::init;
use super::Parameterized;
use crate::scalar::Scalar;

/// Square-kernel convolution with zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d<S> {
    pub c_in: usize,
    pub c_out: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// `[c_out][c_in][k][k]`
    pub w: Vec<S>,
    pub b: Vec<S>,
    pub gw: Vec<S>,
    pub gb: Vec<S>,
}

impl<S: Scalar> Conv2d<S> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rng: &mut ChaCha8Rng,
        c_in: usize,
        c_out: usize,
        in_h: usize,
        in_w: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let fan_in = c_in * kernel * kernel;
        let fan_out = c_out * kernel * kernel;
        let n = c_out * c_in * kernel * kernel;
        Self {
            c_in,
            c_out,
            in_h,
            in_w,
            kernel,
            stride,
            pad,
            w: init::glorot_uniform(rng, fan_in, fan_out, n),
            b: init::zeros(c_out),
            gw: init::zeros(n),
            gb: init::zeros(c_out),
        }
    }

    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_len(&self) -> usize {
        self.c_out * self.out_h() * self.out_w()
    }

    pub fn in_len(&self) -> usize {
        self.c_in * self.in_h * self.in_w
    }

    fn widx(&self, co: usize, ci: usize, kr: usize, kc: usize) -> usize {
        ((co * self.c_in + ci) * self.kernel + kr) * self.kernel + kc
    }

    pub fn forward(&self, x: &[S], y: &mut [S]) {
        debug_assert_eq!(x.len(), self.in_len());
        debug_assert_eq!(y.len(), self.out_len());
        let (oh, ow) = (self.out_h(), self.out_w());
        for co in 0..self.c_out {
            for orow in 0..oh {
                for ocol in 0..ow {
                    let mut acc = self.b[co];
                    for ci in 0..self.c_in {
                        for kr in 0..self.kernel {
                            let ir = (orow * self.stride + kr) as isize - self.pad as isize;
                            if ir < 0 || ir >= self.in_h as isize {
                                continue;
                            }
                            for kc in 0..self.kernel {
                                let ic = (ocol * self.stride + kc) as isize - self.pad as isize;
                                if ic < 0 || ic >= self.in_w as isize {
                                    continue;
                                }
                                let xi = x[(ci * self.in_h + ir as usize) * self.in_w + ic as usize];
                                acc += self.w[self.widx(co, ci, kr, kc)] * xi;
                            }
                        }
                    }
                    y[(co * oh + orow) * ow + ocol] = acc;
                }
            }
        }
    }

    /// Accumulates weight/bias gradients and optionally the input gradient.
    pub fn backward(&mut self, x: &[S], dy: &[S], mut dx: Option<&mut [S]>) {
        debug_assert_eq!(x.len(), self.in_len());
        debug_assert_eq!(dy.len(), self.out_len());
        let (oh, ow) = (self.out_h(), self.out_w());
        for co in 0..self.c_out {
            for orow in 0..oh {
                for ocol in 0..ow {
                    let d = dy[(co * oh + orow) * ow + ocol];
                    if d == S::zero() {
                        continue;
                    }
                    self.gb[co] += d;
                    for ci in 0..self.c_in {
                        for kr in 0..self.kernel {
                            let ir = (orow * self.stride + kr) as isize - self.pad as isize;
                            if ir < 0 || ir >= self.in_h as isize {
                                continue;
                            }
                            for kc in 0..self.kernel {
                                let ic = (ocol * self.stride + kc) as isize - self.pad as isize;
                                if ic < 0 || ic >= self.in_w as isize {
                                    continue;
                                }
                                let xoff = (ci * self.in_h + ir as usize) * self.in_w + ic as usize;
                                let wi = self.widx(co, ci, kr, kc);
                                self.gw[wi] += d * x[xoff];
                                if let Some(dx) = dx.as_deref_mut() {
                                    dx[xoff] += d * self.w[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<S: Scalar> Parameterized<S> for Conv2d<S> {
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
    fn identity_kernel_passes_through() {
        let mut rng = stream(3, "conv");
        let mut c = Conv2d::<f64>::new(&mut rng, 1, 1, 3, 3, 3, 1, 1);
        c.w.iter_mut().for_each(|v| *v = 0.0);
        c.b[0] = 0.0;
        c.w[4] = 1.0; // center tap
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        let mut y = [0.0; 9];
        c.forward(&x, &mut y);
        assert_eq!(x.to_vec(), y.to_vec());
    }

    #[test]
    fn stride_two_output_shape() {
        let mut rng = stream(3, "conv2");
        let c = Conv2d::<f64>::new(&mut rng, 2, 4, 5, 5, 3, 2, 1);
        assert_eq!((c.out_h(), c.out_w()), (3, 3));
        assert_eq!(c.out_len(), 36);
    }
}
