use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

/// One dilated causal 1-D convolution.
///
/// Weights are laid out `[tap][in_channel][out_channel]`; tap `i` reads the
/// input `dilation * i` steps in the past. Positions before the start of the
/// sequence read as zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvLayer {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub dilation: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(kernel: usize, in_channels: usize, out_channels: usize, dilation: usize) -> Self {
        Self {
            kernel,
            in_channels,
            out_channels,
            dilation,
            weights: vec![0.0; kernel * in_channels * out_channels],
            bias: vec![0.0; out_channels],
        }
    }

    /// He-uniform weights (`limit = sqrt(6 / fan_in)`), zero bias.
    pub fn he_uniform<R: Rng>(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::zeros(kernel, in_channels, out_channels, dilation);
        let fan = (kernel * in_channels) as f64;
        let limit = libm::sqrt(6.0 / fan);
        for w in &mut layer.weights {
            *w = rng.gen_range(-limit..limit);
        }
        layer
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(
            self.kernel,
            self.in_channels,
            self.out_channels,
            self.dilation,
        )
    }

    #[inline]
    fn tap_row(&self, tap: usize, c: usize) -> &[f64] {
        let start = (tap * self.in_channels + c) * self.out_channels;
        &self.weights[start..start + self.out_channels]
    }

    /// Writes the convolution of `x` (len x in) into `out` (len x out) at the
    /// positions where `mask` is set. Other rows of `out` are left untouched.
    pub fn forward_masked(&self, x: &[f64], len: usize, mask: Option<&[bool]>, out: &mut [f64]) {
        let (cin, cout) = (self.in_channels, self.out_channels);
        debug_assert_eq!(x.len(), len * cin);
        debug_assert_eq!(out.len(), len * cout);
        for s in 0..len {
            if mask.is_some_and(|m| !m[s]) {
                continue;
            }
            let row = &mut out[s * cout..(s + 1) * cout];
            row.copy_from_slice(&self.bias);
            for tap in 0..self.kernel {
                let Some(t) = s.checked_sub(tap * self.dilation) else {
                    break;
                };
                let xin = &x[t * cin..(t + 1) * cin];
                for (c, &xv) in xin.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    for (o, &w) in row.iter_mut().zip(self.tap_row(tap, c)) {
                        *o += xv * w;
                    }
                }
            }
        }
    }

    /// Accumulates parameter gradients into `grad` and, when `dx` is given,
    /// input gradients into `dx`. Only masked rows of `dout` are read.
    pub fn backward_masked(
        &self,
        x: &[f64],
        len: usize,
        mask: Option<&[bool]>,
        dout: &[f64],
        grad: &mut ConvLayer,
        mut dx: Option<&mut [f64]>,
    ) {
        let (cin, cout) = (self.in_channels, self.out_channels);
        for s in 0..len {
            if mask.is_some_and(|m| !m[s]) {
                continue;
            }
            let g = &dout[s * cout..(s + 1) * cout];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (b, &gv) in grad.bias.iter_mut().zip(g) {
                *b += gv;
            }
            for tap in 0..self.kernel {
                let Some(t) = s.checked_sub(tap * self.dilation) else {
                    break;
                };
                for c in 0..cin {
                    let xv = x[t * cin + c];
                    let start = (tap * cin + c) * cout;
                    if xv != 0.0 {
                        for (gw, &gv) in grad.weights[start..start + cout].iter_mut().zip(g) {
                            *gw += xv * gv;
                        }
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        let w = &self.weights[start..start + cout];
                        let dot: f64 = w.iter().zip(g).map(|(a, b)| a * b).sum();
                        dx[t * cin + c] += dot;
                    }
                }
            }
        }
    }
}

/// Full-length dilated causal convolution of `x` (len x in_channels).
pub fn dilated_causal_conv(x: &[f64], len: usize, layer: &ConvLayer) -> Vec<f64> {
    let mut out = vec![0.0; len * layer.out_channels];
    layer.forward_masked(x, len, None, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(taps: &[f64], dilation: usize) -> ConvLayer {
        ConvLayer {
            kernel: taps.len(),
            in_channels: 1,
            out_channels: 1,
            dilation,
            weights: taps.to_vec(),
            bias: vec![0.0],
        }
    }

    #[test]
    fn identity_kernel() {
        let x = [0.5, -1.0, 2.0, 3.5, 7.0];
        for d in 1..4 {
            assert_eq!(
                dilated_causal_conv(&x, 5, &single(&[1.0, 0.0, 0.0], d)),
                x.to_vec()
            );
        }
    }

    #[test]
    fn dilated_sum() {
        let out = dilated_causal_conv(&[1.0, 2.0, 3.0, 4.0, 5.0], 5, &single(&[1.0, 1.0, 1.0], 2));
        assert_eq!(out[4], 9.0);
        // left padding: out[1] = x[1], out[3] = x[3] + x[1]
        assert_eq!(out, vec![1.0, 2.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn zero_input_zero_output() {
        let layer = ConvLayer {
            weights: vec![0.3; 3 * 2 * 4],
            ..ConvLayer::zeros(3, 2, 4, 2)
        };
        assert!(dilated_causal_conv(&[0.0; 16], 8, &layer)
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn bias_is_added() {
        let mut layer = single(&[2.0], 1);
        layer.bias[0] = 0.5;
        assert_eq!(dilated_causal_conv(&[1.0, 2.0], 2, &layer), vec![2.5, 4.5]);
    }
}
