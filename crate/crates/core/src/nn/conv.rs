use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Causal dilated 1-D convolution. Feature maps are channel-major
/// `[channels × T]` buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub dilation: usize,
    /// `[out × in × width]`; tap `width − 1` multiplies the current sample.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(in_channels: usize, out_channels: usize, width: usize, dilation: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            width,
            dilation,
            weight: vec![0.0; out_channels * in_channels * width],
            bias: vec![0.0; out_channels],
        }
    }

    /// Uniform in `±√(1/fan_in)`.
    pub fn init<R: Rng>(in_channels: usize, out_channels: usize, width: usize, dilation: usize, rng: &mut R) -> Self {
        let mut l = Self::zeros(in_channels, out_channels, width, dilation);
        let bound = (1.0 / (in_channels * width) as f64).sqrt();
        for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        l
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.dilation == 0 {
            return Err(Error::param("convolution width and dilation must be at least 1"));
        }
        if self.weight.len() != self.out_channels * self.in_channels * self.width
            || self.bias.len() != self.out_channels
        {
            return Err(Error::param("convolution weights do not match the declared shape"));
        }
        if self.weight.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::param("convolution weights must be finite"));
        }
        Ok(())
    }

    fn tap(&self, o: usize, i: usize, j: usize) -> usize {
        (o * self.in_channels + i) * self.width + j
    }

    /// Delay of tap `j` in samples.
    fn shift(&self, j: usize) -> usize {
        (self.width - 1 - j) * self.dilation
    }

    pub fn forward(&self, x: &[f64], t: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_channels * t);
        let mut y = vec![0.0; self.out_channels * t];
        for o in 0..self.out_channels {
            let yo = &mut y[o * t..(o + 1) * t];
            yo.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let xi = &x[i * t..(i + 1) * t];
                for j in 0..self.width {
                    let g = self.weight[self.tap(o, i, j)];
                    let s = self.shift(j);
                    if s >= t || g == 0.0 {
                        continue;
                    }
                    for (yv, xv) in yo[s..].iter_mut().zip(&xi[..t - s]) {
                        *yv += g * xv;
                    }
                }
            }
        }
        y
    }

    /// Accumulates weight and bias gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], t: usize, dy: &[f64], grad: &mut ConvLayer) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_channels * t];
        for o in 0..self.out_channels {
            let dyo = &dy[o * t..(o + 1) * t];
            grad.bias[o] += dyo.iter().sum::<f64>();
            for i in 0..self.in_channels {
                let xi = &x[i * t..(i + 1) * t];
                for j in 0..self.width {
                    let s = self.shift(j);
                    if s >= t {
                        continue;
                    }
                    let k = self.tap(o, i, j);
                    let g = self.weight[k];
                    grad.weight[k] += dyo[s..].iter().zip(&xi[..t - s]).map(|(a, b)| a * b).sum::<f64>();
                    let dxi = &mut dx[i * t..(i + 1) * t];
                    for (d, v) in dxi[..t - s].iter_mut().zip(&dyo[s..]) {
                        *d += g * v;
                    }
                }
            }
        }
        dx
    }
}

/// Applies `layer` to a `[in_channels × T]` map.
pub fn causal_dilated_conv(x: &[f64], t: usize, layer: &ConvLayer) -> Result<Vec<f64>> {
    layer.validate()?;
    if x.len() != layer.in_channels * t {
        return Err(Error::param(format!(
            "input holds {} values, expected {} channels × {t}",
            x.len(),
            layer.in_channels
        )));
    }
    Ok(layer.forward(x, t))
}

/// `1 + (l − 1)·Σ d_i` for a plain stack of width-`l` causal convolutions.
pub fn receptive_field(width: usize, dilations: &[usize]) -> usize {
    1 + (width - 1) * dilations.iter().sum::<usize>()
}

/// Output positions of a single-channel stack that an impulse at `p`
/// reaches, as `(first, last)`. All-ones taps so nothing cancels.
pub fn impulse_support(width: usize, dilations: &[usize], t: usize, p: usize) -> Option<(usize, usize)> {
    let mut x = vec![0.0; t];
    x[p] = 1.0;
    for &d in dilations {
        let mut layer = ConvLayer::zeros(1, 1, width, d);
        layer.weight.fill(1.0);
        x = layer.forward(&x, t);
    }
    let first = x.iter().position(|v| *v != 0.0)?;
    let last = x.iter().rposition(|v| *v != 0.0)?;
    Some((first, last))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tap(g: [f64; 2], d: usize) -> ConvLayer {
        let mut l = ConvLayer::zeros(1, 1, 2, d);
        l.weight.copy_from_slice(&g);
        l
    }

    #[test]
    fn identity_tap() {
        let x = [0.3, -1.0, 2.0, 5.0];
        assert_eq!(causal_dilated_conv(&x, 4, &two_tap([0.0, 1.0], 1)).unwrap(), x);
    }

    #[test]
    fn hand_convolutions() {
        assert_eq!(
            causal_dilated_conv(&[1.0, 0.0, 0.0, 1.0], 4, &two_tap([1.0, 1.0], 1)).unwrap(),
            [1.0, 1.0, 0.0, 1.0]
        );
        assert_eq!(
            causal_dilated_conv(&[1.0, 2.0, 3.0, 4.0], 4, &two_tap([1.0, 1.0], 2)).unwrap(),
            [1.0, 2.0, 4.0, 6.0]
        );
    }

    #[test]
    fn channel_mismatch() {
        let l = ConvLayer::zeros(2, 1, 2, 1);
        assert!(causal_dilated_conv(&[1.0; 3], 3, &l).is_err());
    }

    #[test]
    fn receptive_fields() {
        assert_eq!(receptive_field(2, &[1, 2, 4, 8]), 16);
        assert_eq!(receptive_field(3, &[1]), 3);
        assert_eq!(receptive_field(2, &[1, 2, 4]), 8);
        assert_eq!(impulse_support(2, &[1, 2, 4, 8], 64, 10), Some((10, 25)));
    }
}
