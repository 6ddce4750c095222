//! Small f32 inference primitives over channel-major feature maps.
//!
//! Every output element is accumulated as `bias + sum(w * x)` with the sum
//! running over input channel, then kernel row, then kernel column. The loops
//! are arranged to vectorize across output positions without changing that
//! per-element order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A `channels x height x width` feature map, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {channels}x{height}x{width} map",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Top-left `height x width` window.
    pub fn crop(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height || width > self.width {
            return Err(Error::Shape(format!(
                "cannot crop {}x{} to {height}x{width}",
                self.height, self.width
            )));
        }
        let mut out = Self::zeros(self.channels, height, width);
        for c in 0..self.channels {
            for y in 0..height {
                let src = (c * self.height + y) * self.width;
                let dst = (c * height + y) * width;
                out.data[dst..dst + width].copy_from_slice(&self.data[src..src + width]);
            }
        }
        Ok(out)
    }

    /// Grows to `height x width` by repeating the last row and column.
    pub fn replicate_to(&self, height: usize, width: usize) -> Self {
        let mut out = Self::zeros(self.channels, height, width);
        for c in 0..self.channels {
            for y in 0..height {
                let sy = y.min(self.height - 1);
                for x in 0..width {
                    out.data[(c * height + y) * width + x] = self.at(c, sy, x.min(self.width - 1));
                }
            }
        }
        out
    }
}

/// Convolution weights `[out, in, k, k]` with a bias per output channel.
#[derive(Debug, Clone, Copy)]
pub struct ConvWeights<'a> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub weight: &'a [f32],
    pub bias: &'a [f32],
}

impl ConvWeights<'_> {
    fn check(&self, input: &FeatureMap) -> Result<()> {
        let k = self.kernel;
        if k != 1 && k != 3 {
            return Err(Error::Shape(format!("unsupported kernel size {k}")));
        }
        if self.weight.len() != self.out_channels * self.in_channels * k * k
            || self.bias.len() != self.out_channels
        {
            return Err(Error::Shape(
                "convolution weights do not match their declared shape".into(),
            ));
        }
        if input.channels != self.in_channels {
            return Err(Error::Shape(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels, input.channels
            )));
        }
        if input.height == 0 || input.width == 0 {
            return Err(Error::Shape("empty feature map".into()));
        }
        Ok(())
    }
}

/// Edge-replicated copy with a one-value border.
fn pad_replicate(input: &FeatureMap) -> FeatureMap {
    let (h, w) = (input.height, input.width);
    let (ph, pw) = (h + 2, w + 2);
    let mut out = FeatureMap::zeros(input.channels, ph, pw);
    for c in 0..input.channels {
        for y in 0..ph {
            let sy = y.saturating_sub(1).min(h - 1);
            let src = input.plane(c);
            let row = &mut out.data[(c * ph + y) * pw..(c * ph + y + 1) * pw];
            row[1..=w].copy_from_slice(&src[sy * w..(sy + 1) * w]);
            row[0] = src[sy * w];
            row[w + 1] = src[sy * w + w - 1];
        }
    }
    out
}

/// 1x1 or 3x3 convolution; 3x3 kernels see an edge-replicated border.
/// Stride 2 yields `ceil(h / 2) x ceil(w / 2)` outputs.
pub fn conv2d(input: &FeatureMap, conv: &ConvWeights<'_>, stride: usize) -> Result<FeatureMap> {
    conv.check(input)?;
    if stride != 1 && stride != 2 {
        return Err(Error::Shape(format!("unsupported stride {stride}")));
    }
    let k = conv.kernel;
    let padded;
    let src = if k == 3 {
        padded = pad_replicate(input);
        &padded
    } else {
        input
    };
    let oh = input.height.div_ceil(stride);
    let ow = input.width.div_ceil(stride);
    let mut out = FeatureMap::zeros(conv.out_channels, oh, ow);
    for oc in 0..conv.out_channels {
        let plane = out.plane_mut(oc);
        plane.fill(conv.bias[oc]);
        for ic in 0..conv.in_channels {
            let sp = src.plane(ic);
            for ky in 0..k {
                for kx in 0..k {
                    let wv = conv.weight[((oc * conv.in_channels + ic) * k + ky) * k + kx];
                    for oy in 0..oh {
                        let row = (oy * stride + ky) * src.width + kx;
                        let dst = &mut plane[oy * ow..(oy + 1) * ow];
                        if stride == 1 {
                            for (o, &x) in dst.iter_mut().zip(&sp[row..row + ow]) {
                                *o += wv * x;
                            }
                        } else {
                            for (ox, o) in dst.iter_mut().enumerate() {
                                *o += wv * sp[row + 2 * ox];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn relu(map: &mut FeatureMap) {
    for v in &mut map.data {
        *v = v.max(0.0);
    }
}

/// Logistic sigmoid in f64, stable for either sign.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + libm::exp(-a))
    } else {
        let e = libm::exp(a);
        e / (1.0 + e)
    }
}

/// `relu(x + conv_b(relu(conv_a(x))))`.
pub fn residual_block(
    x: &FeatureMap,
    a: &ConvWeights<'_>,
    b: &ConvWeights<'_>,
) -> Result<FeatureMap> {
    let mut t = conv2d(x, a, 1)?;
    relu(&mut t);
    let mut t = conv2d(&t, b, 1)?;
    if t.channels != x.channels {
        return Err(Error::Shape(
            "residual block must preserve the channel count".into(),
        ));
    }
    for (o, &i) in t.data.iter_mut().zip(&x.data) {
        *o = (i + *o).max(0.0);
    }
    Ok(t)
}

/// Moves `4C` channels to a `2x2` spatial block: input channel
/// `c * 4 + dy * 2 + dx` lands at offset `(dy, dx)` of output channel `c`.
pub fn pixel_shuffle(input: &FeatureMap) -> Result<FeatureMap> {
    if input.channels % 4 != 0 {
        return Err(Error::Shape(format!(
            "pixel shuffle needs a multiple of 4 channels, got {}",
            input.channels
        )));
    }
    let (h, w) = (input.height, input.width);
    let mut out = FeatureMap::zeros(input.channels / 4, 2 * h, 2 * w);
    for c in 0..out.channels {
        for dy in 0..2 {
            for dx in 0..2 {
                let src = input.plane(c * 4 + dy * 2 + dx);
                for y in 0..h {
                    for x in 0..w {
                        out.data[(c * 2 * h + 2 * y + dy) * 2 * w + 2 * x + dx] = src[y * w + x];
                    }
                }
            }
        }
    }
    Ok(out)
}
