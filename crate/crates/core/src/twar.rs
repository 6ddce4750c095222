//! Three-way autoregressive (TWAR) predictor.
//!
//! Every value is predicted from exactly three causal values:
//!
//! - R from its upper-left, up and left R neighbours;
//! - G from the G value to its left, the R value to its left and the R value
//!   at the same position;
//! - B likewise from G.
//!
//! A prediction is the affine combination `w0*c0 + w1*c1 + w2*c2 + b`,
//! evaluated in f32 strictly in that order, rounded half away from zero and
//! reduced mod 256. The image is padded with one virtual zero row above and
//! one virtual zero column on the left. The coded residual is
//! `(x - prediction + 128) mod 256`.
//!
//! Because R depends only on up/left neighbours, each anti-diagonal of R can
//! be reconstructed at once; G and B depend only on their own row, so a whole
//! column of G (then B) can be reconstructed at once.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::image::{Channel, RgbImage};
use crate::linalg;
use crate::{Error, Result};

/// Default ridge strength for [`fit_params`].
pub const DEFAULT_RIDGE: f64 = 1e-3;

/// Padding rule id for the virtual zero row/column.
pub const PADDING_ZERO: u8 = 0;

/// Per-channel weight triples and biases; 12 values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwarParams {
    pub weights: [[f32; 3]; 3],
    pub bias: [f32; 3],
}

impl Default for TwarParams {
    fn default() -> Self {
        Self::gradient()
    }
}

impl TwarParams {
    /// Serialized size: 12 little-endian f32.
    pub const BYTES: usize = 48;

    /// Parameter-free gradient predictor: `up + left - upper_left` for R,
    /// `left + same_prev - left_prev` for G and B. Exact on planar ramps.
    pub fn gradient() -> Self {
        Self {
            weights: [[-1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [1.0, -1.0, 1.0]],
            bias: [0.0; 3],
        }
    }

    pub fn new(weights: [[f32; 3]; 3], bias: [f32; 3]) -> Result<Self> {
        let params = Self { weights, bias };
        if !params.is_finite() {
            return Err(Error::InvalidParameter(
                "TWAR parameters must be finite".into(),
            ));
        }
        Ok(params)
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .flatten()
            .chain(&self.bias)
            .all(|v| v.is_finite())
    }

    /// `W_r, b_r, W_g, b_g, W_b, b_b`, each value little-endian f32.
    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let mut out = [0u8; Self::BYTES];
        let values = self.flat();
        for (chunk, v) in out.chunks_exact_mut(4).zip(values) {
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::BYTES {
            return Err(Error::Malformed(format!(
                "TWAR parameters need 48 bytes, got {}",
                bytes.len()
            )));
        }
        let mut values = [0f32; 12];
        for (v, chunk) in values.iter_mut().zip(bytes.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        let mut weights = [[0f32; 3]; 3];
        let mut bias = [0f32; 3];
        for c in 0..3 {
            weights[c].copy_from_slice(&values[c * 4..c * 4 + 3]);
            bias[c] = values[c * 4 + 3];
        }
        Self::new(weights, bias)
    }

    fn flat(&self) -> [f32; 12] {
        let mut out = [0f32; 12];
        for c in 0..3 {
            out[c * 4..c * 4 + 3].copy_from_slice(&self.weights[c]);
            out[c * 4 + 3] = self.bias[c];
        }
        out
    }
}

/// Rounds half away from zero and wraps into `0..=255`.
#[inline]
fn round_wrap(v: f32) -> u8 {
    (libm::roundf(v) as i64).rem_euclid(256) as u8
}

#[inline]
fn affine(w: &[f32; 3], b: f32, c: [u8; 3]) -> u8 {
    round_wrap(w[0] * f32::from(c[0]) + w[1] * f32::from(c[1]) + w[2] * f32::from(c[2]) + b)
}

/// Prediction for one value.
///
/// `context` is `(upper_left, up, left)` for R, `(g_left, r_left, r_same)` for
/// G and `(b_left, g_left, g_same)` for B.
pub fn predict_pixel(channel: Channel, context: [u8; 3], params: &TwarParams) -> u8 {
    let c = channel.index();
    affine(&params.weights[c], params.bias[c], context)
}

/// Per-value residual `(x - prediction + 128) mod 256`, same layout as the image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShiftedResidual {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ShiftedResidual {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        // Reuse the image shape checks.
        let image = RgbImage::new(width, height, data)?;
        Ok(Self {
            width,
            height,
            data: image.into_data(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    fn plane(&self, c: Channel) -> Vec<u8> {
        self.data
            .iter()
            .skip(c.index())
            .step_by(3)
            .copied()
            .collect()
    }
}

#[inline]
fn shift(x: u8, prediction: u8) -> u8 {
    x.wrapping_sub(prediction).wrapping_add(128)
}

#[inline]
fn unshift(residual: u8, prediction: u8) -> u8 {
    residual.wrapping_add(prediction).wrapping_sub(128)
}

#[inline]
fn at(plane: &[u8], width: usize, u: usize, v: usize) -> u8 {
    plane[u * width + v]
}

/// R context with zero padding above and to the left.
#[inline]
fn r_context(r: &[u8], width: usize, u: usize, v: usize) -> [u8; 3] {
    let ul = if u > 0 && v > 0 {
        at(r, width, u - 1, v - 1)
    } else {
        0
    };
    let up = if u > 0 { at(r, width, u - 1, v) } else { 0 };
    let left = if v > 0 { at(r, width, u, v - 1) } else { 0 };
    [ul, up, left]
}

/// G (or B) context: own left, previous channel left, previous channel same.
#[inline]
fn chained_context(own: &[u8], prev: &[u8], width: usize, u: usize, v: usize) -> [u8; 3] {
    let (own_left, prev_left) = if v > 0 {
        (at(own, width, u, v - 1), at(prev, width, u, v - 1))
    } else {
        (0, 0)
    };
    [own_left, prev_left, at(prev, width, u, v)]
}

pub fn forward_residual(image: &RgbImage, params: &TwarParams) -> ShiftedResidual {
    let (w, h) = (image.width(), image.height());
    let [r, g, b] = image.to_planes();
    let mut data = Vec::with_capacity(image.dims());
    for u in 0..h {
        for v in 0..w {
            let i = u * w + v;
            let pr = affine(&params.weights[0], params.bias[0], r_context(&r, w, u, v));
            let pg = affine(
                &params.weights[1],
                params.bias[1],
                chained_context(&g, &r, w, u, v),
            );
            let pb = affine(
                &params.weights[2],
                params.bias[2],
                chained_context(&b, &g, w, u, v),
            );
            data.extend_from_slice(&[shift(r[i], pr), shift(g[i], pg), shift(b[i], pb)]);
        }
    }
    ShiftedResidual {
        width: w,
        height: h,
        data,
    }
}

/// Inverse of [`forward_residual`], R in raster order, then G, then B.
pub fn decode_sequential(residual: &ShiftedResidual, params: &TwarParams) -> RgbImage {
    let (w, h) = (residual.width, residual.height);
    let res = [
        residual.plane(Channel::R),
        residual.plane(Channel::G),
        residual.plane(Channel::B),
    ];
    let mut r = vec![0u8; w * h];
    for u in 0..h {
        for v in 0..w {
            let p = affine(&params.weights[0], params.bias[0], r_context(&r, w, u, v));
            r[u * w + v] = unshift(res[0][u * w + v], p);
        }
    }
    let mut g = vec![0u8; w * h];
    for u in 0..h {
        for v in 0..w {
            let p = affine(
                &params.weights[1],
                params.bias[1],
                chained_context(&g, &r, w, u, v),
            );
            g[u * w + v] = unshift(res[1][u * w + v], p);
        }
    }
    let mut b = vec![0u8; w * h];
    for u in 0..h {
        for v in 0..w {
            let p = affine(
                &params.weights[2],
                params.bias[2],
                chained_context(&b, &g, w, u, v),
            );
            b[u * w + v] = unshift(res[2][u * w + v], p);
        }
    }
    RgbImage::from_planes(w, h, &[r, g, b]).expect("plane sizes match")
}

#[cfg(feature = "parallel")]
const PARALLEL_MIN_CELLS: usize = 512;

/// Wavefront decode: R over anti-diagonals, then G and B one column at a
/// time. Bit-identical to [`decode_sequential`].
pub fn decode_parallel(residual: &ShiftedResidual, params: &TwarParams) -> RgbImage {
    let (w, h) = (residual.width, residual.height);
    let res = [
        residual.plane(Channel::R),
        residual.plane(Channel::G),
        residual.plane(Channel::B),
    ];

    let mut r = vec![0u8; w * h];
    for t in 0..h + w - 1 {
        let first = t.saturating_sub(w - 1);
        let last = t.min(h - 1);
        let cell = |r: &[u8], u: usize| {
            let v = t - u;
            let p = affine(&params.weights[0], params.bias[0], r_context(r, w, u, v));
            unshift(res[0][u * w + v], p)
        };
        #[cfg(feature = "parallel")]
        if last + 1 - first >= PARALLEL_MIN_CELLS {
            use rayon::prelude::*;
            let values: Vec<u8> = (first..=last)
                .into_par_iter()
                .map(|u| cell(&r, u))
                .collect();
            for (u, x) in (first..=last).zip(values) {
                r[u * w + t - u] = x;
            }
            continue;
        }
        for u in first..=last {
            let x = cell(&r, u);
            r[u * w + t - u] = x;
        }
    }

    // G then B: cells of one column depend only on the previous column and
    // on the already complete previous channel.
    let mut g = vec![0u8; w * h];
    let mut b = vec![0u8; w * h];
    let wg = &params.weights[1];
    let wb = &params.weights[2];
    let (bg, bb) = (params.bias[1], params.bias[2]);
    for v in 0..w {
        let column = |u: usize, g: &[u8]| {
            let gl = if v > 0 { g[u * w + v - 1] } else { 0 };
            let rl = if v > 0 { r[u * w + v - 1] } else { 0 };
            unshift(res[1][u * w + v], affine(wg, bg, [gl, rl, r[u * w + v]]))
        };
        fill_column(&mut g, w, h, v, column);
    }
    for v in 0..w {
        let column = |u: usize, b: &[u8]| {
            let bl = if v > 0 { b[u * w + v - 1] } else { 0 };
            let gl = if v > 0 { g[u * w + v - 1] } else { 0 };
            unshift(res[2][u * w + v], affine(wb, bb, [bl, gl, g[u * w + v]]))
        };
        fill_column(&mut b, w, h, v, column);
    }
    RgbImage::from_planes(w, h, &[r, g, b]).expect("plane sizes match")
}

fn fill_column(
    plane: &mut [u8],
    w: usize,
    h: usize,
    v: usize,
    cell: impl Fn(usize, &[u8]) -> u8 + Sync,
) {
    #[cfg(feature = "parallel")]
    if h >= PARALLEL_MIN_CELLS {
        use rayon::prelude::*;
        let values: Vec<u8> = (0..h).into_par_iter().map(|u| cell(u, plane)).collect();
        for (u, x) in values.into_iter().enumerate() {
            plane[u * w + v] = x;
        }
        return;
    }
    for u in 0..h {
        let x = cell(u, plane);
        plane[u * w + v] = x;
    }
}

/// Where a context value comes from, relative to the predicted value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Tap {
    dy: isize,
    dx: isize,
    /// Read the previous channel instead of the predicted one.
    prev: bool,
}

const fn tap(dy: isize, dx: isize, prev: bool) -> Tap {
    Tap { dy, dx, prev }
}

/// R taps in order of inclusion as the receptive field grows from 3 to 7.
const R_TAPS: [Tap; 7] = [
    tap(-1, -1, false),
    tap(-1, 0, false),
    tap(0, -1, false),
    tap(-1, 1, false),
    tap(0, -2, false),
    tap(-2, 0, false),
    tap(-1, -2, false),
];

/// G and B taps in order of inclusion.
const CHAINED_TAPS: [Tap; 7] = [
    tap(0, -1, false),
    tap(0, -1, true),
    tap(0, 0, true),
    tap(-1, 0, false),
    tap(-1, 0, true),
    tap(-1, -1, false),
    tap(-1, 1, false),
];

fn taps(channel: usize, field: usize) -> &'static [Tap] {
    if channel == 0 {
        &R_TAPS[..field]
    } else {
        &CHAINED_TAPS[..field]
    }
}

/// Autoregressive predictor with a receptive field of 3 to 7 values per
/// channel. With 3 it is exactly [`TwarParams`]; larger fields add
/// neighbours from the row above and can only be decoded sequentially.
#[derive(Debug, Clone, PartialEq)]
pub struct ArPredictor {
    field: usize,
    weights: [Vec<f32>; 3],
    bias: [f32; 3],
}

/// Predictor with `k` taps per channel: the gradient weights on the first
/// three taps, zero on the rest.
pub fn receptive_field_variant(k: usize) -> Result<ArPredictor> {
    ArPredictor::from_twar(&TwarParams::gradient()).with_field(k)
}

impl ArPredictor {
    pub const MIN_FIELD: usize = 3;
    pub const MAX_FIELD: usize = 7;

    pub fn from_twar(params: &TwarParams) -> Self {
        Self {
            field: 3,
            weights: [
                params.weights[0].to_vec(),
                params.weights[1].to_vec(),
                params.weights[2].to_vec(),
            ],
            bias: params.bias,
        }
    }

    pub fn new(weights: [Vec<f32>; 3], bias: [f32; 3]) -> Result<Self> {
        let field = weights[0].len();
        check_field(field)?;
        if weights.iter().any(|w| w.len() != field) {
            return Err(Error::Shape(
                "every channel needs the same number of weights".into(),
            ));
        }
        if weights
            .iter()
            .flatten()
            .chain(&bias)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(
                "predictor weights must be finite".into(),
            ));
        }
        Ok(Self {
            field,
            weights,
            bias,
        })
    }

    /// Resizes the receptive field, zero-filling new weights.
    pub fn with_field(mut self, k: usize) -> Result<Self> {
        check_field(k)?;
        for w in &mut self.weights {
            w.resize(k, 0.0);
        }
        self.field = k;
        Ok(self)
    }

    pub fn field(&self) -> usize {
        self.field
    }

    pub fn weights(&self, channel: Channel) -> &[f32] {
        &self.weights[channel.index()]
    }

    pub fn bias(&self, channel: Channel) -> f32 {
        self.bias[channel.index()]
    }

    /// The 12-parameter form, available only for a field of 3.
    pub fn as_twar(&self) -> Result<TwarParams> {
        if self.field != 3 {
            return Err(Error::Unsupported(format!(
                "a receptive field of {} has no three-way form",
                self.field
            )));
        }
        let mut weights = [[0f32; 3]; 3];
        for (dst, src) in weights.iter_mut().zip(&self.weights) {
            dst.copy_from_slice(src);
        }
        TwarParams::new(weights, self.bias)
    }

    #[inline]
    fn predict(
        &self,
        planes: &[Vec<u8>; 3],
        w: usize,
        h: usize,
        c: usize,
        u: usize,
        v: usize,
    ) -> u8 {
        let mut acc = 0f32;
        for (weight, t) in self.weights[c].iter().zip(taps(c, self.field)) {
            let value = context_value(planes, w, h, c, *t, u, v);
            acc += weight * f32::from(value);
        }
        round_wrap(acc + self.bias[c])
    }

    pub fn forward_residual(&self, image: &RgbImage) -> ShiftedResidual {
        let (w, h) = (image.width(), image.height());
        let planes = image.to_planes();
        let mut data = Vec::with_capacity(image.dims());
        for u in 0..h {
            for v in 0..w {
                for c in 0..3 {
                    let p = self.predict(&planes, w, h, c, u, v);
                    data.push(shift(planes[c][u * w + v], p));
                }
            }
        }
        ShiftedResidual {
            width: w,
            height: h,
            data,
        }
    }

    pub fn decode_sequential(&self, residual: &ShiftedResidual) -> RgbImage {
        let (w, h) = (residual.width, residual.height);
        let mut planes = [vec![0u8; w * h], vec![0u8; w * h], vec![0u8; w * h]];
        for c in 0..3 {
            for u in 0..h {
                for v in 0..w {
                    let p = self.predict(&planes, w, h, c, u, v);
                    planes[c][u * w + v] = unshift(residual.data[(u * w + v) * 3 + c], p);
                }
            }
        }
        RgbImage::from_planes(w, h, &planes).expect("plane sizes match")
    }

    /// Wavefront decode; only the three-tap field is parallel-decodable.
    pub fn decode_parallel(&self, residual: &ShiftedResidual) -> Result<RgbImage> {
        if self.field != 3 {
            return Err(Error::Unsupported(format!(
                "receptive field {} cannot be decoded in wavefronts",
                self.field
            )));
        }
        Ok(decode_parallel(residual, &self.as_twar()?))
    }
}

fn check_field(k: usize) -> Result<()> {
    if !(ArPredictor::MIN_FIELD..=ArPredictor::MAX_FIELD).contains(&k) {
        return Err(Error::Configuration(format!(
            "receptive field {k} outside [3, 7]"
        )));
    }
    Ok(())
}

/// Value at a tap, zero outside the image.
#[inline]
fn context_value(
    planes: &[Vec<u8>; 3],
    w: usize,
    h: usize,
    c: usize,
    t: Tap,
    u: usize,
    v: usize,
) -> u8 {
    let (y, x) = (u as isize + t.dy, v as isize + t.dx);
    if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
        return 0;
    }
    let src = if t.prev { c - 1 } else { c };
    planes[src][y as usize * w + x as usize]
}

fn tap_in_bounds(t: Tap, w: usize, h: usize, u: usize, v: usize) -> bool {
    let (y, x) = (u as isize + t.dy, v as isize + t.dx);
    y >= 0 && x >= 0 && y < h as isize && x < w as isize
}

/// Integer sufficient statistics of one channel's least-squares problem.
struct NormalEquations {
    n: usize,
    /// `sum f f^T` over features with a trailing constant 1.
    gram: Vec<u64>,
    rhs: Vec<u64>,
}

impl NormalEquations {
    fn new(field: usize) -> Self {
        let n = field + 1;
        Self {
            n,
            gram: vec![0; n * n],
            rhs: vec![0; n],
        }
    }

    fn add(&mut self, features: &[u64], target: u64) {
        let n = self.n;
        for i in 0..n {
            let fi = if i + 1 == n { 1 } else { features[i] };
            self.rhs[i] += fi * target;
            for j in 0..n {
                let fj = if j + 1 == n { 1 } else { features[j] };
                self.gram[i * n + j] += fi * fj;
            }
        }
    }

    fn solve(&self, ridge: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let mut a: Vec<f64> = self.gram.iter().map(|&v| v as f64).collect();
        // The bias is not penalized.
        for i in 0..n - 1 {
            a[i * n + i] += ridge;
        }
        linalg::solve(a, self.rhs.iter().map(|&v| v as f64).collect())
    }
}

/// Least-squares fit of a predictor with `field` taps over every value whose
/// taps all fall inside the image, with a ridge penalty on the weights.
pub fn fit_predictor<'a>(
    images: impl IntoIterator<Item = &'a RgbImage>,
    field: usize,
    ridge: f64,
) -> Result<ArPredictor> {
    check_field(field)?;
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ridge {ridge} must be finite and nonnegative"
        )));
    }
    let mut systems = [
        NormalEquations::new(field),
        NormalEquations::new(field),
        NormalEquations::new(field),
    ];
    let mut seen = 0usize;
    let mut features = vec![0u64; field];
    for image in images {
        seen += 1;
        let (w, h) = (image.width(), image.height());
        let planes = image.to_planes();
        for (c, system) in systems.iter_mut().enumerate() {
            let taps = taps(c, field);
            for u in 0..h {
                for v in 0..w {
                    if !taps.iter().all(|&t| tap_in_bounds(t, w, h, u, v)) {
                        continue;
                    }
                    for (f, &t) in features.iter_mut().zip(taps) {
                        *f = context_value(&planes, w, h, c, t, u, v).into();
                    }
                    system.add(&features, planes[c][u * w + v].into());
                }
            }
        }
    }
    if seen == 0 {
        return Err(Error::InvalidParameter("no images to fit".into()));
    }
    let mut weights: [Vec<f32>; 3] = Default::default();
    let mut bias = [0f32; 3];
    for (c, system) in systems.iter().enumerate() {
        let solution = system.solve(ridge)?;
        weights[c] = solution[..field].iter().map(|&v| v as f32).collect();
        bias[c] = solution[field] as f32;
    }
    ArPredictor::new(weights, bias)
}

/// Per-channel ridge least-squares fit of the 12 TWAR parameters.
pub fn fit_params<'a>(
    images: impl IntoIterator<Item = &'a RgbImage>,
    ridge: f64,
) -> Result<TwarParams> {
    fit_predictor(images, 3, ridge)?.as_twar()
}

/// Histogram of one channel of a residual.
pub fn residual_histogram(residual: &ShiftedResidual, channel: Channel) -> [u64; 256] {
    let mut counts = [0u64; 256];
    for &x in residual.data.iter().skip(channel.index()).step_by(3) {
        counts[usize::from(x)] += 1;
    }
    counts
}
