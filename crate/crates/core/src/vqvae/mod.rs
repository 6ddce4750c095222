//! Inference-only VQ-VAE producing a per-pixel logistic `(mu, s)` plane.
//!
//! Encoder: `x / 127.5 - 1`, edge-replicated to even size, then
//! `enc.stem` (3x3, 3 -> C, ReLU), `enc.down` (3x3 stride 2, C -> C, ReLU),
//! `blocks` residual blocks `enc.res{i}`, and `enc.proj` (1x1, C -> Dc). Each
//! latent vector is replaced by the index of its nearest codebook row.
//!
//! Decoder: codebook lookup, `dec.stem` (3x3, Dc -> C, ReLU), residual blocks
//! `dec.res{i}`, `dec.up` (3x3, C -> 4C), pixel shuffle and ReLU, then the
//! heads `dec.mu` and `dec.s` (3x3, C -> 3). Head outputs are cropped to
//! `H x W`; `mu = 255 * sigmoid(a)` and `s = exp(clamp(b, ln s_min, ln s_max))`.
//!
//! Every convolution tensor `name` is stored as `name.weight` with shape
//! `[out, in, k, k]` and `name.bias` with shape `[out]`.

pub mod nn;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::image::RgbImage;
use crate::logistic::{quantize_pmf, QuantizedPmf, ScaleGrid};
use crate::twar::TwarParams;
use crate::{Error, Result};
use nn::{conv2d, pixel_shuffle, relu, residual_block, sigmoid, ConvWeights, FeatureMap};

/// Network hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArchConfig {
    /// Codebook size K.
    pub codebook_size: u32,
    /// Codebook vector dimension Dc.
    pub codebook_dim: u32,
    /// Hidden channel count C.
    pub channels: u32,
    /// Residual blocks in each of the encoder and decoder.
    pub blocks: u32,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            codebook_size: 256,
            codebook_dim: 32,
            channels: 32,
            blocks: 4,
        }
    }
}

impl ArchConfig {
    pub const BYTES: usize = 16;

    pub fn validate(&self) -> Result<()> {
        let ok = (1..=256).contains(&self.codebook_size)
            && (1..=4096).contains(&self.codebook_dim)
            && (1..=4096).contains(&self.channels)
            && self.blocks <= 64;
        if !ok {
            return Err(Error::Model(format!("unsupported architecture {self:?}")));
        }
        Ok(())
    }

    /// `K, Dc, C, blocks` as little-endian u32.
    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let mut out = [0u8; Self::BYTES];
        for (chunk, v) in out.chunks_exact_mut(4).zip([
            self.codebook_size,
            self.codebook_dim,
            self.channels,
            self.blocks,
        ]) {
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::BYTES {
            return Err(Error::Malformed(
                "architecture block must be 16 bytes".into(),
            ));
        }
        let v: Vec<u32> = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let config = Self {
            codebook_size: v[0],
            codebook_dim: v[1],
            channels: v[2],
            blocks: v[3],
        };
        config.validate()?;
        Ok(config)
    }

    /// Every tensor the network needs, in canonical order, with its shape.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<u32>)> {
        let (k, dc, c) = (self.codebook_size, self.codebook_dim, self.channels);
        let mut out = Vec::new();
        let mut conv = |name: String, o: u32, i: u32, ks: u32| {
            out.push((format!("{name}.weight"), vec![o, i, ks, ks]));
            out.push((format!("{name}.bias"), vec![o]));
        };
        conv("enc.stem".into(), c, 3, 3);
        conv("enc.down".into(), c, c, 3);
        for i in 0..self.blocks {
            conv(format!("enc.res{i}.conv_a"), c, c, 3);
            conv(format!("enc.res{i}.conv_b"), c, c, 3);
        }
        conv("enc.proj".into(), dc, c, 1);
        conv("dec.stem".into(), c, dc, 3);
        for i in 0..self.blocks {
            conv(format!("dec.res{i}.conv_a"), c, c, 3);
            conv(format!("dec.res{i}.conv_b"), c, c, 3);
        }
        conv("dec.up".into(), 4 * c, c, 3);
        conv("dec.mu".into(), 3, c, 3);
        conv("dec.s".into(), 3, c, 3);
        out.push(("codebook".into(), vec![k, dc]));
        out
    }
}

/// A named f32 array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
        if n != Some(data.len()) {
            return Err(Error::Model(format!(
                "{} values for shape {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }
}

/// Everything the codec needs from a trained model: network tensors (may be
/// empty for a TWAR-only model), TWAR parameters and the codebook index
/// histogram (all zeros when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ArchConfig,
    pub tensors: BTreeMap<String, Tensor>,
    pub twar: TwarParams,
    pub histogram: Vec<u64>,
}

impl ModelWeights {
    /// Model with no network, only TWAR parameters.
    pub fn twar_only(config: ArchConfig, twar: TwarParams) -> Self {
        Self {
            config,
            tensors: BTreeMap::new(),
            twar,
            histogram: vec![0; config.codebook_size as usize],
        }
    }

    /// Fills every tensor from `init(name, dims, flat_index)`.
    pub fn with_initializer(
        config: ArchConfig,
        mut init: impl FnMut(&str, &[u32], usize) -> f32,
    ) -> Result<Self> {
        config.validate()?;
        let mut tensors = BTreeMap::new();
        for (name, dims) in config.tensor_shapes() {
            let n: usize = dims.iter().map(|&d| d as usize).product();
            let data = (0..n).map(|i| init(&name, &dims, i)).collect();
            tensors.insert(name, Tensor::new(dims, data)?);
        }
        let model = Self {
            tensors,
            ..Self::twar_only(config, TwarParams::gradient())
        };
        model.validate()?;
        Ok(model)
    }

    pub fn has_network(&self) -> bool {
        !self.tensors.is_empty()
    }

    /// Checks shapes against the config and that every value is finite.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if !self.twar.is_finite() {
            return Err(Error::Model("TWAR parameters are not finite".into()));
        }
        if self.histogram.len() != self.config.codebook_size as usize {
            return Err(Error::Model(format!(
                "histogram has {} counts for {} codebook entries",
                self.histogram.len(),
                self.config.codebook_size
            )));
        }
        if self.tensors.is_empty() {
            return Ok(());
        }
        let shapes = self.config.tensor_shapes();
        if shapes.len() != self.tensors.len() {
            return Err(Error::Model(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                self.tensors.len()
            )));
        }
        for (name, dims) in shapes {
            let t = self
                .tensors
                .get(&name)
                .ok_or_else(|| Error::Model(format!("missing tensor {name}")))?;
            if t.dims != dims {
                return Err(Error::Model(format!(
                    "tensor {name} has shape {:?}, expected {dims:?}",
                    t.dims
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Model(format!("tensor {name} has non-finite values")));
            }
        }
        Ok(())
    }

    fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Model(format!("missing tensor {name}")))
    }

    fn conv(&self, name: &str) -> Result<ConvWeights<'_>> {
        let w = self.tensor(&format!("{name}.weight"))?;
        let b = self.tensor(&format!("{name}.bias"))?;
        if w.dims.len() != 4 || w.dims[2] != w.dims[3] {
            return Err(Error::Model(format!(
                "{name}.weight is not a square kernel"
            )));
        }
        Ok(ConvWeights {
            out_channels: w.dims[0] as usize,
            in_channels: w.dims[1] as usize,
            kernel: w.dims[2] as usize,
            weight: &w.data,
            bias: &b.data,
        })
    }

    fn network(&self) -> Result<()> {
        if !self.has_network() {
            return Err(Error::Model("model has no network tensors".into()));
        }
        Ok(())
    }
}

/// Codebook indices on the `ceil(H/2) x ceil(W/2)` latent grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatentIndices {
    pub height: usize,
    pub width: usize,
    pub indices: Vec<u8>,
}

impl LatentIndices {
    pub fn new(height: usize, width: usize, indices: Vec<u8>) -> Result<Self> {
        if indices.len() != height * width {
            return Err(Error::Shape(format!(
                "{} indices for a {height}x{width} grid",
                indices.len()
            )));
        }
        Ok(Self {
            height,
            width,
            indices,
        })
    }

    /// Grid shape for an `height x width` image.
    pub fn grid_for(height: usize, width: usize) -> (usize, usize) {
        (height.div_ceil(2), width.div_ceil(2))
    }
}

/// Per-value logistic parameters, interleaved like [`RgbImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParamsPlane {
    pub height: usize,
    pub width: usize,
    pub mu: Vec<f64>,
    pub s: Vec<f64>,
}

/// Head logits beyond this saturate; keeps `mu` strictly inside `(0, 255)`.
const LOGIT_LIMIT: f64 = 30.0;

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::Shape("image must be at least 1x1".into()));
    }
    Ok(())
}

/// Network input: `x / 127.5 - 1`, grown to even size by edge replication.
fn normalized_input(image: &RgbImage) -> FeatureMap {
    let (h, w) = (image.height(), image.width());
    let mut map = FeatureMap::zeros(3, h, w);
    for (i, px) in image.data().chunks_exact(3).enumerate() {
        for c in 0..3 {
            map.data[c * h * w + i] = f32::from(px[c]) / 127.5 - 1.0;
        }
    }
    map.replicate_to(h + h % 2, w + w % 2)
}

/// Latent vectors before quantization, `Dc x ceil(H/2) x ceil(W/2)`.
pub fn encode_latents(image: &RgbImage, weights: &ModelWeights) -> Result<FeatureMap> {
    weights.network()?;
    check_dims(image.height(), image.width())?;
    let mut x = conv2d(&normalized_input(image), &weights.conv("enc.stem")?, 1)?;
    relu(&mut x);
    let mut x = conv2d(&x, &weights.conv("enc.down")?, 2)?;
    relu(&mut x);
    for i in 0..weights.config.blocks {
        x = residual_block(
            &x,
            &weights.conv(&format!("enc.res{i}.conv_a"))?,
            &weights.conv(&format!("enc.res{i}.conv_b"))?,
        )?;
    }
    conv2d(&x, &weights.conv("enc.proj")?, 1)
}

/// Index of the codebook row nearest to `z` in squared Euclidean distance,
/// smallest index on ties.
pub fn nearest_codebook_index(z: &[f32], codebook: &[f32], dim: usize) -> usize {
    let mut best = (f32::INFINITY, 0usize);
    for (k, row) in codebook.chunks_exact(dim).enumerate() {
        let mut dist = 0f32;
        for (a, b) in z.iter().zip(row) {
            let d = a - b;
            dist += d * d;
        }
        if dist < best.0 {
            best = (dist, k);
        }
    }
    best.1
}

pub fn quantize_latents(latents: &FeatureMap, weights: &ModelWeights) -> Result<LatentIndices> {
    let codebook = weights.tensor("codebook")?;
    let dim = weights.config.codebook_dim as usize;
    if latents.channels != dim {
        return Err(Error::Model(format!(
            "latent dimension {} != codebook dimension {dim}",
            latents.channels
        )));
    }
    let (h, w) = (latents.height, latents.width);
    let mut z = vec![0f32; dim];
    let mut indices = Vec::with_capacity(h * w);
    for p in 0..h * w {
        for (c, v) in z.iter_mut().enumerate() {
            *v = latents.data[c * h * w + p];
        }
        indices.push(nearest_codebook_index(&z, &codebook.data, dim) as u8);
    }
    LatentIndices::new(h, w, indices)
}

pub fn encode_to_indices(image: &RgbImage, weights: &ModelWeights) -> Result<LatentIndices> {
    quantize_latents(&encode_latents(image, weights)?, weights)
}

/// Raw head outputs `(a, b)` cropped to `height x width`, each `3 x H x W`.
pub fn decode_logits(
    indices: &LatentIndices,
    weights: &ModelWeights,
    height: usize,
    width: usize,
) -> Result<(FeatureMap, FeatureMap)> {
    weights.network()?;
    check_dims(height, width)?;
    if LatentIndices::grid_for(height, width) != (indices.height, indices.width) {
        return Err(Error::Shape(format!(
            "{}x{} index grid cannot produce a {height}x{width} image",
            indices.height, indices.width
        )));
    }
    let codebook = weights.tensor("codebook")?;
    let dim = weights.config.codebook_dim as usize;
    let k = weights.config.codebook_size as usize;
    let n = indices.height * indices.width;
    let mut z = FeatureMap::zeros(dim, indices.height, indices.width);
    for (p, &idx) in indices.indices.iter().enumerate() {
        let idx = usize::from(idx);
        if idx >= k {
            return Err(Error::Malformed(format!(
                "codebook index {idx} outside [0, {k})"
            )));
        }
        for c in 0..dim {
            z.data[c * n + p] = codebook.data[idx * dim + c];
        }
    }
    let mut x = conv2d(&z, &weights.conv("dec.stem")?, 1)?;
    relu(&mut x);
    for i in 0..weights.config.blocks {
        x = residual_block(
            &x,
            &weights.conv(&format!("dec.res{i}.conv_a"))?,
            &weights.conv(&format!("dec.res{i}.conv_b"))?,
        )?;
    }
    let mut x = pixel_shuffle(&conv2d(&x, &weights.conv("dec.up")?, 1)?)?;
    relu(&mut x);
    let a = conv2d(&x, &weights.conv("dec.mu")?, 1)?.crop(height, width)?;
    let b = conv2d(&x, &weights.conv("dec.s")?, 1)?.crop(height, width)?;
    Ok((a, b))
}

pub fn decode_to_params(
    indices: &LatentIndices,
    weights: &ModelWeights,
    height: usize,
    width: usize,
    grid: &ScaleGrid,
) -> Result<LogisticParamsPlane> {
    let (a, b) = decode_logits(indices, weights, height, width)?;
    let (lo, hi) = (libm::log(grid.min()), libm::log(grid.max()));
    let n = height * width;
    let mut mu = vec![0f64; 3 * n];
    let mut s = vec![0f64; 3 * n];
    for p in 0..n {
        for c in 0..3 {
            let logit = f64::from(a.data[c * n + p]).clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
            mu[p * 3 + c] = 255.0 * sigmoid(logit);
            s[p * 3 + c] = libm::exp(f64::from(b.data[c * n + p]).clamp(lo, hi));
        }
    }
    Ok(LogisticParamsPlane {
        height,
        width,
        mu,
        s,
    })
}

/// PMF for the index stream: stored counts plus one, quantized; uniform when
/// the histogram is absent.
pub fn index_histogram_pmf(weights: &ModelWeights, precision: u32) -> Result<QuantizedPmf> {
    let k = weights.config.codebook_size as usize;
    if weights.histogram.iter().all(|&c| c == 0) {
        return QuantizedPmf::uniform(k, precision);
    }
    if weights.histogram.len() != k {
        return Err(Error::Model(
            "histogram length does not match the codebook".into(),
        ));
    }
    let counts: Vec<f64> = weights.histogram.iter().map(|&c| c as f64 + 1.0).collect();
    quantize_pmf(&counts, precision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> ArchConfig {
        ArchConfig {
            codebook_size: 16,
            codebook_dim: 4,
            channels: 6,
            blocks: 2,
        }
    }

    fn random_model(seed: u64, config: ArchConfig) -> ModelWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelWeights::with_initializer(config, |name, dims, _| {
            let fan_in: u32 = dims[1..].iter().product();
            let bound = if name == "codebook" {
                1.0
            } else {
                (3.0 / fan_in.max(1) as f32).sqrt()
            };
            rng.gen_range(-bound..bound)
        })
        .unwrap()
    }

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RgbImage {
        RgbImage::from_fn(w, h, |_, _, _| rng.gen()).unwrap()
    }

    #[test]
    fn default_shapes() {
        let config = ArchConfig::default();
        let shapes = config.tensor_shapes();
        // stem, down, 2 * 4 res convs, proj on each side, up, two heads.
        assert_eq!(shapes.len(), 2 * (2 + 8 + 1 + 1 + 8 + 1 + 2) + 1);
        assert!(shapes.contains(&("codebook".into(), vec![256, 32])));
        assert!(shapes.contains(&("dec.up.weight".into(), vec![128, 32, 3, 3])));
        assert_eq!(ArchConfig::from_bytes(&config.to_bytes()).unwrap(), config);
    }

    #[test]
    fn index_grid_sizes() {
        let model = random_model(1, small_config());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (w, h) in [(32, 32), (1, 1), (7, 1), (1, 7), (33, 31)] {
            let idx = encode_to_indices(&random_image(&mut rng, w, h), &model).unwrap();
            assert_eq!((idx.height, idx.width), (h.div_ceil(2), w.div_ceil(2)));
            let params = decode_to_params(&idx, &model, h, w, &ScaleGrid::default()).unwrap();
            assert_eq!(params.mu.len(), w * h * 3);
            assert!(params.mu.iter().all(|&m| m > 0.0 && m < 255.0));
            assert!(params.s.iter().all(|&s| (0.5..=64.0).contains(&s)));
        }
    }

    #[test]
    fn quantization_matches_brute_force() {
        let model = random_model(3, small_config());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let codebook = &model.tensors["codebook"].data;
        for _ in 0..20 {
            let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..20));
            let image = random_image(&mut rng, w, h);
            let latents = encode_latents(&image, &model).unwrap();
            let idx = quantize_latents(&latents, &model).unwrap();
            let n = latents.height * latents.width;
            for p in 0..n {
                // Exhaustive f64 scan; the nearest entry must also be nearest in f32.
                let dist = |k: usize| -> f64 {
                    (0..4)
                        .map(|c| {
                            let d =
                                f64::from(latents.data[c * n + p]) - f64::from(codebook[k * 4 + c]);
                            d * d
                        })
                        .sum()
                };
                let best = (0..16)
                    .min_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap())
                    .unwrap();
                let got = usize::from(idx.indices[p]);
                assert!(got == best || (dist(got) - dist(best)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn exact_codebook_match_and_ties() {
        let codebook = [0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0, 2.0];
        assert_eq!(nearest_codebook_index(&[1.0, 1.0], &codebook, 2), 1);
        assert_eq!(nearest_codebook_index(&[-1.0, 2.0], &codebook, 2), 3);
        // Equidistant from entries 0 and 1 (which are identical at 1 and 2).
        assert_eq!(nearest_codebook_index(&[0.5, 0.5], &codebook, 2), 0);
    }

    #[test]
    fn identity_encoder_selects_matching_entry() {
        // One hidden channel carries R; the projection reads it and the codebook
        // holds every latent value the crafted input can produce.
        let config = ArchConfig {
            codebook_size: 4,
            codebook_dim: 1,
            channels: 1,
            blocks: 0,
        };
        let mut model = ModelWeights::with_initializer(config, |_, _, _| 0.0).unwrap();
        let set = |m: &mut ModelWeights, name: &str, i: usize, v: f32| {
            m.tensors.get_mut(name).unwrap().data[i] = v
        };
        set(&mut model, "enc.stem.weight", 4, 1.0);
        set(&mut model, "enc.stem.bias", 0, 1.0);
        set(&mut model, "enc.down.weight", 4, 1.0);
        set(&mut model, "enc.proj.weight", 0, 1.0);
        let cb = [0.5f32, 2.0, 0.0, 1.0];
        model
            .tensors
            .get_mut("codebook")
            .unwrap()
            .data
            .copy_from_slice(&cb);
        for (value, want) in [(0u8, 2u8), (255, 1), (64, 0)] {
            let image = RgbImage::filled(4, 4, value).unwrap();
            let idx = encode_to_indices(&image, &model).unwrap();
            assert!(
                idx.indices.iter().all(|&i| i == want),
                "value {value}: {:?}",
                idx.indices
            );
        }
    }

    #[test]
    fn zero_weights_give_mid_mu() {
        let model = ModelWeights::with_initializer(small_config(), |_, _, _| 0.0).unwrap();
        let idx = LatentIndices::new(2, 3, vec![0; 6]).unwrap();
        let params = decode_to_params(&idx, &model, 3, 5, &ScaleGrid::default()).unwrap();
        assert!(params.mu.iter().all(|&m| m == 127.5));
        // b = 0 is inside [ln 0.5, ln 64], so s = 1.
        assert!(params.s.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn constant_indices_give_constant_interior() {
        let model = random_model(5, small_config());
        let idx = LatentIndices::new(8, 8, vec![7; 64]).unwrap();
        let params = decode_to_params(&idx, &model, 16, 16, &ScaleGrid::default()).unwrap();
        let at = |u: usize, v: usize, c: usize| params.mu[(u * 16 + v) * 3 + c];
        // Away from the border every value of a channel is identical up to
        // the pixel shuffle phase.
        for u in 6..10 {
            for v in 6..10 {
                for c in 0..3 {
                    assert_eq!(at(u, v, c), at(u % 2 + 6, v % 2 + 6, c));
                }
            }
        }
    }

    #[test]
    fn decode_rejects_bad_inputs() {
        let model = random_model(6, small_config());
        let grid = ScaleGrid::default();
        let bad = LatentIndices::new(1, 1, vec![16]).unwrap();
        assert!(matches!(
            decode_to_params(&bad, &model, 1, 1, &grid),
            Err(Error::Malformed(_))
        ));
        let ok = LatentIndices::new(1, 1, vec![3]).unwrap();
        assert!(decode_to_params(&ok, &model, 3, 3, &grid).is_err());
        let empty = ModelWeights::twar_only(small_config(), TwarParams::gradient());
        assert!(decode_to_params(&ok, &empty, 1, 1, &grid).is_err());
    }

    #[test]
    fn validation() {
        let mut model = random_model(7, small_config());
        assert!(model.validate().is_ok());
        model.tensors.get_mut("enc.proj.bias").unwrap().data[0] = f32::NAN;
        assert!(model.validate().is_err());
        let mut model = random_model(7, small_config());
        model.tensors.get_mut("codebook").unwrap().dims = vec![4, 16];
        assert!(model.validate().is_err());
        let mut model = random_model(7, small_config());
        model.tensors.remove("dec.s.bias");
        assert!(model.validate().is_err());
        assert!(
            ModelWeights::twar_only(small_config(), TwarParams::gradient())
                .validate()
                .is_ok()
        );
    }

    #[test]
    fn histogram_pmf() {
        let mut model = ModelWeights::twar_only(ArchConfig::default(), TwarParams::gradient());
        assert_eq!(
            index_histogram_pmf(&model, 12).unwrap(),
            QuantizedPmf::uniform(256, 12).unwrap()
        );
        model.histogram[9] = 1_000_000_000;
        let pmf = index_histogram_pmf(&model, 12).unwrap();
        assert_eq!(pmf.mass(9), 2047);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        model.histogram = (0..256).map(|_| rng.gen_range(0..10_000)).collect();
        let counts: Vec<f64> = model.histogram.iter().map(|&c| c as f64 + 1.0).collect();
        assert_eq!(
            index_histogram_pmf(&model, 12).unwrap(),
            quantize_pmf(&counts, 12).unwrap()
        );
    }
}
