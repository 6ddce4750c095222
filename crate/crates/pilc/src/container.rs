//! The "PILC" container and the end-to-end codec.
//!
//! Header, little-endian throughout:
//!
//! ```text
//! "PILC" | version u8 | width u32 | height u32 | backend u8 | M u8 | lanes u16
//! | padding rule u8 | flags u8
//! | model hash [8]            (flag bit 0)
//! | scale grid: D u16, D * f64
//! | distribution index u8     (twar-static only)
//! | schedule checksum [8]     (flag bit 1)
//! | image digest [8]          (flag bit 2)
//! | index lane states u16 * L, index section bytes u64      (twar-vqvae only)
//! | residual lane states u16 * L, residual section bytes u64
//! ```
//!
//! The index section (vqvae only) and the residual section follow. Each is
//! `L` bit stacks in their wire form (bit count u64, then the bytes).
//! Lane states are the encoder's final states, which the decoder starts from;
//! each lane must decode back to `2^M` with every bit consumed. That check
//! misses corruptions after which the decoder falls back into step, so the
//! image digest (on by default) guards the decoded pixels as well.

use pilc_core::ans::{
    build_tables, interleaved_decode, interleaved_encode, DistributionSet, Lane, LaneSet,
};
use pilc_core::logistic::{
    recentre_symbol, recentre_with_shift, scale_from_mad, unrecentre_symbol,
};
use pilc_core::rans::CoderState;
use pilc_core::twar::{self, PADDING_ZERO};
use pilc_core::vqvae::{self, LatentIndices, ModelWeights};
use pilc_core::{BitStack, RgbImage, ScaleGrid, ShiftedResidual, TwarParams, MAX_TABLE_PRECISION};

use crate::model_file::{digest, hash_hex, Model, ModelHash};
use crate::reader::Reader;
use crate::{PilcError, Result};

pub const CONTAINER_MAGIC: &[u8; 4] = b"PILC";
pub const CONTAINER_VERSION: u8 = 1;
/// Smallest precision at which 256 residual symbols are admissible.
pub const MIN_PRECISION: u32 = 9;

const FLAG_MODEL_HASH: u8 = 1;
const FLAG_SCHEDULE_CHECKSUM: u8 = 2;
const FLAG_IMAGE_DIGEST: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    /// TWAR residuals coded with one logistic scale fitted per image.
    TwarStatic,
    /// TWAR residuals coded with per-value `(mu, s)` from the VQ-VAE.
    TwarVqvae,
}

impl Backend {
    pub fn id(self) -> u8 {
        match self {
            Backend::TwarStatic => 0,
            Backend::TwarVqvae => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(Backend::TwarStatic),
            1 => Ok(Backend::TwarVqvae),
            _ => Err(PilcError::Malformed(format!("unknown backend id {id}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::TwarStatic => "twar-static",
            Backend::TwarVqvae => "twar-vqvae",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressOptions {
    pub backend: Backend,
    pub precision: u32,
    pub grid: ScaleGrid,
    pub lanes: usize,
    /// Check every encode table cell exhaustively while building.
    pub verify_tables: bool,
    /// Embed a checksum of the per-symbol distribution and shift schedule.
    pub schedule_checksum: bool,
    /// Embed a digest of the image, checked after decoding.
    pub image_digest: bool,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self {
            backend: Backend::TwarStatic,
            precision: pilc_core::DEFAULT_PRECISION,
            grid: ScaleGrid::default(),
            lanes: 1,
            verify_tables: false,
            schedule_checksum: false,
            image_digest: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerHeader {
    pub version: u8,
    pub width: u32,
    pub height: u32,
    pub backend: Backend,
    pub precision: u8,
    pub lanes: u16,
    pub padding_rule: u8,
    pub model_hash: Option<ModelHash>,
    pub grid: ScaleGrid,
    /// Grid index of the global scale; twar-static only.
    pub static_distribution: Option<u8>,
    pub schedule_checksum: Option<[u8; 8]>,
    pub image_digest: Option<[u8; 8]>,
    /// Empty for twar-static.
    pub index_states: Vec<u16>,
    pub index_bytes: u64,
    pub residual_states: Vec<u16>,
    pub residual_bytes: u64,
}

impl ContainerHeader {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.grid.len());
        out.extend_from_slice(CONTAINER_MAGIC);
        out.push(self.version);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.push(self.backend.id());
        out.push(self.precision);
        out.extend_from_slice(&self.lanes.to_le_bytes());
        out.push(self.padding_rule);
        let mut flags = 0;
        if self.model_hash.is_some() {
            flags |= FLAG_MODEL_HASH;
        }
        if self.schedule_checksum.is_some() {
            flags |= FLAG_SCHEDULE_CHECKSUM;
        }
        if self.image_digest.is_some() {
            flags |= FLAG_IMAGE_DIGEST;
        }
        out.push(flags);
        if let Some(hash) = &self.model_hash {
            out.extend_from_slice(hash);
        }
        out.extend_from_slice(&self.grid.to_bytes());
        if let Some(d) = self.static_distribution {
            out.push(d);
        }
        if let Some(sum) = &self.schedule_checksum {
            out.extend_from_slice(sum);
        }
        if let Some(sum) = &self.image_digest {
            out.extend_from_slice(sum);
        }
        if self.backend == Backend::TwarVqvae {
            for s in &self.index_states {
                out.extend_from_slice(&s.to_le_bytes());
            }
            out.extend_from_slice(&self.index_bytes.to_le_bytes());
        }
        for s in &self.residual_states {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.extend_from_slice(&self.residual_bytes.to_le_bytes());
        out
    }

    fn parse(r: &mut Reader<'_>) -> Result<Self> {
        if r.take(4)
            .map_err(|_| PilcError::BadMagic { expected: "PILC" })?
            != CONTAINER_MAGIC
        {
            return Err(PilcError::BadMagic { expected: "PILC" });
        }
        let version = r.u8()?;
        if version != CONTAINER_VERSION {
            return Err(PilcError::UnsupportedVersion(version));
        }
        let width = r.u32()?;
        let height = r.u32()?;
        if width == 0 || height == 0 {
            return Err(PilcError::Malformed(format!("image size {width}x{height}")));
        }
        let backend = Backend::from_id(r.u8()?)?;
        let precision = r.u8()?;
        check_precision(u32::from(precision)).map_err(|e| PilcError::Malformed(e.to_string()))?;
        let lanes = r.u16()?;
        if lanes == 0 {
            return Err(PilcError::Malformed("zero lanes".into()));
        }
        let padding_rule = r.u8()?;
        if padding_rule != PADDING_ZERO {
            return Err(PilcError::Malformed(format!(
                "unknown padding rule {padding_rule}"
            )));
        }
        let flags = r.u8()?;
        if flags & !(FLAG_MODEL_HASH | FLAG_SCHEDULE_CHECKSUM | FLAG_IMAGE_DIGEST) != 0 {
            return Err(PilcError::Malformed(format!("unknown flags {flags:#04x}")));
        }
        let model_hash = if flags & FLAG_MODEL_HASH != 0 {
            Some(r.take(8)?.try_into().unwrap())
        } else {
            None
        };
        if backend == Backend::TwarVqvae && model_hash.is_none() {
            return Err(PilcError::Malformed(
                "twar-vqvae container without a model hash".into(),
            ));
        }
        let (grid, used) = ScaleGrid::from_bytes(r.peek_rest())?;
        r.take(used)?;
        if grid.len() > 256 {
            return Err(PilcError::Malformed(format!(
                "{} distributions",
                grid.len()
            )));
        }
        let static_distribution = match backend {
            Backend::TwarStatic => {
                let d = r.u8()?;
                if usize::from(d) >= grid.len() {
                    return Err(PilcError::Malformed(format!(
                        "distribution index {d} outside the grid"
                    )));
                }
                Some(d)
            }
            Backend::TwarVqvae => None,
        };
        let schedule_checksum = if flags & FLAG_SCHEDULE_CHECKSUM != 0 {
            Some(r.take(8)?.try_into().unwrap())
        } else {
            None
        };
        let image_digest = if flags & FLAG_IMAGE_DIGEST != 0 {
            Some(r.take(8)?.try_into().unwrap())
        } else {
            None
        };
        let states = |r: &mut Reader<'_>| -> Result<Vec<u16>> {
            (0..lanes)
                .map(|_| {
                    let s = r.u16()?;
                    if !CoderState(u32::from(s)).is_resting(u32::from(precision)) {
                        return Err(PilcError::Corrupt {
                            stream: "header",
                            source: pilc_core::Error::StateOutOfRange(u32::from(s)),
                        });
                    }
                    Ok(s)
                })
                .collect()
        };
        let (index_states, index_bytes) = match backend {
            Backend::TwarVqvae => (states(r)?, r.u64()?),
            Backend::TwarStatic => (Vec::new(), 0),
        };
        let residual_states = states(r)?;
        let residual_bytes = r.u64()?;
        Ok(Self {
            version,
            width,
            height,
            backend,
            precision,
            lanes,
            padding_rule,
            model_hash,
            grid,
            static_distribution,
            schedule_checksum,
            image_digest,
            index_states,
            index_bytes,
            residual_states,
            residual_bytes,
        })
    }

    /// Values coded in the residual stream.
    pub fn dims(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }
}

/// A parsed container: header plus both lane sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedImage {
    pub header: ContainerHeader,
    pub index_lanes: LaneSet,
    pub residual_lanes: LaneSet,
}

impl CompressedImage {
    pub fn parse(blob: &[u8]) -> Result<Self> {
        let mut r = Reader::new(blob);
        let header = ContainerHeader::parse(&mut r)?;
        let index_lanes = match header.backend {
            Backend::TwarVqvae => {
                read_section(&mut r, &header.index_states, header.index_bytes, "index")?
            }
            Backend::TwarStatic => LaneSet { lanes: Vec::new() },
        };
        let residual_lanes = read_section(
            &mut r,
            &header.residual_states,
            header.residual_bytes,
            "residual",
        )?;
        if r.remaining() != 0 {
            return Err(PilcError::Malformed(format!(
                "{} trailing bytes",
                r.remaining()
            )));
        }
        Ok(Self {
            header,
            index_lanes,
            residual_lanes,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header.to_bytes();
        for lane in self
            .index_lanes
            .lanes
            .iter()
            .chain(&self.residual_lanes.lanes)
        {
            lane.stream.write_to(&mut out);
        }
        out
    }
}

fn read_section(r: &mut Reader<'_>, states: &[u16], bytes: u64, name: &str) -> Result<LaneSet> {
    let len = usize::try_from(bytes)
        .ok()
        .filter(|&n| n <= r.remaining())
        .ok_or_else(|| {
            PilcError::Truncated(format!(
                "{name} section declares {bytes} bytes, {} available",
                r.remaining()
            ))
        })?;
    let section = r.take(len)?;
    let mut pos = 0;
    let mut lanes = Vec::with_capacity(states.len());
    for &s in states {
        let (stream, used) = BitStack::from_bytes(&section[pos..])
            .map_err(|e| PilcError::Truncated(format!("{name} lane {}: {e}", lanes.len())))?;
        pos += used;
        lanes.push(Lane {
            state: CoderState(u32::from(s)),
            stream,
        });
    }
    if pos != len {
        return Err(PilcError::Malformed(format!(
            "{name} section has {} unused bytes",
            len - pos
        )));
    }
    Ok(LaneSet { lanes })
}

fn section_bytes(set: &LaneSet) -> u64 {
    set.lanes
        .iter()
        .map(|l| 8 + l.stream.len().div_ceil(8) as u64)
        .sum()
}

fn lane_states(set: &LaneSet) -> Vec<u16> {
    set.lanes.iter().map(|l| l.state.0 as u16).collect()
}

fn check_precision(m: u32) -> pilc_core::Result<()> {
    if !(MIN_PRECISION..=MAX_TABLE_PRECISION).contains(&m) {
        return Err(pilc_core::Error::Configuration(format!(
            "precision {m} outside [{MIN_PRECISION}, {MAX_TABLE_PRECISION}]"
        )));
    }
    Ok(())
}

fn image_digest(image: &RgbImage) -> [u8; 8] {
    let mut bytes = Vec::with_capacity(8 + image.dims());
    bytes.extend_from_slice(&(image.width() as u32).to_le_bytes());
    bytes.extend_from_slice(&(image.height() as u32).to_le_bytes());
    bytes.extend_from_slice(image.data());
    digest(&bytes)
}

fn schedule_digest(schedule: &[usize], shifts: &[u8]) -> [u8; 8] {
    let mut bytes = Vec::with_capacity(2 * schedule.len());
    for (&d, &s) in schedule.iter().zip(shifts) {
        bytes.push(d as u8);
        bytes.push(s);
    }
    digest(&bytes)
}

/// TWAR parameters in force for a container: the model's when it is bound
/// to one, the gradient predictor otherwise.
fn twar_params(model: Option<&Model>) -> TwarParams {
    model
        .map(|m| m.weights().twar)
        .unwrap_or_else(TwarParams::gradient)
}

fn network(model: Option<&Model>) -> Result<&ModelWeights> {
    match model {
        Some(m) if m.weights().has_network() => Ok(m.weights()),
        Some(_) => Err(PilcError::ModelRequired(
            "the twar-vqvae backend needs a model with network tensors".into(),
        )),
        None => Err(PilcError::ModelRequired(
            "the twar-vqvae backend needs a model".into(),
        )),
    }
}

/// Per-value distribution indices and recentring shifts.
struct Schedule {
    dists: Vec<usize>,
    shifts: Vec<u8>,
}

fn vqvae_schedule(
    indices: &LatentIndices,
    weights: &ModelWeights,
    height: usize,
    width: usize,
    grid: &ScaleGrid,
) -> Result<Schedule> {
    let params = vqvae::decode_to_params(indices, weights, height, width, grid)?;
    let dists = params.s.iter().map(|&s| grid.index_of(s)).collect();
    // The shift of recentre_symbol depends on mu alone.
    let shifts = params
        .mu
        .iter()
        .map(|&mu| recentre_symbol(0, mu).1)
        .collect();
    Ok(Schedule { dists, shifts })
}

/// Logistic scale matching the residual's mean absolute deviation about 128.
pub fn static_scale(residual: &ShiftedResidual) -> f64 {
    let n = residual.data().len() as f64;
    let total: u64 = residual
        .data()
        .iter()
        .map(|&r| u64::from(r.abs_diff(128)))
        .sum();
    scale_from_mad(total as f64 / n)
}

pub fn compress(
    image: &RgbImage,
    model: Option<&Model>,
    options: &CompressOptions,
) -> Result<Vec<u8>> {
    Ok(compress_image(image, model, options)?.to_bytes())
}

pub fn compress_image(
    image: &RgbImage,
    model: Option<&Model>,
    options: &CompressOptions,
) -> Result<CompressedImage> {
    check_precision(options.precision)?;
    let lanes = u16::try_from(options.lanes)
        .ok()
        .filter(|&l| l > 0)
        .ok_or_else(|| {
            pilc_core::Error::Configuration(format!(
                "lane count {} outside [1, 65535]",
                options.lanes
            ))
        })?;
    if options.grid.len() > 256 {
        return Err(pilc_core::Error::Configuration("at most 256 distributions".into()).into());
    }
    let too_large = || PilcError::Unsupported("image dimensions exceed 32 bits".into());
    let width = u32::try_from(image.width()).map_err(|_| too_large())?;
    let height = u32::try_from(image.height()).map_err(|_| too_large())?;
    let m = options.precision;
    let grid = &options.grid;

    let residual = twar::forward_residual(image, &twar_params(model));
    let n = residual.data().len();

    let (index_lanes, schedule, static_distribution) = match options.backend {
        Backend::TwarStatic => {
            let d = grid.index_of(static_scale(&residual).max(grid.min()));
            (
                LaneSet { lanes: Vec::new() },
                Schedule {
                    dists: vec![d; n],
                    shifts: vec![128; n],
                },
                Some(d as u8),
            )
        }
        Backend::TwarVqvae => {
            let weights = network(model)?;
            let indices = vqvae::encode_to_indices(image, weights)?;
            let set = DistributionSet::new(vec![vqvae::index_histogram_pmf(weights, m)?])?;
            let tables = build_tables(&set, options.verify_tables)?;
            let zeros = vec![0; indices.indices.len()];
            let lanes =
                interleaved_encode(&tables.encode, &indices.indices, &zeros, options.lanes)?;
            let schedule = vqvae_schedule(&indices, weights, image.height(), image.width(), grid)?;
            (lanes, schedule, None)
        }
    };

    let symbols: Vec<u8> = residual
        .data()
        .iter()
        .zip(&schedule.shifts)
        .map(|(&r, &shift)| recentre_with_shift(r, shift))
        .collect();
    let set = DistributionSet::from_grid(grid, m)?;
    let tables = build_tables(&set, options.verify_tables)?;
    let residual_lanes =
        interleaved_encode(&tables.encode, &symbols, &schedule.dists, options.lanes)?;

    let header = ContainerHeader {
        version: CONTAINER_VERSION,
        width,
        height,
        backend: options.backend,
        precision: m as u8,
        lanes,
        padding_rule: PADDING_ZERO,
        model_hash: model.map(Model::hash),
        grid: grid.clone(),
        static_distribution,
        schedule_checksum: options
            .schedule_checksum
            .then(|| schedule_digest(&schedule.dists, &schedule.shifts)),
        image_digest: options.image_digest.then(|| image_digest(image)),
        index_states: lane_states(&index_lanes),
        index_bytes: section_bytes(&index_lanes),
        residual_states: lane_states(&residual_lanes),
        residual_bytes: section_bytes(&residual_lanes),
    };
    Ok(CompressedImage {
        header,
        index_lanes,
        residual_lanes,
    })
}

pub fn decompress(blob: &[u8], model: Option<&Model>) -> Result<RgbImage> {
    decompress_image(&CompressedImage::parse(blob)?, model)
}

pub fn decompress_image(compressed: &CompressedImage, model: Option<&Model>) -> Result<RgbImage> {
    let header = &compressed.header;
    let model = match header.model_hash {
        Some(expected) => {
            let m = model.ok_or_else(|| {
                PilcError::ModelRequired(format!(
                    "container was made with model {}",
                    hash_hex(&expected)
                ))
            })?;
            if m.hash() != expected {
                return Err(PilcError::ModelHashMismatch {
                    expected: hash_hex(&expected),
                    found: hash_hex(&m.hash()),
                });
            }
            Some(m)
        }
        None => None,
    };
    let (width, height) = (header.width as usize, header.height as usize);
    let n = header
        .width
        .checked_mul(header.height)
        .and_then(|p| p.checked_mul(3))
        .map(|n| n as usize)
        .ok_or_else(|| PilcError::Unsupported("image too large".into()))?;
    let m = u32::from(header.precision);
    let lanes = usize::from(header.lanes);
    let grid = &header.grid;
    // Every mass stays below half the total, so each value costs more than
    // one bit; a header claiming far more values than payload bits is bogus.
    // This bounds the allocations a hostile header can force.
    if n > 2 * compressed.residual_lanes.bits() + 64 * lanes + 4096 {
        return Err(PilcError::Malformed(format!(
            "{width}x{height} image cannot fit in {} payload bits",
            compressed.residual_lanes.bits()
        )));
    }

    let schedule = match header.backend {
        Backend::TwarStatic => {
            let d = usize::from(header.static_distribution.unwrap_or(0));
            Schedule {
                dists: vec![d; n],
                shifts: vec![128; n],
            }
        }
        Backend::TwarVqvae => {
            let weights = network(model)?;
            let set = DistributionSet::new(vec![vqvae::index_histogram_pmf(weights, m)?])?;
            let tables = build_tables(&set, false)?;
            let (gh, gw) = LatentIndices::grid_for(height, width);
            let zeros = vec![0; gh * gw];
            let indices =
                interleaved_decode(&tables.decode, &compressed.index_lanes, lanes, &zeros)
                    .map_err(|source| PilcError::Corrupt {
                        stream: "index",
                        source,
                    })?;
            let indices = LatentIndices::new(gh, gw, indices)?;
            vqvae_schedule(&indices, weights, height, width, grid)?
        }
    };
    if let Some(expected) = header.schedule_checksum {
        if schedule_digest(&schedule.dists, &schedule.shifts) != expected {
            return Err(PilcError::Corrupt {
                stream: "schedule",
                source: pilc_core::Error::Malformed(
                    "distribution schedule checksum mismatch".into(),
                ),
            });
        }
    }

    let set = DistributionSet::from_grid(grid, m)?;
    let tables = build_tables(&set, false)?;
    let symbols = interleaved_decode(
        &tables.decode,
        &compressed.residual_lanes,
        lanes,
        &schedule.dists,
    )
    .map_err(|source| PilcError::Corrupt {
        stream: "residual",
        source,
    })?;
    let data = symbols
        .iter()
        .zip(&schedule.shifts)
        .map(|(&x, &shift)| unrecentre_symbol(x, shift))
        .collect();
    let residual = ShiftedResidual::new(width, height, data)?;
    let image = twar::decode_parallel(&residual, &twar_params(model));
    if header
        .image_digest
        .is_some_and(|expected| image_digest(&image) != expected)
    {
        return Err(PilcError::Corrupt {
            stream: "image",
            source: pilc_core::Error::Malformed("decoded image digest mismatch".into()),
        });
    }
    Ok(image)
}

/// Real bits per dimension: every container byte over `H * W * 3` values.
pub fn bpd_report(blob: &[u8], original: &RgbImage) -> f64 {
    8.0 * blob.len() as f64 / original.dims() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_file::random_weights;
    use pilc_core::vqvae::ArchConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_model(seed: u64) -> Model {
        let config = ArchConfig {
            codebook_size: 16,
            codebook_dim: 4,
            channels: 8,
            blocks: 1,
        };
        Model::new(random_weights(config, seed).unwrap()).unwrap()
    }

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RgbImage {
        let base: u8 = rng.gen();
        RgbImage::from_fn(w, h, |u, v, c| {
            base.wrapping_add((u * 3 + v * 5 + c.index() * 40) as u8) ^ (rng.gen::<u8>() & 7)
        })
        .unwrap()
    }

    #[test]
    fn static_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (w, h) in [(1, 1), (1, 7), (7, 1), (31, 33), (32, 32)] {
            let image = random_image(&mut rng, w, h);
            for lanes in [1, 3] {
                let options = CompressOptions {
                    lanes,
                    ..CompressOptions::default()
                };
                let blob = compress(&image, None, &options).unwrap();
                assert_eq!(decompress(&blob, None).unwrap(), image);
            }
        }
    }

    #[test]
    fn vqvae_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = small_model(3);
        let options = CompressOptions {
            backend: Backend::TwarVqvae,
            lanes: 4,
            ..CompressOptions::default()
        };
        for (w, h) in [(1, 1), (5, 3), (16, 9)] {
            let image = random_image(&mut rng, w, h);
            let blob = compress(&image, Some(&model), &options).unwrap();
            assert_eq!(decompress(&blob, Some(&model)).unwrap(), image);
        }
    }

    #[test]
    fn header_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let image = random_image(&mut rng, 9, 4);
        let model = small_model(5);
        for backend in [Backend::TwarStatic, Backend::TwarVqvae] {
            for checksum in [false, true] {
                let options = CompressOptions {
                    backend,
                    schedule_checksum: checksum,
                    image_digest: !checksum,
                    lanes: 2,
                    ..CompressOptions::default()
                };
                let c = compress_image(&image, Some(&model), &options).unwrap();
                let bytes = c.to_bytes();
                assert_eq!(CompressedImage::parse(&bytes).unwrap(), c);
                assert_eq!(decompress(&bytes, Some(&model)).unwrap(), image);
            }
        }
    }

    #[test]
    fn constant_image_is_tiny() {
        let image = RgbImage::filled(64, 64, 200).unwrap();
        let blob = compress(&image, None, &CompressOptions::default()).unwrap();
        assert_eq!(decompress(&blob, None).unwrap(), image);
        // 12288 values at about one bit each under the narrowest scale.
        assert!(blob.len() < 12288 / 8 + 200, "{} bytes", blob.len());
    }

    #[test]
    fn model_binding() {
        let image = RgbImage::filled(4, 4, 9).unwrap();
        let model = small_model(6);
        let other = small_model(7);
        let vq = CompressOptions {
            backend: Backend::TwarVqvae,
            ..CompressOptions::default()
        };
        assert!(matches!(
            compress(&image, None, &vq),
            Err(PilcError::ModelRequired(_))
        ));
        let blob = compress(&image, Some(&model), &vq).unwrap();
        assert!(matches!(
            decompress(&blob, None),
            Err(PilcError::ModelRequired(_))
        ));
        assert!(matches!(
            decompress(&blob, Some(&other)),
            Err(PilcError::ModelHashMismatch { .. })
        ));
        // A static container needs no model, and ignores one it was not made with.
        let blob = compress(&image, None, &CompressOptions::default()).unwrap();
        assert_eq!(decompress(&blob, Some(&model)).unwrap(), image);
    }

    #[test]
    fn bad_headers() {
        let image = RgbImage::filled(3, 3, 1).unwrap();
        let blob = compress(&image, None, &CompressOptions::default()).unwrap();
        let mut bad = blob.clone();
        bad[1] = b'X';
        assert!(matches!(
            decompress(&bad, None),
            Err(PilcError::BadMagic { .. })
        ));
        let mut bad = blob.clone();
        bad[4] = 2;
        assert!(matches!(
            decompress(&bad, None),
            Err(PilcError::UnsupportedVersion(2))
        ));
        assert!(matches!(
            decompress(&blob[..blob.len() - 1], None),
            Err(PilcError::Truncated(_))
        ));
        assert!(decompress(&[], None).is_err());
        let options = CompressOptions {
            precision: 8,
            ..CompressOptions::default()
        };
        assert!(compress(&image, None, &options).is_err());
        let options = CompressOptions {
            lanes: 0,
            ..CompressOptions::default()
        };
        assert!(compress(&image, None, &options).is_err());
    }

    #[test]
    fn bpd_counts_every_byte() {
        let image = RgbImage::filled(32, 32, 0).unwrap();
        assert_eq!(bpd_report(&vec![0; 1536], &image), 4.0);
    }
}
