//! The "PILW" model file.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "PILW" | version u8 | K u32 | Dc u32 | C u32 | blocks u32 | tensor count u32
//! per tensor: name length u32 | UTF-8 name | rank u32 | dims u32 * rank | f32 * prod(dims)
//! histogram: K * u64 | TWAR parameters: 12 * f32 | digest: 8 bytes
//! ```
//!
//! The digest is the first 8 bytes of SHA-256 over everything before it and
//! doubles as the model hash that containers refer to. A file with zero
//! tensors carries only TWAR parameters and a histogram.

use std::collections::BTreeMap;
use std::path::Path;

use pilc_core::twar::TwarParams;
use pilc_core::vqvae::{ArchConfig, ModelWeights, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::reader::Reader;
use crate::{PilcError, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"PILW";
pub const MODEL_VERSION: u8 = 1;
pub const DIGEST_BYTES: usize = 8;

pub type ModelHash = [u8; DIGEST_BYTES];

pub fn digest(bytes: &[u8]) -> ModelHash {
    let full = Sha256::digest(bytes);
    full[..DIGEST_BYTES].try_into().unwrap()
}

pub fn hash_hex(hash: &ModelHash) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Validated weights together with their content hash.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    weights: ModelWeights,
    hash: ModelHash,
}

impl Model {
    pub fn new(weights: ModelWeights) -> Result<Self> {
        weights.validate()?;
        let bytes = encode_body(&weights);
        Ok(Self {
            hash: digest(&bytes),
            weights,
        })
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn hash(&self) -> ModelHash {
        self.hash
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = encode_body(&self.weights);
        out.extend_from_slice(&self.hash);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < DIGEST_BYTES {
            return Err(PilcError::Truncated(
                "model file shorter than its digest".into(),
            ));
        }
        let (body, stored) = bytes.split_at(bytes.len() - DIGEST_BYTES);
        let weights = decode_body(body)?;
        if digest(body) != stored {
            return Err(PilcError::ModelDigest);
        }
        let model = Self::new(weights)?;
        debug_assert_eq!(model.hash, stored);
        Ok(model)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

fn encode_body(weights: &ModelWeights) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.push(MODEL_VERSION);
    out.extend_from_slice(&weights.config.to_bytes());
    out.extend_from_slice(&(weights.tensors.len() as u32).to_le_bytes());
    for (name, tensor) in &weights.tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.dims.len() as u32).to_le_bytes());
        for d in &tensor.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &tensor.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for c in &weights.histogram {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&weights.twar.to_bytes());
    out
}

fn decode_body(body: &[u8]) -> Result<ModelWeights> {
    let mut r = Reader::new(body);
    if r.take(4)? != MODEL_MAGIC {
        return Err(PilcError::BadMagic { expected: "PILW" });
    }
    let version = r.u8()?;
    if version != MODEL_VERSION {
        return Err(PilcError::UnsupportedVersion(version));
    }
    let config = ArchConfig::from_bytes(r.take(ArchConfig::BYTES)?)?;
    let count = r.u32()?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| PilcError::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(PilcError::Malformed(format!(
                "tensor {name} has rank {rank}"
            )));
        }
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .filter(|&n| n <= r.remaining() / 4)
            .ok_or_else(|| PilcError::Truncated(format!("tensor {name} payload")))?;
        let data = r
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if tensors
            .insert(name.clone(), Tensor::new(dims, data)?)
            .is_some()
        {
            return Err(PilcError::Malformed(format!("duplicate tensor {name}")));
        }
    }
    let histogram = (0..config.codebook_size)
        .map(|_| r.u64())
        .collect::<Result<Vec<_>>>()?;
    let twar = TwarParams::from_bytes(r.take(TwarParams::BYTES)?)?;
    if r.remaining() != 0 {
        return Err(PilcError::Malformed(format!(
            "{} trailing bytes in model file",
            r.remaining()
        )));
    }
    Ok(ModelWeights {
        config,
        tensors,
        twar,
        histogram,
    })
}

/// Untrained weights: uniform in `+-sqrt(3 / fan_in)` for convolutions,
/// `+-1` for the codebook, zero biases, gradient TWAR and no histogram.
/// The codec stays lossless with any weights; only the rate suffers.
pub fn random_weights(config: ArchConfig, seed: u64) -> Result<ModelWeights> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ModelWeights::with_initializer(config, |name, dims, _| {
        if name == "codebook" {
            rng.gen_range(-1.0..1.0)
        } else if name.ends_with(".bias") {
            0.0
        } else {
            let fan_in: u32 = dims[1..].iter().product();
            let bound = (3.0 / fan_in as f32).sqrt();
            rng.gen_range(-bound..bound)
        }
    })?)
}
