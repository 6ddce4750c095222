use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    R = 0,
    G = 1,
    B = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Interleaved 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(alloc::format!("empty image {width}x{height}")));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| Error::Shape("image dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Shape(alloc::format!(
                "{width}x{height} image needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height * 3])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, Channel) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for u in 0..height {
            for v in 0..width {
                for c in Channel::ALL {
                    data.push(f(u, v, c));
                }
            }
        }
        Self::new(width, height, data)
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

    /// Number of coded values, `H * W * 3`.
    pub fn dims(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, c: Channel) -> u8 {
        self.data[(row * self.width + col) * 3 + c.index()]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, c: Channel, value: u8) {
        self.data[(row * self.width + col) * 3 + c.index()] = value;
    }

    /// Splits into three planar `H*W` buffers.
    pub fn to_planes(&self) -> [Vec<u8>; 3] {
        let n = self.width * self.height;
        let mut planes = [vec![0u8; n], vec![0u8; n], vec![0u8; n]];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            planes[0][i] = px[0];
            planes[1][i] = px[1];
            planes[2][i] = px[2];
        }
        planes
    }

    pub fn from_planes(width: usize, height: usize, planes: &[Vec<u8>; 3]) -> Result<Self> {
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::Shape("plane size does not match dimensions".into()));
        }
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            data.extend_from_slice(&[planes[0][i], planes[1][i], planes[2][i]]);
        }
        Self::new(width, height, data)
    }
}
