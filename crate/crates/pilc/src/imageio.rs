//! Binary PPM, raw RGB8 and CIFAR10 binary batches.

use std::path::{Path, PathBuf};

use pilc_core::RgbImage;

use crate::{PilcError, Result};

pub const CIFAR10_SIDE: usize = 32;
/// One label byte, then the R, G and B planes of a 32x32 image.
pub const CIFAR10_RECORD: usize = 1 + 3 * CIFAR10_SIDE * CIFAR10_SIDE;

/// Parses a binary PPM (`P6`, maxval 255); comments are allowed in the header.
pub fn parse_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let mut pos = 0;
    let mut fields = [0usize; 3];
    if bytes.get(..2) != Some(b"P6") {
        return Err(PilcError::BadMagic { expected: "P6" });
    }
    pos += 2;
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PilcError::Malformed("PPM header field is not a number".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PilcError::Malformed(
            "PPM header must end with one whitespace byte".into(),
        ));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(PilcError::Unsupported(format!(
            "PPM maxval {maxval}; only 255 is supported"
        )));
    }
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(3))
        .ok_or_else(|| PilcError::Malformed("PPM dimensions overflow".into()))?;
    let payload = bytes
        .get(pos..pos + n)
        .ok_or_else(|| PilcError::Truncated(format!("PPM payload needs {n} bytes")))?;
    Ok(RgbImage::new(width, height, payload.to_vec())?)
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.data());
    out
}

/// Interleaved RGB8 without a header.
pub fn parse_raw(bytes: &[u8], width: usize, height: usize) -> Result<RgbImage> {
    if Some(bytes.len()) != width.checked_mul(height).and_then(|p| p.checked_mul(3)) {
        return Err(PilcError::Malformed(format!(
            "{} bytes is not a {width}x{height} RGB8 image",
            bytes.len()
        )));
    }
    Ok(RgbImage::new(width, height, bytes.to_vec())?)
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    parse_ppm(&std::fs::read(path)?)
}

/// Images of one CIFAR10 binary batch, in file order.
pub fn parse_cifar10_batch(bytes: &[u8]) -> Result<Vec<RgbImage>> {
    if bytes.is_empty() || bytes.len() % CIFAR10_RECORD != 0 {
        return Err(PilcError::Malformed(format!(
            "{} bytes is not a whole number of CIFAR10 records",
            bytes.len()
        )));
    }
    let plane = CIFAR10_SIDE * CIFAR10_SIDE;
    bytes
        .chunks_exact(CIFAR10_RECORD)
        .map(|record| {
            let p = &record[1..];
            let planes = [
                p[..plane].to_vec(),
                p[plane..2 * plane].to_vec(),
                p[2 * plane..].to_vec(),
            ];
            Ok(RgbImage::from_planes(CIFAR10_SIDE, CIFAR10_SIDE, &planes)?)
        })
        .collect()
}

/// CIFAR10 batch files in `dir`: the five training batches, then the test
/// batch, whichever exist. Also accepts the `cifar-10-batches-bin` subfolder.
pub fn cifar10_files(dir: &Path) -> Vec<PathBuf> {
    let mut roots = vec![dir.to_path_buf(), dir.join("cifar-10-batches-bin")];
    roots.dedup();
    for root in roots {
        let names = (1..=5)
            .map(|i| format!("data_batch_{i}.bin"))
            .chain(["test_batch.bin".to_string()]);
        let files: Vec<PathBuf> = names
            .map(|n| root.join(n))
            .filter(|p| p.is_file())
            .collect();
        if !files.is_empty() {
            return files;
        }
    }
    Vec::new()
}

pub fn read_cifar10_file(path: &Path) -> Result<Vec<RgbImage>> {
    parse_cifar10_batch(&std::fs::read(path)?)
}

/// Every image of a corpus: a CIFAR10 directory, or the `.ppm` files of a
/// directory in name order, or a single `.ppm` file.
pub fn read_corpus(path: &Path) -> Result<Vec<RgbImage>> {
    if path.is_file() {
        return match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => read_cifar10_file(path),
            _ => Ok(vec![read_ppm(path)?]),
        };
    }
    let cifar = cifar10_files(path);
    if !cifar.is_empty() {
        let mut out = Vec::new();
        for f in cifar {
            out.extend(read_cifar10_file(&f)?);
        }
        return Ok(out);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")))
        .collect();
    files.sort();
    files.iter().map(|f| read_ppm(f)).collect()
}
