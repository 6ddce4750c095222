//! Throughput measurements behind `pilc bench`.
//!
//! Each row reports one pipeline phase at one lane/thread count, in MB/s of
//! image bytes (three bytes per pixel).

use std::time::Instant;

use pilc_core::ans::{
    build_tables, interleaved_decode, interleaved_decode_serial, interleaved_encode,
    DistributionSet,
};
use pilc_core::rans::{ref_decode_message, ref_encode_message};
use pilc_core::{twar, vqvae, RgbImage, ScaleGrid, TwarParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::container::static_scale;
use crate::{Model, PilcError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub phase: &'static str,
    pub lanes: usize,
    pub threads: usize,
    pub bytes: usize,
    pub seconds: f64,
}

impl BenchRow {
    pub fn mb_per_s(&self) -> f64 {
        self.bytes as f64 / 1e6 / self.seconds.max(1e-12)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "phase": self.phase,
            "lanes": self.lanes,
            "threads": self.threads,
            "bytes": self.bytes,
            "seconds": self.seconds,
            "mb_per_s": self.mb_per_s(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub precision: u32,
    pub grid: ScaleGrid,
    pub lanes: Vec<usize>,
    /// Minimum wall time per measurement; short phases are repeated.
    pub min_seconds: f64,
    /// Include the bit-loop reference decoder (slow).
    pub reference: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            precision: pilc_core::DEFAULT_PRECISION,
            grid: ScaleGrid::default(),
            lanes: vec![1, 2, 4, 8],
            min_seconds: 0.2,
            reference: true,
        }
    }
}

/// Smooth synthetic content: a random plane plus noise, so residuals look
/// like those of natural images rather than uniform bytes.
pub fn synthetic_image(width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let base: f64 = rng.gen_range(64.0..192.0);
    RgbImage::from_fn(width, height, |u, v, c| {
        let noise: f64 = rng.gen_range(-6.0..6.0);
        (base + a * u as f64 + b * v as f64 + 10.0 * c.index() as f64 + noise).rem_euclid(256.0)
            as u8
    })
    .unwrap()
}

/// Runs `f` until `min_seconds` have passed; returns the fastest run, in
/// seconds, which is the least disturbed by other load on the machine.
fn fastest<T>(min_seconds: f64, mut f: impl FnMut() -> T) -> f64 {
    let start = Instant::now();
    let mut best = f64::INFINITY;
    loop {
        let run = Instant::now();
        std::hint::black_box(f());
        best = best.min(run.elapsed().as_secs_f64());
        if start.elapsed().as_secs_f64() >= min_seconds {
            return best;
        }
    }
}

/// Runs `f` until `min_seconds` have passed; returns seconds per run.
fn time<T>(min_seconds: f64, mut f: impl FnMut() -> T) -> f64 {
    let start = Instant::now();
    let mut runs = 0u32;
    loop {
        std::hint::black_box(f());
        runs += 1;
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= min_seconds {
            return elapsed / f64::from(runs);
        }
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PilcError::Unsupported(format!("thread pool: {e}")))
}

/// Per-symbol distributions of the static backend, for coder benchmarks.
fn static_schedule(images: &[RgbImage], grid: &ScaleGrid) -> (Vec<u8>, Vec<usize>) {
    let mut symbols = Vec::new();
    let mut schedule = Vec::new();
    for image in images {
        let residual = twar::forward_residual(image, &TwarParams::gradient());
        let d = grid.index_of(static_scale(&residual).max(grid.min()));
        symbols.extend_from_slice(residual.data());
        schedule.extend(std::iter::repeat_n(d, residual.data().len()));
    }
    (symbols, schedule)
}

pub fn run(
    images: &[RgbImage],
    model: Option<&Model>,
    config: &BenchConfig,
) -> Result<Vec<BenchRow>> {
    let bytes: usize = images.iter().map(RgbImage::dims).sum();
    let mut rows = Vec::new();
    let set = DistributionSet::from_grid(&config.grid, config.precision)?;
    let tables = build_tables(&set, false)?;
    let (symbols, schedule) = static_schedule(images, &config.grid);
    let residuals: Vec<_> = images
        .iter()
        .map(|i| twar::forward_residual(i, &TwarParams::gradient()))
        .collect();

    for &lanes in &config.lanes {
        let threads = lanes;
        let pool = pool(threads)?;
        let encoded = interleaved_encode(&tables.encode, &symbols, &schedule, lanes)?;
        let seconds = pool.install(|| {
            time(config.min_seconds, || {
                interleaved_encode(&tables.encode, &symbols, &schedule, lanes)
            })
        });
        rows.push(BenchRow {
            phase: "coder_encode",
            lanes,
            threads,
            bytes,
            seconds,
        });
        let seconds = pool.install(|| {
            time(config.min_seconds, || {
                interleaved_decode(&tables.decode, &encoded, lanes, &schedule)
            })
        });
        rows.push(BenchRow {
            phase: "coder_decode",
            lanes,
            threads,
            bytes,
            seconds,
        });
        let seconds = time(config.min_seconds, || {
            interleaved_decode_serial(&tables.decode, &encoded, lanes, &schedule)
        });
        rows.push(BenchRow {
            phase: "coder_decode_one_thread",
            lanes,
            threads: 1,
            bytes,
            seconds,
        });
        let seconds = pool.install(|| {
            time(config.min_seconds, || {
                residuals
                    .iter()
                    .map(|r| twar::decode_parallel(r, &TwarParams::gradient()))
                    .count()
            })
        });
        rows.push(BenchRow {
            phase: "ar_decode",
            lanes,
            threads,
            bytes,
            seconds,
        });
    }

    let seconds = time(config.min_seconds, || {
        residuals
            .iter()
            .map(|r| twar::decode_sequential(r, &TwarParams::gradient()))
            .count()
    });
    rows.push(BenchRow {
        phase: "ar_decode_sequential",
        lanes: 1,
        threads: 1,
        bytes,
        seconds,
    });

    if config.reference {
        let pmfs = set.pmfs().to_vec();
        let (state, stream) = ref_encode_message(&symbols, &schedule, &pmfs)?;
        let seconds = time(config.min_seconds, || {
            ref_decode_message(state, &stream, &schedule, &pmfs)
        });
        rows.push(BenchRow {
            phase: "ref_decode",
            lanes: 1,
            threads: 1,
            bytes,
            seconds,
        });
    }

    if let Some(weights) = model.map(Model::weights).filter(|w| w.has_network()) {
        let seconds = time(config.min_seconds, || -> Result<()> {
            for image in images {
                let indices = vqvae::encode_to_indices(image, weights)?;
                vqvae::decode_to_params(
                    &indices,
                    weights,
                    image.height(),
                    image.width(),
                    &config.grid,
                )?;
            }
            Ok(())
        });
        rows.push(BenchRow {
            phase: "model_inference",
            lanes: 1,
            threads: 1,
            bytes,
            seconds,
        });
    }
    Ok(rows)
}

/// Fastest reference and table-driven decode times on one thread for the same
/// `lanes`-way encoding of a message, in seconds per run. The reference
/// decodes each lane's stream in turn.
pub fn decode_speed_ratio(
    symbols: &[u8],
    schedule: &[usize],
    lanes: usize,
    precision: u32,
    grid: &ScaleGrid,
    min_seconds: f64,
) -> Result<(f64, f64)> {
    let set = DistributionSet::from_grid(grid, precision)?;
    let tables = build_tables(&set, false)?;
    let pmfs = set.pmfs().to_vec();
    let encoded = interleaved_encode(&tables.encode, symbols, schedule, lanes)?;
    let lane_schedules: Vec<Vec<usize>> = (0..lanes)
        .map(|j| schedule.iter().skip(j).step_by(lanes).copied().collect())
        .collect();
    let reference = fastest(min_seconds, || -> Result<()> {
        for (lane, lane_schedule) in encoded.lanes.iter().zip(&lane_schedules) {
            std::hint::black_box(ref_decode_message(
                lane.state,
                &lane.stream,
                lane_schedule,
                &pmfs,
            )?);
        }
        Ok(())
    });
    let fast = fastest(min_seconds, || {
        interleaved_decode_serial(&tables.decode, &encoded, lanes, schedule)
    });
    Ok((reference, fast))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_have_the_expected_shape() {
        let images = vec![synthetic_image(16, 8, 1), synthetic_image(5, 3, 2)];
        let config = BenchConfig {
            lanes: vec![1, 2],
            min_seconds: 0.0,
            ..BenchConfig::default()
        };
        let rows = run(&images, None, &config).unwrap();
        let phases: Vec<_> = rows.iter().map(|r| r.phase).collect();
        assert_eq!(phases.iter().filter(|&&p| p == "coder_decode").count(), 2);
        assert!(phases.contains(&"ref_decode"));
        for row in &rows {
            let v = row.to_json();
            assert!(v["mb_per_s"].as_f64().unwrap() > 0.0);
            assert_eq!(v["bytes"], 16 * 8 * 3 + 5 * 3 * 3);
        }
    }
}
