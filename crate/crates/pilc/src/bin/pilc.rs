//! `pilc`: compress, decompress, fit, inspect and bench.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal or configuration error |
//! | 2 | usage error |
//! | 3 | I/O error |
//! | 4 | malformed, truncated or unrecognized input |
//! | 5 | corrupt coded stream |
//! | 6 | model missing, mismatched or invalid |
//! | 7 | unsupported input |

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use pilc::bench::{self, BenchConfig};
use pilc::container::CompressedImage;
use pilc::fit::{fit_corpus, residual_report};
use pilc::imageio::{encode_ppm, parse_ppm, parse_raw, read_corpus};
use pilc::model_file::{hash_hex, random_weights, MODEL_MAGIC};
use pilc::pilc_core::vqvae::{ArchConfig, ModelWeights};
use pilc::pilc_core::{RgbImage, ScaleGrid};
use pilc::{bpd_report, compress, decompress, Backend, CompressOptions, Model, PilcError};
use serde_json::json;

const USAGE_EXIT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "pilc",
    version,
    about = "Lossless image codec with a three-way autoregressive predictor and table-driven ANS"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    TwarStatic,
    TwarVqvae,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    JsonLines,
}

#[derive(clap::Args)]
struct CoderArgs {
    /// Precision exponent M: masses sum to 2^M.
    #[arg(short = 'M', default_value_t = 12)]
    precision: u32,
    /// Number of logistic scales D.
    #[arg(short = 'D', default_value_t = 8)]
    distributions: usize,
}

impl CoderArgs {
    fn grid(&self) -> Result<ScaleGrid, PilcError> {
        Ok(ScaleGrid::geometric(
            self.distributions,
            ScaleGrid::DEFAULT_MIN,
            ScaleGrid::DEFAULT_MAX,
        )?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compress a binary PPM (P6) or raw RGB8 image.
    Compress {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "twar-static")]
        backend: BackendArg,
        /// Model file (PILW); required for twar-vqvae, supplies TWAR parameters otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        coder: CoderArgs,
        #[arg(long, default_value_t = 1)]
        lanes: usize,
        /// Exhaustively check the encode tables while building them.
        #[arg(long)]
        verify_tables: bool,
        /// Embed a checksum of the per-value distribution schedule.
        #[arg(long)]
        checksum_schedule: bool,
        /// Leave out the digest of the image that guards against silent
        /// corruption (saves 8 bytes).
        #[arg(long)]
        no_digest: bool,
        /// Width of a raw RGB8 input.
        #[arg(long, requires = "height")]
        width: Option<usize>,
        /// Height of a raw RGB8 input.
        #[arg(long, requires = "width")]
        height: Option<usize>,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
    },
    /// Decompress a container to PPM (or raw RGB8 with --raw).
    Decompress {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        raw: bool,
    },
    /// Ridge-fit TWAR parameters to a corpus and write them into a model file.
    Fit {
        /// PPM files, directories of PPM files, or a CIFAR10 binary directory.
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = pilc::pilc_core::twar::DEFAULT_RIDGE)]
        ridge: f64,
        /// Existing model to update; otherwise a TWAR-only model is written.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Print the header of a container or model file as JSON.
    Inspect { input: PathBuf },
    /// Write a model with random network weights.
    InitModel {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Measure per-phase throughput; prints one JSON object per row.
    Bench {
        /// Synthetic image sizes, e.g. 512x512.
        #[arg(long, value_delimiter = ',', default_value = "512x512")]
        sizes: Vec<String>,
        /// Benchmark on a corpus instead of synthetic images.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        lanes: Vec<usize>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        coder: CoderArgs,
        /// Minimum seconds per measurement.
        #[arg(long, default_value_t = 0.3)]
        seconds: f64,
        /// Skip the slow bit-loop reference decoder.
        #[arg(long)]
        no_reference: bool,
        #[arg(long, value_enum, default_value = "json-lines")]
        report: ReportFormat,
    },
}

enum Failure {
    Usage(String),
    Codec(PilcError),
}

impl From<PilcError> for Failure {
    fn from(e: PilcError) -> Self {
        Failure::Codec(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Codec(e.into())
    }
}

fn load_model(path: Option<&Path>) -> Result<Option<Model>, Failure> {
    Ok(path.map(Model::read).transpose()?)
}

fn read_input(
    input: &Path,
    width: Option<usize>,
    height: Option<usize>,
) -> Result<RgbImage, Failure> {
    let bytes = std::fs::read(input)?;
    match (width, height) {
        (Some(w), Some(h)) => Ok(parse_raw(&bytes, w, h)?),
        _ if bytes.starts_with(b"P6") => Ok(parse_ppm(&bytes)?),
        _ => Err(Failure::Usage(
            "input is not a P6 PPM; raw RGB8 input needs --width and --height".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Compress {
            input,
            output,
            backend,
            model,
            coder,
            lanes,
            verify_tables,
            checksum_schedule,
            no_digest,
            width,
            height,
            report,
        } => {
            let backend = match backend {
                BackendArg::TwarStatic => Backend::TwarStatic,
                BackendArg::TwarVqvae => Backend::TwarVqvae,
            };
            if backend == Backend::TwarVqvae && model.is_none() {
                return Err(Failure::Usage(
                    "--backend twar-vqvae requires --model".into(),
                ));
            }
            let image = read_input(&input, width, height)?;
            let model = load_model(model.as_deref())?;
            let options = CompressOptions {
                backend,
                precision: coder.precision,
                grid: coder.grid()?,
                lanes,
                verify_tables,
                schedule_checksum: checksum_schedule,
                image_digest: !no_digest,
            };
            let start = Instant::now();
            let blob = compress(&image, model.as_ref(), &options)?;
            let seconds = start.elapsed().as_secs_f64();
            std::fs::write(&output, &blob)?;
            let bpd = bpd_report(&blob, &image);
            let mb_per_s = image.dims() as f64 / 1e6 / seconds.max(1e-12);
            match report {
                ReportFormat::Text => println!(
                    "{}x{} -> {} bytes, {bpd:.4} bpd, {mb_per_s:.1} MB/s",
                    image.width(),
                    image.height(),
                    blob.len()
                ),
                ReportFormat::JsonLines => println!(
                    "{}",
                    json!({"width": image.width(), "height": image.height(), "bytes": blob.len(), "bpd": bpd, "mb_per_s": mb_per_s})
                ),
            }
        }
        Command::Decompress {
            input,
            output,
            model,
            raw,
        } => {
            let blob = std::fs::read(&input)?;
            let model = load_model(model.as_deref())?;
            let image = decompress(&blob, model.as_ref())?;
            let bytes = if raw {
                image.into_data()
            } else {
                encode_ppm(&image)
            };
            std::fs::write(&output, bytes)?;
        }
        Command::Fit {
            corpus,
            output,
            ridge,
            model,
        } => {
            let mut images = Vec::new();
            for path in &corpus {
                images.extend(read_corpus(path)?);
            }
            if images.is_empty() {
                return Err(Failure::Codec(PilcError::Malformed(
                    "the corpus contains no images".into(),
                )));
            }
            let base = load_model(model.as_deref())?;
            let gradient = residual_report(&images, &pilc::pilc_core::TwarParams::gradient());
            let (params, fitted) = fit_corpus(&images, ridge)?;
            let mut weights = base
                .map(|m| m.weights().clone())
                .unwrap_or_else(|| ModelWeights::twar_only(ArchConfig::default(), params));
            weights.twar = params;
            let model = Model::new(weights)?;
            model.write(&output)?;
            println!(
                "{}",
                json!({
                    "images": images.len(),
                    "ridge": ridge,
                    "weights": params.weights,
                    "bias": params.bias,
                    "residual_entropy_bits": fitted.channel_entropy,
                    "red_bpd": fitted.red_bpd(),
                    "gradient_residual_entropy_bits": gradient.channel_entropy,
                    "model_hash": hash_hex(&model.hash()),
                })
            );
        }
        Command::Inspect { input } => {
            let bytes = std::fs::read(&input)?;
            if bytes.starts_with(MODEL_MAGIC) {
                let model = Model::from_bytes(&bytes)?;
                let w = model.weights();
                println!(
                    "{}",
                    json!({
                        "kind": "model",
                        "hash": hash_hex(&model.hash()),
                        "codebook_size": w.config.codebook_size,
                        "codebook_dim": w.config.codebook_dim,
                        "channels": w.config.channels,
                        "blocks": w.config.blocks,
                        "tensors": w.tensors.len(),
                        "histogram_total": w.histogram.iter().sum::<u64>(),
                        "twar_weights": w.twar.weights,
                        "twar_bias": w.twar.bias,
                    })
                );
            } else {
                let c = CompressedImage::parse(&bytes)?;
                let h = &c.header;
                println!(
                    "{}",
                    json!({
                        "kind": "container",
                        "version": h.version,
                        "width": h.width,
                        "height": h.height,
                        "backend": h.backend.name(),
                        "precision": h.precision,
                        "distributions": h.grid.len(),
                        "scales": h.grid.values(),
                        "lanes": h.lanes,
                        "model_hash": h.model_hash.as_ref().map(hash_hex),
                        "static_distribution": h.static_distribution,
                        "schedule_checksum": h.schedule_checksum.is_some(),
                        "image_digest": h.image_digest.is_some(),
                        "index_bytes": h.index_bytes,
                        "residual_bytes": h.residual_bytes,
                        "total_bytes": bytes.len(),
                        "bpd": 8.0 * bytes.len() as f64 / (h.dims() as f64),
                    })
                );
            }
        }
        Command::InitModel { output, seed } => {
            let model = Model::new(random_weights(ArchConfig::default(), seed)?)?;
            model.write(&output)?;
            println!("{}", json!({"model_hash": hash_hex(&model.hash())}));
        }
        Command::Bench {
            sizes,
            corpus,
            lanes,
            model,
            coder,
            seconds,
            no_reference,
            report,
        } => {
            let images = match corpus {
                Some(path) => read_corpus(&path)?,
                None => sizes
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let (w, h) = s
                            .split_once('x')
                            .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
                            .filter(|&(w, h)| w > 0 && h > 0)
                            .ok_or_else(|| {
                                Failure::Usage(format!("bad size {s:?}, expected WxH"))
                            })?;
                        Ok(bench::synthetic_image(w, h, i as u64))
                    })
                    .collect::<Result<_, Failure>>()?,
            };
            if lanes.contains(&0) {
                return Err(Failure::Usage("lane counts must be positive".into()));
            }
            let model = load_model(model.as_deref())?;
            let config = BenchConfig {
                precision: coder.precision,
                grid: coder.grid()?,
                lanes,
                min_seconds: seconds,
                reference: !no_reference,
            };
            for row in bench::run(&images, model.as_ref(), &config)? {
                match report {
                    ReportFormat::JsonLines => println!("{}", row.to_json()),
                    ReportFormat::Text => println!(
                        "{:<24} lanes {:>3} threads {:>3} {:>10.2} MB/s",
                        row.phase,
                        row.lanes,
                        row.threads,
                        row.mb_per_s()
                    ),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("pilc: {msg}");
            ExitCode::from(USAGE_EXIT)
        }
        Err(Failure::Codec(e)) => {
            eprintln!("pilc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
