//! Fitting TWAR parameters to a corpus and measuring the result.

use pilc_core::logistic::empirical_entropy;
use pilc_core::twar::{self, fit_params, residual_histogram};
use pilc_core::{Channel, RgbImage, TwarParams};

use crate::Result;

/// Residual statistics of a predictor over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub images: usize,
    /// Empirical entropy of each channel's pooled residual histogram, in bits.
    pub channel_entropy: [f64; 3],
}

impl ResidualReport {
    /// Theoretical BPD of coding the red residuals with a static coder.
    pub fn red_bpd(&self) -> f64 {
        self.channel_entropy[0]
    }

    /// Mean over the three channels.
    pub fn bpd(&self) -> f64 {
        self.channel_entropy.iter().sum::<f64>() / 3.0
    }
}

pub fn residual_report(images: &[RgbImage], params: &TwarParams) -> ResidualReport {
    let mut counts = [[0u64; 256]; 3];
    for image in images {
        let residual = twar::forward_residual(image, params);
        for c in Channel::ALL {
            for (total, n) in counts[c.index()]
                .iter_mut()
                .zip(residual_histogram(&residual, c))
            {
                *total += n;
            }
        }
    }
    ResidualReport {
        images: images.len(),
        channel_entropy: counts.map(|h| empirical_entropy(&h)),
    }
}

/// Ridge fit over the corpus, then the training-set residual report.
pub fn fit_corpus(images: &[RgbImage], ridge: f64) -> Result<(TwarParams, ResidualReport)> {
    let params = fit_params(images, ridge)?;
    Ok((params, residual_report(images, &params)))
}
