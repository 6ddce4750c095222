//! Discretized truncated logistic densities and their quantized PMFs.
//!
//! Residual symbols are modeled as `L(mu, s, 0, 255)`: a logistic discretized
//! into unit bins centred on `0..=255`, with the two edge bins absorbing the
//! tails. The coder only ever sees the recentred form `(t - round(mu) + 128)
//! mod 256 ~ L(128, s)`, so a distribution is selected by its scale alone.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, fabs, floor, log, log1p, round};

use crate::{Error, Result};

/// Alphabet size of residual streams.
pub const RESIDUAL_SYMBOLS: usize = 256;

const LN_2: f64 = core::f64::consts::LN_2;

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + log1p(exp(-x))
    } else {
        log1p(exp(x))
    }
}

/// `ln sigmoid(z)`.
fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

/// `ln(sigma(hi) - sigma(lo))` for `lo < hi`, either of which may be infinite.
fn log_bin_mass(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        // Both in the upper tail: sigma(-lo) - sigma(-hi).
        let a = log_sigmoid(-lo);
        let b = log_sigmoid(-hi);
        a + log1p(-exp(b - a))
    } else if hi <= 0.0 {
        let a = log_sigmoid(hi);
        let b = log_sigmoid(lo);
        a + log1p(-exp(b - a))
    } else {
        // Straddles the centre; mass is at least sigma(hi) - 1/2, no cancellation.
        let upper = if hi.is_infinite() {
            0.0
        } else {
            exp(log_sigmoid(-hi))
        };
        let lower = if lo.is_infinite() {
            0.0
        } else {
            exp(log_sigmoid(lo))
        };
        log(1.0 - upper - lower)
    }
}

fn check_location_scale(mu: f64, s: f64) -> Result<()> {
    if !mu.is_finite() || !(0.0..=255.0).contains(&mu) {
        return Err(Error::InvalidParameter(format!(
            "location {mu} outside [0, 255]"
        )));
    }
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "scale {s} must be positive and finite"
        )));
    }
    Ok(())
}

/// Natural-log masses of `L(mu, s, 0, 255)` over the 256 symbols.
pub fn logistic_log_masses(mu: f64, s: f64) -> Result<[f64; RESIDUAL_SYMBOLS]> {
    check_location_scale(mu, s)?;
    let mut out = [0.0; RESIDUAL_SYMBOLS];
    for (v, slot) in out.iter_mut().enumerate() {
        let lo = if v == 0 {
            f64::NEG_INFINITY
        } else {
            (v as f64 - 0.5 - mu) / s
        };
        let hi = if v == RESIDUAL_SYMBOLS - 1 {
            f64::INFINITY
        } else {
            (v as f64 + 0.5 - mu) / s
        };
        *slot = log_bin_mass(lo, hi);
    }
    Ok(out)
}

/// Real-valued masses of `L(mu, s, 0, 255)`; they sum to one.
pub fn logistic_masses(mu: f64, s: f64) -> Result<[f64; RESIDUAL_SYMBOLS]> {
    let mut m = logistic_log_masses(mu, s)?;
    for x in m.iter_mut() {
        *x = exp(*x);
    }
    Ok(m)
}

/// Per-symbol masses `P_x` summing to `2^M`, with cumulative sums `C_x`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantizedPmf {
    precision: u32,
    masses: Vec<u16>,
    cumulative: Vec<u16>,
}

impl QuantizedPmf {
    /// Largest supported precision exponent.
    pub const MAX_PRECISION: u32 = 15;

    /// Validates integer masses against the coder admissibility rule
    /// `1 <= P_x <= 2^(M-1) - 1` and `sum P_x = 2^M`.
    pub fn from_masses(masses: Vec<u16>, precision: u32) -> Result<Self> {
        check_precision(precision)?;
        let cap = admissible_cap(precision);
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0u32;
        for (x, &p) in masses.iter().enumerate() {
            if p == 0 || u32::from(p) > cap {
                return Err(Error::InadmissibleMass {
                    symbol: x,
                    mass: p.into(),
                    precision,
                });
            }
            cumulative.push(acc as u16);
            acc += u32::from(p);
        }
        if acc != 1 << precision {
            return Err(Error::Configuration(format!(
                "masses sum to {acc}, expected 2^{precision}"
            )));
        }
        Ok(Self {
            precision,
            masses,
            cumulative,
        })
    }

    /// Uniform PMF over `symbols` values; `symbols` must divide into `2^M`
    /// evenly or the remainder goes to the lowest symbols.
    pub fn uniform(symbols: usize, precision: u32) -> Result<Self> {
        quantize_pmf(&vec![1.0; symbols], precision)
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn total(&self) -> u32 {
        1 << self.precision
    }

    pub fn symbols(&self) -> usize {
        self.masses.len()
    }

    #[inline]
    pub fn mass(&self, x: usize) -> u32 {
        self.masses[x].into()
    }

    #[inline]
    pub fn cumulative(&self, x: usize) -> u32 {
        self.cumulative[x].into()
    }

    pub fn masses(&self) -> &[u16] {
        &self.masses
    }

    pub fn cumulatives(&self) -> &[u16] {
        &self.cumulative
    }

    /// Symbol whose interval `[C_x, C_x + P_x)` contains `slot`, by binary search.
    pub fn symbol_at(&self, slot: u32) -> usize {
        debug_assert!(slot < self.total());
        self.cumulative.partition_point(|&c| u32::from(c) <= slot) - 1
    }

    /// Probability of `x` as a real number, `P_x / 2^M`.
    pub fn probability(&self, x: usize) -> f64 {
        f64::from(self.mass(x)) / f64::from(self.total())
    }

    /// Entropy `H_q` of the quantized distribution, in bits.
    pub fn entropy_bits(&self) -> f64 {
        (0..self.symbols())
            .map(|x| {
                let p = self.probability(x);
                -p * log(p) / LN_2
            })
            .sum()
    }

    /// Ideal code length of `x`, `-log2(P_x / 2^M)`.
    pub fn code_length_bits(&self, x: usize) -> f64 {
        f64::from(self.precision) - log(f64::from(self.mass(x))) / LN_2
    }
}

fn check_precision(precision: u32) -> Result<()> {
    if !(2..=QuantizedPmf::MAX_PRECISION).contains(&precision) {
        return Err(Error::Configuration(format!(
            "precision {precision} outside [2, {}]",
            QuantizedPmf::MAX_PRECISION
        )));
    }
    Ok(())
}

/// Largest admissible mass, `2^(M-1) - 1`.
pub fn admissible_cap(precision: u32) -> u32 {
    (1 << (precision - 1)) - 1
}

/// Quantizes real masses to integers summing to exactly `2^M`.
///
/// Every symbol first receives one unit; the remaining `2^M - X` units are
/// apportioned by largest remainder (ties to the smaller symbol). Any mass
/// above `2^(M-1) - 1` is then clamped and the excess spread over the
/// unclamped symbols in proportion to their current masses, again by largest
/// remainder with ties to the smaller symbol, until no mass exceeds the cap.
pub fn quantize_pmf(real_masses: &[f64], precision: u32) -> Result<QuantizedPmf> {
    check_precision(precision)?;
    let n = real_masses.len();
    let total = 1u64 << precision;
    let cap = u64::from(admissible_cap(precision));
    if n < 3 || n as u64 > total / 2 {
        return Err(Error::Configuration(format!(
            "an alphabet of {n} symbols cannot be quantized admissibly at precision {precision}"
        )));
    }
    if real_masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::InvalidParameter(
            "masses must be finite and nonnegative".into(),
        ));
    }
    let sum: f64 = real_masses.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::InvalidParameter(format!("masses sum to {sum}")));
    }

    let spare = total - n as u64;
    let scaled: Vec<f64> = real_masses.iter().map(|m| m / sum * spare as f64).collect();
    let mut p: Vec<u64> = scaled
        .iter()
        .map(|q| (floor(*q) as u64).min(spare))
        .collect();
    let mut assigned: u64 = p.iter().sum();
    while assigned > spare {
        // Only reachable through rounding in the scale step.
        let i = (0..n)
            .max_by_key(|&i| (p[i], core::cmp::Reverse(i)))
            .unwrap();
        p[i] -= 1;
        assigned -= 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - floor(scaled[a]);
        let rb = scaled[b] - floor(scaled[b]);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take((spare - assigned) as usize) {
        p[i] += 1;
    }
    for m in p.iter_mut() {
        *m += 1;
    }

    loop {
        let mut excess = 0u64;
        for m in p.iter_mut() {
            if *m > cap {
                excess += *m - cap;
                *m = cap;
            }
        }
        if excess == 0 {
            break;
        }
        let recipients: Vec<usize> = (0..n).filter(|&i| p[i] < cap).collect();
        let weight: u64 = recipients.iter().map(|&i| p[i]).sum();
        if weight == 0 {
            return Err(Error::Configuration(
                "no room to redistribute clamped mass".into(),
            ));
        }
        let mut given = 0u64;
        let mut rems = Vec::with_capacity(recipients.len());
        for &i in &recipients {
            let share = excess * p[i];
            given += share / weight;
            rems.push((share % weight, i));
        }
        for &i in &recipients {
            p[i] += excess * p[i] / weight;
        }
        rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in rems.iter().take((excess - given) as usize) {
            p[i] += 1;
        }
    }

    QuantizedPmf::from_masses(p.into_iter().map(|m| m as u16).collect(), precision)
}

/// Quantized PMF of `L(mu, s, 0, 255)` at precision `M`.
pub fn discretized_logistic_pmf(mu: f64, s: f64, precision: u32) -> Result<QuantizedPmf> {
    let masses = logistic_masses(mu, s)?;
    quantize_pmf(&masses, precision)
}

/// Rounds half away from zero and clamps into the 8-bit range.
fn location_shift(mu: f64) -> u8 {
    round(mu.clamp(0.0, 255.0)) as u8
}

/// Recentres a residual symbol on its predicted location.
///
/// Returns `((t - shift + 128) mod 256, shift)` with `shift = round(mu)`.
pub fn recentre_symbol(t: u8, mu: f64) -> (u8, u8) {
    let shift = location_shift(mu);
    (recentre_with_shift(t, shift), shift)
}

#[inline]
pub fn recentre_with_shift(t: u8, shift: u8) -> u8 {
    t.wrapping_sub(shift).wrapping_add(128)
}

/// Inverse of [`recentre_symbol`].
#[inline]
pub fn unrecentre_symbol(coded: u8, shift: u8) -> u8 {
    coded.wrapping_add(shift).wrapping_sub(128)
}

/// Geometric grid of logistic scales; index `d` selects a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    values: Vec<f64>,
    log_values: Vec<f64>,
}

impl Default for ScaleGrid {
    fn default() -> Self {
        Self::geometric(Self::DEFAULT_COUNT, Self::DEFAULT_MIN, Self::DEFAULT_MAX)
            .expect("default grid is valid")
    }
}

impl ScaleGrid {
    pub const DEFAULT_COUNT: usize = 8;
    pub const DEFAULT_MIN: f64 = 0.5;
    pub const DEFAULT_MAX: f64 = 64.0;

    /// `count` scales spaced geometrically over `[min, max]`.
    pub fn geometric(count: usize, min: f64, max: f64) -> Result<Self> {
        if count == 0 || count > usize::from(u16::MAX) {
            return Err(Error::Configuration(format!("distribution count {count}")));
        }
        if !(min > 0.0 && max.is_finite() && (max > min || (count == 1 && max >= min))) {
            return Err(Error::InvalidParameter(format!(
                "scale span [{min}, {max}]"
            )));
        }
        let values = if count == 1 {
            vec![min]
        } else {
            let step = (log(max) - log(min)) / (count - 1) as f64;
            (0..count)
                .map(|d| {
                    if d + 1 == count {
                        max
                    } else {
                        exp(log(min) + step * d as f64)
                    }
                })
                .collect()
        };
        Self::from_values(values)
    }

    /// Checks positivity, strict increase and geometric spacing (successive
    /// ratios equal within 1e-9).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() > usize::from(u16::MAX) {
            return Err(Error::Configuration(format!(
                "distribution count {}",
                values.len()
            )));
        }
        if values.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidParameter(
                "scales must be positive and finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "scales must be strictly increasing".into(),
            ));
        }
        if values.len() > 2 {
            let first = values[1] / values[0];
            if values
                .windows(2)
                .any(|w| fabs(w[1] / w[0] - first) > 1e-9 * first)
            {
                return Err(Error::InvalidParameter(
                    "scales are not geometrically spaced".into(),
                ));
            }
        }
        let log_values = values.iter().map(|s| log(*s)).collect();
        Ok(Self { values, log_values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Nearest grid scale to `s` in log space; ties go to the smaller index
    /// and values outside the span clamp to the ends.
    pub fn index_of(&self, s: f64) -> usize {
        let ls = log(s);
        let mut best = 0;
        let mut best_dist = fabs(ls - self.log_values[0]);
        for (d, lv) in self.log_values.iter().enumerate().skip(1) {
            let dist = fabs(ls - lv);
            if dist < best_dist {
                best = d;
                best_dist = dist;
            }
        }
        best
    }

    /// `D` as little-endian u16, then `D` little-endian f64 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + 8 * self.len());
        out.extend_from_slice(&(self.len() as u16).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the serialized grid; returns it with the bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let count = bytes
            .get(..2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]) as usize)
            .ok_or_else(|| Error::Malformed("truncated scale grid".into()))?;
        let end = 2 + 8 * count;
        let body = bytes
            .get(2..end)
            .ok_or_else(|| Error::Malformed("truncated scale grid".into()))?;
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((Self::from_values(values)?, end))
    }

    /// Quantized `L(128, s_d)` for every grid scale.
    pub fn pmfs(&self, precision: u32) -> Result<Vec<QuantizedPmf>> {
        self.values
            .iter()
            .map(|&s| discretized_logistic_pmf(128.0, s, precision))
            .collect()
    }
}

/// Grid index for scale `s`; see [`ScaleGrid::index_of`].
pub fn scale_to_distribution(s: f64, grid: &ScaleGrid) -> usize {
    grid.index_of(s)
}

/// KL divergence, in bits, between the true `L(mu, s, 0, 255)` and its
/// recentred approximation `(t - round(mu) + 128) mod 256 ~ L(128, s)`.
///
/// This is the per-symbol cost of coding with a location-free distribution.
pub fn recentring_kl(mu: f64, s: f64) -> Result<f64> {
    let truth = logistic_log_masses(mu, s)?;
    let centred = logistic_log_masses(128.0, s)?;
    let shift = location_shift(mu);
    let mut kl = 0.0;
    for t in 0..RESIDUAL_SYMBOLS {
        let lp = truth[t];
        let lq = centred[recentre_with_shift(t as u8, shift) as usize];
        let p = exp(lp);
        if p > 0.0 {
            kl += p * (lp - lq);
        }
    }
    Ok(kl.max(0.0) / LN_2)
}

/// Measured and ideal code lengths of a symbol sequence under one PMF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeLengthReport {
    pub symbols: usize,
    /// `sum -log2(P_x / 2^M)` over the sequence.
    pub total_bits: f64,
    pub bits_per_symbol: f64,
    /// Present when a true distribution was supplied.
    pub decomposition: Option<CrossEntropy>,
}

/// `L = H(P) + KL(P || Q)`, all in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub cross_entropy: f64,
    pub entropy: f64,
    pub kl: f64,
}

/// Cross-entropy of coding a source `truth` with `pmf`, computed directly
/// and decomposed into entropy plus divergence.
pub fn cross_entropy(truth: &[f64], pmf: &QuantizedPmf) -> Result<CrossEntropy> {
    if truth.len() != pmf.symbols() {
        return Err(Error::Shape(format!(
            "true distribution has {} symbols, pmf has {}",
            truth.len(),
            pmf.symbols()
        )));
    }
    let (mut cross, mut entropy, mut kl) = (0.0, 0.0, 0.0);
    for (x, &p) in truth.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let q = pmf.probability(x);
        cross -= p * log(q);
        entropy -= p * log(p);
        kl += p * log(p / q);
    }
    Ok(CrossEntropy {
        cross_entropy: cross / LN_2,
        entropy: entropy / LN_2,
        kl: kl / LN_2,
    })
}

pub fn codelength_report(
    pmf: &QuantizedPmf,
    symbols: &[u8],
    truth: Option<&[f64]>,
) -> Result<CodeLengthReport> {
    let mut total_bits = 0.0;
    for &x in symbols {
        let x = usize::from(x);
        if x >= pmf.symbols() {
            return Err(Error::IndexOutOfRange { symbol: x, dist: 0 });
        }
        total_bits += pmf.code_length_bits(x);
    }
    let decomposition = truth.map(|t| cross_entropy(t, pmf)).transpose()?;
    Ok(CodeLengthReport {
        symbols: symbols.len(),
        total_bits,
        bits_per_symbol: if symbols.is_empty() {
            0.0
        } else {
            total_bits / symbols.len() as f64
        },
        decomposition,
    })
}

/// Empirical entropy of a byte histogram, bits per symbol.
pub fn empirical_entropy(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * log(p) / LN_2
        })
        .sum()
}

/// Logistic scale matching a mean absolute deviation, `s = MAD / ln 4`.
pub fn scale_from_mad(mad: f64) -> f64 {
    mad / (2.0 * LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_admissible(pmf: &QuantizedPmf) {
        let m = pmf.precision();
        assert_eq!(
            pmf.masses().iter().map(|&p| u32::from(p)).sum::<u32>(),
            1 << m
        );
        assert_eq!(pmf.cumulative(0), 0);
        for x in 0..pmf.symbols() {
            assert!(pmf.mass(x) >= 1 && pmf.mass(x) <= admissible_cap(m));
            if x > 0 {
                assert_eq!(pmf.cumulative(x), pmf.cumulative(x - 1) + pmf.mass(x - 1));
            }
        }
    }

    #[test]
    fn uniform_masses_divide_exactly() {
        let pmf = quantize_pmf(&[1.0; 256], 12).unwrap();
        assert!(pmf.masses().iter().all(|&p| p == 16));
    }

    #[test]
    fn two_symbol_alphabet_cannot_meet_the_cap() {
        // 2 * (2^11 - 1) < 2^12, so no admissible quantization exists.
        assert!(matches!(
            quantize_pmf(&[3.0, 1.0], 12),
            Err(Error::Configuration(_))
        ));
        assert!(matches!(
            quantize_pmf(&[1.0; 513], 10),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn clamped_excess_goes_to_the_others() {
        // Reserve one unit each, apportion 4093: (3069.75, 511.625, 511.625) ->
        // (3070, 512, 511) after largest remainder with the tie to symbol 1,
        // plus one each; clamping 3071 to 2047 frees 1024 split 513/512 by weight.
        let pmf = quantize_pmf(&[6.0, 1.0, 1.0], 12).unwrap();
        assert_eq!(pmf.masses(), &[2047, 1025, 1024]);
    }

    #[test]
    fn point_mass_is_clamped_and_spread() {
        let pmf = discretized_logistic_pmf(128.0, 1e-4, 12).unwrap();
        assert_admissible(&pmf);
        assert_eq!(pmf.mass(128), 2047);
        // 1794 excess units over 255 unit symbols: 7 each, 9 left for the lowest indices.
        assert_eq!(pmf.mass(0), 9);
        assert_eq!(pmf.mass(8), 9);
        assert_eq!(pmf.mass(9), 8);
        assert_eq!(pmf.mass(255), 8);
    }

    #[test]
    fn centred_pmf_is_nearly_symmetric() {
        for s in [0.5, 2.0, 8.0, 30.0, 64.0] {
            let pmf = discretized_logistic_pmf(128.0, s, 12).unwrap();
            assert_admissible(&pmf);
            // Bin 255 absorbs the upper tail while the lower tail is split over
            // bins 0 and 1, so the comparison stops short of the edges.
            for k in 1..=126 {
                let a = pmf.mass(128 + k) as i64;
                let b = pmf.mass(128 - k) as i64;
                assert!((a - b).abs() <= 1, "s={s} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn centre_mass_at_scale_eight() {
        // Frozen from a 50-digit evaluation of the bin CDF differences fed to
        // the reserve-one largest-remainder quantizer.
        let pmf = discretized_logistic_pmf(128.0, 8.0, 12).unwrap();
        assert_eq!(pmf.mass(128), 121);
        assert_eq!(pmf.mass(127), 121);
        assert_eq!(pmf.mass(136), 95);
    }

    #[test]
    fn masses_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mu = rng.gen_range(0.0..=255.0);
            let s = libm::exp(rng.gen_range(-9.0..6.0));
            let m = logistic_masses(mu, s).unwrap();
            let total: f64 = m.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "mu={mu} s={s} total={total}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(discretized_logistic_pmf(128.0, 0.0, 12).is_err());
        assert!(discretized_logistic_pmf(128.0, -1.0, 12).is_err());
        assert!(discretized_logistic_pmf(f64::NAN, 1.0, 12).is_err());
        assert!(discretized_logistic_pmf(300.0, 1.0, 12).is_err());
        assert!(quantize_pmf(&[0.0; 16], 8).is_err());
        assert!(quantize_pmf(&[1.0, f64::INFINITY, 1.0], 8).is_err());
    }

    /// Independent apportionment check: each symbol's mass minus the reserved
    /// unit is the floor or floor+1 of its exact share, and the symbols that got
    /// the extra unit have remainders no smaller than those that did not.
    fn check_largest_remainder(masses: &[f64], pmf: &QuantizedPmf) {
        let n = masses.len();
        let spare = f64::from(pmf.total()) - n as f64;
        let sum: f64 = masses.iter().sum();
        let mut bumped = Vec::new();
        let mut plain = Vec::new();
        for x in 0..n {
            let share = masses[x] / sum * spare;
            let base = libm::floor(share) as u32;
            let got = pmf.mass(x) - 1;
            assert!(
                got == base || got == base + 1,
                "symbol {x}: share {share}, got {got}"
            );
            let rem = share - libm::floor(share);
            if got == base + 1 {
                bumped.push((rem, x))
            } else {
                plain.push((rem, x))
            }
        }
        for &(rb, xb) in &bumped {
            for &(rp, xp) in &plain {
                assert!(
                    rb > rp || (rb == rp && xb < xp),
                    "{xb} ({rb}) bumped over {xp} ({rp})"
                );
            }
        }
    }

    #[test]
    fn random_masses_match_largest_remainder_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let masses: Vec<f64> = (0..256).map(|_| rng.gen::<f64>()).collect();
            let pmf = quantize_pmf(&masses, 10).unwrap();
            assert_admissible(&pmf);
            check_largest_remainder(&masses, &pmf);
        }
    }

    #[test]
    fn recentring_examples() {
        assert_eq!(recentre_symbol(130, 130.2), (128, 130));
        assert_eq!(recentre_symbol(0, 255.0), (129, 255));
        assert_eq!(recentre_symbol(7, 127.5).1, 128);
        assert_eq!(recentre_symbol(7, 126.5).1, 127);
    }

    #[test]
    fn recentring_is_invertible_exhaustively() {
        for t in 0..=255u8 {
            for shift in 0..=255u8 {
                let (coded, sh) = recentre_symbol(t, f64::from(shift));
                assert_eq!(sh, shift);
                assert_eq!(unrecentre_symbol(coded, sh), t);
            }
        }
    }

    #[test]
    fn grid_lookup() {
        let grid = ScaleGrid::default();
        assert_eq!(grid.len(), 8);
        assert_eq!(grid.min(), 0.5);
        assert_eq!(grid.max(), 64.0);
        for (d, &s) in grid.values().iter().enumerate() {
            assert_eq!(scale_to_distribution(s, &grid), d);
        }
        assert_eq!(scale_to_distribution(0.01, &grid), 0);
        assert_eq!(scale_to_distribution(1e6, &grid), 7);
        let v = grid.values();
        let mid = libm::sqrt(v[2] * v[3]);
        // Oracle: explicit log-distance comparison with ties to the lower index.
        let d2 = fabs(log(mid) - log(v[2]));
        let d3 = fabs(log(mid) - log(v[3]));
        let expected = if d2 <= d3 { 2 } else { 3 };
        assert_eq!(scale_to_distribution(mid, &grid), expected);
        // ln 2 sits exactly halfway between ln 1 and ln 4.
        let pair = ScaleGrid::from_values(vec![1.0, 4.0]).unwrap();
        assert_eq!(fabs(log(2.0) - log(1.0)), fabs(log(4.0) - log(2.0)));
        assert_eq!(pair.index_of(2.0), 0);
    }

    #[test]
    fn grid_validation_and_bytes() {
        assert!(ScaleGrid::from_values(vec![1.0, 2.0, 3.0]).is_err());
        assert!(ScaleGrid::from_values(vec![2.0, 1.0]).is_err());
        assert!(ScaleGrid::from_values(vec![]).is_err());
        let grid = ScaleGrid::geometric(5, 0.25, 4.0).unwrap();
        let bytes = grid.to_bytes();
        assert_eq!(bytes.len(), 2 + 40);
        let (back, used) = ScaleGrid::from_bytes(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(back, grid);
        assert!(ScaleGrid::from_bytes(&bytes[..20]).is_err());
    }

    #[test]
    fn kl_vanishes_at_the_centre() {
        for &s in ScaleGrid::default().values() {
            assert_eq!(recentring_kl(128.0, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn uniform_code_length() {
        let pmf = QuantizedPmf::uniform(256, 12).unwrap();
        let report = codelength_report(&pmf, &[0, 17, 255, 128], None).unwrap();
        assert_eq!(report.bits_per_symbol, 8.0);
        assert_eq!(report.total_bits, 32.0);
    }

    #[test]
    fn cross_entropy_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q: Vec<f64> = (0..64).map(|_| rng.gen::<f64>()).collect();
        let pmf = quantize_pmf(&q, 12).unwrap();
        let mut p: Vec<f64> = (0..64).map(|_| rng.gen::<f64>().powi(3)).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= z);
        let ce = cross_entropy(&p, &pmf).unwrap();
        assert!((ce.cross_entropy - (ce.entropy + ce.kl)).abs() < 1e-9);
        assert!(ce.kl > 0.0);
    }

    #[test]
    fn scale_from_mad_inverts_the_logistic_relation() {
        // For a logistic, E|X - mu| = s * ln 4.
        assert!((scale_from_mad(4.0 * LN_2 * 2.0) - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn quantized_logistics_are_admissible(mu in 0.0f64..=255.0, ls in -6.0f64..5.0, m in 10u32..=12) {
            let pmf = discretized_logistic_pmf(mu, libm::exp(ls), m).unwrap();
            assert_admissible(&pmf);
        }

        #[test]
        fn kl_is_nonnegative_and_finite(mu in 0.0f64..=255.0, ls in -1.0f64..4.2) {
            let kl = recentring_kl(mu, libm::exp(ls)).unwrap();
            prop_assert!(kl >= 0.0 && kl.is_finite());
        }
    }
}
