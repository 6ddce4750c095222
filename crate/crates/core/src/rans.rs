//! Reference bit-granular rANS with a state confined to `[2^M, 2^(M+1))`.
//!
//! Encoding pushes low bits of the state one at a time until it falls below
//! `2 * P_x`, then maps it into symbol `x`'s slot. The trailing subtraction
//! of `2^M` and the leading addition of the next symbol are folded together,
//! so the state rests in `[2^M, 2^(M+1))` between symbols. This module is
//! deliberately literal (bit loops and a binary search); the table-driven
//! coder in [`crate::ans`] must reproduce it bit for bit.

use alloc::vec::Vec;

use crate::bits::{BitReader, BitStack};
use crate::logistic::QuantizedPmf;
use crate::{Error, Result};

/// rANS state between symbol operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoderState(pub u32);

impl CoderState {
    /// Starting state of every message, `2^M`.
    pub fn initial(precision: u32) -> Self {
        Self(1 << precision)
    }

    pub fn is_resting(self, precision: u32) -> bool {
        (1 << precision..2 << precision).contains(&self.0)
    }
}

fn check_resting(state: CoderState, precision: u32) -> Result<()> {
    if state.is_resting(precision) {
        Ok(())
    } else {
        Err(Error::StateOutOfRange(state.0))
    }
}

/// Encodes `x`, pushing `floor(log2(S / P_x))` bits.
pub fn ref_encode(
    state: &mut CoderState,
    pmf: &QuantizedPmf,
    x: usize,
    stream: &mut BitStack,
) -> Result<()> {
    let m = pmf.precision();
    check_resting(*state, m)?;
    if x >= pmf.symbols() {
        return Err(Error::IndexOutOfRange { symbol: x, dist: 0 });
    }
    let p = pmf.mass(x);
    if p == 0 || p >= 1 << (m - 1) {
        return Err(Error::InadmissibleMass {
            symbol: x,
            mass: p,
            precision: m,
        });
    }
    let mut s = state.0;
    while s >= 2 * p {
        stream.push_bit(s & 1);
        s >>= 1;
    }
    state.0 = s - p + pmf.cumulative(x) + (1 << m);
    Ok(())
}

/// Decodes one symbol, popping bits until the state is back in range.
pub fn ref_decode(
    state: &mut CoderState,
    pmf: &QuantizedPmf,
    stream: &mut BitReader<'_>,
) -> Result<usize> {
    let m = pmf.precision();
    check_resting(*state, m)?;
    let slot = state.0 - (1 << m);
    let x = pmf.symbol_at(slot);
    let mut s = slot - pmf.cumulative(x) + pmf.mass(x);
    while s < 1 << m {
        s = 2 * s + stream.pop_bit()?;
    }
    state.0 = s;
    Ok(x)
}

fn check_schedule(symbols: usize, schedule: &[usize], pmfs: &[QuantizedPmf]) -> Result<u32> {
    if schedule.len() != symbols {
        return Err(Error::Shape(alloc::format!(
            "{symbols} symbols but {} schedule entries",
            schedule.len()
        )));
    }
    let precision = pmfs
        .first()
        .map(QuantizedPmf::precision)
        .unwrap_or(crate::DEFAULT_PRECISION);
    if pmfs.iter().any(|p| p.precision() != precision) {
        return Err(Error::Configuration(
            "distributions disagree on precision".into(),
        ));
    }
    if let Some(&d) = schedule.iter().find(|&&d| d >= pmfs.len()) {
        return Err(Error::IndexOutOfRange { symbol: 0, dist: d });
    }
    Ok(precision)
}

/// Encodes a whole message, last symbol first, from `S = 2^M`.
///
/// Symbol `i` is coded with `pmfs[schedule[i]]`. Returns the final state,
/// which the decoder starts from.
pub fn ref_encode_message(
    symbols: &[u8],
    schedule: &[usize],
    pmfs: &[QuantizedPmf],
) -> Result<(CoderState, BitStack)> {
    let precision = check_schedule(symbols.len(), schedule, pmfs)?;
    let mut state = CoderState::initial(precision);
    let mut stream = BitStack::new();
    for (&x, &d) in symbols.iter().zip(schedule).rev() {
        ref_encode(&mut state, &pmfs[d], x.into(), &mut stream)?;
    }
    Ok((state, stream))
}

/// Decodes `schedule.len()` symbols in forward order and checks that the
/// decoder ends at `2^M` with every bit consumed.
pub fn ref_decode_message(
    state: CoderState,
    stream: &BitStack,
    schedule: &[usize],
    pmfs: &[QuantizedPmf],
) -> Result<Vec<u8>> {
    let precision = check_schedule(schedule.len(), schedule, pmfs)?;
    let mut state = state;
    let mut reader = stream.reader();
    let mut out = Vec::with_capacity(schedule.len());
    for &d in schedule {
        out.push(ref_decode(&mut state, &pmfs[d], &mut reader)? as u8);
    }
    if state != CoderState::initial(precision) || reader.remaining() != 0 {
        return Err(Error::CorruptStream { lane: 0 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistic::{discretized_logistic_pmf, quantize_pmf};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pmf(rng: &mut ChaCha8Rng, symbols: usize, precision: u32) -> QuantizedPmf {
        let masses: Vec<f64> = (0..symbols).map(|_| rng.gen::<f64>().powi(2)).collect();
        quantize_pmf(&masses, precision).unwrap()
    }

    #[test]
    fn inverse_pair_exhaustive_at_small_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for symbols in [3, 5, 8, 16] {
            let pmf = random_pmf(&mut rng, symbols, 6);
            for s in 64..128 {
                for x in 0..symbols {
                    let mut state = CoderState(s);
                    let mut stream = BitStack::new();
                    ref_encode(&mut state, &pmf, x, &mut stream).unwrap();
                    assert!(state.is_resting(6));
                    let pushed = stream.len();
                    let mut reader = stream.reader();
                    let got = ref_decode(&mut state, &pmf, &mut reader).unwrap();
                    assert_eq!((got, state), (x, CoderState(s)));
                    assert_eq!(reader.remaining(), 0, "popped {pushed} bits");
                }
            }
        }
    }

    #[test]
    fn uniform_byte_alphabet_pushes_eight_bits() {
        // P_x = 16 at M = 12: every S in [4096, 8192) halves floor(log2(S / 16)) = 8
        // times before dropping below 2 P_x = 32.
        let pmf = QuantizedPmf::uniform(256, 12).unwrap();
        for s in 4096..8192 {
            let mut state = CoderState(s);
            let mut stream = BitStack::new();
            ref_encode(&mut state, &pmf, (s % 256) as usize, &mut stream).unwrap();
            let expected = libm::floor(libm::log2(f64::from(s) / 16.0)) as usize;
            assert_eq!(stream.len(), expected);
            assert_eq!(stream.len(), 8);
        }
    }

    #[test]
    fn empty_and_single_messages() {
        let pmf = QuantizedPmf::uniform(256, 12).unwrap();
        let (state, stream) = ref_encode_message(&[], &[], core::slice::from_ref(&pmf)).unwrap();
        assert_eq!(state, CoderState::initial(12));
        assert!(stream.is_empty());

        let (state, stream) =
            ref_encode_message(&[200], &[0], core::slice::from_ref(&pmf)).unwrap();
        let mut single = CoderState::initial(12);
        let mut single_stream = BitStack::new();
        ref_encode(&mut single, &pmf, 200, &mut single_stream).unwrap();
        assert_eq!((state, &stream), (single, &single_stream));
    }

    #[test]
    fn message_round_trip_with_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pmfs: Vec<_> = [0.7, 3.0, 12.0, 40.0]
            .iter()
            .map(|&s| discretized_logistic_pmf(128.0, s, 12).unwrap())
            .collect();
        let schedule: Vec<usize> = (0..10_000).map(|_| rng.gen_range(0..4)).collect();
        let symbols: Vec<u8> = schedule
            .iter()
            .map(|&d| {
                let spread = [1.0, 4.0, 16.0, 60.0][d];
                (128.0 + rng.gen_range(-spread..spread)) as u8
            })
            .collect();
        let (state, stream) = ref_encode_message(&symbols, &schedule, &pmfs).unwrap();
        let decoded = ref_decode_message(state, &stream, &schedule, &pmfs).unwrap();
        assert_eq!(decoded, symbols);
    }

    #[test]
    fn underflow_and_bad_inputs() {
        let pmf = QuantizedPmf::uniform(16, 8).unwrap();
        let empty = BitStack::new();
        let mut state = CoderState(300);
        assert_eq!(
            ref_decode(&mut state, &pmf, &mut empty.reader()),
            Err(Error::StreamUnderflow)
        );
        let mut state = CoderState(10);
        assert!(matches!(
            ref_encode(&mut state, &pmf, 0, &mut BitStack::new()),
            Err(Error::StateOutOfRange(10))
        ));
        let mut state = CoderState(256);
        assert!(ref_encode(&mut state, &pmf, 16, &mut BitStack::new()).is_err());
        assert!(ref_encode_message(&[1, 2], &[0], core::slice::from_ref(&pmf)).is_err());
        assert!(ref_encode_message(&[1], &[3], core::slice::from_ref(&pmf)).is_err());
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let pmf = QuantizedPmf::uniform(16, 8).unwrap();
        let pmfs = vec![pmf];
        let (state, mut stream) = ref_encode_message(&[3, 4, 5], &[0, 0, 0], &pmfs).unwrap();
        stream.push_bit(1);
        // The extra bit sits on top of the stack and derails the decode.
        assert!(ref_decode_message(state, &stream, &[0, 0, 0], &pmfs).is_err());
    }
}
