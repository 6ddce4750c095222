//! Semi-dynamic table-driven ANS.
//!
//! A [`DistributionSet`] holds `D` quantized PMFs over the same alphabet.
//! From it we precompute, per `(d, x)`, a bit-count selector `delta` and a
//! merged state update `phi`, so that encoding is
//!
//! ```text
//! b = (delta[d, x] + S) >> M
//! push low b bits of S
//! S = (S >> b) + phi[d, x]
//! ```
//!
//! and, per `(d, S)`, the decoded symbol, the number of bits to pop and the
//! merged next state, so that decoding is two table reads, one pop and one
//! add. Both directions are bit-identical to [`crate::rans`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bits::{window_pop, BitReader, BitStack, WindowReader};
use crate::logistic::{QuantizedPmf, ScaleGrid};
use crate::rans::CoderState;
use crate::{Error, Result, MAX_TABLE_PRECISION};

/// `D` quantized PMFs sharing a precision and an alphabet of at most 256 symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionSet {
    precision: u32,
    symbols: usize,
    pmfs: Vec<QuantizedPmf>,
}

impl DistributionSet {
    pub fn new(pmfs: Vec<QuantizedPmf>) -> Result<Self> {
        let first = pmfs
            .first()
            .ok_or_else(|| Error::Configuration("empty distribution set".into()))?;
        let (precision, symbols) = (first.precision(), first.symbols());
        if symbols > 256 {
            return Err(Error::Configuration(format!(
                "alphabet of {symbols} exceeds 256"
            )));
        }
        if pmfs
            .iter()
            .any(|p| p.precision() != precision || p.symbols() != symbols)
        {
            return Err(Error::Configuration(
                "distributions disagree on precision or alphabet".into(),
            ));
        }
        Ok(Self {
            precision,
            symbols,
            pmfs,
        })
    }

    /// Centred logistics `L(128, s_d)` for every scale in the grid.
    pub fn from_grid(grid: &ScaleGrid, precision: u32) -> Result<Self> {
        Self::new(grid.pmfs(precision)?)
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn len(&self) -> usize {
        self.pmfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmfs.is_empty()
    }

    pub fn pmfs(&self) -> &[QuantizedPmf] {
        &self.pmfs
    }

    pub fn pmf(&self, d: usize) -> &QuantizedPmf {
        &self.pmfs[d]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[repr(C)]
struct EncodeEntry {
    delta: u16,
    phi: u16,
}

/// `delta` and `phi`, `D x X` entries of two u16 each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeTables {
    precision: u32,
    dists: usize,
    symbols: usize,
    entries: Vec<EncodeEntry>,
}

impl EncodeTables {
    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn dists(&self) -> usize {
        self.dists
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn delta(&self, d: usize, x: usize) -> u16 {
        self.entries[d * self.symbols + x].delta
    }

    pub fn phi(&self, d: usize, x: usize) -> u16 {
        self.entries[d * self.symbols + x].phi
    }

    /// Always `4 * D * X`.
    pub fn footprint_bytes(&self) -> usize {
        self.entries.len() * core::mem::size_of::<EncodeEntry>()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[repr(C)]
struct DecodeEntry {
    symbol: u8,
    bits: u8,
    next: u16,
}

/// Per `(d, S - 2^M)`: decoded symbol, bits to pop and the merged next
/// state, four bytes per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeTables {
    precision: u32,
    dists: usize,
    entries: Vec<DecodeEntry>,
}

impl DecodeTables {
    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn dists(&self) -> usize {
        self.dists
    }

    fn cell(&self, d: usize, state: u32) -> DecodeEntry {
        self.entries[(d << self.precision) | (state as usize - (1 << self.precision))]
    }

    /// Symbol decoded from `state` under distribution `d`.
    pub fn theta(&self, d: usize, state: u32) -> u8 {
        self.cell(d, state).symbol
    }

    /// Bits popped when decoding from `state`.
    pub fn pop_bits(&self, d: usize, state: u32) -> u8 {
        self.cell(d, state).bits
    }

    /// State before the popped bits are appended.
    pub fn next(&self, d: usize, state: u32) -> u16 {
        self.cell(d, state).next
    }

    /// Always `D * 2^(M+2)`.
    pub fn footprint_bytes(&self) -> usize {
        self.entries.len() * core::mem::size_of::<DecodeEntry>()
    }
}

/// Encode and decode tables built from one [`DistributionSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoderTables {
    pub encode: EncodeTables,
    pub decode: DecodeTables,
}

impl CoderTables {
    pub fn build(set: &DistributionSet) -> Result<Self> {
        build_tables(set, false)
    }

    pub fn precision(&self) -> u32 {
        self.encode.precision
    }
}

/// Builds both table sets.
///
/// `delta[d, x] = k * 2^M - P_x * 2^k` where `P_x * 2^k` lies in
/// `[2^M, 2^(M+1))`; `phi[d, x] = 2^M - P_x + C_x`. With `verify` set, every
/// encode cell is checked over all resting states to satisfy
/// `S >> ((delta + S) >> M)` in `[P_x, 2 P_x)`.
pub fn build_tables(set: &DistributionSet, verify: bool) -> Result<CoderTables> {
    let m = set.precision();
    if m > MAX_TABLE_PRECISION {
        return Err(Error::Representability(format!(
            "precision {m} exceeds {MAX_TABLE_PRECISION}; delta no longer fits in 16 bits"
        )));
    }
    let total = 1u32 << m;
    let x_count = set.symbols();
    let mut enc = Vec::with_capacity(set.len() * x_count);
    let mut dec = vec![DecodeEntry::default(); set.len() << m];

    for (d, pmf) in set.pmfs().iter().enumerate() {
        for x in 0..x_count {
            let p = pmf.mass(x);
            let c = pmf.cumulative(x);
            if p == 0 || p >= total / 2 {
                return Err(Error::InadmissibleMass {
                    symbol: x,
                    mass: p,
                    precision: m,
                });
            }
            let k = m - p.ilog2();
            let delta = k * total - (p << k);
            let phi = total - p + c;
            let delta = u16::try_from(delta)
                .map_err(|_| Error::Representability(format!("delta[{d}, {x}] = {delta}")))?;
            let phi = u16::try_from(phi)
                .map_err(|_| Error::Representability(format!("phi[{d}, {x}] = {phi}")))?;
            enc.push(EncodeEntry { delta, phi });

            let row = &mut dec[(d << m)..((d + 1) << m)];
            for slot in c..c + p {
                let s = slot - c + p;
                let bits = m - s.ilog2();
                row[slot as usize] = DecodeEntry {
                    symbol: x as u8,
                    bits: bits as u8,
                    next: (s << bits) as u16,
                };
            }
        }
    }

    let tables = CoderTables {
        encode: EncodeTables {
            precision: m,
            dists: set.len(),
            symbols: x_count,
            entries: enc,
        },
        decode: DecodeTables {
            precision: m,
            dists: set.len(),
            entries: dec,
        },
    };
    if verify {
        verify_encode_tables(set, &tables.encode)?;
    }
    Ok(tables)
}

/// Exhaustive check of the bit-count selector over every resting state.
pub fn verify_encode_tables(set: &DistributionSet, tables: &EncodeTables) -> Result<()> {
    let m = set.precision();
    for (d, pmf) in set.pmfs().iter().enumerate() {
        for x in 0..set.symbols() {
            let p = pmf.mass(x);
            let delta = u32::from(tables.delta(d, x));
            for s in (1u32 << m)..(2u32 << m) {
                let reduced = s >> ((delta + s) >> m);
                if reduced < p || reduced >= 2 * p {
                    return Err(Error::TableVerification {
                        dist: d,
                        symbol: x,
                        state: s,
                    });
                }
            }
        }
    }
    Ok(())
}

#[inline(always)]
fn encode_step(state: &mut u32, tables: &EncodeTables, d: usize, x: usize, stream: &mut BitStack) {
    let e = tables.entries[d * tables.symbols + x];
    let s = *state;
    let b = (u32::from(e.delta) + s) >> tables.precision;
    stream.push_bits(s, b);
    *state = (s >> b) + u32::from(e.phi);
}

#[inline(always)]
fn decode_step(
    state: &mut u32,
    tables: &DecodeTables,
    d: usize,
    stream: &mut BitReader<'_>,
) -> Result<u8> {
    let e = tables.entries[(d << tables.precision) | (*state as usize ^ (1 << tables.precision))];
    *state = u32::from(e.next) + stream.pop_bits(u32::from(e.bits))?;
    Ok(e.symbol)
}

/// Encodes `x` with distribution `d`; identical bits and state to
/// [`crate::rans::ref_encode`].
pub fn fast_encode(
    state: &mut CoderState,
    tables: &EncodeTables,
    d: usize,
    x: usize,
    stream: &mut BitStack,
) -> Result<()> {
    if d >= tables.dists || x >= tables.symbols {
        return Err(Error::IndexOutOfRange { symbol: x, dist: d });
    }
    if !state.is_resting(tables.precision) {
        return Err(Error::StateOutOfRange(state.0));
    }
    encode_step(&mut state.0, tables, d, x, stream);
    Ok(())
}

/// Decodes one symbol with distribution `d`.
pub fn fast_decode(
    state: &mut CoderState,
    tables: &DecodeTables,
    d: usize,
    stream: &mut BitReader<'_>,
) -> Result<u8> {
    if d >= tables.dists {
        return Err(Error::IndexOutOfRange { symbol: 0, dist: d });
    }
    if !state.is_resting(tables.precision) {
        return Err(Error::StateOutOfRange(state.0));
    }
    decode_step(&mut state.0, tables, d, stream)
}

fn check_message(symbols: &[u8], schedule: &[usize], tables: &EncodeTables) -> Result<()> {
    if symbols.len() != schedule.len() {
        return Err(Error::Shape(format!(
            "{} symbols but {} schedule entries",
            symbols.len(),
            schedule.len()
        )));
    }
    for (&x, &d) in symbols.iter().zip(schedule) {
        if d >= tables.dists || usize::from(x) >= tables.symbols {
            return Err(Error::IndexOutOfRange {
                symbol: x.into(),
                dist: d,
            });
        }
    }
    Ok(())
}

fn check_schedule(schedule: &[usize], dists: usize) -> Result<()> {
    match schedule.iter().find(|&&d| d >= dists) {
        Some(&d) => Err(Error::IndexOutOfRange { symbol: 0, dist: d }),
        None => Ok(()),
    }
}

/// One independent `(state, stream)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lane {
    pub state: CoderState,
    pub stream: BitStack,
}

/// Interleaved lanes: symbol `i` travels in lane `i mod L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaneSet {
    pub lanes: Vec<Lane>,
}

impl LaneSet {
    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    /// Total payload bits across lanes.
    pub fn bits(&self) -> usize {
        self.lanes.iter().map(|l| l.stream.len()).sum()
    }
}

fn lane_symbol_count(total: usize, lanes: usize, lane: usize) -> usize {
    if lane >= total {
        0
    } else {
        (total - lane).div_ceil(lanes)
    }
}

fn encode_lane(
    tables: &EncodeTables,
    symbols: &[u8],
    schedule: &[usize],
    lanes: usize,
    lane: usize,
) -> Lane {
    let count = lane_symbol_count(symbols.len(), lanes, lane);
    let mut state = 1u32 << tables.precision;
    // Roughly one byte per symbol is a generous starting capacity.
    let mut stream = BitStack::with_capacity(count * 8);
    for k in (0..count).rev() {
        let i = lane + k * lanes;
        encode_step(
            &mut state,
            tables,
            schedule[i],
            symbols[i].into(),
            &mut stream,
        );
    }
    Lane {
        state: CoderState(state),
        stream,
    }
}

fn decode_lane(
    tables: &DecodeTables,
    lane: &Lane,
    schedule: &[usize],
    lanes: usize,
    index: usize,
) -> Result<Vec<u8>> {
    decode_stream(tables, lane.state, &lane.stream, schedule, lanes, index)
}

fn decode_stream(
    tables: &DecodeTables,
    start: CoderState,
    stream: &BitStack,
    schedule: &[usize],
    lanes: usize,
    index: usize,
) -> Result<Vec<u8>> {
    let count = lane_symbol_count(schedule.len(), lanes, index);
    if !start.is_resting(tables.precision) {
        return Err(Error::CorruptStream { lane: index });
    }
    let m = tables.precision;
    let mut state = start.0 as usize;
    let mut reader = WindowReader::new(stream);
    let mut out = vec![0u8; count];
    let entries = &tables.entries[..];
    let lane_schedule = schedule.get(index..).unwrap_or(&[]).iter().step_by(lanes);
    for (slot, &d) in out.iter_mut().zip(lane_schedule) {
        let e = entries[(d << m) | (state ^ (1 << m))];
        let Some(bits) = reader.pop(u32::from(e.bits)) else {
            return Err(Error::CorruptStream { lane: index });
        };
        state = usize::from(e.next).wrapping_add(bits as usize);
        *slot = e.symbol;
    }
    if state != 1 << m || reader.remaining() != 0 {
        return Err(Error::CorruptStream { lane: index });
    }
    Ok(out)
}

fn interleave(per_lane: Vec<Vec<u8>>, total: usize) -> Vec<u8> {
    let lanes = per_lane.len();
    let mut out = vec![0u8; total];
    for (j, symbols) in per_lane.into_iter().enumerate() {
        for (k, x) in symbols.into_iter().enumerate() {
            out[j + k * lanes] = x;
        }
    }
    out
}

/// Encodes a message in a single lane; the same framing as
/// [`crate::rans::ref_encode_message`].
pub fn encode_message(
    tables: &EncodeTables,
    symbols: &[u8],
    schedule: &[usize],
) -> Result<(CoderState, BitStack)> {
    check_message(symbols, schedule, tables)?;
    let lane = encode_lane(tables, symbols, schedule, 1, 0);
    Ok((lane.state, lane.stream))
}

/// Decodes a single-lane message and checks its terminal state.
pub fn decode_message(
    tables: &DecodeTables,
    state: CoderState,
    stream: &BitStack,
    schedule: &[usize],
) -> Result<Vec<u8>> {
    check_schedule(schedule, tables.dists)?;
    decode_stream(tables, state, stream, schedule, 1, 0)
}

/// Splits the message over `lanes` independent coders.
pub fn interleaved_encode(
    tables: &EncodeTables,
    symbols: &[u8],
    schedule: &[usize],
    lanes: usize,
) -> Result<LaneSet> {
    if lanes == 0 {
        return Err(Error::Configuration("lane count must be at least 1".into()));
    }
    check_message(symbols, schedule, tables)?;
    #[cfg(feature = "parallel")]
    let lanes_out = {
        use rayon::prelude::*;
        (0..lanes)
            .into_par_iter()
            .map(|j| encode_lane(tables, symbols, schedule, lanes, j))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let lanes_out = (0..lanes)
        .map(|j| encode_lane(tables, symbols, schedule, lanes, j))
        .collect();
    Ok(LaneSet { lanes: lanes_out })
}

fn check_lanes(
    set: &LaneSet,
    expected: usize,
    schedule: &[usize],
    tables: &DecodeTables,
) -> Result<()> {
    if set.len() != expected || expected == 0 {
        return Err(Error::LaneMismatch {
            expected,
            found: set.len(),
        });
    }
    check_schedule(schedule, tables.dists)
}

/// Inverse of [`interleaved_encode`]; lanes decode concurrently when the
/// `parallel` feature is enabled.
pub fn interleaved_decode(
    tables: &DecodeTables,
    set: &LaneSet,
    lanes: usize,
    schedule: &[usize],
) -> Result<Vec<u8>> {
    check_lanes(set, lanes, schedule, tables)?;
    #[cfg(feature = "parallel")]
    let per_lane: Vec<Vec<u8>> = {
        use rayon::prelude::*;
        set.lanes
            .par_iter()
            .enumerate()
            .map(|(j, lane)| decode_lane(tables, lane, schedule, lanes, j))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_lane: Vec<Vec<u8>> = set
        .lanes
        .iter()
        .enumerate()
        .map(|(j, lane)| decode_lane(tables, lane, schedule, lanes, j))
        .collect::<Result<_>>()?;
    Ok(interleave(per_lane, schedule.len()))
}

/// Whole rounds of `L` lanes; returns how many symbols were decoded, or the
/// lane that ran out of bits.
fn round_robin<const L: usize>(
    entries: &[DecodeEntry],
    m: u32,
    cursors: &mut [(usize, WindowReader)],
    schedule: &[usize],
    out: &mut [u8],
) -> core::result::Result<usize, usize> {
    let top = 1usize << m;
    let mut offsets: [usize; L] = core::array::from_fn(|j| cursors[j].0);
    let mut pos: [usize; L] = core::array::from_fn(|j| cursors[j].1.remaining());
    let words: [&[u64]; L] = core::array::from_fn(|j| cursors[j].1.words());
    let rounds = schedule.len() / L;
    for (slots, ds) in out.chunks_exact_mut(L).zip(schedule.chunks_exact(L)) {
        for j in 0..L {
            let e = entries[(ds[j] << m) | offsets[j]];
            let bits = window_pop(words[j], &mut pos[j], u32::from(e.bits)).ok_or(j)?;
            offsets[j] = usize::from(e.next).wrapping_add(bits as usize) ^ top;
            slots[j] = e.symbol;
        }
    }
    for (j, cursor) in cursors.iter_mut().enumerate() {
        cursor.0 = offsets[j];
        cursor.1.set_remaining(pos[j]);
    }
    Ok(rounds * L)
}

/// [`interleaved_decode`] on the calling thread. Lanes advance round-robin
/// in message order, so their independent state chains overlap in the CPU.
pub fn interleaved_decode_serial(
    tables: &DecodeTables,
    set: &LaneSet,
    lanes: usize,
    schedule: &[usize],
) -> Result<Vec<u8>> {
    check_lanes(set, lanes, schedule, tables)?;
    if lanes == 1 {
        return decode_lane(tables, &set.lanes[0], schedule, 1, 0);
    }
    let m = tables.precision;
    let top = 1usize << m;
    let mut cursors = Vec::with_capacity(lanes);
    for (j, lane) in set.lanes.iter().enumerate() {
        if !lane.state.is_resting(m) {
            return Err(Error::CorruptStream { lane: j });
        }
        cursors.push((lane.state.0 as usize ^ top, WindowReader::new(&lane.stream)));
    }
    let entries = &tables.entries[..];
    let mut out = vec![0u8; schedule.len()];
    // Fixed lane counts keep every lane's state in registers.
    let done = match lanes {
        2 => round_robin::<2>(entries, m, &mut cursors, schedule, &mut out),
        4 => round_robin::<4>(entries, m, &mut cursors, schedule, &mut out),
        8 => round_robin::<8>(entries, m, &mut cursors, schedule, &mut out),
        _ => Ok(0),
    }
    .map_err(|lane| Error::CorruptStream { lane })?;
    for (slots, ds) in out[done..]
        .chunks_mut(lanes)
        .zip(schedule[done..].chunks(lanes))
    {
        for (j, ((slot, &d), (offset, reader))) in
            slots.iter_mut().zip(ds).zip(cursors.iter_mut()).enumerate()
        {
            let e = entries[(d << m) | *offset];
            let Some(bits) = reader.pop(u32::from(e.bits)) else {
                return Err(Error::CorruptStream { lane: j });
            };
            // The merged next state is at least 2^M, so this stays in range.
            *offset = usize::from(e.next).wrapping_add(bits as usize) ^ top;
            *slot = e.symbol;
        }
    }
    for (j, (offset, reader)) in cursors.iter().enumerate() {
        if *offset != 0 || reader.remaining() != 0 {
            return Err(Error::CorruptStream { lane: j });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistic::{quantize_pmf, QuantizedPmf};
    use crate::rans::{ref_decode, ref_encode, ref_encode_message};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(
        rng: &mut ChaCha8Rng,
        dists: usize,
        symbols: usize,
        precision: u32,
    ) -> DistributionSet {
        DistributionSet::new(
            (0..dists)
                .map(|_| {
                    let masses: Vec<f64> = (0..symbols).map(|_| rng.gen::<f64>().powi(4)).collect();
                    quantize_pmf(&masses, precision).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn table_entries_for_known_masses() {
        // P = (1024, 1024, 1024, 1023, 1): 1024 gives k = 2, delta 4096, phi 3072.
        let pmf = QuantizedPmf::from_masses(vec![1024, 1024, 1024, 1023, 1], 12).unwrap();
        let set = DistributionSet::new(vec![pmf]).unwrap();
        let tables = build_tables(&set, true).unwrap();
        assert_eq!(tables.encode.delta(0, 0), 4096);
        assert_eq!(tables.encode.phi(0, 0), 3072);
        assert_eq!(tables.encode.phi(0, 1), 4096 - 1024 + 1024);
        // P = 1: k = 12, delta = 12 * 4096 - 4096 = 45056 < 2^16.
        assert_eq!(tables.encode.delta(0, 4), 45056);

        let uniform = DistributionSet::new(vec![QuantizedPmf::uniform(256, 12).unwrap()]).unwrap();
        let tables = build_tables(&uniform, true).unwrap();
        for x in 0..256 {
            assert_eq!(tables.encode.delta(0, x), 28672);
        }
    }

    #[test]
    fn footprints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (d, x, m) in [(1, 3, 4), (4, 16, 8), (8, 256, 12), (3, 100, 10)] {
            let tables = build_tables(&random_set(&mut rng, d, x, m), false).unwrap();
            assert_eq!(tables.encode.footprint_bytes(), 4 * d * x);
            assert_eq!(tables.decode.footprint_bytes(), d << (m + 2));
        }
    }

    #[test]
    fn rejects_precision_above_twelve() {
        let pmf = QuantizedPmf::uniform(256, 13).unwrap();
        let set = DistributionSet::new(vec![pmf]).unwrap();
        assert!(matches!(
            build_tables(&set, false),
            Err(Error::Representability(_))
        ));
    }

    #[test]
    fn verification_catches_a_corrupted_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = random_set(&mut rng, 2, 16, 8);
        let mut tables = build_tables(&set, true).unwrap();
        tables.encode.entries[5].delta += 300;
        assert!(matches!(
            verify_encode_tables(&set, &tables.encode),
            Err(Error::TableVerification {
                dist: 0,
                symbol: 5,
                ..
            })
        ));
    }

    #[test]
    fn exhaustive_equivalence_with_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in [6u32, 8] {
            let set = random_set(&mut rng, 4, 16, m);
            let tables = build_tables(&set, true).unwrap();
            for d in 0..set.len() {
                for x in 0..16 {
                    for s in (1u32 << m)..(2u32 << m) {
                        let (mut rs, mut fs) = (CoderState(s), CoderState(s));
                        let (mut rbits, mut fbits) = (BitStack::new(), BitStack::new());
                        ref_encode(&mut rs, set.pmf(d), x, &mut rbits).unwrap();
                        fast_encode(&mut fs, &tables.encode, d, x, &mut fbits).unwrap();
                        assert_eq!((rs, &rbits), (fs, &fbits));
                    }
                }
                for s in (1u32 << m)..(2u32 << m) {
                    // 12 arbitrary bits of context below the decoded state.
                    let mut bits = BitStack::new();
                    bits.push_bits(0xa5c, 12);
                    let (mut rs, mut fs) = (CoderState(s), CoderState(s));
                    let (mut rr, mut fr) = (bits.reader(), bits.reader());
                    let rx = ref_decode(&mut rs, set.pmf(d), &mut rr).unwrap();
                    let fx = fast_decode(&mut fs, &tables.decode, d, &mut fr).unwrap();
                    assert_eq!((rx as u8, rs, rr.remaining()), (fx, fs, fr.remaining()));
                }
            }
        }
    }

    #[test]
    fn message_matches_reference_bytes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let set = random_set(&mut rng, 8, 256, 12);
        let tables = build_tables(&set, false).unwrap();
        let schedule: Vec<usize> = (0..100_000).map(|_| rng.gen_range(0..8)).collect();
        let symbols: Vec<u8> = (0..100_000).map(|_| rng.gen()).collect();
        let (fs, fstream) = encode_message(&tables.encode, &symbols, &schedule).unwrap();
        let (rs, rstream) = ref_encode_message(&symbols, &schedule, set.pmfs()).unwrap();
        assert_eq!((fs, &fstream), (rs, &rstream));
        let decoded = decode_message(&tables.decode, fs, &fstream, &schedule).unwrap();
        assert_eq!(decoded, symbols);
    }

    #[test]
    fn lanes_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let set = random_set(&mut rng, 3, 40, 10);
        let tables = build_tables(&set, false).unwrap();
        for n in [0usize, 1, 5, 1000] {
            let schedule: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let symbols: Vec<u8> = (0..n).map(|_| rng.gen_range(0..40)).collect();
            for lanes in [1, 2, 4, 16] {
                let set = interleaved_encode(&tables.encode, &symbols, &schedule, lanes).unwrap();
                assert_eq!(set.len(), lanes);
                let a = interleaved_decode(&tables.decode, &set, lanes, &schedule).unwrap();
                let b = interleaved_decode_serial(&tables.decode, &set, lanes, &schedule).unwrap();
                assert_eq!(a, symbols);
                assert_eq!(b, symbols);
                assert!(matches!(
                    interleaved_decode(&tables.decode, &set, lanes + 1, &schedule),
                    Err(Error::LaneMismatch { .. })
                ));
            }
            let single = interleaved_encode(&tables.encode, &symbols, &schedule, 1).unwrap();
            let (state, stream) = encode_message(&tables.encode, &symbols, &schedule).unwrap();
            assert_eq!(single.lanes[0], Lane { state, stream });
        }
    }

    #[test]
    fn truncated_lane_is_corrupt() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let set = random_set(&mut rng, 1, 16, 8);
        let tables = build_tables(&set, false).unwrap();
        let symbols: Vec<u8> = (0..500).map(|_| rng.gen_range(0..16)).collect();
        let schedule = vec![0; 500];
        let mut lanes = interleaved_encode(&tables.encode, &symbols, &schedule, 2).unwrap();
        lanes.lanes[1].stream.pop_bits(5).unwrap();
        assert!(matches!(
            interleaved_decode(&tables.decode, &lanes, 2, &schedule),
            Err(Error::CorruptStream { lane: 1 })
        ));
    }
}
