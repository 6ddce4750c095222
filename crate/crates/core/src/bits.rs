//! Last-in-first-out bit stack used by every coder in the crate.
//!
//! Bits are stored in push order; bit `i` lives in byte `i / 8` at position
//! `i % 8` (LSB-first). Popping returns the most recently pushed bits, so a
//! multi-bit pop of `n` bits yields exactly the `n`-bit value that was pushed
//! with [`BitStack::push_bits`].

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitStack {
    // Invariant: words.len() == ceil(len / 64) and every bit at or above `len` is zero.
    words: Vec<u64>,
    len: usize,
}

#[inline]
fn low_mask(n: u32) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl BitStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    /// Number of bits currently on the stack.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn push_bit(&mut self, bit: u32) {
        self.push_bits(bit & 1, 1);
    }

    /// Pushes the low `count` bits of `value`, least significant first.
    #[inline]
    pub fn push_bits(&mut self, value: u32, count: u32) {
        debug_assert!(count <= 32);
        if count == 0 {
            return;
        }
        let v = u64::from(value) & low_mask(count);
        let off = (self.len % 64) as u32;
        if off == 0 {
            self.words.push(v);
        } else {
            let w = self.words.len() - 1;
            self.words[w] |= v << off;
            if off + count > 64 {
                self.words.push(v >> (64 - off));
            }
        }
        self.len += count as usize;
    }

    #[inline]
    pub fn pop_bit(&mut self) -> Result<u32> {
        self.pop_bits(1)
    }

    /// Pops the `count` most recently pushed bits and returns them as the
    /// value originally given to `push_bits`.
    pub fn pop_bits(&mut self, count: u32) -> Result<u32> {
        let mut reader = BitReader {
            words: &self.words,
            pos: self.len,
        };
        let value = reader.pop_bits(count)?;
        let p = reader.pos;
        self.len = p;
        self.words.truncate(p.div_ceil(64));
        let off = (p % 64) as u32;
        if off != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= low_mask(off);
            }
        }
        Ok(value)
    }

    /// A non-destructive reader that pops from the top of this stack.
    pub fn reader(&self) -> BitReader<'_> {
        BitReader {
            words: &self.words,
            pos: self.len,
        }
    }

    /// Bytes of the LSB-first payload, `ceil(len / 8)` of them.
    pub fn payload(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(n);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(n);
        out
    }

    /// Wire form: 64-bit little-endian bit count, then the payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.len.div_ceil(8));
        self.write_to(&mut out);
        out
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        out.extend_from_slice(&self.payload());
    }

    /// Rebuilds a stack from a payload and bit count. Padding bits in the
    /// final byte must be zero.
    pub fn from_payload(payload: &[u8], bit_len: usize) -> Result<Self> {
        if payload.len() != bit_len.div_ceil(8) {
            return Err(Error::Malformed(alloc::format!(
                "{bit_len} bits need {} payload bytes, got {}",
                bit_len.div_ceil(8),
                payload.len()
            )));
        }
        let rem = (bit_len % 8) as u32;
        if rem != 0 && payload[payload.len() - 1] >> rem != 0 {
            return Err(Error::Malformed("nonzero padding bits".into()));
        }
        let words = payload
            .chunks(8)
            .map(|chunk| {
                let mut buf = [0u8; 8];
                buf[..chunk.len()].copy_from_slice(chunk);
                u64::from_le_bytes(buf)
            })
            .collect();
        Ok(Self {
            words,
            len: bit_len,
        })
    }

    /// Parses the wire form from the front of `bytes`; returns the stack and
    /// the number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let head: [u8; 8] = bytes
            .get(..8)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| Error::Malformed("truncated bit count".into()))?;
        let bit_len = u64::from_le_bytes(head);
        let n = bit_len.div_ceil(8);
        let avail = (bytes.len() - 8) as u64;
        if n > avail {
            return Err(Error::Malformed(alloc::format!(
                "bit stream declares {bit_len} bits but only {avail} bytes follow"
            )));
        }
        let n = n as usize;
        let stack = Self::from_payload(&bytes[8..8 + n], bit_len as usize)?;
        Ok((stack, 8 + n))
    }
}

/// Read cursor popping from the top of a [`BitStack`] without mutating it.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    words: &'a [u64],
    pos: usize,
}

impl BitReader<'_> {
    /// Bits not yet popped.
    pub fn remaining(&self) -> usize {
        self.pos
    }

    #[inline]
    pub fn pop_bit(&mut self) -> Result<u32> {
        if self.pos == 0 {
            return Err(Error::StreamUnderflow);
        }
        self.pos -= 1;
        Ok(((self.words[self.pos / 64] >> (self.pos % 64)) & 1) as u32)
    }

    #[inline]
    pub fn pop_bits(&mut self, count: u32) -> Result<u32> {
        debug_assert!(count <= 32);
        let n = count as usize;
        if n > self.pos {
            return Err(Error::StreamUnderflow);
        }
        let p = self.pos - n;
        self.pos = p;
        let w = p / 64;
        let off = (p % 64) as u32;
        let mut v = self.words.get(w).copied().unwrap_or(0) >> off;
        if off + count > 64 {
            v |= self.words[w + 1] << (64 - off);
        }
        Ok((v & low_mask(count)) as u32)
    }
}

/// Reader for hot decode loops: every pop is two word loads and a few shifts
/// with no data-dependent branch.
pub(crate) struct WindowReader {
    /// One leading and two trailing zero words around the stack words, so a
    /// two-word window never leaves the buffer.
    words: Vec<u64>,
    pos: usize,
}

impl WindowReader {
    pub fn new(stack: &BitStack) -> Self {
        let mut words = Vec::with_capacity(stack.words.len() + 3);
        words.push(0);
        words.extend_from_slice(&stack.words);
        words.extend_from_slice(&[0, 0]);
        Self {
            words,
            pos: stack.len,
        }
    }

    pub fn remaining(&self) -> usize {
        self.pos
    }

    /// Padded words, for [`window_pop`].
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn set_remaining(&mut self, pos: usize) {
        debug_assert!(pos <= (self.words.len() - 3) * 64);
        self.pos = pos;
    }

    #[inline(always)]
    pub fn pop(&mut self, count: u32) -> Option<u32> {
        window_pop(&self.words, &mut self.pos, count)
    }
}

/// Pops `count <= 32` bits below `pos` from the padded words of a
/// [`WindowReader`]; `None` on underflow. Wrapping arithmetic keeps overflow
/// checks out of hot loops; every value is in range.
#[inline(always)]
pub(crate) fn window_pop(words: &[u64], pos: &mut usize, count: u32) -> Option<u32> {
    let n = count as usize;
    if n > *pos {
        return None;
    }
    // Bit `p` of the stack is bit `p + 64` of the padded words, so the two
    // words at `pos / 64` hold the 64 bits below `pos`, most recent on top.
    let i = *pos / 64;
    let off = (*pos % 64) as u32;
    let window = (words[i] >> off) | ((words[i.wrapping_add(1)] << 1) << 63u32.wrapping_sub(off));
    *pos = pos.wrapping_sub(n);
    Some(((window >> 32) >> 32u32.wrapping_sub(count)) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn window_reader_matches_reader() {
        let mut s = BitStack::new();
        for i in 0..300u32 {
            s.push_bits(i.wrapping_mul(2654435761), i % 33);
        }
        let mut a = s.reader();
        let mut b = WindowReader::new(&s);
        for i in (0..300u32).rev() {
            assert_eq!(b.pop(i % 33), a.pop_bits(i % 33).ok());
        }
        assert_eq!((a.remaining(), b.remaining()), (0, 0));
        assert_eq!(b.pop(1), None);
        assert_eq!(b.pop(0), Some(0));
    }

    #[test]
    fn lsb_first_bytes() {
        let mut s = BitStack::new();
        for b in [1, 0, 1, 1, 0, 0, 0, 0, 1] {
            s.push_bit(b);
        }
        assert_eq!(s.len(), 9);
        assert_eq!(s.payload(), vec![0b0000_1101, 0b1]);
        assert_eq!(s.to_bytes(), vec![9, 0, 0, 0, 0, 0, 0, 0, 0b0000_1101, 0b1]);
    }

    #[test]
    fn multi_bit_pop_returns_pushed_value() {
        let mut s = BitStack::new();
        s.push_bits(0b101, 3);
        s.push_bits(0x3fff_ffff, 30);
        s.push_bits(0xabc, 12);
        assert_eq!(s.pop_bits(12).unwrap(), 0xabc);
        assert_eq!(s.pop_bits(30).unwrap(), 0x3fff_ffff);
        assert_eq!(s.pop_bit().unwrap(), 1);
        assert_eq!(s.pop_bit().unwrap(), 0);
        assert_eq!(s.pop_bit().unwrap(), 1);
        assert_eq!(s.pop_bit(), Err(Error::StreamUnderflow));
    }

    #[test]
    fn pop_then_push_keeps_padding_clean() {
        let mut s = BitStack::new();
        s.push_bits(u32::MAX, 32);
        s.push_bits(u32::MAX, 32);
        s.push_bits(u32::MAX, 5);
        s.pop_bits(20).unwrap();
        s.push_bits(0, 20);
        assert_eq!(s.pop_bits(20).unwrap(), 0);
        assert_eq!(s.len(), 49);
        let (back, used) = BitStack::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(used, 8 + 7);
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_dirty_padding_and_truncation() {
        let mut bytes = vec![3, 0, 0, 0, 0, 0, 0, 0, 0b0000_1111];
        assert!(BitStack::from_bytes(&bytes).is_err());
        bytes[8] = 0b111;
        assert!(BitStack::from_bytes(&bytes).is_ok());
        assert!(BitStack::from_bytes(&bytes[..8]).is_err());
        assert!(BitStack::from_bytes(&bytes[..5]).is_err());
    }

    proptest! {
        #[test]
        fn push_pop_is_lifo(chunks in proptest::collection::vec((any::<u32>(), 0u32..=32), 0..200)) {
            let mut s = BitStack::new();
            for &(v, n) in &chunks {
                s.push_bits(v, n);
            }
            let (wire, _) = BitStack::from_bytes(&s.to_bytes()).unwrap();
            prop_assert_eq!(&wire, &s);
            let mut reader = wire.reader();
            for &(v, n) in chunks.iter().rev() {
                let mask = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
                prop_assert_eq!(reader.pop_bits(n).unwrap(), v & mask);
                prop_assert_eq!(s.pop_bits(n).unwrap(), v & mask);
            }
            prop_assert_eq!(reader.remaining(), 0);
            prop_assert!(s.is_empty());
        }
    }
}
