//! Bit strings and MSB-first bit I/O.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// An owned sequence of bits. Ordering is lexicographic, with a proper prefix
/// sorting before its extensions.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// The low `width` bits of `value`, most significant first.
    pub fn from_uint(value: u64, width: u32) -> Self {
        Self((0..width).rev().map(|b| (value >> b) & 1 == 1).collect())
    }

    pub fn ones(count: usize) -> Self {
        Self(vec![true; count])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn is_all_ones(&self) -> bool {
        self.0.iter().all(|&b| b)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(invalid(format!("bad bit {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// Packs bits most-significant first; the final byte is zero-padded.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    used: u8,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bit(&mut self, bit: bool) {
        if self.used == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> self.used;
        }
        self.used = (self.used + 1) % 8;
        self.bits += 1;
    }

    pub fn write_bits(&mut self, bits: &BitString) {
        for &b in bits.bits() {
            self.write_bit(b);
        }
    }

    pub fn write_ones(&mut self, count: u64) {
        for _ in 0..count {
            self.write_bit(true);
        }
    }

    /// Writes the low `width` bits of `value`, most significant first.
    pub fn write_uint(&mut self, value: u64, width: u32) {
        for b in (0..width).rev() {
            self.write_bit((value >> b) & 1 == 1);
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    pub fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

/// Reads bits most-significant first.
#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let byte = *self.bytes.get((self.pos / 8) as usize).ok_or(Error::Truncated)?;
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_uint(&mut self, width: u32) -> Result<u64> {
        let mut v = 0;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn bit_pos(&self) -> u64 {
        self.pos
    }

    /// Checks that the rest of the current byte is zero and that no whole
    /// bytes follow it.
    pub fn finish(mut self) -> Result<()> {
        while !self.pos.is_multiple_of(8) {
            if self.read_bit()? {
                return Err(Error::NonzeroPadding);
            }
        }
        let rest = self.bytes.len() - (self.pos / 8) as usize;
        if rest > 0 {
            return Err(Error::TrailingData(rest));
        }
        Ok(())
    }
}
