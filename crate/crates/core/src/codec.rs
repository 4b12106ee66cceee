//! Encoding integer streams with prefix codes, and a small self-describing
//! container.
//!
//! Container layout:
//!
//! ```text
//! "EPC1" | version: u8 = 1 | descriptor | symbol count: u64 LE | payload
//! descriptor = 0x01 k                      Golomb
//!            | 0x02 count len_0 .. len_n   explicit finite (canonical)
//!            | 0x03 r len_0 .. len_{r+1}   unary-ended (canonical head)
//! ```
//!
//! Integers inside the descriptor are unsigned LEB128. The payload is packed
//! most significant bit first and zero-padded to a byte boundary.

use std::io::Write;

use crate::bits::{BitReader, BitString, BitWriter};
use crate::error::{Error, Result};
use crate::golomb::GolombCode;
use crate::light_tail::UnaryEndedCode;
use crate::model::{kraft_exact, Kraft, LengthSeq};

pub const MAGIC: &[u8; 4] = b"EPC1";
pub const VERSION: u8 = 1;

const TAG_GOLOMB: u8 = 0x01;
const TAG_EXPLICIT: u8 = 0x02;
const TAG_UNARY_ENDED: u8 = 0x03;

/// Longest codeword accepted from a container header.
const MAX_DESCRIBED_LENGTH: u64 = 4096;

/// Fails if some codeword is a prefix of another (or repeated).
pub fn check_prefix_free(words: &[BitString]) -> Result<()> {
    let mut sorted: Vec<&BitString> = words.iter().collect();
    sorted.sort();
    // In lexicographic order a prefix always sorts right before some extension of it.
    for pair in sorted.windows(2) {
        if pair[0].is_prefix_of(pair[1]) {
            return Err(Error::InvalidCode(format!(
                "codeword {} is a prefix of {}",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

/// Canonical prefix code for `lengths`: symbols sorted by `(length, index)`
/// receive consecutive binary values.
pub fn canonical_codewords(lengths: &[u32]) -> Result<Vec<BitString>> {
    if lengths.is_empty() {
        return Err(Error::EmptyInput);
    }
    let wide: Vec<i64> = lengths.iter().map(|&l| l as i64).collect();
    if kraft_exact(&wide) == Kraft::Violated {
        return Err(Error::InvalidCode("lengths violate the Kraft inequality".into()));
    }
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| (lengths[i], i));
    let mut out = vec![BitString::new(); lengths.len()];
    let mut current: Vec<bool> = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if rank > 0 {
            // Increment; Kraft guarantees no carry out.
            let mut pos = current.len();
            while pos > 0 && current[pos - 1] {
                current[pos - 1] = false;
                pos -= 1;
            }
            if pos == 0 {
                return Err(Error::InvalidCode("lengths violate the Kraft inequality".into()));
            }
            current[pos - 1] = true;
        }
        current.resize(lengths[i] as usize, false);
        out[i] = BitString::from_bits(current.clone());
    }
    Ok(out)
}

/// Swaps sibling subtrees along the path of `words[target]` so that it
/// becomes all ones; lengths and prefix-freedom are preserved.
pub fn flip_to_all_ones(words: &mut [BitString], target: usize) {
    let len = words[target].len();
    for t in 0..len {
        if words[target].bits()[t] {
            continue;
        }
        let prefix = words[target].bits()[..t].to_vec();
        for w in words.iter_mut() {
            if w.len() > t && w.bits()[..t] == prefix[..] {
                let mut bits = w.bits().to_vec();
                bits[t] = !bits[t];
                *w = BitString::from_bits(bits);
            }
        }
    }
}

/// A decodable prefix code over nonnegative integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeSpec {
    Golomb { k: u64 },
    ExplicitFinite { codewords: Vec<BitString> },
    UnaryEnded(UnaryEndedCode),
}

impl CodeSpec {
    pub fn golomb(k: u64) -> Result<Self> {
        GolombCode::new(k)?;
        Ok(Self::Golomb { k })
    }

    pub fn explicit(codewords: Vec<BitString>) -> Result<Self> {
        if codewords.is_empty() {
            return Err(Error::EmptyInput);
        }
        check_prefix_free(&codewords)?;
        Ok(Self::ExplicitFinite { codewords })
    }

    /// Canonical explicit code with the given lengths.
    pub fn explicit_from_lengths(lengths: &[u32]) -> Result<Self> {
        Self::explicit(canonical_codewords(lengths)?)
    }

    /// Unary-ended code from head lengths (tail item last).
    pub fn unary_ended_from_lengths(lengths: &[u32]) -> Result<Self> {
        Ok(Self::UnaryEnded(UnaryEndedCode::from_lengths(lengths)?))
    }

    /// The code the container will actually carry: explicit and unary-ended
    /// codes are replaced by their canonical form with the same lengths.
    pub fn canonicalize(&self) -> Result<Self> {
        match self {
            Self::Golomb { .. } => Ok(self.clone()),
            Self::ExplicitFinite { codewords } => {
                let lengths: Vec<u32> = codewords.iter().map(|c| c.len() as u32).collect();
                Self::explicit_from_lengths(&lengths)
            }
            Self::UnaryEnded(code) => Self::unary_ended_from_lengths(&code.head_lengths()),
        }
    }

    pub fn alphabet_size(&self) -> Option<usize> {
        match self {
            Self::ExplicitFinite { codewords } => Some(codewords.len()),
            _ => None,
        }
    }

    pub fn codeword(&self, symbol: u64) -> Result<BitString> {
        match self {
            Self::Golomb { k } => Ok(GolombCode::new(*k)?.codeword(symbol)),
            Self::ExplicitFinite { codewords } => codewords
                .get(symbol as usize)
                .cloned()
                .ok_or(Error::SymbolOutOfRange {
                    symbol,
                    alphabet: codewords.len(),
                }),
            Self::UnaryEnded(code) => Ok(code.codeword(symbol)),
        }
    }

    pub fn length(&self, symbol: u64) -> Result<u64> {
        match self {
            Self::Golomb { k } => Ok(GolombCode::new(*k)?.length(symbol)),
            Self::ExplicitFinite { .. } => self.codeword(symbol).map(|c| c.len() as u64),
            Self::UnaryEnded(code) => Ok(code.length(symbol)),
        }
    }

    pub fn length_seq(&self) -> LengthSeq {
        match self {
            Self::Golomb { k } => LengthSeq::golomb(*k),
            Self::ExplicitFinite { codewords } => {
                LengthSeq::finite(codewords.iter().map(|c| c.len() as u32).collect())
            }
            Self::UnaryEnded(code) => code.length_seq(),
        }
    }

    fn write_descriptor(&self, out: &mut Vec<u8>) {
        let leb = |v: u64, out: &mut Vec<u8>| {
            leb128::write::unsigned(out, v).expect("writing to a Vec cannot fail");
        };
        match self {
            Self::Golomb { k } => {
                out.push(TAG_GOLOMB);
                leb(*k, out);
            }
            Self::ExplicitFinite { codewords } => {
                out.push(TAG_EXPLICIT);
                leb(codewords.len() as u64, out);
                for c in codewords {
                    leb(c.len() as u64, out);
                }
            }
            Self::UnaryEnded(code) => {
                out.push(TAG_UNARY_ENDED);
                leb(code.r() as u64, out);
                for l in code.head_lengths() {
                    leb(l as u64, out);
                }
            }
        }
    }

    fn read_descriptor(input: &mut &[u8]) -> Result<Self> {
        let (&tag, rest) = input.split_first().ok_or(Error::Truncated)?;
        *input = rest;
        let leb = |input: &mut &[u8]| -> Result<u64> {
            leb128::read::unsigned(input).map_err(|e| match e {
                leb128::read::Error::IoError(_) => Error::Truncated,
                leb128::read::Error::Overflow => Error::BadDescriptor("integer overflows 64 bits".into()),
            })
        };
        let lengths = |input: &mut &[u8], count: u64| -> Result<Vec<u32>> {
            if count > input.len() as u64 {
                return Err(Error::Truncated);
            }
            (0..count)
                .map(|_| {
                    let l = leb(input)?;
                    if l > MAX_DESCRIBED_LENGTH {
                        return Err(Error::BadDescriptor(format!("codeword length {l} is too long")));
                    }
                    Ok(l as u32)
                })
                .collect()
        };
        let described = |r: Result<Self>| {
            r.map_err(|e| match e {
                Error::InvalidCode(m) | Error::InvalidParameter(m) => Error::BadDescriptor(m),
                Error::EmptyInput => Error::BadDescriptor("empty code".into()),
                other => other,
            })
        };
        match tag {
            TAG_GOLOMB => {
                let k = leb(input)?;
                described(Self::golomb(k))
            }
            TAG_EXPLICIT => {
                let count = leb(input)?;
                let ls = lengths(input, count)?;
                described(Self::explicit_from_lengths(&ls))
            }
            TAG_UNARY_ENDED => {
                let r = leb(input)?;
                let ls = lengths(input, r.saturating_add(2))?;
                described(Self::unary_ended_from_lengths(&ls))
            }
            other => Err(Error::BadDescriptor(format!("unknown code tag {other:#04x}"))),
        }
    }
}

/// Encodes `symbols` with `code` (after canonicalization) into a container.
pub fn encode(symbols: &[u64], code: &CodeSpec) -> Result<Vec<u8>> {
    let mut enc = Encoder::new(code)?;
    for &s in symbols {
        enc.push(s)?;
    }
    Ok(enc.finish())
}

/// Decodes a whole container, insisting on zero padding and no trailing bytes.
pub fn decode(bytes: &[u8]) -> Result<Vec<u64>> {
    let (_, symbols) = decode_with_code(bytes)?;
    Ok(symbols)
}

/// Like [`decode`], also returning the code described by the header.
pub fn decode_with_code(bytes: &[u8]) -> Result<(CodeSpec, Vec<u64>)> {
    let mut dec = Decoder::new(bytes)?;
    let mut out = Vec::with_capacity(dec.remaining.min(bytes.len() as u64 * 8) as usize);
    for s in dec.by_ref() {
        out.push(s?);
    }
    let code = dec.code.clone();
    dec.finish()?;
    Ok((code, out))
}

/// Streaming encoder; single use.
#[derive(Debug)]
pub struct Encoder {
    code: CodeSpec,
    golomb: Option<GolombCode>,
    writer: BitWriter,
    count: u64,
}

impl Encoder {
    pub fn new(code: &CodeSpec) -> Result<Self> {
        let code = code.canonicalize()?;
        let golomb = match code {
            CodeSpec::Golomb { k } => Some(GolombCode::new(k)?),
            _ => None,
        };
        Ok(Self {
            code,
            golomb,
            writer: BitWriter::new(),
            count: 0,
        })
    }

    pub fn push(&mut self, symbol: u64) -> Result<()> {
        match &self.golomb {
            Some(g) => g.write(&mut self.writer, symbol),
            None => {
                let word = self.code.codeword(symbol)?;
                self.writer.write_bits(&word);
            }
        }
        self.count += 1;
        Ok(())
    }

    /// Payload bits written so far.
    pub fn payload_bits(&self) -> u64 {
        self.writer.bit_len()
    }

    pub fn finish(self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        self.code.write_descriptor(&mut out);
        out.write_all(&self.count.to_le_bytes()).expect("writing to a Vec cannot fail");
        out.extend(self.writer.finish());
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum TrieNode {
    Branch([Option<usize>; 2]),
    Leaf(u64),
}

/// Binary trie over a finite set of codewords.
#[derive(Debug, Clone)]
struct Trie {
    nodes: Vec<TrieNode>,
}

impl Trie {
    fn new(words: &[BitString]) -> Self {
        let mut nodes = vec![TrieNode::Branch([None, None])];
        for (symbol, w) in words.iter().enumerate() {
            let mut at = 0;
            for &bit in w.bits() {
                let TrieNode::Branch(children) = nodes[at] else {
                    unreachable!("codewords are prefix-free");
                };
                at = match children[bit as usize] {
                    Some(next) => next,
                    None => {
                        nodes.push(TrieNode::Branch([None, None]));
                        let next = nodes.len() - 1;
                        if let TrieNode::Branch(ch) = &mut nodes[at] {
                            ch[bit as usize] = Some(next);
                        }
                        next
                    }
                };
            }
            nodes[at] = TrieNode::Leaf(symbol as u64);
        }
        Self { nodes }
    }

    fn read(&self, r: &mut BitReader<'_>) -> Result<u64> {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TrieNode::Leaf(s) => return Ok(s),
                TrieNode::Branch(children) => {
                    let bit = r.read_bit()?;
                    at = children[bit as usize]
                        .ok_or_else(|| Error::InvalidCode("bit pattern matches no codeword".into()))?;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum SymbolReader {
    Golomb(GolombCode),
    Finite(Trie),
    UnaryEnded { trie: Trie, r: u64 },
}

/// Streaming decoder; yields exactly the number of symbols in the header.
#[derive(Debug)]
pub struct Decoder<'a> {
    code: CodeSpec,
    reader: BitReader<'a>,
    symbols: SymbolReader,
    remaining: u64,
    header_len: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() {
            return Err(if MAGIC.starts_with(bytes) { Error::Truncated } else { Error::BadMagic });
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = *bytes.get(4).ok_or(Error::Truncated)?;
        if version != VERSION {
            return Err(Error::BadVersion(version));
        }
        let mut rest = &bytes[5..];
        let code = CodeSpec::read_descriptor(&mut rest)?;
        if rest.len() < 8 {
            return Err(Error::Truncated);
        }
        let remaining = u64::from_le_bytes(rest[..8].try_into().unwrap());
        let payload = &rest[8..];
        let symbols = match &code {
            CodeSpec::Golomb { k } => SymbolReader::Golomb(GolombCode::new(*k)?),
            CodeSpec::ExplicitFinite { codewords } => SymbolReader::Finite(Trie::new(codewords)),
            CodeSpec::UnaryEnded(u) => {
                let mut words = u.head_codewords().to_vec();
                words.push(u.tail_prefix().clone());
                SymbolReader::UnaryEnded {
                    trie: Trie::new(&words),
                    r: u.r() as u64,
                }
            }
        };
        Ok(Self {
            code,
            reader: BitReader::new(payload),
            symbols,
            remaining,
            header_len: bytes.len() - payload.len(),
        })
    }

    pub fn code(&self) -> &CodeSpec {
        &self.code
    }

    /// Bytes before the payload.
    pub fn header_len(&self) -> usize {
        self.header_len
    }

    fn read_symbol(&mut self) -> Result<u64> {
        match &self.symbols {
            SymbolReader::Golomb(g) => g.read(&mut self.reader),
            SymbolReader::Finite(t) => t.read(&mut self.reader),
            SymbolReader::UnaryEnded { trie, r } => {
                let s = trie.read(&mut self.reader)?;
                if s <= *r {
                    return Ok(s);
                }
                let mut ones = 0u64;
                while self.reader.read_bit()? {
                    ones += 1;
                }
                Ok(r + 1 + ones)
            }
        }
    }

    /// Verifies that the payload ends exactly after the last symbol.
    pub fn finish(self) -> Result<()> {
        if self.remaining > 0 {
            return Err(Error::Truncated);
        }
        self.reader.finish()
    }
}

impl Iterator for Decoder<'_> {
    type Item = Result<u64>;

    fn next(&mut self) -> Option<Result<u64>> {
        if self.remaining == 0 {
            return None;
        }
        let s = self.read_symbol();
        if s.is_err() {
            // Stop after the first error.
            self.remaining = 0;
        } else {
            self.remaining -= 1;
        }
        Some(s)
    }
}
