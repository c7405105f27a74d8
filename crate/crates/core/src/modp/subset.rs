use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{mul_mod, FpElem, PrimeField};
use crate::error::{Error, Result};

/// Header of the raw bitset dump: magic, then `p` as little-endian u64,
/// then `ceil(p/64)` little-endian u64 words.
pub const DUMP_MAGIC: &[u8; 6] = b"FPSET1";

/// A subset of F_p stored as a dense bit-vector of length `p`.
///
/// Bits past `p` in the last word are always zero, and `len` always equals
/// the population count.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SubsetRepr", into = "SubsetRepr")]
pub struct FpSubset {
    p: u64,
    words: Vec<u64>,
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct SubsetRepr {
    p: u64,
    elements: Vec<u64>,
}

impl TryFrom<SubsetRepr> for FpSubset {
    type Error = Error;

    fn try_from(r: SubsetRepr) -> Result<Self> {
        FpSubset::from_elements(r.p, r.elements)
    }
}

impl From<FpSubset> for SubsetRepr {
    fn from(s: FpSubset) -> Self {
        SubsetRepr {
            p: s.p,
            elements: s.to_vec(),
        }
    }
}

impl std::fmt::Debug for FpSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.len <= 32 {
            write!(f, "FpSubset(p={}, {:?})", self.p, self.to_vec())
        } else {
            write!(f, "FpSubset(p={}, |X|={})", self.p, self.len)
        }
    }
}

#[inline]
fn word_count(p: u64) -> usize {
    p.div_ceil(64) as usize
}

#[inline]
fn top_mask(p: u64) -> u64 {
    match p % 64 {
        0 => !0,
        r => (1u64 << r) - 1,
    }
}

/// `dst |= (src rotated left by s)` on p-bit vectors, `0 <= s < p`.
fn or_rotated_into(src: &[u64], p: u64, s: u64, dst: &mut [u64]) {
    let nw = src.len();
    if s == 0 {
        for (d, &w) in dst.iter_mut().zip(src) {
            *d |= w;
        }
        return;
    }
    // Left shift by s: bit i -> i + s (dropping bits that pass p).
    let (ws, bs) = ((s / 64) as usize, (s % 64) as u32);
    for j in ws..nw {
        let mut w = src[j - ws] << bs;
        if bs > 0 && j > ws {
            w |= src[j - ws - 1] >> (64 - bs);
        }
        dst[j] |= w;
    }
    // Right shift by p - s: bit i -> i - (p - s) for i >= p - s.
    let t = p - s;
    let (wt, bt) = ((t / 64) as usize, (t % 64) as u32);
    for j in 0..nw.saturating_sub(wt) {
        let mut w = src[j + wt] >> bt;
        if bt > 0 && j + wt + 1 < nw {
            w |= src[j + wt + 1] << (64 - bt);
        }
        dst[j] |= w;
    }
    dst[nw - 1] &= top_mask(p);
}

impl FpSubset {
    pub fn empty(p: u64) -> Self {
        FpSubset {
            p,
            words: vec![0; word_count(p)],
            len: 0,
        }
    }

    pub fn full(p: u64) -> Self {
        let mut words = vec![!0u64; word_count(p)];
        if let Some(last) = words.last_mut() {
            *last &= top_mask(p);
        }
        FpSubset { p, words, len: p }
    }

    pub fn from_elements<I: IntoIterator<Item = u64>>(p: u64, elems: I) -> Result<Self> {
        let mut s = FpSubset::empty(p);
        for x in elems {
            if x >= p {
                return Err(Error::invalid(format!("{x} is not a residue mod {p}")));
            }
            s.insert(x);
        }
        Ok(s)
    }

    pub(crate) fn from_words(p: u64, mut words: Vec<u64>) -> Result<Self> {
        if words.len() != word_count(p) {
            return Err(Error::invalid(format!(
                "expected {} words for p = {p}, got {}",
                word_count(p),
                words.len()
            )));
        }
        if let Some(last) = words.last_mut() {
            if *last & !top_mask(p) != 0 {
                return Err(Error::invalid("bits set beyond p"));
            }
            *last &= top_mask(p);
        }
        let len = words.iter().map(|w| w.count_ones() as u64).sum();
        Ok(FpSubset { p, words, len })
    }

    /// Subset of a field of size at most 64, as a bitmask.
    pub fn from_mask(p: u64, mask: u64) -> Result<Self> {
        if p > 64 {
            return Err(Error::invalid("bitmask subsets need p <= 64"));
        }
        Self::from_words(p, vec![mask])
    }

    #[inline]
    fn insert(&mut self, x: u64) {
        let (w, b) = ((x / 64) as usize, x % 64);
        let bit = 1u64 << b;
        if self.words[w] & bit == 0 {
            self.words[w] |= bit;
            self.len += 1;
        }
    }

    fn recount(&mut self) {
        self.len = self.words.iter().map(|w| w.count_ones() as u64).sum();
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn len(&self) -> u64 {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.p
    }

    #[inline]
    pub fn contains(&self, x: u64) -> bool {
        x < self.p && self.words[(x / 64) as usize] >> (x % 64) & 1 == 1
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Elements in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let base = i as u64 * 64;
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as u64;
                w &= w - 1;
                Some(base + tz)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<u64> {
        self.iter().collect()
    }

    fn check_same_field(&self, other: &FpSubset) {
        assert_eq!(self.p, other.p, "subsets of different fields");
    }

    /// `a + X`, a cyclic bit rotation.
    pub fn translate(&self, a: FpElem) -> FpSubset {
        let s = a.value() % self.p;
        let mut words = vec![0; self.words.len()];
        or_rotated_into(&self.words, self.p, s, &mut words);
        FpSubset {
            p: self.p,
            words,
            len: self.len,
        }
    }

    /// `a · X` for a nonzero `a`.
    pub fn dilate(&self, field: &PrimeField, a: FpElem) -> Result<FpSubset> {
        assert_eq!(field.p(), self.p, "subset and field disagree on p");
        if a.is_zero() {
            return Err(Error::invalid("dilation by zero is not a bijection"));
        }
        if a == FpElem::ONE {
            return Ok(self.clone());
        }
        let mut out = FpSubset::empty(self.p);
        for x in self.iter() {
            let y = mul_mod(x, a.value(), self.p);
            out.words[(y / 64) as usize] |= 1 << (y % 64);
        }
        out.len = self.len;
        Ok(out)
    }

    /// `X + Y`, built as the union of translates of the larger set by the
    /// elements of the smaller one.
    pub fn sumset_with(&self, other: &FpSubset) -> FpSubset {
        self.check_same_field(other);
        let (big, small) = if self.len >= other.len {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = FpSubset::empty(self.p);
        for y in small.iter() {
            or_rotated_into(&big.words, self.p, y, &mut out.words);
        }
        out.recount();
        out
    }

    pub fn union(&self, other: &FpSubset) -> FpSubset {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub(crate) fn union_with(&mut self, other: &FpSubset) {
        self.check_same_field(other);
        for (d, &w) in self.words.iter_mut().zip(&other.words) {
            *d |= w;
        }
        self.recount();
    }

    /// `|self ∖ other|`.
    pub fn difference_len(&self, other: &FpSubset) -> u64 {
        self.check_same_field(other);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| (a & !b).count_ones() as u64)
            .sum()
    }

    pub fn intersection_len(&self, other: &FpSubset) -> u64 {
        self.check_same_field(other);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| (a & b).count_ones() as u64)
            .sum()
    }

    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&self.p.to_le_bytes())?;
        for word in &self.words {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<FpSubset> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::invalid("not an FPSET1 bitset dump"));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let p = u64::from_le_bytes(buf);
        let mut words = Vec::with_capacity(word_count(p));
        for _ in 0..word_count(p) {
            r.read_exact(&mut buf)?;
            words.push(u64::from_le_bytes(buf));
        }
        FpSubset::from_words(p, words)
    }
}
