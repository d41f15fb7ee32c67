//! Fixed-width bitstring tags.
//!
//! Bit `i` of a tag is stored at bit `i % 64` of word `i / 64`, so bit 0 is
//! the least-significant bit of the tag's unsigned value. Bits at or above
//! the width are always zero.

use std::fmt;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Geometric};
use smallvec::SmallVec;

use crate::error::{Error, Result};

type Words = SmallVec<[u64; 2]>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Tag {
    width: usize,
    words: Words,
}

fn word_count(width: usize) -> usize {
    width.div_ceil(64)
}

fn top_mask(width: usize) -> u64 {
    match width % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl Tag {
    /// An all-zero tag of the given width.
    pub fn zeros(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::invalid("tag width must be at least 1"));
        }
        Ok(Tag {
            width,
            words: SmallVec::from_elem(0, word_count(width)),
        })
    }

    pub fn ones(width: usize) -> Result<Self> {
        Ok(Tag::zeros(width)?.complement())
    }

    /// A tag whose bits are independent fair coin flips.
    pub fn random<R: RngCore + ?Sized>(width: usize, rng: &mut R) -> Result<Self> {
        let mut tag = Tag::zeros(width)?;
        for w in tag.words.iter_mut() {
            *w = rng.next_u64();
        }
        tag.clear_padding();
        Ok(tag)
    }

    /// Build a tag from bits listed least-significant first.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut tag = Tag::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                tag.words[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(tag)
    }

    /// Inverse of [`Tag::as_unsigned`].
    pub fn from_unsigned(width: usize, value: u128) -> Result<Self> {
        if width > 128 {
            return Err(Error::invalid(format!(
                "width {width} exceeds 128-bit integer capacity"
            )));
        }
        if width < 128 && value >> width != 0 {
            return Err(Error::invalid(format!(
                "value {value} does not fit in {width} bits"
            )));
        }
        let mut tag = Tag::zeros(width)?;
        tag.words[0] = value as u64;
        if tag.words.len() > 1 {
            tag.words[1] = (value >> 64) as u64;
        }
        Ok(tag)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Backing words, least-significant first, padding bits zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, index: usize) -> Result<bool> {
        self.check_index(index)?;
        Ok(self.get(index))
    }

    pub(crate) fn get(&self, index: usize) -> bool {
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Copy of this tag with bit `index` toggled.
    pub fn flip_bit(&self, index: usize) -> Result<Tag> {
        let mut out = self.clone();
        out.toggle(index)?;
        Ok(out)
    }

    /// Toggle bit `index` in place.
    pub fn toggle(&mut self, index: usize) -> Result<()> {
        self.check_index(index)?;
        self.words[index / 64] ^= 1 << (index % 64);
        Ok(())
    }

    pub fn complement(&self) -> Tag {
        let mut out = self.clone();
        for w in out.words.iter_mut() {
            *w = !*w;
        }
        out.clear_padding();
        out
    }

    /// Copy of this tag with every bit independently toggled with
    /// probability `rate`.
    pub fn mutate_per_bit<R: RngCore + ?Sized>(&self, rate: f64, rng: &mut R) -> Result<Tag> {
        let mut out = self.clone();
        for_each_mutation_site(self.width, rate, rng, |i| {
            out.words[i / 64] ^= 1 << (i % 64);
        })?;
        Ok(out)
    }

    /// The unsigned value `sum(bit_i * 2^i)`; widths above 128 are rejected.
    pub fn as_unsigned(&self) -> Result<u128> {
        if self.width > 128 {
            return Err(Error::invalid(format!(
                "width {} exceeds 128-bit integer capacity",
                self.width
            )));
        }
        let lo = self.words[0] as u128;
        let hi = self.words.get(1).copied().unwrap_or(0) as u128;
        Ok(lo | hi << 64)
    }

    /// Packed little-endian bytes: byte 0 holds bits 0-7 with bit 0 as its
    /// least-significant bit; the final byte's unused high bits are zero.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let len = self.width.div_ceil(8);
        let mut out = Vec::with_capacity(len);
        self.extend_le_bytes(&mut out);
        out
    }

    pub(crate) fn extend_le_bytes(&self, out: &mut Vec<u8>) {
        let len = self.width.div_ceil(8);
        out.extend(
            self.words
                .iter()
                .flat_map(|w| w.to_le_bytes())
                .take(len),
        );
    }

    /// Lowercase hex of [`Tag::to_le_bytes`], two digits per byte.
    pub fn to_hex(&self) -> String {
        self.to_le_bytes()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn from_hex(width: usize, hex: &str) -> Result<Tag> {
        let mut tag = Tag::zeros(width)?;
        let len = width.div_ceil(8);
        if hex.len() != 2 * len || !hex.is_ascii() {
            return Err(Error::invalid(format!(
                "expected {} hex digits for width {width}, got {hex:?}",
                2 * len
            )));
        }
        for i in 0..len {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::invalid(format!("bad hex {hex:?}: {e}")))?;
            tag.words[i / 8] |= (byte as u64) << (8 * (i % 8));
        }
        if *tag.words.last().unwrap() & !top_mask(width) != 0 {
            return Err(Error::invalid(format!(
                "hex {hex:?} sets bits beyond width {width}"
            )));
        }
        Ok(tag)
    }

    pub(crate) fn check_same_width(&self, other: &Tag) -> Result<()> {
        if self.width != other.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: other.width,
            });
        }
        Ok(())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.width {
            return Err(Error::OutOfRange {
                index,
                width: self.width,
            });
        }
        Ok(())
    }

    fn clear_padding(&mut self) {
        let mask = top_mask(self.width);
        if let Some(last) = self.words.last_mut() {
            *last &= mask;
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({}:{})", self.width, self.to_hex())
    }
}

/// Visit, in increasing order, the positions in `0..len` selected by
/// independent Bernoulli(`rate`) trials.
///
/// Gaps between selected positions are drawn from a geometric distribution,
/// which costs one draw per selected site instead of one per position.
pub fn for_each_mutation_site<R, F>(len: usize, rate: f64, rng: &mut R, mut visit: F) -> Result<()>
where
    R: RngCore + ?Sized,
    F: FnMut(usize),
{
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!(
            "mutation rate {rate} outside [0, 1]"
        )));
    }
    if rate == 0.0 || len == 0 {
        return Ok(());
    }
    if rate == 1.0 {
        (0..len).for_each(visit);
        return Ok(());
    }
    let gaps = Geometric::new(rate).map_err(|e| Error::invalid(e.to_string()))?;
    let mut pos = gaps.sample(rng);
    while pos < len as u64 {
        visit(pos as usize);
        pos = pos.saturating_add(1).saturating_add(gaps.sample(rng));
    }
    Ok(())
}

/// A uniformly random bit position of a tag of `width` bits.
pub(crate) fn random_index<R: RngCore + ?Sized>(width: usize, rng: &mut R) -> usize {
    rng.random_range(0..width)
}
