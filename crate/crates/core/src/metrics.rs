//! Raw tag-matching distances.
//!
//! Every function maps a pair of equal-width tags to a raw distance in
//! `[0, 1]`, where 0 is a perfect match. Raw distances are not comparable
//! across metrics; see [`crate::normalizer`] for the uniform rescaling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::error::{Error, Result};
use crate::tag::Tag;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Hamming,
    Hash,
    Integer,
    #[serde(rename = "integer-bi")]
    BidirectionalInteger,
    Streak,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Hamming,
        MetricKind::Hash,
        MetricKind::Integer,
        MetricKind::BidirectionalInteger,
        MetricKind::Streak,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Hamming => "hamming",
            MetricKind::Hash => "hash",
            MetricKind::Integer => "integer",
            MetricKind::BidirectionalInteger => "integer-bi",
            MetricKind::Streak => "streak",
        }
    }

    pub fn is_commutative(self) -> bool {
        !matches!(self, MetricKind::Integer | MetricKind::Hash)
    }

    /// Whether identical tags are guaranteed raw distance 0.
    pub fn has_identity(self) -> bool {
        !matches!(self, MetricKind::Hash | MetricKind::Streak)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric {s:?}")))
    }
}

/// Dispatch to the raw distance function for `kind`.
pub fn raw_distance(kind: MetricKind, t: &Tag, u: &Tag) -> Result<f64> {
    t.check_same_width(u)?;
    Ok(raw_unchecked(kind, t, u))
}

pub(crate) fn raw_unchecked(kind: MetricKind, t: &Tag, u: &Tag) -> f64 {
    match kind {
        MetricKind::Hamming => hamming(t, u),
        MetricKind::Hash => hash(t, u),
        MetricKind::Integer => integer(t, u),
        MetricKind::BidirectionalInteger => integer_bi(t, u),
        MetricKind::Streak => streak(t, u),
    }
}

/// Fraction of mismatching positions.
pub fn hamming_raw(t: &Tag, u: &Tag) -> Result<f64> {
    t.check_same_width(u)?;
    Ok(hamming(t, u))
}

fn hamming(t: &Tag, u: &Tag) -> f64 {
    let diff: u32 = t
        .words()
        .iter()
        .zip(u.words())
        .map(|(a, b)| (a ^ b).count_ones())
        .sum();
    diff as f64 / t.width() as f64
}

/// Distance counting upward from `t` to `u`, wrapping at `2^n`:
/// `((f(u) - f(t)) mod 2^n) / 2^n`. Not commutative.
pub fn integer_raw(t: &Tag, u: &Tag) -> Result<f64> {
    t.check_same_width(u)?;
    Ok(integer(t, u))
}

fn integer(t: &Tag, u: &Tag) -> f64 {
    let width = t.width();
    let (tw, uw) = (t.words(), u.words());
    if tw.len() == 1 {
        let diff = uw[0].wrapping_sub(tw[0]) & mask(width);
        return scale_down(diff as f64, width as i32);
    }
    // multi-word subtraction modulo 2^width, then rescale from the top word
    let mut borrow = false;
    let mut diff = Vec::with_capacity(tw.len());
    for (a, b) in uw.iter().zip(tw) {
        let (d1, o1) = a.overflowing_sub(*b);
        let (d2, o2) = d1.overflowing_sub(borrow as u64);
        diff.push(d2);
        borrow = o1 || o2;
    }
    *diff.last_mut().unwrap() &= mask(width);
    diff.iter()
        .enumerate()
        .rev()
        .map(|(i, &w)| scale_down(w as f64, width as i32 - 64 * i as i32))
        .sum()
}

fn mask(width: usize) -> u64 {
    match width % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

fn scale_down(x: f64, exp: i32) -> f64 {
    x * 2f64.powi(-exp)
}

/// Shorter of the upward and downward counts between `t` and `u`.
pub fn integer_bi_raw(t: &Tag, u: &Tag) -> Result<f64> {
    t.check_same_width(u)?;
    Ok(integer_bi(t, u))
}

fn integer_bi(t: &Tag, u: &Tag) -> f64 {
    integer(t, u).min(integer(u, t))
}

/// Length of the longest run of consecutive positions where `t` and `u`
/// agree.
pub fn longest_match_streak(t: &Tag, u: &Tag) -> Result<usize> {
    t.check_same_width(u)?;
    Ok(longest_run(t, u, true))
}

/// Length of the longest run of consecutive positions where `t` and `u`
/// differ.
pub fn longest_mismatch_streak(t: &Tag, u: &Tag) -> Result<usize> {
    t.check_same_width(u)?;
    Ok(longest_run(t, u, false))
}

fn longest_run(t: &Tag, u: &Tag, matching: bool) -> usize {
    let width = t.width();
    let (tw, uw) = (t.words(), u.words());
    if tw.len() == 1 {
        let x = tw[0] ^ uw[0];
        let mut run = if matching { !x & mask(width) } else { x };
        // each round shortens every run of ones by one
        let mut len = 0;
        while run != 0 {
            run &= run >> 1;
            len += 1;
        }
        return len;
    }
    let mut best = 0;
    let mut cur = 0;
    for i in 0..width {
        if (t.get(i) == u.get(i)) == matching {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Approximate probability `(width - k + 1) / 2^k` of a `k`-long streak.
///
/// Deliberately unclamped: `streak_rarity(0, n) == n + 1`.
pub fn streak_rarity(k: usize, width: usize) -> Result<f64> {
    if k > width {
        return Err(Error::invalid(format!(
            "streak length {k} exceeds width {width}"
        )));
    }
    Ok(rarity(k, width))
}

fn rarity(k: usize, width: usize) -> f64 {
    (width - k + 1) as f64 * 2f64.powi(-(k as i32))
}

/// Streak distance `p(m) / (p(m) + p(n))` clamped to `[0, 1]`, where `m`
/// and `n` are the longest matching and mismatching streaks.
///
/// A long matching streak is rare, so identical tags land near 0 and
/// complementary tags near 1.
pub fn streak_raw(t: &Tag, u: &Tag) -> Result<f64> {
    t.check_same_width(u)?;
    Ok(streak(t, u))
}

fn streak(t: &Tag, u: &Tag) -> f64 {
    let width = t.width();
    let matched = rarity(longest_run(t, u, true), width);
    let mismatched = rarity(longest_run(t, u, false), width);
    (matched / (matched + mismatched)).clamp(0.0, 1.0)
}

/// SHA-1 of the packed bytes of `t` followed by those of `u`; the first
/// eight digest bytes, read big-endian as `k`, give `k / 2^64`.
///
/// The one value that rounds up to 1.0 in `f64` is pinned to the largest
/// double below 1.
pub fn hash_raw(t: &Tag, u: &Tag) -> Result<f64> {
    t.check_same_width(u)?;
    Ok(hash(t, u))
}

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

fn hash(t: &Tag, u: &Tag) -> f64 {
    let mut bytes = Vec::with_capacity(2 * t.width().div_ceil(8));
    t.extend_le_bytes(&mut bytes);
    u.extend_le_bytes(&mut bytes);
    let digest = Sha1::digest(&bytes);
    let k = u64::from_be_bytes(digest[..8].try_into().unwrap());
    (k as f64 * 2f64.powi(-64)).min(BELOW_ONE)
}
