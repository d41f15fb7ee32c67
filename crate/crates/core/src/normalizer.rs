//! Empirical-CDF normalization of raw match distances.
//!
//! A table holds the sorted raw distances of `sample_count` random tag pairs
//! with 0.0 and 1.0 added at the ends. Entry `i` of the `L` entries sits at
//! percentile `i / (L - 1)`. Normalizing a raw value returns its percentile:
//! the mean percentile of all exactly-equal entries when it is present, else
//! a linear interpolation between the two flanking entries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{raw_unchecked, MetricKind};
use crate::par;
use crate::rng::RngStream;
use crate::tag::Tag;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationTable {
    metric: MetricKind,
    width: usize,
    entries: Vec<f64>,
    build_seed: u64,
}

/// Sample `sample_count` random pairs and build the table.
///
/// Pair `i` is drawn from stream `i` of a seed forked off `rng`; the recorded
/// `build_seed` is `rng`'s root seed.
pub fn build_table(
    metric: MetricKind,
    width: usize,
    sample_count: usize,
    rng: &mut RngStream,
) -> Result<NormalizationTable> {
    if sample_count == 0 {
        return Err(Error::invalid("sample_count must be at least 1"));
    }
    Tag::zeros(width)?;
    let build_seed = rng.root_seed();
    let base = rng.fork_seed();
    let mut entries = Vec::with_capacity(sample_count + 2);
    entries.push(0.0);
    entries.extend(par::map_indexed(sample_count, |i| {
        let mut r = RngStream::derive(base, i as u64);
        let t = Tag::random(width, &mut r).expect("width checked");
        let u = Tag::random(width, &mut r).expect("width checked");
        raw_unchecked(metric, &t, &u)
    }));
    entries.push(1.0);
    entries[1..=sample_count].sort_by(f64::total_cmp);
    NormalizationTable::from_entries(metric, width, entries, build_seed)
}

impl NormalizationTable {
    /// Assemble a table from a full sentinel-bracketed entry list.
    pub fn from_entries(
        metric: MetricKind,
        width: usize,
        entries: Vec<f64>,
        build_seed: u64,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::format("width", "must be at least 1"));
        }
        if entries.len() < 3 {
            return Err(Error::format("entries", "need at least one sample plus sentinels"));
        }
        if entries[0] != 0.0 || *entries.last().unwrap() != 1.0 {
            return Err(Error::format("entries", "must start at 0.0 and end at 1.0"));
        }
        if let Some(bad) = entries.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::format("entries", format!("value {bad} outside [0, 1]")));
        }
        if entries.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::format("entries", "not sorted ascending"));
        }
        Ok(NormalizationTable {
            metric,
            width,
            entries,
            build_seed,
        })
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn sample_count(&self) -> usize {
        self.entries.len() - 2
    }

    pub fn build_seed(&self) -> u64 {
        self.build_seed
    }

    /// Percentile of `raw` among the table entries.
    pub fn normalize(&self, raw: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&raw) {
            return Err(Error::invalid(format!("raw distance {raw} outside [0, 1]")));
        }
        Ok(self.normalize_unchecked(raw))
    }

    pub(crate) fn normalize_unchecked(&self, raw: f64) -> f64 {
        let e = &self.entries;
        let last = (e.len() - 1) as f64;
        let lo = e.partition_point(|&x| x < raw);
        let hi = lo + e[lo..].partition_point(|&x| x <= raw);
        if hi > lo {
            // mean of percentiles lo..hi
            return (lo + hi - 1) as f64 / 2.0 / last;
        }
        // e[lo - 1] < raw < e[lo]; sentinels guarantee both exist
        let (below, above) = (e[lo - 1], e[lo]);
        let frac = (raw - below) / (above - below);
        ((lo - 1) as f64 + frac) / last
    }

    /// Render in the versioned text format.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 24 + 96);
        let _ = writeln!(out, "version {FORMAT_VERSION}");
        let _ = writeln!(out, "metric {}", self.metric);
        let _ = writeln!(out, "width {}", self.width);
        let _ = writeln!(out, "sample_count {}", self.sample_count());
        let _ = writeln!(out, "build_seed {}", self.build_seed);
        for e in &self.entries {
            // shortest round-trip decimal
            let _ = writeln!(out, "{e:?}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let version: u32 = header(&mut lines, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let metric: MetricKind = header(&mut lines, "metric")?;
        let width: usize = header(&mut lines, "width")?;
        let sample_count: usize = header(&mut lines, "sample_count")?;
        let build_seed: u64 = header(&mut lines, "build_seed")?;
        let entries = lines
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::format("entries", format!("{l:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if entries.len() != sample_count + 2 {
            return Err(Error::format(
                "sample_count",
                format!(
                    "header says {sample_count} samples but file has {} entries",
                    entries.len()
                ),
            ));
        }
        Self::from_entries(metric, width, entries, build_seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Free-function alias of [`NormalizationTable::normalize`].
pub fn normalize(table: &NormalizationTable, raw: f64) -> Result<f64> {
    table.normalize(raw)
}

pub fn save_table(table: &NormalizationTable, path: impl AsRef<Path>) -> Result<()> {
    table.save(path)
}

pub fn load_table(path: impl AsRef<Path>) -> Result<NormalizationTable> {
    NormalizationTable::load(path)
}

fn header<'a, T>(lines: &mut impl Iterator<Item = &'a str>, field: &'static str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    let line = lines
        .next()
        .ok_or_else(|| Error::format(field, "missing header line"))?;
    let value = line
        .strip_prefix(field)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::format(field, format!("expected `{field} <value>`, got {line:?}")))?;
    value
        .trim()
        .parse()
        .map_err(|e| Error::format(field, format!("{value:?}: {e}")))
}
