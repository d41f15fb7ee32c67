//! The distance oracle shared by every analysis.

use std::cmp::Ordering;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::metrics::{raw_unchecked, MetricKind};
use crate::normalizer::NormalizationTable;
use crate::tag::Tag;

/// A metric at a fixed tag width, optionally normalized through a table.
///
/// Argument order is `(query, operand)`; it matters for the integer and hash
/// metrics.
#[derive(Clone, Debug)]
pub struct MatchEngine {
    metric: MetricKind,
    width: usize,
    table: Option<Arc<NormalizationTable>>,
}

impl MatchEngine {
    /// Normalized engine; the table's metric and width define the engine.
    pub fn new(table: impl Into<Arc<NormalizationTable>>) -> Self {
        let table = table.into();
        MatchEngine {
            metric: table.metric(),
            width: table.width(),
            table: Some(table),
        }
    }

    /// Normalized engine that insists the table was built for `metric` at
    /// `width`.
    pub fn with_table(
        metric: MetricKind,
        width: usize,
        table: impl Into<Arc<NormalizationTable>>,
    ) -> Result<Self> {
        let table = table.into();
        if table.metric() != metric || table.width() != width {
            return Err(Error::invalid(format!(
                "table built for {} at width {} cannot serve {metric} at width {width}",
                table.metric(),
                table.width()
            )));
        }
        Ok(Self::new(table))
    }

    /// Engine reporting raw, unnormalized distances.
    pub fn raw(metric: MetricKind, width: usize) -> Result<Self> {
        Tag::zeros(width)?;
        Ok(MatchEngine {
            metric,
            width,
            table: None,
        })
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn table(&self) -> Option<&NormalizationTable> {
        self.table.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.table.is_some()
    }

    pub fn distance(&self, query: &Tag, operand: &Tag) -> Result<f64> {
        self.check(query)?;
        self.check(operand)?;
        Ok(self.distance_unchecked(query, operand))
    }

    pub(crate) fn distance_unchecked(&self, query: &Tag, operand: &Tag) -> f64 {
        let raw = raw_unchecked(self.metric, query, operand);
        match &self.table {
            Some(t) => t.normalize_unchecked(raw),
            None => raw,
        }
    }

    /// Indices of the `k` operands closest to `query`, nearest first, ties
    /// to the lower index.
    pub fn best_k_matches(&self, query: &Tag, operands: &[Tag], k: usize) -> Result<Vec<usize>> {
        if operands.is_empty() {
            return Err(Error::invalid("operand list is empty"));
        }
        if k == 0 || k > operands.len() {
            return Err(Error::invalid(format!(
                "k = {k} outside 1..={}",
                operands.len()
            )));
        }
        self.check(query)?;
        for op in operands {
            self.check(op)?;
        }
        let dists: Vec<f64> = operands
            .iter()
            .map(|op| self.distance_unchecked(query, op))
            .collect();
        Ok(best_k_indices(&dists, k).into_vec())
    }

    pub(crate) fn check(&self, tag: &Tag) -> Result<()> {
        if tag.width() != self.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: tag.width(),
            });
        }
        Ok(())
    }
}

fn closer(a: (f64, usize), b: (f64, usize)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Equal => a.1 < b.1,
        Ordering::Greater => false,
    }
}

/// The `k` smallest entries of `dists` by `(distance, index)`, in order.
///
/// Insertion into a `k`-slot buffer: `O(n k)`, which beats sorting for the
/// handful of best matches the analyses ask for.
pub(crate) fn best_k_indices(dists: &[f64], k: usize) -> SmallVec<[usize; 4]> {
    debug_assert!(k >= 1 && k <= dists.len());
    let mut best: SmallVec<[(f64, usize); 4]> = SmallVec::with_capacity(k);
    for (i, &d) in dists.iter().enumerate() {
        let cand = (d, i);
        if best.len() == k {
            if !closer(cand, best[k - 1]) {
                continue;
            }
            best.pop();
        }
        let pos = best.iter().position(|&b| closer(cand, b)).unwrap_or(best.len());
        best.insert(pos, cand);
    }
    best.into_iter().map(|(_, i)| i).collect()
}
