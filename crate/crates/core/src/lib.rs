//! Bitstring tag matching.
//!
//! Five raw tag-matching metrics (hamming, hash, integer, bidirectional
//! integer, streak), an empirical-CDF normalizer that maps raw distances onto
//! a uniform scale, and the Monte Carlo analyses built on top of them:
//! geometric constraint statistics, single-step and walk mutation analyses,
//! and a graph-matching evolutionary benchmark.
//!
//! Monte Carlo loops run through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.
//! Every sample derives its own [`RngStream`] from a seed and its index, so
//! results are identical under either backend and any thread count.

pub mod engine;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod metrics;
pub mod normalizer;
pub mod par;
pub mod rng;
pub mod stats;
pub mod tag;
pub mod variation;

pub use engine::MatchEngine;
pub use error::{Error, Result};
pub use metrics::MetricKind;
pub use normalizer::NormalizationTable;
pub use rng::{derive_stream, RngStream};
pub use tag::Tag;
