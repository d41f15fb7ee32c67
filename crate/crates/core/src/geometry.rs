//! Rejection-sampling estimators of geometric constraint.
//!
//! * similarity constraint: distance between two tags that both sit within
//!   `radius` of a random target;
//! * dissimilarity constraint: distance between a tag within `inner_radius`
//!   of a target and one at least `outer_radius` away from it;
//! * detour difference: `d(A, B) + d(B, C) - d(A, C)` for random triplets.
//!
//! Radius checks measure `d(target, candidate)`. The pair statistic measures
//! `d(first, second)` in discovery order unless [`PairOrder::Swapped`] is
//! requested.

use serde::{Deserialize, Serialize};

use crate::engine::MatchEngine;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::RngStream;
use crate::tag::Tag;

/// Draw budget per constrained tag.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairOrder {
    #[default]
    Discovery,
    Swapped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySample {
    /// `R` for the constraint statistics, `A` for detours.
    pub target: Tag,
    /// `S1`, or the waypoint `B`.
    pub secondary_a: Tag,
    /// `S2`, or the endpoint `C`.
    pub secondary_b: Tag,
    pub statistic: f64,
    /// Random candidate tags drawn while searching for this sample.
    pub attempts: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct ConstraintSampler<'a> {
    engine: &'a MatchEngine,
    max_attempts: u64,
    pair_order: PairOrder,
}

impl<'a> ConstraintSampler<'a> {
    pub fn new(engine: &'a MatchEngine) -> Self {
        ConstraintSampler {
            engine,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            pair_order: PairOrder::Discovery,
        }
    }

    pub fn max_attempts(mut self, max_attempts: u64) -> Self {
        self.max_attempts = max_attempts;
        self
    }

    pub fn pair_order(mut self, pair_order: PairOrder) -> Self {
        self.pair_order = pair_order;
        self
    }

    pub fn similarity(&self, radius: f64, count: usize, rng: &mut RngStream) -> Result<Vec<GeometrySample>> {
        if !(radius > 0.0 && radius < 1.0) {
            return Err(Error::invalid(format!("radius {radius} outside (0, 1)")));
        }
        self.check_budget()?;
        let base = rng.fork_seed();
        par::try_map_indexed(count, |i| {
            let mut r = RngStream::derive(base, i as u64);
            let target = self.random_tag(&mut r);
            let (a, na) = self.search(&target, &mut r, radius, |d| d <= radius)?;
            let (b, nb) = self.search(&target, &mut r, radius, |d| d <= radius)?;
            Ok(self.pair_sample(target, a, b, na + nb))
        })
    }

    pub fn dissimilarity(
        &self,
        inner_radius: f64,
        outer_radius: f64,
        count: usize,
        rng: &mut RngStream,
    ) -> Result<Vec<GeometrySample>> {
        if !(0.0 < inner_radius && inner_radius < outer_radius && outer_radius < 1.0) {
            return Err(Error::invalid(format!(
                "radii must satisfy 0 < inner < outer < 1, got {inner_radius} and {outer_radius}"
            )));
        }
        self.check_budget()?;
        let base = rng.fork_seed();
        par::try_map_indexed(count, |i| {
            let mut r = RngStream::derive(base, i as u64);
            let target = self.random_tag(&mut r);
            let (a, na) = self.search(&target, &mut r, inner_radius, |d| d <= inner_radius)?;
            let (b, nb) = self.search(&target, &mut r, outer_radius, |d| d >= outer_radius)?;
            Ok(self.pair_sample(target, a, b, na + nb))
        })
    }

    fn pair_sample(&self, target: Tag, a: Tag, b: Tag, attempts: u64) -> GeometrySample {
        let statistic = match self.pair_order {
            PairOrder::Discovery => self.engine.distance_unchecked(&a, &b),
            PairOrder::Swapped => self.engine.distance_unchecked(&b, &a),
        };
        GeometrySample {
            target,
            secondary_a: a,
            secondary_b: b,
            statistic,
            attempts,
        }
    }

    fn random_tag(&self, rng: &mut RngStream) -> Tag {
        Tag::random(self.engine.width(), rng).expect("engine width is valid")
    }

    fn search(
        &self,
        target: &Tag,
        rng: &mut RngStream,
        radius: f64,
        accept: impl Fn(f64) -> bool,
    ) -> Result<(Tag, u64)> {
        for n in 1..=self.max_attempts {
            let cand = self.random_tag(rng);
            if accept(self.engine.distance_unchecked(target, &cand)) {
                return Ok((cand, n));
            }
        }
        Err(Error::SamplingBudgetExceeded {
            metric: self.engine.metric(),
            radius,
            max_attempts: self.max_attempts,
        })
    }

    fn check_budget(&self) -> Result<()> {
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be at least 1"));
        }
        Ok(())
    }
}

pub fn sample_similarity_constraint(
    engine: &MatchEngine,
    radius: f64,
    count: usize,
    rng: &mut RngStream,
    max_attempts: u64,
) -> Result<Vec<GeometrySample>> {
    ConstraintSampler::new(engine)
        .max_attempts(max_attempts)
        .similarity(radius, count, rng)
}

pub fn sample_dissimilarity_constraint(
    engine: &MatchEngine,
    inner_radius: f64,
    outer_radius: f64,
    count: usize,
    rng: &mut RngStream,
    max_attempts: u64,
) -> Result<Vec<GeometrySample>> {
    ConstraintSampler::new(engine)
        .max_attempts(max_attempts)
        .dissimilarity(inner_radius, outer_radius, count, rng)
}

/// `d(A, B) + d(B, C) - d(A, C)` for `count` independent random triplets.
pub fn sample_detour_difference(
    engine: &MatchEngine,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<GeometrySample>> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let base = rng.fork_seed();
    Ok(par::map_indexed(count, |i| {
        let mut r = RngStream::derive(base, i as u64);
        let w = engine.width();
        let a = Tag::random(w, &mut r).expect("engine width is valid");
        let b = Tag::random(w, &mut r).expect("engine width is valid");
        let c = Tag::random(w, &mut r).expect("engine width is valid");
        let statistic = detour(engine, &a, &b, &c);
        GeometrySample {
            target: a,
            secondary_a: b,
            secondary_b: c,
            statistic,
            attempts: 1,
        }
    }))
}

pub(crate) fn detour(engine: &MatchEngine, a: &Tag, b: &Tag, c: &Tag) -> f64 {
    engine.distance_unchecked(a, b) + engine.distance_unchecked(b, c)
        - engine.distance_unchecked(a, c)
}

/// Statistic values of a batch of samples.
pub fn statistics(samples: &[GeometrySample]) -> Vec<f64> {
    samples.iter().map(|s| s.statistic).collect()
}
