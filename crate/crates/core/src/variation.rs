//! Mutational perturbation of tag matches.
//!
//! Single-step sampling measures how one bit flip of a secondary tag moves
//! its distance to a reference tag. Walks apply a sequence of uniformly
//! chosen bit flips (repeats allowed) and track the distance back to a fixed
//! anchor after every flip.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::MatchEngine;
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_MAX_ATTEMPTS;
use crate::par;
use crate::rng::RngStream;
use crate::stats::{self, DEFAULT_ALPHA, DEFAULT_RESAMPLES};
use crate::tag::{random_index, Tag};

/// Threshold below which a pair counts as tightly matched.
pub const TIGHT_THRESHOLD: f64 = 0.01;
/// Threshold above which a pair counts as loosely matched.
pub const LOOSE_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Pre-mutation distance strictly above 0.5.
    Loose,
    /// Pre-mutation distance strictly below 0.01.
    Tight,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Loose => "loose",
            Regime::Tight => "tight",
        }
    }

    fn accepts(self, d: f64) -> bool {
        match self {
            Regime::Loose => d > LOOSE_THRESHOLD,
            Regime::Tight => d < TIGHT_THRESHOLD,
        }
    }

    fn threshold(self) -> f64 {
        match self {
            Regime::Loose => LOOSE_THRESHOLD,
            Regime::Tight => TIGHT_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartMode {
    /// Walker starts as an exact copy of the anchor.
    Identical,
    /// Walker starts as a random tag within distance 0.01 of the anchor.
    SampledClose,
}

impl StartMode {
    pub fn name(self) -> &'static str {
        match self {
            StartMode::Identical => "identical",
            StartMode::SampledClose => "sampled-close",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSample {
    pub regime: Regime,
    pub reference: Tag,
    pub secondary: Tag,
    pub flipped_index: usize,
    pub pre_distance: f64,
    pub post_distance: f64,
    /// `post_distance - pre_distance`.
    pub perturbation: f64,
}

impl StepSample {
    pub fn mutated(&self) -> Tag {
        self.secondary
            .flip_bit(self.flipped_index)
            .expect("flipped index is within width")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkTrace {
    pub walk_id: usize,
    pub start_mode: StartMode,
    /// Distance to the anchor before any flip (index 0) and after each flip.
    pub step_distances: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepAggregate {
    pub step: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Clone, Debug)]
pub struct WalkEnsemble {
    pub traces: Vec<WalkTrace>,
    pub aggregates: Vec<StepAggregate>,
}

#[derive(Clone, Copy, Debug)]
pub struct EnsembleOptions {
    pub resamples: usize,
    pub alpha: f64,
    pub max_attempts: u64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            resamples: DEFAULT_RESAMPLES,
            alpha: DEFAULT_ALPHA,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

fn random_tag(engine: &MatchEngine, rng: &mut RngStream) -> Tag {
    Tag::random(engine.width(), rng).expect("engine width is valid")
}

fn search(
    engine: &MatchEngine,
    anchor: &Tag,
    rng: &mut RngStream,
    max_attempts: u64,
    threshold: f64,
    accept: impl Fn(f64) -> bool,
) -> Result<(Tag, f64)> {
    for _ in 0..max_attempts {
        let cand = random_tag(engine, rng);
        let d = engine.distance_unchecked(anchor, &cand);
        if accept(d) {
            return Ok((cand, d));
        }
    }
    Err(Error::SamplingBudgetExceeded {
        metric: engine.metric(),
        radius: threshold,
        max_attempts,
    })
}

/// `count` single-bit perturbations of pairs drawn from `regime`.
pub fn sample_single_step(
    engine: &MatchEngine,
    regime: Regime,
    count: usize,
    rng: &mut RngStream,
    max_attempts: u64,
) -> Result<Vec<StepSample>> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    if max_attempts == 0 {
        return Err(Error::invalid("max_attempts must be at least 1"));
    }
    let base = rng.fork_seed();
    par::try_map_indexed(count, |i| {
        let mut r = RngStream::derive(base, i as u64);
        let reference = random_tag(engine, &mut r);
        let (secondary, pre) = search(
            engine,
            &reference,
            &mut r,
            max_attempts,
            regime.threshold(),
            |d| regime.accepts(d),
        )?;
        let flipped_index = random_index(engine.width(), &mut r);
        let mutated = secondary.flip_bit(flipped_index)?;
        let post = engine.distance_unchecked(&reference, &mutated);
        Ok(StepSample {
            regime,
            reference,
            secondary,
            flipped_index,
            pre_distance: pre,
            post_distance: post,
            perturbation: post - pre,
        })
    })
}

/// One walk of `steps` random bit flips away from the start.
pub fn mutational_walk(
    engine: &MatchEngine,
    steps: usize,
    start_mode: StartMode,
    rng: &mut RngStream,
    max_attempts: u64,
) -> Result<WalkTrace> {
    walk(engine, steps, start_mode, rng, max_attempts, 0)
}

fn walk(
    engine: &MatchEngine,
    steps: usize,
    start_mode: StartMode,
    rng: &mut RngStream,
    max_attempts: u64,
    walk_id: usize,
) -> Result<WalkTrace> {
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    let anchor = random_tag(engine, rng);
    let mut walker = match start_mode {
        StartMode::Identical => anchor.clone(),
        StartMode::SampledClose => {
            search(engine, &anchor, rng, max_attempts, TIGHT_THRESHOLD, |d| {
                d < TIGHT_THRESHOLD
            })?
            .0
        }
    };
    let mut step_distances = Vec::with_capacity(steps + 1);
    step_distances.push(engine.distance_unchecked(&anchor, &walker));
    for _ in 0..steps {
        walker.toggle(rng.random_range(0..engine.width()))?;
        step_distances.push(engine.distance_unchecked(&anchor, &walker));
    }
    Ok(WalkTrace {
        walk_id,
        start_mode,
        step_distances,
    })
}

pub fn run_walk_ensemble(
    engine: &MatchEngine,
    walks: usize,
    steps: usize,
    start_mode: StartMode,
    rng: &mut RngStream,
) -> Result<WalkEnsemble> {
    run_walk_ensemble_with(engine, walks, steps, start_mode, rng, &EnsembleOptions::default())
}

/// Walk `i` uses stream `i` of one forked seed; the bootstrap for step `s`
/// uses stream `s` of a second.
pub fn run_walk_ensemble_with(
    engine: &MatchEngine,
    walks: usize,
    steps: usize,
    start_mode: StartMode,
    rng: &mut RngStream,
    options: &EnsembleOptions,
) -> Result<WalkEnsemble> {
    if walks < 2 {
        return Err(Error::invalid("an ensemble needs at least 2 walks"));
    }
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    let walk_base = rng.fork_seed();
    let traces = par::try_map_indexed(walks, |i| {
        let mut r = RngStream::derive(walk_base, i as u64);
        walk(engine, steps, start_mode, &mut r, options.max_attempts, i)
    })?;
    let ci_base = rng.fork_seed();
    let aggregates = par::try_map_indexed(steps + 1, |step| {
        let column: Vec<f64> = traces.iter().map(|t| t.step_distances[step]).collect();
        let mut r = RngStream::derive(ci_base, step as u64);
        let s = stats::summarize_with(&column, options.resamples, options.alpha, &mut r)?;
        Ok(StepAggregate {
            step,
            mean: s.mean,
            sd: s.sd,
            ci_lo: s.ci_lo,
            ci_hi: s.ci_hi,
        })
    })?;
    Ok(WalkEnsemble { traces, aggregates })
}
