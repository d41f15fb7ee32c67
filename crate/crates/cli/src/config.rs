//! Effective run configuration: defaults, then a flat JSON file, then flags.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use tagmatch::evolve::{default_sweep_flips, Structure};
use tagmatch::geometry::{PairOrder, DEFAULT_MAX_ATTEMPTS};
use tagmatch::normalizer::DEFAULT_SAMPLE_COUNT;
use tagmatch::stats::DEFAULT_RESAMPLES;
use tagmatch::variation::{Regime, StartMode};
use tagmatch::MetricKind;

pub const SEED_ENV: &str = "TAGMATCH_SEED";

/// A bad flag or config value; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryStat {
    Similarity,
    Dissimilarity,
    Detour,
}

impl GeometryStat {
    pub fn name(self) -> &'static str {
        match self {
            GeometryStat::Similarity => "similarity",
            GeometryStat::Dissimilarity => "dissimilarity",
            GeometryStat::Detour => "detour",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariationMode {
    Step,
    Walk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub metrics: Vec<MetricKind>,
    pub width: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub raw: bool,
    pub table_samples: usize,
    pub validation_samples: usize,
    pub resamples: usize,
    pub max_attempts: u64,

    pub stats: Vec<GeometryStat>,
    pub samples: usize,
    pub radius: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub pair_order: PairOrder,

    pub modes: Vec<VariationMode>,
    pub regimes: Vec<Regime>,
    pub start_modes: Vec<StartMode>,
    pub walks: usize,
    pub steps: usize,

    pub nodes: usize,
    pub degree: usize,
    pub structure: Structure,
    pub graph: Option<PathBuf>,
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub replicates: usize,
    pub flips: f64,
    pub sweep: bool,
    pub sweep_flips: Vec<f64>,
    pub sweep_replicates: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            metrics: MetricKind::ALL.to_vec(),
            width: 32,
            seed: 0,
            out: PathBuf::from("out"),
            raw: false,
            table_samples: DEFAULT_SAMPLE_COUNT,
            validation_samples: 10_000,
            resamples: DEFAULT_RESAMPLES,
            max_attempts: DEFAULT_MAX_ATTEMPTS,

            stats: vec![
                GeometryStat::Similarity,
                GeometryStat::Dissimilarity,
                GeometryStat::Detour,
            ],
            samples: 5_000,
            radius: 0.01,
            inner_radius: 0.01,
            outer_radius: 0.99,
            pair_order: PairOrder::Discovery,

            modes: vec![VariationMode::Step, VariationMode::Walk],
            regimes: vec![Regime::Loose, Regime::Tight],
            start_modes: vec![StartMode::Identical, StartMode::SampledClose],
            walks: 1_000,
            steps: 65,

            nodes: 32,
            degree: 1,
            structure: Structure::Regular,
            graph: None,
            population: 500,
            generations: 512,
            tournament: 7,
            replicates: 10,
            flips: 2.0,
            sweep: false,
            sweep_flips: default_sweep_flips(),
            sweep_replicates: 10,
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with `file` (if any). The seed falls back to
    /// `TAGMATCH_SEED` when the file does not set one.
    pub fn load(file: Option<&Path>) -> anyhow::Result<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;
        let mut seed_from_file = false;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let overrides: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)
                .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
            seed_from_file = overrides.contains_key("seed");
            let target = value.as_object_mut().expect("config serializes to an object");
            for (k, v) in overrides {
                if !target.contains_key(&k) {
                    return Err(UsageError(format!("config {}: unknown key {k:?}", path.display())).into());
                }
                target.insert(k, v);
            }
        }
        let mut config: RunConfig = serde_json::from_value(value)
            .map_err(|e| UsageError(format!("config: {e}")))?;
        if !seed_from_file {
            if let Ok(s) = std::env::var(SEED_ENV) {
                config.seed = s
                    .trim()
                    .parse()
                    .map_err(|_| UsageError(format!("{SEED_ENV}={s:?} is not a 64-bit unsigned integer")))?;
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let fail = |msg: String| Err(UsageError(msg));
        if self.metrics.is_empty() {
            return fail("at least one metric is required".into());
        }
        for (name, v) in [
            ("width", self.width),
            ("table_samples", self.table_samples),
            ("validation_samples", self.validation_samples),
            ("resamples", self.resamples),
            ("samples", self.samples),
            ("steps", self.steps),
            ("population", self.population),
            ("generations", self.generations),
            ("tournament", self.tournament),
            ("replicates", self.replicates),
            ("sweep_replicates", self.sweep_replicates),
        ] {
            if v == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if self.max_attempts == 0 {
            return fail("max_attempts must be at least 1".into());
        }
        if self.walks < 2 {
            return fail(format!("walks must be at least 2, got {}", self.walks));
        }
        if !(0.0 < self.radius && self.radius < 1.0) {
            return fail(format!("radius {} outside (0, 1)", self.radius));
        }
        if !(0.0 < self.inner_radius && self.inner_radius < self.outer_radius && self.outer_radius < 1.0) {
            return fail(format!(
                "radii must satisfy 0 < inner < outer < 1, got {} and {}",
                self.inner_radius, self.outer_radius
            ));
        }
        if self.nodes < 2 || self.nodes % 2 != 0 {
            return fail(format!("nodes must be a positive even number, got {}", self.nodes));
        }
        if !(1..=2).contains(&self.degree) {
            return fail(format!("degree must be 1 or 2, got {}", self.degree));
        }
        if self.tournament > self.population {
            return fail(format!(
                "tournament {} exceeds population {}",
                self.tournament, self.population
            ));
        }
        if !(self.flips >= 0.0) {
            return fail(format!("flips must be non-negative, got {}", self.flips));
        }
        if self.sweep_flips.is_empty() || self.sweep_flips.iter().any(|f| !(*f >= 0.0)) {
            return fail("sweep_flips must be a non-empty list of non-negative values".into());
        }
        Ok(())
    }
}
