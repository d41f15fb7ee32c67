use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use tagmatch::evolve::Structure;
use tagmatch::geometry::PairOrder;
use tagmatch::variation::{Regime, StartMode};
use tagmatch::MetricKind;

use crate::config::{GeometryStat, RunConfig, VariationMode};

#[derive(Parser, Debug)]
#[command(name = "tagmatch", version, about = "Tag-matching metric experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build normalization tables and measure their uniformity.
    Normalize(NormalizeArgs),
    /// Similarity, dissimilarity and detour statistics.
    Geometry(GeometryArgs),
    /// Single-step mutation samples and mutational walks.
    Variation(VariationArgs),
    /// Graph-matching evolution, optionally with a mutation-rate sweep.
    Evolve(EvolveArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Normalize(_) => "normalize",
            Command::Geometry(_) => "geometry",
            Command::Variation(_) => "variation",
            Command::Evolve(_) => "evolve",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Normalize(a) => &a.common,
            Command::Geometry(a) => &a.common,
            Command::Variation(a) => &a.common,
            Command::Evolve(a) => &a.common,
        }
    }

    /// Overlay the flags given on the command line onto `config`.
    pub fn apply(&self, config: &mut RunConfig) {
        self.common().apply(config);
        match self {
            Command::Normalize(a) => {
                set(&mut config.validation_samples, a.validation_samples);
            }
            Command::Geometry(a) => {
                set_vec(&mut config.stats, &a.stat);
                set(&mut config.samples, a.samples);
                set(&mut config.radius, a.radius);
                set(&mut config.inner_radius, a.inner_radius);
                set(&mut config.outer_radius, a.outer_radius);
                set(&mut config.pair_order, a.pair_order);
                set(&mut config.max_attempts, a.max_attempts);
                set(&mut config.resamples, a.resamples);
            }
            Command::Variation(a) => {
                set_vec(&mut config.modes, &a.mode);
                set_vec(&mut config.regimes, &a.regime);
                set_vec(&mut config.start_modes, &a.start_mode);
                set(&mut config.samples, a.samples);
                set(&mut config.walks, a.walks);
                set(&mut config.steps, a.steps);
                set(&mut config.max_attempts, a.max_attempts);
                set(&mut config.resamples, a.resamples);
            }
            Command::Evolve(a) => {
                set(&mut config.nodes, a.nodes);
                set(&mut config.degree, a.degree);
                set(&mut config.structure, a.structure);
                if a.graph.is_some() {
                    config.graph = a.graph.clone();
                }
                set(&mut config.population, a.population);
                set(&mut config.generations, a.generations);
                set(&mut config.tournament, a.tournament);
                set(&mut config.replicates, a.replicates);
                set(&mut config.flips, a.flips);
                config.sweep |= a.sweep;
                set_vec(&mut config.sweep_flips, &a.sweep_flips);
                set(&mut config.sweep_replicates, a.sweep_replicates);
            }
        }
    }
}

fn set<T: Clone>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_vec<T: Clone>(slot: &mut Vec<T>, flag: &[T]) {
    if !flag.is_empty() {
        *slot = flag.to_vec();
    }
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Flat JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Metric(s) to run; repeat or comma-separate. Defaults to all five.
    #[arg(long, value_delimiter = ',', value_parser = kebab::<MetricKind>)]
    pub metric: Vec<MetricKind>,
    #[arg(long, value_parser = positive)]
    pub width: Option<usize>,
    /// Root seed (falls back to the config file, then TAGMATCH_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, value_parser = positive)]
    pub jobs: Option<usize>,
    /// Random tag pairs per normalization table.
    #[arg(long, value_parser = positive)]
    pub table_samples: Option<usize>,
    /// Report raw metric values instead of normalized distances.
    #[arg(long)]
    pub raw: bool,
}

impl CommonArgs {
    fn apply(&self, config: &mut RunConfig) {
        set_vec(&mut config.metrics, &self.metric);
        set(&mut config.width, self.width);
        set(&mut config.seed, self.seed);
        set(&mut config.out, self.out.clone());
        set(&mut config.table_samples, self.table_samples);
        config.raw |= self.raw;
    }
}

#[derive(Args, Debug)]
pub struct NormalizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Fresh random pairs used to measure uniformity.
    #[arg(long, value_parser = positive)]
    pub validation_samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Statistic(s): similarity, dissimilarity, detour. Defaults to all.
    #[arg(long, value_delimiter = ',', value_parser = kebab::<GeometryStat>)]
    pub stat: Vec<GeometryStat>,
    #[arg(long, value_parser = positive)]
    pub samples: Option<usize>,
    /// Similarity radius.
    #[arg(long, value_parser = open_unit)]
    pub radius: Option<f64>,
    #[arg(long, value_parser = open_unit)]
    pub inner_radius: Option<f64>,
    #[arg(long, value_parser = open_unit)]
    pub outer_radius: Option<f64>,
    /// Argument order of the final pair distance: discovery or swapped.
    #[arg(long, value_parser = kebab::<PairOrder>)]
    pub pair_order: Option<PairOrder>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_attempts: Option<u64>,
    /// Bootstrap resamples for confidence intervals.
    #[arg(long, value_parser = positive)]
    pub resamples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VariationArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// step, walk, or both.
    #[arg(long, value_delimiter = ',', value_parser = kebab::<VariationMode>)]
    pub mode: Vec<VariationMode>,
    /// loose, tight, or both.
    #[arg(long, value_delimiter = ',', value_parser = kebab::<Regime>)]
    pub regime: Vec<Regime>,
    /// identical, sampled-close, or both.
    #[arg(long, value_delimiter = ',', value_parser = kebab::<StartMode>)]
    pub start_mode: Vec<StartMode>,
    /// Single-step samples per regime.
    #[arg(long, value_parser = positive)]
    pub samples: Option<usize>,
    #[arg(long, value_parser = at_least_two)]
    pub walks: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub steps: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_attempts: Option<u64>,
    #[arg(long, value_parser = positive)]
    pub resamples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = even_positive)]
    pub nodes: Option<usize>,
    #[arg(long, value_parser = degree)]
    pub degree: Option<usize>,
    /// regular or irregular.
    #[arg(long, value_parser = kebab::<Structure>)]
    pub structure: Option<Structure>,
    /// Load the target graph from a file instead of generating one.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, value_parser = positive)]
    pub population: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub generations: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub tournament: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub replicates: Option<usize>,
    /// Expected bit flips per genome when not sweeping.
    #[arg(long, value_parser = non_negative)]
    pub flips: Option<f64>,
    /// Sweep mutation rates and run the replicates at the best one.
    #[arg(long)]
    pub sweep: bool,
    /// Expected flips per genome to sweep; defaults to ten log-spaced values
    /// from 0.75 to 16.
    #[arg(long, value_delimiter = ',', value_parser = non_negative)]
    pub sweep_flips: Vec<f64>,
    #[arg(long, value_parser = positive)]
    pub sweep_replicates: Option<usize>,
}

fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match positive(s)? {
        1 => Err("must be at least 2".into()),
        v => Ok(v),
    }
}

fn even_positive(s: &str) -> Result<usize, String> {
    match positive(s)? {
        v if v % 2 == 0 => Ok(v),
        _ => Err("must be even".into()),
    }
}

fn degree(s: &str) -> Result<usize, String> {
    match positive(s)? {
        d @ (1 | 2) => Ok(d),
        _ => Err("only degrees 1 and 2 are supported".into()),
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must be a non-negative number".into())
    }
}
