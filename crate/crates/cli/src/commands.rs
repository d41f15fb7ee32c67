use std::path::PathBuf;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use tagmatch::evolve::{
    generate_target_graph, mutation_rate_sweep, replicate_seed, run_replicates, EvolutionConfig,
    TargetGraph, Trajectory,
};
use tagmatch::geometry::{self, ConstraintSampler};
use tagmatch::normalizer::{build_table, NormalizationTable};
use tagmatch::stats::{self, Summary, DEFAULT_ALPHA};
use tagmatch::variation::{self, EnsembleOptions, Regime, StartMode};
use tagmatch::{derive_stream, MatchEngine, MetricKind, RngStream, Tag};

use crate::config::{GeometryStat, RunConfig, VariationMode};
use crate::output::{ensure_dir, num, write_json, Csv};

// Stream purposes; the stream id of a purpose for a metric is
// `purpose << 8 | metric`.
const TABLE: u64 = 1;
const VALIDATION: u64 = 2;
const SIMILARITY: u64 = 3;
const DISSIMILARITY: u64 = 4;
const DETOUR: u64 = 5;
const STEP_LOOSE: u64 = 6;
const STEP_TIGHT: u64 = 7;
const WALK_IDENTICAL: u64 = 8;
const WALK_SAMPLED: u64 = 9;
const GRAPH: u64 = 10;
const SWEEP: u64 = 11;
const REPLICATES: u64 = 12;
const SUMMARY_CI: u64 = 0x80;

fn stream(config: &RunConfig, purpose: u64, metric: MetricKind) -> RngStream {
    derive_stream(config.seed, purpose << 8 | metric as u64)
}

fn table_path(config: &RunConfig, metric: MetricKind) -> PathBuf {
    config.out.join(format!("table_{metric}_w{}.txt", config.width))
}

fn build(config: &RunConfig, metric: MetricKind) -> anyhow::Result<NormalizationTable> {
    Ok(build_table(
        metric,
        config.width,
        config.table_samples,
        &mut stream(config, TABLE, metric),
    )?)
}

/// The engine for `metric`, reusing a matching table in the output
/// directory or building and saving a new one.
fn engine(config: &RunConfig, metric: MetricKind) -> anyhow::Result<MatchEngine> {
    if config.raw {
        return Ok(MatchEngine::raw(metric, config.width)?);
    }
    let path = table_path(config, metric);
    if path.exists() {
        if let Ok(t) = NormalizationTable::load(&path) {
            if t.metric() == metric
                && t.width() == config.width
                && t.sample_count() == config.table_samples
                && t.build_seed() == config.seed
            {
                return Ok(MatchEngine::new(t));
            }
        }
    }
    let table = build(config, metric)?;
    table
        .save(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(MatchEngine::new(table))
}

fn summarize(config: &RunConfig, purpose: u64, metric: MetricKind, xs: &[f64]) -> anyhow::Result<Summary> {
    let mut rng = stream(config, SUMMARY_CI | purpose, metric);
    Ok(stats::summarize_with(xs, config.resamples, DEFAULT_ALPHA, &mut rng)?)
}

fn fraction(xs: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    xs.iter().filter(|&&x| pred(x)).count() as f64 / xs.len() as f64
}

fn hex(t: &Tag) -> String {
    t.to_hex()
}

pub fn normalize(config: &RunConfig) -> anyhow::Result<()> {
    ensure_dir(&config.out)?;
    let mut reports = Vec::new();
    for &metric in &config.metrics {
        let table = build(config, metric)?;
        let path = table_path(config, metric);
        table
            .save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        let engine = MatchEngine::new(table);
        let mut rng = stream(config, VALIDATION, metric);
        let mut pairs = Vec::with_capacity(config.validation_samples);
        for _ in 0..config.validation_samples {
            let a = Tag::random(config.width, &mut rng)?;
            let b = Tag::random(config.width, &mut rng)?;
            pairs.push((a, b));
        }
        let dists: Vec<f64> = pairs
            .par_iter()
            .map(|(a, b)| engine.distance(a, b))
            .collect::<Result<_, _>>()?;
        let ks = stats::ks_uniform_statistic(&dists)?;
        reports.push(json!({
            "metric": metric,
            "width": config.width,
            "table": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            "sample_count": config.table_samples,
            "build_seed": config.seed,
            "validation_samples": config.validation_samples,
            "ks": ks,
        }));
    }
    write_json(
        &config.out.join("normalize_report.json"),
        &json!({ "command": "normalize", "config": config, "tables": reports }),
    )
}

#[derive(Serialize)]
struct GeometrySummary {
    stat: &'static str,
    metric: MetricKind,
    width: usize,
    #[serde(flatten)]
    summary: Summary,
    negative_fraction: f64,
    mean_attempts: f64,
}

pub fn geometry(config: &RunConfig) -> anyhow::Result<()> {
    ensure_dir(&config.out)?;
    let mut summaries = Vec::new();
    for &metric in &config.metrics {
        let engine = engine(config, metric)?;
        let sampler = ConstraintSampler::new(&engine)
            .max_attempts(config.max_attempts)
            .pair_order(config.pair_order);
        for &stat in &config.stats {
            let (purpose, samples) = match stat {
                GeometryStat::Similarity => (
                    SIMILARITY,
                    sampler.similarity(config.radius, config.samples, &mut stream(config, SIMILARITY, metric))?,
                ),
                GeometryStat::Dissimilarity => (
                    DISSIMILARITY,
                    sampler.dissimilarity(
                        config.inner_radius,
                        config.outer_radius,
                        config.samples,
                        &mut stream(config, DISSIMILARITY, metric),
                    )?,
                ),
                GeometryStat::Detour => (
                    DETOUR,
                    geometry::sample_detour_difference(
                        &engine,
                        config.samples,
                        &mut stream(config, DETOUR, metric),
                    )?,
                ),
            };
            let path = config.out.join(format!("geometry_{}_{metric}.csv", stat.name()));
            let mut csv = Csv::create(
                path,
                &[
                    "metric", "width", "sample_id", "statistic", "attempts", "target", "secondary_a",
                    "secondary_b",
                ],
            )?;
            for (i, s) in samples.iter().enumerate() {
                csv.row([
                    metric.name().to_owned(),
                    config.width.to_string(),
                    i.to_string(),
                    num(s.statistic),
                    s.attempts.to_string(),
                    hex(&s.target),
                    hex(&s.secondary_a),
                    hex(&s.secondary_b),
                ])?;
            }
            csv.finish()?;
            let values = geometry::statistics(&samples);
            summaries.push(GeometrySummary {
                stat: stat.name(),
                metric,
                width: config.width,
                summary: summarize(config, purpose, metric, &values)?,
                negative_fraction: fraction(&values, |x| x < 0.0),
                mean_attempts: samples.iter().map(|s| s.attempts as f64).sum::<f64>() / samples.len() as f64,
            });
        }
    }
    write_json(
        &config.out.join("geometry_summary.json"),
        &json!({ "command": "geometry", "config": config, "summaries": summaries }),
    )
}

pub fn variation(config: &RunConfig) -> anyhow::Result<()> {
    ensure_dir(&config.out)?;
    let mut step_reports = Vec::new();
    let mut walk_reports = Vec::new();
    let options = EnsembleOptions {
        resamples: config.resamples,
        alpha: DEFAULT_ALPHA,
        max_attempts: config.max_attempts,
    };
    for &metric in &config.metrics {
        let engine = engine(config, metric)?;
        if config.modes.contains(&VariationMode::Step) {
            let mut csv = Csv::create(
                config.out.join(format!("variation_steps_{metric}.csv")),
                &["metric", "width", "regime", "sample_id", "pre", "post", "perturbation"],
            )?;
            for &regime in &config.regimes {
                let purpose = match regime {
                    Regime::Loose => STEP_LOOSE,
                    Regime::Tight => STEP_TIGHT,
                };
                let samples = variation::sample_single_step(
                    &engine,
                    regime,
                    config.samples,
                    &mut stream(config, purpose, metric),
                    config.max_attempts,
                )?;
                for (i, s) in samples.iter().enumerate() {
                    csv.row([
                        metric.name().to_owned(),
                        config.width.to_string(),
                        regime.name().to_owned(),
                        i.to_string(),
                        num(s.pre_distance),
                        num(s.post_distance),
                        num(s.perturbation),
                    ])?;
                }
                let p: Vec<f64> = samples.iter().map(|s| s.perturbation).collect();
                step_reports.push(json!({
                    "metric": metric,
                    "width": config.width,
                    "regime": regime,
                    "perturbation": summarize(config, purpose, metric, &p)?,
                    "fraction_increase": fraction(&p, |x| x > 0.0),
                    "fraction_decrease": fraction(&p, |x| x < 0.0),
                    "fraction_neutral": fraction(&p, |x| x == 0.0),
                }));
            }
            csv.finish()?;
        }
        if config.modes.contains(&VariationMode::Walk) {
            let mut walks = Csv::create(
                config.out.join(format!("variation_walks_{metric}.csv")),
                &["metric", "width", "start_mode", "walk_id", "step", "distance"],
            )?;
            let mut aggregates = Csv::create(
                config.out.join(format!("variation_aggregates_{metric}.csv")),
                &["metric", "width", "start_mode", "step", "mean", "sd", "ci_lo", "ci_hi"],
            )?;
            for &mode in &config.start_modes {
                let purpose = match mode {
                    StartMode::Identical => WALK_IDENTICAL,
                    StartMode::SampledClose => WALK_SAMPLED,
                };
                let ensemble = variation::run_walk_ensemble_with(
                    &engine,
                    config.walks,
                    config.steps,
                    mode,
                    &mut stream(config, purpose, metric),
                    &options,
                )?;
                for t in &ensemble.traces {
                    for (step, d) in t.step_distances.iter().enumerate() {
                        walks.row([
                            metric.name().to_owned(),
                            config.width.to_string(),
                            mode.name().to_owned(),
                            t.walk_id.to_string(),
                            step.to_string(),
                            num(*d),
                        ])?;
                    }
                }
                for a in &ensemble.aggregates {
                    aggregates.row([
                        metric.name().to_owned(),
                        config.width.to_string(),
                        mode.name().to_owned(),
                        a.step.to_string(),
                        num(a.mean),
                        num(a.sd),
                        num(a.ci_lo),
                        num(a.ci_hi),
                    ])?;
                }
                walk_reports.push(json!({
                    "metric": metric,
                    "width": config.width,
                    "start_mode": mode,
                    "walks": config.walks,
                    "steps": config.steps,
                }));
            }
            walks.finish()?;
            aggregates.finish()?;
        }
    }
    write_json(
        &config.out.join("variation_summary.json"),
        &json!({
            "command": "variation",
            "config": config,
            "steps": step_reports,
            "walks": walk_reports,
        }),
    )
}

fn target_graph(config: &RunConfig) -> anyhow::Result<TargetGraph> {
    match &config.graph {
        Some(path) => TargetGraph::load(path).with_context(|| format!("loading graph {}", path.display())),
        None => Ok(generate_target_graph(
            config.nodes,
            config.degree,
            config.structure,
            &mut derive_stream(config.seed, GRAPH << 8),
        )?),
    }
}

/// Base seed of a replicate family.
fn family_seed(config: &RunConfig, purpose: u64) -> u64 {
    replicate_seed(config.seed, (purpose << 8) as usize)
}

pub fn evolve(config: &RunConfig) -> anyhow::Result<()> {
    ensure_dir(&config.out)?;
    let graph = target_graph(config)?;
    let graph_path = config.out.join("evolve_graph.txt");
    graph
        .save(&graph_path)
        .with_context(|| format!("writing {}", graph_path.display()))?;
    eprintln!("wrote {}", graph_path.display());
    let genome_bits = (graph.node_count() * config.width) as f64;
    let mut reports = Vec::new();
    for &metric in &config.metrics {
        let engine = engine(config, metric)?;
        let base = EvolutionConfig {
            population_size: config.population,
            generations: config.generations,
            tournament_size: config.tournament,
            per_bit_mutation_rate: 0.0,
            replicate_seed: family_seed(config, SWEEP),
        };
        let (flips, sweep_report) = if config.sweep {
            let sweep = mutation_rate_sweep(&base, &engine, &graph, &config.sweep_flips, config.sweep_replicates)?;
            let rates: Vec<_> = sweep
                .rates
                .iter()
                .map(|r| {
                    json!({
                        "flips_per_genome": r.flips_per_genome,
                        "per_bit_rate": r.per_bit_rate,
                        "scores": r.scores,
                        "mean_score": r.mean_score,
                    })
                })
                .collect();
            let selected = sweep.selected();
            (
                selected.flips_per_genome,
                Some(json!({
                    "replicates": config.sweep_replicates,
                    "rates": rates,
                    "selected_flips_per_genome": selected.flips_per_genome,
                    "selected_per_bit_rate": selected.per_bit_rate,
                })),
            )
        } else {
            (config.flips, None)
        };
        let per_bit = flips / genome_bits;
        if per_bit > 1.0 {
            anyhow::bail!("{flips} expected flips exceeds a {genome_bits}-bit genome");
        }
        let run = EvolutionConfig {
            per_bit_mutation_rate: per_bit,
            replicate_seed: family_seed(config, REPLICATES),
            ..base
        };
        let trajectories = run_replicates(&run, &engine, &graph, config.replicates)?;
        write_trajectories(config, metric, &graph, flips, &trajectories)?;
        let finals: Vec<f64> = trajectories.iter().map(Trajectory::final_max_fitness).collect();
        reports.push(json!({
            "metric": metric,
            "width": config.width,
            "flips_per_genome": flips,
            "per_bit_rate": per_bit,
            "replicates": config.replicates,
            "final_max_fitness": finals,
            "mean_final_max_fitness": finals.iter().sum::<f64>() / finals.len() as f64,
            "sweep": sweep_report,
        }));
    }
    write_json(
        &config.out.join("evolve_summary.json"),
        &json!({
            "command": "evolve",
            "config": config,
            "graph": {
                "file": "evolve_graph.txt",
                "query_count": graph.query_count(),
                "operand_count": graph.operand_count(),
                "mean_degree": graph.mean_degree(),
                "structure": graph.structure(),
                "gen_seed": graph.gen_seed(),
            },
            "metrics": reports,
        }),
    )
}

fn write_trajectories(
    config: &RunConfig,
    metric: MetricKind,
    graph: &TargetGraph,
    flips: f64,
    trajectories: &[Trajectory],
) -> anyhow::Result<()> {
    let mut csv = Csv::create(
        config.out.join(format!("evolve_trajectories_{metric}.csv")),
        &[
            "metric",
            "width",
            "structure",
            "mean_degree",
            "rate_flips_per_genome",
            "replicate",
            "generation",
            "max_fitness",
            "mean_fitness",
        ],
    )?;
    for (r, t) in trajectories.iter().enumerate() {
        for (g, (max, mean)) in t.max_fitness.iter().zip(&t.mean_fitness).enumerate() {
            csv.row([
                metric.name().to_owned(),
                config.width.to_string(),
                graph.structure().name().to_owned(),
                graph.mean_degree().to_string(),
                num(flips),
                r.to_string(),
                g.to_string(),
                num(*max),
                num(*mean),
            ])?;
        }
    }
    csv.finish()?;
    Ok(())
}
