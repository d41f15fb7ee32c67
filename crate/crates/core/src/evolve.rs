//! Graph-matching evolution.
//!
//! A genome holds one tag per node of a bipartite target graph: query tags
//! first, then operand tags. Each query with `k` outgoing edges looks up its
//! `k` best-matching operand tags; fitness is the fraction of those lookups
//! that land on target edges.
//!
//! The GA is generational: every generation is replaced by tournament
//! winners (sampled with replacement, ties to the lower index), each copied
//! and mutated per bit. There is no elitism and no crossover.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::engine::{best_k_indices, MatchEngine};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::RngStream;
use crate::tag::{for_each_mutation_site, Tag};

pub const DEFAULT_POPULATION: usize = 500;
pub const DEFAULT_GENERATIONS: usize = 512;
pub const DEFAULT_TOURNAMENT: usize = 7;
pub const SWEEP_MIN_FLIPS: f64 = 0.75;
pub const SWEEP_MAX_FLIPS: f64 = 16.0;
pub const SWEEP_POINTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    /// Every node has exactly `mean_degree` edges.
    Regular,
    /// Edges drawn uniformly without replacement from all query/operand pairs.
    Irregular,
}

impl Structure {
    pub fn name(self) -> &'static str {
        match self {
            Structure::Regular => "regular",
            Structure::Irregular => "irregular",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(Structure::Regular),
            "irregular" => Ok(Structure::Irregular),
            _ => Err(Error::invalid(format!("unknown structure {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetGraph {
    query_count: usize,
    operand_count: usize,
    edges: Vec<(usize, usize)>,
    mean_degree: usize,
    structure: Structure,
    gen_seed: u64,
    out_degree: Vec<usize>,
    is_edge: Vec<bool>,
}

/// Random target graph on `node_count` nodes split evenly into queries and
/// operands. `gen_seed` records `rng`'s root seed.
pub fn generate_target_graph(
    node_count: usize,
    mean_degree: usize,
    structure: Structure,
    rng: &mut RngStream,
) -> Result<TargetGraph> {
    if node_count == 0 || node_count % 2 != 0 {
        return Err(Error::invalid(format!(
            "node_count must be a positive even number, got {node_count}"
        )));
    }
    if !(1..=2).contains(&mean_degree) {
        return Err(Error::invalid(format!(
            "mean_degree must be 1 or 2, got {mean_degree}"
        )));
    }
    let side = node_count / 2;
    if side < mean_degree {
        return Err(Error::invalid(format!(
            "{side} operands cannot support mean degree {mean_degree}"
        )));
    }
    let edges = match structure {
        Structure::Regular => {
            let first = permutation(side, rng);
            let mut edges: Vec<(usize, usize)> = first.iter().copied().enumerate().collect();
            if mean_degree == 2 {
                let second = loop {
                    let p = permutation(side, rng);
                    if p.iter().zip(&first).all(|(a, b)| a != b) {
                        break p;
                    }
                };
                edges.extend(second.into_iter().enumerate());
            }
            edges
        }
        Structure::Irregular => index::sample(rng, side * side, side * mean_degree)
            .into_iter()
            .map(|i| (i / side, i % side))
            .collect(),
    };
    TargetGraph::from_edges(side, side, edges, mean_degree, structure, rng.root_seed())
}

fn permutation<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

impl TargetGraph {
    pub fn from_edges(
        query_count: usize,
        operand_count: usize,
        mut edges: Vec<(usize, usize)>,
        mean_degree: usize,
        structure: Structure,
        gen_seed: u64,
    ) -> Result<Self> {
        if query_count == 0 || operand_count == 0 {
            return Err(Error::invalid("graph needs at least one query and one operand"));
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate edge"));
        }
        if let Some(&(q, o)) = edges
            .iter()
            .find(|&&(q, o)| q >= query_count || o >= operand_count)
        {
            return Err(Error::invalid(format!("edge ({q}, {o}) out of range")));
        }
        if edges.len() != query_count * mean_degree {
            return Err(Error::invalid(format!(
                "{} edges do not match {query_count} queries at mean degree {mean_degree}",
                edges.len()
            )));
        }
        let mut out_degree = vec![0; query_count];
        let mut in_degree = vec![0; operand_count];
        let mut is_edge = vec![false; query_count * operand_count];
        for &(q, o) in &edges {
            out_degree[q] += 1;
            in_degree[o] += 1;
            is_edge[q * operand_count + o] = true;
        }
        if structure == Structure::Regular
            && (out_degree.iter().any(|&d| d != mean_degree)
                || in_degree.iter().any(|&d| d != mean_degree))
        {
            return Err(Error::invalid("regular graph has uneven degrees"));
        }
        Ok(TargetGraph {
            query_count,
            operand_count,
            edges,
            mean_degree,
            structure,
            gen_seed,
            out_degree,
            is_edge,
        })
    }

    pub fn query_count(&self) -> usize {
        self.query_count
    }

    pub fn operand_count(&self) -> usize {
        self.operand_count
    }

    pub fn node_count(&self) -> usize {
        self.query_count + self.operand_count
    }

    /// Edges sorted by `(query, operand)`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn mean_degree(&self) -> usize {
        self.mean_degree
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn gen_seed(&self) -> u64 {
        self.gen_seed
    }

    pub fn out_degree(&self, query: usize) -> usize {
        self.out_degree[query]
    }

    pub fn in_degree(&self, operand: usize) -> usize {
        self.edges.iter().filter(|&&(_, o)| o == operand).count()
    }

    pub fn has_edge(&self, query: usize, operand: usize) -> bool {
        query < self.query_count
            && operand < self.operand_count
            && self.is_edge[query * self.operand_count + operand]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "query_count {}", self.query_count);
        let _ = writeln!(out, "operand_count {}", self.operand_count);
        let _ = writeln!(out, "mean_degree {}", self.mean_degree);
        let _ = writeln!(out, "structure {}", self.structure);
        let _ = writeln!(out, "gen_seed {}", self.gen_seed);
        for (q, o) in &self.edges {
            let _ = writeln!(out, "{q},{o}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut field = |name: &'static str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::format(name, "missing header line"))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(|v| v.trim().to_owned())
                .ok_or_else(|| Error::format(name, format!("expected `{name} <value>`, got {line:?}")))
        };
        fn num<T: FromStr>(name: &'static str, v: String) -> Result<T> {
            v.parse()
                .map_err(|_| Error::format(name, format!("cannot parse {v:?}")))
        }
        let query_count: usize = num("query_count", field("query_count")?)?;
        let operand_count: usize = num("operand_count", field("operand_count")?)?;
        let mean_degree: usize = num("mean_degree", field("mean_degree")?)?;
        let structure: Structure = field("structure")?
            .parse()
            .map_err(|e: Error| Error::format("structure", e.to_string()))?;
        let gen_seed: u64 = num("gen_seed", field("gen_seed")?)?;
        let edges = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (q, o) = l
                    .split_once(',')
                    .ok_or_else(|| Error::format("edges", format!("expected `q,o`, got {l:?}")))?;
                Ok((num("edges", q.trim().to_owned())?, num("edges", o.trim().to_owned())?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_edges(query_count, operand_count, edges, mean_degree, structure, gen_seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Genome {
    tags: Vec<Tag>,
    query_count: usize,
}

impl Genome {
    pub fn new(tags: Vec<Tag>, query_count: usize) -> Result<Self> {
        if query_count > tags.len() {
            return Err(Error::invalid("query_count exceeds tag count"));
        }
        if let Some(first) = tags.first() {
            for t in &tags[1..] {
                first.check_same_width(t)?;
            }
        }
        Ok(Genome { tags, query_count })
    }

    pub fn random(graph: &TargetGraph, width: usize, rng: &mut RngStream) -> Result<Self> {
        let tags = (0..graph.node_count())
            .map(|_| Tag::random(width, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Genome {
            tags,
            query_count: graph.query_count(),
        })
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn queries(&self) -> &[Tag] {
        &self.tags[..self.query_count]
    }

    pub fn operands(&self) -> &[Tag] {
        &self.tags[self.query_count..]
    }

    pub fn bit_count(&self) -> usize {
        self.tags.iter().map(Tag::width).sum()
    }

    fn check(&self, engine: &MatchEngine, graph: &TargetGraph) -> Result<()> {
        if self.query_count != graph.query_count() || self.tags.len() != graph.node_count() {
            return Err(Error::invalid(format!(
                "genome with {} tags ({} queries) does not fit a graph with {} queries and {} operands",
                self.tags.len(),
                self.query_count,
                graph.query_count(),
                graph.operand_count()
            )));
        }
        self.tags.iter().try_for_each(|t| engine.check(t))
    }
}

/// Fraction of best-match lookups that hit target edges.
pub fn evaluate_fitness(engine: &MatchEngine, genome: &Genome, graph: &TargetGraph) -> Result<f64> {
    genome.check(engine, graph)?;
    let mut dists = Vec::new();
    fill_distances(engine, genome, &mut dists);
    Ok(fitness_from_distances(&dists, graph))
}

/// Query-major matrix of `distance(query, operand)`.
fn fill_distances(engine: &MatchEngine, genome: &Genome, dists: &mut Vec<f64>) {
    dists.clear();
    for q in genome.queries() {
        dists.extend(genome.operands().iter().map(|o| engine.distance_unchecked(q, o)));
    }
}

fn fitness_from_distances(dists: &[f64], graph: &TargetGraph) -> f64 {
    let o = graph.operand_count();
    let mut hits = 0;
    for q in 0..graph.query_count() {
        let k = graph.out_degree(q);
        if k == 0 {
            continue;
        }
        hits += best_k_indices(&dists[q * o..(q + 1) * o], k)
            .iter()
            .filter(|&&op| graph.has_edge(q, op))
            .count();
    }
    hits as f64 / graph.edges().len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub per_bit_mutation_rate: f64,
    pub replicate_seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: DEFAULT_POPULATION,
            generations: DEFAULT_GENERATIONS,
            tournament_size: DEFAULT_TOURNAMENT,
            per_bit_mutation_rate: SWEEP_MIN_FLIPS / 1024.0,
            replicate_seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.generations == 0 || self.tournament_size == 0 {
            return Err(Error::invalid(
                "population_size, generations and tournament_size must be positive",
            ));
        }
        if self.tournament_size > self.population_size {
            return Err(Error::invalid(format!(
                "tournament_size {} exceeds population_size {}",
                self.tournament_size, self.population_size
            )));
        }
        if !(0.0..=1.0).contains(&self.per_bit_mutation_rate) {
            return Err(Error::invalid(format!(
                "per-bit mutation rate {} outside [0, 1]",
                self.per_bit_mutation_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Population-maximum fitness of generation `g` at index `g`.
    pub max_fitness: Vec<f64>,
    pub mean_fitness: Vec<f64>,
    /// Fittest genome of the final generation.
    pub best_genome: Genome,
}

impl Trajectory {
    /// Sum of population-maximum fitness across generations.
    pub fn max_fitness_sum(&self) -> f64 {
        self.max_fitness.iter().sum()
    }

    pub fn final_max_fitness(&self) -> f64 {
        *self.max_fitness.last().expect("at least one generation")
    }
}

#[derive(Clone, Debug)]
struct Individual {
    genome: Genome,
    dists: Vec<f64>,
    dirty: BTreeSet<usize>,
}

/// A population under evolution, advanced one generation at a time.
///
/// Each individual carries its query-by-operand distance matrix; offspring
/// inherit the parent's matrix and recompute only the rows and columns of
/// tags that mutated.
pub struct Evolution<'a> {
    config: EvolutionConfig,
    engine: &'a MatchEngine,
    graph: &'a TargetGraph,
    rng: RngStream,
    population: Vec<Individual>,
    fitness: Vec<f64>,
    generation: usize,
}

impl<'a> Evolution<'a> {
    pub fn new(config: EvolutionConfig, engine: &'a MatchEngine, graph: &'a TargetGraph) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::derive(config.replicate_seed, 0);
        let population = (0..config.population_size)
            .map(|_| {
                Ok(Individual {
                    genome: Genome::random(graph, engine.width(), &mut rng)?,
                    dists: Vec::new(),
                    dirty: BTreeSet::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut evo = Evolution {
            config,
            engine,
            graph,
            rng,
            population,
            fitness: Vec::new(),
            generation: 0,
        };
        par::for_each_mut(&mut evo.population, |_, ind| {
            fill_distances(engine, &ind.genome, &mut ind.dists);
        });
        evo.score();
        Ok(evo)
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn genomes(&self) -> impl Iterator<Item = &Genome> {
        self.population.iter().map(|i| &i.genome)
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn max_fitness(&self) -> f64 {
        self.fitness.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_fitness(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.fitness.len() as f64
    }

    /// Index of the fittest individual, ties to the lowest index.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, &f) in self.fitness.iter().enumerate() {
            if f > self.fitness[best] {
                best = i;
            }
        }
        best
    }

    /// Run one round of selection and mutation, then re-score.
    pub fn advance(&mut self) -> Result<()> {
        let n = self.population.len();
        let width = self.engine.width();
        let rate = self.config.per_bit_mutation_rate;
        let mut next = Vec::with_capacity(n);
        for _ in 0..n {
            let mut winner = self.rng.random_range(0..n);
            for _ in 1..self.config.tournament_size {
                let c = self.rng.random_range(0..n);
                if self.fitness[c] > self.fitness[winner]
                    || (self.fitness[c] == self.fitness[winner] && c < winner)
                {
                    winner = c;
                }
            }
            let mut child = self.population[winner].clone();
            let total = child.genome.bit_count();
            for_each_mutation_site(total, rate, &mut self.rng, |pos| {
                let (tag, bit) = (pos / width, pos % width);
                child.genome.tags[tag]
                    .toggle(bit)
                    .expect("site within genome");
                child.dirty.insert(tag);
            })?;
            next.push(child);
        }
        let (engine, q_count) = (self.engine, self.graph.query_count());
        par::for_each_mut(&mut next, |_, ind| refresh(engine, q_count, ind));
        self.population = next;
        self.generation += 1;
        self.score();
        Ok(())
    }

    fn score(&mut self) {
        let graph = self.graph;
        self.fitness = self
            .population
            .iter()
            .map(|ind| fitness_from_distances(&ind.dists, graph))
            .collect();
    }
}

fn refresh(engine: &MatchEngine, query_count: usize, ind: &mut Individual) {
    let tags = &ind.genome.tags;
    let operands = tags.len() - query_count;
    for &t in &ind.dirty {
        if t < query_count {
            for o in 0..operands {
                ind.dists[t * operands + o] =
                    engine.distance_unchecked(&tags[t], &tags[query_count + o]);
            }
        } else {
            let o = t - query_count;
            for q in 0..query_count {
                ind.dists[q * operands + o] = engine.distance_unchecked(&tags[q], &tags[t]);
            }
        }
    }
    ind.dirty.clear();
}

/// One full run: generation 0 is random, and `generations - 1` rounds of
/// selection follow.
pub fn evolve(config: &EvolutionConfig, engine: &MatchEngine, graph: &TargetGraph) -> Result<Trajectory> {
    let mut evo = Evolution::new(config.clone(), engine, graph)?;
    let mut max_fitness = Vec::with_capacity(config.generations);
    let mut mean_fitness = Vec::with_capacity(config.generations);
    loop {
        max_fitness.push(evo.max_fitness());
        mean_fitness.push(evo.mean_fitness());
        if max_fitness.len() == config.generations {
            break;
        }
        evo.advance()?;
    }
    let best_genome = evo.population[evo.best_index()].genome.clone();
    Ok(Trajectory {
        max_fitness,
        mean_fitness,
        best_genome,
    })
}

/// Seed of replicate `replicate` in a family rooted at `base_seed`.
pub fn replicate_seed(base_seed: u64, replicate: usize) -> u64 {
    RngStream::derive(base_seed, replicate as u64).next_u64()
}

/// `replicates` independent runs of `config`, replicate `r` seeded with
/// [`replicate_seed`]`(config.replicate_seed, r)`.
pub fn run_replicates(
    config: &EvolutionConfig,
    engine: &MatchEngine,
    graph: &TargetGraph,
    replicates: usize,
) -> Result<Vec<Trajectory>> {
    config.validate()?;
    par::try_map_indexed(replicates, |r| {
        let run = EvolutionConfig {
            replicate_seed: replicate_seed(config.replicate_seed, r),
            ..config.clone()
        };
        evolve(&run, engine, graph)
    })
}

/// `count` log-spaced expected-flips-per-genome values from `min` to `max`.
pub fn log_spaced_flips(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    max
                } else {
                    min * (max / min).powf(i as f64 / (count - 1) as f64)
                }
            })
            .collect(),
    }
}

/// The default sweep: ten log-spaced values from 0.75 to 16 expected flips.
pub fn default_sweep_flips() -> Vec<f64> {
    log_spaced_flips(SWEEP_MIN_FLIPS, SWEEP_MAX_FLIPS, SWEEP_POINTS)
}

#[derive(Clone, Debug)]
pub struct RateRuns {
    pub flips_per_genome: f64,
    pub per_bit_rate: f64,
    pub trajectories: Vec<Trajectory>,
    /// Per-replicate sums of population-maximum fitness.
    pub scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rates: Vec<RateRuns>,
    /// Index into `rates` of the highest mean score, ties to the lower rate.
    pub selected: usize,
}

impl SweepResult {
    pub fn selected(&self) -> &RateRuns {
        &self.rates[self.selected]
    }
}

/// Run `replicates` evolutions at each expected-flips value in `flips`.
///
/// Replicate `r` uses seed [`replicate_seed`]`(base.replicate_seed, r)` at
/// every rate, so rates are compared on common random numbers.
pub fn mutation_rate_sweep(
    base: &EvolutionConfig,
    engine: &MatchEngine,
    graph: &TargetGraph,
    flips: &[f64],
    replicates: usize,
) -> Result<SweepResult> {
    if flips.is_empty() {
        return Err(Error::invalid("sweep needs at least one rate"));
    }
    if replicates == 0 {
        return Err(Error::invalid("replicates must be at least 1"));
    }
    let genome_bits = graph.node_count() * engine.width();
    let per_bit: Vec<f64> = flips.iter().map(|&e| e / genome_bits as f64).collect();
    if let Some(bad) = per_bit.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(format!(
            "{} expected flips exceeds a {genome_bits}-bit genome",
            flips[bad]
        )));
    }
    let runs = par::try_map_indexed(flips.len() * replicates, |job| {
        let (i, r) = (job / replicates, job % replicates);
        let config = EvolutionConfig {
            per_bit_mutation_rate: per_bit[i],
            replicate_seed: replicate_seed(base.replicate_seed, r),
            ..base.clone()
        };
        evolve(&config, engine, graph)
    })?;
    let mut runs = runs.into_iter();
    let rates: Vec<RateRuns> = flips
        .iter()
        .zip(&per_bit)
        .map(|(&e, &p)| {
            let trajectories: Vec<Trajectory> = runs.by_ref().take(replicates).collect();
            let scores: Vec<f64> = trajectories.iter().map(Trajectory::max_fitness_sum).collect();
            let mean_score = scores.iter().sum::<f64>() / replicates as f64;
            RateRuns {
                flips_per_genome: e,
                per_bit_rate: p,
                trajectories,
                scores,
                mean_score,
            }
        })
        .collect();
    let selected = select_rate(&rates);
    Ok(SweepResult { rates, selected })
}

fn select_rate(rates: &[RateRuns]) -> usize {
    let mut best = 0;
    for (i, r) in rates.iter().enumerate() {
        let b = &rates[best];
        if r.mean_score > b.mean_score
            || (r.mean_score == b.mean_score && r.per_bit_rate < b.per_bit_rate)
        {
            best = i;
        }
    }
    best
}
