//! Acceptance suite. Each test prints one PASS/FAIL line (plus the measured
//! values) straight to stderr, so the verdicts show even when libtest
//! captures output.
//!
//! Everything uses root seed 1 and the CLI's stream layout, so each number
//! here matches the corresponding `tagmatch ... --seed 1` run.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use tagmatch::evolve::{
    default_sweep_flips, generate_target_graph, mutation_rate_sweep, replicate_seed, run_replicates,
    EvolutionConfig, Structure,
};
use tagmatch::geometry::{self, ConstraintSampler, PairOrder};
use tagmatch::metrics::{self, raw_distance};
use tagmatch::normalizer::{build_table, DEFAULT_SAMPLE_COUNT};
use tagmatch::stats::ks_uniform_statistic;
use tagmatch::variation::{self, Regime, StartMode, WalkEnsemble};
use tagmatch::{derive_stream, MatchEngine, MetricKind, RngStream, Tag};

const SEED: u64 = 1;
const SAMPLES: usize = 5_000;

// stream purposes, as laid out by the CLI
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

fn stream(purpose: u64, metric: MetricKind) -> RngStream {
    derive_stream(SEED, purpose << 8 | metric as u64)
}

fn engines() -> &'static [MatchEngine] {
    static ENGINES: OnceLock<Vec<MatchEngine>> = OnceLock::new();
    ENGINES.get_or_init(|| {
        MetricKind::ALL
            .iter()
            .map(|&m| MatchEngine::new(build_table(m, 32, DEFAULT_SAMPLE_COUNT, &mut stream(TABLE, m)).unwrap()))
            .collect()
    })
}

fn engine(metric: MetricKind) -> &'static MatchEngine {
    engines().iter().find(|e| e.metric() == metric).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn fraction(xs: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    xs.iter().filter(|&&x| pred(x)).count() as f64 / xs.len() as f64
}

struct Report {
    name: &'static str,
    checks: Vec<(String, bool)>,
}

impl Report {
    fn new(name: &'static str) -> Self {
        Report {
            name,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.checks.push((detail, ok));
    }

    fn in_range(&mut self, label: &str, x: f64, lo: f64, hi: f64) {
        self.check((lo..=hi).contains(&x), format!("{label} = {x:.4} in [{lo}, {hi}]"));
    }

    fn finish(self) {
        let pass = self.checks.iter().all(|c| c.1);
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "[{}] {}", if pass { "PASS" } else { "FAIL" }, self.name);
        for (detail, ok) in &self.checks {
            let _ = writeln!(err, "       {} {detail}", if *ok { "ok  " } else { "FAIL" });
        }
        drop(err);
        assert!(pass, "{} failed", self.name);
    }
}

#[test]
fn normalization_uniformity() {
    let mut r = Report::new("normalized pair distances are uniform (KS < 0.03, 10,000 pairs, width 32)");
    for &metric in &MetricKind::ALL {
        let e = engine(metric);
        let mut rng = stream(VALIDATION, metric);
        let d: Vec<f64> = (0..10_000)
            .map(|_| {
                let a = Tag::random(32, &mut rng).unwrap();
                let b = Tag::random(32, &mut rng).unwrap();
                e.distance(&a, &b).unwrap()
            })
            .collect();
        let ks = ks_uniform_statistic(&d).unwrap();
        r.check(ks < 0.03, format!("{metric}: ks = {ks:.4}"));
    }
    r.finish();
}

#[test]
fn similarity_constraint_means() {
    let mut r = Report::new("similarity constraint means (radius 0.01, 5,000 samples)");
    let bounds = [
        (MetricKind::BidirectionalInteger, 0.0058, 0.0078),
        (MetricKind::Integer, 0.48, 0.54),
        (MetricKind::Hamming, 0.14, 0.19),
        (MetricKind::Streak, 0.25, 0.31),
        (MetricKind::Hash, 0.48, 0.53),
    ];
    for (metric, lo, hi) in bounds {
        let s = ConstraintSampler::new(engine(metric))
            .similarity(0.01, SAMPLES, &mut stream(SIMILARITY, metric))
            .unwrap();
        let xs = geometry::statistics(&s);
        r.in_range(&format!("{metric} mean"), mean(&xs), lo, hi);
        if metric == MetricKind::Integer {
            let split = fraction(&xs, |x| !(0.05..=0.95).contains(&x));
            r.check(split == 1.0, format!("integer: fraction below 0.05 or above 0.95 = {split}"));
        }
    }
    r.finish();
}

#[test]
fn dissimilarity_constraint() {
    let mut r = Report::new("dissimilarity constraint (inner 0.01, outer 0.99, 5,000 samples)");
    let sample = |metric, order| {
        let s = ConstraintSampler::new(engine(metric))
            .pair_order(order)
            .dissimilarity(0.01, 0.99, SAMPLES, &mut stream(DISSIMILARITY, metric))
            .unwrap();
        geometry::statistics(&s)
    };
    let hamming = sample(MetricKind::Hamming, PairOrder::Discovery);
    r.in_range("hamming mean", mean(&hamming), 0.80, 0.85);
    let streak = sample(MetricKind::Streak, PairOrder::Discovery);
    r.in_range("streak mean", mean(&streak), 0.68, 0.74);
    let hash = sample(MetricKind::Hash, PairOrder::Discovery);
    r.in_range("hash mean", mean(&hash), 0.48, 0.53);
    let ks = ks_uniform_statistic(&hash).unwrap();
    r.check(ks < 0.03, format!("hash ks = {ks:.4} < 0.03"));
    let bi = sample(MetricKind::BidirectionalInteger, PairOrder::Discovery);
    let min = bi.iter().copied().fold(f64::INFINITY, f64::min);
    r.check(min >= 0.97, format!("integer-bi min = {min:.4} >= 0.97"));
    let swapped = sample(MetricKind::Integer, PairOrder::Swapped);
    r.in_range("integer mean, swapped pair order", mean(&swapped), 0.005, 0.02);
    r.finish();
}

#[test]
fn detour_difference() {
    let mut r = Report::new("detour differences violate the triangle inequality (5,000 triplets)");
    for metric in [MetricKind::Hamming, MetricKind::Hash, MetricKind::Streak] {
        let s = geometry::sample_detour_difference(engine(metric), SAMPLES, &mut stream(DETOUR, metric)).unwrap();
        let neg = fraction(&geometry::statistics(&s), |x| x < 0.0);
        r.check(neg > 0.01, format!("{metric}: negative fraction = {neg:.4} > 0.01"));
    }
    let tags: Vec<Tag> = (0..16).map(|v| Tag::from_unsigned(4, v).unwrap()).collect();
    let d = |x: &Tag, y: &Tag| raw_distance(MetricKind::Hamming, x, y).unwrap();
    let mut violations = 0;
    for a in &tags {
        for b in &tags {
            for c in &tags {
                if d(a, b) + d(b, c) - d(a, c) < 0.0 {
                    violations += 1;
                }
            }
        }
    }
    r.check(violations == 0, format!("raw hamming width 4: {violations} violations in 4096 triples"));
    r.finish();
}

#[test]
fn single_step_hash_fractions() {
    let mut r = Report::new("single-step hash perturbations (5,000 samples per regime)");
    let e = engine(MetricKind::Hash);
    let tight = variation::sample_single_step(e, Regime::Tight, SAMPLES, &mut stream(STEP_TIGHT, e.metric()), 10_000_000)
        .unwrap();
    let up = fraction(&tight.iter().map(|s| s.perturbation).collect::<Vec<_>>(), |p| p > 0.0);
    r.in_range("tight: fraction increasing", up, 0.985, 1.0);
    let loose = variation::sample_single_step(e, Regime::Loose, SAMPLES, &mut stream(STEP_LOOSE, e.metric()), 10_000_000)
        .unwrap();
    let down = fraction(&loose.iter().map(|s| s.perturbation).collect::<Vec<_>>(), |p| p < 0.0);
    r.in_range("loose: fraction decreasing", down, 0.70, 0.80);
    r.finish();
}

fn ensemble(metric: MetricKind, mode: StartMode) -> WalkEnsemble {
    let purpose = match mode {
        StartMode::Identical => WALK_IDENTICAL,
        StartMode::SampledClose => WALK_SAMPLED,
    };
    variation::run_walk_ensemble(engine(metric), 1_000, 65, mode, &mut stream(purpose, metric)).unwrap()
}

#[test]
fn identical_start_walks() {
    let mut r = Report::new("mutational walks from identical starts (1,000 walks x 65 steps)");
    let walks: Vec<(MetricKind, WalkEnsemble)> = MetricKind::ALL
        .iter()
        .map(|&m| (m, ensemble(m, StartMode::Identical)))
        .collect();
    let agg = |m: MetricKind| &walks.iter().find(|w| w.0 == m).unwrap().1.aggregates;

    let hash = agg(MetricKind::Hash);
    let (lo, hi) = hash.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
        (lo.min(a.mean), hi.max(a.mean))
    });
    r.check(
        lo >= 0.47 && hi <= 0.53,
        format!("hash: step means span [{lo:.4}, {hi:.4}] within [0.47, 0.53]"),
    );
    r.in_range("integer step-1 mean", agg(MetricKind::Integer)[1].mean, 0.40, 0.60);

    let (hamming, streak) = (agg(MetricKind::Hamming), agg(MetricKind::Streak));
    for step in [16, 32] {
        r.check(
            hamming[step].ci_hi < streak[step].ci_lo,
            format!(
                "step {step}: hamming ci_hi {:.4} < streak ci_lo {:.4}",
                hamming[step].ci_hi, streak[step].ci_lo
            ),
        );
    }
    for other in [MetricKind::Integer, MetricKind::BidirectionalInteger, MetricKind::Hash] {
        let o = agg(other);
        let bad: Vec<usize> = (1..=32).filter(|&s| hamming[s].ci_hi >= o[s].ci_lo).collect();
        r.check(
            bad.is_empty(),
            format!("steps 1-32: hamming ci_hi below {other} ci_lo (violating steps: {bad:?})"),
        );
    }
    r.finish();
}

#[test]
fn sampled_start_walks() {
    let mut r = Report::new("mutational walks from sampled-close starts (1,000 walks x 65 steps)");
    let hamming = ensemble(MetricKind::Hamming, StartMode::SampledClose).aggregates;
    let streak = ensemble(MetricKind::Streak, StartMode::SampledClose).aggregates;
    let bad: Vec<usize> = (2..=16).filter(|&s| streak[s].ci_lo <= hamming[s].ci_hi).collect();
    r.check(
        bad.is_empty(),
        format!(
            "steps 2-16: streak ci_lo above hamming ci_hi (violating steps: {bad:?}; step 2 {:.4} vs {:.4}, step 16 {:.4} vs {:.4})",
            streak[2].ci_lo, hamming[2].ci_hi, streak[16].ci_lo, hamming[16].ci_hi
        ),
    );
    r.finish();
}

/// Per-metric mean max-fitness trajectories at each metric's sweep-selected
/// rate: sweep with 2 replicates per rate, then 10 fresh replicates.
fn evolution_condition(degree: usize, structure: Structure) -> Vec<(MetricKind, f64, Vec<f64>)> {
    let graph = generate_target_graph(32, degree, structure, &mut derive_stream(SEED, GRAPH << 8)).unwrap();
    let family = |purpose: u64| replicate_seed(SEED, (purpose << 8) as usize);
    MetricKind::ALL
        .iter()
        .map(|&metric| {
            let e = engine(metric);
            let base = EvolutionConfig {
                replicate_seed: family(SWEEP),
                ..EvolutionConfig::default()
            };
            let sweep = mutation_rate_sweep(&base, e, &graph, &default_sweep_flips(), 2).unwrap();
            let chosen = sweep.selected();
            let run = EvolutionConfig {
                per_bit_mutation_rate: chosen.per_bit_rate,
                replicate_seed: family(REPLICATES),
                ..base
            };
            let runs = run_replicates(&run, e, &graph, 10).unwrap();
            let mean_max: Vec<f64> = (0..run.generations)
                .map(|g| mean(&runs.iter().map(|t| t.max_fitness[g]).collect::<Vec<_>>()))
                .collect();
            (metric, chosen.flips_per_genome, mean_max)
        })
        .collect()
}

#[test]
fn graph_matching_evolution() {
    let mut r = Report::new("graph-matching evolution at sweep-selected rates (32 nodes, pop 500, 512 generations, 10 replicates)");
    let final_of = |runs: &[(MetricKind, f64, Vec<f64>)], m: MetricKind| {
        *runs.iter().find(|x| x.0 == m).unwrap().2.last().unwrap()
    };

    let regular = evolution_condition(1, Structure::Regular);
    let describe = |runs: &[(MetricKind, f64, Vec<f64>)]| {
        runs.iter()
            .map(|(m, flips, t)| format!("{m} {:.4} @ {flips:.3} flips", t.last().unwrap()))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let hash_final = final_of(&regular, MetricKind::Hash);
    r.check(
        regular.iter().all(|(_, _, t)| hash_final >= *t.last().unwrap()),
        format!("regular degree 1: hash final mean max-fitness is highest ({})", describe(&regular)),
    );
    let hash_128 = regular.iter().find(|x| x.0 == MetricKind::Hash).unwrap().2[128];
    r.check(hash_128 >= 0.95, format!("regular degree 1: hash mean max-fitness at generation 128 = {hash_128:.4} >= 0.95"));

    let irregular = evolution_condition(2, Structure::Irregular);
    for good in [MetricKind::Hamming, MetricKind::Streak] {
        let g = final_of(&irregular, good);
        let beaten: Vec<String> = [MetricKind::Hash, MetricKind::Integer, MetricKind::BidirectionalInteger]
            .into_iter()
            .filter(|&b| g <= final_of(&irregular, b))
            .map(|b| b.to_string())
            .collect();
        r.check(
            beaten.is_empty(),
            format!("irregular degree 2: {good} beats hash and both integer metrics (not beaten: {beaten:?})"),
        );
    }
    r.check(true, format!("irregular degree 2: {}", describe(&irregular)));
    r.finish();
}

#[test]
fn oracle_equivalences() {
    let mut r = Report::new("oracle equivalences (exhaustive)");

    let w8: Vec<Tag> = (0..256).map(|v| Tag::from_unsigned(8, v).unwrap()).collect();
    let run = |a: &Tag, b: &Tag, matching: bool| {
        let (mut best, mut cur) = (0usize, 0usize);
        for (x, y) in a.bits().zip(b.bits()) {
            cur = if (x == y) == matching { cur + 1 } else { 0 };
            best = best.max(cur);
        }
        best
    };
    let p = |k: usize| (8 - k + 1) as f64 / 2f64.powi(k as i32);
    let mut streak_mismatch = 0;
    for a in &w8 {
        for b in &w8 {
            let (m, n) = (p(run(a, b, true)), p(run(a, b, false)));
            if metrics::streak_raw(a, b).unwrap() != (m / (m + n)).clamp(0.0, 1.0) {
                streak_mismatch += 1;
            }
        }
    }
    r.check(streak_mismatch == 0, format!("streak vs run scan: {streak_mismatch} mismatches in 65,536 width-8 pairs"));

    let w4: Vec<Tag> = (0..16).map(|v| Tag::from_unsigned(4, v).unwrap()).collect();
    let mut best_k_mismatch = 0;
    let mut cases = 0;
    for &metric in &MetricKind::ALL {
        let e = MatchEngine::new(build_table(metric, 4, DEFAULT_SAMPLE_COUNT, &mut stream(TABLE, metric)).unwrap());
        for q in &w4 {
            for a in &w4 {
                for b in &w4 {
                    let ops = [a.clone(), b.clone(), q.complement()];
                    let mut sorted: Vec<(f64, usize)> =
                        ops.iter().enumerate().map(|(i, o)| (e.distance(q, o).unwrap(), i)).collect();
                    sorted.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                    for k in 1..=3 {
                        cases += 1;
                        let expect: Vec<usize> = sorted[..k].iter().map(|x| x.1).collect();
                        if e.best_k_matches(q, &ops, k).unwrap() != expect {
                            best_k_mismatch += 1;
                        }
                    }
                }
            }
        }
    }
    r.check(best_k_mismatch == 0, format!("best-k vs brute-force sort: {best_k_mismatch} mismatches in {cases} width-4 lookups"));

    let mut complement_failures = 0;
    for t in &w4 {
        for u in &w4 {
            if t != u && metrics::integer_raw(t, u).unwrap() + metrics::integer_raw(u, t).unwrap() != 1.0 {
                complement_failures += 1;
            }
        }
    }
    r.check(complement_failures == 0, format!("integer complement law: {complement_failures} failures in 240 width-4 pairs"));
    r.finish();
}

fn run_cli(args: &[&str], out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_tagmatch"))
        .args(args)
        .args(["--seed", "1", "--out", out.to_str().unwrap()])
        .env_remove("TAGMATCH_SEED")
        .output()
        .unwrap();
    assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
}

/// Run `args` twice into the same directory and compare every file.
fn rerun_is_identical(args: &[&str], scratch: &Path, jobs: [&str; 2]) -> Result<usize, String> {
    let out = scratch.join("out");
    let mut snapshots = Vec::new();
    for j in jobs {
        run_cli(&[args, &["--jobs", j]].concat(), &out);
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        snapshots.push(files);
        fs::remove_dir_all(&out).unwrap();
    }
    let (a, b) = (&snapshots[0], &snapshots[1]);
    if a.len() != b.len() {
        return Err(format!("file sets differ: {} vs {}", a.len(), b.len()));
    }
    for ((na, da), (nb, db)) in a.iter().zip(b) {
        if na != nb || da != db {
            return Err(format!("{na} differs"));
        }
    }
    Ok(a.len())
}

#[test]
fn cli_reruns_are_byte_identical() {
    let mut r = Report::new("CLI reruns with identical config are byte-identical");
    let scratch = tempfile::tempdir().unwrap();
    let commands: [(&str, &[&str]); 4] = [
        ("normalize", &["normalize", "--metric", "hamming,hash,streak"]),
        ("geometry", &["geometry", "--samples", "300", "--resamples", "1000"]),
        (
            "variation",
            &["variation", "--samples", "300", "--walks", "50", "--steps", "65", "--resamples", "1000"],
        ),
        (
            "evolve",
            &[
                "evolve", "--metric", "hamming,hash", "--population", "50", "--generations", "40", "--replicates",
                "3", "--sweep", "--sweep-replicates", "2",
            ],
        ),
    ];
    for (name, args) in commands {
        match rerun_is_identical(args, scratch.path(), ["1", "4"]) {
            Ok(n) => r.check(true, format!("{name}: {n} files identical across reruns (jobs 1 and 4)")),
            Err(e) => r.check(false, format!("{name}: {e}")),
        }
    }
    r.finish();
}
