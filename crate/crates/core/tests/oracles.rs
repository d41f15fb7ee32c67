//! Exhaustive and property checks against brute-force reference code.

use proptest::prelude::*;
use tagmatch::metrics::{self, raw_distance};
use tagmatch::normalizer::build_table;
use tagmatch::{derive_stream, MatchEngine, MetricKind, Tag};

fn all_tags(width: usize) -> Vec<Tag> {
    (0..1u128 << width)
        .map(|v| Tag::from_unsigned(width, v).unwrap())
        .collect()
}

fn longest_run(a: &[bool], b: &[bool], matching: bool) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for (x, y) in a.iter().zip(b) {
        if (x == y) == matching {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

fn streak_reference(t: &Tag, u: &Tag) -> f64 {
    let (a, b): (Vec<bool>, Vec<bool>) = (t.bits().collect(), u.bits().collect());
    let n = a.len() as f64;
    let p = |k: usize| (n - k as f64 + 1.0) / 2f64.powi(k as i32);
    let (m, s) = (p(longest_run(&a, &b, true)), p(longest_run(&a, &b, false)));
    (m / (m + s)).clamp(0.0, 1.0)
}

#[test]
fn streak_matches_run_scan_on_all_width_8_pairs() {
    let tags = all_tags(8);
    for t in &tags {
        for u in &tags {
            assert_eq!(metrics::streak_raw(t, u).unwrap(), streak_reference(t, u), "{t} {u}");
        }
    }
}

#[test]
fn streak_matches_run_scan_on_multiword_tags() {
    let mut rng = derive_stream(1, 0);
    for width in [65, 100, 128, 200] {
        for _ in 0..500 {
            let t = Tag::random(width, &mut rng).unwrap();
            let u = t.mutate_per_bit(0.1, &mut rng).unwrap();
            assert_eq!(metrics::streak_raw(&t, &u).unwrap(), streak_reference(&t, &u));
        }
    }
}

#[test]
fn integer_complement_law_and_range_at_width_4() {
    let tags = all_tags(4);
    for t in &tags {
        for u in &tags {
            let d = metrics::integer_raw(t, u).unwrap();
            assert!((0.0..1.0).contains(&d));
            let bi = metrics::integer_bi_raw(t, u).unwrap();
            assert!((0.0..=0.5).contains(&bi));
            if t != u {
                assert_eq!(d + metrics::integer_raw(u, t).unwrap(), 1.0, "{t} {u}");
            } else {
                assert_eq!(d, 0.0);
            }
        }
    }
}

#[test]
fn raw_metrics_stay_in_unit_interval_at_width_4() {
    let tags = all_tags(4);
    for kind in MetricKind::ALL {
        for t in &tags {
            for u in &tags {
                let d = raw_distance(kind, t, u).unwrap();
                assert!((0.0..=1.0).contains(&d), "{kind} {t} {u} {d}");
            }
        }
    }
}

#[test]
fn raw_hamming_satisfies_triangle_inequality_exhaustively() {
    let tags = all_tags(4);
    let d = |x: &Tag, y: &Tag| raw_distance(MetricKind::Hamming, x, y).unwrap();
    for a in &tags {
        for b in &tags {
            for c in &tags {
                assert!(d(a, b) + d(b, c) >= d(a, c));
            }
        }
    }
}

fn brute_force_best_k(engine: &MatchEngine, q: &Tag, ops: &[Tag], k: usize) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = ops
        .iter()
        .enumerate()
        .map(|(i, o)| (engine.distance(q, o).unwrap(), i))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idx.into_iter().take(k).map(|(_, i)| i).collect()
}

#[test]
fn best_k_matches_brute_force_sort_at_width_4() {
    let tags = all_tags(4);
    for kind in MetricKind::ALL {
        let table = build_table(kind, 4, 2_000, &mut derive_stream(2, kind as u64)).unwrap();
        let engine = MatchEngine::new(table);
        // every query against every ordered triple of operands, repeats included
        for q in &tags {
            for a in &tags {
                for b in &tags {
                    for c in tags.iter().step_by(5) {
                        let ops = [a.clone(), b.clone(), c.clone()];
                        for k in 1..=3 {
                            assert_eq!(
                                engine.best_k_matches(q, &ops, k).unwrap(),
                                brute_force_best_k(&engine, q, &ops, k)
                            );
                        }
                    }
                }
            }
        }
    }
}

fn tag32() -> impl Strategy<Value = Tag> {
    any::<u32>().prop_map(|v| Tag::from_unsigned(32, v as u128).unwrap())
}

proptest! {
    #[test]
    fn best_k_is_prefix_of_best_k_plus_one(
        q in tag32(),
        ops in prop::collection::vec(tag32(), 2..12),
        k in 1usize..11,
    ) {
        let engine = MatchEngine::raw(MetricKind::Hamming, 32).unwrap();
        let k = k.min(ops.len() - 1);
        let short = engine.best_k_matches(&q, &ops, k).unwrap();
        let long = engine.best_k_matches(&q, &ops, k + 1).unwrap();
        prop_assert_eq!(&short[..], &long[..k]);
    }

    #[test]
    fn commutative_metrics_are_symmetric(t in tag32(), u in tag32()) {
        for kind in MetricKind::ALL.into_iter().filter(|k| k.is_commutative()) {
            prop_assert_eq!(raw_distance(kind, &t, &u).unwrap(), raw_distance(kind, &u, &t).unwrap());
        }
    }

    #[test]
    fn identity_law_where_claimed(t in tag32()) {
        for kind in MetricKind::ALL.into_iter().filter(|k| k.has_identity()) {
            prop_assert_eq!(raw_distance(kind, &t, &t).unwrap(), 0.0);
        }
    }

    #[test]
    fn integer_matches_u128_arithmetic(a in any::<u128>(), b in any::<u128>()) {
        let t = Tag::from_unsigned(128, a).unwrap();
        let u = Tag::from_unsigned(128, b).unwrap();
        // word-wise rescaling may round differently from one u128 conversion
        let expect = b.wrapping_sub(a) as f64 / 2f64.powi(128);
        let got = metrics::integer_raw(&t, &u).unwrap();
        prop_assert!((got - expect).abs() <= 2.0 * f64::EPSILON * expect.max(f64::MIN_POSITIVE), "{} {}", got, expect);
    }
}
