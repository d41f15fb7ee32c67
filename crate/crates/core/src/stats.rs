//! Summary statistics, percentile bootstrap, and the KS uniformity statistic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::RngStream;

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Population (divide-by-n) standard deviation.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn bounds(samples: &[f64]) -> (f64, f64) {
    samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Mean accumulated relative to `shift` and clamped to `[lo, hi]`; constant
/// inputs come back bit-exact.
fn shifted_mean(values: impl Iterator<Item = f64>, n: usize, shift: f64, lo: f64, hi: f64) -> f64 {
    let sum: f64 = values.map(|x| x - shift).sum();
    (shift + sum / n as f64).clamp(lo, hi)
}

pub fn mean(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("mean of empty sample"));
    }
    let (lo, hi) = bounds(samples);
    Ok(shifted_mean(samples.iter().copied(), samples.len(), lo, lo, hi))
}

/// Linear-interpolation (type 7) quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let i = h.floor() as usize;
    let frac = h - i as f64;
    match sorted.get(i + 1) {
        Some(&next) if frac > 0.0 => sorted[i] + frac * (next - sorted[i]),
        _ => sorted[i],
    }
}

/// Percentile bootstrap interval for the mean.
///
/// Resample `i` uses stream `i` of a seed forked from `rng`.
pub fn bootstrap_ci(
    samples: &[f64],
    resamples: usize,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::invalid("bootstrap of empty sample"));
    }
    if resamples == 0 {
        return Err(Error::invalid("resamples must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let n = samples.len();
    let (lo, hi) = bounds(samples);
    let base = rng.fork_seed();
    let mut means = par::map_indexed(resamples, |i| {
        let mut r = RngStream::derive(base, i as u64);
        shifted_mean(
            (0..n).map(|_| samples[r.random_range(0..n)]),
            n,
            lo,
            lo,
            hi,
        )
    });
    means.sort_by(f64::total_cmp);
    Ok((
        quantile_sorted(&means, alpha / 2.0),
        quantile_sorted(&means, 1.0 - alpha / 2.0),
    ))
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// Uniform[0, 1], evaluated on both sides of every jump.
pub fn ks_uniform_statistic(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("KS statistic of empty sample"));
    }
    if let Some(bad) = samples.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::invalid(format!("sample {bad} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / n - x;
            let below = x - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max))
}

pub fn summarize(samples: &[f64], rng: &mut RngStream) -> Result<Summary> {
    summarize_with(samples, DEFAULT_RESAMPLES, DEFAULT_ALPHA, rng)
}

pub fn summarize_with(
    samples: &[f64],
    resamples: usize,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<Summary> {
    let mean = mean(samples)?;
    let (min, max) = bounds(samples);
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / samples.len() as f64;
    let (ci_lo, ci_hi) = bootstrap_ci(samples, resamples, alpha, rng)?;
    Ok(Summary {
        count: samples.len(),
        mean,
        sd: var.sqrt(),
        min,
        max,
        ci_lo,
        ci_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use rand::Rng;
    use proptest::prelude::*;

    #[test]
    fn constant_and_single_samples() {
        let mut rng = derive_stream(1, 0);
        assert_eq!(bootstrap_ci(&[0.1, 0.1, 0.1], 500, 0.05, &mut rng).unwrap(), (0.1, 0.1));
        assert_eq!(bootstrap_ci(&[0.7], 500, 0.05, &mut rng).unwrap(), (0.7, 0.7));
        assert!(bootstrap_ci(&[], 500, 0.05, &mut rng).is_err());
        assert!(bootstrap_ci(&[1.0], 500, 1.0, &mut rng).is_err());
    }

    #[test]
    fn bootstrap_coverage_near_nominal() {
        // 200 repeated trials of n = 10,000 uniforms, 500 resamples each
        let mut covered = 0;
        for trial in 0..200u64 {
            let mut rng = derive_stream(100 + trial, 0);
            let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
            let (lo, hi) = bootstrap_ci(&xs, 500, 0.05, &mut rng).unwrap();
            if lo <= 0.5 && 0.5 <= hi {
                covered += 1;
            }
        }
        let rate = covered as f64 / 200.0;
        assert!((0.89..=0.99).contains(&rate), "coverage {rate}");
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_uniform_statistic(&[0.5]).unwrap(), 0.5);
        assert_eq!(ks_uniform_statistic(&[0.0; 7]).unwrap(), 1.0);
        for n in [1usize, 4, 9, 100] {
            let xs: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
            let d = ks_uniform_statistic(&xs).unwrap();
            assert!((d - 1.0 / (n + 1) as f64).abs() < 1e-12, "n={n} d={d}");
        }
        assert!(ks_uniform_statistic(&[1.5]).is_err());
        assert!(ks_uniform_statistic(&[]).is_err());
    }

    #[test]
    fn summarize_examples() {
        let mut rng = derive_stream(2, 0);
        let s = summarize(&[0.0, 1.0], &mut rng).unwrap();
        assert_eq!((s.mean, s.min, s.max, s.count), (0.5, 0.0, 1.0, 2));
        assert_eq!(summarize(&[0.3], &mut rng).unwrap().sd, 0.0);
        assert!(summarize(&[], &mut rng).is_err());
    }

    #[test]
    fn mean_matches_two_pass_reference() {
        let mut rng = derive_stream(3, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| rng.random::<f64>() * 100.0 - 20.0).collect();
        let naive = xs.iter().sum::<f64>() / xs.len() as f64;
        let reference = naive + xs.iter().map(|x| x - naive).sum::<f64>() / xs.len() as f64;
        let m = mean(&xs).unwrap();
        assert!(((m - reference) / reference).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ci_within_sample_range(xs in prop::collection::vec(-5.0f64..5.0, 1..40), seed in any::<u64>()) {
            let (lo, hi) = bootstrap_ci(&xs, 200, 0.05, &mut derive_stream(seed, 0)).unwrap();
            let (min, max) = bounds(&xs);
            prop_assert!(min <= lo && lo <= hi && hi <= max);
        }

        #[test]
        fn ks_permutation_invariant(mut xs in prop::collection::vec(0.0f64..=1.0, 1..50)) {
            let d = ks_uniform_statistic(&xs).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            xs.reverse();
            prop_assert_eq!(d, ks_uniform_statistic(&xs).unwrap());
        }
    }
}
