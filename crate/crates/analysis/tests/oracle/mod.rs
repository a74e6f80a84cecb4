//! Brute-force reference implementations, written independently of the
//! library code they check.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fleiss' kappa by enumerating ordered rater pairs per subject.
pub fn fleiss_by_pairs(labels: &[Vec<usize>], q: usize) -> f64 {
    let n = labels.len() as f64;
    let k = labels[0].len();
    let mut agree_sum = 0.0;
    let mut totals = vec![0usize; q];
    for subject in labels {
        let mut agreeing = 0usize;
        for i in 0..k {
            totals[subject[i]] += 1;
            for j in 0..k {
                if i != j && subject[i] == subject[j] {
                    agreeing += 1;
                }
            }
        }
        agree_sum += agreeing as f64 / (k * (k - 1)) as f64;
    }
    let p_obs = agree_sum / n;
    let p_exp: f64 = totals.iter().map(|&t| (t as f64 / (n * k as f64)).powi(2)).sum();
    (p_obs - p_exp) / (1.0 - p_exp)
}

/// Random rater labels: (labels per subject, category count). Never fully
/// degenerate (at least two categories are used).
pub fn random_labels(rng: &mut ChaCha8Rng) -> (Vec<Vec<usize>>, usize) {
    loop {
        let n = rng.random_range(2..40);
        let k = rng.random_range(2..7);
        let q = rng.random_range(2..6);
        let labels: Vec<Vec<usize>> =
            (0..n).map(|_| (0..k).map(|_| rng.random_range(0..q)).collect()).collect();
        let first = labels[0][0];
        if labels.iter().flatten().any(|&c| c != first) {
            return (labels, q);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mid-rank by counting smaller and equal values.
pub fn rank_by_counting(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation from raw sums.
pub fn pearson_by_sums(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    pearson_by_sums(&rank_by_counting(x), &rank_by_counting(y))
}

/// Vector of `n` values drawn from a small integer range so ties occur.
pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, levels: u32) -> Vec<f64> {
    (0..n).map(|_| f64::from(rng.random_range(0..levels))).collect()
}
