//! Agreement and correlation statistics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {need} {what}, got {got}")]
    TooFew { what: &'static str, need: usize, got: usize },
    #[error("row {row} sums to {sum}, expected {k}")]
    RowSum { row: usize, sum: u64, k: u64 },
    #[error("inputs have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined for a constant input")]
    Constant,
    #[error("agreement undefined: every rating falls in one category but subjects disagree")]
    DegenerateAgreement,
    #[error("effect size is infinite at |r| = 1")]
    Infinite,
    #[error("non-finite input")]
    NonFinite,
}

/// Subjects × categories counts with the same number of raters per subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingMatrix {
    rows: Vec<Vec<u64>>,
    raters: u64,
}

impl RatingMatrix {
    pub fn new(rows: Vec<Vec<u64>>) -> Result<Self, StatsError> {
        if rows.len() < 2 {
            return Err(StatsError::TooFew { what: "subjects", need: 2, got: rows.len() });
        }
        let q = rows[0].len();
        if q < 1 {
            return Err(StatsError::TooFew { what: "categories", need: 1, got: 0 });
        }
        let k: u64 = rows[0].iter().sum();
        if k < 2 {
            return Err(StatsError::TooFew { what: "raters", need: 2, got: k as usize });
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != q {
                return Err(StatsError::LengthMismatch(q, r.len()));
            }
            let sum: u64 = r.iter().sum();
            if sum != k {
                return Err(StatsError::RowSum { row: i, sum, k });
            }
        }
        Ok(Self { rows, raters: k })
    }

    /// Builds counts from per-subject rater labels (category indices `< q`).
    pub fn from_labels(labels: &[Vec<usize>], q: usize) -> Result<Self, StatsError> {
        let rows = labels
            .iter()
            .map(|subject| {
                let mut row = vec![0u64; q];
                for &c in subject {
                    row[c] += 1;
                }
                row
            })
            .collect();
        Self::new(rows)
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn raters(&self) -> u64 {
        self.raters
    }
}

/// Fleiss' kappa for a fixed number of raters per subject.
pub fn fleiss_kappa(m: &RatingMatrix) -> Result<f64, StatsError> {
    let n = m.rows.len() as f64;
    let k = m.raters as f64;
    let q = m.rows[0].len();

    let p_bar = m
        .rows
        .iter()
        .map(|r| (r.iter().map(|&c| (c * c) as f64).sum::<f64>() - k) / (k * (k - 1.0)))
        .sum::<f64>()
        / n;
    let p_e: f64 = (0..q)
        .map(|j| {
            let pj = m.rows.iter().map(|r| r[j] as f64).sum::<f64>() / (n * k);
            pj * pj
        })
        .sum();

    if (1.0 - p_e).abs() < 1e-15 {
        return if (p_bar - 1.0).abs() < 1e-15 { Ok(1.0) } else { Err(StatsError::DegenerateAgreement) };
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Ranks starting at 1, ties sharing the mean of their positions.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub rho: f64,
    /// Two-sided, from the t approximation.
    pub p_value: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation_p: Option<f64>,
}

/// Spearman's rho with mid-rank ties and a two-sided t-approximation p.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { what: "observations", need: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let rho = pearson(&mid_ranks(x), &mid_ranks(y))?;
    let n = x.len();
    Ok(CorrelationResult {
        rho,
        p_value: t_approx_p(rho, n),
        n,
        d: cohen_d_from_r(rho).ok(),
        permutation_p: None,
    })
}

/// Two-sided p for rho under t = rho * sqrt((n-2)/(1-rho^2)), df = n-2.
pub fn t_approx_p(rho: f64, n: usize) -> f64 {
    let df = n as f64 - 2.0;
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df positive for n >= 3");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Permutation p: share of seeded shuffles of `y` whose |rho| reaches the
/// observed one, with the usual +1 correction.
pub fn permutation_p(x: &[f64], y: &[f64], resamples: usize, seed: u64) -> Result<f64, StatsError> {
    let observed = spearman(x, y)?.rho.abs();
    let rx = mid_ranks(x);
    let mut ry = mid_ranks(y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..resamples {
        ry.shuffle(&mut rng);
        if pearson(&rx, &ry)?.abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (resamples + 1) as f64)
}

/// Converts a correlation to Cohen's d via d = 2r / sqrt(1 - r^2).
pub fn cohen_d_from_r(r: f64) -> Result<f64, StatsError> {
    if !r.is_finite() {
        return Err(StatsError::NonFinite);
    }
    if r.abs() >= 1.0 {
        return Err(StatsError::Infinite);
    }
    Ok(2.0 * r / (1.0 - r * r).sqrt())
}

/// Mean and sample standard deviation; `None` when empty.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((mean, sd))
}
