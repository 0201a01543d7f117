//! Permutation tests for `S_ex`, for small samples and heavily tied data.
//!
//! Under the null of no trend every ordering of the observations is equally
//! likely, so the reference distribution of the score comes from reshuffling
//! the values over the time points. Replicate `i` shuffles with its own
//! generator stream, which makes the result independent of thread count.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Sidedness;
use crate::lrd::{self, LrdRule, Series};
use crate::par;
use crate::regional::{self, LrdPolicy, RegionalDataset};
use crate::rng::{stream_rng, SeedKey};

pub const DEFAULT_REPLICATES: u64 = 10_000;

/// Largest `n` enumerated exhaustively (8! = 40320 orderings).
pub const EXHAUSTIVE_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    Sampled,
    Exhaustive,
    /// Exhaustive when `n <= EXHAUSTIVE_MAX_N`, sampled otherwise.
    #[default]
    Auto,
}

/// Moments and range of the permutation distribution that was visited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub min: i64,
    pub max: i64,
}

impl NullSummary {
    fn from_scores(scores: &[i64]) -> NullSummary {
        let count = scores.len() as u64;
        let sum: i128 = scores.iter().map(|&s| s as i128).sum();
        let sum_sq: i128 = scores.iter().map(|&s| (s as i128) * (s as i128)).sum();
        let mean = sum as f64 / count as f64;
        let variance = if count > 1 {
            // exact integer numerator keeps this free of cancellation
            (count as i128 * sum_sq - sum * sum) as f64 / (count as f64 * (count - 1) as f64)
        } else {
            0.0
        };
        NullSummary {
            count,
            mean,
            variance,
            min: scores.iter().copied().min().unwrap_or(0),
            max: scores.iter().copied().max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub s_obs: i64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    /// True when every ordering was enumerated and `p_value` is exact.
    pub exhaustive: bool,
    /// Random permutations drawn; `n!` for exhaustive runs.
    pub replicates: u64,
    /// Monte Carlo standard error of a sampled p-value.
    pub mc_stderr: Option<f64>,
    pub null: NullSummary,
}

fn as_extreme(s: i64, s_obs: i64, sidedness: Sidedness) -> bool {
    match sidedness {
        Sidedness::TwoSided => s.abs() >= s_obs.abs(),
        Sidedness::Greater => s >= s_obs,
        Sidedness::Less => s <= s_obs,
    }
}

fn sampled_result(s_obs: i64, scores: &[i64], sidedness: Sidedness) -> PermutationResult {
    let r = scores.len() as u64;
    let hits = scores.iter().filter(|&&s| as_extreme(s, s_obs, sidedness)).count() as u64;
    let p = (1 + hits) as f64 / (r + 1) as f64;
    PermutationResult {
        s_obs,
        p_value: p,
        sidedness,
        exhaustive: false,
        replicates: r,
        mc_stderr: Some((p * (1.0 - p) / r as f64).sqrt()),
        null: NullSummary::from_scores(scores),
    }
}

fn check_replicates(replicates: u64) -> Result<()> {
    if replicates < 1 {
        return Err(Error::InvalidInput("replicates must be at least 1".into()));
    }
    Ok(())
}

/// Sampled permutation test with the add-one estimator
/// `p = (1 + #{extreme}) / (replicates + 1)`. Accepts one-directional rules.
pub fn permutation_test(
    series: &Series,
    rule: &LrdRule,
    replicates: u64,
    seed: u64,
    sidedness: Sidedness,
) -> Result<PermutationResult> {
    series.require_len(2)?;
    check_replicates(replicates)?;
    let values = series.values();
    let s_obs = lrd::score_sum(values, rule);
    let scores = sampled_scores(values, rule, replicates, SeedKey::new(seed).with_str("permutation"));
    Ok(sampled_result(s_obs, &scores, sidedness))
}

pub(crate) fn sampled_scores(values: &[f64], rule: &LrdRule, replicates: u64, key: SeedKey) -> Vec<i64> {
    par::map_range(replicates, |i| {
        let mut rng = stream_rng(key, i);
        let mut x = values.to_vec();
        x.shuffle(&mut rng);
        lrd::score_sum(&x, rule)
    })
}

/// Exact permutation p-value over all `n!` orderings.
pub fn exhaustive_test(series: &Series, rule: &LrdRule, sidedness: Sidedness) -> Result<PermutationResult> {
    series.require_len(2)?;
    let n = series.len();
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::InvalidInput(format!(
            "exhaustive enumeration is limited to n <= {EXHAUSTIVE_MAX_N}, got {n}"
        )));
    }
    let mut x = series.values().to_vec();
    let s_obs = lrd::score_sum(&x, rule);
    let mut scores = Vec::with_capacity((1..=n).product());
    heap_permutations(&mut x, |p| scores.push(lrd::score_sum(p, rule)));
    let total = scores.len() as u64;
    let hits = scores.iter().filter(|&&s| as_extreme(s, s_obs, sidedness)).count() as u64;
    Ok(PermutationResult {
        s_obs,
        p_value: hits as f64 / total as f64,
        sidedness,
        exhaustive: true,
        replicates: total,
        mc_stderr: None,
        null: NullSummary::from_scores(&scores),
    })
}

/// Dispatches on `mode`.
pub fn run(
    series: &Series,
    rule: &LrdRule,
    mode: PermutationMode,
    replicates: u64,
    seed: u64,
    sidedness: Sidedness,
) -> Result<PermutationResult> {
    let exhaustive = match mode {
        PermutationMode::Exhaustive => true,
        PermutationMode::Sampled => false,
        PermutationMode::Auto => series.len() <= EXHAUSTIVE_MAX_N,
    };
    if exhaustive {
        exhaustive_test(series, rule, sidedness)
    } else {
        permutation_test(series, rule, replicates, seed, sidedness)
    }
}

// Heap's algorithm, iterative form; visits every ordering exactly once.
fn heap_permutations<F: FnMut(&[f64])>(x: &mut [f64], mut visit: F) {
    let n = x.len();
    let mut c = vec![0usize; n];
    visit(x);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                x.swap(0, i);
            } else {
                x.swap(c[i], i);
            }
            visit(x);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Permutation version of the regional test: values are shuffled within each
/// group independently and the per-group scores summed.
pub fn regional_permutation_test(
    data: &RegionalDataset,
    policy: &LrdPolicy,
    replicates: u64,
    seed: u64,
    sidedness: Sidedness,
) -> Result<PermutationResult> {
    check_replicates(replicates)?;
    if data.periods() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: data.periods() });
    }
    let (groups, _) = regional::resolve_groups(data, policy)?;
    let s_obs: i64 = groups.iter().map(|(_, s, rule)| lrd::score_sum(s.values(), rule)).sum();
    let key = SeedKey::new(seed).with_str("regional-permutation");
    let scores = par::map_range(replicates, |i| {
        let mut rng = stream_rng(key, i);
        groups
            .iter()
            .map(|(_, s, rule)| {
                let mut x = s.values().to_vec();
                x.shuffle(&mut rng);
                lrd::score_sum(&x, rule)
            })
            .sum()
    });
    Ok(sampled_result(s_obs, &scores, sidedness))
}
