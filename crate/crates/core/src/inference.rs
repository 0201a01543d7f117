//! From `S_ex` and its variance to a test decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lrd::{self, LrdRule, Series, UvCounts};
use crate::normal;
use crate::variance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    /// Alternative: upward trend.
    Greater,
    /// Alternative: downward trend.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// Fewer observations than the normal-approximation threshold.
    SmallN,
    /// Tie proportion at or above the threshold; prefer the permutation test.
    HeavyTies,
    /// Zero variance: every pair is tied.
    DegenerateVariance,
    /// Regions × periods too small for the normal approximation of `S_r`.
    RegionalSmallProduct,
}

impl Warning {
    pub fn describe(self) -> &'static str {
        match self {
            Warning::SmallN => "fewer than the recommended number of observations for the normal approximation",
            Warning::HeavyTies => "extensive (partial) ties; the permutation test is recommended",
            Warning::DegenerateVariance => "variance is zero: every pair is tied",
            Warning::RegionalSmallProduct => "regions x periods is too small for the normal approximation",
        }
    }
}

/// Warning thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    /// `small_n` fires when `n` is below this.
    pub min_n: usize,
    /// `heavy_ties` fires when the tie proportion reaches this.
    pub heavy_tie_fraction: f64,
    /// `regional_small_product` fires when groups × periods is at most this.
    pub regional_min_product: usize,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions { min_n: 10, heavy_tie_fraction: 0.6, regional_min_product: 25 }
    }
}

/// Outcome of one extended Mann-Kendall test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTestResult {
    pub n: usize,
    /// Absolute LRD that was applied.
    pub d: f64,
    pub s_ex: i64,
    pub variance: f64,
    #[serde(with = "float_repr")]
    pub z: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    pub tau_a: f64,
    /// Missing when no pair is separated (`Σu = 0`).
    pub tau_b: Option<f64>,
    pub pi_t: f64,
    pub warnings: Vec<Warning>,
}

impl TrendTestResult {
    pub fn has_warning(&self, w: Warning) -> bool {
        self.warnings.contains(&w)
    }
}

/// Continuity-corrected score: `(S-1)/σ` for `S > 0`, `(S+1)/σ` for `S < 0`,
/// and 0 for `S = 0`. With zero variance and `S != 0` this is `±∞`.
pub fn z_score(s_ex: i64, variance: f64) -> Result<f64> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidInput(format!("variance must be finite and >= 0, got {variance}")));
    }
    if s_ex == 0 {
        return Ok(0.0);
    }
    let shifted = if s_ex > 0 { s_ex - 1 } else { s_ex + 1 } as f64;
    if variance == 0.0 {
        return Ok(if s_ex > 0 { f64::INFINITY } else { f64::NEG_INFINITY });
    }
    Ok(shifted / variance.sqrt())
}

/// Normal-tail p-value for `z`; infinite `z` maps to 0 or 1.
pub fn p_value(z: f64, sidedness: Sidedness) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let p = match sidedness {
        Sidedness::TwoSided => 2.0 * normal::sf(z.abs()),
        Sidedness::Greater => normal::sf(z),
        Sidedness::Less => normal::cdf(z),
    };
    p.clamp(0.0, 1.0)
}

/// Kendall's tau-a and the tie-adjusted tau-b for the extended score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tau {
    pub tau_a: f64,
    pub tau_b: Option<f64>,
}

/// `tau_a = 2S/(n(n-1))`, `tau_b = S / ((1/2) sqrt(2Σu · n(n-1)))`.
pub fn tau_extended(s_ex: i64, u: &[u32], n: usize) -> Result<Tau> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let pairs = (n * (n - 1)) as f64;
    let sum_u: u64 = u.iter().map(|&x| x as u64).sum();
    let tau_a = 2.0 * s_ex as f64 / pairs;
    let tau_b = (sum_u > 0).then(|| {
        let t = s_ex as f64 / (0.5 * (2.0 * sum_u as f64 * pairs).sqrt());
        t.clamp(-1.0, 1.0)
    });
    Ok(Tau { tau_a, tau_b })
}

/// Runs the extended test with the normal approximation.
///
/// Only the symmetric LRD has an analytic variance; one-directional rules
/// return [`Error::UnsupportedDirection`] and belong to
/// [`crate::permutation::permutation_test`].
pub fn run_test(
    series: &Series,
    rule: &LrdRule,
    sidedness: Sidedness,
    options: &TestOptions,
) -> Result<TrendTestResult> {
    series.require_len(2)?;
    if !rule.is_symmetric() {
        return Err(Error::UnsupportedDirection);
    }
    let (s_ex, uv) = lrd::score_and_counts(series.values(), rule);
    assemble(s_ex, &uv, rule.d, sidedness, options)
}

pub(crate) fn assemble(
    s_ex: i64,
    uv: &UvCounts,
    d: f64,
    sidedness: Sidedness,
    options: &TestOptions,
) -> Result<TrendTestResult> {
    let n = uv.n();
    let variance = variance::var_extended_hat(uv)?;
    let z = z_score(s_ex, variance)?;
    let p = p_value(z, sidedness);
    let tau = tau_extended(s_ex, &uv.u, n)?;
    let pi_t = lrd::tie_fraction(uv);
    let mut warnings = Vec::new();
    if n < options.min_n {
        warnings.push(Warning::SmallN);
    }
    if pi_t >= options.heavy_tie_fraction {
        warnings.push(Warning::HeavyTies);
    }
    if variance == 0.0 {
        warnings.push(Warning::DegenerateVariance);
    }
    Ok(TrendTestResult {
        n,
        d,
        s_ex,
        variance,
        z,
        p_value: p,
        sidedness,
        tau_a: tau.tau_a,
        tau_b: tau.tau_b,
        pi_t,
        warnings,
    })
}

/// JSON has no infinities; non-finite floats are written as strings.
pub(crate) mod float_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}
