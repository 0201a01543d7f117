//! Regional and seasonal Kendall tests: per-group scores and variances are
//! summed into one overall statistic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{self, float_repr, Sidedness, TestOptions, TrendTestResult, Warning};
use crate::lrd::{self, Boundary, Direction, LrdRule, Series};
use crate::par;

/// Groups observed on a shared time grid. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalDataset {
    times: Vec<f64>,
    groups: BTreeMap<String, Vec<Option<f64>>>,
}

impl RegionalDataset {
    pub fn new(times: Vec<f64>, groups: BTreeMap<String, Vec<Option<f64>>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::NoData);
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("time grid must be finite and strictly increasing".into()));
        }
        for (label, vals) in &groups {
            if vals.len() != times.len() {
                return Err(Error::InvalidInput(format!(
                    "group {label:?} has {} values for {} time points",
                    vals.len(),
                    times.len()
                )));
            }
            if vals.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("group {label:?} has a non-finite value")));
            }
        }
        Ok(RegionalDataset { times, groups })
    }

    /// Builds a dataset from complete series that share one time grid.
    pub fn from_series(series: impl IntoIterator<Item = (String, Series)>) -> Result<Self> {
        let mut times: Option<Vec<f64>> = None;
        let mut groups = BTreeMap::new();
        for (label, s) in series {
            match &times {
                None => times = Some(s.times().to_vec()),
                Some(t) if t.as_slice() != s.times() => {
                    return Err(Error::InvalidInput(format!("group {label:?} uses a different time grid")))
                }
                Some(_) => {}
            }
            if groups.insert(label.clone(), s.values().iter().map(|&v| Some(v)).collect()).is_some() {
                return Err(Error::InvalidInput(format!("duplicate group {label:?}")));
            }
        }
        RegionalDataset::new(times.ok_or(Error::NoData)?, groups)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn groups(&self) -> &BTreeMap<String, Vec<Option<f64>>> {
        &self.groups
    }

    pub fn periods(&self) -> usize {
        self.times.len()
    }

    fn periods_at_least(&self, needed: usize) -> Result<()> {
        if self.times.len() < needed {
            return Err(Error::InsufficientData { needed, got: self.times.len() });
        }
        Ok(())
    }

    /// Complete groups as series, plus the labels of groups with gaps.
    pub fn complete_groups(&self) -> Result<(Vec<(String, Series)>, Vec<String>)> {
        let mut keep = Vec::new();
        let mut excluded = Vec::new();
        for (label, vals) in &self.groups {
            match vals.iter().copied().collect::<Option<Vec<f64>>>() {
                Some(v) => keep.push((label.clone(), Series::new(self.times.clone(), v)?.with_label(label))),
                None => excluded.push(label.clone()),
            }
        }
        Ok((keep, excluded))
    }
}

/// How the LRD of one group is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LrdSpec {
    Absolute(f64),
    /// `d = f × mean(group values)`.
    FractionOfMean(f64),
}

impl LrdSpec {
    fn validate(self) -> Result<()> {
        let x = match self {
            LrdSpec::Absolute(d) => d,
            LrdSpec::FractionOfMean(f) => f,
        };
        if !(x.is_finite() && x >= 0.0) {
            return Err(Error::InvalidInput(format!("LRD parameter must be finite and >= 0, got {x}")));
        }
        Ok(())
    }

    /// Absolute LRD for a group with these values.
    pub fn resolve(self, values: &[f64]) -> Result<f64> {
        self.validate()?;
        match self {
            LrdSpec::Absolute(d) => Ok(d),
            LrdSpec::FractionOfMean(f) => {
                if values.is_empty() {
                    return Err(Error::NoData);
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let d = f * mean;
                if d < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "fraction-of-mean LRD needs a non-negative mean, got {mean}"
                    )));
                }
                Ok(d)
            }
        }
    }
}

/// LRD policy for a whole dataset, with optional per-group overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrdPolicy {
    pub default: LrdSpec,
    #[serde(default)]
    pub overrides: BTreeMap<String, LrdSpec>,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default = "symmetric")]
    pub direction: Direction,
}

fn symmetric() -> Direction {
    Direction::Symmetric
}

impl LrdPolicy {
    pub fn absolute(d: f64) -> Self {
        LrdPolicy::from_spec(LrdSpec::Absolute(d))
    }

    pub fn fraction_of_mean(f: f64) -> Self {
        LrdPolicy::from_spec(LrdSpec::FractionOfMean(f))
    }

    pub fn from_spec(spec: LrdSpec) -> Self {
        LrdPolicy { default: spec, overrides: BTreeMap::new(), boundary: Boundary::default(), direction: Direction::Symmetric }
    }

    pub fn with_override(mut self, label: impl Into<String>, spec: LrdSpec) -> Self {
        self.overrides.insert(label.into(), spec);
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// The rule applied to group `label` with the given values.
    pub fn rule_for(&self, label: &str, values: &[f64]) -> Result<LrdRule> {
        let spec = self.overrides.get(label).copied().unwrap_or(self.default);
        LrdRule::with_options(spec.resolve(values)?, self.boundary, self.direction)
    }
}

/// Outcome of a regional (or seasonal) test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalResult {
    pub s_r: i64,
    pub variance: f64,
    #[serde(with = "float_repr")]
    pub z_r: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    /// Tie proportion pooled over all groups' pairs.
    pub pi_t: f64,
    pub groups_used: usize,
    pub periods: usize,
    pub per_group: BTreeMap<String, TrendTestResult>,
    pub excluded_groups: Vec<String>,
    pub warnings: Vec<Warning>,
}

impl RegionalResult {
    pub fn has_warning(&self, w: Warning) -> bool {
        self.warnings.contains(&w)
    }
}

/// Complete groups with their resolved rules, in label order.
pub(crate) fn resolve_groups(
    data: &RegionalDataset,
    policy: &LrdPolicy,
) -> Result<(Vec<(String, Series, LrdRule)>, Vec<String>)> {
    for label in policy.overrides.keys() {
        if !data.groups.contains_key(label) {
            return Err(Error::InvalidInput(format!("LRD override for unknown group {label:?}")));
        }
    }
    let (groups, excluded) = data.complete_groups()?;
    if groups.is_empty() {
        return Err(Error::NoData);
    }
    let resolved = groups
        .into_iter()
        .map(|(label, s)| {
            let rule = policy.rule_for(&label, s.values())?;
            Ok((label, s, rule))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((resolved, excluded))
}

/// Regional Kendall test with the normal approximation for `Z_r`.
pub fn regional_test(
    data: &RegionalDataset,
    policy: &LrdPolicy,
    sidedness: Sidedness,
    options: &TestOptions,
) -> Result<RegionalResult> {
    data.periods_at_least(2)?;
    if policy.direction != Direction::Symmetric {
        return Err(Error::UnsupportedDirection);
    }
    let (groups, excluded) = resolve_groups(data, policy)?;
    let results = par::map_slice(&groups, |(_, s, rule)| {
        inference::run_test(s, rule, sidedness, options)
    });
    let mut per_group = BTreeMap::new();
    for ((label, _, _), r) in groups.iter().zip(results) {
        per_group.insert(label.clone(), r?);
    }
    combine(per_group, excluded, data.periods(), sidedness, options)
}

/// Seasonal Kendall test: identical aggregation with seasons as groups.
pub fn grouped_test(
    data: &RegionalDataset,
    policy: &LrdPolicy,
    sidedness: Sidedness,
    options: &TestOptions,
) -> Result<RegionalResult> {
    regional_test(data, policy, sidedness, options)
}

fn combine(
    per_group: BTreeMap<String, TrendTestResult>,
    excluded_groups: Vec<String>,
    periods: usize,
    sidedness: Sidedness,
    options: &TestOptions,
) -> Result<RegionalResult> {
    // folded in label order so the floating-point sum is reproducible
    let s_r: i64 = per_group.values().map(|r| r.s_ex).sum();
    let variance: f64 = per_group.values().map(|r| r.variance).sum();
    let pairs: u64 = per_group.values().map(|r| lrd::max_score(r.n)).sum();
    let tied: f64 = per_group.values().map(|r| r.pi_t * lrd::max_score(r.n) as f64).sum();
    let pi_t = if pairs == 0 { 0.0 } else { tied / pairs as f64 };
    let z_r = inference::z_score(s_r, variance)?;
    let p_value = inference::p_value(z_r, sidedness);
    let groups_used = per_group.len();
    let mut warnings = Vec::new();
    if groups_used * periods <= options.regional_min_product {
        warnings.push(Warning::RegionalSmallProduct);
    }
    if pi_t >= options.heavy_tie_fraction {
        warnings.push(Warning::HeavyTies);
    }
    if variance == 0.0 {
        warnings.push(Warning::DegenerateVariance);
    }
    Ok(RegionalResult {
        s_r,
        variance,
        z_r,
        p_value,
        sidedness,
        pi_t,
        groups_used,
        periods,
        per_group,
        excluded_groups,
        warnings,
    })
}
