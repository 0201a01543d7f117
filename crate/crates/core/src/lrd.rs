//! Pairwise comparison under a level of relevant difference.
//!
//! Time stamps only fix the order of observations; spacing is ignored, as in
//! the classical Mann-Kendall test which works on natural time ranks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One region's (or season's) time-ordered observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    times: Vec<f64>,
    values: Vec<f64>,
    label: Option<String>,
}

impl Series {
    /// Builds a series, rejecting unequal lengths, non-finite values and
    /// timestamps that are not strictly increasing (duplicates included).
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} timestamps but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("value #{} is not finite", i + 1)));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!("timestamp #{} is not finite", i + 1)));
        }
        for (i, w) in times.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput(format!(
                    "timestamps must be strictly increasing (position {}: {} after {})",
                    i + 2,
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(Series { times, values, label: None })
    }

    /// Series observed at times `1, 2, ..., n`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let times = (1..=values.len()).map(|t| t as f64).collect();
        Series::new(times, values)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same observations in reversed time order.
    pub fn reversed(&self) -> Series {
        let mut values = self.values.clone();
        values.reverse();
        Series { times: self.times.clone(), values, label: self.label.clone() }
    }

    pub(crate) fn require_len(&self, needed: usize) -> Result<()> {
        if self.len() < needed {
            Err(Error::InsufficientData { needed, got: self.len() })
        } else {
            Ok(())
        }
    }
}

/// Whether a difference exactly equal to `d` counts as a tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `|Δ| <= d` is a tie; a difference must be strictly greater than `d`.
    #[default]
    TieIfLeq,
    /// Only `|Δ| < d` is a tie; `|Δ| = d` already counts as a difference.
    TieIfLt,
}

/// Which moves have to clear the LRD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Symmetric,
    /// Only upward moves must exceed `d`; any downward move scores −1.
    PositiveOnly,
    /// Only downward moves must exceed `d`; any upward move scores +1.
    NegativeOnly,
}

/// The relevant-difference policy applied to every pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrdRule {
    pub d: f64,
    pub boundary: Boundary,
    pub direction: Direction,
}

impl Default for LrdRule {
    fn default() -> Self {
        LrdRule::classical()
    }
}

impl LrdRule {
    /// Symmetric rule with the default `<= d` tie boundary.
    pub fn new(d: f64) -> Result<Self> {
        LrdRule::with_options(d, Boundary::default(), Direction::default())
    }

    pub fn with_options(d: f64, boundary: Boundary, direction: Direction) -> Result<Self> {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::InvalidInput(format!("LRD must be finite and >= 0, got {d}")));
        }
        Ok(LrdRule { d, boundary, direction })
    }

    /// `d = 0`: only exactly equal values tie.
    pub fn classical() -> Self {
        LrdRule { d: 0.0, boundary: Boundary::TieIfLeq, direction: Direction::Symmetric }
    }

    pub fn is_symmetric(&self) -> bool {
        self.direction == Direction::Symmetric
    }

    /// True when a difference of magnitude `gap >= 0` clears the LRD.
    /// A zero difference never does.
    #[inline]
    pub(crate) fn clears(&self, gap: f64) -> bool {
        match self.boundary {
            Boundary::TieIfLeq => gap > self.d,
            Boundary::TieIfLt => gap >= self.d && gap > 0.0,
        }
    }

    /// Score of the time-ordered pair (earlier `xi`, later `xj`) without
    /// input validation.
    #[inline]
    pub(crate) fn score(&self, xi: f64, xj: f64) -> i8 {
        let diff = xj - xi;
        if diff > 0.0 {
            match self.direction {
                Direction::NegativeOnly => 1,
                _ if self.clears(diff) => 1,
                _ => 0,
            }
        } else if diff < 0.0 {
            match self.direction {
                Direction::PositiveOnly => -1,
                _ if self.clears(-diff) => -1,
                _ => 0,
            }
        } else {
            0
        }
    }
}

/// Contribution of one time-ordered pair to the score: −1, 0 or +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairScore(i8);

impl PairScore {
    pub const DOWN: PairScore = PairScore(-1);
    pub const TIE: PairScore = PairScore(0);
    pub const UP: PairScore = PairScore(1);

    pub fn value(self) -> i8 {
        self.0
    }
}

/// Scores the pair `(xi, xj)` where `xi` was observed before `xj`.
pub fn pair_score(xi: f64, xj: f64, rule: &LrdRule) -> Result<PairScore> {
    if !xi.is_finite() || !xj.is_finite() {
        return Err(Error::InvalidInput("pair values must be finite".into()));
    }
    Ok(PairScore(rule.score(xi, xj)))
}

/// Extended Mann-Kendall score: the sum of pair scores over all
/// `n(n-1)/2` time-ordered pairs.
pub fn s_extended(series: &Series, rule: &LrdRule) -> Result<i64> {
    series.require_len(2)?;
    Ok(score_sum(series.values(), rule))
}

pub(crate) fn score_sum(values: &[f64], rule: &LrdRule) -> i64 {
    let mut s = 0i64;
    for (i, &xi) in values.iter().enumerate() {
        for &xj in &values[i + 1..] {
            s += rule.score(xi, xj) as i64;
        }
    }
    s
}

/// Per-observation exceedance counts.
///
/// `u[i]` counts the observations that `x_i` exceeds by more than `d`,
/// `v[i]` those it falls below by more than `d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UvCounts {
    pub u: Vec<u32>,
    pub v: Vec<u32>,
}

impl UvCounts {
    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn sum_u(&self) -> u64 {
        self.u.iter().map(|&x| x as u64).sum()
    }

    pub fn sum_v(&self) -> u64 {
        self.v.iter().map(|&x| x as u64).sum()
    }

    /// Number of pairs that are not (partially) tied.
    pub fn separated_pairs(&self) -> u64 {
        self.sum_u()
    }
}

pub fn uv_counts(series: &Series, rule: &LrdRule) -> Result<UvCounts> {
    if !rule.is_symmetric() {
        return Err(Error::UnsupportedDirection);
    }
    Ok(score_and_counts(series.values(), rule).1)
}

/// `S_ex` together with `u`, `v` in a single pass over the pairs.
/// Assumes a symmetric rule for the counts.
pub(crate) fn score_and_counts(values: &[f64], rule: &LrdRule) -> (i64, UvCounts) {
    let n = values.len();
    let mut u = vec![0u32; n];
    let mut v = vec![0u32; n];
    let mut s = 0i64;
    for i in 0..n {
        let xi = values[i];
        for j in i + 1..n {
            match rule.score(xi, values[j]) {
                1 => {
                    s += 1;
                    u[j] += 1;
                    v[i] += 1;
                }
                -1 => {
                    s -= 1;
                    u[i] += 1;
                    v[j] += 1;
                }
                _ => {}
            }
        }
    }
    (s, UvCounts { u, v })
}

/// Maximum possible |S|: the number of time-ordered pairs.
pub fn max_score(n: usize) -> u64 {
    (n as u64) * (n as u64).saturating_sub(1) / 2
}

/// Fraction of pairs that are (partially) tied: `(maxS - Σu) / maxS`.
pub fn tie_proportion(series: &Series, rule: &LrdRule) -> Result<f64> {
    series.require_len(2)?;
    let uv = uv_counts(series, rule)?;
    Ok(tie_fraction(&uv))
}

pub(crate) fn tie_fraction(uv: &UvCounts) -> f64 {
    let max = max_score(uv.n());
    if max == 0 {
        return 0.0;
    }
    (max - uv.sum_u()) as f64 / max as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DBP: [f64; 10] = [90.9, 95.2, 98.6, 95.8, 100.7, 94.9, 92.8, 101.5, 99.0, 98.7];

    fn dbp() -> Series {
        Series::from_values(DBP.to_vec()).unwrap()
    }

    // Independent double loop straight from the definition.
    fn brute_s(x: &[f64], d: f64) -> i64 {
        let mut s = 0;
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                if (x[i] - x[j]).abs() > d {
                    s += if x[j] > x[i] { 1 } else { -1 };
                }
            }
        }
        s
    }

    fn brute_tied(x: &[f64], d: f64) -> usize {
        let mut t = 0;
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                if (x[i] - x[j]).abs() <= d {
                    t += 1;
                }
            }
        }
        t
    }

    #[test]
    fn partial_tie_triple() {
        let r = LrdRule::new(0.6).unwrap();
        assert_eq!(pair_score(94.9, 95.2, &r).unwrap(), PairScore::TIE);
        assert_eq!(pair_score(95.2, 95.8, &r).unwrap(), PairScore::TIE);
        assert_eq!(pair_score(94.9, 95.8, &r).unwrap(), PairScore::UP);
    }

    #[test]
    fn boundary_conventions() {
        let leq = LrdRule::new(0.5).unwrap();
        let lt = LrdRule::with_options(0.5, Boundary::TieIfLt, Direction::Symmetric).unwrap();
        assert_eq!(pair_score(1.0, 1.5, &leq).unwrap(), PairScore::TIE);
        assert_eq!(pair_score(1.0, 1.5, &lt).unwrap(), PairScore::UP);
        assert_eq!(pair_score(1.5, 1.0, &lt).unwrap(), PairScore::DOWN);
        // 95.8 - 95.2 is slightly below 0.6 in binary, so probe with exact values
        let lt6 = LrdRule::with_options(0.6, Boundary::TieIfLt, Direction::Symmetric).unwrap();
        assert_eq!(pair_score(95.2, 95.8, &lt6).unwrap(), PairScore::TIE);
    }

    #[test]
    fn identical_values_always_tie() {
        for rule in [
            LrdRule::classical(),
            LrdRule::with_options(0.0, Boundary::TieIfLt, Direction::Symmetric).unwrap(),
            LrdRule::with_options(0.0, Boundary::TieIfLt, Direction::PositiveOnly).unwrap(),
            LrdRule::with_options(3.0, Boundary::TieIfLeq, Direction::NegativeOnly).unwrap(),
        ] {
            assert_eq!(pair_score(7.25, 7.25, &rule).unwrap(), PairScore::TIE);
        }
    }

    #[test]
    fn one_directional_rules() {
        let pos = LrdRule::with_options(1.0, Boundary::TieIfLeq, Direction::PositiveOnly).unwrap();
        assert_eq!(pair_score(0.0, 0.5, &pos).unwrap(), PairScore::TIE);
        assert_eq!(pair_score(0.0, 1.5, &pos).unwrap(), PairScore::UP);
        assert_eq!(pair_score(0.5, 0.0, &pos).unwrap(), PairScore::DOWN);
        let neg = LrdRule::with_options(1.0, Boundary::TieIfLeq, Direction::NegativeOnly).unwrap();
        assert_eq!(pair_score(0.5, 0.0, &neg).unwrap(), PairScore::TIE);
        assert_eq!(pair_score(1.5, 0.0, &neg).unwrap(), PairScore::DOWN);
        assert_eq!(pair_score(0.0, 0.5, &neg).unwrap(), PairScore::UP);
        let s = Series::from_values(vec![0.0, 0.5]).unwrap();
        assert!(matches!(uv_counts(&s, &pos), Err(Error::UnsupportedDirection)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pair_score(f64::NAN, 1.0, &LrdRule::classical()).is_err());
        assert!(LrdRule::new(-0.1).is_err());
        assert!(LrdRule::new(f64::INFINITY).is_err());
        assert!(Series::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(Series::new(vec![2.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(Series::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(Series::from_values(vec![1.0, f64::INFINITY]).is_err());
        let one = Series::from_values(vec![1.0]).unwrap();
        assert!(matches!(
            s_extended(&one, &LrdRule::classical()),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn dbp_scores() {
        // ranks recomputed from the values; the printed rank row of the
        // example swaps 98.6 and 98.7, which would give 13
        let ranks = [1, 4, 6, 5, 9, 3, 2, 10, 8, 7];
        let mut from_ranks = 0;
        for i in 0..10 {
            for j in i + 1..10 {
                from_ranks += if ranks[j] > ranks[i] { 1 } else { -1 };
            }
        }
        assert_eq!(from_ranks, 15);
        assert_eq!(brute_s(&DBP, 0.0), 15);
        assert_eq!(brute_s(&DBP, 0.6), 14);
        assert_eq!(brute_tied(&DBP, 0.6), 5);
        assert_eq!(s_extended(&dbp(), &LrdRule::classical()).unwrap(), 15);
        assert_eq!(s_extended(&dbp(), &LrdRule::new(0.6).unwrap()).unwrap(), 14);
    }

    #[test]
    fn monotone_series() {
        let s = Series::from_values(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s_extended(&s, &LrdRule::new(0.5).unwrap()).unwrap(), 10);
    }

    #[test]
    fn uv_examples() {
        let s = Series::from_values(vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        let uv = uv_counts(&s, &LrdRule::classical()).unwrap();
        assert_eq!(uv.u, vec![0, 1, 2, 3]);
        assert_eq!(uv.v, vec![3, 2, 1, 0]);

        let c = Series::from_values(vec![2.0; 6]).unwrap();
        let uv = uv_counts(&c, &LrdRule::new(1.0).unwrap()).unwrap();
        assert!(uv.u.iter().chain(&uv.v).all(|&x| x == 0));

        let uv = uv_counts(&dbp(), &LrdRule::new(0.6).unwrap()).unwrap();
        assert_eq!(uv.sum_u(), 40);
        assert_eq!(uv.sum_v(), 40);
    }

    #[test]
    fn tie_proportion_examples() {
        let distinct = Series::from_values(vec![3.0, 1.0, 2.0, 5.0]).unwrap();
        assert_eq!(tie_proportion(&distinct, &LrdRule::classical()).unwrap(), 0.0);
        let c = Series::from_values(vec![4.0; 5]).unwrap();
        assert_eq!(tie_proportion(&c, &LrdRule::classical()).unwrap(), 1.0);
        let p = tie_proportion(&dbp(), &LrdRule::new(0.6).unwrap()).unwrap();
        assert!((p - 5.0 / 45.0).abs() < 1e-15);
    }

    fn values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        // quarter steps keep exact ties and exact float arithmetic in play
        prop::collection::vec((-40i32..40).prop_map(|k| k as f64 * 0.25), 2..max_len)
    }

    proptest! {
        #[test]
        fn reduces_to_classical(x in values(40)) {
            let s = Series::from_values(x.clone()).unwrap();
            let lt0 = LrdRule::with_options(0.0, Boundary::TieIfLt, Direction::Symmetric).unwrap();
            prop_assert_eq!(s_extended(&s, &lt0).unwrap(), brute_s(&x, 0.0));
            prop_assert_eq!(s_extended(&s, &LrdRule::classical()).unwrap(), brute_s(&x, 0.0));
        }

        #[test]
        fn reversal_negates(x in values(30), d in 0.0f64..3.0) {
            let s = Series::from_values(x).unwrap();
            let r = LrdRule::new(d).unwrap();
            prop_assert_eq!(s_extended(&s.reversed(), &r).unwrap(), -s_extended(&s, &r).unwrap());
        }

        #[test]
        fn count_invariants(x in values(30), d in 0.0f64..3.0) {
            let s = Series::from_values(x.clone()).unwrap();
            let r = LrdRule::new(d).unwrap();
            let uv = uv_counts(&s, &r).unwrap();
            let n = x.len() as u32;
            prop_assert_eq!(uv.sum_u(), uv.sum_v());
            for (a, b) in uv.u.iter().zip(&uv.v) {
                prop_assert!(a + b < n);
            }
            // definition with the difference form
            for i in 0..x.len() {
                let ui = x.iter().filter(|&&xj| x[i] - xj > d).count() as u32;
                let vi = x.iter().filter(|&&xj| xj - x[i] > d).count() as u32;
                prop_assert_eq!(uv.u[i], ui);
                prop_assert_eq!(uv.v[i], vi);
            }
            prop_assert_eq!(s_extended(&s, &r).unwrap(), brute_s(&x, d));
        }

        #[test]
        fn monotone_in_d(x in values(30), d1 in 0.0f64..3.0, d2 in 0.0f64..3.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let s = Series::from_values(x).unwrap();
            let a = uv_counts(&s, &LrdRule::new(lo).unwrap()).unwrap();
            let b = uv_counts(&s, &LrdRule::new(hi).unwrap()).unwrap();
            prop_assert!(b.sum_u() <= a.sum_u());
            prop_assert!(tie_fraction(&b) >= tie_fraction(&a));
        }

        #[test]
        fn translation_and_scale(x in values(25), k in 0usize..4, shift in -64i32..64, scale_pow in 0u32..4) {
            // dyadic shifts and power-of-two scales keep the arithmetic exact
            let d = k as f64 * 0.25;
            let c = (1u32 << scale_pow) as f64;
            let s = Series::from_values(x.clone()).unwrap();
            let base_rule = LrdRule::new(d).unwrap();
            let base = s_extended(&s, &base_rule).unwrap();
            let base_uv = uv_counts(&s, &base_rule).unwrap();
            let shifted = Series::from_values(x.iter().map(|v| v + shift as f64).collect()).unwrap();
            prop_assert_eq!(s_extended(&shifted, &base_rule).unwrap(), base);
            prop_assert_eq!(uv_counts(&shifted, &base_rule).unwrap(), base_uv.clone());
            let scaled = Series::from_values(x.iter().map(|v| v * c).collect()).unwrap();
            let scaled_rule = LrdRule::new(d * c).unwrap();
            prop_assert_eq!(s_extended(&scaled, &scaled_rule).unwrap(), base);
            prop_assert_eq!(uv_counts(&scaled, &scaled_rule).unwrap(), base_uv);
        }

        #[test]
        fn antisymmetric_scores(a in -100.0f64..100.0, b in -100.0f64..100.0, d in 0.0f64..10.0) {
            for boundary in [Boundary::TieIfLeq, Boundary::TieIfLt] {
                let r = LrdRule::with_options(d, boundary, Direction::Symmetric).unwrap();
                prop_assert_eq!(
                    pair_score(a, b, &r).unwrap().value(),
                    -pair_score(b, a, &r).unwrap().value()
                );
            }
        }
    }
}
