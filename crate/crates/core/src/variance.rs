//! Variance of the (extended) Mann-Kendall score under the null hypothesis.
//!
//! Three routes are provided:
//!
//! * [`var_classical`]: the textbook tie-corrected formula for exact ties,
//! * [`var_extended_hat`]: the plug-in estimator built from `u`, `v`,
//! * [`var_theoretical`]: the closed form given the distribution moments.
//!
//! At `d = 0` on tie-free data all three agree on `n(n-1)(2n+5)/18`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lrd::UvCounts;

/// Slack allowed on the moment inequality chain for quadrature rounding.
pub const MOMENT_SLACK: f64 = 1e-12;

/// Extents of the groups of exactly equal values (each extent >= 2).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieGroups {
    extents: Vec<usize>,
}

impl TieGroups {
    pub fn none() -> Self {
        TieGroups::default()
    }

    pub fn new(extents: Vec<usize>) -> Result<Self> {
        if let Some(w) = extents.iter().find(|&&w| w < 2) {
            return Err(Error::InvalidTieStructure(format!("tie extent {w} is below 2")));
        }
        Ok(TieGroups { extents })
    }

    /// Groups exactly equal values.
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut extents = Vec::new();
        let mut run = 1usize;
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                if run >= 2 {
                    extents.push(run);
                }
                run = 1;
            }
        }
        if run >= 2 {
            extents.push(run);
        }
        TieGroups { extents }
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }
}

fn tie_term(w: u64) -> u64 {
    w * (w - 1) * (2 * w + 5)
}

/// `(1/18){n(n-1)(2n+5) - Σ w(w-1)(2w+5)}`.
pub fn var_classical(n: usize, ties: &TieGroups) -> Result<f64> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if let Some(w) = ties.extents.iter().find(|&&w| w > n) {
        return Err(Error::InvalidTieStructure(format!("tie extent {w} exceeds n = {n}")));
    }
    let total: usize = ties.extents.iter().sum();
    if total > n {
        return Err(Error::InvalidTieStructure(format!(
            "tie extents cover {total} values but n = {n}"
        )));
    }
    let n = n as u64;
    let numerator = tie_term(n) - ties.extents.iter().map(|&w| tie_term(w as u64)).sum::<u64>();
    Ok(numerator as f64 / 18.0)
}

/// Three times the plug-in variance, `Σ(u_i - v_i)² + Σu_i`, as an integer.
pub(crate) fn var_hat_times_three(uv: &UvCounts) -> Result<u64> {
    let (su, sv) = (uv.sum_u(), uv.sum_v());
    if su != sv || uv.u.len() != uv.v.len() {
        return Err(Error::InconsistentCounts { sum_u: su, sum_v: sv });
    }
    let sq: u64 = uv
        .u
        .iter()
        .zip(&uv.v)
        .map(|(&a, &b)| {
            let diff = a as i64 - b as i64;
            (diff * diff) as u64
        })
        .sum();
    Ok(sq + su)
}

/// Plug-in estimate `(1/3)Σ(u_i - v_i)² + (1/3)Σu_i`.
///
/// Evaluated in integer arithmetic and divided once, so it matches the
/// classical formula bit-for-bit whenever the two agree mathematically.
pub fn var_extended_hat(uv: &UvCounts) -> Result<f64> {
    Ok(var_hat_times_three(uv)? as f64 / 3.0)
}

/// Probabilities that parameterise the null variance of `S_ex`.
///
/// With three iid draws: `alpha_plus = P(X1 > X2 + d, X1 > X3 + d)`,
/// `alpha_minus = P(X1 < X2 - d, X1 < X3 - d)`,
/// `beta = P(X1 > X2 + d, X1 < X3 - d)` and `gamma = P(X1 > X2 + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MomentSet {
    /// Moments of any continuous distribution at `d = 0`.
    pub const CONTINUOUS_AT_ZERO: MomentSet =
        MomentSet { alpha_plus: 1.0 / 3.0, alpha_minus: 1.0 / 3.0, beta: 1.0 / 6.0, gamma: 0.5 };

    /// Validated constructor: each value in `[0, 1]` and
    /// `min(alpha_minus, alpha_plus) >= gamma² >= beta` up to [`MOMENT_SLACK`].
    pub fn new(alpha_plus: f64, alpha_minus: f64, beta: f64, gamma: f64) -> Result<Self> {
        let m = MomentSet { alpha_plus, alpha_minus, beta, gamma };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_plus", self.alpha_plus),
            ("alpha_minus", self.alpha_minus),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() || !(-MOMENT_SLACK..=1.0 + MOMENT_SLACK).contains(&v) {
                return Err(Error::InvalidMoments(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        let g2 = self.gamma * self.gamma;
        if self.alpha_plus.min(self.alpha_minus) < g2 - MOMENT_SLACK {
            return Err(Error::InvalidMoments(format!(
                "min(alpha-, alpha+) = {} < gamma^2 = {g2}",
                self.alpha_plus.min(self.alpha_minus)
            )));
        }
        if g2 < self.beta - MOMENT_SLACK {
            return Err(Error::InvalidMoments(format!("gamma^2 = {g2} < beta = {}", self.beta)));
        }
        Ok(())
    }

    /// `alpha_minus + alpha_plus - 2 beta`, the per-triple variance factor.
    pub fn spread(&self) -> f64 {
        self.alpha_minus + self.alpha_plus - 2.0 * self.beta
    }
}

/// `((1/3)n³ - n² + (2/3)n)(α- + α+ - 2β) + (n² - n)γ`.
pub fn var_theoretical(m: &MomentSet, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    m.validate()?;
    Ok(assemble(m.spread(), m.gamma, n))
}

fn assemble(spread: f64, gamma: f64, n: usize) -> f64 {
    let n = n as f64;
    let cubic = n * (n - 1.0) * (n - 2.0) / 3.0;
    cubic * spread + n * (n - 1.0) * gamma
}

/// Symmetric-average estimates of `alpha±`, `beta`, `gamma` from `u`, `v`.
///
/// These are unbiased under the null hypothesis; they are exposed for
/// diagnostics, the variance estimator itself never goes through them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentEstimates {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n: usize,
}

impl ComponentEstimates {
    pub fn from_counts(uv: &UvCounts) -> Result<Self> {
        let n = uv.n();
        if n < 3 {
            return Err(Error::InsufficientData { needed: 3, got: n });
        }
        if uv.sum_u() != uv.sum_v() {
            return Err(Error::InconsistentCounts { sum_u: uv.sum_u(), sum_v: uv.sum_v() });
        }
        let triples = (n * (n - 1) * (n - 2)) as f64;
        let pairs = (n * (n - 1)) as f64;
        let mut ap = 0u64;
        let mut am = 0u64;
        let mut b = 0u64;
        for (&u, &v) in uv.u.iter().zip(&uv.v) {
            let (u, v) = (u as u64, v as u64);
            ap += u * u - u;
            am += v * v - v;
            b += u * v;
        }
        Ok(ComponentEstimates {
            alpha_plus: ap as f64 / triples,
            alpha_minus: am as f64 / triples,
            beta: b as f64 / triples,
            gamma: uv.sum_u() as f64 / pairs,
            n,
        })
    }

    /// The theoretical variance formula with the estimates plugged in.
    pub fn variance(&self) -> f64 {
        assemble(self.alpha_minus + self.alpha_plus - 2.0 * self.beta, self.gamma, self.n)
    }
}
