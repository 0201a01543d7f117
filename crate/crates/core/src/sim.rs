//! Monte Carlo power study for `Y_i = θ·i^p + ε_i`, `i = 1..n`.

use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{self, Sidedness, TestOptions};
use crate::lrd::{self, LrdRule};
use crate::par;
use crate::permutation;
use crate::rng::{stream_rng, SeedKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    /// Centred uniform on `[-sd·√3, sd·√3]`.
    Uniform,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Family::Normal),
            "uniform" => Ok(Family::Uniform),
            other => Err(Error::Config(format!("unknown distribution {other:?} (expected normal or uniform)"))),
        }
    }
}

/// How each replicate is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimMethod {
    #[default]
    Normal,
    Permutation { replicates: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub theta: f64,
    pub p: u32,
    pub n: usize,
    pub family: Family,
    pub error_sd: f64,
    /// LRDs as multiples of `error_sd`.
    pub d_ratios: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
    pub alpha: f64,
    #[serde(default)]
    pub method: SimMethod,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !self.theta.is_finite() {
            return bad(format!("theta must be finite, got {}", self.theta));
        }
        if self.p < 1 {
            return bad("p must be at least 1".into());
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.error_sd.is_finite() && self.error_sd > 0.0) {
            return bad(format!("error_sd must be positive, got {}", self.error_sd));
        }
        if let Some(r) = self.d_ratios.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return bad(format!("d ratios must be finite and >= 0, got {r}"));
        }
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if let SimMethod::Permutation { replicates: 0 } = self.method {
            return bad("permutation replicates must be at least 1".into());
        }
        Ok(())
    }

    fn cell_key(&self, d_ratio: f64) -> SeedKey {
        SeedKey::new(self.seed)
            .with(self.n as u64)
            .with_f64(self.error_sd)
            .with_str(self.family.name())
            .with_f64(self.theta)
            .with(self.p as u64)
            .with_f64(d_ratio)
    }

    /// One simulated series for replicate `index` of the cell.
    fn draw(&self, key: SeedKey, index: u64) -> Vec<f64> {
        let mut rng = stream_rng(key, index);
        let trend = |i: usize| self.theta * (i as f64).powi(self.p as i32);
        match self.family {
            Family::Normal => {
                let dist = Normal::new(0.0, self.error_sd).expect("validated sd");
                (1..=self.n).map(|i| trend(i) + dist.sample(&mut rng)).collect()
            }
            Family::Uniform => {
                let h = self.error_sd * 3f64.sqrt();
                let dist = Uniform::new(-h, h).expect("validated sd");
                (1..=self.n).map(|i| trend(i) + dist.sample(&mut rng)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub rejection_rate: f64,
    pub mean_pi_t: f64,
    /// `sqrt(r(1-r)/replicates)` for the rejection rate.
    pub mc_stderr: f64,
    pub replicates_used: u64,
}

/// Rejection rate and mean tie proportion for one `d_ratio`.
pub fn run_cell(scenario: &Scenario, d_ratio: f64) -> Result<CellResult> {
    scenario.validate()?;
    if !(d_ratio.is_finite() && d_ratio >= 0.0) {
        return Err(Error::InvalidInput(format!("d ratio must be finite and >= 0, got {d_ratio}")));
    }
    let rule = LrdRule::new(d_ratio * scenario.error_sd)?;
    let key = scenario.cell_key(d_ratio);
    let opts = TestOptions::default();
    let outcomes = par::map_range(scenario.replicates, |i| -> Result<(bool, f64)> {
        let y = scenario.draw(key, i);
        let (s, uv) = lrd::score_and_counts(&y, &rule);
        let pi_t = lrd::tie_fraction(&uv);
        let p = match scenario.method {
            SimMethod::Normal => inference::assemble(s, &uv, rule.d, Sidedness::TwoSided, &opts)?.p_value,
            SimMethod::Permutation { replicates } => {
                let scores = permutation::sampled_scores(&y, &rule, replicates, key.with_str("perm").with(i));
                let hits = scores.iter().filter(|x| x.abs() >= s.abs()).count();
                (1 + hits) as f64 / (replicates + 1) as f64
            }
        };
        Ok((p <= scenario.alpha, pi_t))
    });
    let mut rejections = 0u64;
    let mut pi_sum = 0.0;
    for o in outcomes {
        let (rej, pi_t) = o?;
        rejections += rej as u64;
        pi_sum += pi_t;
    }
    let r = scenario.replicates as f64;
    let rate = rejections as f64 / r;
    Ok(CellResult {
        rejection_rate: rate,
        mean_pi_t: pi_sum / r,
        mc_stderr: (rate * (1.0 - rate) / r).sqrt(),
        replicates_used: scenario.replicates,
    })
}

/// One row of a simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub distribution: Family,
    pub n: usize,
    pub theta: f64,
    pub p: u32,
    pub error_sd: f64,
    pub d_ratio: f64,
    pub d: f64,
    pub rejection_rate: f64,
    pub mean_pi_t: f64,
    pub mc_stderr: f64,
    pub replicates: u64,
}

/// Runs every `(scenario, d_ratio)` cell, in input order.
pub fn run_grid(scenarios: &[Scenario]) -> Result<Vec<GridRow>> {
    let mut rows = Vec::new();
    for sc in scenarios {
        for &ratio in &sc.d_ratios {
            let cell = run_cell(sc, ratio)?;
            rows.push(GridRow {
                distribution: sc.family,
                n: sc.n,
                theta: sc.theta,
                p: sc.p,
                error_sd: sc.error_sd,
                d_ratio: ratio,
                d: ratio * sc.error_sd,
                rejection_rate: cell.rejection_rate,
                mean_pi_t: cell.mean_pi_t,
                mc_stderr: cell.mc_stderr,
                replicates: cell.replicates_used,
            });
        }
    }
    Ok(rows)
}

/// The published study design: normal and uniform errors, `n ∈ {20, 30}`,
/// `sd_root ∈ {10, 15, 20}` with error SD `sd_root^p`, and
/// `d/sd ∈ {0, 0.5, 1, 1.5, 2}` under `θ = 0` and `θ = 1, p ∈ {1, 2}`.
pub fn reference_grid(replicates: u64, seed: u64) -> Vec<Scenario> {
    let mut out = Vec::new();
    for family in [Family::Normal, Family::Uniform] {
        for n in [20, 30] {
            for (theta, p) in [(0.0, 1), (1.0, 1), (1.0, 2)] {
                for sd_root in [10.0f64, 15.0, 20.0] {
                    out.push(Scenario {
                        theta,
                        p,
                        n,
                        family,
                        error_sd: sd_root.powi(p as i32),
                        d_ratios: vec![0.0, 0.5, 1.0, 1.5, 2.0],
                        replicates,
                        seed,
                        alpha: 0.05,
                        method: SimMethod::Normal,
                    });
                }
            }
        }
    }
    out
}
