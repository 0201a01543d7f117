//! Error densities used by the power analysis and the simulator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Normalisation tolerance for tabulated densities.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Density of the measurement error `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorDensity {
    Normal { sigma: f64 },
    Uniform { a: f64, b: f64 },
    Tabulated(TabulatedDensity),
}

impl ErrorDensity {
    pub fn normal(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidInput(format!("normal sigma must be > 0, got {sigma}")));
        }
        Ok(ErrorDensity::Normal { sigma })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!("uniform needs a < b, got [{a}, {b}]")));
        }
        Ok(ErrorDensity::Uniform { a, b })
    }

    /// Zero-mean uniform with the given standard deviation: `[-sd√3, sd√3]`.
    pub fn uniform_with_sd(sd: f64) -> Result<Self> {
        let half = sd * 3f64.sqrt();
        ErrorDensity::uniform(-half, half)
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        Ok(ErrorDensity::Tabulated(TabulatedDensity::new(points)?))
    }

    /// Re-checks the invariants (useful after deserialisation).
    pub fn validate(&self) -> Result<()> {
        match self {
            ErrorDensity::Normal { sigma } => ErrorDensity::normal(*sigma).map(|_| ()),
            ErrorDensity::Uniform { a, b } => ErrorDensity::uniform(*a, *b).map(|_| ()),
            ErrorDensity::Tabulated(t) => TabulatedDensity::new(t.points.clone()).map(|_| ()),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            ErrorDensity::Normal { sigma } => normal::pdf(x / sigma) / sigma,
            ErrorDensity::Uniform { a, b } => {
                if x >= *a && x <= *b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            ErrorDensity::Tabulated(t) => t.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ErrorDensity::Normal { sigma } => normal::cdf(x / sigma),
            ErrorDensity::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            ErrorDensity::Tabulated(t) => t.cdf(x),
        }
    }

    /// Upper tail `1 - F(x)`, computed without cancellation where possible.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            ErrorDensity::Normal { sigma } => normal::sf(x / sigma),
            ErrorDensity::Uniform { a, b } => ((b - x) / (b - a)).clamp(0.0, 1.0),
            ErrorDensity::Tabulated(t) => (1.0 - t.cdf(x)).max(0.0),
        }
    }

    /// Derivative of the density, where one exists.
    pub fn pdf_derivative(&self, x: f64) -> Result<f64> {
        match self {
            ErrorDensity::Normal { sigma } => Ok(-x / (sigma * sigma) * self.pdf(x)),
            ErrorDensity::Uniform { .. } => {
                Err(Error::Unsupported("the uniform density is not differentiable".into()))
            }
            ErrorDensity::Tabulated(t) => Ok(t.slope_at(x)),
        }
    }

    /// Closed interval carrying all the mass, `None` for unbounded support.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            ErrorDensity::Normal { .. } => None,
            ErrorDensity::Uniform { a, b } => Some((*a, *b)),
            ErrorDensity::Tabulated(t) => Some(t.range()),
        }
    }

    /// Points where the density is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            ErrorDensity::Normal { .. } => Vec::new(),
            ErrorDensity::Uniform { a, b } => vec![*a, *b],
            ErrorDensity::Tabulated(t) => t.points.iter().map(|p| p.0).collect(),
        }
    }

    /// Standard deviation of the error.
    pub fn sd(&self) -> f64 {
        match self {
            ErrorDensity::Normal { sigma } => *sigma,
            ErrorDensity::Uniform { a, b } => (b - a) / 12f64.sqrt(),
            ErrorDensity::Tabulated(t) => t.sd(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ErrorDensity::Normal { sigma } => format!("normal:{sigma}"),
            ErrorDensity::Uniform { a, b } => format!("uniform:{a}:{b}"),
            ErrorDensity::Tabulated(t) => format!("tabulated[{}]", t.points.len()),
        }
    }
}

/// Piecewise-linear density through `(x, f(x))` knots, zero outside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct TabulatedDensity {
    points: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    points: Vec<(f64, f64)>,
}

impl TryFrom<RawTable> for TabulatedDensity {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        TabulatedDensity::new(raw.points)
    }
}

impl From<TabulatedDensity> for RawTable {
    fn from(t: TabulatedDensity) -> Self {
        RawTable { points: t.points }
    }
}

impl TabulatedDensity {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("a tabulated density needs at least 2 points".into()));
        }
        for (i, &(x, f)) in points.iter().enumerate() {
            if !x.is_finite() || !f.is_finite() {
                return Err(Error::InvalidInput(format!("tabulated point #{} is not finite", i + 1)));
            }
            if f < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "tabulated density is negative at x = {x}"
                )));
            }
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput("tabulated x values must be strictly increasing".into()));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidInput(format!(
                "tabulated density integrates to {acc}, not 1 (tolerance {NORMALIZATION_TOL:e})"
            )));
        }
        Ok(TabulatedDensity { points, cumulative })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Index `k` with `x_k <= x < x_{k+1}`, or `None` outside the grid.
    fn segment(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let k = self.points.partition_point(|p| p.0 <= x);
        Some(k.saturating_sub(1).min(self.points.len() - 2))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(k) => {
                let (x0, f0) = self.points[k];
                let (x1, f1) = self.points[k + 1];
                f0 + (f1 - f0) * (x - x0) / (x1 - x0)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.range();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return self.total_mass();
        }
        let k = self.segment(x).expect("inside range");
        let (x0, f0) = self.points[k];
        let t = x - x0;
        self.cumulative[k] + 0.5 * (f0 + self.pdf(x)) * t
    }

    fn total_mass(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Finite-difference derivative: the slope of the linear piece holding
    /// `x`, i.e. a difference quotient with the grid spacing as step.
    pub fn slope_at(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(k) => {
                let (x0, f0) = self.points[k];
                let (x1, f1) = self.points[k + 1];
                (f1 - f0) / (x1 - x0)
            }
        }
    }

    fn sd(&self) -> f64 {
        // piecewise-linear moments integrated exactly per segment
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for w in self.points.windows(2) {
            let (x0, f0) = w[0];
            let (x1, f1) = w[1];
            let h = x1 - x0;
            // ∫ x f and ∫ x² f for linear f on [x0, x1], via 3-point Gauss
            for (t, wt) in GAUSS3 {
                let x = x0 + h * t;
                let f = f0 + (f1 - f0) * t;
                m1 += wt * h * x * f;
                m2 += wt * h * x * x * f;
            }
        }
        (m2 - m1 * m1).max(0.0).sqrt()
    }
}

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Density of `N(0, s²)` at `x`, used for the difference of two normals.
pub(crate) fn normal_density(x: f64, s: f64) -> f64 {
    (-(x * x) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
}
