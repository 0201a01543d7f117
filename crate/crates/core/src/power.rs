//! Asymptotic power of the extended test under contiguous alternatives
//! `X_i = λ i n^{-3/2} + Z_i`.
//!
//! The standardised statistic is asymptotically `N(E_d, 1)` with
//! `E_d = λ g(d) / sqrt(3(α- + α+ - 2β))`, where `g` is the density of
//! `Z_1 - Z_2` and the moments are those of [`MomentSet`] for the error
//! density. Rejecting when `|T| >= z_{α/2}` gives the power
//! `Φ(-z_{α/2} + E_d) + Φ(-z_{α/2} - E_d)`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::density::{normal_density, ErrorDensity};
use crate::error::{Error, Result};
use crate::normal;
use crate::par;
use crate::quadrature::{integrate_piecewise, integrate_real_line, DEFAULT_TOL};
use crate::variance::MomentSet;

/// Below this the variance factor `α- + α+ - 2β` is treated as zero.
pub const DEGENERATE_SPREAD: f64 = 1e-14;

/// Density of `Z_1 - Z_2` at `z`: `g(z) = ∫ f(x + z) f(x) dx`.
pub fn diff_density(density: &ErrorDensity, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::InvalidInput("difference must be finite".into()));
    }
    density.validate()?;
    match density {
        ErrorDensity::Normal { sigma } => Ok(normal_density(z, sigma * SQRT_2)),
        ErrorDensity::Uniform { a, b } => {
            let w = b - a;
            Ok((w - z.abs()).max(0.0) / (w * w))
        }
        ErrorDensity::Tabulated(_) => {
            let (lo, hi) = density.support().expect("tabulated support is bounded");
            let breaks = clipped_breaks(density, &[0.0, -z], lo, hi);
            let g = integrate_piecewise(|x| density.pdf(x + z) * density.pdf(x), &breaks, DEFAULT_TOL)?;
            Ok(g.value.max(0.0))
        }
    }
}

/// Kinks of the density shifted by each offset, restricted to `[lo, hi]`.
fn clipped_breaks(density: &ErrorDensity, offsets: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let kinks = density.kinks();
    let mut out = vec![lo, hi];
    for &o in offsets {
        out.extend(kinks.iter().map(|k| k + o).filter(|x| *x > lo && *x < hi));
    }
    out
}

/// `α±`, `β`, `γ` for the error density at LRD `d >= 0`.
///
/// `α+ = ∫ f F(x-d)²`, `α- = ∫ f (1-F(x+d))²`, `β = ∫ f F(x-d)(1-F(x+d))`
/// and `γ = ∫ f F(x-d) = 1 - G(d)`.
pub fn moments(density: &ErrorDensity, d: f64) -> Result<MomentSet> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::InvalidInput(format!("LRD must be finite and >= 0, got {d}")));
    }
    density.validate()?;
    let m = match density {
        ErrorDensity::Normal { sigma } => {
            // scale-free: work with the standard normal and d / sigma
            let t = d / sigma;
            let ap = integrate_real_line(|x| normal::pdf(x) * sq(normal::cdf(x - t)), DEFAULT_TOL)?;
            let am = integrate_real_line(|x| normal::pdf(x) * sq(normal::sf(x + t)), DEFAULT_TOL)?;
            let b = integrate_real_line(
                |x| normal::pdf(x) * normal::cdf(x - t) * normal::sf(x + t),
                DEFAULT_TOL,
            )?;
            MomentSet {
                alpha_plus: ap.value,
                alpha_minus: am.value,
                beta: b.value,
                gamma: normal::sf(t / SQRT_2),
            }
        }
        _ => {
            let (lo, hi) = density.support().expect("bounded support");
            let breaks = clipped_breaks(density, &[0.0, d, -d], lo, hi);
            let f = |x: f64| density.pdf(x);
            let below = |x: f64| density.cdf(x - d);
            let above = |x: f64| density.sf(x + d);
            let ap = integrate_piecewise(|x| f(x) * sq(below(x)), &breaks, DEFAULT_TOL)?;
            let am = integrate_piecewise(|x| f(x) * sq(above(x)), &breaks, DEFAULT_TOL)?;
            let b = integrate_piecewise(|x| f(x) * below(x) * above(x), &breaks, DEFAULT_TOL)?;
            let gamma = match density {
                ErrorDensity::Uniform { a, b } => {
                    let w = b - a;
                    sq((w - d).max(0.0) / w) / 2.0
                }
                _ => integrate_piecewise(|x| f(x) * below(x), &breaks, DEFAULT_TOL)?.value,
            };
            MomentSet {
                alpha_plus: ap.value.max(0.0),
                alpha_minus: am.value.max(0.0),
                beta: b.value.max(0.0),
                gamma: gamma.max(0.0),
            }
        }
    };
    m.validate()?;
    Ok(m)
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Asymptotic mean of the standardised statistic, `λ g(d) / sqrt(3(α- + α+ - 2β))`.
///
/// Even in `d`. Returns [`Error::DegenerateRegime`] when every pair is tied
/// with probability one (e.g. a uniform error narrower than `d`).
pub fn expected_t(density: &ErrorDensity, lambda: f64, d: f64) -> Result<f64> {
    point(density, lambda, d, None)?.e_t.ok_or_else(|| degenerate(d))
}

fn degenerate(d: f64) -> Error {
    Error::DegenerateRegime(format!("all pairs are tied almost surely at d = {d}"))
}

/// One row of a power curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub d: f64,
    pub g_d: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `None` in the degenerate regime.
    pub e_t: Option<f64>,
    /// Asymptotic rejection probability; `None` in the degenerate regime.
    pub power: Option<f64>,
}

impl PowerPoint {
    pub fn is_degenerate(&self) -> bool {
        self.e_t.is_none()
    }
}

fn point(density: &ErrorDensity, lambda: f64, d: f64, z_crit: Option<f64>) -> Result<PowerPoint> {
    if !lambda.is_finite() {
        return Err(Error::InvalidInput("lambda must be finite".into()));
    }
    let m = moments(density, d.abs())?;
    let g = diff_density(density, d)?;
    let spread = m.spread();
    let e_t = (spread > DEGENERATE_SPREAD).then(|| lambda * g / (3.0 * spread).sqrt());
    let power = match (e_t, z_crit) {
        (Some(e), Some(z)) => Some(rejection_probability(e, z)),
        _ => None,
    };
    Ok(PowerPoint {
        d,
        g_d: g,
        alpha_plus: m.alpha_plus,
        alpha_minus: m.alpha_minus,
        beta: m.beta,
        gamma: m.gamma,
        e_t,
        power,
    })
}

/// `Φ(-z + e) + Φ(-z - e)`.
pub fn rejection_probability(e_t: f64, z_crit: f64) -> f64 {
    normal::sf(z_crit - e_t) + normal::cdf(-z_crit - e_t)
}

/// Evaluates the curve on a grid of `d >= 0` at two-sided level `alpha_level`.
pub fn power_curve(
    density: &ErrorDensity,
    lambda: f64,
    d_grid: &[f64],
    alpha_level: f64,
) -> Result<Vec<PowerPoint>> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must be in (0, 1), got {alpha_level}")));
    }
    if let Some(d) = d_grid.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidInput(format!("grid values must be finite and >= 0, got {d}")));
    }
    density.validate()?;
    let z = normal::quantile(1.0 - alpha_level / 2.0);
    par::map_slice(d_grid, |&d| point(density, lambda, d, Some(z))).into_iter().collect()
}

/// Grid of `start, start + step, ..., stop` (inclusive up to rounding).
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(Error::InvalidInput(format!("bad grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(Error::InvalidInput(format!("grid has {count} points")));
    }
    // each point from its index, rounded to 12 decimals to drop representation noise
    Ok((0..count).map(|k| round12(start + k as f64 * step)).collect())
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Location of the largest `E_d` on a computed curve.
pub fn argmax(curve: &[PowerPoint]) -> Option<&PowerPoint> {
    curve
        .iter()
        .filter(|p| p.e_t.is_some())
        .max_by(|a, b| a.e_t.unwrap().total_cmp(&b.e_t.unwrap()))
}

/// Second-derivative test at `d = 0`: the power increases for small `d > 0`
/// iff `∫f² · ∫f³ > (1/6) ∫f'²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerGainCondition {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub integral_f2: f64,
    pub integral_f3: f64,
    pub integral_fprime2: f64,
}

pub fn power_gain_condition(density: &ErrorDensity) -> Result<PowerGainCondition> {
    density.validate()?;
    let (f2, f3, fp2) = match density {
        ErrorDensity::Normal { .. } => {
            let f2 = integrate_real_line(|x| sq(density.pdf(x)), 1e-13)?.value;
            let f3 = integrate_real_line(|x| density.pdf(x).powi(3), 1e-13)?.value;
            let fp2 = integrate_real_line(
                |x| sq(density.pdf_derivative(x).expect("normal is differentiable")),
                1e-13,
            )?
            .value;
            (f2, f3, fp2)
        }
        ErrorDensity::Uniform { .. } => {
            return Err(Error::Unsupported(
                "the uniform density jumps at its endpoints; the condition needs a differentiable density"
                    .into(),
            ))
        }
        ErrorDensity::Tabulated(t) => {
            let pts = t.points();
            let peak = pts.iter().map(|p| p.1).fold(0.0, f64::max);
            let (first, last) = (pts[0].1, pts[pts.len() - 1].1);
            if first > 1e-12 * peak || last > 1e-12 * peak {
                return Err(Error::Unsupported(
                    "tabulated density must vanish at both ends of its grid".into(),
                ));
            }
            let knots: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let f2 = integrate_piecewise(|x| sq(density.pdf(x)), &knots, 1e-14)?.value;
            let f3 = integrate_piecewise(|x| density.pdf(x).powi(3), &knots, 1e-14)?.value;
            // slopes of the linear pieces: forward differences at grid spacing
            let fp2 = pts
                .windows(2)
                .map(|w| sq((w[1].1 - w[0].1) / (w[1].0 - w[0].0)) * (w[1].0 - w[0].0))
                .sum();
            (f2, f3, fp2)
        }
    };
    let lhs = f2 * f3;
    let rhs = fp2 / 6.0;
    Ok(PowerGainCondition {
        holds: lhs > rhs,
        lhs,
        rhs,
        integral_f2: f2,
        integral_f3: f3,
        integral_fprime2: fp2,
    })
}
