//! Input tables, simulation configs and report rendering.
//!
//! CSV input is comma separated UTF-8 with a mandatory header and `.` as the
//! decimal separator. Three layouts are recognised by their header:
//! `time,value`, `region,time,value` and `region,season,time,value`.
//! An empty value cell marks a missing observation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::density::ErrorDensity;
use crate::error::{Error, Result};
use crate::inference::{Sidedness, TrendTestResult, Warning};
use crate::lrd::Series;
use crate::permutation::PermutationResult;
use crate::power::{self, PowerPoint};
use crate::regional::{RegionalDataset, RegionalResult};
use crate::sim::{Family, GridRow, Scenario, SimMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Single,
    Regional,
    Seasonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// 1-based line in the source text.
    pub line: usize,
    pub region: Option<String>,
    pub season: Option<String>,
    pub time: f64,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTable {
    pub layout: Layout,
    pub rows: Vec<Row>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn number(cell: &str, what: &str, line: usize) -> Result<f64> {
    let x: f64 = cell.parse().map_err(|_| parse_err(line, format!("{what} {cell:?} is not a number")))?;
    if !x.is_finite() {
        return Err(parse_err(line, format!("{what} {cell:?} is not finite")));
    }
    Ok(x)
}

pub fn parse_table(text: &str) -> Result<InputTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let layout = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["time", "value"] => Layout::Single,
        ["region", "time", "value"] => Layout::Regional,
        ["region", "season", "time", "value"] => Layout::Seasonal,
        [] | [""] => return Err(parse_err(1, "missing header")),
        other => {
            return Err(parse_err(
                1,
                format!(
                    "unrecognised header {:?}; expected time,value or region,time,value or region,season,time,value",
                    other.join(",")
                ),
            ))
        }
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |k: usize| rec.get(k).unwrap_or("");
        let label = |k: usize, what: &str| -> Result<String> {
            let s = cell(k);
            if s.is_empty() {
                return Err(parse_err(line, format!("empty {what}")));
            }
            Ok(s.to_string())
        };
        let (region, season, rest) = match layout {
            Layout::Single => (None, None, 0),
            Layout::Regional => (Some(label(0, "region")?), None, 1),
            Layout::Seasonal => (Some(label(0, "region")?), Some(label(1, "season")?), 2),
        };
        let time = number(cell(rest), "time", line)?;
        let value = match cell(rest + 1) {
            "" => None,
            v => Some(number(v, "value", line)?),
        };
        rows.push(Row { line, region, season, time, value });
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Ok(InputTable { layout, rows })
}

impl InputTable {
    /// The rows as one series, sorted by time.
    pub fn to_series(&self) -> Result<Series> {
        if self.layout != Layout::Single {
            return Err(Error::Config("expected a time,value table for a single-series test".into()));
        }
        let mut rows: Vec<&Row> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.time.total_cmp(&b.time));
        if let Some(w) = rows.windows(2).find(|w| w[0].time == w[1].time) {
            return Err(parse_err(w[1].line, format!("duplicate time {}", w[1].time)));
        }
        if let Some(r) = rows.iter().find(|r| r.value.is_none()) {
            return Err(Error::InvalidInput(format!(
                "missing value at time {} (line {}); a single-series test needs complete data",
                r.time, r.line
            )));
        }
        Series::new(rows.iter().map(|r| r.time).collect(), rows.iter().map(|r| r.value.unwrap()).collect())
    }

    /// Groups keyed by region (or `region/season`) on the union time grid.
    /// A group without a row for some time point has a missing value there.
    pub fn to_regional(&self) -> Result<RegionalDataset> {
        let key = |r: &Row| -> String {
            match (&r.region, &r.season) {
                (Some(g), Some(s)) => format!("{g}/{s}"),
                (Some(g), None) => g.clone(),
                _ => "series".to_string(),
            }
        };
        let grid: BTreeSet<u64> = self.rows.iter().map(|r| order_key(r.time)).collect();
        let times: Vec<f64> = grid.iter().map(|&k| from_order_key(k)).collect();
        let index: BTreeMap<u64, usize> = grid.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let mut groups: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        let mut seen: BTreeSet<(String, u64)> = BTreeSet::new();
        for r in &self.rows {
            let k = key(r);
            let t = order_key(r.time);
            if !seen.insert((k.clone(), t)) {
                return Err(parse_err(r.line, format!("duplicate time {} for group {k:?}", r.time)));
            }
            groups.entry(k).or_insert_with(|| vec![None; times.len()])[index[&t]] = r.value;
        }
        RegionalDataset::new(times, groups)
    }
}

// total order on finite floats as an integer key
fn order_key(x: f64) -> u64 {
    let x = if x == 0.0 { 0.0 } else { x };
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_order_key(k: u64) -> f64 {
    f64::from_bits(if k >> 63 == 1 { k & !(1 << 63) } else { !k })
}

/// Parses `normal:SIGMA`, `uniform:A:B` or `file:PATH` (a CSV with an
/// `x,f` header, piecewise-linear between points).
pub fn parse_density_spec(spec: &str) -> Result<ErrorDensity> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let nums = |s: &str| -> Result<Vec<f64>> {
        s.split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {p:?} in density {spec:?}"))))
            .collect()
    };
    match kind {
        "normal" => match nums(rest)?.as_slice() {
            [s] => ErrorDensity::normal(*s),
            _ => Err(Error::Config(format!("expected normal:SIGMA, got {spec:?}"))),
        },
        "uniform" => match nums(rest)?.as_slice() {
            [a, b] => ErrorDensity::uniform(*a, *b),
            _ => Err(Error::Config(format!("expected uniform:A:B, got {spec:?}"))),
        },
        "file" => {
            let text = std::fs::read_to_string(rest).map_err(|e| Error::Config(format!("cannot read {rest:?}: {e}")))?;
            parse_density_table(&text)
        }
        _ => Err(Error::Config(format!("unknown density {spec:?}; use normal:S, uniform:A:B or file:PATH"))),
    }
}

/// Tabulated density from `x,f` CSV text.
pub fn parse_density_table(text: &str) -> Result<ErrorDensity> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 2 {
            return Err(parse_err(line, "expected two columns x,f"));
        }
        points.push((number(&rec[0], "x", line)?, number(&rec[1], "f", line)?));
    }
    ErrorDensity::tabulated(points)
}

/// Parses `START:STOP:STEP`.
pub fn parse_d_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(Error::Config(format!("expected START:STOP:STEP, got {spec:?}")));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {s:?} in grid {spec:?}")));
    power::linear_grid(num(a)?, num(b)?, num(c)?)
}

/// Command-line overrides applied on top of a simulation config.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConfigOverrides {
    pub replicates: Option<u64>,
    pub seed: Option<u64>,
}

const TOP_KEYS: [&str; 6] = ["replicates", "seed", "alpha", "method", "permutations", "scenario"];
const SCENARIO_KEYS: [&str; 10] =
    ["distribution", "n", "theta", "p", "sd_root", "error_sd", "d_ratios", "replicates", "seed", "alpha"];

/// Expands a simulation config into scenarios.
///
/// ```toml
/// replicates = 10000      # default 10000
/// seed = 1                # default 0
/// alpha = 0.05            # default 0.05
/// method = "normal"       # or "permutation", with `permutations = R`
///
/// [[scenario]]
/// distribution = ["normal", "uniform"]
/// n = [20, 30]
/// theta = 1
/// p = [1, 2]
/// sd_root = [10, 15, 20]  # error sd = sd_root^p; or give error_sd directly
/// d_ratios = [0, 0.5, 1]
/// ```
///
/// Every list-valued field other than `d_ratios` is expanded as a cartesian
/// product, in the order distribution, n, theta, p, sd.
pub fn parse_sim_config(text: &str, overrides: ConfigOverrides) -> Result<Vec<Scenario>> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    check_keys(&table, &TOP_KEYS, "top level")?;
    let replicates = match overrides.replicates {
        Some(r) => r,
        None => opt_uint(&table, "replicates")?.unwrap_or(10_000),
    };
    let seed = match overrides.seed {
        Some(s) => s,
        None => opt_uint(&table, "seed")?.unwrap_or(0),
    };
    let alpha = opt_float(&table, "alpha")?.unwrap_or(0.05);
    let method = match table.get("method").map(|v| v.as_str()) {
        None | Some(Some("normal")) => SimMethod::Normal,
        Some(Some("permutation")) => {
            SimMethod::Permutation { replicates: opt_uint(&table, "permutations")?.unwrap_or(999) }
        }
        Some(_) => return Err(Error::Config("method must be \"normal\" or \"permutation\"".into())),
    };
    let blocks = match table.get("scenario") {
        None => return Ok(Vec::new()),
        Some(toml::Value::Array(a)) => a,
        Some(_) => return Err(Error::Config("`scenario` must be an array of tables ([[scenario]])".into())),
    };
    let mut out = Vec::new();
    for (k, block) in blocks.iter().enumerate() {
        let where_ = format!("scenario {}", k + 1);
        let t = block.as_table().ok_or_else(|| Error::Config(format!("{where_} is not a table")))?;
        check_keys(t, &SCENARIO_KEYS, &where_)?;
        let families = strings(t, "distribution", &where_)?
            .iter()
            .map(|s| s.parse::<Family>())
            .collect::<Result<Vec<_>>>()?;
        let ns = uints(t, "n", &where_)?;
        let thetas = floats(t, "theta", &where_)?;
        let ps = uints(t, "p", &where_)?;
        let d_ratios = floats(t, "d_ratios", &where_)?;
        let (sds, rooted) = match (t.contains_key("sd_root"), t.contains_key("error_sd")) {
            (true, false) => (floats(t, "sd_root", &where_)?, true),
            (false, true) => (floats(t, "error_sd", &where_)?, false),
            _ => return Err(Error::Config(format!("{where_}: give exactly one of sd_root or error_sd"))),
        };
        let reps = match overrides.replicates {
            Some(r) => r,
            None => opt_uint(t, "replicates")?.unwrap_or(replicates),
        };
        let sc_seed = match overrides.seed {
            Some(s) => s,
            None => opt_uint(t, "seed")?.unwrap_or(seed),
        };
        let sc_alpha = opt_float(t, "alpha")?.unwrap_or(alpha);
        for &family in &families {
            for &n in &ns {
                for &theta in &thetas {
                    for &p in &ps {
                        for &sd in &sds {
                            let p = u32::try_from(p).map_err(|_| Error::Config(format!("{where_}: p too large")))?;
                            let sc = Scenario {
                                theta,
                                p,
                                n: n as usize,
                                family,
                                error_sd: if rooted { sd.powi(p as i32) } else { sd },
                                d_ratios: d_ratios.clone(),
                                replicates: reps,
                                seed: sc_seed,
                                alpha: sc_alpha,
                                method,
                            };
                            sc.validate().map_err(|e| Error::Config(format!("{where_}: {e}")))?;
                            out.push(sc);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_keys(t: &toml::Table, allowed: &[&str], where_: &str) -> Result<()> {
    match t.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Config(format!("{where_}: unknown key {k:?} (allowed: {})", allowed.join(", ")))),
        None => Ok(()),
    }
}

fn list<'a>(t: &'a toml::Table, key: &str, where_: &str) -> Result<Vec<&'a toml::Value>> {
    match t.get(key) {
        None => Err(Error::Config(format!("{where_}: missing key {key:?}"))),
        Some(toml::Value::Array(a)) if a.is_empty() => Err(Error::Config(format!("{where_}: {key:?} is empty"))),
        Some(toml::Value::Array(a)) => Ok(a.iter().collect()),
        Some(v) => Ok(vec![v]),
    }
}

fn as_float(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn floats(t: &toml::Table, key: &str, where_: &str) -> Result<Vec<f64>> {
    list(t, key, where_)?
        .into_iter()
        .map(|v| as_float(v).ok_or_else(|| Error::Config(format!("{where_}: {key:?} must be numeric, got {v}"))))
        .collect()
}

fn uints(t: &toml::Table, key: &str, where_: &str) -> Result<Vec<u64>> {
    list(t, key, where_)?
        .into_iter()
        .map(|v| match v {
            toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            _ => Err(Error::Config(format!("{where_}: {key:?} must be a non-negative integer, got {v}"))),
        })
        .collect()
}

fn strings(t: &toml::Table, key: &str, where_: &str) -> Result<Vec<String>> {
    list(t, key, where_)?
        .into_iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Config(format!("{where_}: {key:?} must be a string, got {v}")))
        })
        .collect()
}

fn opt_uint(t: &toml::Table, key: &str) -> Result<Option<u64>> {
    match t.get(key) {
        None => Ok(None),
        Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
        Some(v) => Err(Error::Config(format!("{key:?} must be a non-negative integer, got {v}"))),
    }
}

fn opt_float(t: &toml::Table, key: &str) -> Result<Option<f64>> {
    match t.get(key) {
        None => Ok(None),
        Some(v) => as_float(v).map(Some).ok_or_else(|| Error::Config(format!("{key:?} must be numeric, got {v}"))),
    }
}

/// Single-series report: the analytic result, the permutation result, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub n: usize,
    pub d: f64,
    pub analytic: Option<TrendTestResult>,
    pub permutation: Option<PermutationResult>,
}

/// Regional report: the analytic result, the within-group permutation
/// result, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalReport {
    pub analytic: Option<RegionalResult>,
    pub permutation: Option<PermutationResult>,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))
}

/// Four significant digits for human-readable tables.
pub fn sig4(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn side_name(s: Sidedness) -> &'static str {
    match s {
        Sidedness::TwoSided => "two-sided",
        Sidedness::Greater => "greater",
        Sidedness::Less => "less",
    }
}

fn warning_lines(out: &mut String, warnings: &[Warning]) {
    if warnings.is_empty() {
        out.push_str("warnings: none\n");
    } else {
        out.push_str("warnings:\n");
        for w in warnings {
            let name = serde_json::to_value(w).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            let _ = writeln!(out, "  {name}: {}", w.describe());
        }
    }
}

pub fn render_test_text(r: &TestReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Mann-Kendall test with LRD");
    let _ = writeln!(out, "  n          {}", r.n);
    let _ = writeln!(out, "  d          {}", sig4(r.d));
    if let Some(a) = &r.analytic {
        let _ = writeln!(out, "  S_ex       {}", a.s_ex);
        let _ = writeln!(out, "  variance   {:.2}", a.variance);
        let _ = writeln!(out, "  z          {}", sig4(a.z));
        let _ = writeln!(out, "  p-value    {} ({})", sig4(a.p_value), side_name(a.sidedness));
        let _ = writeln!(out, "  tau_a      {}", sig4(a.tau_a));
        let _ = writeln!(out, "  tau_b      {}", a.tau_b.map(sig4).unwrap_or_else(|| "undefined".into()));
        let _ = writeln!(out, "  pi_t       {}", sig4(a.pi_t));
    }
    if let Some(p) = &r.permutation {
        if r.analytic.is_none() {
            let _ = writeln!(out, "  S_ex       {}", p.s_obs);
        }
        let kind = if p.exhaustive { "exact, all orderings" } else { "sampled" };
        let _ = writeln!(out, "  perm p     {} ({}, {kind}, {} permutations)", sig4(p.p_value), side_name(p.sidedness), p.replicates);
        if let Some(se) = p.mc_stderr {
            let _ = writeln!(out, "  perm se    {}", sig4(se));
        }
        let _ = writeln!(
            out,
            "  null S     mean {}, var {:.2}, range [{}, {}]",
            sig4(p.null.mean),
            p.null.variance,
            p.null.min,
            p.null.max
        );
    }
    warning_lines(&mut out, r.analytic.as_ref().map(|a| a.warnings.as_slice()).unwrap_or(&[]));
    out
}

pub fn render_regional_text(r: &RegionalResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Regional Mann-Kendall test with LRD");
    let _ = writeln!(out, "  groups     {} x {} periods", r.groups_used, r.periods);
    let _ = writeln!(out, "  S_r        {}", r.s_r);
    let _ = writeln!(out, "  variance   {:.2}", r.variance);
    let _ = writeln!(out, "  z_r        {}", sig4(r.z_r));
    let _ = writeln!(out, "  p-value    {} ({})", sig4(r.p_value), side_name(r.sidedness));
    let _ = writeln!(out, "  pi_t       {}", sig4(r.pi_t));
    let width = r.per_group.keys().map(|k| k.chars().count()).max().unwrap_or(5).max(5);
    let _ = writeln!(out);
    let _ = writeln!(out, "  {:<width$}  {:>8}  {:>5}  {:>9}  {:>8}  {:>8}", "group", "d", "S", "variance", "p", "pi_t");
    for (label, g) in &r.per_group {
        let _ = writeln!(
            out,
            "  {:<width$}  {:>8}  {:>5}  {:>9.2}  {:>8}  {:>8}",
            label,
            sig4(g.d),
            g.s_ex,
            g.variance,
            sig4(g.p_value),
            sig4(g.pi_t)
        );
    }
    if !r.excluded_groups.is_empty() {
        let _ = writeln!(out, "\nexcluded (missing values): {}", r.excluded_groups.join(", "));
    }
    warning_lines(&mut out, &r.warnings);
    out
}

pub fn render_permutation_text(p: &PermutationResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Permutation test");
    let _ = writeln!(out, "  S_obs      {}", p.s_obs);
    let _ = writeln!(out, "  p-value    {} ({})", sig4(p.p_value), side_name(p.sidedness));
    let _ = writeln!(out, "  replicates {}{}", p.replicates, if p.exhaustive { " (exhaustive)" } else { "" });
    if let Some(se) = p.mc_stderr {
        let _ = writeln!(out, "  mc se      {}", sig4(se));
    }
    let _ = writeln!(out, "  null S     mean {}, var {:.2}, range [{}, {}]", sig4(p.null.mean), p.null.variance, p.null.min, p.null.max);
    out
}

fn opt4(x: Option<f64>) -> String {
    x.map(sig4).unwrap_or_else(|| "degenerate".into())
}

pub fn render_power_text(curve: &[PowerPoint]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>8}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}",
        "d", "g(d)", "alpha+", "alpha-", "beta", "gamma", "E_t", "power"
    );
    for p in curve {
        let _ = writeln!(
            out,
            "{:>8}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}",
            sig4(p.d),
            sig4(p.g_d),
            sig4(p.alpha_plus),
            sig4(p.alpha_minus),
            sig4(p.beta),
            sig4(p.gamma),
            opt4(p.e_t),
            opt4(p.power)
        );
    }
    if let Some(best) = power::argmax(curve) {
        let _ = writeln!(out, "\nmaximum E_t = {} at d = {}", sig4(best.e_t.unwrap_or(0.0)), sig4(best.d));
    }
    if curve.iter().any(PowerPoint::is_degenerate) {
        let _ = writeln!(out, "degenerate rows: every pair is tied almost surely");
    }
    out
}

pub fn render_grid_text(rows: &[GridRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8}  {:>4}  {:>5}  {:>2}  {:>8}  {:>7}  {:>8}  {:>9}  {:>8}  {:>8}",
        "dist", "n", "theta", "p", "error_sd", "d/sd", "d", "reject", "pi_t", "mc_se"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<8}  {:>4}  {:>5}  {:>2}  {:>8}  {:>7}  {:>8}  {:>9}  {:>8}  {:>8}",
            r.distribution.name(),
            r.n,
            sig4(r.theta),
            r.p,
            sig4(r.error_sd),
            sig4(r.d_ratio),
            sig4(r.d),
            sig4(r.rejection_rate),
            sig4(r.mean_pi_t),
            sig4(r.mc_stderr)
        );
    }
    out
}

fn write_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Numerical(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

fn read_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|rec| {
            rec.map_err(|e| parse_err(e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string()))
        })
        .collect()
}

/// Grid as CSV with columns `distribution,n,theta,p,error_sd,d_ratio,d,
/// rejection_rate,mean_pi_t,mc_stderr,replicates`.
pub fn grid_to_csv(rows: &[GridRow]) -> Result<String> {
    if rows.is_empty() {
        return Ok("distribution,n,theta,p,error_sd,d_ratio,d,rejection_rate,mean_pi_t,mc_stderr,replicates\n".into());
    }
    write_csv(rows)
}

pub fn grid_from_csv(text: &str) -> Result<Vec<GridRow>> {
    read_csv(text)
}

/// Power curve as CSV with columns `d,g_d,alpha_plus,alpha_minus,beta,gamma,
/// e_t,power`; degenerate rows leave the last two empty.
pub fn power_to_csv(curve: &[PowerPoint]) -> Result<String> {
    if curve.is_empty() {
        return Ok("d,g_d,alpha_plus,alpha_minus,beta,gamma,e_t,power\n".into());
    }
    write_csv(curve)
}

pub fn power_from_csv(text: &str) -> Result<Vec<PowerPoint>> {
    read_csv(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layouts() {
        let t = parse_table("time,value\n1,2.5\n2,\n3,4\n").unwrap();
        assert_eq!(t.layout, Layout::Single);
        assert_eq!(t.rows[1].value, None);
        assert_eq!(t.rows[2].line, 4);
        let t = parse_table("Region, Season, Time, Value\na,winter,2000,1\n").unwrap();
        assert_eq!(t.layout, Layout::Seasonal);
        assert_eq!(t.rows[0].season.as_deref(), Some("winter"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_table("time,value\n1,2\n2,abc\n") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_table("t,v\n1,2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_table("time,value\n1,2,3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_table("time,value\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn series_from_table() {
        let t = parse_table(crate::DBP_CSV).unwrap();
        let s = t.to_series().unwrap();
        assert_eq!(s.len(), 10);
        assert_eq!(s.values()[0], 90.9);
        let unsorted = parse_table("time,value\n3,1\n1,2\n2,3\n").unwrap().to_series().unwrap();
        assert_eq!(unsorted.values(), &[2.0, 3.0, 1.0]);
        assert!(matches!(parse_table("time,value\n1,1\n2,\n").unwrap().to_series(), Err(Error::InvalidInput(_))));
        assert!(parse_table("time,value\n1,1\n1,2\n").unwrap().to_series().is_err());
    }

    #[test]
    fn regional_from_table() {
        let text = "region,time,value\na,1,1\na,2,2\nb,1,3\nb,3,4\na,3,5\n";
        let d = parse_table(text).unwrap().to_regional().unwrap();
        assert_eq!(d.times(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.groups()["b"], vec![Some(3.0), None, Some(4.0)]);
        let dup = "region,time,value\na,1,1\na,1,2\n";
        assert!(matches!(parse_table(dup).unwrap().to_regional(), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn fixture_matches_published_table() {
        let d = parse_table(crate::PLATELETS_CSV).unwrap().to_regional().unwrap();
        assert_eq!(d.groups().len(), 19);
        let row = |k: &str| d.groups()[k].iter().map(|v| v.unwrap()).collect::<Vec<_>>();
        assert_eq!(row("Belgium"), vec![4.65, 4.57, 4.87, 5.82, 6.98]);
        assert_eq!(row("Greece"), vec![11.67, 12.88, 12.63, 15.85, 14.95]);
        assert_eq!(row("Bulgaria"), vec![1.38, 2.02, 2.16, 0.71, 0.70]);
    }

    #[test]
    fn density_specs() {
        assert_eq!(parse_density_spec("normal:2").unwrap(), ErrorDensity::Normal { sigma: 2.0 });
        assert_eq!(parse_density_spec("uniform:0:1").unwrap(), ErrorDensity::Uniform { a: 0.0, b: 1.0 });
        assert!(matches!(parse_density_spec("cauchy:1"), Err(Error::Config(_))));
        assert!(matches!(parse_density_spec("normal:x"), Err(Error::Config(_))));
        assert!(parse_density_spec("normal:-1").is_err());
        let tri = parse_density_table("x,f\n-1,0\n0,1\n1,0\n").unwrap();
        assert!((tri.cdf(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn d_grid() {
        let g = parse_d_grid("0:3:0.01").unwrap();
        assert_eq!(g.len(), 301);
        assert_eq!(g[134], 1.34);
        assert!(parse_d_grid("0:3").is_err());
        assert!(parse_d_grid("0:3:0").is_err());
    }

    #[test]
    fn paper_config_expands() {
        let text = include_str!("../../../data/reference_grid.toml");
        let sc = parse_sim_config(text, ConfigOverrides::default()).unwrap();
        assert_eq!(sc.len(), 36);
        assert_eq!(sc.iter().map(|s| s.d_ratios.len()).sum::<usize>(), 180);
        assert!(sc.iter().all(|s| s.replicates == 10_000 && s.seed == 20_190_501));
        assert!(sc.iter().any(|s| s.p == 2 && s.error_sd == 225.0));
        let sc = parse_sim_config(text, ConfigOverrides { replicates: Some(50), seed: Some(3) }).unwrap();
        assert!(sc.iter().all(|s| s.replicates == 50 && s.seed == 3));
    }

    #[test]
    fn config_errors() {
        let base = "[[scenario]]\nn = 10\ntheta = 0\np = 1\nerror_sd = 1\nd_ratios = [0]\n";
        assert!(parse_sim_config(&format!("{base}distribution = \"normal\"\n"), Default::default()).is_ok());
        let bad = parse_sim_config(&format!("{base}distribution = \"cauchy\"\n"), Default::default());
        assert!(matches!(bad, Err(Error::Config(m)) if m.contains("cauchy")));
        let bad = parse_sim_config(&format!("{base}distribution = \"normal\"\ncolour = 1\n"), Default::default());
        assert!(matches!(bad, Err(Error::Config(_))));
        let bad = parse_sim_config(&format!("{base}distribution = \"normal\"\nsd_root = 1\n"), Default::default());
        assert!(matches!(bad, Err(Error::Config(_))));
        assert!(matches!(parse_sim_config("x = [", Default::default()), Err(Error::Config(_))));
        assert!(parse_sim_config("", Default::default()).unwrap().is_empty());
    }

    #[test]
    fn sig4_format() {
        assert_eq!(sig4(0.024391), "0.02439");
        assert_eq!(sig4(2.25139), "2.251");
        assert_eq!(sig4(313.6667), "313.7");
        assert_eq!(sig4(1.0), "1.000");
        assert_eq!(sig4(f64::INFINITY), "inf");
        assert_eq!(sig4(-0.8), "-0.8000");
    }

    #[test]
    fn text_and_json_agree() {
        let s = parse_table(crate::DBP_CSV).unwrap().to_series().unwrap();
        let a = crate::inference::run_test(&s, &crate::LrdRule::new(0.6).unwrap(), Sidedness::TwoSided, &Default::default()).unwrap();
        let report = TestReport { n: 10, d: 0.6, analytic: Some(a.clone()), permutation: None };
        let text = render_test_text(&report);
        assert!(text.contains("S_ex       14"));
        assert!(text.contains(&format!("{:.2}", a.variance)));
        assert!(text.contains(&sig4(a.p_value)));
        let back: TestReport = from_json(&to_json(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn power_csv_round_trip() {
        let curve = power::power_curve(&ErrorDensity::uniform(0.0, 1.0).unwrap(), 1.0, &[0.0, 0.5, 1.0, 1.5], 0.05).unwrap();
        assert!(curve[3].is_degenerate());
        let back = power_from_csv(&power_to_csv(&curve).unwrap()).unwrap();
        assert_eq!(back, curve);
    }

    fn arb_row() -> impl Strategy<Value = GridRow> {
        (
            prop::bool::ANY,
            2usize..100,
            -5.0f64..5.0,
            1u32..4,
            1e-3f64..1e3,
            0.0f64..3.0,
            0.0f64..1.0,
            0.0f64..1.0,
            1u64..100_000,
        )
            .prop_map(|(uni, n, theta, p, sd, ratio, rate, pi, reps)| GridRow {
                distribution: if uni { Family::Uniform } else { Family::Normal },
                n,
                theta,
                p,
                error_sd: sd,
                d_ratio: ratio,
                d: ratio * sd,
                rejection_rate: rate,
                mean_pi_t: pi,
                mc_stderr: (rate * (1.0 - rate) / reps as f64).sqrt(),
                replicates: reps,
            })
    }

    proptest! {
        #[test]
        fn grid_csv_round_trip(rows in prop::collection::vec(arb_row(), 0..20)) {
            let text = grid_to_csv(&rows).unwrap();
            prop_assert_eq!(grid_from_csv(&text).unwrap(), rows);
        }

        #[test]
        fn regional_text_lists_every_group(vals in prop::collection::vec(prop::collection::vec(0.0f64..9.0, 4), 1..5)) {
            let mut text = String::from("region,time,value\n");
            for (g, row) in vals.iter().enumerate() {
                for (t, v) in row.iter().enumerate() {
                    text.push_str(&format!("r{g},{t},{v}\n"));
                }
            }
            let data = parse_table(&text).unwrap().to_regional().unwrap();
            for (g, row) in vals.iter().enumerate() {
                let got: Vec<f64> = data.groups()[&format!("r{g}")].iter().map(|v| v.unwrap()).collect();
                prop_assert_eq!(&got, row);
            }
        }
    }
}
