//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; errors surface as JS exceptions with
//! the library's message. The `*_report` functions hold the logic so they
//! can be tested natively.

use lrd_kendall::io;
use lrd_kendall::power;
use lrd_kendall::regional::{self, LrdPolicy};
use lrd_kendall::{inference, LrdRule, Series, Sidedness, TestOptions};
use wasm_bindgen::prelude::*;

fn sidedness(s: &str) -> Result<Sidedness, String> {
    match s {
        "two" | "two_sided" => Ok(Sidedness::TwoSided),
        "greater" => Ok(Sidedness::Greater),
        "less" => Ok(Sidedness::Less),
        other => Err(format!("unknown alternative {other:?}")),
    }
}

/// Power curve for `density` (`normal:S` or `uniform:A:B`) on `d` in
/// `[start, stop]`.
pub fn power_report(density: &str, lambda: f64, start: f64, stop: f64, step: f64, alpha: f64) -> Result<String, String> {
    if density.starts_with("file:") {
        return Err("file densities are not available in the browser".into());
    }
    let density = io::parse_density_spec(density).map_err(|e| e.to_string())?;
    let grid = power::linear_grid(start, stop, step).map_err(|e| e.to_string())?;
    if grid.len() > 5000 {
        return Err("grid too fine for the demo (at most 5000 points)".into());
    }
    let curve = power::power_curve(&density, lambda, &grid, alpha).map_err(|e| e.to_string())?;
    io::to_json(&curve).map_err(|e| e.to_string())
}

/// Regional test on the bundled platelet table. `mode` is `absolute` or
/// `fraction`.
pub fn platelets_report(mode: &str, value: f64, sided: &str) -> Result<String, String> {
    let data = io::parse_table(lrd_kendall::PLATELETS_CSV)
        .and_then(|t| t.to_regional())
        .map_err(|e| e.to_string())?;
    let policy = match mode {
        "absolute" => LrdPolicy::absolute(value),
        "fraction" => LrdPolicy::fraction_of_mean(value),
        other => return Err(format!("unknown LRD mode {other:?}")),
    };
    let r = regional::regional_test(&data, &policy, sidedness(sided)?, &TestOptions::default())
        .map_err(|e| e.to_string())?;
    io::to_json(&r).map_err(|e| e.to_string())
}

/// Single-series test on values separated by commas, spaces or newlines,
/// taken as equally spaced in time.
pub fn series_report(values: &str, d: f64, sided: &str) -> Result<String, String> {
    let xs = values
        .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("{s:?} is not a number")))
        .collect::<Result<Vec<f64>, String>>()?;
    let series = Series::from_values(xs).map_err(|e| e.to_string())?;
    let rule = LrdRule::new(d).map_err(|e| e.to_string())?;
    let r = inference::run_test(&series, &rule, sidedness(sided)?, &TestOptions::default())
        .map_err(|e| e.to_string())?;
    io::to_json(&r).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn power_curve(density: &str, lambda: f64, start: f64, stop: f64, step: f64, alpha: f64) -> Result<String, JsError> {
    power_report(density, lambda, start, stop, step, alpha).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn platelets_test(mode: &str, value: f64, sided: &str) -> Result<String, JsError> {
    platelets_report(mode, value, sided).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn series_test(values: &str, d: f64, sided: &str) -> Result<String, JsError> {
    series_report(values, d, sided).map_err(|e| JsError::new(&e))
}

/// The bundled platelet table as CSV, for display.
#[wasm_bindgen]
pub fn platelets_csv() -> String {
    lrd_kendall::PLATELETS_CSV.to_string()
}
