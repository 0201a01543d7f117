//! Mann-Kendall trend testing with a level of relevant difference (LRD).
//!
//! Two observations whose difference does not exceed the LRD `d` are treated
//! as a (partial) tie. Partial ties are not transitive, so the classical tie
//! correction does not apply; the variance of the extended score is instead
//! estimated from the per-observation counts `u_i` and `v_i`.
//!
//! The crate is organised bottom-up:
//!
//! * [`lrd`] scores pairs and computes `S_ex`, `u`, `v` and the tie proportion.
//! * [`variance`] holds the classical, plug-in and theoretical variances.
//! * [`inference`] turns a score into `Z`, p-values and tau coefficients.
//! * [`regional`] aggregates per-group tests (regional / seasonal Kendall).
//! * [`permutation`] is the resampling fallback for heavily tied data.
//! * [`density`], [`quadrature`] and [`power`] give the contiguous-alternative
//!   power analysis.
//! * [`sim`] runs Monte Carlo scenario grids.
//! * [`io`] parses input tables and simulation configs and renders reports.
//!
//! ```
//! use lrd_kendall::{inference, LrdRule, Series, Sidedness};
//!
//! let dbp = [90.9, 95.2, 98.6, 95.8, 100.7, 94.9, 92.8, 101.5, 99.0, 98.7];
//! let series = Series::from_values(dbp.to_vec()).unwrap();
//! let rule = LrdRule::new(0.6).unwrap();
//! let res = inference::run_test(&series, &rule, Sidedness::TwoSided, &Default::default()).unwrap();
//! assert_eq!(res.s_ex, 14);
//! ```

pub mod density;
pub mod error;
pub mod inference;
pub mod io;
pub mod lrd;
pub mod normal;
pub mod permutation;
pub mod power;
pub mod quadrature;
pub mod regional;
pub mod rng;
pub mod sim;
pub mod variance;

mod par;

pub use density::ErrorDensity;
pub use error::{Error, Result};
pub use inference::{Sidedness, TestOptions, TrendTestResult, Warning};
pub use lrd::{Boundary, Direction, LrdRule, PairScore, Series};
pub use variance::{MomentSet, TieGroups};

/// The bundled platelet donation table (per 1000 inhabitants, 2001-2005),
/// in long `region,time,value` form.
pub const PLATELETS_CSV: &str = include_str!("../../../data/platelets_2001_2005.csv");

/// The ten-point diastolic blood pressure example series as `time,value`.
pub const DBP_CSV: &str = include_str!("../../../data/table1_dbp.csv");
