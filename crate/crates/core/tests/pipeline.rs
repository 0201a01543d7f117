use lrd_kendall::io::{self, ConfigOverrides};
use lrd_kendall::regional::{self, LrdPolicy, RegionalResult};
use lrd_kendall::{inference, power, sim, ErrorDensity, LrdRule, Sidedness, TestOptions, TrendTestResult};

#[test]
fn csv_to_json_and_back() {
    let series = io::parse_table(lrd_kendall::DBP_CSV).unwrap().to_series().unwrap();
    let res = inference::run_test(&series, &LrdRule::new(0.6).unwrap(), Sidedness::TwoSided, &TestOptions::default())
        .unwrap();
    let back: TrendTestResult = io::from_json(&io::to_json(&res).unwrap()).unwrap();
    assert_eq!(back, res);
}

#[test]
fn regional_from_csv_survives_json() {
    let data = io::parse_table(lrd_kendall::PLATELETS_CSV).unwrap().to_regional().unwrap();
    let res = regional::regional_test(&data, &LrdPolicy::fraction_of_mean(0.05), Sidedness::Greater, &TestOptions::default())
        .unwrap();
    assert_eq!(res.groups_used, 19);
    assert_eq!(res.s_r, res.per_group.values().map(|g| g.s_ex).sum::<i64>());
    let back: RegionalResult = io::from_json(&io::to_json(&res).unwrap()).unwrap();
    assert_eq!(back, res);
}

#[test]
fn config_grid_to_csv_and_back() {
    let text = include_str!("../../../data/reference_grid.toml");
    let scenarios = io::parse_sim_config(text, ConfigOverrides { replicates: Some(40), seed: Some(3) }).unwrap();
    assert_eq!(scenarios.len(), 36);
    let rows = sim::run_grid(&scenarios[..2]).unwrap();
    let back = io::grid_from_csv(&io::grid_to_csv(&rows).unwrap()).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn power_curve_csv_round_trip() {
    let f = ErrorDensity::uniform(0.0, 1.0).unwrap();
    let curve = power::power_curve(&f, 2.0, &power::linear_grid(0.0, 1.5, 0.25).unwrap(), 0.05).unwrap();
    let back = io::power_from_csv(&io::power_to_csv(&curve).unwrap()).unwrap();
    assert_eq!(back, curve);
    assert!(back.iter().any(|p| p.is_degenerate()));
}
