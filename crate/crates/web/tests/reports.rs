use lrd_kendall::power::PowerPoint;
use lrd_kendall::regional::RegionalResult;
use lrd_kendall::TrendTestResult;
use lrd_kendall_web::{platelets_report, power_report, series_report};

#[test]
fn power_report_is_a_curve() {
    let json = power_report("normal:1", 1.0, 0.0, 3.0, 0.5, 0.05).unwrap();
    let curve: Vec<PowerPoint> = lrd_kendall::io::from_json(&json).unwrap();
    assert_eq!(curve.len(), 7);
    assert!((curve[2].e_t.unwrap() - 0.287164843046582).abs() < 1e-6);
    assert!(power_report("file:/etc/passwd", 1.0, 0.0, 1.0, 0.5, 0.05).is_err());
    assert!(power_report("normal:1", 1.0, 0.0, 3.0, 1e-5, 0.05).is_err());
}

#[test]
fn platelets_report_matches_table() {
    let r: RegionalResult = lrd_kendall::io::from_json(&platelets_report("fraction", 0.05, "two").unwrap()).unwrap();
    assert_eq!(r.s_r, 49);
    assert!((r.variance - 239.67).abs() < 0.01);
    assert!(platelets_report("relative", 0.05, "two").is_err());
}

#[test]
fn series_report_parses_loose_lists() {
    let text = "90.9, 95.2 98.6\n95.8;100.7 94.9 92.8 101.5 99 98.7";
    let r: TrendTestResult = lrd_kendall::io::from_json(&series_report(text, 0.6, "two").unwrap()).unwrap();
    assert_eq!(r.s_ex, 14);
    assert!(series_report("1, x, 3", 0.0, "two").is_err());
    assert!(series_report("1 2 3", 0.0, "sideways").is_err());
}
