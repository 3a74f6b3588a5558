use serde_json::Value;
use swr_wasm::{cov_report, factor_curves, train_report};

#[test]
fn cov_of_published_counts() {
    let v: Value = serde_json::from_str(&cov_report("210747, 395556, 393906").unwrap()).unwrap();
    assert!((v["cov"].as_f64().unwrap() - 0.3186).abs() < 5e-4);
    assert!(cov_report("5").is_err());
    assert!(cov_report("1, x").is_err());
}

#[test]
fn curves_stay_in_range() {
    let v: Value = serde_json::from_str(&factor_curves(1.0, 2.0, 101).unwrap()).unwrap();
    let bin: Vec<f64> = v["binarization"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(bin.len(), 101);
    assert!(bin.iter().all(|b| (0.0..=1.0).contains(b)));
    assert!(bin.windows(2).all(|w| w[0] <= w[1]));
    assert!(factor_curves(0.0, 2.0, 10).is_err());
}

#[test]
fn tiny_training_reports_every_scenario() {
    let v: Value = serde_json::from_str(&train_report("star", 3, 3000, 2, 1).unwrap()).unwrap();
    assert_eq!(v["epochs"].as_array().unwrap().len(), 2);
    assert_eq!(v["test"]["scenarios"].as_array().unwrap().len(), 3);
    assert!(train_report("nope", 3, 3000, 2, 1).unwrap_err().contains("valid kinds"));
}
