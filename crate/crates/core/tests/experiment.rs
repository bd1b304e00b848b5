use bandclt::experiment::{heatmap_data, run, ExperimentConfig, ExperimentReport};
use bandclt::Error;

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

/// The report with run-specific metadata cleared.
fn stable(mut r: ExperimentReport) -> ExperimentReport {
    r.provenance.timestamp_unix = 0;
    r.config.workers = 0;
    r
}

#[test]
fn identical_seeds_reproduce_the_report() {
    let c = config(
        r#"{"n": 120, "bandwidth": {"half": 4}, "topology": "nonperiodic-zero",
            "functions": ["z", "z2", "poly:0;1;0.5i"], "replicates": 60, "seed": 99}"#,
    );
    let a = stable(run(&c).unwrap().report);
    let b = stable(run(&c).unwrap().report);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let mut other = c.clone();
    other.seed = 100;
    assert_ne!(stable(run(&other).unwrap().report).functions, a.functions);
}

#[test]
fn worker_count_does_not_change_results() {
    let mut c = config(
        r#"{"n": 150, "bandwidth": {"exponent": 0.4}, "topology": "periodic-zero",
            "functions": ["z", "z3"], "replicates": 64, "seed": 5, "norm_check": true}"#,
    );
    c.workers = 1;
    let one = run(&c).unwrap();
    c.workers = 4;
    let four = run(&c).unwrap();
    assert_eq!(one.samples, four.samples);
    assert_eq!(stable(one.report), stable(four.report));
}

#[test]
fn heatmap_rows_cover_every_replicate_and_function() {
    let c = config(
        r#"{"n": 64, "bandwidth": {"half": 3}, "topology": "periodic-nu",
            "functions": ["z", "z2", "exp"], "replicates": 5, "seed": 1}"#,
    );
    let rows = heatmap_data(&c).unwrap();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r.re.is_finite() && r.im.is_finite()));
    assert_eq!(rows[4].replicate, 1);
    assert_eq!(rows[4].function, "z2");
}

#[test]
fn full_band_mean_is_zero() {
    let c = config(
        r#"{"n": 300, "bandwidth": "full", "topology": "periodic-nu",
            "functions": ["z"], "replicates": 500, "seed": 8}"#,
    );
    let r = run(&c).unwrap().report;
    let f = &r.functions[0];
    assert!(f.mean.norm() < 4.0 * (f.variance / 500.0).sqrt(), "{:?}", f.mean);
}

#[test]
fn degenerate_profiles_are_config_errors() {
    let err = ExperimentConfig::from_json(
        r#"{"n": 64, "bandwidth": {"half": 3}, "topology": "periodic-zero",
            "profile": {"kind": "tabulated", "grid": [0.0, 0.0, 0.0]},
            "functions": ["z"], "replicates": 2, "seed": 1}"#,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let mut c = config(
        r#"{"n": 64, "bandwidth": {"half": 3}, "topology": "periodic-nu", "nu": 0.0,
            "functions": ["z"], "replicates": 2, "seed": 1}"#,
    );
    assert!(matches!(run(&c), Err(Error::Config(_))));
    c.nu = Some(0.25);
    assert!(run(&c).is_ok());
}

#[test]
fn narrow_band_linear_statistic_has_unit_variance() {
    // b_n = ⌊n^{0.3}/2⌋ = 3 at n = 1000.
    let c = config(
        r#"{"n": 1000, "bandwidth": {"half": 3}, "topology": "periodic-zero",
            "functions": ["z"], "replicates": 300, "seed": 42}"#,
    );
    let r = run(&c).unwrap().report;
    let v = r.functions[0].variance;
    assert!((v - 1.0).abs() < 0.15, "{v}");
}

#[test]
fn full_band_quadratic_statistic_has_variance_two() {
    let c = config(
        r#"{"n": 1000, "bandwidth": "full", "topology": "periodic-nu",
            "functions": ["z2"], "replicates": 300, "seed": 43}"#,
    );
    let r = run(&c).unwrap().report;
    let f = &r.functions[0];
    assert!((f.variance - 2.0).abs() < 0.3, "{}", f.variance);
    assert_eq!(r.provenance.c_n, 999);
    assert!((r.provenance.nu - 0.999).abs() < 1e-12);
}

#[test]
fn cubic_statistic_has_gaussian_tails() {
    let c = config(
        r#"{"n": 1000, "bandwidth": {"exponent": 0.3}, "topology": "periodic-zero",
            "functions": ["z3"], "replicates": 500, "seed": 44}"#,
    );
    let r = run(&c).unwrap().report;
    let d = r.functions[0].diagnostics.unwrap();
    for p in [d.re, d.im] {
        assert!(p.excess_kurtosis.abs() < 0.5, "{p:?}");
    }
}
