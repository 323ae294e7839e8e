use compound_delay::config::*;
use compound_delay::pipeline::*;
use compound_delay::Error;

#[test]
fn keywords_and_defaults() {
    let cfg = RunConfig::from_json(
        r#"{"model": {"preset": "suarez-schopf"}, "sweep": {"nu0": "auto", "lambda": "auto-from-preset"}}"#,
    )
    .unwrap();
    assert_eq!(cfg.sweep.nu0, Some(Nu0::Auto));
    assert_eq!(cfg.sweep.lambda, Lambda::FromPreset);
    assert_eq!(cfg.discretization.ng, 100);
    assert_eq!(cfg.m, 2);
    let cfg =
        RunConfig::from_json(r#"{"model": {"preset": "toy"}, "sweep": {"nu0": 0.3, "lambda": 2}}"#)
            .unwrap();
    assert_eq!(cfg.sweep.nu0, Some(Nu0::Value(0.3)));
    assert_eq!(cfg.sweep.lambda, Lambda::Value(2.0));
    let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    let err = RunConfig::from_json(r#"{"model": {"preset": "toy"}, "sweep": {"nu0": "later"}}"#)
        .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn invalid_values_are_config_errors() {
    for text in [
        r#"{"model": {"preset": "toy", "tau": 0}}"#,
        r#"{"model": {"preset": "toy"}, "m": 0}"#,
        r#"{"model": {"preset": "toy"}, "discretization": {"ng": 1}}"#,
        r#"{"model": {"preset": "toy"}, "structural": {"grids": [40]}}"#,
        r#"{"model": {"preset": "toy"}, "extra": 1}"#,
        r#"{"model": {"preset": "custom", "tau": 1, "alpha": {"atoms": []}, "b": [[1]], "c": {"atoms": [{"theta": 0, "matrix": [[1]]}]}, "lambda": 1}}"#,
    ] {
        assert!(
            matches!(RunConfig::from_json(text), Err(Error::Config(_))),
            "{text}"
        );
    }
}

#[test]
fn custom_kernels_build_a_model() {
    let cfg = RunConfig::from_json(
        r#"{"model": {"preset": "custom", "tau": 1.0,
            "alpha": {"atoms": [{"theta": 0.0, "matrix": [[-1.0]]}, {"theta": -1.0, "matrix": [[-0.5]]}],
                      "density": [{"from": -1.0, "to": -0.5, "matrix": [[0.2]]}]},
            "b": [[1.0]], "c": {"atoms": [{"theta": -1.0, "matrix": [[1.0]]}]}, "lambda": 0.3}}"#,
    )
    .unwrap();
    let m = build_model(&cfg.model).unwrap().model;
    assert_eq!(m.n, 1);
    assert_eq!(m.alpha.atoms.len(), 2);
    assert_eq!(m.alpha.density.len(), 1);
    assert_eq!(m.lambda_gain, 0.3);
}

#[test]
fn spectrum_resolves_auto_and_notes_trivial_stability() {
    let cfg = RunConfig::from_json(
        r#"{"model": {"preset": "mackey-glass", "beta": 0.05}, "sweep": {"nu0": "auto"}}"#,
    )
    .unwrap();
    let out = run_spectrum(&cfg).unwrap();
    assert_eq!(out.resolved.nu0_source, "auto");
    assert!(out.notes.iter().any(|n| n.contains("globally attracting")));
    assert!(out
        .to_csv()
        .starts_with("re,im,tensor_multiplicity,antisym_multiplicity\n"));
}

#[test]
fn order_fit_recovers_power_law() {
    let h = [0.1, 0.05, 0.025];
    let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
    assert!((fitted_order(&h, &e) - 1.5).abs() < 1e-12);
}

#[test]
fn coarse_oracle_still_refines() {
    let mut cfg = RunConfig::from_json(r#"{"model": {"preset": "toy"}}"#).unwrap();
    cfg.oracle.ng = 16;
    let table = run_oracle(&cfg).unwrap();
    assert!(table.all_pass, "{}", table.to_csv());
    cfg.oracle.break_trace_coupling = true;
    let broken = run_oracle(&cfg).unwrap();
    let failed: Vec<&str> = broken
        .rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.check.as_str())
        .collect();
    assert_eq!(failed, vec!["generator-difference-quotient"]);
    assert_eq!(broken.exit_code(), 1);
}
