use neckflow::asymptotics::{Branch, FluxModel, Regime};
use neckflow::harness::{
    compare_prediction, eps_correction_exponent, expected_slope, flux_model, run_sweep, write_report, SweepSpec,
    ROW_COLUMNS,
};
use std::process::Command;

fn small_spec(p: &[f64], eps: &[f64]) -> SweepSpec {
    SweepSpec {
        p: p.to_vec(),
        eps: eps.to_vec(),
        target_h: 0.3,
        neck_layers: 4,
        eta_sensitivity: false,
        ..SweepSpec::canonical()
    }
}

#[test]
fn rows_are_identical_across_runs_and_worker_counts() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut texts = Vec::new();
    for (dir, workers) in dirs.iter().zip([1, 3]) {
        let spec = SweepSpec {
            workers: Some(workers),
            seed: 11,
            ..small_spec(&[2.0, 3.0], &[2e-2, 1e-2])
        };
        let report = run_sweep(&spec).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert!(report.rows.iter().all(|r| r.ok()), "{:?}", report.rows);
        write_report(dir.path(), &report).unwrap();
        texts.push(std::fs::read(dir.path().join("rows.csv")).unwrap());
        assert!(dir.path().join("probes.csv").exists());
        assert!(dir.path().join("report.json").exists());
    }
    assert_eq!(texts[0], texts[1]);
    let head = String::from_utf8(texts[0].clone()).unwrap();
    assert_eq!(head.lines().next().unwrap(), ROW_COLUMNS.join(","));
    assert_eq!(head.lines().count(), 5);
}

#[test]
fn single_eps_has_no_slope() {
    let report = run_sweep(&small_spec(&[2.0], &[1e-2])).unwrap();
    assert_eq!(report.rows.len(), 1);
    let reg = report.regime(2.0).unwrap();
    assert!(reg.slope.is_none());
    assert!(reg.slope_note.as_deref().unwrap().contains("insufficient points"), "{reg:?}");
}

#[test]
fn spec_validation() {
    assert!(small_spec(&[2.0], &[1e-2, 1e-3]).validate().is_ok());
    assert!(small_spec(&[2.0], &[1e-3, 1e-2]).validate().is_err());
    assert!(small_spec(&[2.0], &[1e-2, 1e-2]).validate().is_err());
    assert!(small_spec(&[2.0], &[0.0]).validate().is_err());
    assert!(small_spec(&[1.0], &[1e-2]).validate().is_err());
    assert!(small_spec(&[], &[1e-2]).validate().is_err());
    let zero_workers = SweepSpec {
        workers: Some(0),
        ..small_spec(&[2.0], &[1e-2])
    };
    assert!(zero_workers.validate().is_err());
    assert!(run_sweep(&small_spec(&[2.0], &[1e-3, 1e-2])).is_err());
}

#[test]
fn spec_from_toml() {
    let s = SweepSpec::from_toml_str("p = [1.3, 3.0]\neps = [1e-2, 1e-3]\ntarget_h = 0.2\n").unwrap();
    assert_eq!(s.p, vec![1.3, 3.0]);
    assert_eq!(s.target_h, 0.2);
    assert_eq!(s.neck_layers, 6);
    assert!(s.eta_sensitivity);
    assert!(SweepSpec::from_toml_str("p = [2.0]\neps = [1e-2]\nbogus = 1\n").is_err());
    assert!(SweepSpec::from_toml_str("p = [2.0]\neps = [1e-3, 1e-2]\n").is_err());
}

#[test]
fn prediction_errors() {
    assert_eq!(compare_prediction(3.0, 3.0), (0.0, true));
    assert_eq!(compare_prediction(2.0, 4.0), (0.5, true));
    assert_eq!(compare_prediction(-0.25, 0.0), (0.25, false));
}

#[test]
fn regime_dependent_reductions() {
    let sup = Regime::new(3.0, 2).unwrap();
    let crit = Regime::new(1.5, 2).unwrap();
    let sub = Regime::new(1.3, 2).unwrap();
    assert_eq!(sup.branch, Branch::Super);
    assert_eq!(crit.branch, Branch::Critical);
    assert_eq!(sub.branch, Branch::Sub);

    assert!((expected_slope(&sup) + 0.25).abs() < 1e-15);
    assert_eq!(expected_slope(&Regime::new(2.0, 2).unwrap()), -0.5);
    assert_eq!(expected_slope(&crit), -1.0);
    assert_eq!(expected_slope(&sub), -1.0);

    assert!((eps_correction_exponent(&sup).unwrap() - 1.5).abs() < 1e-15);
    assert!((eps_correction_exponent(&sub).unwrap() - 0.2).abs() < 1e-12);
    assert!(eps_correction_exponent(&crit).is_none());

    assert!(matches!(flux_model(&sup), FluxModel::Exponential));
    assert!(matches!(flux_model(&crit), FluxModel::Exponential));
    match flux_model(&sub) {
        FluxModel::PowerLaw { exponent } => assert!((exponent - 0.4).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
}

#[test]
fn cli_oracle_verb_succeeds() {
    let out = Command::new(env!("CARGO_BIN_EXE_neckflow")).arg("oracle").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cli_rejects_unknown_verb() {
    let out = Command::new(env!("CARGO_BIN_EXE_neckflow")).arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
}
