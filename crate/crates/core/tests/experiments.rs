use std::path::PathBuf;

use cogmiso::experiments::{load_config, read_report, render_report, run_drops, CSV_HEADER};
use cogmiso::{sweep, write_report, AllocatorKind, EstimatorKind, ReportFormat, ScenarioConfig};

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

fn small() -> ScenarioConfig {
    ScenarioConfig {
        antennas: 6,
        num_cognitive_users: 8,
        reuse_count: 2,
        tau: 4,
        snr_grid_db: vec![0.0, 15.0],
        trials: 200,
        drops: 2,
        seed: 77,
        estimator: vec![EstimatorKind::Nmmse, EstimatorKind::Mmse],
        ..ScenarioConfig::default()
    }
}

#[test]
fn same_seed_same_report() {
    let a = render_report(&sweep(&small()).unwrap(), ReportFormat::Csv).unwrap();
    let b = render_report(&sweep(&small()).unwrap(), ReportFormat::Csv).unwrap();
    assert_eq!(a, b);
    let other = ScenarioConfig {
        seed: 78,
        ..small()
    };
    let c = render_report(&sweep(&other).unwrap(), ReportFormat::Csv).unwrap();
    assert_ne!(a, c);
}

#[test]
fn csv_has_one_row_per_cell() {
    let cfg = small();
    let csv = render_report(&sweep(&cfg).unwrap(), ReportFormat::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 1 + cfg.snr_grid_db.len() * cfg.pairs().len());
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 8, "{line}");
    }
}

#[test]
fn json_report_round_trips() {
    let report = sweep(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    write_report(&report, &path, ReportFormat::Json).unwrap();
    let back = read_report(&path).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.provenance.seed, 77);
    assert!(back
        .rows
        .iter()
        .all(|r| r.primary_mse_db.is_finite() && r.stderr_primary >= 0.0));
}

#[test]
fn standard_error_shrinks_with_trials() {
    let base = ScenarioConfig {
        snr_grid_db: vec![10.0],
        drops: 1,
        allocator: vec![AllocatorKind::Mpa],
        estimator: vec![EstimatorKind::Mmse],
        ..small()
    };
    let se = |trials| {
        let cfg = ScenarioConfig {
            trials,
            ..base.clone()
        };
        sweep(&cfg).unwrap().rows[0].stderr_primary
    };
    let ratio = se(2000) / se(4000);
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn error_falls_with_snr() {
    let cfg = ScenarioConfig {
        snr_grid_db: vec![0.0, 10.0, 20.0, 30.0],
        trials: 1000,
        drops: 3,
        allocator: vec![AllocatorKind::Mpa, AllocatorKind::Rpa],
        estimator: vec![EstimatorKind::Mmse],
        ..small()
    };
    let report = sweep(&cfg).unwrap();
    for kind in [AllocatorKind::Mpa, AllocatorKind::Rpa] {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.allocator == kind).collect();
        for w in rows.windows(2) {
            let tol = 3.0 * (w[0].stderr_primary + w[1].stderr_primary);
            assert!(w[1].primary_mse_db <= w[0].primary_mse_db + tol, "{kind}");
            let (a, b) = (
                w[0].cognitive_mse_db.unwrap(),
                w[1].cognitive_mse_db.unwrap(),
            );
            let tol = 3.0 * (w[0].stderr_cognitive.unwrap() + w[1].stderr_cognitive.unwrap());
            assert!(b <= a + tol, "{kind}");
        }
    }
}

#[test]
fn drops_pool_into_report() {
    let cfg = small();
    let drops = run_drops(&cfg).unwrap();
    assert_eq!(drops.len(), 2);
    let report = sweep(&cfg).unwrap();
    assert!(report.rows.iter().all(|r| r.trials == 400));
}

#[test]
fn example_configs_load() {
    for name in ["allocator_comparison.json", "estimator_comparison.json", "toy_mpa.json"] {
        let cfg = load_config(&example(name)).unwrap();
        cfg.validate().unwrap();
    }
    let cmp = load_config(&example("estimator_comparison.json")).unwrap();
    assert_eq!(cmp.cmmse_config().contamination_threshold, 10.0);
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"antennas": 4}"#).unwrap();
    assert!(matches!(load_config(&path), Err(cogmiso::Error::Config(_))));
}
