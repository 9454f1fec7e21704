//! A small SNR sweep printed as CSV. Pass a config path to run that instead,
//! e.g. `cargo run --release --example snr_sweep -- crates/core/examples/allocator_comparison.json`.

use cogmiso::experiments::{load_config, render_report};
use cogmiso::{sweep, EstimatorKind, ReportFormat, ScenarioConfig};

fn main() -> cogmiso::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => load_config(path.as_ref())?,
        None => ScenarioConfig {
            snr_grid_db: vec![0.0, 10.0, 20.0, 30.0],
            trials: 500,
            drops: 5,
            estimator: vec![EstimatorKind::Nmmse, EstimatorKind::Mmse],
            ..ScenarioConfig::default()
        },
    };
    print!("{}", render_report(&sweep(&cfg)?, ReportFormat::Csv)?);
    Ok(())
}
