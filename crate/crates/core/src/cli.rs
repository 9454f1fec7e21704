//! Command-line front end.
//!
//! `parse_args` turns argv into a [`CliCommand`]; `run` executes it and
//! returns the process exit code: 0 on success, 1 on a numerical or
//! convergence failure (or a failed check), 2 on usage and config errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde_json::Value;

use crate::allocation::{chordal_distance, overlap_metric};
use crate::channel_model::{HERMITIAN_TOLERANCE, PSD_TOLERANCE};
use crate::error::{Error, Result};
use crate::estimators::{linear_filter_mse, EstimatorKind};
use crate::experiments::{
    drop_allocation, drop_scenario, load_config, render_report, sweep, Moments, ReportFormat,
    ScenarioConfig, TrialPlan,
};
use crate::linalg;
use crate::pilot_signaling::{matched_filter, received_uplink};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    /// Run an SNR sweep and write a report.
    Sweep,
    /// Print the allocation chosen on the first drop.
    Allocate,
    /// Check model invariants on the first drop.
    Validate,
    /// Compare Monte Carlo MSE with the closed forms.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(
    name = "cogmiso",
    version,
    about = "Pilot allocation and channel estimation for a cognitive MISO uplink"
)]
pub struct CliCommand {
    #[arg(value_enum)]
    pub verb: Verb,
    /// Scenario config (JSON). Required for sweep; the others fall back to defaults.
    #[arg(long, value_name = "PATH", required_if_eq("verb", "sweep"))]
    pub config: Option<PathBuf>,
    /// Report destination, `-` for standard output.
    #[arg(long = "out", value_name = "PATH", required_if_eq("verb", "sweep"))]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Override a config field, e.g. `--set cmmse.contamination_threshold=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
}

pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliCommand, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    CliCommand::try_parse_from(argv)
}

fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!(
                "override key {key:?} has an empty segment"
            )));
        }
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!(
                "override {key:?}: {part:?} is not inside an object"
            ))
        })?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split always yields at least one segment")
}

/// Load the config named by the command (or the default one) and apply
/// `--set`, `--seed` and `--trials`.
pub fn resolve_config(cmd: &CliCommand) -> Result<ScenarioConfig> {
    let base = match &cmd.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::default(),
    };
    let mut value = serde_json::to_value(&base)?;
    if let Value::Object(map) = &mut value {
        // Unset optional tables would serialize as null; let --set fill them.
        map.retain(|_, v| !v.is_null());
    }
    for o in &cmd.overrides {
        apply_override(&mut value, o)?;
    }
    let mut cfg: ScenarioConfig = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("after overrides: {e}")))?;
    if let Some(seed) = cmd.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cmd.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io { .. } | Error::Serde(_) => 2,
        _ => 1,
    }
}

/// Execute a command, printing to `out` and errors to `err`.
pub fn run_with(cmd: &CliCommand, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match resolve_config(cmd) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let result = match cmd.verb {
        Verb::Sweep => run_sweep(cmd, &cfg, out),
        Verb::Allocate => run_allocate(&cfg, out),
        Verb::Validate => run_validate(&cfg, out),
        Verb::Oracle => run_oracle(&cfg, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cmd: &CliCommand) -> i32 {
    run_with(
        cmd,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn run_sweep(cmd: &CliCommand, cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<i32> {
    let report = sweep(cfg)?;
    let body = render_report(&report, cmd.format.into())?;
    let target = cmd
        .output
        .as_deref()
        .ok_or_else(|| Error::Config("sweep needs --out".into()))?;
    if target == Path::new("-") {
        out.write_all(body.as_bytes())
            .map_err(io_error(Path::new("<stdout>")))?;
    } else {
        std::fs::write(target, body).map_err(io_error(target))?;
    }
    Ok(0)
}

fn run_allocate(cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<i32> {
    let scenario = drop_scenario(cfg, 0)?;
    let snr = cfg.snr_grid_db[0];
    let w = io_error(Path::new("<stdout>"));
    let mut text = String::new();
    for (a, &kind) in cfg.allocator.iter().enumerate() {
        let alloc = drop_allocation(cfg, &scenario, 0, a, snr)?;
        text += &format!("{kind} at {snr} dB: shared set {:?}\n", alloc.shared_set);
        for step in &alloc.diagnostics {
            text += &format!(
                "  {:?} user {} metric {:.6e}\n",
                step.phase, step.user, step.metric
            );
        }
        for note in &alloc.notes {
            text += &format!("  note: {note}\n");
        }
    }
    out.write_all(text.as_bytes()).map_err(w)?;
    Ok(0)
}

fn run_validate(cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<i32> {
    let scenario = drop_scenario(cfg, 0)?;
    let mut checks: Vec<(String, bool, String)> = Vec::new();
    let mut record =
        |name: &str, ok: bool, detail: String| checks.push((name.to_string(), ok, detail));

    let links = std::iter::once(&scenario.users.primary).chain(&scenario.users.cognitive);
    let mut worst_herm = 0.0f64;
    let mut worst_psd = 0.0f64;
    let mut worst_diag = 0.0f64;
    for l in links {
        for c in [&l.pbs, &l.cbs] {
            let m = c.matrix();
            worst_herm = worst_herm.max(linalg::hermitian_defect(&m));
            let values = c.eigenvalues();
            let top = values[0].max(f64::MIN_POSITIVE);
            worst_psd = worst_psd.max(
                values
                    .iter()
                    .map(|v| (-v / top).max(0.0))
                    .fold(0.0, f64::max),
            );
            worst_diag = worst_diag.max(
                (0..m.nrows())
                    .map(|i| (m[(i, i)].re - c.attenuation()).abs())
                    .fold(0.0, f64::max),
            );
        }
    }
    record(
        "covariances Hermitian",
        worst_herm <= HERMITIAN_TOLERANCE,
        format!("max defect {worst_herm:.3e}"),
    );
    record(
        "covariances PSD",
        worst_psd <= PSD_TOLERANCE,
        format!("worst relative eigenvalue {:.3e}", -worst_psd),
    );
    record(
        "covariance diagonal equals attenuation",
        worst_diag <= 1e-12,
        format!("max deviation {worst_diag:.3e}"),
    );

    let s = scenario.training.block();
    let gram = s.ad_mul(s) - linalg::identity(s.ncols()).scale(scenario.pilot_energy());
    let gram_err = gram.norm() / scenario.pilot_energy();
    record(
        "training Gram equals P_t I",
        gram_err <= 1e-12,
        format!("relative error {gram_err:.3e}"),
    );

    let mut rng = stream(cfg.seed, &[4]);
    let h = scenario.users.primary.pbs.matrix().column(0).into_owned();
    let y = received_uplink(&h, &[], &scenario.training, 0.0, &mut rng)?;
    let back =
        (matched_filter(&y, &scenario.training)? - &h).norm() / h.norm().max(f64::MIN_POSITIVE);
    record(
        "matched filter round trip",
        back <= 1e-12,
        format!("relative error {back:.3e}"),
    );

    let users = &scenario.users;
    let mut overlap_ok = true;
    for c in &users.cognitive {
        let v = overlap_metric(&users.primary.pbs, &c.pbs)?;
        overlap_ok &= (0.0..=1.0).contains(&v);
    }
    record("overlap metric in [0, 1]", overlap_ok, String::new());

    let sub = &scenario.grouping.sp.subspaces;
    let rank = sub[0].ncols() as f64;
    let mut chordal_ok = true;
    for a in sub {
        chordal_ok &= chordal_distance(a, a)?.abs() <= 1e-10;
        for b in sub {
            let d = chordal_distance(a, b)?;
            chordal_ok &= (d - chordal_distance(b, a)?).abs() <= 1e-10 && d <= 2.0 * rank + 1e-10;
        }
    }
    record(
        "chordal distance zero, symmetric, bounded by 2r",
        chordal_ok,
        String::new(),
    );
    let grouped = scenario.grouping.sp.cognitive_groups.len() == users.num_cognitive();
    record("every CU grouped", grouped, String::new());

    let mut text = String::new();
    let mut all = true;
    for (name, ok, detail) in &checks {
        all &= ok;
        let tag = if *ok { "PASS" } else { "FAIL" };
        if detail.is_empty() {
            text += &format!("{tag} {name}\n");
        } else {
            text += &format!("{tag} {name} ({detail})\n");
        }
    }
    text += if all {
        "all invariants hold\n"
    } else {
        "some invariants failed\n"
    };
    out.write_all(text.as_bytes())
        .map_err(io_error(Path::new("<stdout>")))?;
    Ok(if all { 0 } else { 1 })
}

/// Compare empirical MSE with the closed forms for NMMSE and MMSE on the
/// first drop, for the first configured allocator at each SNR point.
fn run_oracle(cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<i32> {
    let scenario = drop_scenario(cfg, 0)?;
    let users = &scenario.users;
    let energy = scenario.pilot_energy();
    let kind = cfg.allocator[0];
    let mut text = String::new();
    let mut all = true;
    for (s, &snr) in cfg.snr_grid_db.iter().enumerate() {
        let alloc = drop_allocation(cfg, &scenario, 0, 0, snr)?;
        let shared = &alloc.shared_set;
        let noise = cfg.noise_var(snr);
        for est in [EstimatorKind::Nmmse, EstimatorKind::Mmse] {
            let plan = TrialPlan::new(&scenario, shared, est, snr, &cfg.cmmse_config())?;
            let (primary_exact, cognitive_exact) = match est {
                EstimatorKind::Mmse => (
                    users.primary_mse(shared, noise, energy)?,
                    users.cognitive_mse(shared, noise, energy)?,
                ),
                _ => {
                    let p = linear_filter_mse(
                        &plan.primary_filter.effective_matrix(),
                        &users.primary.pbs,
                        &users.interference_at_pbs(shared),
                        noise,
                        energy,
                    )?;
                    let mut c = 0.0;
                    for (f, &j) in plan.cognitive_filters.iter().zip(shared) {
                        c += linear_filter_mse(
                            &f.effective_matrix(),
                            &users.cognitive[j].cbs,
                            &users.interference_at_cbs(shared, j),
                            noise,
                            energy,
                        )?;
                    }
                    (p, c)
                }
            };
            let mut primary = Moments::default();
            let mut cognitive = Moments::default();
            for t in 0..cfg.trials {
                let o = plan.run(&mut stream(cfg.seed, &[5, s as u64, t as u64]))?;
                primary.push(o.primary_error);
                cognitive.push(o.cognitive_errors.iter().sum());
            }
            for (label, m, exact) in [
                ("primary", primary, primary_exact),
                ("cognitive", cognitive, cognitive_exact),
            ] {
                if label == "cognitive" && shared.is_empty() {
                    continue;
                }
                let rel = (m.mean() - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
                let rse = m.stderr() / exact.abs().max(f64::MIN_POSITIVE);
                let ok = rel <= 0.02f64.max(4.0 * rse);
                all &= ok;
                text += &format!(
                    "{} {snr} dB {kind} {est} {label}: empirical {:.6e} analytic {:.6e} relative error {rel:.4e}\n",
                    if ok { "PASS" } else { "FAIL" },
                    m.mean(),
                    exact
                );
            }
        }
    }
    out.write_all(text.as_bytes())
        .map_err(io_error(Path::new("<stdout>")))?;
    Ok(if all { 0 } else { 1 })
}
