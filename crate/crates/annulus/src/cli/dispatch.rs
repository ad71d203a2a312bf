//! Subcommand dispatch, run-directory management and report emission.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 failed
//! diagnostic assertion.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    conservation_drift, energy_identity_residual, lyapunov_check, regularity_flags,
    DiagnosticsRow, SeriesMeta, TimeSeries,
};
use crate::error::{Error, Result};
use crate::timestepper;

use super::config::{
    apply_override, build_equilibrium, build_sim_config, emit_config, parse_config, RunConfig,
};

#[derive(Parser, Debug)]
#[command(name = "annulus", about = "Boussinesq annulus solver and stability toolkit", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Path to the run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; run directories are created beneath it.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Worker threads for sweeps; defaults to ANNULUS_WORKERS or 1.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Config overrides like section.key=value.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute per-mode alpha(s) curves and the growth rate.
    Eig(CommonArgs),
    /// Integrate the perturbation system and emit the time series.
    Simulate(CommonArgs),
    /// Classify the configured equilibrium by the sign of h.
    Classify(CommonArgs),
    /// Re-check identities on a finished run directory.
    Diagnose(CommonArgs),
    /// Run a parameter sweep of classify/eig/simulate.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Config key to sweep, like equilibrium.gamma.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Subcommand to run per value.
        #[arg(long, default_value = "classify")]
        action: String,
    },
}

/// Entry point used by the binary; maps errors onto exit codes.
pub fn dispatch(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Eig(a) => cmd_eig(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Sweep { common, param, values, action } => {
            cmd_sweep(common, param, values, action)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Domain(_)
        | Error::Size(_)
        | Error::Arg(_)
        | Error::Parse { .. }
        | Error::Validation { .. }
        | Error::Range { .. }
        | Error::Variant(_) => 2,
        Error::NotConverged(_) => 4,
        _ => 3,
    }
}

fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    let text = fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text)?;
    for spec in &args.overrides {
        apply_override(&mut cfg, spec)?;
    }
    super::config::validate(&cfg)?;
    Ok(cfg)
}

pub fn content_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    let mut s = String::new();
    for b in digest.iter().take(6) {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Append-only run directory `<out>/<command>-<hash>[-<n>]` with the resolved
/// config and its content hash stored inside.
fn create_run_dir(base: &Path, command: &str, cfg: &RunConfig) -> Result<(PathBuf, String)> {
    let text = emit_config(cfg);
    let hash = content_hash(&text);
    let mut name = format!("{command}-{hash}");
    let mut n = 1;
    while base.join(&name).exists() {
        n += 1;
        name = format!("{command}-{hash}-{n}");
    }
    let dir = base.join(name);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.ini"), &text)?;
    let meta = json!({
        "command": command,
        "content_hash": hash,
        "schema_version": cfg.version,
    });
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok((dir, hash))
}

fn cmd_classify(args: &CommonArgs) -> Result<i32> {
    let cfg = load_config(args)?;
    let (eq, _params) = build_equilibrium(&cfg)?;
    let (dir, _) = create_run_dir(&args.out, "classify", &cfg)?;
    let line = format!("{}", eq.stability);
    println!("{line}");
    let payload = json!({
        "stability": eq.stability,
        "display": line,
        "potential": format!("{}", eq.potential.kind),
        "profile": eq.profile.describe(),
    });
    fs::write(dir.join("classification.json"), serde_json::to_string_pretty(&payload)?)?;
    Ok(0)
}

fn cmd_eig(args: &CommonArgs) -> Result<i32> {
    let cfg = load_config(args)?;
    let (eq, params) = build_equilibrium(&cfg)?;
    let (dir, _) = create_run_dir(&args.out, "eig", &cfg)?;
    let modes: Vec<usize> = (0..=cfg.m_max).collect();
    let scan = crate::eigensolver::full_spectrum_check(&eq, &params, &modes)?;
    let mut csv = String::from("m,s,alpha\n");
    for pm in &scan.per_mode {
        for (s, a) in &pm.alpha_curve {
            let _ = writeln!(csv, "{},{},{}", pm.mode, s, a);
        }
    }
    fs::write(dir.join("curves.csv"), csv)?;
    let dominant = scan.per_mode.iter().find(|pm| Some(pm.mode) == scan.dominant_mode);
    let summary = json!({
        "lambda": scan.lambda,
        "mode": scan.dominant_mode,
        "s_star": scan.lambda,
        "defect": dominant.and_then(|pm| pm.defect),
        "classification": scan.classification,
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    match scan.lambda {
        Some(l) => println!("unstable: lambda = {l:.8e} at mode {:?}", scan.dominant_mode),
        None => println!("stable: no growth rate over modes 0..={}", cfg.m_max),
    }
    Ok(0)
}

const TIMESERIES_HEADER: &str = "t,KE,PE_coupling,H1u,L2ut,Lyap,L2_rho_total_drift,bc_res_a,bc_res_b,CFL";

fn write_timeseries(dir: &Path, series: &TimeSeries) -> Result<()> {
    let rows = &series.rows;
    let l2_0 = rows.first().map(|r| r.l2_rho_total).unwrap_or(1.0).max(1e-300);
    let mut csv = String::from(TIMESERIES_HEADER);
    csv.push('\n');
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.ke,
            r.pe_coupling,
            r.h1_u,
            r.l2_ut,
            r.lyap,
            (r.l2_rho_total - l2_0) / l2_0,
            r.bc_res_a,
            r.bc_res_b,
            r.cfl
        );
    }
    fs::write(dir.join("timeseries.csv"), csv)?;
    // Extended series and metadata: everything diagnose needs.
    fs::write(dir.join("series_ext.json"), serde_json::to_string(series)?)?;
    Ok(())
}

fn read_timeseries(dir: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(dir.join("series_ext.json"))?;
    Ok(serde_json::from_str(&text)?)
}

fn cmd_simulate(args: &CommonArgs) -> Result<i32> {
    let cfg = load_config(args)?;
    let sim = build_sim_config(&cfg)?;
    let (dir, hash) = create_run_dir(&args.out, "simulate", &cfg)?;
    let out = timestepper::run(&sim, Some(&dir), None)?;
    write_timeseries(&dir, &out.series)?;
    let summary = json!({
        "content_hash": hash,
        "t_final": out.final_state.t,
        "steps": out.final_state.step,
        "rows": out.series.rows.len(),
        "snapshots": out.snapshots.len(),
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "simulate: advanced to t = {:.6} in {} steps; run directory {}",
        out.final_state.t,
        out.final_state.step,
        dir.display()
    );
    Ok(0)
}

fn cmd_diagnose(args: &CommonArgs) -> Result<i32> {
    // The config path points at the config copy inside a run directory, or
    // --out names the run directory itself.
    let run_dir: PathBuf = if args.out.join("series_ext.json").exists() {
        args.out.clone()
    } else {
        args.config
            .parent()
            .map(|p| p.to_path_buf())
            .ok_or_else(|| Error::Arg("cannot infer run directory".into()))?
    };
    let cfg = load_config(args)?;
    let series = read_timeseries(&run_dir)?;
    let report = diagnose_series(&cfg, &series)?;
    let pretty = serde_json::to_string_pretty(&report)?;
    fs::write(run_dir.join("report.json"), &pretty)?;
    fs::write(run_dir.join("report.md"), render_report_md(&report))?;
    let failed = report["checks"]
        .as_array()
        .map(|cs| cs.iter().any(|c| c["asserted"].as_bool() == Some(true) && c["passed"].as_bool() == Some(false)))
        .unwrap_or(false);
    println!("diagnose: report written to {}", run_dir.join("report.json").display());
    Ok(if failed { 4 } else { 0 })
}

/// Identity checks with configured tolerances expressed as a JSON report.
pub fn diagnose_series(cfg: &RunConfig, series: &TimeSeries) -> Result<serde_json::Value> {
    let energy = energy_identity_residual(series);
    let lyap = lyapunov_check(series, cfg.lyap_gamma.max(1e-12), cfg.lyap_beta)?;
    let cons = conservation_drift(series);
    let flags = regularity_flags(series);
    let mut checks = vec![
        json!({
            "name": "energy_identity",
            "value": energy,
            "threshold": cfg.energy_tol,
            "passed": energy <= cfg.energy_tol,
            "asserted": cfg.assert_identities,
        }),
        json!({
            "name": "lyapunov_conservation",
            "value": lyap.conservation_violation,
            "threshold": cfg.lyap_tol,
            "passed": lyap.conservation_violation <= cfg.lyap_tol,
            "asserted": cfg.assert_identities,
        }),
        json!({
            "name": "lyapunov_monotonicity",
            "value": lyap.monotonicity_violation,
            "threshold": cfg.lyap_tol,
            "passed": lyap.monotonicity_violation <= cfg.lyap_tol,
            "asserted": cfg.assert_identities,
        }),
        json!({
            "name": "density_l2_conservation",
            "value": cons.l2_drift,
            "threshold": cfg.conservation_tol,
            "passed": cons.l2_drift <= cfg.conservation_tol,
            "asserted": cfg.assert_conservation,
        }),
    ];
    checks.push(json!({
        "name": "regularity_h2_bounded",
        "value": flags.h2_sup,
        "threshold": f64::INFINITY,
        "passed": flags.h2_bounded,
        "asserted": cfg.assert_identities,
    }));
    Ok(json!({
        "checks": checks,
        "conservation": cons,
        "regularity": flags,
        "rows": series.rows.len(),
        "t_final": series.rows.last().map(|r| r.t),
    }))
}

fn render_report_md(report: &serde_json::Value) -> String {
    let mut s = String::from("# Run diagnostics\n\n| check | value | threshold | passed | asserted |\n|---|---|---|---|---|\n");
    if let Some(checks) = report["checks"].as_array() {
        for c in checks {
            let _ = writeln!(
                s,
                "| {} | {:.3e} | {:.3e} | {} | {} |",
                c["name"].as_str().unwrap_or("?"),
                c["value"].as_f64().unwrap_or(f64::NAN),
                c["threshold"].as_f64().unwrap_or(f64::NAN),
                c["passed"],
                c["asserted"],
            );
        }
    }
    let _ = writeln!(s, "\nrows: {}", report["rows"]);
    let _ = writeln!(s, "t_final: {}", report["t_final"]);
    s
}

fn cmd_sweep(common: &CommonArgs, param: &str, values: &[f64], action: &str) -> Result<i32> {
    if values.is_empty() {
        return Err(Error::Arg("sweep needs at least one value".into()));
    }
    match action {
        "classify" | "eig" | "simulate" => {}
        other => return Err(Error::Arg(format!("unknown sweep action '{other}'"))),
    }
    let workers = common
        .workers
        .or_else(|| std::env::var("ANNULUS_WORKERS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1);
    let base_cfg = load_config(common)?;
    let (sweep_dir, _) = create_run_dir(&common.out, "sweep", &base_cfg)?;

    let jobs: Vec<(usize, f64)> = values.iter().cloned().enumerate().collect();
    let results: std::sync::Mutex<Vec<(usize, serde_json::Value)>> =
        std::sync::Mutex::new(Vec::new());
    let next: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let (idx, value) = jobs[i];
                let outcome = run_sweep_job(&sweep_dir, &base_cfg, param, value, action, idx);
                let payload = match outcome {
                    Ok(v) => v,
                    Err(e) => json!({"value": value, "error": format!("{e}")}),
                };
                results.lock().unwrap().push((idx, payload));
            });
        }
    });

    let mut rows = results.into_inner().unwrap();
    rows.sort_by_key(|(i, _)| *i);
    let summary: Vec<serde_json::Value> = rows.into_iter().map(|(_, v)| v).collect();
    fs::write(
        sweep_dir.join("sweep_summary.json"),
        serde_json::to_string_pretty(&json!({
            "param": param,
            "action": action,
            "results": summary,
        }))?,
    )?;
    println!("{:<14} {:<12} outcome", "param", "value");
    for v in summary.iter() {
        let outcome = v["display"].as_str().unwrap_or_else(|| {
            if v["error"].is_string() {
                "error"
            } else {
                "done"
            }
        });
        println!("{:<14} {:<12} {}", param, v["value"], outcome);
    }
    Ok(0)
}

fn run_sweep_job(
    sweep_dir: &Path,
    base: &RunConfig,
    param: &str,
    value: f64,
    action: &str,
    idx: usize,
) -> Result<serde_json::Value> {
    let mut cfg = base.clone();
    apply_override(&mut cfg, &format!("{param}={value}"))?;
    super::config::validate(&cfg)?;
    let sub = sweep_dir.join(format!("job-{idx:03}"));
    fs::create_dir_all(&sub)?;
    fs::write(sub.join("config.ini"), emit_config(&cfg))?;
    match action {
        "classify" => {
            let (eq, _) = build_equilibrium(&cfg)?;
            let display = format!("{}", eq.stability);
            let payload = json!({"value": value, "display": display, "stability": eq.stability});
            fs::write(sub.join("classification.json"), serde_json::to_string_pretty(&payload)?)?;
            Ok(payload)
        }
        "eig" => {
            let (eq, params) = build_equilibrium(&cfg)?;
            let modes: Vec<usize> = (0..=cfg.m_max).collect();
            let scan = crate::eigensolver::full_spectrum_check(&eq, &params, &modes)?;
            let display = match scan.lambda {
                Some(l) => format!("lambda = {l:.6e}"),
                None => "stable".into(),
            };
            let payload = json!({"value": value, "display": display, "lambda": scan.lambda});
            fs::write(sub.join("summary.json"), serde_json::to_string_pretty(&payload)?)?;
            Ok(payload)
        }
        _ => {
            let sim = build_sim_config(&cfg)?;
            let out = timestepper::run(&sim, Some(&sub), None)?;
            write_timeseries(&sub, &out.series)?;
            let display = format!("t_final = {:.4}", out.final_state.t);
            Ok(json!({"value": value, "display": display, "steps": out.final_state.step}))
        }
    }
}

/// Row-level CSV reader used by tests to compare runs byte-wise.
pub fn timeseries_header() -> &'static str {
    TIMESERIES_HEADER
}

#[allow(unused_imports)]
pub(crate) use serde_json::Value as JsonValue;

// Re-exported building blocks for the acceptance suite.
pub use crate::diagnostics::TimeSeries as SeriesData;
#[allow(unused)]
fn _type_checks(_: &SeriesMeta, _: &DiagnosticsRow) {}
