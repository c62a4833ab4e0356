//! Subcommand drivers. Reports are computed first and written in grid
//! order once everything succeeded.

use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use subcmv::classify::{classify_angles, classify_trace, ClassifyParams, GridReport, SpectralClassification};
use subcmv::mfun::{radial_scan, Extended, LimitEstimate};
use subcmv::selftest::{self, SelftestOptions};

use crate::config::{RunConfig, ThetaGrid};
use crate::CliError;

pub const OUT_DIR_ENV: &str = "SUBCMV_OUT_DIR";

/// Column order of the verdict CSV.
pub const REPORT_COLUMNS: [&str; 7] = ["theta", "verdict", "ReF_limit", "lyap_plus", "lyap_minus", "confidence", "config_hash"];

fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn claim(paths: &[PathBuf], force: bool) -> Result<(), CliError> {
    for p in paths {
        if p.exists() && !force {
            return Err(CliError::Config(format!("{} exists; pass --force to overwrite", p.display())));
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn params(cfg: &RunConfig) -> ClassifyParams {
    ClassifyParams { r_schedule: cfg.r_values(), truncation: cfg.truncation, ..ClassifyParams::default() }
}

#[derive(Serialize)]
struct Row<'a> {
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    point: &'a SpectralClassification,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn write_report_csv(path: &Path, report: &GridReport, hash: &str) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(path.display().to_string(), e.into());
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(REPORT_COLUMNS).map_err(io)?;
    for p in &report.points {
        let conf = serde_json::to_value(p.confidence).expect("enum serializes");
        w.write_record([
            num(p.theta),
            p.verdict.as_str().to_string(),
            num(p.re_f_limit()),
            num(p.evidence.transfer.lyap_plus),
            num(p.evidence.transfer.lyap_minus),
            conf.as_str().unwrap_or_default().to_string(),
            hash.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn write_report_jsonl(path: &Path, report: &GridReport, cfg: &RunConfig, hash: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io = |e: std::io::Error| CliError::Io(path.display().to_string(), e);
    for p in &report.points {
        serde_json::to_writer(&mut w, &Row { config_hash: hash, seed: cfg.seed, point: p }).map_err(|e| io(e.into()))?;
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn run_classify(config: &Path, theta_count: Option<usize>, jobs: Option<usize>, force: bool) -> Result<GridReport, CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(n) = theta_count {
        cfg.theta_grid = ThetaGrid::Count(n);
        cfg.validate()?;
    }
    if jobs == Some(0) {
        return Err(CliError::Config("--jobs: must be at least 1".into()));
    }
    let targets: Vec<PathBuf> = [&cfg.outputs.jsonl, &cfg.outputs.csv].into_iter().flatten().map(|p| resolve(p)).collect();
    claim(&targets, force)?;
    let report = classify_angles(&cfg.model, &cfg.angles(), &params(&cfg), jobs)?;
    let hash = cfg.hash();
    if let Some(p) = &cfg.outputs.jsonl {
        write_report_jsonl(&resolve(p), &report, &cfg, &hash)?;
    }
    if let Some(p) = &cfg.outputs.csv {
        write_report_csv(&resolve(p), &report, &hash)?;
    }
    if !report.coherence_violations.is_empty() {
        return Err(CliError::Coherence(report.coherence_violations.clone()));
    }
    Ok(report)
}

fn describe(l: &LimitEstimate) -> String {
    let v = match l.value {
        None => "none".to_string(),
        Some(Extended::Infinite) => "inf".to_string(),
        Some(Extended::Finite(c)) => format!("{:e}{:+e}i", c.re, c.im),
    };
    let conf = serde_json::to_value(l.confidence).expect("enum serializes");
    format!("{v} ({})", conf.as_str().unwrap_or_default())
}

pub fn run_trace(config: &Path, theta: f64, force: bool) -> Result<SpectralClassification, CliError> {
    let cfg = RunConfig::load(config)?;
    if !(0.0..std::f64::consts::TAU).contains(&theta) {
        return Err(CliError::Config(format!("--theta: {theta} not in [0, 2 pi)")));
    }
    let path = resolve(&cfg.outputs.trace);
    claim(std::slice::from_ref(&path), force)?;
    let params = params(&cfg);
    let trace = radial_scan(&cfg.model, theta, &params.r_schedule, &params.truncation)?;
    let verdict = classify_trace(&cfg.model, &trace, &params)?;
    let io = |e: std::io::Error| CliError::Io(path.display().to_string(), e);
    let mut w = create(&path)?;
    trace.write_csv(&mut w).map_err(io)?;
    let lim = &trace.limits;
    writeln!(w, "# config_hash={}", cfg.hash()).map_err(io)?;
    writeln!(w, "# limit f_plus={}", describe(&lim.f_plus)).map_err(io)?;
    writeln!(w, "# limit m_minus={}", describe(&lim.m_minus)).map_err(io)?;
    writeln!(w, "# limit f={}", describe(&lim.f_whole)).map_err(io)?;
    writeln!(w, "# signature={}", verdict.verdict.as_str()).map_err(io)?;
    w.flush().map_err(io)?;
    Ok(verdict)
}

/// Prints one line per check; `Ok(false)` when any check failed.
pub fn run_selftest<W: Write>(out: &mut W, opts: SelftestOptions) -> std::io::Result<bool> {
    let results = selftest::run(opts);
    for r in &results {
        writeln!(out, "{r}")?;
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if failed.is_empty() {
        writeln!(out, "selftest: all {} checks passed", results.len())?;
    } else {
        writeln!(out, "selftest: failed: {}", failed.join(", "))?;
    }
    Ok(failed.is_empty())
}
