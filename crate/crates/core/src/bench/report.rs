//! Report assembly and file emission.
//!
//! Every file except the timing CSV is a pure function of the config, so two
//! runs with the same config produce byte-identical output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{BenchConfig, Method};
use crate::data::write_all;
use crate::error::{EdaError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub value: f64,
    /// Best `C_S` (or `C` for the ELM baselines).
    pub c_s: f64,
    pub c_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub best_mean: f64,
    pub best_std: f64,
    pub default_mean: f64,
    pub default_std: f64,
    pub per_seed: Vec<SeedResult>,
    pub default_per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub run_id: String,
    pub iteration: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: String,
    pub seed: u64,
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitRecord {
    pub seed: u64,
    pub split_hash: String,
    pub map_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub config_hash: String,
    pub methods: Vec<MethodSummary>,
    pub convergence: Vec<ConvergenceRow>,
    /// `(run_id, iteration, α)` for multi-view runs.
    pub alpha_trajectories: Vec<(String, usize, Vec<f64>)>,
    pub timings: Vec<TimingRow>,
    pub splits: Vec<SplitRecord>,
}

impl BenchReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub results_csv: PathBuf,
    pub results_txt: PathBuf,
    pub runs_csv: PathBuf,
    pub convergence_csv: PathBuf,
    pub alpha_csv: PathBuf,
    pub splits_csv: PathBuf,
    pub config_toml: PathBuf,
    pub timing_csv: PathBuf,
}

impl ReportFiles {
    /// The files that must be identical across repeated runs.
    pub fn deterministic(&self) -> Vec<&Path> {
        vec![
            &self.results_csv,
            &self.results_txt,
            &self.runs_csv,
            &self.convergence_csv,
            &self.alpha_csv,
            &self.splits_csv,
            &self.config_toml,
        ]
        .into_iter()
        .map(PathBuf::as_path)
        .collect()
    }
}

pub const BEST_COLUMN: &str = "best_on_grid";
pub const DEFAULT_COLUMN: &str = "fixed_default";

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
}

pub fn results_csv(report: &BenchReport) -> String {
    let mut out = String::from("method,column,mean,std,n,values\n");
    for s in &report.methods {
        let best: Vec<f64> = s.per_seed.iter().map(|r| r.value).collect();
        let _ = writeln!(out, "{},{BEST_COLUMN},{},{},{},{}", s.method, s.best_mean, s.best_std, best.len(), join(&best));
        let _ = writeln!(
            out,
            "{},{DEFAULT_COLUMN},{},{},{},{}",
            s.method,
            s.default_mean,
            s.default_std,
            s.default_per_seed.len(),
            join(&s.default_per_seed)
        );
    }
    out
}

/// One parsed row of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub column: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let bad = |line: usize, m: &str| EdaError::Parse {
        path: PathBuf::from("<results csv>"),
        line,
        message: m.to_string(),
    };
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(bad(i + 1, "expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
            let values = if f[5].is_empty() {
                Vec::new()
            } else {
                f[5].split(';').map(num).collect::<Result<Vec<_>>>()?
            };
            Ok(ResultRow {
                method: f[0].to_string(),
                column: f[1].to_string(),
                mean: num(f[2])?,
                std: num(f[3])?,
                values,
            })
        })
        .collect()
}

fn runs_csv(report: &BenchReport) -> String {
    let mut out = String::from("method,seed,best_value,best_c_s,best_c_t,default_value\n");
    for s in &report.methods {
        for (r, d) in s.per_seed.iter().zip(&s.default_per_seed) {
            let c_t = r.c_t.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", s.method, r.seed, r.value, r.c_s, c_t, d);
        }
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("run_id,iteration,objective\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.run_id, r.iteration, r.objective);
    }
    out
}

fn alpha_csv(report: &BenchReport) -> String {
    let mut out = String::from("run_id,iteration,view,alpha\n");
    for (id, it, alphas) in &report.alpha_trajectories {
        for (v, a) in alphas.iter().enumerate() {
            let _ = writeln!(out, "{id},{it},{v},{a}");
        }
    }
    out
}

fn splits_csv(report: &BenchReport) -> String {
    let mut out = String::from("seed,split_hash,map_hash\n");
    for s in &report.splits {
        let _ = writeln!(out, "{},{},{}", s.seed, s.split_hash, s.map_hash);
    }
    out
}

fn timing_csv(report: &BenchReport) -> String {
    let mut out = String::from("method,seed,fit_seconds\n");
    for t in &report.timings {
        let _ = writeln!(out, "{},{},{}", t.method, t.seed, t.fit_seconds);
    }
    out
}

pub fn results_text(report: &BenchReport) -> String {
    let cfg = &report.config;
    let p = &cfg.params;
    let mut out = String::new();
    let _ = writeln!(out, "# EDA benchmark report (config {})", &report.config_hash[..12]);
    let _ = writeln!(
        out,
        "# metric: {:?}; seeds: {:?}; m = {} labeled target per class",
        cfg.metric, cfg.seeds, cfg.m
    );
    let _ = writeln!(
        out,
        "# L = {}, activation = {:?}, gamma = {}, lambda = {}, tau = {}, k = {}, T_max = {}, epsilon = {:e}, r = {}, standardize = {}",
        p.hidden, p.activation, p.gamma, p.lambda, p.tau, p.k, p.t_max, p.epsilon, p.r, p.standardize
    );
    let grid: Vec<String> = cfg.c_grid.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "# C grid (C, C_S, C_T): {{{}}}", grid.join(", "));
    let _ = writeln!(
        out,
        "# splits: seeded random splits per seed, in place of fixed split files"
    );
    let _ = writeln!(
        out,
        "# best-on-grid picks C per seed by test score (optimistic); fixed-default uses C = {}, C_S = {}, C_T = {}",
        cfg.default_c, p.c_s, p.c_t
    );
    let _ = writeln!(out);
    let width = report
        .methods
        .iter()
        .map(|s| s.method.display_name().len())
        .max()
        .unwrap_or(6)
        .max(6);
    let _ = writeln!(out, "{:<width$}  {:>24}  {:>24}", "method", "best-on-grid", "fixed-default");
    for s in &report.methods {
        let best = format!("{:.4} ± {:.4}", s.best_mean, s.best_std);
        let def = format!("{:.4} ± {:.4}", s.default_mean, s.default_std);
        let _ = writeln!(out, "{:<width$}  {:>24}  {:>24}", s.method.display_name(), best, def);
    }
    out
}

/// Writes the report files into `dir`, named from the config hash.
pub fn emit_report(report: &BenchReport, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir).map_err(|e| EdaError::io(dir, e))?;
    let prefix = format!("bench-{}", &report.config_hash[..12]);
    let path = |suffix: &str| dir.join(format!("{prefix}_{suffix}"));
    let files = ReportFiles {
        results_csv: path("results.csv"),
        results_txt: path("results.txt"),
        runs_csv: path("runs.csv"),
        convergence_csv: path("convergence.csv"),
        alpha_csv: path("alpha.csv"),
        splits_csv: path("splits.csv"),
        config_toml: path("config.toml"),
        timing_csv: path("timing.csv"),
    };
    write_all(&files.results_csv, results_csv(report).as_bytes())?;
    write_all(&files.results_txt, results_text(report).as_bytes())?;
    write_all(&files.runs_csv, runs_csv(report).as_bytes())?;
    write_all(&files.convergence_csv, convergence_csv(&report.convergence).as_bytes())?;
    write_all(&files.alpha_csv, alpha_csv(report).as_bytes())?;
    write_all(&files.splits_csv, splits_csv(report).as_bytes())?;
    write_all(&files.config_toml, report.config.to_toml()?.as_bytes())?;
    write_all(&files.timing_csv, timing_csv(report).as_bytes())?;
    Ok(files)
}
