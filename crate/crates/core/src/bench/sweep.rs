//! `C_S × C_T` sensitivity sweep of one EDA variant.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{BenchConfig, Method};
use super::metrics::mean_std;
use super::runner::{SeedContext, SplitMaker};
use crate::data::write_all;
use crate::error::{EdaError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub c_s: f64,
    pub c_t: f64,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub method: Method,
    pub config_hash: String,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    /// Largest spread (max − min of the mean metric) over `C_T ≥ c_t_min`,
    /// taken separately for every `C_S ≤ c_s_max`.
    pub fn max_spread(&self, c_s_max: f64, c_t_min: f64) -> f64 {
        let mut c_s_values: Vec<f64> = self.cells.iter().map(|c| c.c_s).filter(|&c| c <= c_s_max).collect();
        c_s_values.dedup();
        c_s_values
            .into_iter()
            .map(|c_s| {
                let means: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|c| c.c_s == c_s && c.c_t >= c_t_min)
                    .map(|c| c.mean)
                    .collect();
                let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
                if means.is_empty() {
                    0.0
                } else {
                    hi - lo
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("c_s,c_t,mean,std,values\n");
        for c in &self.cells {
            let values: Vec<String> = c.values.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{},{},{},{},{}", c.c_s, c.c_t, c.mean, c.std, values.join(";"));
        }
        out
    }
}

/// Mean metric of `method` over the config's seeds at every grid pair.
pub fn run_sweep(cfg: &BenchConfig, method: Method) -> Result<SweepReport> {
    cfg.validate()?;
    if !method.is_eda() || method == Method::MvEda {
        return Err(EdaError::Parameter(format!("sweep needs a single-view EDA method, got {method}")));
    }
    let single_view = BenchConfig {
        methods: vec![method],
        ..cfg.clone()
    };
    let maker = SplitMaker::new(&single_view)?;
    let pairs: Vec<(f64, f64)> = cfg
        .c_grid
        .iter()
        .flat_map(|&s| cfg.c_grid.iter().map(move |&t| (s, t)))
        .collect();
    let mut per_pair: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.seeds.len()); pairs.len()];
    for &seed in &cfg.seeds {
        let ctx = SeedContext::new(&single_view, maker.split(seed)?, seed)?;
        for (slot, v) in per_pair.iter_mut().zip(ctx.eda_grid(method, &pairs)?) {
            slot.push(v);
        }
    }
    let cells = pairs
        .into_iter()
        .zip(per_pair)
        .map(|((c_s, c_t), values)| {
            let (mean, std) = mean_std(&values);
            SweepCell { c_s, c_t, mean, std, values }
        })
        .collect();
    Ok(SweepReport {
        method,
        config_hash: cfg.hash()?,
        cells,
    })
}

pub fn emit_sweep(report: &SweepReport, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| EdaError::io(dir, e))?;
    let path = dir.join(format!("sweep-{}_{}.csv", &report.config_hash[..12], report.method.name()));
    write_all(&path, report.to_csv().as_bytes())?;
    Ok(path)
}
