//! Metrics, the method registry, the seeded runner and report files.

mod config;
mod metrics;
mod report;
mod runner;
mod sweep;

pub use config::{BenchConfig, DataSource, Method, Metric};
pub use metrics::{accuracy, average_precision, mean_average_precision, mean_std};
pub use report::{
    convergence_csv, emit_report, parse_results_csv, results_csv, results_text, BenchReport,
    ConvergenceRow, MethodSummary, ReportFiles, ResultRow, SeedResult, SplitRecord, TimingRow,
    BEST_COLUMN, DEFAULT_COLUMN,
};
pub use runner::{hash_bundle, hash_map, method_prelabels, resplit, run_benchmark, run_method, MethodRun, SeedContext, SplitMaker};
pub use sweep::{emit_sweep, run_sweep, SweepCell, SweepReport};
