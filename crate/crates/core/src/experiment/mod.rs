//! Synthetic-experiment harness, throughput benchmark, and group statistics.

mod bench;
mod config;
mod runner;
mod stats;

pub use bench::{bench_csv, benchmark_throughput, synthetic_voxels, BenchRecord, BenchSpec, BENCH_CSV_HEADER};
pub use config::{gradient_design, ExperimentConfig, ExperimentSuite};
pub use runner::{metrics_csv, metrics_table, run_synthetic_experiment, MetricsReport, METRICS_CSV_HEADER};
pub use stats::{
    lateralization_score, two_way_anova, AnovaResult, AnovaTerm, ContrastInterval, TermOrder,
};
