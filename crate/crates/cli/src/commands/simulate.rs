use std::path::PathBuf;

use clap::Args;
use fodkit::experiment::{metrics_table, run_synthetic_experiment, ExperimentSuite, MetricsReport, METRICS_CSV_HEADER};

use super::{read_text, thread_pool, write_text};
use crate::error::CliResult;

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Experiment suite: TOML `[[setting]]` tables or JSON `{"setting": [...]}`.
    pub config: PathBuf,
    /// Metrics CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces the seed of every setting.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Also print the human-readable table to standard error.
    #[arg(long)]
    pub table: bool,
}

/// Runs every setting in file order and returns the metrics CSV text, one row
/// per (setting, estimator). Timing is left out so reruns are byte-identical.
pub fn simulate(args: &SimulateArgs) -> CliResult<(String, Vec<MetricsReport>)> {
    let mut suite = ExperimentSuite::parse(&read_text(&args.config)?)?;
    if let Some(seed) = args.seed {
        suite.settings.iter_mut().for_each(|s| s.seed = seed);
    }
    let pool = thread_pool(args.threads)?;
    let mut reports = Vec::new();
    for setting in &suite.settings {
        reports.extend(pool.install(|| run_synthetic_experiment(setting))?);
    }
    let mut csv = format!("{METRICS_CSV_HEADER}\n");
    for r in &reports {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
    }
    Ok((csv, reports))
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let (csv, reports) = simulate(args)?;
    if args.table {
        eprint!("{}", metrics_table(&reports));
    }
    match &args.out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
