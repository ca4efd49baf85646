use std::path::PathBuf;

use clap::Args;
use fodkit::estimators::EstimatorKind;
use fodkit::experiment::{bench_csv, benchmark_throughput, BenchRecord, BenchSpec};

use super::{write_text, FitOptions};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 10_000)]
    pub voxels: usize,
    /// Parallel run on this many workers in addition to the serial one (1 = serial only).
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Comma-separated subset of bjs, shridge, scsd.
    #[arg(long, value_delimiter = ',', default_value = "bjs,shridge,scsd")]
    pub estimators: Vec<String>,
    #[command(flatten)]
    pub fit: FitOptions,
    #[arg(long, default_value_t = BenchSpec::default().n_gradients)]
    pub n_gradients: usize,
    #[arg(long, default_value_t = BenchSpec::default().b)]
    pub b: f64,
    #[arg(long, default_value_t = BenchSpec::default().snr)]
    pub snr: f64,
    #[arg(long, default_value_t = BenchSpec::default().seed)]
    pub seed: u64,
    /// Timing CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn bench(args: &BenchArgs) -> CliResult<Vec<BenchRecord>> {
    if args.threads == 0 {
        return Err(CliError::InvalidArgument("--threads must be at least 1".into()));
    }
    let estimators: Vec<EstimatorKind> =
        args.estimators.iter().map(|s| s.trim().parse()).collect::<Result<_, _>>()?;
    let spec = BenchSpec { n_gradients: args.n_gradients, b: args.b, snr: args.snr, seed: args.seed, ..BenchSpec::default() };
    let cfg = args.fit.fit_config()?;
    Ok(benchmark_throughput(args.voxels, &cfg, args.threads, &estimators, &spec)?)
}

pub fn run(args: &BenchArgs) -> CliResult<()> {
    let csv = bench_csv(&bench(args)?);
    match &args.out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
