use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::gradient_design;
use crate::error::{FodError, Result};
use crate::estimators::{EstimatorKind, EstimatorRegistry, FitConfig, FitContext, FodEstimator};
use crate::model::{add_rician_noise_with, noise_rng, synthesize_signal, FiberConfiguration, KernelParams};
use crate::sphere::{Direction, GradientTable};

/// Acquisition and voxel population for throughput measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSpec {
    pub n_gradients: usize,
    pub b: f64,
    pub snr: f64,
    pub seed: u64,
    pub kernel: KernelParams,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            n_gradients: 91,
            b: 3000.0,
            snr: 50.0,
            seed: 7,
            kernel: KernelParams { lambda_major: 1.7e-3, lambda_minor: 3e-4, b: 3000.0, s0: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub estimator: EstimatorKind,
    pub n_voxels: usize,
    /// 1 for the serial run.
    pub threads: usize,
    pub seconds: f64,
    pub failures: usize,
}

/// Random two-fiber voxels with uniformly drawn directions and weight split.
pub fn synthetic_voxels(n_voxels: usize, gradients: &GradientTable, spec: &BenchSpec) -> Result<Vec<Vec<f64>>> {
    let kernel = KernelParams { b: gradients.b(), ..spec.kernel };
    (0..n_voxels)
        .map(|i| {
            let mut rng = noise_rng(spec.seed, i as u64);
            let mut draw = || loop {
                let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                if n2 > 1e-6 && n2 <= 1.0 {
                    break Direction::normalize(v[0], v[1], v[2]).expect("nonzero");
                }
            };
            let (a, b) = (draw(), draw());
            let w: f64 = rng.random_range(0.3..0.7);
            let fibers = FiberConfiguration::new(vec![a, b], vec![w, 1.0 - w])?;
            let clean = synthesize_signal(&fibers, &kernel, gradients);
            add_rician_noise_with(&clean, kernel.s0, spec.snr, &mut rng)
        })
        .collect()
}

fn time_serial(estimator: &dyn FodEstimator, voxels: &[Vec<f64>]) -> (f64, usize) {
    let start = Instant::now();
    let failures = voxels.iter().filter(|v| estimator.fit(v).is_err()).count();
    (start.elapsed().as_secs_f64(), failures)
}

fn time_parallel(estimator: &dyn FodEstimator, voxels: &[Vec<f64>], threads: usize) -> Result<(f64, usize)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| FodError::InvalidParameter(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let failures = pool.install(|| voxels.par_iter().filter(|v| estimator.fit(v).is_err()).count());
    Ok((start.elapsed().as_secs_f64(), failures))
}

/// Wall time to fit `n_voxels` synthetic voxels with each estimator, serially
/// and (when `threads > 1`) on a pool of `threads` workers. Design-level
/// precomputation is built before the clock starts.
pub fn benchmark_throughput(
    n_voxels: usize,
    cfg: &FitConfig,
    threads: usize,
    estimators: &[EstimatorKind],
    spec: &BenchSpec,
) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let gradients = gradient_design(spec.n_gradients, spec.b)?;
    let voxels = synthetic_voxels(n_voxels, &gradients, spec)?;
    let kernel = KernelParams { b: spec.b, ..spec.kernel };
    let ctx = FitContext::new(gradients, kernel, cfg.clone());
    let registry = EstimatorRegistry::default();
    let mut records = Vec::new();
    for kind in estimators {
        let estimator = registry.build(kind.as_str(), &ctx)?;
        let (seconds, failures) = time_serial(estimator.as_ref(), &voxels);
        records.push(BenchRecord { estimator: *kind, n_voxels, threads: 1, seconds, failures });
        if threads > 1 {
            let (seconds, failures) = time_parallel(estimator.as_ref(), &voxels, threads)?;
            records.push(BenchRecord { estimator: *kind, n_voxels, threads, seconds, failures });
        }
    }
    Ok(records)
}

pub const BENCH_CSV_HEADER: &str = "estimator,n_voxels,threads,seconds,seconds_per_voxel,failures";

pub fn bench_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6e},{}\n",
            r.estimator,
            r.n_voxels,
            r.threads,
            r.seconds,
            r.seconds / r.n_voxels.max(1) as f64,
            r.failures
        ));
    }
    out
}
