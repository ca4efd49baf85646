use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::estimators::{EstimatorKind, EstimatorRegistry, FitContext, FodEstimator};
use crate::model::{add_rician_noise_with, noise_rng, synthesize_signal};
use crate::peaks::{match_peaks, PeakDetector, PeakMatch};
use crate::sphere::{acute_angle_deg, dense_grid, Direction};

/// Accuracy summary of one estimator on one setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub label: String,
    pub estimator: EstimatorKind,
    pub n_gradients: usize,
    pub replicates: usize,
    pub n_correct: usize,
    /// Fits that returned an error; they count as detection failures.
    pub failures: usize,
    pub detection_rate: f64,
    pub mean_sep: Option<f64>,
    pub bias_sep: Option<f64>,
    pub bias_sep_se: Option<f64>,
    /// Per fiber pair (1-2, 1-3, 2-3) separation bias, three-fiber settings only.
    pub pair_bias: Vec<f64>,
    pub rmsae: Option<f64>,
    /// Not part of the CSV, which must be reproducible.
    #[serde(skip)]
    pub wall_time_per_voxel: f64,
}

/// Result of one estimator on one replicate.
#[derive(Debug, Clone)]
struct ReplicateOutcome {
    failed: bool,
    /// Matched estimated directions in truth order, when the count was right.
    matched: Option<Vec<Direction>>,
    angles: Vec<f64>,
    elapsed: Duration,
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j));
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

fn summarize(
    cfg: &ExperimentConfig,
    estimator: EstimatorKind,
    n_gradients: usize,
    truth: &[Direction],
    outcomes: &[ReplicateOutcome],
) -> MetricsReport {
    let correct: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.matched.is_some()).collect();
    let n_correct = correct.len();
    let true_pairs = pairs(truth.len());
    let true_sep: Vec<f64> = true_pairs.iter().map(|&(i, j)| acute_angle_deg(&truth[i], &truth[j])).collect();

    // Separation angles per correct replicate, one per fiber pair.
    let seps: Vec<Vec<f64>> = correct
        .iter()
        .map(|o| {
            let m = o.matched.as_ref().expect("filtered");
            true_pairs.iter().map(|&(i, j)| acute_angle_deg(&m[i], &m[j])).collect()
        })
        .collect();

    let (mut mean_sep, mut bias_sep, mut bias_sep_se, mut pair_bias) = (None, None, None, Vec::new());
    if !true_pairs.is_empty() && n_correct > 0 {
        let all_pairs: Vec<f64> = seps.iter().flatten().copied().collect();
        let true_mean = mean(&true_sep);
        let m = mean(&all_pairs);
        mean_sep = Some(m);
        bias_sep = Some(m - true_mean);
        let per_rep: Vec<f64> = seps.iter().map(|s| mean(s)).collect();
        bias_sep_se = sample_sd(&per_rep).map(|sd| sd / (n_correct as f64).sqrt());
        if truth.len() == 3 {
            pair_bias = (0..true_pairs.len())
                .map(|p| mean(&seps.iter().map(|s| s[p]).collect::<Vec<_>>()) - true_sep[p])
                .collect();
        }
    }
    let rmsae = (n_correct > 0).then(|| {
        let sq: Vec<f64> = correct.iter().flat_map(|o| o.angles.iter().map(|a| a * a)).collect();
        mean(&sq).sqrt()
    });
    let total_time: f64 = outcomes.iter().map(|o| o.elapsed.as_secs_f64()).sum();
    MetricsReport {
        label: cfg.label.clone(),
        estimator,
        n_gradients,
        replicates: outcomes.len(),
        n_correct,
        failures: outcomes.iter().filter(|o| o.failed).count(),
        detection_rate: n_correct as f64 / outcomes.len() as f64,
        mean_sep,
        bias_sep,
        bias_sep_se,
        pair_bias,
        rmsae,
        wall_time_per_voxel: total_time / outcomes.len() as f64,
    }
}

fn evaluate_one(
    estimator: &dyn FodEstimator,
    detector: &PeakDetector,
    signal: &[f64],
    truth: &[Direction],
) -> ReplicateOutcome {
    let start = Instant::now();
    let fit = estimator.fit(signal);
    let elapsed = start.elapsed();
    let peaks = fit.and_then(|f| detector.detect(&f.coefficients));
    match peaks {
        Err(_) => ReplicateOutcome { failed: true, matched: None, angles: Vec::new(), elapsed },
        Ok(peaks) => {
            let dirs: Vec<Direction> = peaks.iter().map(|p| p.direction).collect();
            match match_peaks(&dirs, truth) {
                PeakMatch::Matched(pairs) => ReplicateOutcome {
                    failed: false,
                    matched: Some(pairs.iter().map(|p| dirs[p.estimate_index]).collect()),
                    angles: pairs.iter().map(|p| p.angle_deg).collect(),
                    elapsed,
                },
                PeakMatch::CountMismatch { .. } => {
                    ReplicateOutcome { failed: false, matched: None, angles: Vec::new(), elapsed }
                }
            }
        }
    }
}

/// Simulates `cfg.replicates` noisy voxels and scores every requested estimator
/// on the same noise draws. Replicate `i` uses noise stream `i` under `cfg.seed`,
/// so the result does not depend on scheduling or thread count.
pub fn run_synthetic_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsReport>> {
    cfg.validate()?;
    let mut gradients = cfg.gradient_design()?;
    let mut fibers = cfg.fiber_configuration()?;
    if let Some(m) = &cfg.rotation {
        gradients = gradients.rotated(m);
        fibers = fibers.rotated(m);
    }
    let kernel = cfg.kernel()?;
    let ctx = FitContext::new(gradients.clone(), kernel, cfg.fit_config());
    let registry = EstimatorRegistry::default();
    let estimators: Vec<Box<dyn FodEstimator>> =
        cfg.estimators.iter().map(|k| registry.build(k.as_str(), &ctx)).collect::<Result<_>>()?;
    let grid = dense_grid();
    let detectors: Vec<PeakDetector> = estimators
        .iter()
        .map(|e| PeakDetector::new(&grid, e.output_l_max(), cfg.peaks))
        .collect::<Result<_>>()?;
    let clean = synthesize_signal(&fibers, &kernel, &gradients);
    let truth = fibers.directions().to_vec();

    let per_replicate: Vec<Vec<ReplicateOutcome>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = noise_rng(cfg.seed, rep as u64);
            let signal = add_rician_noise_with(&clean, kernel.s0, cfg.snr, &mut rng).expect("snr validated");
            estimators
                .iter()
                .zip(&detectors)
                .map(|(e, d)| evaluate_one(e.as_ref(), d, &signal, &truth))
                .collect()
        })
        .collect();

    Ok(cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(k, kind)| {
            let outcomes: Vec<ReplicateOutcome> = per_replicate.iter().map(|r| r[k].clone()).collect();
            summarize(cfg, *kind, gradients.len(), &truth, &outcomes)
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub const METRICS_CSV_HEADER: &str =
    "label,estimator,n_gradients,replicates,n_correct,failures,detection_rate,mean_sep,bias_sep,bias_sep_se,bias_sep1,bias_sep2,bias_sep3,rmsae";

impl MetricsReport {
    pub fn to_csv_row(&self) -> String {
        let pb = |i: usize| self.pair_bias.get(i).map(|v| format!("{v:.4}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{:.4},{},{},{},{},{},{},{}",
            self.label,
            self.estimator,
            self.n_gradients,
            self.replicates,
            self.n_correct,
            self.failures,
            self.detection_rate,
            fmt_opt(self.mean_sep),
            fmt_opt(self.bias_sep),
            fmt_opt(self.bias_sep_se),
            pb(0),
            pb(1),
            pb(2),
            fmt_opt(self.rmsae)
        )
    }
}

pub fn metrics_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

/// Fixed-width table with columns D.R., Bias.Sep (s.e.), RMSAE.
pub fn metrics_table(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<20} {:<8} {:>4} {:>7} {:>18} {:>8} {:>12}", "setting", "method", "n", "D.R.", "Bias.Sep (s.e.)", "RMSAE", "s/voxel");
    for r in reports {
        let bias = match (r.bias_sep, r.bias_sep_se) {
            (Some(b), Some(se)) => format!("{b:.2} ({se:.2})"),
            (Some(b), None) => format!("{b:.2} (-)"),
            _ => "-".to_string(),
        };
        let rmsae = r.rmsae.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<20} {:<8} {:>4} {:>6.0}% {:>18} {:>8} {:>12.3e}",
            r.label,
            r.estimator.label(),
            r.n_gradients,
            100.0 * r.detection_rate,
            bias,
            rmsae,
            r.wall_time_per_voxel
        );
    }
    out
}
