use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use fodkit::estimators::{EstimatorKind, EstimatorRegistry, FitConfig, FitContext, FodEstimator, ShCoefficients};
use fodkit::model::{estimate_response, KernelParams, ResponseKernel, ResponseSelection};
use fodkit::peaks::{Peak, PeakConfig, PeakDetector};
use fodkit::sphere::{Acquisition, GradientTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_text, thread_pool, write_text, FitOptions};
use crate::error::{CliError, CliResult};
use crate::manifest::{config_hash, RunManifest, SOFTWARE_VERSION};
use crate::volume::{voxel_coordinates, Mask, VolumeStack};

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Diffusion volume: NIfTI-1 (.nii, .nii.gz) or raw f32 with a `.json` sidecar.
    #[arg(long)]
    pub data: PathBuf,
    /// Gradient directions, whitespace-delimited, 3 x N or N x 3.
    #[arg(long)]
    pub bvecs: PathBuf,
    /// b-values, one per frame; frames below 50 s/mm² are the b0 reference.
    #[arg(long)]
    pub bvals: PathBuf,
    /// Brain mask with the data's spatial dims; every voxel is fitted when absent.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Kernel JSON `{lambda_major, lambda_minor, ...}`; estimated from the data when absent.
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "bjs")]
    pub estimator: EstimatorArg,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Recorded in the manifest; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ResponseSelection::default().fa_threshold)]
    pub fa_threshold: f64,
    #[arg(long, default_value_t = ResponseSelection::default().minor_ratio_threshold)]
    pub minor_ratio: f64,
    /// Suppress per-voxel messages on standard error.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EstimatorArg {
    Bjs,
    Shridge,
    Scsd,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(a: EstimatorArg) -> Self {
        match a {
            EstimatorArg::Bjs => EstimatorKind::Bjs,
            EstimatorArg::Shridge => EstimatorKind::Shridge,
            EstimatorArg::Scsd => EstimatorKind::Scsd,
        }
    }
}

/// Outcome of one masked voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VoxelStatus {
    Ok,
    /// Iterative estimator stopped at its cap; the estimate is still written.
    NotConverged,
    /// Mean b0 intensity is zero or negative.
    NoSignal,
    NonFinite,
    FitFailed,
}

impl VoxelStatus {
    pub const ALL: [VoxelStatus; 5] =
        [Self::Ok, Self::NotConverged, Self::NoSignal, Self::NonFinite, Self::FitFailed];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::NotConverged => "not_converged",
            Self::NoSignal => "no_signal",
            Self::NonFinite => "non_finite",
            Self::FitFailed => "fit_failed",
        }
    }

    fn has_estimate(self) -> bool {
        matches!(self, Self::Ok | Self::NotConverged)
    }
}

/// Kernel file contents. Only the diffusivities are required; `b` defaults to the
/// acquisition shell and extra fields written by `response.json` are accepted.
#[derive(Debug, Clone, Deserialize)]
struct KernelFile {
    lambda_major: f64,
    lambda_minor: f64,
    b: Option<f64>,
}

/// Canonical description of a fit run; its hash goes into the manifest.
#[derive(Debug, Clone, Serialize)]
struct FitRunConfig<'a> {
    estimator: EstimatorKind,
    fit: &'a FitConfig,
    peaks: PeakConfig,
    kernel: Option<KernelParams>,
    kernel_source: &'static str,
    response_selection: ResponseSelection,
    seed: u64,
}

struct VoxelInput {
    index: usize,
    s0: f64,
    signal: Vec<f64>,
    status: VoxelStatus,
}

struct VoxelResult {
    index: usize,
    status: VoxelStatus,
    message: String,
    coefficients: Option<ShCoefficients>,
    peaks: Vec<Peak>,
    lambda: Option<f64>,
    iterations: Option<usize>,
}

fn load_kernel(path: &Path, gradients: &GradientTable) -> CliResult<KernelParams> {
    let file: KernelFile =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::format(path, e.to_string()))?;
    let b = file.b.unwrap_or(gradients.b());
    if (b - gradients.b()).abs() > 0.1 * gradients.b() {
        return Err(CliError::InvalidArgument(format!(
            "kernel b = {b} does not match the acquisition shell b = {}",
            gradients.b()
        )));
    }
    // Signals are normalized by b0, so the kernel is evaluated on the acquisition shell with s0 = 1.
    Ok(KernelParams::new(file.lambda_major, file.lambda_minor, gradients.b(), 1.0)?)
}

fn prepare_voxels(volume: &VolumeStack, acq: &Acquisition, indices: &[usize]) -> Vec<VoxelInput> {
    let b0 = acq.b0_indices();
    let dw = acq.dw_indices();
    indices
        .iter()
        .map(|&index| {
            let series = volume.series(index);
            let s0 = b0.iter().map(|&f| series[f]).sum::<f64>() / b0.len() as f64;
            let raw: Vec<f64> = dw.iter().map(|&f| series[f]).collect();
            let status = if !s0.is_finite() || raw.iter().any(|v| !v.is_finite()) {
                VoxelStatus::NonFinite
            } else if s0 <= 0.0 {
                VoxelStatus::NoSignal
            } else {
                VoxelStatus::Ok
            };
            let signal = if status == VoxelStatus::Ok { raw.iter().map(|v| v / s0).collect() } else { raw };
            VoxelInput { index, s0, signal, status }
        })
        .collect()
}

fn fit_voxel(input: &VoxelInput, model: Option<(&dyn FodEstimator, &PeakDetector)>) -> VoxelResult {
    let mut result = VoxelResult {
        index: input.index,
        status: input.status,
        message: String::new(),
        coefficients: None,
        peaks: Vec::new(),
        lambda: None,
        iterations: None,
    };
    if input.status != VoxelStatus::Ok {
        result.message = format!("mean b0 = {}", input.s0);
        return result;
    }
    let (estimator, detector) = model.expect("a kernel exists whenever some voxel is usable");
    let fitted = estimator.fit(&input.signal).and_then(|o| detector.detect(&o.coefficients).map(|p| (o, p)));
    match fitted {
        Ok((outcome, peaks)) => {
            if !outcome.converged {
                result.status = VoxelStatus::NotConverged;
            }
            result.lambda = outcome.lambda;
            result.iterations = outcome.iterations;
            result.coefficients = Some(outcome.coefficients);
            result.peaks = peaks;
        }
        Err(e) => {
            result.status = VoxelStatus::FitFailed;
            result.message = e.to_string();
        }
    }
    result
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn write_outputs(
    out: &Path,
    results: &[VoxelResult],
    dims: [usize; 3],
    estimator: EstimatorKind,
    l_max: usize,
) -> CliResult<()> {
    let mut coeffs = format!("voxel,estimator,l_max{}\n", (0..fodkit::sphere::sh_count(l_max)).fold(
        String::new(),
        |mut s, j| {
            let _ = write!(s, ",c{j}");
            s
        },
    ));
    let mut peaks = String::from("voxel,rank,x,y,z,value\n");
    let mut status = String::from("voxel,i,j,k,status,n_peaks,lambda,iterations,message\n");
    let records_path = out.join("coefficients.fodc");
    let mut records = BufWriter::new(File::create(&records_path).map_err(|e| CliError::io(&records_path, e))?);
    for r in results {
        let [i, j, k] = voxel_coordinates(r.index, dims);
        let lambda = r.lambda.map(|v| format!("{v:e}")).unwrap_or_default();
        let iterations = r.iterations.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            status,
            "{},{i},{j},{k},{},{},{lambda},{iterations},{}",
            r.index,
            r.status.as_str(),
            r.peaks.len(),
            csv_field(&r.message)
        );
        if let Some(c) = r.coefficients.as_ref().filter(|_| r.status.has_estimate()) {
            coeffs.push_str(&c.to_csv_row(r.index, estimator.as_str()));
            coeffs.push('\n');
            c.write_record(&mut records).map_err(|e| CliError::io(&records_path, e))?;
            for p in &r.peaks {
                peaks.push_str(&p.to_csv_row(r.index));
                peaks.push('\n');
            }
        }
    }
    records.flush().map_err(|e| CliError::io(&records_path, e))?;
    write_text(&out.join("coefficients.csv"), &coeffs)?;
    write_text(&out.join("peaks.csv"), &peaks)?;
    write_text(&out.join("voxels.csv"), &status)
}

/// Fits every masked voxel and writes `coefficients.csv`, `coefficients.fodc`,
/// `peaks.csv`, `voxels.csv`, `manifest.json` and (when estimated) `response.json`.
pub fn run(args: &FitArgs) -> CliResult<RunManifest> {
    let start = Instant::now();
    let fit_config = args.fit.fit_config()?;
    let estimator_kind = EstimatorKind::from(args.estimator);
    let acq = Acquisition::parse(&read_text(&args.bvecs)?, &read_text(&args.bvals)?)?;
    let volume = VolumeStack::read(&args.data)?;
    if volume.frames != acq.len() {
        return Err(CliError::ShapeMismatch(format!(
            "volume has {} frames but bvals/bvecs list {}",
            volume.frames,
            acq.len()
        )));
    }
    if acq.b0_indices().is_empty() {
        return Err(CliError::InvalidArgument("no b0 frames to normalize by".into()));
    }
    let gradients = acq.gradient_table()?;
    let mask = match &args.mask {
        Some(path) => Mask::read(path)?,
        None => Mask::full(volume.dims),
    };
    mask.check_matches(volume.dims)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;

    let voxels = prepare_voxels(&volume, &acq, &mask.indices());
    let usable: Vec<&VoxelInput> = voxels.iter().filter(|v| v.status == VoxelStatus::Ok).collect();
    let selection = ResponseSelection { fa_threshold: args.fa_threshold, minor_ratio_threshold: args.minor_ratio };
    let (kernel, kernel_source) = match &args.response {
        Some(path) => (Some(load_kernel(path, &gradients)?), "file"),
        None if usable.is_empty() => (None, "none"),
        None => {
            let samples: Vec<(Vec<f64>, f64)> = usable.iter().map(|v| (v.signal.clone(), 1.0)).collect();
            let kernel = estimate_response(&samples, &gradients, selection)?;
            let described = ResponseKernel::new(kernel, fit_config.l_max_super.max(fit_config.l_max))?;
            let text = serde_json::to_string_pretty(&described).expect("kernel serializes");
            write_text(&args.out.join("response.json"), &(text + "\n"))?;
            (Some(kernel), "estimated")
        }
    };
    let peak_config = PeakConfig::default();
    if !args.quiet {
        eprintln!(
            "fitting {} of {} masked voxels with {estimator_kind}",
            usable.len(),
            voxels.len()
        );
    }

    let results: Vec<VoxelResult> = match kernel {
        Some(kernel) => {
            let ctx = FitContext::new(gradients.clone(), kernel, fit_config.clone());
            let estimator = EstimatorRegistry::default().build(estimator_kind.as_str(), &ctx)?;
            let detector = PeakDetector::new(&ctx.dense, estimator.output_l_max(), peak_config)?;
            let pool = thread_pool(args.threads)?;
            // Indexed parallel collect keeps voxel order whatever the schedule.
            pool.install(|| voxels.par_iter().map(|v| fit_voxel(v, Some((estimator.as_ref(), &detector)))).collect())
        }
        None => voxels.iter().map(|v| fit_voxel(v, None)).collect(),
    };
    if !args.quiet {
        for r in results.iter().filter(|r| !r.status.has_estimate()) {
            eprintln!("voxel {:?}: {}: {}", voxel_coordinates(r.index, volume.dims), r.status.as_str(), r.message);
        }
    }
    let output_l_max = if estimator_kind == EstimatorKind::Shridge { fit_config.l_max } else { fit_config.l_max_super };
    write_outputs(&args.out, &results, volume.dims, estimator_kind, output_l_max)?;

    let mut voxel_status: BTreeMap<String, usize> = VoxelStatus::ALL.iter().map(|s| (s.as_str().to_string(), 0)).collect();
    for r in &results {
        *voxel_status.get_mut(r.status.as_str()).expect("all statuses listed") += 1;
    }
    let run_config = FitRunConfig {
        estimator: estimator_kind,
        fit: &fit_config,
        peaks: peak_config,
        kernel,
        kernel_source,
        response_selection: selection,
        seed: args.seed,
    };
    let mut inputs = BTreeMap::new();
    inputs.insert("data".to_string(), args.data.display().to_string());
    inputs.insert("bvecs".to_string(), args.bvecs.display().to_string());
    inputs.insert("bvals".to_string(), args.bvals.display().to_string());
    if let Some(m) = &args.mask {
        inputs.insert("mask".to_string(), m.display().to_string());
    }
    if let Some(r) = &args.response {
        inputs.insert("response".to_string(), r.display().to_string());
    }
    let manifest = RunManifest {
        command: "fit".into(),
        inputs,
        config_hash: config_hash(&run_config),
        seed: args.seed,
        estimator: estimator_kind.as_str().into(),
        software_version: SOFTWARE_VERSION.into(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        voxel_status,
        config: serde_json::to_value(&run_config).expect("config serializes"),
    };
    manifest.write(&args.out.join("manifest.json"))?;
    if !args.quiet {
        eprintln!("done in {:.2} s: {:?}", manifest.wall_time_seconds, manifest.voxel_status);
    }
    Ok(manifest)
}
