#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fodkit::experiment::gradient_design;
use fodkit::model::{add_rician_noise_with, noise_rng, synthesize_signal, FiberConfiguration, KernelParams};
use fodkit::sphere::{Direction, GradientTable};
use fodkit_cli::volume::VolumeStack;

pub const B: f64 = 3000.0;
pub const B0_FRAMES: usize = 6;

pub fn fiber() -> Direction {
    Direction::normalize(0.36, 0.48, 0.8).unwrap()
}

/// Single-tensor kernel diag(1.9e−3, 2e−4, 2e−4).
pub fn tensor_kernel(s0: f64) -> KernelParams {
    KernelParams::new(1.9e-3, 2e-4, B, s0).unwrap()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub gradients: GradientTable,
    pub dims: [usize; 3],
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn data(&self) -> PathBuf {
        self.path("dwi.raw")
    }

    pub fn bvecs(&self) -> PathBuf {
        self.path("bvecs")
    }

    pub fn bvals(&self) -> PathBuf {
        self.path("bvals")
    }

    pub fn frames(&self) -> usize {
        B0_FRAMES + self.gradients.len()
    }
}

/// Writes bvecs/bvals (b0 frames first) and a raw volume where voxel `v` holds
/// `series(v)`.
pub fn write_fixture(dims: [usize; 3], mut series: impl FnMut(usize, &GradientTable) -> Vec<f64>) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let gradients = gradient_design(91, B).unwrap();
    let mut bvecs = [String::new(), String::new(), String::new()];
    let mut bvals = String::new();
    let zero = Direction::Z;
    let entries = std::iter::repeat_n((zero, 0.0), B0_FRAMES).chain(gradients.directions().iter().map(|d| (*d, B)));
    for (i, (d, b)) in entries.enumerate() {
        let sep = if i == 0 { "" } else { " " };
        let v = if b == 0.0 { [0.0; 3] } else { [d.x(), d.y(), d.z()] };
        for k in 0..3 {
            bvecs[k].push_str(&format!("{sep}{:.17}", v[k]));
        }
        bvals.push_str(&format!("{sep}{b}"));
    }
    std::fs::write(dir.path().join("bvecs"), bvecs.join("\n") + "\n").unwrap();
    std::fs::write(dir.path().join("bvals"), bvals + "\n").unwrap();

    let n_vox: usize = dims.iter().product();
    let frames = B0_FRAMES + gradients.len();
    let mut data = vec![0f32; n_vox * frames];
    for v in 0..n_vox {
        for (f, value) in series(v, &gradients).into_iter().enumerate() {
            data[v + f * n_vox] = value as f32;
        }
    }
    VolumeStack::new(dims, [1.25; 3], frames, data).unwrap().write_raw(&dir.path().join("dwi.raw")).unwrap();
    Fixture { dir, gradients, dims }
}

/// b0 frames at `s0` followed by the single-fiber signal, optionally with Rician noise.
pub fn single_fiber_series(s0: f64, gradients: &GradientTable, noise: Option<(u64, u64, f64)>) -> Vec<f64> {
    let fibers = FiberConfiguration::equal(vec![fiber()]).unwrap();
    let clean = synthesize_signal(&fibers, &tensor_kernel(s0), gradients);
    let dw = match noise {
        Some((seed, stream, snr)) => add_rician_noise_with(&clean, s0, snr, &mut noise_rng(seed, stream)).unwrap(),
        None => clean,
    };
    std::iter::repeat_n(s0, B0_FRAMES).chain(dw).collect()
}

pub fn write_mask(path: &Path, dims: [usize; 3], inside: impl Fn(usize) -> bool) {
    let n: usize = dims.iter().product();
    let data = (0..n).map(|i| if inside(i) { 1.0 } else { 0.0 }).collect();
    VolumeStack::new(dims, [1.25; 3], 1, data).unwrap().write_raw(path).unwrap();
}

pub fn fodkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fodkit")).args(args).output().expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
