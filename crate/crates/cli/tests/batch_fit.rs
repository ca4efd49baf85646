mod common;

use std::fs;

use clap::Parser;
use common::*;
use fodkit::estimators::ShCoefficients;
use fodkit::sphere::{acute_angle_deg, Direction};
use fodkit_cli::commands::fit::{self, FitArgs};
use fodkit_cli::{Cli, Command};

fn fit_args(fx: &Fixture, out: &str, extra: &[&str]) -> FitArgs {
    let mut argv: Vec<String> = ["fodkit", "fit", "--quiet"].map(String::from).to_vec();
    for (flag, path) in [("--data", fx.data()), ("--bvecs", fx.bvecs()), ("--bvals", fx.bvals()), ("--out", fx.path(out))] {
        argv.push(flag.into());
        argv.push(path.display().to_string());
    }
    argv.extend(extra.iter().map(|s| s.to_string()));
    match Cli::try_parse_from(argv).unwrap().command {
        Command::Fit(args) => args,
        other => panic!("parsed {other:?}"),
    }
}

fn write_kernel(fx: &Fixture) -> std::path::PathBuf {
    let kernel = fx.path("kernel.json");
    fs::write(&kernel, r#"{"lambda_major": 1.9e-3, "lambda_minor": 2e-4}"#).unwrap();
    kernel
}

fn peak_rows(text: &str) -> Vec<(usize, Direction)> {
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let v: Vec<f64> = f[2..5].iter().map(|s| s.parse().unwrap()).collect();
            (f[0].parse().unwrap(), Direction::normalize(v[0], v[1], v[2]).unwrap())
        })
        .collect()
}

#[test]
fn identical_single_fiber_voxels_give_one_peak_each() {
    let dims = [10, 10, 10];
    let fx = write_fixture(dims, |_, g| single_fiber_series(800.0, g, None));
    let mask = fx.path("mask.raw");
    write_mask(&mask, dims, |_| true);
    let manifest = fit::run(&fit_args(&fx, "out", &["--mask", path_str(&mask), "--threads", "2"])).unwrap();
    assert_eq!(manifest.voxel_status["ok"], 1000);
    assert_eq!(manifest.voxel_status.values().sum::<usize>(), 1000);

    let out = fx.path("out");
    let peaks = peak_rows(&fs::read_to_string(out.join("peaks.csv")).unwrap());
    assert_eq!(peaks.len(), 1000, "exactly one peak per voxel");
    for (voxel, (index, d)) in peaks.iter().enumerate() {
        assert_eq!(*index, voxel);
        assert!(acute_angle_deg(d, &fiber()) <= 2.0, "voxel {voxel}: {}°", acute_angle_deg(d, &fiber()));
    }

    // Every voxel passes the FA filter with the same tensor, so the medians are that tensor.
    let response: serde_json::Value = serde_json::from_slice(&fs::read(out.join("response.json")).unwrap()).unwrap();
    let major = response["lambda_major"].as_f64().unwrap();
    let minor = response["lambda_minor"].as_f64().unwrap();
    assert!((major / 1.9e-3 - 1.0).abs() < 1e-5, "{major}");
    assert!((minor / 2e-4 - 1.0).abs() < 1e-4, "{minor}");

    // Binary records mirror the CSV rows.
    let csv = fs::read_to_string(out.join("coefficients.csv")).unwrap();
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').skip(3).map(|s| s.parse().unwrap()).collect();
    let bytes = fs::read(out.join("coefficients.fodc")).unwrap();
    let mut reader = bytes.as_slice();
    let record = ShCoefficients::read_record(&mut reader).unwrap();
    assert_eq!(record.values(), first.as_slice());
    let mut count = 1;
    while !reader.is_empty() {
        ShCoefficients::read_record(&mut reader).unwrap();
        count += 1;
    }
    assert_eq!(count, 1000);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dims = [3, 3, 2];
    let fx = write_fixture(dims, |v, g| single_fiber_series(500.0, g, Some((5, v as u64, 20.0))));
    let kernel = write_kernel(&fx);
    for (out, threads) in [("one", "1"), ("three", "3"), ("again", "3")] {
        fit::run(&fit_args(&fx, out, &["--threads", threads, "--estimator", "scsd", "--response", path_str(&kernel)]))
            .unwrap();
    }
    for name in ["coefficients.csv", "coefficients.fodc", "peaks.csv", "voxels.csv"] {
        let reference = fs::read(fx.path("one").join(name)).unwrap();
        assert_eq!(reference, fs::read(fx.path("three").join(name)).unwrap(), "{name}");
        assert_eq!(reference, fs::read(fx.path("again").join(name)).unwrap(), "{name}");
    }
    let hash = |dir: &str| {
        let m: serde_json::Value = serde_json::from_slice(&fs::read(fx.path(dir).join("manifest.json")).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash("one"), hash("three"));
}

#[test]
fn bad_voxels_are_recorded_not_fatal() {
    let dims = [2, 2, 1];
    let fx = write_fixture(dims, |v, g| {
        let mut s = single_fiber_series(600.0, g, Some((9, v as u64, 30.0)));
        match v {
            1 => s.iter_mut().for_each(|x| *x = 0.0),
            2 => s[B0_FRAMES + 3] = f64::NAN,
            _ => {}
        }
        s
    });
    let kernel = write_kernel(&fx);
    let manifest = fit::run(&fit_args(&fx, "out", &["--response", path_str(&kernel)])).unwrap();
    assert_eq!(manifest.voxel_status["ok"], 2);
    assert_eq!(manifest.voxel_status["no_signal"], 1);
    assert_eq!(manifest.voxel_status["non_finite"], 1);
    assert_eq!(manifest.config["kernel_source"], "file");
    let status = fs::read_to_string(fx.path("out").join("voxels.csv")).unwrap();
    let statuses: Vec<&str> = status.lines().skip(1).map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(statuses, ["ok", "no_signal", "non_finite", "ok"]);
    let coefficient_rows = fs::read_to_string(fx.path("out").join("coefficients.csv")).unwrap().lines().count() - 1;
    assert_eq!(coefficient_rows, 2);
    assert!(!fx.path("out").join("response.json").exists());
}

#[test]
fn empty_mask_is_a_successful_empty_run() {
    let dims = [3, 2, 2];
    let fx = write_fixture(dims, |_, g| single_fiber_series(700.0, g, None));
    let mask = fx.path("mask.raw");
    write_mask(&mask, dims, |_| false);
    let out = fx.path("out");
    let run = fodkit(&[
        "fit",
        "--data",
        path_str(&fx.data()),
        "--bvecs",
        path_str(&fx.bvecs()),
        "--bvals",
        path_str(&fx.bvals()),
        "--mask",
        path_str(&mask),
        "--out",
        path_str(&out),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(run.stdout.is_empty(), "data goes to files only");
    for name in ["coefficients.csv", "peaks.csv", "voxels.csv"] {
        assert_eq!(fs::read_to_string(out.join(name)).unwrap().lines().count(), 1, "{name} holds only its header");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let total: u64 = manifest["voxel_status"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 0);
}

#[test]
fn oversized_mask_fails_with_shape_mismatch() {
    let fx = write_fixture([3, 3, 3], |_, g| single_fiber_series(700.0, g, None));
    let mask = fx.path("mask.raw");
    write_mask(&mask, [4, 3, 3], |_| true);
    let run = fodkit(&[
        "fit",
        "--data",
        path_str(&fx.data()),
        "--bvecs",
        path_str(&fx.bvecs()),
        "--bvals",
        path_str(&fx.bvals()),
        "--mask",
        path_str(&mask),
        "--out",
        path_str(&fx.path("out")),
    ]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("shape mismatch"));
}

#[test]
fn frame_count_must_match_the_gradient_files() {
    let fx = write_fixture([2, 1, 1], |_, g| single_fiber_series(700.0, g, None));
    let truncated = fs::read_to_string(fx.bvals()).unwrap().replacen("0 ", "", 1);
    fs::write(fx.bvals(), truncated).unwrap();
    let bvecs = fs::read_to_string(fx.bvecs()).unwrap();
    let trimmed: Vec<String> =
        bvecs.lines().map(|l| l.split(' ').skip(1).collect::<Vec<_>>().join(" ")).collect();
    fs::write(fx.bvecs(), trimmed.join("\n")).unwrap();
    let err = fit::run(&fit_args(&fx, "out", &[])).unwrap_err();
    assert!(err.to_string().contains("frames"), "{err}");
}

/// Gzipped NIfTI-1 input yields the same estimates as the equivalent raw input.
#[test]
fn gzipped_nifti_matches_raw_input() {
    use std::io::Write;

    let dims = [2, 2, 1];
    let fx = write_fixture(dims, |v, g| single_fiber_series(900.0, g, Some((3, v as u64, 25.0))));
    let volume = fodkit_cli::volume::VolumeStack::read(&fx.data()).unwrap();

    let mut header = vec![0u8; 352];
    header[0..4].copy_from_slice(&348i32.to_le_bytes());
    for (k, d) in [4i16, 2, 2, 1, volume.frames as i16].iter().enumerate() {
        header[40 + 2 * k..42 + 2 * k].copy_from_slice(&d.to_le_bytes());
    }
    header[70..72].copy_from_slice(&16i16.to_le_bytes());
    header[72..74].copy_from_slice(&32i16.to_le_bytes());
    header[108..112].copy_from_slice(&352f32.to_le_bytes());
    header[344..348].copy_from_slice(b"n+1\0");
    for v in volume.values() {
        header.extend(v.to_le_bytes());
    }
    let nifti = fx.path("dwi.nii.gz");
    let mut gz = flate2_writer(fs::File::create(&nifti).unwrap());
    gz.write_all(&header).unwrap();
    gz.finish().unwrap();

    let kernel = write_kernel(&fx);
    let raw = fit::run(&fit_args(&fx, "raw", &["--response", path_str(&kernel)])).unwrap();
    let mut args = fit_args(&fx, "nifti", &["--response", path_str(&kernel)]);
    args.data = nifti;
    let from_nifti = fit::run(&args).unwrap();
    assert_eq!(raw.config_hash, from_nifti.config_hash);
    for name in ["coefficients.csv", "peaks.csv"] {
        assert_eq!(fs::read(fx.path("raw").join(name)).unwrap(), fs::read(fx.path("nifti").join(name)).unwrap());
    }
}

fn flate2_writer(file: fs::File) -> flate2::write::GzEncoder<fs::File> {
    flate2::write::GzEncoder::new(file, flate2::Compression::default())
}
