//! 4-D signal volumes and 3-D masks.
//!
//! Two on-disk forms are read:
//!
//! * raw: a little-endian `f32` array with a JSON sidecar at `<path>.json`
//!   holding `{"dims": [nx, ny, nz], "voxel_size": [dx, dy, dz], "frame_count": k}`;
//! * NIfTI-1 single files (`.nii`, optionally gzipped as `.nii.gz`).
//!
//! Both store x fastest, then y, z and frame.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::nifti;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSidecar {
    pub dims: [usize; 3],
    #[serde(default = "unit_voxels")]
    pub voxel_size: [f64; 3],
    pub frame_count: usize,
}

fn unit_voxels() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeStack {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub frames: usize,
    data: Vec<f32>,
}

impl VolumeStack {
    pub fn new(dims: [usize; 3], voxel_size: [f64; 3], frames: usize, data: Vec<f32>) -> CliResult<Self> {
        let expected = dims.iter().product::<usize>() * frames;
        if data.len() != expected {
            return Err(CliError::ShapeMismatch(format!(
                "{} values for dims {dims:?} × {frames} frames (expected {expected})",
                data.len()
            )));
        }
        Ok(Self { dims, voxel_size, frames, data })
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// All frames of one voxel, in frame order.
    pub fn series(&self, voxel: usize) -> Vec<f64> {
        let stride = self.voxel_count();
        (0..self.frames).map(|f| self.data[voxel + f * stride] as f64).collect()
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }

    /// Reads a NIfTI-1 file (by extension) or a raw array with its sidecar.
    pub fn read(path: &Path) -> CliResult<Self> {
        if nifti::is_nifti_path(path) {
            let image = nifti::read(path)?;
            let [nx, ny, nz, nt] = image.dims;
            return Self::new([nx, ny, nz], image.voxel_size, nt, image.data);
        }
        let sidecar_path = sidecar_path(path);
        let text = fs::read_to_string(&sidecar_path).map_err(|e| CliError::io(&sidecar_path, e))?;
        let sidecar: RawSidecar =
            serde_json::from_str(&text).map_err(|e| CliError::format(&sidecar_path, e.to_string()))?;
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(CliError::format(path, "raw data length is not a multiple of 4 bytes"));
        }
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Self::new(sidecar.dims, sidecar.voxel_size, sidecar.frame_count, data)
    }

    /// Writes the raw form: data at `path`, sidecar at `<path>.json`.
    pub fn write_raw(&self, path: &Path) -> CliResult<()> {
        let mut bytes = Vec::with_capacity(4 * self.data.len());
        for v in &self.data {
            bytes.write_all(&v.to_le_bytes()).expect("writing to memory");
        }
        fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        let sidecar = RawSidecar { dims: self.dims, voxel_size: self.voxel_size, frame_count: self.frames };
        let sidecar_path = sidecar_path(path);
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        fs::write(&sidecar_path, text).map_err(|e| CliError::io(&sidecar_path, e))
    }
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut name = data.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

/// Boolean brain mask; any nonzero value is inside.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub dims: [usize; 3],
    inside: Vec<bool>,
}

impl Mask {
    pub fn full(dims: [usize; 3]) -> Self {
        Self { dims, inside: vec![true; dims.iter().product()] }
    }

    pub fn from_volume(volume: &VolumeStack) -> CliResult<Self> {
        if volume.frames != 1 {
            return Err(CliError::ShapeMismatch(format!("mask has {} frames, expected 1", volume.frames)));
        }
        Ok(Self { dims: volume.dims, inside: volume.values().iter().map(|v| *v != 0.0).collect() })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Self::from_volume(&VolumeStack::read(path)?)
    }

    /// Linear indices of voxels inside the mask, ascending.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.inside.len()).filter(|&i| self.inside[i]).collect()
    }

    pub fn check_matches(&self, dims: [usize; 3]) -> CliResult<()> {
        if self.dims != dims {
            return Err(CliError::ShapeMismatch(format!("mask dims {:?} differ from data dims {dims:?}", self.dims)));
        }
        Ok(())
    }
}

/// (i, j, k) of a linear voxel index.
pub fn voxel_coordinates(index: usize, dims: [usize; 3]) -> [usize; 3] {
    [index % dims[0], (index / dims[0]) % dims[1], index / (dims[0] * dims[1])]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dwi.raw");
        let data: Vec<f32> = (0..2 * 3 * 4 * 5).map(|i| i as f32 * 0.5).collect();
        let volume = VolumeStack::new([2, 3, 4], [1.25, 1.25, 2.0], 5, data).unwrap();
        volume.write_raw(&path).unwrap();
        assert_eq!(VolumeStack::read(&path).unwrap(), volume);
    }

    #[test]
    fn series_walks_frames() {
        let data: Vec<f32> = (0..8).map(|i| i as f32).collect();
        let volume = VolumeStack::new([2, 2, 1], [1.0; 3], 2, data).unwrap();
        assert_eq!(volume.series(1), vec![1.0, 5.0]);
        assert_eq!(voxel_coordinates(3, [2, 2, 1]), [1, 1, 0]);
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(matches!(VolumeStack::new([2, 2, 2], [1.0; 3], 2, vec![0.0; 15]), Err(CliError::ShapeMismatch(_))));
    }
}
