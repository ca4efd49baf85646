//! Minimal NIfTI-1 reader: single-file images, either byte order, optional
//! gzip, and the scalar data types a diffusion export typically uses.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{CliError, CliResult};

const HEADER_SIZE: usize = 348;

/// NIfTI-1 datatype codes this reader accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    U8,
    I16,
    I32,
    F32,
    F64,
    U16,
}

impl DataType {
    fn from_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => Self::U8,
            4 => Self::I16,
            8 => Self::I32,
            16 => Self::F32,
            64 => Self::F64,
            512 => Self::U16,
            _ => return None,
        })
    }

    pub fn code(self) -> i16 {
        match self {
            Self::U8 => 2,
            Self::I16 => 4,
            Self::I32 => 8,
            Self::F32 => 16,
            Self::F64 => 64,
            Self::U16 => 512,
        }
    }

    fn width(self) -> usize {
        match self {
            Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NiftiImage {
    /// (nx, ny, nz, nt); missing trailing dimensions are 1.
    pub dims: [usize; 4],
    pub voxel_size: [f64; 3],
    pub datatype: DataType,
    /// Scaled values, x fastest.
    pub data: Vec<f32>,
}

pub fn is_nifti_path(path: &Path) -> bool {
    let name = path.file_name().map(|n| n.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
    name.ends_with(".nii") || name.ends_with(".nii.gz")
}

pub fn read(path: &Path) -> CliResult<NiftiImage> {
    let mut file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| CliError::io(path, e))?;
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut inflated = Vec::new();
        GzDecoder::new(bytes.as_slice()).read_to_end(&mut inflated).map_err(|e| CliError::io(path, e))?;
        bytes = inflated;
    }
    parse(&bytes).map_err(|m| CliError::format(path, m))
}

struct Fields<'a> {
    bytes: &'a [u8],
    little: bool,
}

impl Fields<'_> {
    fn array<const N: usize>(&self, at: usize) -> [u8; N] {
        self.bytes[at..at + N].try_into().expect("offset within header")
    }

    fn i16(&self, at: usize) -> i16 {
        let b = self.array(at);
        if self.little {
            i16::from_le_bytes(b)
        } else {
            i16::from_be_bytes(b)
        }
    }

    fn i32(&self, at: usize) -> i32 {
        let b = self.array(at);
        if self.little {
            i32::from_le_bytes(b)
        } else {
            i32::from_be_bytes(b)
        }
    }

    fn f32(&self, at: usize) -> f32 {
        f32::from_bits(self.i32(at) as u32)
    }
}

/// Parses an uncompressed single-file image held in memory.
pub fn parse(bytes: &[u8]) -> Result<NiftiImage, String> {
    if bytes.len() < HEADER_SIZE {
        return Err(format!("{} bytes is shorter than a NIfTI-1 header", bytes.len()));
    }
    let little = i32::from_le_bytes(bytes[0..4].try_into().unwrap()) == HEADER_SIZE as i32;
    let fields = Fields { bytes, little };
    if fields.i32(0) != HEADER_SIZE as i32 {
        return Err("sizeof_hdr is not 348".into());
    }
    match &bytes[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => return Err("two-file (.hdr/.img) images are not supported".into()),
        _ => return Err("missing NIfTI-1 magic".into()),
    }
    let rank = fields.i16(40);
    if !(1..=4).contains(&rank) {
        return Err(format!("dim[0] = {rank}: only 1-4 dimensional images are supported"));
    }
    let mut dims = [1usize; 4];
    for (k, d) in dims.iter_mut().enumerate().take(rank as usize) {
        let v = fields.i16(42 + 2 * k);
        if v < 1 {
            return Err(format!("dim[{}] = {v} is not positive", k + 1));
        }
        *d = v as usize;
    }
    let code = fields.i16(70);
    let datatype = DataType::from_code(code).ok_or_else(|| format!("unsupported datatype code {code}"))?;
    let voxel_size = [1, 2, 3].map(|k| fields.f32(76 + 4 * k).abs() as f64);
    let offset = fields.f32(108);
    if !(offset >= HEADER_SIZE as f32) {
        return Err(format!("vox_offset {offset} lies inside the header"));
    }
    let offset = offset as usize;
    let (slope, intercept) = (fields.f32(112), fields.f32(116));
    // slope 0 means "unscaled".
    let (slope, intercept) = if slope == 0.0 || !slope.is_finite() { (1.0, 0.0) } else { (slope, intercept) };

    let count: usize = dims.iter().product();
    let width = datatype.width();
    let payload = bytes.get(offset..offset + count * width).ok_or_else(|| {
        format!("data section holds {} bytes, expected {}", bytes.len().saturating_sub(offset), count * width)
    })?;
    let raw = payload.chunks_exact(width).map(|c| decode(c, datatype, little));
    let data = raw.map(|v| (v * slope as f64 + intercept as f64) as f32).collect();
    Ok(NiftiImage { dims, voxel_size, datatype, data })
}

fn decode(c: &[u8], datatype: DataType, little: bool) -> f64 {
    macro_rules! num {
        ($t:ty) => {{
            let b = c.try_into().expect("chunk width matches type");
            (if little { <$t>::from_le_bytes(b) } else { <$t>::from_be_bytes(b) }) as f64
        }};
    }
    match datatype {
        DataType::U8 => c[0] as f64,
        DataType::I16 => num!(i16),
        DataType::U16 => num!(u16),
        DataType::I32 => num!(i32),
        DataType::F32 => num!(f32),
        DataType::F64 => num!(f64),
    }
}
