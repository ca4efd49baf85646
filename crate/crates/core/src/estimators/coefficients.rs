use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{FodError, Result};
use crate::sphere::{check_even, sh_count, LevelBlockIndex, ShBasisMatrix};

/// Magic bytes opening every binary coefficient record.
pub const FODC_MAGIC: [u8; 4] = *b"FODC";
pub const FODC_VERSION: u16 = 1;

/// Even-degree SH coefficients of an FOD in basis column order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoefficients {
    values: Vec<f64>,
    l_max: usize,
}

impl ShCoefficients {
    pub fn new(values: Vec<f64>, l_max: usize) -> Result<Self> {
        check_even(l_max)?;
        if values.len() != sh_count(l_max) {
            return Err(FodError::DimensionMismatch(format!(
                "{} coefficients for l_max {l_max} (expected {})",
                values.len(),
                sh_count(l_max)
            )));
        }
        Ok(Self { values, l_max })
    }

    pub fn zeros(l_max: usize) -> Result<Self> {
        check_even(l_max)?;
        Ok(Self { values: vec![0.0; sh_count(l_max)], l_max })
    }

    pub(crate) fn from_parts(values: Vec<f64>, l_max: usize) -> Self {
        debug_assert_eq!(values.len(), sh_count(l_max));
        Self { values, l_max }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn blocks(&self) -> LevelBlockIndex {
        LevelBlockIndex::new(self.l_max).expect("l_max validated at construction")
    }

    /// Coefficients of degree `l`, or `None` above `l_max` or for odd `l`.
    pub fn block(&self, l: usize) -> Option<&[f64]> {
        let blocks = self.blocks();
        blocks.block(l).map(|b| &self.values[b.range()])
    }

    /// Zero-pads or truncates to another order.
    pub fn resized(&self, l_max: usize) -> Result<Self> {
        check_even(l_max)?;
        let mut values = vec![0.0; sh_count(l_max)];
        let keep = values.len().min(self.values.len());
        values[..keep].copy_from_slice(&self.values[..keep]);
        Ok(Self { values, l_max })
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * k).collect(), l_max: self.l_max }
    }

    /// FOD values at the rows of `basis`, which must cover at least `l_max`.
    pub fn evaluate(&self, basis: &ShBasisMatrix) -> Result<Vec<f64>> {
        if basis.l_max() < self.l_max {
            return Err(FodError::DimensionMismatch(format!(
                "basis of order {} cannot evaluate coefficients of order {}",
                basis.l_max(),
                self.l_max
            )));
        }
        Ok(evaluate_prefix(basis.values(), &self.values))
    }

    /// One CSV row: `voxel,tag,l_max,c0,c1,...`.
    pub fn to_csv_row(&self, voxel: usize, tag: &str) -> String {
        let mut row = format!("{voxel},{tag},{}", self.l_max);
        for v in &self.values {
            row.push(',');
            row.push_str(&format!("{v:e}"));
        }
        row
    }

    /// Little-endian record: magic, u16 version, u16 l_max, then L f64 values.
    pub fn write_record<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(&FODC_MAGIC)?;
        out.write_all(&FODC_VERSION.to_le_bytes())?;
        out.write_all(&(self.l_max as u16).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_record<R: Read>(input: &mut R) -> Result<Self> {
        let io = |e: std::io::Error| FodError::Parse(format!("coefficient record: {e}"));
        let mut header = [0u8; 8];
        input.read_exact(&mut header).map_err(io)?;
        if header[..4] != FODC_MAGIC {
            return Err(FodError::Parse("coefficient record: bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != FODC_VERSION {
            return Err(FodError::Parse(format!("coefficient record: unsupported version {version}")));
        }
        let l_max = u16::from_le_bytes([header[6], header[7]]) as usize;
        check_even(l_max)?;
        let mut values = vec![0.0; sh_count(l_max)];
        let mut buf = [0u8; 8];
        for v in &mut values {
            input.read_exact(&mut buf).map_err(io)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(Self { values, l_max })
    }
}

/// Φ[:, ..f.len()] · f for a row-per-direction basis matrix.
pub(crate) fn evaluate_prefix(basis: &DMatrix<f64>, f: &[f64]) -> Vec<f64> {
    let cols = basis.columns(0, f.len());
    let fv = nalgebra::DVectorView::from_slice(f, f.len());
    (cols * fv).as_slice().to_vec()
}
