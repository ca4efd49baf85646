//! Gradient tables and the bvecs/bvals text convention.

use serde::{Deserialize, Serialize};

use super::{Direction, SphericalGrid};
use crate::error::{FodError, Result};

/// Volumes with b below this are treated as non-diffusion-weighted.
pub const B0_THRESHOLD: f64 = 50.0;

/// Single-shell sampling design: unit gradient directions sharing one b-value (s/mm²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientTable {
    directions: Vec<Direction>,
    b: f64,
}

impl GradientTable {
    pub fn new(directions: Vec<Direction>, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(FodError::InvalidParameter(format!("b-value must be positive, got {b}")));
        }
        if directions.is_empty() {
            return Err(FodError::InvalidParameter("gradient table is empty".into()));
        }
        Ok(Self { directions, b })
    }

    pub fn from_grid(grid: &SphericalGrid, b: f64) -> Result<Self> {
        Self::new(grid.directions().to_vec(), b)
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn rotated(&self, m: &[[f64; 3]; 3]) -> Self {
        Self { directions: self.directions.iter().map(|d| d.rotate(m)).collect(), b: self.b }
    }

    /// `3 × n` bvecs text, one row per axis.
    pub fn to_bvecs(&self) -> String {
        let row = |f: fn(&Direction) -> f64| {
            self.directions.iter().map(|d| format!("{}", f(d))).collect::<Vec<_>>().join(" ")
        };
        format!("{}\n{}\n{}\n", row(Direction::x), row(Direction::y), row(Direction::z))
    }

    pub fn to_bvals(&self) -> String {
        let vals: Vec<String> = self.directions.iter().map(|_| format!("{}", self.b)).collect();
        format!("{}\n", vals.join(" "))
    }
}

/// Full acquisition as read from bvecs/bvals, b0 volumes included.
#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub bvals: Vec<f64>,
    pub bvecs: Vec<[f64; 3]>,
}

fn parse_rows(text: &str, what: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|e| FodError::Parse(format!("{what}: '{t}': {e}"))))
                .collect()
        })
        .collect()
}

impl Acquisition {
    /// Parses whitespace-delimited bvecs (3 × N, or N × 3) and bvals (1 × N, or N × 1).
    pub fn parse(bvecs: &str, bvals: &str) -> Result<Self> {
        let bval_rows = parse_rows(bvals, "bvals")?;
        let bvals: Vec<f64> = bval_rows.into_iter().flatten().collect();
        let n = bvals.len();
        let rows = parse_rows(bvecs, "bvecs")?;
        let bvecs: Vec<[f64; 3]> = if rows.len() == 3 && rows.iter().all(|r| r.len() == n) {
            (0..n).map(|i| [rows[0][i], rows[1][i], rows[2][i]]).collect()
        } else if rows.len() == n && rows.iter().all(|r| r.len() == 3) {
            rows.iter().map(|r| [r[0], r[1], r[2]]).collect()
        } else {
            return Err(FodError::DimensionMismatch(format!(
                "bvecs must be 3 x {n} (or {n} x 3) to match bvals"
            )));
        };
        Ok(Self { bvals, bvecs })
    }

    pub fn len(&self) -> usize {
        self.bvals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bvals.is_empty()
    }

    pub fn b0_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.bvals[i] < B0_THRESHOLD).collect()
    }

    pub fn dw_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.bvals[i] >= B0_THRESHOLD).collect()
    }

    /// Gradient table of the diffusion-weighted volumes. All of them must lie on
    /// one shell (within 10% of the mean b); the shell b is their mean.
    pub fn gradient_table(&self) -> Result<GradientTable> {
        let dw = self.dw_indices();
        if dw.is_empty() {
            return Err(FodError::InvalidParameter("no diffusion-weighted volumes".into()));
        }
        let mean_b = dw.iter().map(|&i| self.bvals[i]).sum::<f64>() / dw.len() as f64;
        if dw.iter().any(|&i| (self.bvals[i] - mean_b).abs() > 0.1 * mean_b) {
            return Err(FodError::InvalidParameter("multi-shell acquisitions are not supported".into()));
        }
        let directions = dw
            .iter()
            .map(|&i| {
                let [x, y, z] = self.bvecs[i];
                Direction::normalize(x, y, z)
                    .filter(|_| ((x * x + y * y + z * z).sqrt() - 1.0).abs() < 1e-3)
                    .ok_or(FodError::NonUnitDirection { x, y, z, norm: (x * x + y * y + z * z).sqrt() })
            })
            .collect::<Result<Vec<_>>>()?;
        GradientTable::new(directions, mean_b)
    }
}
