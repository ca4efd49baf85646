//! Axially symmetric response kernel and its spherical-harmonic representation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::tensor::{fractional_anisotropy, single_tensor_fit};
use crate::error::{FodError, Result};
use crate::sphere::{check_even, sh_count, GradientTable, LevelBlockIndex};

pub const DEFAULT_QUADRATURE_POINTS: usize = 4096;

/// Levels whose kernel coefficient falls below this cannot be deconvolved.
pub const DEGENERATE_LEVEL: f64 = 1e-12;

/// Parameters of the single-fiber signal R(cos θ) = s0·exp(-b(λ̄cos²θ + λ_sin²θ)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lambda_major: f64,
    pub lambda_minor: f64,
    pub b: f64,
    pub s0: f64,
}

impl KernelParams {
    pub fn new(lambda_major: f64, lambda_minor: f64, b: f64, s0: f64) -> Result<Self> {
        let p = Self { lambda_major, lambda_minor, b, s0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_minor > 0.0 && self.lambda_major >= self.lambda_minor) {
            return Err(FodError::InvalidParameter(format!(
                "need lambda_major >= lambda_minor > 0, got {} and {}",
                self.lambda_major, self.lambda_minor
            )));
        }
        if !(self.b > 0.0 && self.s0 > 0.0) {
            return Err(FodError::InvalidParameter("b and s0 must be positive".into()));
        }
        Ok(())
    }

    /// Signal for a gradient at angle θ to the fiber, with `t = cos θ`.
    pub fn signal(&self, t: f64) -> f64 {
        let t2 = t * t;
        self.s0 * (-self.b * (self.lambda_major * t2 + self.lambda_minor * (1.0 - t2))).exp()
    }
}

/// Kernel parameters together with r_l = ⟨R, Φ_l0⟩ for even l ≤ l_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseKernel {
    pub lambda_major: f64,
    pub lambda_minor: f64,
    pub b: f64,
    pub s0: f64,
    pub l_max: usize,
    pub r: Vec<f64>,
}

impl ResponseKernel {
    pub fn new(params: KernelParams, l_max: usize) -> Result<Self> {
        params.validate()?;
        let r = response_sh_coefficients(&params, l_max, DEFAULT_QUADRATURE_POINTS)?;
        Ok(Self {
            lambda_major: params.lambda_major,
            lambda_minor: params.lambda_minor,
            b: params.b,
            s0: params.s0,
            l_max,
            r,
        })
    }

    pub fn params(&self) -> KernelParams {
        KernelParams { lambda_major: self.lambda_major, lambda_minor: self.lambda_minor, b: self.b, s0: self.s0 }
    }

    /// Same kernel with coefficients recomputed up to a different order.
    pub fn with_l_max(&self, l_max: usize) -> Result<Self> {
        if l_max == self.l_max {
            return Ok(self.clone());
        }
        Self::new(self.params(), l_max)
    }

    pub fn r_l(&self, l: usize) -> Option<f64> {
        if l % 2 != 0 {
            return None;
        }
        self.r.get(l / 2).copied()
    }

    /// Checks a deserialized kernel for internal consistency.
    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        check_even(self.l_max)?;
        if self.r.len() != self.l_max / 2 + 1 {
            return Err(FodError::DimensionMismatch(format!(
                "kernel lists {} coefficients for l_max {}",
                self.r.len(),
                self.l_max
            )));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// r_l = 2π ∫ R(t) Φ_l0(t) dt over t = cos θ ∈ [-1, 1], for even l ≤ l_max.
pub fn response_sh_coefficients(params: &KernelParams, l_max: usize, quadrature_points: usize) -> Result<Vec<f64>> {
    check_even(l_max)?;
    if quadrature_points < l_max + 2 {
        return Err(FodError::InvalidParameter("too few quadrature points".into()));
    }
    let (nodes, weights) = gauss_legendre(quadrature_points);
    let mut r = vec![0.0; l_max / 2 + 1];
    for (t, w) in nodes.iter().zip(&weights) {
        let f = params.signal(*t) * w * 2.0 * PI;
        for (acc, z) in r.iter_mut().zip(crate::sphere::zonal_harmonics(l_max, *t)) {
            *acc += f * z;
        }
    }
    Ok(r)
}

/// Diagonal of the convolution operator in the SH domain: the l-th block is
/// r_l·√(4π/(2l+1)) repeated 2l+1 times.
#[derive(Debug, Clone, PartialEq)]
pub struct RMatrix {
    diag: Vec<f64>,
    l_max: usize,
}

impl RMatrix {
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Per-level scale r_l·√(4π/(2l+1)).
    pub fn level_value(&self, l: usize) -> f64 {
        self.diag[crate::sphere::sh_index(l, 0)]
    }

    /// Fails with the offending level when any |r_l| underflows.
    pub fn check_invertible(&self) -> Result<()> {
        for l in (0..=self.l_max).step_by(2) {
            let v = self.level_value(l);
            if !(v.abs() >= DEGENERATE_LEVEL) {
                return Err(FodError::DegenerateLevel { l, value: v });
            }
        }
        Ok(())
    }
}

pub fn build_r_matrix(r: &[f64], l_max: usize) -> Result<RMatrix> {
    let blocks = LevelBlockIndex::new(l_max)?;
    if r.len() < l_max / 2 + 1 {
        return Err(FodError::DimensionMismatch(format!(
            "kernel has levels up to {} but l_max is {l_max}",
            2 * r.len().saturating_sub(1)
        )));
    }
    let mut diag = vec![0.0; sh_count(l_max)];
    for block in blocks.blocks() {
        let value = r[block.l / 2] * (4.0 * PI / (2 * block.l + 1) as f64).sqrt();
        diag[block.range()].iter_mut().for_each(|d| *d = value);
    }
    Ok(RMatrix { diag, l_max })
}

/// Response-selection thresholds: FA above and smaller-eigenvalue ratio below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseSelection {
    pub fa_threshold: f64,
    pub minor_ratio_threshold: f64,
}

impl Default for ResponseSelection {
    fn default() -> Self {
        Self { fa_threshold: 0.8, minor_ratio_threshold: 1.5 }
    }
}

/// Median of λ1 and of mean(λ2, λ3) over single-fiber voxels. Signals are
/// normalized by each voxel's s0, so the returned kernel has s0 = 1.
pub fn estimate_response(
    voxels: &[(Vec<f64>, f64)],
    gradients: &GradientTable,
    selection: ResponseSelection,
) -> Result<KernelParams> {
    let mut majors = Vec::new();
    let mut minors = Vec::new();
    for (signals, s0) in voxels {
        if !(*s0 > 0.0) {
            continue;
        }
        let normalized: Vec<f64> = signals.iter().map(|s| s / s0).collect();
        let Ok(tensor) = single_tensor_fit(&normalized, 1.0, gradients) else {
            continue;
        };
        let [l1, l2, l3] = tensor.eigenvalues();
        if !(l3 > 0.0) {
            continue;
        }
        if fractional_anisotropy(&tensor) > selection.fa_threshold && l2 / l3 < selection.minor_ratio_threshold {
            majors.push(l1);
            minors.push(0.5 * (l2 + l3));
        }
    }
    if majors.is_empty() {
        return Err(FodError::EmptyResponseSelection {
            fa_threshold: selection.fa_threshold,
            ratio_threshold: selection.minor_ratio_threshold,
        });
    }
    KernelParams::new(median(&mut majors), median(&mut minors), gradients.b(), 1.0)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
