//! Blockwise James–Stein estimator: OLS deconvolution, per-degree shrinkage
//! with a covariance-aware threshold, then one sharpening step.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::coefficients::ShCoefficients;
use super::config::FitConfig;
use super::ols::OlsProjector;
use super::superres::SuperResolutionSystem;
use crate::error::{FodError, Result};
use crate::model::{RMatrix, ResponseKernel};
use crate::sphere::{GradientTable, LevelBlockIndex, ShBasisMatrix, SphericalGrid};

/// OLS deconvolution z = R⁻¹(ΦᵀΦ)⁻¹Φᵀy with its covariance shape V and σ̂².
#[derive(Debug, Clone)]
pub struct TransformedObservations {
    pub z: ShCoefficients,
    /// R⁻¹(ΦᵀΦ)⁻¹R⁻¹; Var(z) = σ²V.
    pub v: DMatrix<f64>,
    pub sigma2_hat: f64,
}

pub fn bjs_transform(y: &[f64], basis: &ShBasisMatrix, r: &RMatrix) -> Result<TransformedObservations> {
    let transform = BjsTransform::new(basis, r)?;
    let (z, sigma2_hat) = transform.apply(y)?;
    Ok(TransformedObservations { z, v: transform.covariance_shape(), sigma2_hat })
}

/// Per-degree norms of the eigenvalues of a covariance block, which is all the
/// shrinkage rule needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl SpectrumNorms {
    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Self {
        Self {
            l1: eigenvalues.iter().map(|v| v.abs()).sum(),
            l2: eigenvalues.iter().map(|v| v * v).sum::<f64>().sqrt(),
            linf: eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// ‖λ‖₁ + 2‖λ‖₂√t + 2‖λ‖∞t
    pub fn threshold(&self, t: f64) -> f64 {
        self.l1 + 2.0 * self.l2 * t.sqrt() + 2.0 * self.linf * t
    }
}

/// (1 − σ̂²·threshold/‖z‖²)₊, with 0 for a zero block.
pub fn shrink_factor(block: &[f64], norms: &SpectrumNorms, sigma2: f64, t: f64) -> f64 {
    let energy: f64 = block.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return 0.0;
    }
    (1.0 - sigma2 * norms.threshold(t) / energy).max(0.0)
}

/// t = c·log(2l+1)
pub fn level_threshold_parameter(l: usize, c: f64) -> f64 {
    c * ((2 * l + 1) as f64).ln()
}

fn block_spectra(v: &DMatrix<f64>, blocks: &LevelBlockIndex) -> Vec<SpectrumNorms> {
    blocks
        .blocks()
        .iter()
        .map(|b| {
            let sub = v.view((b.start, b.start), (b.len, b.len)).into_owned();
            SpectrumNorms::from_eigenvalues(SymmetricEigen::new(sub).eigenvalues.as_slice())
        })
        .collect()
}

fn shrink_with(z: &ShCoefficients, spectra: &[SpectrumNorms], sigma2: f64, cfg: &FitConfig) -> ShCoefficients {
    let mut out = z.values().to_vec();
    for (b, norms) in z.blocks().blocks().iter().zip(spectra) {
        if b.l <= cfg.l0 {
            continue;
        }
        let t = level_threshold_parameter(b.l, cfg.c);
        let factor = shrink_factor(&out[b.range()], norms, sigma2, t);
        out[b.range()].iter_mut().for_each(|v| *v *= factor);
    }
    ShCoefficients::from_parts(out, z.l_max())
}

/// Copies degrees ≤ l0 and shrinks each higher block toward zero.
pub fn bjs_shrink(t: &TransformedObservations, cfg: &FitConfig) -> Result<ShCoefficients> {
    let blocks = t.z.blocks();
    if t.v.nrows() != blocks.len() || t.v.ncols() != blocks.len() {
        return Err(FodError::DimensionMismatch("covariance shape does not match the coefficient layout".into()));
    }
    Ok(shrink_with(&t.z, &block_spectra(&t.v, &blocks), t.sigma2_hat, cfg))
}

/// Grid indices where the FOD is strictly negative.
pub(crate) fn negative_indices(values: &[f64]) -> Vec<usize> {
    values.iter().enumerate().filter(|(_, v)| **v < 0.0).map(|(i, _)| i).collect()
}

/// One least-squares refit at `cfg.l_max_super` that pulls the dense-grid
/// values where `f_hat` is negative toward zero.
pub fn sharpen_one_step(
    f_hat: &ShCoefficients,
    y: &[f64],
    kernel: &ResponseKernel,
    gradients: &GradientTable,
    dense: &SphericalGrid,
    cfg: &FitConfig,
) -> Result<ShCoefficients> {
    let system = SuperResolutionSystem::new(gradients, kernel, dense, cfg.l_max_super)?;
    sharpen_with(&system, f_hat, y)
}

fn sharpen_with(system: &SuperResolutionSystem, f_hat: &ShCoefficients, y: &[f64]) -> Result<ShCoefficients> {
    if f_hat.l_max() > system.l_max_super() {
        return Err(FodError::DimensionMismatch("estimate exceeds the super-resolution order".into()));
    }
    let negative = negative_indices(&system.evaluate(f_hat.values()));
    let rhs = system.rhs(y)?;
    let f = system.solve_penalized(&rhs, &negative, 1.0)?;
    Ok(ShCoefficients::from_parts(f.as_slice().to_vec(), system.l_max_super()))
}

/// Precomputed z-transform: K = R⁻¹(ΦᵀΦ)⁻¹Φᵀ plus the OLS residual machinery.
#[derive(Debug, Clone)]
struct BjsTransform {
    ols: OlsProjector,
    r_inv: Vec<f64>,
    l_max: usize,
}

impl BjsTransform {
    fn new(basis: &ShBasisMatrix, r: &RMatrix) -> Result<Self> {
        if r.diag().len() != basis.n_coefficients() {
            return Err(FodError::DimensionMismatch("kernel operator and basis orders differ".into()));
        }
        r.check_invertible()?;
        let ols = OlsProjector::new(basis.values())?;
        Ok(Self { ols, r_inv: r.diag().iter().map(|v| 1.0 / v).collect(), l_max: basis.l_max() })
    }

    fn covariance_shape(&self) -> DMatrix<f64> {
        let g = self.ols.gram_inverse();
        DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| self.r_inv[i] * g[(i, j)] * self.r_inv[j])
    }

    fn apply(&self, y: &[f64]) -> Result<(ShCoefficients, f64)> {
        let u = self.ols.project_rhs(y)?;
        let sigma2 = self.ols.noise_variance_from(y, &u);
        let ols: DVector<f64> = self.ols.gram_inverse() * &u;
        let z = ols.iter().zip(&self.r_inv).map(|(c, ri)| c * ri).collect();
        Ok((ShCoefficients::from_parts(z, self.l_max), sigma2))
    }
}

/// Transform → shrink → sharpen in one call, without precomputation reuse.
pub fn bjs_estimate(
    y: &[f64],
    basis: &ShBasisMatrix,
    r: &RMatrix,
    kernel: &ResponseKernel,
    gradients: &GradientTable,
    dense: &SphericalGrid,
    cfg: &FitConfig,
) -> Result<ShCoefficients> {
    let t = bjs_transform(y, basis, r)?;
    let shrunk = bjs_shrink(&t, cfg)?;
    sharpen_one_step(&shrunk, y, kernel, gradients, dense, cfg)
}

/// All design-dependent pieces of BJS, built once and shared across voxels.
#[derive(Debug, Clone)]
pub struct BjsModel {
    transform: BjsTransform,
    spectra: Vec<SpectrumNorms>,
    system: SuperResolutionSystem,
    config: FitConfig,
}

impl BjsModel {
    pub fn new(
        gradients: &GradientTable,
        kernel: &ResponseKernel,
        dense: &SphericalGrid,
        config: &FitConfig,
    ) -> Result<Self> {
        config.validate()?;
        let kernel_low = kernel.with_l_max(config.l_max)?;
        let basis = crate::sphere::eval_sh_basis(gradients.directions(), config.l_max)?;
        let r = crate::model::build_r_matrix(&kernel_low.r, config.l_max)?;
        let transform = BjsTransform::new(&basis, &r)?;
        let spectra = block_spectra(&transform.covariance_shape(), &LevelBlockIndex::new(config.l_max)?);
        let system = SuperResolutionSystem::new(gradients, kernel, dense, config.l_max_super)?;
        Ok(Self { transform, spectra, system, config: config.clone() })
    }

    /// Per-degree eigenvalue norms of the covariance blocks.
    pub fn spectra(&self) -> &[SpectrumNorms] {
        &self.spectra
    }

    /// Shrunk coefficients at `l_max` before sharpening.
    pub fn shrunk(&self, y: &[f64]) -> Result<ShCoefficients> {
        let (z, sigma2) = self.transform.apply(y)?;
        Ok(shrink_with(&z, &self.spectra, sigma2, &self.config))
    }

    pub fn fit(&self, y: &[f64]) -> Result<ShCoefficients> {
        let shrunk = self.shrunk(y)?;
        sharpen_with(&self.system, &shrunk, y)
    }
}
