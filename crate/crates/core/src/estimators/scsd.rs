//! Iterative super-resolution sharpening that penalizes small FOD values.

use super::coefficients::ShCoefficients;
use super::config::{FitConfig, ThresholdMode};
use super::ridge::RidgePath;
use super::superres::SuperResolutionSystem;
use crate::error::{FodError, Result};
use crate::model::{build_r_matrix, ResponseKernel};
use crate::sphere::{eval_sh_basis, GradientTable, LevelBlockIndex, SphericalGrid};

/// Degrees above this are zeroed in the starting estimate.
pub const FILTER_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ScsdOutcome {
    pub coefficients: ShCoefficients,
    /// Number of penalized solves performed.
    pub iterations: usize,
    /// False when the iteration cap was hit before the mask stabilized.
    pub converged: bool,
}

fn filtered_start(f0: &ShCoefficients, l_max_super: usize) -> Result<ShCoefficients> {
    let mut start = f0.resized(l_max_super)?.into_values();
    let blocks = LevelBlockIndex::new(l_max_super)?;
    for b in blocks.blocks().iter().filter(|b| b.l > FILTER_DEGREE) {
        start[b.range()].iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(ShCoefficients::from_parts(start, l_max_super))
}

fn penalty_mask(values: &[f64], cfg: &FitConfig) -> Vec<usize> {
    let tau = match cfg.scsd_threshold {
        ThresholdMode::Absolute => cfg.scsd_tau,
        ThresholdMode::MeanRelative => cfg.scsd_tau * values.iter().sum::<f64>() / values.len() as f64,
    };
    values.iter().enumerate().filter(|(_, v)| **v <= tau).map(|(i, _)| i).collect()
}

pub(crate) fn super_csd_with(
    system: &SuperResolutionSystem,
    f0: &ShCoefficients,
    y: &[f64],
    cfg: &FitConfig,
) -> Result<ScsdOutcome> {
    if f0.l_max() > system.l_max_super() {
        return Err(FodError::DimensionMismatch("starting estimate exceeds the super-resolution order".into()));
    }
    let rhs = system.rhs(y)?;
    let mut current = filtered_start(f0, system.l_max_super())?;
    let mut mask = penalty_mask(&system.evaluate(current.values()), cfg);
    for iteration in 1..=cfg.scsd_max_iters {
        let f = system.solve_penalized(&rhs, &mask, cfg.scsd_lambda)?;
        current = ShCoefficients::from_parts(f.as_slice().to_vec(), system.l_max_super());
        let next = penalty_mask(&system.evaluate(current.values()), cfg);
        if next == mask {
            return Ok(ScsdOutcome { coefficients: current, iterations: iteration, converged: true });
        }
        mask = next;
    }
    Ok(ScsdOutcome { coefficients: current, iterations: cfg.scsd_max_iters, converged: false })
}

/// Runs superCSD from `f0` at order `cfg.l_max_super`.
pub fn super_csd(
    f0: &ShCoefficients,
    y: &[f64],
    kernel: &ResponseKernel,
    gradients: &GradientTable,
    dense: &SphericalGrid,
    cfg: &FitConfig,
) -> Result<ScsdOutcome> {
    let system = SuperResolutionSystem::new(gradients, kernel, dense, cfg.l_max_super)?;
    super_csd_with(&system, f0, y, cfg)
}

/// SHridge with BIC selection followed by superCSD, with shared precomputation.
pub struct ScsdModel {
    ridge: RidgePath,
    system: SuperResolutionSystem,
    config: FitConfig,
}

impl ScsdModel {
    pub fn new(
        gradients: &GradientTable,
        kernel: &ResponseKernel,
        dense: &SphericalGrid,
        config: &FitConfig,
    ) -> Result<Self> {
        config.validate()?;
        let ridge = ridge_path(gradients, kernel, config)?;
        let system = SuperResolutionSystem::new(gradients, kernel, dense, config.l_max_super)?;
        Ok(Self { ridge, system, config: config.clone() })
    }

    pub fn fit(&self, y: &[f64]) -> Result<ScsdOutcome> {
        let start = self.ridge.select(y)?;
        super_csd_with(&self.system, &start.coefficients, y, &self.config)
    }
}

/// Ridge path at `config.l_max` over `config.ridge_grid`.
pub(crate) fn ridge_path(gradients: &GradientTable, kernel: &ResponseKernel, config: &FitConfig) -> Result<RidgePath> {
    let kernel = kernel.with_l_max(config.l_max)?;
    let basis = eval_sh_basis(gradients.directions(), config.l_max)?;
    let r = build_r_matrix(&kernel.r, config.l_max)?;
    RidgePath::new(&basis, &r, &config.ridge_grid)
}
