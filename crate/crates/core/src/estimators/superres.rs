//! Super-resolution least squares: fit at a higher order than the data support,
//! regularized by penalizing selected dense-grid values of the FOD.

use nalgebra::{DMatrix, DVector};

use super::ols::RANK_TOLERANCE;
use super::ridge::forward_operator;
use crate::error::{FodError, Result};
use crate::model::{build_r_matrix, ResponseKernel};
use crate::sphere::{eval_sh_basis, GradientTable, SphericalGrid};

/// Design-level pieces of the super-resolution system at order `l_max_super`.
#[derive(Debug, Clone)]
pub struct SuperResolutionSystem {
    l_max_super: usize,
    /// (ΦˢRˢ)ᵀΦˢRˢ
    normal: DMatrix<f64>,
    /// (ΦˢRˢ)ᵀ
    forward_t: DMatrix<f64>,
    /// Dense basis transposed: one column per grid point (after antipodal reduction).
    dense_t: DMatrix<f64>,
    /// Number of original grid points each column stands for.
    multiplicity: f64,
}

impl SuperResolutionSystem {
    pub fn new(
        gradients: &GradientTable,
        kernel: &ResponseKernel,
        dense: &SphericalGrid,
        l_max_super: usize,
    ) -> Result<Self> {
        let kernel = kernel.with_l_max(l_max_super)?;
        let r = build_r_matrix(&kernel.r, l_max_super)?;
        r.check_invertible()?;
        let phi = eval_sh_basis(gradients.directions(), l_max_super)?;
        let forward = forward_operator(phi.values(), &r)?;
        let forward_t = forward.transpose();
        let normal = &forward_t * &forward;
        let (half, multiplicity) = dense.antipodal_half();
        let dense_t = eval_sh_basis(half.directions(), l_max_super)?.into_values().transpose();
        Ok(Self { l_max_super, normal, forward_t, dense_t, multiplicity })
    }

    pub fn l_max_super(&self) -> usize {
        self.l_max_super
    }

    pub fn n_coefficients(&self) -> usize {
        self.normal.nrows()
    }

    pub fn n_grid_points(&self) -> usize {
        self.dense_t.ncols()
    }

    /// (ΦˢRˢ)ᵀy
    pub fn rhs(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.forward_t.ncols() {
            return Err(FodError::DimensionMismatch(format!(
                "{} signal values for {} gradient directions",
                y.len(),
                self.forward_t.ncols()
            )));
        }
        Ok(&self.forward_t * DVector::from_column_slice(y))
    }

    /// FOD values on the reduced dense grid for coefficients of any order ≤ l_max_super.
    pub fn evaluate(&self, f: &[f64]) -> Vec<f64> {
        debug_assert!(f.len() <= self.dense_t.nrows());
        let rows = self.dense_t.rows(0, f.len());
        rows.tr_mul(&DVector::from_column_slice(f)).as_slice().to_vec()
    }

    /// Minimizes ‖y − ΦˢRˢf‖² + weight·Σ_{i ∈ penalized} F_i², counting each reduced
    /// grid point with its multiplicity.
    pub fn solve_penalized(&self, rhs: &DVector<f64>, penalized: &[usize], weight: f64) -> Result<DVector<f64>> {
        let mut m = self.normal.clone();
        if !penalized.is_empty() {
            let mut rows = DMatrix::zeros(self.dense_t.nrows(), penalized.len());
            for (k, &i) in penalized.iter().enumerate() {
                rows.set_column(k, &self.dense_t.column(i));
            }
            m.gemm(weight * self.multiplicity, &rows, &rows.transpose(), 1.0);
        }
        let scale = m.diagonal().max();
        let singular = || {
            FodError::RankDeficient(format!(
                "super-resolution system of order {} with {} penalized grid points is singular",
                self.l_max_super,
                penalized.len()
            ))
        };
        let chol = m.cholesky().ok_or_else(singular)?;
        // Cholesky also succeeds on numerically singular systems; reject tiny pivots.
        if chol.l_dirty().diagonal().iter().any(|p| p * p <= scale * RANK_TOLERANCE) {
            return Err(singular());
        }
        Ok(chol.solve(rhs))
    }
}
