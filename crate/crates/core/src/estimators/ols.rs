use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{FodError, Result};
use crate::sphere::ShBasisMatrix;

/// Eigenvalue ratio below which a Gram matrix is treated as singular.
pub(crate) const RANK_TOLERANCE: f64 = 1e-12;

/// Precomputed least-squares projection onto the columns of a basis matrix.
#[derive(Debug, Clone)]
pub struct OlsProjector {
    basis_t: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    dof: usize,
}

impl OlsProjector {
    pub fn new(basis: &DMatrix<f64>) -> Result<Self> {
        let (n, l) = basis.shape();
        if n <= l {
            return Err(FodError::InsufficientObservations { n, rank: l });
        }
        let gram = basis.transpose() * basis;
        let gram_inv = spd_inverse(&gram, "basis matrix")?;
        Ok(Self { basis_t: basis.transpose(), gram_inv, dof: n - l })
    }

    /// (ΦᵀΦ)⁻¹
    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn residual_dof(&self) -> usize {
        self.dof
    }

    /// OLS coefficients (ΦᵀΦ)⁻¹Φᵀy.
    pub fn coefficients(&self, y: &[f64]) -> Result<DVector<f64>> {
        let u = self.project_rhs(y)?;
        Ok(&self.gram_inv * u)
    }

    /// ‖y − Φ(ΦᵀΦ)⁻¹Φᵀy‖² / (n − rank Φ).
    pub fn noise_variance(&self, y: &[f64]) -> Result<f64> {
        let u = self.project_rhs(y)?;
        Ok(self.noise_variance_from(y, &u))
    }

    pub(crate) fn project_rhs(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.basis_t.ncols() {
            return Err(FodError::DimensionMismatch(format!(
                "{} signal values for {} gradient directions",
                y.len(),
                self.basis_t.ncols()
            )));
        }
        Ok(&self.basis_t * DVector::from_column_slice(y))
    }

    /// Variance from a precomputed u = Φᵀy, using RSS = ‖y‖² − uᵀ(ΦᵀΦ)⁻¹u.
    pub(crate) fn noise_variance_from(&self, y: &[f64], u: &DVector<f64>) -> f64 {
        let total: f64 = y.iter().map(|v| v * v).sum();
        let explained = u.dot(&(&self.gram_inv * u));
        (total - explained).max(0.0) / self.dof as f64
    }
}

/// Inverse of a symmetric positive-definite matrix, rejecting near-singular input.
pub(crate) fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > hi * RANK_TOLERANCE) {
        return Err(FodError::RankDeficient(format!("{what} does not have full column rank")));
    }
    let chol = m.clone().cholesky().ok_or_else(|| FodError::RankDeficient(format!("{what} is not positive definite")))?;
    Ok(chol.inverse())
}

/// Residual mean square of the least-squares fit of `y` on the basis columns.
pub fn estimate_noise_variance(y: &[f64], basis: &ShBasisMatrix) -> Result<f64> {
    let proj = OlsProjector::new(basis.values())?;
    let coef = proj.coefficients(y)?;
    let fitted = basis.values() * coef;
    let rss: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(rss / proj.residual_dof() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{eval_sh_basis, geodesic_face_centers, Hemisphere};

    fn design(l_max: usize) -> ShBasisMatrix {
        let g = geodesic_face_centers(3, Hemisphere::Upper).unwrap();
        eval_sh_basis(g.directions(), l_max).unwrap()
    }

    #[test]
    fn zero_for_signals_in_span() {
        let basis = design(6);
        let f: Vec<f64> = (0..28).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = (basis.values() * DVector::from_vec(f)).as_slice().to_vec();
        assert!(estimate_noise_variance(&y, &basis).unwrap() < 1e-24);
    }

    #[test]
    fn orthogonal_residual_is_recovered() {
        let basis = design(6);
        let phi = basis.values();
        // Project an arbitrary vector off the span to get e ⟂ span(Φ).
        let raw = DVector::from_fn(phi.nrows(), |i, _| ((i * 7 % 13) as f64 - 6.0) * 0.01);
        let proj = OlsProjector::new(phi).unwrap();
        let e = &raw - phi * proj.coefficients(raw.as_slice()).unwrap();
        let f = DVector::from_fn(phi.ncols(), |j, _| 1.0 / (1.0 + j as f64));
        let y = phi * f + &e;
        let expect = e.norm_squared() / (phi.nrows() - phi.ncols()) as f64;
        let got = estimate_noise_variance(y.as_slice(), &basis).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect.max(1.0));
        let fast = proj.noise_variance(y.as_slice()).unwrap();
        assert!((fast - expect).abs() < 1e-10);
    }

    #[test]
    fn needs_more_observations_than_coefficients() {
        let basis = design(12);
        let y = vec![0.0; basis.values().nrows()];
        assert!(matches!(estimate_noise_variance(&y, &basis), Err(FodError::InsufficientObservations { .. })));
    }
}
