use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use crate::error::{FodError, Result};
use crate::sphere::GradientTable;

/// Signals are floored at this fraction of s0 before taking logs.
pub const SIGNAL_FLOOR: f64 = 1e-6;

/// Symmetric 3×3 diffusion tensor in mm²/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionTensor {
    d: Matrix3<f64>,
}

impl DiffusionTensor {
    /// Symmetrizes the input.
    pub fn new(d: Matrix3<f64>) -> Self {
        Self { d: (d + d.transpose()) * 0.5 }
    }

    pub fn diagonal(l1: f64, l2: f64, l3: f64) -> Self {
        Self { d: Matrix3::from_diagonal(&Vector3::new(l1, l2, l3)) }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.d
    }

    /// Eigenvalues sorted in decreasing order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.d).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        [ev[0], ev[1], ev[2]]
    }

    /// Unit eigenvector of the largest eigenvalue.
    pub fn principal_direction(&self) -> [f64; 3] {
        let eig = SymmetricEigen::new(self.d);
        let k = eig.eigenvalues.imax();
        let v = eig.eigenvectors.column(k);
        [v[0], v[1], v[2]]
    }

    /// x^T D x
    pub fn quadratic_form(&self, x: [f64; 3]) -> f64 {
        let v = Vector3::from(x);
        v.dot(&(self.d * v))
    }
}

/// Log-linear least-squares tensor fit of -log(S/s0)/b on the six monomials
/// x², y², z², 2xy, 2xz, 2yz. No positive-definiteness projection is applied.
pub fn single_tensor_fit(signals: &[f64], s0: f64, gradients: &GradientTable) -> Result<DiffusionTensor> {
    let n = gradients.len();
    if signals.len() != n {
        return Err(FodError::DimensionMismatch(format!("{} signals for {} gradients", signals.len(), n)));
    }
    if n < 7 {
        return Err(FodError::InsufficientObservations { n, rank: 6 });
    }
    if !(s0 > 0.0) {
        return Err(FodError::InvalidParameter(format!("s0 must be positive, got {s0}")));
    }
    let b = gradients.b();
    let design = DMatrix::from_fn(n, 6, |i, j| {
        let d = gradients.directions()[i];
        let (x, y, z) = (d.x(), d.y(), d.z());
        match j {
            0 => x * x,
            1 => y * y,
            2 => z * z,
            3 => 2.0 * x * y,
            4 => 2.0 * x * z,
            _ => 2.0 * y * z,
        }
    });
    let rhs = DVector::from_iterator(
        n,
        signals.iter().map(|&s| -(s.max(SIGNAL_FLOOR * s0) / s0).ln() / b),
    );
    let normal = design.transpose() * &design;
    let chol = normal.clone().cholesky().ok_or_else(|| {
        FodError::RankDeficient("gradient directions do not determine the six tensor monomials".into())
    })?;
    // Cholesky can succeed on numerically singular designs; check conditioning too.
    let eig = SymmetricEigen::new(normal).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= hi * 1e-12 {
        return Err(FodError::RankDeficient("tensor design matrix is singular".into()));
    }
    let coef = chol.solve(&(design.transpose() * rhs));
    let d = Matrix3::new(
        coef[0], coef[3], coef[4], //
        coef[3], coef[1], coef[5], //
        coef[4], coef[5], coef[2],
    );
    Ok(DiffusionTensor { d })
}

/// Fractional anisotropy of the (sorted) eigenvalues; 0 for the zero tensor.
pub fn fractional_anisotropy(t: &DiffusionTensor) -> f64 {
    fa_from_eigenvalues(t.eigenvalues())
}

pub fn fa_from_eigenvalues([l1, l2, l3]: [f64; 3]) -> f64 {
    let denom = (l1 * l1 + l2 * l2 + l3 * l3).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    let num = ((l1 - l2).powi(2) + (l2 - l3).powi(2) + (l3 - l1).powi(2)).sqrt();
    (0.5f64.sqrt() * num / denom).clamp(0.0, 1.0)
}
