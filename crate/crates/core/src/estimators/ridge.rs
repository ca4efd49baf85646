//! Ridge-penalized deconvolution with a Laplace–Beltrami style penalty and BIC
//! selection of the penalty weight.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::coefficients::ShCoefficients;
use crate::error::{FodError, Result};
use crate::model::RMatrix;
use crate::sphere::{LevelBlockIndex, ShBasisMatrix};

/// Diagonal penalty l²(l+1)² on each degree block.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgePenalty {
    diag: Vec<f64>,
}

impl RidgePenalty {
    pub fn new(l_max: usize) -> Result<Self> {
        let blocks = LevelBlockIndex::new(l_max)?;
        let mut diag = vec![0.0; blocks.len()];
        for b in blocks.blocks() {
            let l = b.l as f64;
            diag[b.range()].iter_mut().for_each(|d| *d = (l * (l + 1.0)).powi(2));
        }
        Ok(Self { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

/// ΦR: the forward operator from FOD coefficients to signals.
pub(crate) fn forward_operator(basis: &DMatrix<f64>, r: &RMatrix) -> Result<DMatrix<f64>> {
    if basis.ncols() != r.diag().len() {
        return Err(FodError::DimensionMismatch(format!(
            "basis has {} columns but the kernel operator has {}",
            basis.ncols(),
            r.diag().len()
        )));
    }
    let mut a = basis.clone();
    for (j, rj) in r.diag().iter().enumerate() {
        a.column_mut(j).scale_mut(*rj);
    }
    Ok(a)
}

fn penalized_factor(normal: &DMatrix<f64>, penalty: &RidgePenalty, lambda: f64) -> Result<Cholesky<f64, Dyn>> {
    if !(lambda >= 0.0) {
        return Err(FodError::InvalidParameter(format!("ridge weight must be nonnegative, got {lambda}")));
    }
    let mut m = normal.clone();
    for (i, p) in penalty.diag().iter().enumerate() {
        m[(i, i)] += lambda * p;
    }
    m.cholesky().ok_or_else(|| FodError::RankDeficient(format!("penalized system is singular at lambda = {lambda}")))
}

/// (RΦᵀΦR + λP)⁻¹RΦᵀy by Cholesky.
pub fn shridge_fit(y: &[f64], basis: &ShBasisMatrix, r: &RMatrix, lambda: f64) -> Result<ShCoefficients> {
    let path = RidgePath::new(basis, r, &[lambda])?;
    let rhs = path.rhs(y)?;
    Ok(ShCoefficients::from_parts(path.solve(0, &rhs).as_slice().to_vec(), basis.l_max()))
}

/// Outcome of a BIC grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSelection {
    pub lambda: f64,
    pub index: usize,
    pub bic: f64,
    pub coefficients: ShCoefficients,
}

pub fn shridge_bic_select(y: &[f64], basis: &ShBasisMatrix, r: &RMatrix, grid: &[f64]) -> Result<RidgeSelection> {
    RidgePath::new(basis, r, grid)?.select(y)
}

struct GridPoint {
    lambda: f64,
    factor: Cholesky<f64, Dyn>,
    df: f64,
}

/// Penalized systems for every grid value, factored once per design.
pub struct RidgePath {
    forward: DMatrix<f64>,
    forward_t: DMatrix<f64>,
    points: Vec<GridPoint>,
    l_max: usize,
}

impl RidgePath {
    pub fn new(basis: &ShBasisMatrix, r: &RMatrix, grid: &[f64]) -> Result<Self> {
        if grid.is_empty() {
            return Err(FodError::InvalidParameter("empty ridge grid".into()));
        }
        let forward = forward_operator(basis.values(), r)?;
        let forward_t = forward.transpose();
        let normal = &forward_t * &forward;
        let penalty = RidgePenalty::new(basis.l_max())?;
        let points = grid
            .iter()
            .map(|&lambda| {
                let factor = penalized_factor(&normal, &penalty, lambda)?;
                // df = tr(ΦR C⁻¹ RΦᵀ) = tr(C⁻¹ RΦᵀΦR).
                let df = factor.solve(&normal).trace();
                Ok(GridPoint { lambda, factor, df })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { forward, forward_t, points, l_max: basis.l_max() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lambda(&self, index: usize) -> f64 {
        self.points[index].lambda
    }

    /// Hat-matrix trace at grid index `index`.
    pub fn degrees_of_freedom(&self, index: usize) -> f64 {
        self.points[index].df
    }

    pub(crate) fn rhs(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.forward.nrows() {
            return Err(FodError::DimensionMismatch(format!(
                "{} signal values for {} gradient directions",
                y.len(),
                self.forward.nrows()
            )));
        }
        Ok(&self.forward_t * DVector::from_column_slice(y))
    }

    fn solve(&self, index: usize, rhs: &DVector<f64>) -> DVector<f64> {
        self.points[index].factor.solve(rhs)
    }

    pub fn fit(&self, index: usize, y: &[f64]) -> Result<ShCoefficients> {
        let rhs = self.rhs(y)?;
        Ok(ShCoefficients::from_parts(self.solve(index, &rhs).as_slice().to_vec(), self.l_max))
    }

    pub fn residual_sum_of_squares(&self, coefficients: &ShCoefficients, y: &[f64]) -> f64 {
        let fitted = &self.forward * DVector::from_column_slice(coefficients.values());
        y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum()
    }

    /// Minimizes n·log(RSS/n) + df·log n over the grid; the first index wins ties.
    pub fn select(&self, y: &[f64]) -> Result<RidgeSelection> {
        let rhs = self.rhs(y)?;
        let n = y.len() as f64;
        let yv = DVector::from_column_slice(y);
        let mut best: Option<(usize, f64, DVector<f64>)> = None;
        for (i, point) in self.points.iter().enumerate() {
            let f = point.factor.solve(&rhs);
            let rss = (&yv - &self.forward * &f).norm_squared().max(f64::MIN_POSITIVE);
            let bic = n * (rss / n).ln() + point.df * n.ln();
            if best.as_ref().is_none_or(|(_, b, _)| bic < *b) {
                best = Some((i, bic, f));
            }
        }
        let (index, bic, f) = best.expect("grid is nonempty");
        Ok(RidgeSelection {
            lambda: self.points[index].lambda,
            index,
            bic,
            coefficients: ShCoefficients::from_parts(f.as_slice().to_vec(), self.l_max),
        })
    }
}
