//! Real symmetrized spherical harmonics restricted to even degrees.
//!
//! Column layout: degrees l = 0, 2, ..., l_max in increasing order, and within a
//! degree the orders m = -l, ..., l. The basis is
//!
//! * `m < 0`: √2 · N P̄_l^|m|(cos θ) cos(|m| φ)
//! * `m = 0`: N P̄_l^0(cos θ)
//! * `m > 0`: √2 · (-1)^m N P̄_l^m(cos θ) sin(m φ)
//!
//! where N P̄ is the orthonormalized associated Legendre function without the
//! Condon–Shortley phase. This is √2·Re and √2·Im of the complex harmonics with
//! the Condon–Shortley phase included.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::Direction;
use crate::error::{FodError, Result};

/// Number of even-degree coefficients up to `l_max`: (l_max+1)(l_max+2)/2.
pub fn sh_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 2) / 2
}

/// Column of (l, m) for even `l` and |m| ≤ l.
pub fn sh_index(l: usize, m: i64) -> usize {
    debug_assert!(l % 2 == 0 && m.unsigned_abs() as usize <= l);
    let offset = if l == 0 { 0 } else { l * (l - 1) / 2 };
    (offset as i64 + m + l as i64) as usize
}

/// Inverse of [`sh_index`].
pub fn sh_degree_order(index: usize) -> (usize, i64) {
    let mut l = 0;
    loop {
        let len = 2 * l + 1;
        let start = sh_index(l, -(l as i64));
        if index < start + len {
            return (l, index as i64 - start as i64 - l as i64);
        }
        l += 2;
    }
}

pub fn check_even(l_max: usize) -> Result<()> {
    if l_max % 2 != 0 {
        return Err(FodError::OddOrder(l_max));
    }
    Ok(())
}

/// One contiguous degree block of a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelBlock {
    pub l: usize,
    pub start: usize,
    pub len: usize,
}

impl LevelBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Partition of 0..L into per-degree blocks of length 2l+1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelBlockIndex {
    l_max: usize,
    blocks: Vec<LevelBlock>,
}

impl LevelBlockIndex {
    pub fn new(l_max: usize) -> Result<Self> {
        check_even(l_max)?;
        let blocks = (0..=l_max)
            .step_by(2)
            .map(|l| LevelBlock { l, start: sh_index(l, -(l as i64)), len: 2 * l + 1 })
            .collect();
        Ok(Self { l_max, blocks })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn blocks(&self) -> &[LevelBlock] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> Option<&LevelBlock> {
        self.blocks.get(l / 2).filter(|b| b.l == l)
    }

    pub fn len(&self) -> usize {
        sh_count(self.l_max)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Evaluation of the basis on a set of directions: rows are directions.
#[derive(Debug, Clone)]
pub struct ShBasisMatrix {
    values: DMatrix<f64>,
    l_max: usize,
}

impl ShBasisMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn n_coefficients(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, l: usize, m: i64) -> usize {
        sh_index(l, m)
    }

    pub fn get(&self, row: usize, l: usize, m: i64) -> f64 {
        self.values[(row, sh_index(l, m))]
    }
}

/// Orthonormalized associated Legendre values N·P̄_l^m(x) for every l ≤ l_max and
/// m ≤ l, stored at `l * (l + 1) / 2 + m`. `sin_theta` is √(1-x²), passed in so the
/// caller can keep it exactly consistent with the direction components.
fn normalized_legendre(l_max: usize, x: f64, sin_theta: f64, out: &mut [f64]) {
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    out[0] = 0.5 / PI.sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        out[idx(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_theta * out[idx(m - 1, m - 1)];
    }
    for m in 0..l_max {
        out[idx(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * x * out[idx(m, m)];
    }
    for m in 0..=l_max {
        let mf = m as f64;
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            out[idx(l, m)] = a * (x * out[idx(l - 1, m)] - b * out[idx(l - 2, m)]);
        }
    }
}

/// Zonal harmonic Φ_l0 as a function of t = cos θ.
pub fn zonal_harmonic(l: usize, t: f64) -> f64 {
    let mut buf = vec![0.0; (l + 1) * (l + 2) / 2];
    let s = (1.0 - t * t).max(0.0).sqrt();
    normalized_legendre(l, t, s, &mut buf);
    buf[l * (l + 1) / 2]
}

/// Zonal harmonics Φ_l0(t) for every even l ≤ l_max using the three-term recurrence.
pub fn zonal_harmonics(l_max: usize, t: f64) -> Vec<f64> {
    // Legendre P_l(t), scaled by √((2l+1)/4π).
    let mut p_prev = 1.0;
    let mut p = t;
    let mut out = Vec::with_capacity(l_max / 2 + 1);
    out.push(1.0 / (4.0 * PI).sqrt());
    for l in 1..l_max {
        let lf = l as f64;
        let next = ((2.0 * lf + 1.0) * t * p - lf * p_prev) / (lf + 1.0);
        p_prev = p;
        p = next;
        if (l + 1) % 2 == 0 {
            out.push(((2.0 * lf + 3.0) / (4.0 * PI)).sqrt() * p);
        }
    }
    out
}

/// Evaluates one direction into a row slice of length `sh_count(l_max)`.
fn eval_sh_row(d: &Direction, l_max: usize, legendre: &mut [f64], row: &mut [f64]) {
    let (x, y, z) = (d.x(), d.y(), d.z());
    let sin_theta = (x * x + y * y).sqrt();
    let (c1, s1) = if sin_theta > 0.0 { (x / sin_theta, y / sin_theta) } else { (1.0, 0.0) };
    normalized_legendre(l_max, z, sin_theta, legendre);

    // cos(mφ), sin(mφ) by angle addition; exact parity under (x, y) -> (-x, -y).
    let mut cos_m = vec![1.0; l_max + 1];
    let mut sin_m = vec![0.0; l_max + 1];
    for m in 1..=l_max {
        cos_m[m] = cos_m[m - 1] * c1 - sin_m[m - 1] * s1;
        sin_m[m] = sin_m[m - 1] * c1 + cos_m[m - 1] * s1;
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    for l in (0..=l_max).step_by(2) {
        let base = l * (l + 1) / 2;
        row[sh_index(l, 0)] = legendre[base];
        for m in 1..=l {
            let q = sqrt2 * legendre[base + m];
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            row[sh_index(l, -(m as i64))] = q * cos_m[m];
            row[sh_index(l, m as i64)] = sign * q * sin_m[m];
        }
    }
}

/// Evaluates every even-degree basis function up to `l_max` at each direction.
pub fn eval_sh_basis(directions: &[Direction], l_max: usize) -> Result<ShBasisMatrix> {
    check_even(l_max)?;
    let n_coef = sh_count(l_max);
    let mut values = DMatrix::zeros(directions.len(), n_coef);
    let mut legendre = vec![0.0; (l_max + 1) * (l_max + 2) / 2];
    let mut row = vec![0.0; n_coef];
    for (i, d) in directions.iter().enumerate() {
        eval_sh_row(d, l_max, &mut legendre, &mut row);
        for (j, v) in row.iter().enumerate() {
            values[(i, j)] = *v;
        }
    }
    Ok(ShBasisMatrix { values, l_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout() {
        assert_eq!(sh_count(0), 1);
        assert_eq!(sh_count(4), 15);
        assert_eq!(sh_count(10), 66);
        assert_eq!(sh_index(0, 0), 0);
        assert_eq!(sh_index(2, -2), 1);
        assert_eq!(sh_index(2, 2), 5);
        assert_eq!(sh_index(4, -4), 6);
        for i in 0..sh_count(12) {
            let (l, m) = sh_degree_order(i);
            assert_eq!(sh_index(l, m), i);
        }
        let blocks = LevelBlockIndex::new(4).unwrap();
        let lens: Vec<_> = blocks.blocks().iter().map(|b| b.len).collect();
        assert_eq!(lens, vec![1, 5, 9]);
    }

    #[test]
    fn constant_term() {
        let d = Direction::new(0.6, 0.0, 0.8).unwrap();
        let b = eval_sh_basis(&[d], 0).unwrap();
        assert_eq!(b.n_coefficients(), 1);
        assert!((b.values()[(0, 0)] - 0.282_094_791_773_878_14).abs() < 1e-15);
    }

    #[test]
    fn north_pole_only_zonal() {
        let b = eval_sh_basis(&[Direction::Z], 8).unwrap();
        for l in (0..=8).step_by(2) {
            for m in -(l as i64)..=(l as i64) {
                let v = b.get(0, l, m);
                if m == 0 {
                    let expect = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
                    assert!((v - expect).abs() < 1e-13, "l={l}: {v} vs {expect}");
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn odd_order_rejected() {
        assert_eq!(eval_sh_basis(&[Direction::Z], 3).unwrap_err(), FodError::OddOrder(3));
    }

    #[test]
    fn known_closed_forms() {
        // Φ_20 = √(5/16π)(3cos²θ - 1); Φ_2,2 ∝ sin²θ sin 2φ.
        let d = Direction::from_spherical(0.7, 1.1);
        let b = eval_sh_basis(&[d], 2).unwrap();
        let ct = 0.7f64.cos();
        let expect20 = (5.0 / (16.0 * PI)).sqrt() * (3.0 * ct * ct - 1.0);
        assert!((b.get(0, 2, 0) - expect20).abs() < 1e-13);
        let st2 = 0.7f64.sin().powi(2);
        let expect22 = (15.0 / (16.0 * PI)).sqrt() * st2 * (2.2f64).sin();
        assert!((b.get(0, 2, 2) - expect22).abs() < 1e-13);
        let expect2m2 = (15.0 / (16.0 * PI)).sqrt() * st2 * (2.2f64).cos();
        assert!((b.get(0, 2, -2) - expect2m2).abs() < 1e-13);
    }

    #[test]
    fn zonal_helpers_agree() {
        for &t in &[-1.0, -0.3, 0.0, 0.45, 0.99, 1.0] {
            let all = zonal_harmonics(12, t);
            for (k, l) in (0..=12).step_by(2).enumerate() {
                assert!((all[k] - zonal_harmonic(l, t)).abs() < 1e-12);
            }
        }
    }
}
