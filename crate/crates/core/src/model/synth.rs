use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::response::KernelParams;
use crate::error::{FodError, Result};
use crate::sphere::{eval_sh_basis, Direction, GradientTable};

/// Ground-truth FOD made of weighted axial point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberConfiguration {
    directions: Vec<Direction>,
    weights: Vec<f64>,
}

impl FiberConfiguration {
    /// Weights are renormalized to sum to one.
    pub fn new(directions: Vec<Direction>, weights: Vec<f64>) -> Result<Self> {
        if directions.is_empty() || directions.len() != weights.len() {
            return Err(FodError::InvalidParameter("need one weight per fiber and at least one fiber".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(FodError::InvalidParameter("fiber weights must be nonnegative with positive sum".into()));
        }
        Ok(Self { directions, weights: weights.iter().map(|w| w / total).collect() })
    }

    pub fn equal(directions: Vec<Direction>) -> Result<Self> {
        let w = vec![1.0; directions.len()];
        Self::new(directions, w)
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rotated(&self, m: &[[f64; 3]; 3]) -> Self {
        Self { directions: self.directions.iter().map(|d| d.rotate(m)).collect(), weights: self.weights.clone() }
    }

    /// SH coefficients of the point-mass FOD: f_lm = Σ_k w_k Φ_lm(d_k).
    pub fn sh_coefficients(&self, l_max: usize) -> Result<Vec<f64>> {
        let basis = eval_sh_basis(&self.directions, l_max)?;
        let phi = basis.values();
        Ok((0..phi.ncols())
            .map(|j| self.weights.iter().enumerate().map(|(k, w)| w * phi[(k, j)]).sum())
            .collect())
    }
}

/// Noiseless signal S(x) = Σ_k w_k R(x·d_k): the spherical convolution of a
/// point-mass FOD with the kernel.
pub fn synthesize_signal(config: &FiberConfiguration, kernel: &KernelParams, gradients: &GradientTable) -> Vec<f64> {
    gradients
        .directions()
        .iter()
        .map(|x| config.directions.iter().zip(&config.weights).map(|(d, w)| w * kernel.signal(x.dot(d))).sum())
        .collect()
}

/// Deterministic per-stream Gaussian source. `stream` selects an independent
/// ChaCha stream under the same key, so replicate `i` of a run always sees the
/// same draws regardless of scheduling.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Magnitude of the signal with independent N(0, σ²) noise on the real and
/// imaginary channels, σ = s0 / snr.
pub fn add_rician_noise(signal: &[f64], s0: f64, snr: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = noise_rng(seed, 0);
    add_rician_noise_with(signal, s0, snr, &mut rng)
}

pub fn add_rician_noise_with<R: Rng>(signal: &[f64], s0: f64, snr: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(snr > 0.0) {
        return Err(FodError::InvalidParameter(format!("snr must be positive, got {snr}")));
    }
    let sigma = s0 / snr;
    Ok(signal
        .iter()
        .map(|&s| {
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            (s + sigma * e1).hypot(sigma * e2)
        })
        .collect())
}
