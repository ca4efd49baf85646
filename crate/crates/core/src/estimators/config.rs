use serde::{Deserialize, Serialize};

use crate::error::{FodError, Result};

/// How the superCSD threshold is compared with FOD values on the dense grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Penalize grid points with F ≤ τ.
    Absolute,
    /// Penalize grid points with F ≤ τ · mean(F). The default: FODs here
    /// integrate to one, so their mean is 1/(4π) and an absolute τ = 0.1
    /// would penalize most of the sphere.
    #[default]
    MeanRelative,
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

pub fn default_ridge_grid() -> Vec<f64> {
    log_spaced(1e-6, 1e2, 100)
}

/// Settings shared by all estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub l_max: usize,
    pub l_max_super: usize,
    /// Highest degree left unshrunk by BJS.
    pub l0: usize,
    /// Multiplier of log(2l+1) in the BJS threshold.
    pub c: f64,
    pub ridge_grid: Vec<f64>,
    pub scsd_tau: f64,
    pub scsd_lambda: f64,
    pub scsd_max_iters: usize,
    pub scsd_threshold: ThresholdMode,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            l_max: 8,
            l_max_super: 12,
            l0: 4,
            c: 2.0,
            ridge_grid: default_ridge_grid(),
            scsd_tau: 0.1,
            scsd_lambda: 1.0,
            scsd_max_iters: 50,
            scsd_threshold: ThresholdMode::MeanRelative,
        }
    }
}

impl FitConfig {
    pub fn with_orders(l_max: usize, l_max_super: usize) -> Self {
        Self { l_max, l_max_super, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FodError::InvalidParameter(msg));
        if self.l_max % 2 != 0 || self.l_max_super % 2 != 0 {
            return Err(FodError::OddOrder(if self.l_max % 2 != 0 { self.l_max } else { self.l_max_super }));
        }
        if self.l_max_super < self.l_max {
            return bad(format!("l_max_super {} is below l_max {}", self.l_max_super, self.l_max));
        }
        if self.l0 < 2 || self.l0 % 2 != 0 {
            return bad(format!("l0 must be even and at least 2, got {}", self.l0));
        }
        if !(self.c > 1.0) {
            return bad(format!("c must exceed 1, got {}", self.c));
        }
        if self.ridge_grid.is_empty() || self.ridge_grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("ridge grid must be nonempty with positive finite values".into());
        }
        if !(self.scsd_tau.is_finite() && self.scsd_lambda > 0.0) {
            return bad("superCSD needs a finite threshold and a positive penalty weight".into());
        }
        if self.scsd_max_iters == 0 {
            return bad("superCSD iteration cap must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_range() {
        let g = default_ridge_grid();
        assert_eq!(g.len(), 100);
        assert!((g[0] - 1e-6).abs() < 1e-18);
        assert!((g[99] - 1e2).abs() < 1e-10);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn defaults_validate() {
        let c = FitConfig::default();
        c.validate().unwrap();
        assert_eq!((c.l0, c.c, c.scsd_tau, c.scsd_lambda, c.scsd_max_iters), (4, 2.0, 0.1, 1.0, 50));
    }

    #[test]
    fn rejects_bad_settings() {
        let base = FitConfig::default();
        for cfg in [
            FitConfig { l0: 3, ..base.clone() },
            FitConfig { l0: 0, ..base.clone() },
            FitConfig { c: 1.0, ..base.clone() },
            FitConfig { ridge_grid: vec![], ..base.clone() },
            FitConfig { l_max_super: 6, ..base.clone() },
            FitConfig { l_max: 7, ..base.clone() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg: FitConfig = serde_json::from_str(r#"{"l_max": 10, "scsd_threshold": "absolute"}"#).unwrap();
        assert_eq!(cfg.l_max, 10);
        assert_eq!(cfg.ridge_grid.len(), 100);
        assert_eq!(cfg.scsd_threshold, ThresholdMode::Absolute);
    }
}
