use serde::{Deserialize, Serialize};

use crate::error::{FodError, Result};
use crate::estimators::{EstimatorKind, FitConfig, ThresholdMode};
use crate::model::{FiberConfiguration, KernelParams};
use crate::peaks::PeakConfig;
use crate::sphere::{geodesic_face_centers, icosphere_grid, Direction, GradientTable, GridMode, Hemisphere};

fn default_fibers() -> usize {
    2
}

fn default_l0() -> usize {
    4
}

fn default_c() -> f64 {
    2.0
}

fn default_lambda_major() -> f64 {
    1.7e-3
}

fn default_lambda_minor() -> f64 {
    3e-4
}

fn default_scsd_tau() -> f64 {
    0.1
}

fn default_scsd_lambda() -> f64 {
    1.0
}

fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}

/// One synthetic setting: a crossing configuration, an acquisition, and fit orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub label: String,
    /// Number of fibers: 1, 2 or 3.
    #[serde(default = "default_fibers")]
    pub fibers: usize,
    /// Pairwise separation in degrees (ignored for one fiber).
    #[serde(default)]
    pub separation_deg: f64,
    pub b: f64,
    pub snr: f64,
    /// Requested number of gradient directions; the nearest icosphere design is used.
    pub n_gradients: usize,
    pub l_max: usize,
    pub l_max_super: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_lambda_major")]
    pub lambda_major: f64,
    #[serde(default = "default_lambda_minor")]
    pub lambda_minor: f64,
    #[serde(default = "default_l0")]
    pub l0: usize,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_scsd_tau")]
    pub scsd_tau: f64,
    #[serde(default = "default_scsd_lambda")]
    pub scsd_lambda: f64,
    #[serde(default)]
    pub scsd_threshold: ThresholdMode,
    #[serde(default)]
    pub peaks: PeakConfig,
    /// Optional row-major rotation applied to both fibers and gradients.
    #[serde(default)]
    pub rotation: Option<[[f64; 3]; 3]>,
}

impl ExperimentConfig {
    /// Two equal-weight fibers on the default kernel with all three estimators.
    pub fn two_fiber(separation_deg: f64, b: f64, snr: f64, n_gradients: usize, l_max: usize, l_max_super: usize) -> Self {
        Self {
            label: String::new(),
            fibers: 2,
            separation_deg,
            b,
            snr,
            n_gradients,
            l_max,
            l_max_super,
            replicates: 100,
            seed: 2024,
            estimators: default_estimators(),
            lambda_major: default_lambda_major(),
            lambda_minor: default_lambda_minor(),
            l0: default_l0(),
            c: default_c(),
            scsd_tau: default_scsd_tau(),
            scsd_lambda: default_scsd_lambda(),
            scsd_threshold: ThresholdMode::default(),
            peaks: PeakConfig::default(),
            rotation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FodError::InvalidParameter(m.to_string()));
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required");
        }
        if !(1..=3).contains(&self.fibers) {
            return bad("fibers must be 1, 2 or 3");
        }
        if self.fibers > 1 && !(self.separation_deg > 0.0 && self.separation_deg <= 90.0) {
            return bad("separation must lie in (0, 90] degrees");
        }
        if !(self.snr > 0.0) {
            return bad("snr must be positive");
        }
        self.kernel()?;
        self.fit_config().validate()
    }

    pub fn kernel(&self) -> Result<KernelParams> {
        KernelParams::new(self.lambda_major, self.lambda_minor, self.b, 1.0)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            l0: self.l0,
            c: self.c,
            scsd_tau: self.scsd_tau,
            scsd_lambda: self.scsd_lambda,
            scsd_threshold: self.scsd_threshold,
            ..FitConfig::with_orders(self.l_max, self.l_max_super)
        }
    }

    /// Ground-truth fibers before any rotation.
    pub fn fiber_configuration(&self) -> Result<FiberConfiguration> {
        let theta = self.separation_deg.to_radians();
        let dirs = match self.fibers {
            1 => vec![Direction::Z],
            2 => vec![Direction::Z, Direction::from_spherical(theta, 0.0)],
            _ if (self.separation_deg - 90.0).abs() < 1e-12 => vec![Direction::X, Direction::Y, Direction::Z],
            _ => vec![Direction::Z, Direction::from_spherical(theta, 0.0), Direction::from_spherical(2.0 * theta, 0.0)],
        };
        FiberConfiguration::equal(dirs)
    }

    pub fn gradient_design(&self) -> Result<GradientTable> {
        gradient_design(self.n_gradients, self.b)
    }
}

/// A list of settings, read from `[[setting]]` tables (TOML) or a `setting` array (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSuite {
    #[serde(rename = "setting")]
    pub settings: Vec<ExperimentConfig>,
}

impl ExperimentSuite {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let suite: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| FodError::Parse(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| FodError::Parse(e.to_string()))?
        };
        if suite.settings.is_empty() {
            return Err(FodError::InvalidParameter("experiment file has no settings".into()));
        }
        for s in &suite.settings {
            s.validate()?;
        }
        Ok(suite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DesignFamily {
    GeodesicCenters(usize),
    UpperVertices(usize),
}

fn design_families() -> Vec<(usize, DesignFamily)> {
    let mut out: Vec<(usize, DesignFamily)> =
        (1..=12).map(|k| (10 * k * k, DesignFamily::GeodesicCenters(k))).collect();
    out.extend((1..=5).map(|s| (5 * 4usize.pow(s as u32) + 1, DesignFamily::UpperVertices(s))));
    out.sort_by_key(|(n, _)| *n);
    out
}

/// Upper-hemisphere icosphere design with the count closest to `requested`:
/// frequency-k geodesic face centers (10k² directions) or midpoint-subdivision
/// vertices (5·4^s + 1). Ties go to the smaller design.
pub fn gradient_design(requested: usize, b: f64) -> Result<GradientTable> {
    let (_, family) = design_families()
        .into_iter()
        .min_by_key(|(n, _)| n.abs_diff(requested))
        .expect("nonempty family list");
    let grid = match family {
        DesignFamily::GeodesicCenters(k) => geodesic_face_centers(k, Hemisphere::Upper)?,
        DesignFamily::UpperVertices(s) => icosphere_grid(s, GridMode::Vertices, Hemisphere::Upper)?,
    };
    GradientTable::from_grid(&grid, b)
}
