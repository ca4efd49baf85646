use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bjs::BjsModel;
use super::coefficients::ShCoefficients;
use super::config::FitConfig;
use super::ridge::RidgePath;
use super::scsd::{ridge_path, ScsdModel};
use crate::error::{FodError, Result};
use crate::model::{KernelParams, ResponseKernel};
use crate::sphere::{dense_grid, GradientTable, SphericalGrid};

/// Everything an estimator needs to precompute its design-level state.
#[derive(Debug, Clone)]
pub struct FitContext {
    pub gradients: GradientTable,
    pub kernel: KernelParams,
    pub dense: SphericalGrid,
    pub config: FitConfig,
}

impl FitContext {
    /// Context on the default 2562-point evaluation grid.
    pub fn new(gradients: GradientTable, kernel: KernelParams, config: FitConfig) -> Self {
        Self { gradients, kernel, dense: dense_grid(), config }
    }

    fn response(&self) -> Result<ResponseKernel> {
        ResponseKernel::new(self.kernel, self.config.l_max_super.max(self.config.l_max))
    }
}

/// Result of fitting one voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub coefficients: ShCoefficients,
    /// Ridge weight chosen by BIC, for estimators that select one.
    pub lambda: Option<f64>,
    pub iterations: Option<usize>,
    /// False only for iterative estimators that hit their cap.
    pub converged: bool,
}

impl FitOutcome {
    fn direct(coefficients: ShCoefficients) -> Self {
        Self { coefficients, lambda: None, iterations: None, converged: true }
    }
}

/// A voxelwise FOD estimator bound to one acquisition design.
pub trait FodEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    /// Order of the returned coefficients.
    fn output_l_max(&self) -> usize;
    fn fit(&self, signal: &[f64]) -> Result<FitOutcome>;
}

/// The built-in estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Bjs,
    Shridge,
    Scsd,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Bjs, EstimatorKind::Shridge, EstimatorKind::Scsd];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Bjs => "bjs",
            EstimatorKind::Shridge => "shridge",
            EstimatorKind::Scsd => "scsd",
        }
    }

    /// Display label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Bjs => "BJS",
            EstimatorKind::Shridge => "SHridge",
            EstimatorKind::Scsd => "SCSD",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = FodError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| FodError::UnknownEstimator(s.to_string()))
    }
}

struct Bjs(BjsModel, usize);

impl FodEstimator for Bjs {
    fn name(&self) -> &'static str {
        EstimatorKind::Bjs.as_str()
    }

    fn output_l_max(&self) -> usize {
        self.1
    }

    fn fit(&self, signal: &[f64]) -> Result<FitOutcome> {
        self.0.fit(signal).map(FitOutcome::direct)
    }
}

struct Shridge(RidgePath, usize);

impl FodEstimator for Shridge {
    fn name(&self) -> &'static str {
        EstimatorKind::Shridge.as_str()
    }

    fn output_l_max(&self) -> usize {
        self.1
    }

    fn fit(&self, signal: &[f64]) -> Result<FitOutcome> {
        let sel = self.0.select(signal)?;
        Ok(FitOutcome { coefficients: sel.coefficients, lambda: Some(sel.lambda), iterations: None, converged: true })
    }
}

struct Scsd(ScsdModel, usize);

impl FodEstimator for Scsd {
    fn name(&self) -> &'static str {
        EstimatorKind::Scsd.as_str()
    }

    fn output_l_max(&self) -> usize {
        self.1
    }

    fn fit(&self, signal: &[f64]) -> Result<FitOutcome> {
        let out = self.0.fit(signal)?;
        Ok(FitOutcome {
            coefficients: out.coefficients,
            lambda: None,
            iterations: Some(out.iterations),
            converged: out.converged,
        })
    }
}

fn build_bjs(ctx: &FitContext) -> Result<Box<dyn FodEstimator>> {
    let model = BjsModel::new(&ctx.gradients, &ctx.response()?, &ctx.dense, &ctx.config)?;
    Ok(Box::new(Bjs(model, ctx.config.l_max_super)))
}

fn build_shridge(ctx: &FitContext) -> Result<Box<dyn FodEstimator>> {
    ctx.config.validate()?;
    let path = ridge_path(&ctx.gradients, &ctx.response()?, &ctx.config)?;
    Ok(Box::new(Shridge(path, ctx.config.l_max)))
}

fn build_scsd(ctx: &FitContext) -> Result<Box<dyn FodEstimator>> {
    let model = ScsdModel::new(&ctx.gradients, &ctx.response()?, &ctx.dense, &ctx.config)?;
    Ok(Box::new(Scsd(model, ctx.config.l_max_super)))
}

pub type EstimatorConstructor = fn(&FitContext) -> Result<Box<dyn FodEstimator>>;

/// Name → constructor table. Names are matched case-insensitively.
#[derive(Clone)]
pub struct EstimatorRegistry {
    entries: BTreeMap<String, EstimatorConstructor>,
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(EstimatorKind::Bjs.as_str(), build_bjs);
        r.register(EstimatorKind::Shridge.as_str(), build_shridge);
        r.register(EstimatorKind::Scsd.as_str(), build_scsd);
        r
    }
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Adds or replaces an entry.
    pub fn register(&mut self, name: &str, constructor: EstimatorConstructor) {
        self.entries.insert(name.to_ascii_lowercase(), constructor);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(&name.to_ascii_lowercase())
    }

    pub fn build(&self, name: &str, ctx: &FitContext) -> Result<Box<dyn FodEstimator>> {
        let ctor = self
            .entries
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| FodError::UnknownEstimator(name.to_string()))?;
        ctor(ctx)
    }
}
