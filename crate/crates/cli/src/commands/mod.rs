pub mod anova;
pub mod bench;
pub mod fit;
pub mod simulate;

use std::fs;
use std::path::Path;

use clap::Args;
use fodkit::estimators::FitConfig;

use crate::error::{CliError, CliResult};

/// Orders and BJS settings; anything left unset takes the library default.
#[derive(Debug, Clone, Default, Args)]
pub struct FitOptions {
    /// Order of the fitted FOD.
    #[arg(long = "lmax")]
    pub l_max: Option<usize>,
    /// Order of the super-resolution (sharpened) FOD.
    #[arg(long = "lmax-super")]
    pub l_max_super: Option<usize>,
    /// Highest order left unshrunk by BJS.
    #[arg(long)]
    pub l0: Option<usize>,
    /// BJS threshold multiplier.
    #[arg(long)]
    pub c: Option<f64>,
}

impl FitOptions {
    pub fn fit_config(&self) -> CliResult<FitConfig> {
        let base = FitConfig::default();
        let cfg = FitConfig {
            l_max: self.l_max.unwrap_or(base.l_max),
            l_max_super: self.l_max_super.unwrap_or(base.l_max_super),
            l0: self.l0.unwrap_or(base.l0),
            c: self.c.unwrap_or(base.c),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub(crate) fn thread_pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::InvalidArgument(format!("cannot start {threads} worker threads: {e}")))
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
