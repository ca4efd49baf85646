use std::path::{Path, PathBuf};

use clap::Args;
use fodkit::experiment::{two_way_anova, AnovaResult, TermOrder};
use serde::Deserialize;

use super::write_text;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct AnovaArgs {
    /// CSV with columns subject_id, score, handedness, gender.
    pub scores: PathBuf,
    #[arg(long, value_enum, default_value = "handedness-first")]
    pub order: OrderArg,
    /// ANOVA table CSV destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-subject residuals CSV destination.
    #[arg(long)]
    pub residuals: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OrderArg {
    HandednessFirst,
    GenderFirst,
}

impl From<OrderArg> for TermOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::HandednessFirst => TermOrder::HandednessFirst,
            OrderArg::GenderFirst => TermOrder::GenderFirst,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScoreRow {
    pub subject_id: String,
    pub score: f64,
    pub handedness: String,
    pub gender: String,
}

pub fn read_scores(path: &Path) -> CliResult<Vec<ScoreRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::format(path, e.to_string()))?;
    reader.deserialize().map(|row| row.map_err(|e| CliError::format(path, e.to_string()))).collect()
}

pub fn anova(args: &AnovaArgs) -> CliResult<(Vec<ScoreRow>, AnovaResult)> {
    let rows = read_scores(&args.scores)?;
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let handedness: Vec<&str> = rows.iter().map(|r| r.handedness.as_str()).collect();
    let gender: Vec<&str> = rows.iter().map(|r| r.gender.as_str()).collect();
    let result = two_way_anova(&scores, &handedness, &gender, args.order.into())?;
    Ok((rows, result))
}

pub fn run(args: &AnovaArgs) -> CliResult<()> {
    let (rows, result) = anova(args)?;
    print!("{}", result.to_table());
    if let Some(path) = &args.out {
        write_text(path, &result.to_csv())?;
    }
    if let Some(path) = &args.residuals {
        let mut text = String::from("subject_id,residual\n");
        for (row, r) in rows.iter().zip(&result.residuals) {
            text.push_str(&format!("{},{r:e}\n", row.subject_id));
        }
        write_text(path, &text)?;
    }
    Ok(())
}
