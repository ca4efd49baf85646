//! Group-level statistics: the lateralization score and a 2×2 two-way ANOVA.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{FodError, Result};

/// (L − R) / ((L + R)/2), in [−2, 2].
pub fn lateralization_score(left_count: u64, right_count: u64) -> Result<f64> {
    let total = left_count + right_count;
    if total == 0 {
        return Err(FodError::InvalidParameter("both streamline counts are zero".into()));
    }
    Ok((left_count as f64 - right_count as f64) / (total as f64 / 2.0))
}

/// Which factor enters the sequential decomposition first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermOrder {
    #[default]
    HandednessFirst,
    GenderFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaTerm {
    pub name: String,
    pub df: usize,
    pub sum_sq: f64,
    pub mean_sq: f64,
    /// None for the residual row.
    pub f_value: Option<f64>,
    pub p_value: Option<f64>,
}

/// Difference between the two handedness levels of the unweighted cell-mean averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastInterval {
    /// "<first level> - <second level>"
    pub contrast: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaResult {
    pub grand_mean: f64,
    pub order: TermOrder,
    /// Effect terms in fitting order, then the residual row last.
    pub terms: Vec<AnovaTerm>,
    pub handedness_contrast: ContrastInterval,
    pub residuals: Vec<f64>,
}

impl AnovaResult {
    pub fn term(&self, name: &str) -> Option<&AnovaTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn residual(&self) -> &AnovaTerm {
        self.terms.last().expect("residual row is always present")
    }

    /// R-style table text.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<24} {:>4} {:>12} {:>12} {:>9} {:>9}\n", "", "Df", "Sum Sq", "Mean Sq", "F value", "Pr(>F)");
        for t in &self.terms {
            let f = t.f_value.map(|v| format!("{v:.3}")).unwrap_or_default();
            let p = t.p_value.map(|v| format!("{v:.4}")).unwrap_or_default();
            out.push_str(&format!(
                "{:<24} {:>4} {:>12.5} {:>12.5} {:>9} {:>9}\n",
                t.name, t.df, t.sum_sq, t.mean_sq, f, p
            ));
        }
        let c = &self.handedness_contrast;
        out.push_str(&format!(
            "\n{}: {:.4} ({:.0}% CI {:.4} to {:.4})\n",
            c.contrast,
            c.estimate,
            100.0 * c.level,
            c.lower,
            c.upper
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,df,sum_sq,mean_sq,f_value,p_value\n");
        for t in &self.terms {
            let o = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            out.push_str(&format!("{},{},{:e},{:e},{},{}\n", t.name, t.df, t.sum_sq, t.mean_sq, o(t.f_value), o(t.p_value)));
        }
        out
    }
}

/// Maps labels onto 0/1 in order of first appearance; fails unless exactly two levels occur.
fn two_levels<S: AsRef<str>>(labels: &[S], factor: &str) -> Result<(Vec<usize>, [String; 2])> {
    let mut levels: Vec<String> = Vec::new();
    let codes = labels
        .iter()
        .map(|l| {
            let l = l.as_ref();
            match levels.iter().position(|x| x == l) {
                Some(i) => i,
                None => {
                    levels.push(l.to_string());
                    levels.len() - 1
                }
            }
        })
        .collect();
    if levels.len() != 2 {
        return Err(FodError::InvalidParameter(format!("{factor} must have exactly two levels, found {}", levels.len())));
    }
    Ok((codes, [levels[0].clone(), levels[1].clone()]))
}

fn rss(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let normal = design.transpose() * design;
    let chol = normal.cholesky().ok_or_else(|| FodError::RankDeficient("ANOVA design is singular".into()))?;
    let beta = chol.solve(&(design.transpose() * y));
    let resid = y - design * beta;
    Ok((resid.norm_squared(), resid))
}

/// Sequential (type I) sums of squares for `score ~ A + B + A:B` on a 2×2
/// layout, where A is handedness unless `order` says otherwise, plus the
/// 95% interval for the handedness contrast.
pub fn two_way_anova<S: AsRef<str>, T: AsRef<str>>(
    scores: &[f64],
    handedness: &[S],
    gender: &[T],
    order: TermOrder,
) -> Result<AnovaResult> {
    let n = scores.len();
    if handedness.len() != n || gender.len() != n {
        return Err(FodError::DimensionMismatch("scores and factor labels differ in length".into()));
    }
    if n < 5 {
        return Err(FodError::InsufficientObservations { n, rank: 4 });
    }
    let (h, h_levels) = two_levels(handedness, "handedness")?;
    let (g, _) = two_levels(gender, "gender")?;
    let mut cells = [[0usize; 2]; 2];
    let mut cell_sums = [[0.0; 2]; 2];
    for i in 0..n {
        cells[h[i]][g[i]] += 1;
        cell_sums[h[i]][g[i]] += scores[i];
    }
    if cells.iter().flatten().any(|&c| c == 0) {
        return Err(FodError::InvalidParameter("every handedness × gender cell needs at least one score".into()));
    }

    let effect = |code: usize| if code == 0 { 1.0 } else { -1.0 };
    let (first, second, names) = match order {
        TermOrder::HandednessFirst => (&h, &g, ["handedness", "gender"]),
        TermOrder::GenderFirst => (&g, &h, ["gender", "handedness"]),
    };
    let y = DVector::from_column_slice(scores);
    let column = |k: usize, i: usize| match k {
        0 => 1.0,
        1 => effect(first[i]),
        2 => effect(second[i]),
        _ => effect(first[i]) * effect(second[i]),
    };
    let mut rss_seq = Vec::with_capacity(4);
    let mut final_resid = DVector::zeros(n);
    for p in 1..=4 {
        let design = DMatrix::from_fn(n, p, |i, k| column(k, i));
        let (r, resid) = rss(&design, &y)?;
        rss_seq.push(r);
        final_resid = resid;
    }
    // Sums of squares below rounding noise of ‖y‖² are exact zeros.
    let noise_floor = 1e-24 * y.norm_squared().max(f64::MIN_POSITIVE);
    let clean = |v: f64| if v <= noise_floor { 0.0 } else { v };
    let resid_ss = clean(rss_seq[3]);
    let resid_df = n - 4;
    let resid_ms = resid_ss / resid_df as f64;
    let f_dist = FisherSnedecor::new(1.0, resid_df as f64).map_err(|e| FodError::InvalidParameter(e.to_string()))?;
    let term_names = [names[0].to_string(), names[1].to_string(), format!("{}:{}", names[0], names[1])];
    let mut terms: Vec<AnovaTerm> = (0..3)
        .map(|k| {
            let ss = clean(rss_seq[k] - rss_seq[k + 1]);
            let (f, p) = if resid_ms > 0.0 {
                let f = ss / resid_ms;
                (f, f_dist.sf(f))
            } else if ss > 0.0 {
                (f64::INFINITY, 0.0)
            } else {
                (0.0, 1.0)
            };
            AnovaTerm { name: term_names[k].clone(), df: 1, sum_sq: ss, mean_sq: ss, f_value: Some(f), p_value: Some(p) }
        })
        .collect();
    terms.push(AnovaTerm {
        name: "residuals".into(),
        df: resid_df,
        sum_sq: resid_ss,
        mean_sq: resid_ms,
        f_value: None,
        p_value: None,
    });

    let cell_mean = |a: usize, b: usize| cell_sums[a][b] / cells[a][b] as f64;
    let estimate = 0.5 * (cell_mean(0, 0) + cell_mean(0, 1)) - 0.5 * (cell_mean(1, 0) + cell_mean(1, 1));
    let inv_n: f64 = cells.iter().flatten().map(|&c| 1.0 / c as f64).sum();
    let std_error = (resid_ms * inv_n / 4.0).sqrt();
    let t = StudentsT::new(0.0, 1.0, resid_df as f64).map_err(|e| FodError::InvalidParameter(e.to_string()))?;
    let q = t.inverse_cdf(0.975);
    let handedness_contrast = ContrastInterval {
        contrast: format!("{} - {}", h_levels[0], h_levels[1]),
        estimate,
        std_error,
        lower: estimate - q * std_error,
        upper: estimate + q * std_error,
        level: 0.95,
    };

    Ok(AnovaResult {
        grand_mean: scores.iter().sum::<f64>() / n as f64,
        order,
        terms,
        handedness_contrast,
        residuals: final_resid.as_slice().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lateralization_examples() {
        assert_eq!(lateralization_score(100, 100).unwrap(), 0.0);
        assert_eq!(lateralization_score(300, 100).unwrap(), 1.0);
        assert_eq!(lateralization_score(0, 100).unwrap(), -2.0);
        assert_eq!(lateralization_score(100, 0).unwrap(), 2.0);
        assert!(lateralization_score(0, 0).is_err());
    }

    #[test]
    fn constant_scores_give_zero_terms() {
        let h = ["L", "L", "R", "R", "L", "R"];
        let g = ["F", "M", "F", "M", "M", "F"];
        let res = two_way_anova(&[0.3; 6], &h, &g, TermOrder::default()).unwrap();
        for t in &res.terms {
            assert!(t.sum_sq.abs() < 1e-20, "{t:?}");
        }
        for t in &res.terms[..3] {
            assert_eq!(t.f_value, Some(0.0));
        }
    }

    #[test]
    fn rejects_empty_cell() {
        let h = ["L", "L", "R", "R", "L"];
        let g = ["F", "M", "F", "F", "M"];
        assert!(two_way_anova(&[1.0, 2.0, 3.0, 4.0, 5.0], &h, &g, TermOrder::default()).is_err());
    }
}
