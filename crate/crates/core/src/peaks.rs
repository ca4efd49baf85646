//! Peak extraction from FODs on a triangulated sphere, and matching of
//! estimated peaks to true fiber directions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FodError, Result};
use crate::estimators::ShCoefficients;
use crate::sphere::{acute_angle_deg, eval_sh_basis, Direction, SphericalGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakConfig {
    /// Candidates below this fraction of the global maximum are dropped.
    pub rel_threshold: f64,
    /// A candidate must exceed every vertex within this many mesh hops.
    pub neighborhood_hops: usize,
    pub max_peaks: usize,
    /// Candidates closer than this axial angle are merged into the larger.
    pub merge_angle_deg: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self { rel_threshold: 0.25, neighborhood_hops: 2, max_peaks: 4, merge_angle_deg: 15.0 }
    }
}

/// A local maximum of the FOD. Rank 0 is the largest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub direction: Direction,
    pub value: f64,
    pub prominence_rank: usize,
}

impl Peak {
    /// `voxel,rank,x,y,z,value`
    pub fn to_csv_row(&self, voxel: usize) -> String {
        let d = self.direction;
        format!("{voxel},{},{},{},{},{}", self.prominence_rank, d.x(), d.y(), d.z(), self.value)
    }
}

/// FOD values sampled on a mesh grid.
#[derive(Debug, Clone)]
pub struct FodField<'a> {
    pub values: Vec<f64>,
    pub grid: &'a SphericalGrid,
}

/// Vertices within `hops` mesh steps of each vertex, excluding the vertex itself.
fn neighborhoods(adjacency: &[Vec<usize>], hops: usize) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut seen = vec![usize::MAX; n];
    (0..n)
        .map(|start| {
            seen[start] = start;
            let mut frontier = vec![start];
            let mut out = Vec::new();
            for _ in 0..hops {
                let mut next = Vec::new();
                for &v in &frontier {
                    for &w in &adjacency[v] {
                        if seen[w] != start {
                            seen[w] = start;
                            out.push(w);
                            next.push(w);
                        }
                    }
                }
                frontier = next;
            }
            out
        })
        .collect()
}

/// Peak finder bound to one mesh grid and coefficient order.
#[derive(Debug, Clone)]
pub struct PeakDetector {
    grid: SphericalGrid,
    basis: DMatrix<f64>,
    neighborhoods: Vec<Vec<usize>>,
    l_max: usize,
    config: PeakConfig,
}

impl PeakDetector {
    pub fn new(grid: &SphericalGrid, l_max: usize, config: PeakConfig) -> Result<Self> {
        let adjacency = grid
            .adjacency()
            .ok_or_else(|| FodError::InvalidParameter("peak detection needs a grid with mesh adjacency".into()))?;
        if !(config.rel_threshold >= 0.0) || config.max_peaks == 0 {
            return Err(FodError::InvalidParameter("peak threshold must be nonnegative and max_peaks positive".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            basis: eval_sh_basis(grid.directions(), l_max)?.into_values(),
            neighborhoods: neighborhoods(adjacency, config.neighborhood_hops),
            l_max,
            config,
        })
    }

    pub fn config(&self) -> &PeakConfig {
        &self.config
    }

    pub fn evaluate(&self, f: &ShCoefficients) -> Result<FodField<'_>> {
        if f.l_max() > self.l_max {
            return Err(FodError::DimensionMismatch(format!(
                "detector built for order {} cannot evaluate order {}",
                self.l_max,
                f.l_max()
            )));
        }
        let values = crate::estimators::evaluate_prefix(&self.basis, f.values());
        Ok(FodField { values, grid: &self.grid })
    }

    pub fn detect(&self, f: &ShCoefficients) -> Result<Vec<Peak>> {
        let field = self.evaluate(f)?;
        Ok(self.peaks_of(&field.values))
    }

    fn peaks_of(&self, values: &[f64]) -> Vec<Peak> {
        let global_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(global_max > 0.0) {
            return Vec::new();
        }
        let floor = self.config.rel_threshold * global_max;
        let mut candidates: Vec<usize> = (0..values.len())
            .filter(|&i| {
                values[i] > 0.0
                    && values[i] >= floor
                    && self.neighborhoods[i].iter().all(|&j| values[i] > values[j])
            })
            .collect();
        candidates.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

        let dirs = self.grid.directions();
        let mut kept: Vec<usize> = Vec::new();
        for c in candidates {
            if kept.iter().all(|&k| acute_angle_deg(&dirs[k], &dirs[c]) > self.config.merge_angle_deg) {
                kept.push(c);
                if kept.len() == self.config.max_peaks {
                    break;
                }
            }
        }
        kept.into_iter()
            .enumerate()
            .map(|(rank, i)| Peak { direction: dirs[i].canonical(), value: values[i], prominence_rank: rank })
            .collect()
    }
}

pub fn detect_peaks(f: &ShCoefficients, dense: &SphericalGrid, config: PeakConfig) -> Result<Vec<Peak>> {
    PeakDetector::new(dense, f.l_max(), config)?.detect(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub truth_index: usize,
    pub estimate_index: usize,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PeakMatch {
    /// One pair per true direction, in truth order.
    Matched(Vec<MatchedPair>),
    CountMismatch { estimated: usize, truth: usize },
}

impl PeakMatch {
    pub fn pairs(&self) -> Option<&[MatchedPair]> {
        match self {
            PeakMatch::Matched(p) => Some(p),
            PeakMatch::CountMismatch { .. } => None,
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// Pairs estimates with truth by the assignment of least total acute angle,
/// searched exhaustively. Counts must agree.
pub fn match_peaks(estimated: &[Direction], truth: &[Direction]) -> PeakMatch {
    if estimated.len() != truth.len() {
        return PeakMatch::CountMismatch { estimated: estimated.len(), truth: truth.len() };
    }
    let angles: Vec<Vec<f64>> =
        truth.iter().map(|t| estimated.iter().map(|e| acute_angle_deg(t, e)).collect()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(truth.len()) {
        let total: f64 = perm.iter().enumerate().map(|(t, &e)| angles[t][e]).sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, perm));
        }
    }
    let (_, perm) = best.expect("at least the empty permutation");
    PeakMatch::Matched(
        perm.iter()
            .enumerate()
            .map(|(t, &e)| MatchedPair { truth_index: t, estimate_index: e, angle_deg: angles[t][e] })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::dense_grid;

    #[test]
    fn permutation_counts() {
        assert_eq!(permutations(0).len(), 1);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(3)[0], vec![0, 1, 2]);
    }

    #[test]
    fn neighborhoods_grow_with_hops() {
        let g = dense_grid();
        let one = neighborhoods(g.adjacency().unwrap(), 1);
        let two = neighborhoods(g.adjacency().unwrap(), 2);
        for i in 0..g.len() {
            assert!(one[i].len() == 5 || one[i].len() == 6);
            assert!(two[i].len() > one[i].len() && !two[i].contains(&i));
        }
    }

    #[test]
    fn constant_fod_has_no_peaks() {
        let f = ShCoefficients::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert!(detect_peaks(&f, &dense_grid(), PeakConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn exact_match_and_mismatch() {
        let truth = [Direction::Z, Direction::X];
        match match_peaks(&truth, &truth) {
            PeakMatch::Matched(p) => assert!(p.iter().all(|m| m.angle_deg == 0.0)),
            other => panic!("{other:?}"),
        }
        assert_eq!(match_peaks(&[Direction::Z], &truth), PeakMatch::CountMismatch { estimated: 1, truth: 2 });
    }

    #[test]
    fn needs_adjacency() {
        let g = dense_grid().upper_hemisphere();
        assert!(PeakDetector::new(&g, 8, PeakConfig::default()).is_err());
    }
}
