//! Icosphere grids: recursive midpoint subdivision, k-frequency geodesic
//! subdivision, face centers, hemisphere selection and quadrature weights.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Direction;
use crate::error::{FodError, Result};

pub const MAX_SUBDIVISION: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSource {
    IcosphereVertices,
    IcosphereFaceCenters,
    UserSupplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    Vertices,
    FaceCenters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hemisphere {
    Full,
    Upper,
}

/// A set of directions with optional quadrature weights and mesh adjacency.
#[derive(Debug, Clone)]
pub struct SphericalGrid {
    directions: Vec<Direction>,
    weights: Option<Vec<f64>>,
    adjacency: Option<Vec<Vec<usize>>>,
    source: GridSource,
}

impl SphericalGrid {
    /// Wraps user directions, rejecting axial duplicates.
    pub fn from_directions(directions: Vec<Direction>) -> Result<Self> {
        for (i, a) in directions.iter().enumerate() {
            for b in &directions[..i] {
                if a.dot(b).abs() > 1.0 - 1e-12 {
                    return Err(FodError::InvalidParameter(format!(
                        "duplicate direction (up to sign) at index {i}"
                    )));
                }
            }
        }
        Ok(Self { directions, weights: None, adjacency: None, source: GridSource::UserSupplied })
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Neighbor lists over mesh edges, present for full vertex grids.
    pub fn adjacency(&self) -> Option<&[Vec<usize>]> {
        self.adjacency.as_deref()
    }

    pub fn source(&self) -> GridSource {
        self.source
    }

    /// One representative per antipodal pair, keeping the original order.
    pub fn upper_hemisphere(&self) -> SphericalGrid {
        let keep: Vec<usize> =
            (0..self.len()).filter(|&i| self.directions[i].is_upper_representative()).collect();
        SphericalGrid {
            directions: keep.iter().map(|&i| self.directions[i]).collect(),
            weights: self.weights.as_ref().map(|w| keep.iter().map(|&i| 2.0 * w[i]).collect()),
            adjacency: None,
            source: self.source,
        }
    }

    /// Collapses antipodal pairs. Returns the upper-hemisphere representatives and
    /// how many grid points each one stands for: 2 when the grid is closed under
    /// negation, otherwise the grid itself with multiplicity 1.
    pub fn antipodal_half(&self) -> (SphericalGrid, f64) {
        let key = |d: &Direction| d.to_array().map(|c| (c + 0.0).to_bits());
        let present: HashSet<[u64; 3]> = self.directions.iter().map(key).collect();
        let closed = self.directions.iter().all(|d| present.contains(&key(&d.neg())));
        if closed && !self.is_empty() {
            (self.upper_hemisphere(), 2.0)
        } else {
            (self.clone(), 1.0)
        }
    }

    /// `x,y,z[,weight]` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.weights {
            Some(w) => {
                out.push_str("x,y,z,weight\n");
                for (d, wi) in self.directions.iter().zip(w) {
                    let _ = writeln!(out, "{},{},{},{}", d.x(), d.y(), d.z(), wi);
                }
            }
            None => {
                out.push_str("x,y,z\n");
                for d in &self.directions {
                    let _ = writeln!(out, "{},{},{}", d.x(), d.y(), d.z());
                }
            }
        }
        out
    }
}

/// Triangle mesh on the unit sphere.
#[derive(Debug, Clone)]
struct Mesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Icosahedron with vertices at both poles. The lower ring is the exact negation
/// of the upper ring, so the vertex set is closed under antipodes bit-for-bit.
fn icosahedron() -> Mesh {
    let z = 1.0 / 5f64.sqrt();
    let r = 2.0 / 5f64.sqrt();
    let mut vertices = vec![[0.0, 0.0, 1.0]];
    let upper: Vec<[f64; 3]> = (0..5)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / 5.0;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect();
    vertices.extend(upper.iter().copied());
    // lower[k] = -upper[k], sitting at azimuth 2πk/5 + π.
    vertices.extend(upper.iter().map(|v| scale(*v, -1.0)));
    vertices.push([0.0, 0.0, -1.0]);

    let up = |k: usize| 1 + (k % 5);
    // Lower vertex azimuths in increasing order: -upper[k] sits at 2π(k + 2.5)/5,
    // so the one following upper[k] in azimuth is -upper[k+3].
    let low = |k: usize| 6 + ((k + 3) % 5);
    let mut faces = Vec::with_capacity(20);
    for k in 0..5 {
        faces.push([0, up(k), up(k + 1)]);
        faces.push([up(k), low(k), up(k + 1)]);
        faces.push([up(k + 1), low(k), low(k + 1)]);
        faces.push([11, low(k + 1), low(k)]);
    }
    let mut mesh = Mesh { vertices, faces };
    mesh.orient_outward();
    mesh
}

impl Mesh {
    fn orient_outward(&mut self) {
        for f in &mut self.faces {
            let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
            let n = cross(sub(b, a), sub(c, a));
            if dot(n, add(add(a, b), c)) < 0.0 {
                f.swap(1, 2);
            }
        }
    }

    fn subdivide_midpoint(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 3]>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                vertices.push(normalize(add(vertices[a], vertices[b])));
                vertices.len() - 1
            })
        };
        let mut faces = Vec::with_capacity(self.faces.len() * 4);
        for &[a, b, c] in &self.faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            faces.push([a, ab, ca]);
            faces.push([b, bc, ab]);
            faces.push([c, ca, bc]);
            faces.push([ab, bc, ca]);
        }
        Mesh { vertices, faces }
    }

    /// Splits every face into `k²` triangles on a planar barycentric lattice, then
    /// projects. Only face geometry is produced; shared vertices are not merged.
    fn geodesic_faces(&self, k: usize) -> Vec<[[f64; 3]; 3]> {
        let mut out = Vec::with_capacity(self.faces.len() * k * k);
        let kf = k as f64;
        for &[a, b, c] in &self.faces {
            let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            let point = |i: usize, j: usize| {
                let (wi, wj) = (i as f64 / kf, j as f64 / kf);
                normalize(add(add(scale(pa, 1.0 - wi - wj), scale(pb, wi)), scale(pc, wj)))
            };
            for i in 0..k {
                for j in 0..(k - i) {
                    out.push([point(i, j), point(i + 1, j), point(i, j + 1)]);
                    if i + j + 1 < k {
                        out.push([point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)]);
                    }
                }
            }
        }
        out
    }

    fn face_centers(&self) -> Vec<[f64; 3]> {
        self.faces
            .iter()
            .map(|&[a, b, c]| normalize(add(add(self.vertices[a], self.vertices[b]), self.vertices[c])))
            .collect()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![BTreeSet::new(); self.vertices.len()];
        for &[a, b, c] in &self.faces {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                sets[p].insert(q);
                sets[q].insert(p);
            }
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Spherical Voronoi cell areas. Each face contributes, to each of its corners,
    /// the two spherical triangles (corner, edge midpoint, circumcenter).
    fn voronoi_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.vertices.len()];
        for &[a, b, c] in &self.faces {
            let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            let mut cc = normalize(cross(sub(pb, pa), sub(pc, pa)));
            if dot(cc, pa) < 0.0 {
                cc = scale(cc, -1.0);
            }
            let mab = normalize(add(pa, pb));
            let mbc = normalize(add(pb, pc));
            let mca = normalize(add(pc, pa));
            areas[a] += spherical_triangle_area(pa, mab, cc) + spherical_triangle_area(pa, cc, mca);
            areas[b] += spherical_triangle_area(pb, mbc, cc) + spherical_triangle_area(pb, cc, mab);
            areas[c] += spherical_triangle_area(pc, mca, cc) + spherical_triangle_area(pc, cc, mbc);
        }
        areas
    }
}

/// Van Oosterom–Strackee solid angle of a spherical triangle.
fn spherical_triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let num = dot(a, cross(b, c)).abs();
    let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * num.atan2(den)
}

/// Highest even degree whose products the corrected weights integrate exactly.
const MAX_EXACT_DEGREE: usize = 24;

/// Minimum-norm adjustment of the Voronoi areas so that every even harmonic up to
/// a degree the grid can support integrates exactly (Σ w Φ_lm = √(4π) δ_l0). The
/// largest degree D used satisfies #harmonics(D) ≤ (#antipodal pairs)/2, capped at
/// 24, which makes the Gram matrix of the basis exact through l = 12.
fn moment_corrected(vertices: &[[f64; 3]], areas: Vec<f64>) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};

    let pairs = vertices.len() / 2;
    let degree = (0..=MAX_EXACT_DEGREE)
        .step_by(2)
        .filter(|&d| super::sh_count(d) * 2 <= pairs)
        .max()
        .unwrap_or(0);
    let dirs = to_directions(vertices);
    let a = super::eval_sh_basis(&dirs, degree).expect("even degree").into_values();
    let w0 = DVector::from_vec(areas);
    let mut target = DVector::zeros(a.ncols());
    target[0] = (4.0 * PI).sqrt();
    let residual = target - a.transpose() * &w0;
    let normal: DMatrix<f64> = a.transpose() * &a;
    let Some(chol) = normal.cholesky() else {
        return w0.as_slice().to_vec();
    };
    let w = w0 + &a * chol.solve(&residual);
    w.as_slice().to_vec()
}

fn to_directions(points: &[[f64; 3]]) -> Vec<Direction> {
    points
        .iter()
        .map(|p| Direction::normalize(p[0], p[1], p[2]).expect("nonzero mesh point"))
        .collect()
}

fn finish(
    points: Vec<[f64; 3]>,
    weights: Option<Vec<f64>>,
    adjacency: Option<Vec<Vec<usize>>>,
    source: GridSource,
    hemisphere: Hemisphere,
) -> SphericalGrid {
    let grid = SphericalGrid { directions: to_directions(&points), weights, adjacency, source };
    match hemisphere {
        Hemisphere::Full => grid,
        Hemisphere::Upper => grid.upper_hemisphere(),
    }
}

/// Recursive midpoint icosphere: 10·4^s + 2 vertices or 20·4^s faces.
/// Vertex grids carry Voronoi-area weights (summing to 4π) and, when full,
/// edge adjacency.
pub fn icosphere_grid(subdivision: usize, mode: GridMode, hemisphere: Hemisphere) -> Result<SphericalGrid> {
    if subdivision > MAX_SUBDIVISION {
        return Err(FodError::InvalidParameter(format!(
            "subdivision {subdivision} exceeds {MAX_SUBDIVISION}"
        )));
    }
    let mut mesh = icosahedron();
    for _ in 0..subdivision {
        mesh = mesh.subdivide_midpoint();
    }
    Ok(match mode {
        GridMode::Vertices => {
            let weights = moment_corrected(&mesh.vertices, mesh.voronoi_areas());
            let adjacency = mesh.adjacency();
            finish(mesh.vertices, Some(weights), Some(adjacency), GridSource::IcosphereVertices, hemisphere)
        }
        GridMode::FaceCenters => {
            finish(mesh.face_centers(), None, None, GridSource::IcosphereFaceCenters, hemisphere)
        }
    })
}

/// Face centers of a frequency-`k` geodesic icosphere (each base face split into
/// k² triangles): 20·k² directions, 10·k² on the upper hemisphere. For k = 2^s the
/// counts coincide with [`icosphere_grid`] face centers.
pub fn geodesic_face_centers(frequency: usize, hemisphere: Hemisphere) -> Result<SphericalGrid> {
    if frequency == 0 || frequency > 1 << MAX_SUBDIVISION {
        return Err(FodError::InvalidParameter(format!("geodesic frequency {frequency} out of range")));
    }
    let centers: Vec<[f64; 3]> = icosahedron()
        .geodesic_faces(frequency)
        .into_iter()
        .map(|[a, b, c]| normalize(add(add(a, b), c)))
        .collect();
    Ok(finish(centers, None, None, GridSource::IcosphereFaceCenters, hemisphere))
}

/// The 2562-point evaluation grid (subdivision 4 vertices).
pub fn dense_grid() -> SphericalGrid {
    icosphere_grid(4, GridMode::Vertices, Hemisphere::Full).expect("subdivision 4 is valid")
}
