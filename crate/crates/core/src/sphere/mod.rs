//! Spherical-harmonic basis, spherical grids and angular utilities.

mod direction;
mod gradients;
mod grid;
mod harmonics;

pub use direction::{acute_angle_deg, Direction, UNIT_TOLERANCE};
pub use gradients::{Acquisition, GradientTable, B0_THRESHOLD};
pub use grid::{
    dense_grid, geodesic_face_centers, icosphere_grid, GridMode, GridSource, Hemisphere, SphericalGrid,
    MAX_SUBDIVISION,
};
pub use harmonics::{
    check_even, eval_sh_basis, sh_count, sh_degree_order, sh_index, zonal_harmonic, zonal_harmonics, LevelBlock,
    LevelBlockIndex, ShBasisMatrix,
};
