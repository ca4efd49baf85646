use serde::{Deserialize, Serialize};

use crate::error::{FodError, Result};

/// Tolerance on |norm - 1| accepted when constructing a direction from raw components.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// A unit vector on the sphere. Construction always renormalizes, so the stored
/// components satisfy x² + y² + z² = 1 to machine precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Direction {
    x: f64,
    y: f64,
    z: f64,
}

impl Direction {
    pub const Z: Direction = Direction { x: 0.0, y: 0.0, z: 1.0 };
    pub const X: Direction = Direction { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Direction = Direction { x: 0.0, y: 1.0, z: 0.0 };

    /// Validates that the components are unit length within [`UNIT_TOLERANCE`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(FodError::NonUnitDirection { x, y, z, norm });
        }
        Ok(Self { x: x / norm, y: y / norm, z: z / norm })
    }

    /// Projects an arbitrary nonzero vector onto the sphere.
    pub fn normalize(x: f64, y: f64, z: f64) -> Option<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        Some(Self { x: x / norm, y: y / norm, z: z / norm })
    }

    /// Polar angle θ from +z and azimuth φ in the x-y plane, both in radians.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self::normalize(st * cp, st * sp, ct).expect("unit by construction")
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z }
    }

    /// Applies a 3×3 row-major rotation.
    pub fn rotate(&self, m: &[[f64; 3]; 3]) -> Self {
        let v = [self.x, self.y, self.z];
        let r = |row: &[f64; 3]| row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        Self::normalize(r(&m[0]), r(&m[1]), r(&m[2])).expect("rotation preserves norm")
    }

    /// True when this is the representative of its antipodal pair kept on the
    /// upper hemisphere: z > 0, equator ties broken by y > 0, then x > 0.
    pub fn is_upper_representative(&self) -> bool {
        const TIE: f64 = 1e-12;
        if self.z.abs() > TIE {
            return self.z > 0.0;
        }
        if self.y.abs() > TIE {
            return self.y > 0.0;
        }
        self.x > 0.0
    }

    /// The upper-hemisphere representative of {d, -d}.
    pub fn canonical(self) -> Self {
        if self.is_upper_representative() {
            self
        } else {
            self.neg()
        }
    }
}

impl TryFrom<[f64; 3]> for Direction {
    type Error = FodError;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Direction::new(v[0], v[1], v[2])
    }
}

impl From<Direction> for [f64; 3] {
    fn from(d: Direction) -> Self {
        d.to_array()
    }
}

/// Acute angle between two axes, in degrees within [0, 90].
pub fn acute_angle_deg(u: &Direction, v: &Direction) -> f64 {
    u.dot(v).abs().min(1.0).acos().to_degrees()
}
