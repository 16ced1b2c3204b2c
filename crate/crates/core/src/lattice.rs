//! Triangular lattice geometry.
//!
//! Sites use axial coordinates `(i, j)`; the embedding places site `(i, j)` at
//! `mesh * (i + j/2, j * sqrt(3)/2)`, so the origin site sits at the origin of
//! the plane. Each site doubles as the center of a hexagonal cell of the dual
//! lattice. Row `j = 0` lies on the real axis: the discrete upper half-plane is
//! `{j >= 0}` and the discrete lower half-plane is `{j <= -1}`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::LatticeError;

pub const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Axial offsets of the six nearest neighbors.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteCoord {
    pub i: i32,
    pub j: i32,
}

impl SiteCoord {
    pub const ORIGIN: SiteCoord = SiteCoord { i: 0, j: 0 };
    /// Origin of the discrete lower half-plane.
    pub const LOWER_ORIGIN: SiteCoord = SiteCoord { i: 0, j: -1 };

    pub const fn new(i: i32, j: i32) -> Self {
        SiteCoord { i, j }
    }

    pub fn neighbors(self) -> [SiteCoord; 6] {
        NEIGHBOR_OFFSETS.map(|(di, dj)| SiteCoord::new(self.i + di, self.j + dj))
    }

    pub fn in_upper_half_plane(self) -> bool {
        self.j >= 0
    }

    /// Squared Euclidean distance to `other` in lattice units, computed exactly.
    pub fn norm2_to(self, other: SiteCoord) -> i64 {
        let di = i64::from(self.i) - i64::from(other.i);
        let dj = i64::from(self.j) - i64::from(other.j);
        di * di + di * dj + dj * dj
    }
}

impl fmt::Display for SiteCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

pub fn neighbors(c: SiteCoord) -> [SiteCoord; 6] {
    c.neighbors()
}

/// A point of the plane, read as the complex number `x + iy` where convenient.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm2(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, p: Point) -> Point {
        Point::new(self * p.x, self * p.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

/// Which part of the lattice a site selection is restricted to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Sublattice {
    #[default]
    Whole,
    Upper,
    Lower,
}

impl Sublattice {
    pub fn contains(self, c: SiteCoord) -> bool {
        match self {
            Sublattice::Whole => true,
            Sublattice::Upper => c.j >= 0,
            Sublattice::Lower => c.j <= -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    mesh: f64,
}

impl LatticeGeometry {
    pub fn new(mesh: f64) -> Result<Self, LatticeError> {
        if mesh.is_finite() && mesh > 0.0 {
            Ok(LatticeGeometry { mesh })
        } else {
            Err(LatticeError::InvalidMesh(mesh))
        }
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn position(&self, c: SiteCoord) -> Point {
        let (i, j) = (f64::from(c.i), f64::from(c.j));
        Point::new(self.mesh * (i + 0.5 * j), self.mesh * j * SQRT3_2)
    }

    /// Fractional axial coordinates of a point.
    pub fn axial(&self, z: Point) -> (f64, f64) {
        let j = z.y / (self.mesh * SQRT3_2);
        let i = z.x / self.mesh - 0.5 * j;
        (i, j)
    }

    /// Lattice site closest to `z`, ties broken towards the lexicographically
    /// smallest `(i, j)`. With `Sublattice::Upper` or `Lower` the search is
    /// restricted to that half-plane, and `z` must lie in its closure.
    pub fn nearest_site(&self, z: Point, restrict: Sublattice) -> Result<SiteCoord, LatticeError> {
        if !(z.x.is_finite() && z.y.is_finite()) {
            return Err(LatticeError::NonFinitePoint);
        }
        match restrict {
            Sublattice::Upper if z.y < 0.0 => return Err(LatticeError::OutsideHalfPlane(z)),
            Sublattice::Lower if z.y > 0.0 => return Err(LatticeError::OutsideHalfPlane(z)),
            _ => {}
        }
        let (fi, fj) = self.axial(z);
        let (ci, cj) = (fi.floor() as i32, fj.floor() as i32);
        let tie = 1e-9 * self.mesh * self.mesh;
        let mut best: Option<(f64, SiteCoord)> = None;
        for j in cj - 2..=cj + 3 {
            for i in ci - 2..=ci + 3 {
                let c = SiteCoord::new(i, j);
                if !restrict.contains(c) {
                    continue;
                }
                let d2 = (self.position(c) - z).norm2();
                best = match best {
                    Some((bd, bc)) if bd < d2 - tie || ((bd - d2).abs() <= tie && bc < c) => Some((bd, bc)),
                    _ => Some((d2, c)),
                };
            }
        }
        // The 6x6 window always holds a site within one mesh of z, also in
        // the half-plane cases since z lies in the closure.
        Ok(best.expect("candidate window is never empty").1)
    }

    /// Shortcut for [`nearest_site`](Self::nearest_site) over the whole lattice.
    pub fn site_near(&self, z: Point) -> SiteCoord {
        self.nearest_site(z, Sublattice::Whole)
            .expect("unrestricted nearest site is total on finite points")
    }
}

pub fn position(c: SiteCoord, g: &LatticeGeometry) -> Point {
    g.position(c)
}

pub fn nearest_site(z: Point, g: &LatticeGeometry, restrict: Sublattice) -> Result<SiteCoord, LatticeError> {
    g.nearest_site(z, restrict)
}

/// Reflection plus translation taking the discrete upper half-plane onto the
/// discrete lower half-plane, `(i, j) -> (i + j, -1 - j)`. It sends the origin
/// to the lower origin and preserves adjacency.
pub fn reflect_lower(c: SiteCoord) -> Result<SiteCoord, LatticeError> {
    if c.j < 0 {
        return Err(LatticeError::NotInUpperHalfPlane(c));
    }
    Ok(reflect_lower_unchecked(c))
}

#[inline]
pub(crate) fn reflect_lower_unchecked(c: SiteCoord) -> SiteCoord {
    SiteCoord::new(c.i + c.j, -1 - c.j)
}
