//! Simply connected planar domains with closed-form conformal radius.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::lattice::{LatticeGeometry, Point, SiteCoord};

/// Open domains. `Scaled` is the image of `base` under `z -> scale * z + shift`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Disk { center: Point, radius: f64 },
    UpperHalfPlane,
    /// `{ 0 < Im z < height }`
    Strip { height: f64 },
    Scaled { base: Box<Domain>, scale: f64, shift: Point },
}

impl Domain {
    pub fn disk(center: Point, radius: f64) -> Result<Self, DomainError> {
        let d = Domain::Disk { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn unit_disk() -> Self {
        Domain::Disk { center: Point::ORIGIN, radius: 1.0 }
    }

    pub fn strip(height: f64) -> Result<Self, DomainError> {
        let d = Domain::Strip { height };
        d.validate()?;
        Ok(d)
    }

    pub fn scaled(self, scale: f64, shift: Point) -> Result<Self, DomainError> {
        let d = Domain::Scaled { base: Box::new(self), scale, shift };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(DomainError::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Domain::Disk { center, radius } => {
                if !(center.x.is_finite() && center.y.is_finite()) {
                    return Err(DomainError::InvalidParameter("disk center must be finite".into()));
                }
                positive(*radius, "radius")
            }
            Domain::UpperHalfPlane => Ok(()),
            Domain::Strip { height } => positive(*height, "strip height"),
            Domain::Scaled { base, scale, shift } => {
                positive(*scale, "scale")?;
                if !(shift.x.is_finite() && shift.y.is_finite()) {
                    return Err(DomainError::InvalidParameter("shift must be finite".into()));
                }
                base.validate()
            }
        }
    }

    pub fn contains(&self, z: Point) -> bool {
        match self {
            // Lattice sites lying on the circle are outside despite rounding.
            Domain::Disk { center, radius } => (z - *center).norm2() < radius * radius * (1.0 - 1e-12),
            Domain::UpperHalfPlane => z.y > 0.0,
            Domain::Strip { height } => z.y > 0.0 && z.y < *height,
            Domain::Scaled { base, scale, shift } => base.contains((1.0 / scale) * (z - *shift)),
        }
    }

    pub fn conformal_radius(&self, z: Point) -> Result<f64, DomainError> {
        if !self.contains(z) {
            return Err(DomainError::PointOutside(z));
        }
        Ok(self.conformal_radius_inside(z))
    }

    fn conformal_radius_inside(&self, z: Point) -> f64 {
        match self {
            Domain::Disk { center, radius } => (radius * radius - (z - *center).norm2()) / radius,
            Domain::UpperHalfPlane => 2.0 * z.y,
            Domain::Strip { height } => (2.0 * height / PI) * (PI * z.y / height).sin(),
            Domain::Scaled { base, scale, shift } => {
                scale * base.conformal_radius_inside((1.0 / scale) * (z - *shift))
            }
        }
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn boundary_distance(&self, z: Point) -> Result<f64, DomainError> {
        if !self.contains(z) {
            return Err(DomainError::PointOutside(z));
        }
        Ok(self.boundary_distance_inside(z))
    }

    fn boundary_distance_inside(&self, z: Point) -> f64 {
        match self {
            Domain::Disk { center, radius } => radius - (z - *center).norm(),
            Domain::UpperHalfPlane => z.y,
            Domain::Strip { height } => z.y.min(height - z.y),
            Domain::Scaled { base, scale, shift } => {
                scale * base.boundary_distance_inside((1.0 / scale) * (z - *shift))
            }
        }
    }

    /// Bounding disk `(center, radius)` of a bounded domain.
    pub fn bounding_disk(&self) -> Option<(Point, f64)> {
        match self {
            Domain::Disk { center, radius } => Some((*center, *radius)),
            Domain::UpperHalfPlane | Domain::Strip { .. } => None,
            Domain::Scaled { base, scale, shift } => {
                base.bounding_disk().map(|(c, r)| (*scale * c + *shift, scale * r))
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bounding_disk().is_some()
    }

    /// Axial index window `(i_min, i_max, j_min, j_max)` covering every site
    /// within distance `pad` (in mesh units) of the bounding disk.
    pub(crate) fn axial_window(&self, g: &LatticeGeometry, pad: f64) -> Result<(i32, i32, i32, i32), DomainError> {
        let (c, r) = self.bounding_disk().ok_or(DomainError::Unbounded)?;
        Ok(disk_axial_window(g, c, r + pad * g.mesh()))
    }

    /// Sites whose positions lie in the domain.
    pub fn interior_sites(&self, g: &LatticeGeometry) -> Result<Vec<SiteCoord>, DomainError> {
        let (i0, i1, j0, j1) = self.axial_window(g, 1.0)?;
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                let c = SiteCoord::new(i, j);
                if self.contains(g.position(c)) {
                    out.push(c);
                }
            }
        }
        Ok(out)
    }

    /// Sites outside the domain that neighbor a site inside it.
    pub fn exterior_collar(&self, g: &LatticeGeometry) -> Result<Vec<SiteCoord>, DomainError> {
        let interior = self.interior_sites(g)?;
        let inside: HashSet<SiteCoord> = interior.iter().copied().collect();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for c in &interior {
            for n in c.neighbors() {
                if !inside.contains(&n) && seen.insert(n) {
                    out.push(n);
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

pub fn conformal_radius(dom: &Domain, z: Point) -> Result<f64, DomainError> {
    dom.conformal_radius(z)
}

pub fn contains(dom: &Domain, z: Point) -> bool {
    dom.contains(z)
}

pub fn exterior_collar(dom: &Domain, g: &LatticeGeometry) -> Result<Vec<SiteCoord>, DomainError> {
    dom.exterior_collar(g)
}

pub(crate) fn disk_axial_window(g: &LatticeGeometry, c: Point, r: f64) -> (i32, i32, i32, i32) {
    let h = g.mesh() * crate::lattice::SQRT3_2;
    let j0 = ((c.y - r) / h).floor() as i32 - 1;
    let j1 = ((c.y + r) / h).ceil() as i32 + 1;
    let a = g.mesh();
    let i0 = ((c.x - r) / a - 0.5 * f64::from(j1)).floor() as i32 - 1;
    let i1 = ((c.x + r) / a - 0.5 * f64::from(j0)).ceil() as i32 + 1;
    (i0, i1, j0, j1)
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Disk { center, radius } => write!(f, "disk:{},{},{}", center.x, center.y, radius),
            Domain::UpperHalfPlane => write!(f, "halfplane"),
            Domain::Strip { height } => write!(f, "strip:{height}"),
            Domain::Scaled { base, scale, shift } => write!(f, "{base}*{scale}+{},{}", shift.x, shift.y),
        }
    }
}

impl FromStr for Domain {
    type Err = DomainError;

    /// `disk:cx,cy,R`, `halfplane` or `strip:h`, each optionally followed by
    /// `*s` and an optional `+tx,ty`.
    fn from_str(s: &str) -> Result<Self, DomainError> {
        let err = || DomainError::Parse(s.to_string());
        let s = s.trim();
        let (base_str, transform) = match s.split_once('*') {
            Some((b, t)) => (b, Some(t)),
            None => (s, None),
        };
        let nums = |t: &str| -> Result<Vec<f64>, DomainError> {
            t.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| err())).collect()
        };
        let base = if base_str == "halfplane" {
            Domain::UpperHalfPlane
        } else if let Some(rest) = base_str.strip_prefix("disk:") {
            match nums(rest)?.as_slice() {
                &[cx, cy, r] => Domain::Disk { center: Point::new(cx, cy), radius: r },
                _ => return Err(err()),
            }
        } else if let Some(rest) = base_str.strip_prefix("strip:") {
            match nums(rest)?.as_slice() {
                &[h] => Domain::Strip { height: h },
                _ => return Err(err()),
            }
        } else {
            return Err(err());
        };
        let dom = match transform {
            None => base,
            Some(t) => {
                let (scale_str, shift_str) = match t.split_once('+') {
                    Some((a, b)) => (a, Some(b)),
                    None => (t, None),
                };
                let scale = scale_str.trim().parse::<f64>().map_err(|_| err())?;
                let shift = match shift_str {
                    None => Point::ORIGIN,
                    Some(b) => match nums(b)?.as_slice() {
                        &[tx, ty] => Point::new(tx, ty),
                        _ => return Err(err()),
                    },
                };
                Domain::Scaled { base: Box::new(base), scale, shift }
            }
        };
        dom.validate()?;
        Ok(dom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn conformal_radius_examples() {
        let d = Domain::unit_disk();
        assert!((d.conformal_radius(Point::ORIGIN).unwrap() - 1.0).abs() < 1e-15);
        assert!((d.conformal_radius(Point::new(0.5, 0.0)).unwrap() - 0.75).abs() < 1e-15);
        let h = Domain::UpperHalfPlane;
        assert!((h.conformal_radius(Point::new(0.0, 1.0)).unwrap() - 2.0).abs() < 1e-15);
        let s = Domain::strip(1.0).unwrap();
        assert!((s.conformal_radius(Point::new(0.0, 0.5)).unwrap() - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn strip_radius_matches_pullback_of_half_plane() {
        // w -> exp(pi w / h) maps the strip onto the half-plane; rad scales by 1/|phi'|.
        let h = 1.7;
        let s = Domain::strip(h).unwrap();
        for (x, y) in [(0.0, 0.3), (2.0, 1.0), (-1.5, 1.6)] {
            let e = (PI * x / h).exp();
            let img = Point::new(e * (PI * y / h).cos(), e * (PI * y / h).sin());
            let deriv = PI / h * e;
            let want = Domain::UpperHalfPlane.conformal_radius(img).unwrap() / deriv;
            assert!((s.conformal_radius(Point::new(x, y)).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_radius_matches_mobius_derivative() {
        // phi(z) = (z - w) / (1 - conj(w) z) has |phi'(w)| = 1 / (1 - |w|^2).
        let d = Domain::unit_disk();
        let w = Point::new(0.3, -0.4);
        let expected = 1.0 - w.norm2();
        assert!((d.conformal_radius(w).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn membership_examples() {
        let d = Domain::unit_disk();
        assert!(d.contains(Point::ORIGIN));
        assert!(!d.contains(Point::new(1.0, 0.0)));
        assert!(Domain::strip(1.0).unwrap().contains(Point::new(2.0, 0.5)));
        assert!(!Domain::UpperHalfPlane.contains(Point::new(3.0, 0.0)));
        assert!(matches!(d.conformal_radius(Point::new(2.0, 0.0)), Err(DomainError::PointOutside(_))));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Domain::disk(Point::ORIGIN, 0.0).is_err());
        assert!(Domain::strip(-1.0).is_err());
        assert!(Domain::unit_disk().scaled(0.0, Point::ORIGIN).is_err());
    }

    #[test]
    fn collar_of_a_large_disk_is_definitionally_correct() {
        let g = LatticeGeometry::new(0.1).unwrap();
        let d = Domain::disk(Point::new(0.03, -0.02), 1.0).unwrap();
        let collar = d.exterior_collar(&g).unwrap();
        let interior: HashSet<_> = d.interior_sites(&g).unwrap().into_iter().collect();
        let collar_set: HashSet<_> = collar.iter().copied().collect();
        for c in &collar {
            assert!(!d.contains(g.position(*c)));
            assert!(c.neighbors().iter().any(|n| interior.contains(n)));
        }
        // No interior site touches anything outside interior ∪ collar.
        for c in &interior {
            for n in c.neighbors() {
                assert!(interior.contains(&n) || collar_set.contains(&n));
            }
        }
    }

    #[test]
    fn tiny_disk_collar_is_the_hexagon() {
        let g = LatticeGeometry::new(1.0).unwrap();
        let d = Domain::disk(Point::ORIGIN, 0.5).unwrap();
        assert_eq!(d.interior_sites(&g).unwrap(), vec![SiteCoord::ORIGIN]);
        let mut want = SiteCoord::ORIGIN.neighbors().to_vec();
        want.sort();
        assert_eq!(d.exterior_collar(&g).unwrap(), want);
    }

    #[test]
    fn collar_size_tracks_perimeter() {
        let mesh = 1.0 / 64.0;
        let g = LatticeGeometry::new(mesh).unwrap();
        let n = Domain::unit_disk().exterior_collar(&g).unwrap().len() as f64;
        let perimeter = 2.0 * PI / mesh;
        assert!(n > perimeter / 2.0 && n < perimeter * 2.0, "collar {n} vs {perimeter}");
    }

    #[test]
    fn unbounded_domains_have_no_collar() {
        let g = LatticeGeometry::new(1.0).unwrap();
        assert_eq!(Domain::UpperHalfPlane.exterior_collar(&g), Err(DomainError::Unbounded));
        assert_eq!(Domain::strip(1.0).unwrap().exterior_collar(&g), Err(DomainError::Unbounded));
    }

    #[test]
    fn parse_grammar() {
        assert_eq!("disk:0,0,1".parse::<Domain>().unwrap(), Domain::unit_disk());
        assert_eq!("halfplane".parse::<Domain>().unwrap(), Domain::UpperHalfPlane);
        assert_eq!("strip:2.5".parse::<Domain>().unwrap(), Domain::Strip { height: 2.5 });
        let d: Domain = "disk:0,0,1*2+0.5,-1".parse().unwrap();
        assert_eq!(d, Domain::unit_disk().scaled(2.0, Point::new(0.5, -1.0)).unwrap());
        let d: Domain = "strip:1*3".parse().unwrap();
        assert_eq!(d, Domain::Strip { height: 1.0 }.scaled(3.0, Point::ORIGIN).unwrap());
        for bad in ["disk:1,2", "circle:0,0,1", "strip:0", "disk:0,0,1*x", "halfplane*2+1"] {
            assert!(bad.parse::<Domain>().is_err(), "{bad}");
        }
        let d: Domain = "disk:0.25,-1,3*0.5+1,2".parse().unwrap();
        assert_eq!(d.to_string().parse::<Domain>().unwrap(), d);
    }

    proptest! {
        #[test]
        fn scaling_covariance(s in 0.05f64..20.0, tx in -5.0f64..5.0, ty in -5.0f64..5.0,
                              r in 0.0f64..0.99, th in 0.0f64..std::f64::consts::TAU, h in 0.1f64..3.0, fy in 0.01f64..0.99) {
            let t = Point::new(tx, ty);
            let disk = Domain::unit_disk();
            let z = Point::polar(r, th);
            let scaled = disk.clone().scaled(s, t).unwrap();
            let lhs = scaled.conformal_radius(s * z + t).unwrap();
            let rhs = s * disk.conformal_radius(z).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));

            let strip = Domain::strip(h).unwrap();
            let w = Point::new(tx, fy * h);
            let lhs = strip.clone().scaled(s, t).unwrap().conformal_radius(s * w + t).unwrap();
            prop_assert!((lhs - s * strip.conformal_radius(w).unwrap()).abs() <= 1e-12 * lhs.max(1.0));
        }

        #[test]
        fn unit_disk_radius_is_rotation_invariant(r in 0.0f64..0.999, th in 0.0f64..std::f64::consts::TAU) {
            let d = Domain::unit_disk();
            let a = d.conformal_radius(Point::polar(r, th)).unwrap();
            let b = d.conformal_radius(Point::polar(r, 0.0)).unwrap();
            prop_assert!((a - (1.0 - r * r)).abs() < 1e-12);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
