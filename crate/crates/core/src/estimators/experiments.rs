//! The formula-verification experiments. Each one evaluates all of its events
//! on shared configurations and reports estimates, same-mesh ratios and the
//! closed-form targets they are compared against.

use serde::{Deserialize, Serialize};

use super::stats::{fit_power_law, Check, Estimate, ExponentFit, RatioEstimate};
use super::{Runner, Tally};
use crate::domains::Domain;
use crate::error::{EstimateError, ExploreError};
use crate::explorer::{box_radius, upper_bulk_site, AnchoredProbe, ArmProbe, ConnectionProbe, EventOutcome, GasketProbe, MultipointProbe, Region};
use crate::lattice::{LatticeGeometry, Point, SiteCoord, Sublattice};

pub const BULK_EXPONENT: f64 = -5.0 / 48.0;
pub const BOUNDARY_EXPONENT: f64 = -1.0 / 3.0;
pub const ANGULAR_EXPONENT: f64 = 11.0 / 48.0;
pub const RADIAL_EXPONENT: f64 = -7.0 / 16.0;

/// Radius of the normalizing one-arm events.
pub const UNIT_RADIUS: f64 = 1.0;

/// Acceptance thresholds. A ratio passes when it is within
/// `max(sigmas * stderr, rel * target)` of its target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub sigmas: f64,
    pub bulk_slope: f64,
    pub boundary_slope: f64,
    pub anchored_rel: f64,
    pub gasket_rel: f64,
    pub multipoint_rel: f64,
    pub mesh_stability_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sigmas: 3.0,
            bulk_slope: 0.02,
            boundary_slope: 0.03,
            anchored_rel: 0.05,
            gasket_rel: 0.05,
            multipoint_rel: 0.10,
            mesh_stability_rel: 0.10,
        }
    }
}

fn check_n(n: u64) -> Result<(), EstimateError> {
    if n == 0 {
        Err(EstimateError::NoSamples)
    } else {
        Ok(())
    }
}

fn invalid(msg: impl Into<String>) -> EstimateError {
    EstimateError::InvalidParameter(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub estimate: Estimate,
    /// `P(arm to eps) / P(arm to 1)` on shared samples.
    pub ratio: RatioEstimate,
    /// Limit of the ratio, `eps^exponent`.
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSweep {
    pub boundary: bool,
    pub mesh: f64,
    pub normalizer: Estimate,
    pub points: Vec<SweepPoint>,
    pub fit: ExponentFit,
    pub target_exponent: f64,
}

impl ArmSweep {
    pub fn check(&self, tol: &Tolerances) -> Check {
        let (name, allowed) =
            if self.boundary { ("boundary one-arm slope", tol.boundary_slope) } else { ("bulk one-arm slope", tol.bulk_slope) };
        Check::absolute(name, self.fit.slope, self.fit.stderr, self.target_exponent, allowed)
    }
}

/// One-arm probabilities at every radius in `eps` and at radius 1, all read
/// off a single exploration per sample, with a weighted power-law fit.
/// `boundary` selects the half-plane event from the origin.
pub fn arm_sweep(boundary: bool, mesh: f64, eps: &[f64], n: u64, seed: u64, runner: &Runner) -> Result<ArmSweep, EstimateError> {
    check_n(n)?;
    let g = LatticeGeometry::new(mesh)?;
    let mut radii = eps.to_vec();
    radii.push(UNIT_RADIUS);
    let lattice = if boundary { Sublattice::Upper } else { Sublattice::Whole };
    let probe = ArmProbe::new(SiteCoord::ORIGIN, &radii, lattice, &g)?;
    let sorted = probe.radii().to_vec();
    let index = |r: f64| sorted.iter().position(|&s| s == r).expect("radius registered");
    let tally = runner.tally(n, seed, sorted.len(), |ex, key, out| {
        let reach = probe.reach(ex, &key.field());
        for (k, o) in out.iter_mut().enumerate() {
            o.hit = k < reach;
        }
        0
    });
    let unit = index(UNIT_RADIUS);
    let mut points = Vec::with_capacity(eps.len());
    let exponent = if boundary { BOUNDARY_EXPONENT } else { BULK_EXPONENT };
    for &e in eps {
        let k = index(e);
        points.push(SweepPoint { eps: e, estimate: tally.estimate(k)?, ratio: tally.ratio(k, unit)?, target: e.powf(exponent) });
    }
    let fit = fit_power_law(&points.iter().map(|p| (p.eps, p.estimate)).collect::<Vec<_>>())?;
    Ok(ArmSweep { boundary, mesh, normalizer: tally.estimate(unit)?, points, fit, target_exponent: exponent })
}

/// Estimates of the bulk and boundary one-arm probabilities at radius 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub bulk: Estimate,
    pub boundary: Estimate,
}

pub fn normalizers(mesh: f64, n: u64, seed: u64, runner: &Runner) -> Result<Normalizers, EstimateError> {
    check_n(n)?;
    let g = LatticeGeometry::new(mesh)?;
    let bulk = ArmProbe::new(SiteCoord::ORIGIN, &[UNIT_RADIUS], Sublattice::Whole, &g)?;
    let boundary = ArmProbe::new(SiteCoord::ORIGIN, &[UNIT_RADIUS], Sublattice::Upper, &g)?;
    let tally = runner.tally(n, seed, 2, |ex, key, out| {
        let f = key.field();
        out[0].hit = bulk.holds(ex, &f);
        out[1].hit = boundary.holds(ex, &f);
        0
    });
    Ok(Normalizers { bulk: tally.estimate(0)?, boundary: tally.estimate(1)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchoredRow {
    pub z: Point,
    pub r: f64,
    pub theta: f64,
    pub estimate: Estimate,
    /// Ratio against the point `i|z|` at the same distance from the origin.
    pub vs_vertical: RatioEstimate,
    /// `(sin theta)^(11/48)`.
    pub vertical_target: f64,
    /// Ratio against the first point of the profile.
    pub vs_first: RatioEstimate,
    pub first_target: f64,
    /// `P / (pi * pi_bar) / ((sin theta)^(11/48) r^(-7/16))`, when normalizers were run.
    pub c_h: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchoredProfile {
    pub mesh: f64,
    pub box_radius: f64,
    pub rows: Vec<AnchoredRow>,
    pub normalizers: Option<Normalizers>,
    /// Outcome counts: one column per distinct target site, then the two
    /// normalizers when present.
    pub tally: Tally,
    /// Tally column of each requested point.
    pub columns: Vec<usize>,
}

impl AnchoredProfile {
    /// Shared-sample ratio `P(z_a) / P(z_b)` between two rows.
    pub fn ratio(&self, a: usize, b: usize) -> Result<RatioEstimate, EstimateError> {
        self.tally.ratio(self.columns[a], self.columns[b])
    }
}

/// Closed-form anchored density up to its constant.
pub fn anchored_density_shape(z: Point) -> f64 {
    let r = z.norm();
    (z.y / r).powf(ANGULAR_EXPONENT) * r.powf(RADIAL_EXPONENT)
}

fn push_unique(sites: &mut Vec<SiteCoord>, s: SiteCoord) -> usize {
    match sites.iter().position(|&t| t == s) {
        Some(k) => k,
        None => {
            sites.push(s);
            sites.len() - 1
        }
    }
}

/// Anchored connection probabilities of every point to the origin. One
/// exploration from the origin per sample serves all points, including the
/// vertical references `i|z|`; the safety box has radius `box_factor` times
/// the largest point norm.
pub fn anchored_profile(
    points: &[Point],
    mesh: f64,
    box_factor: f64,
    with_normalizers: bool,
    n: u64,
    seed: u64,
    runner: &Runner,
) -> Result<AnchoredProfile, EstimateError> {
    check_n(n)?;
    if points.is_empty() {
        return Err(invalid("anchored profile needs at least one point"));
    }
    let g = LatticeGeometry::new(mesh)?;
    let mut sites = Vec::new();
    let mut columns = Vec::with_capacity(points.len());
    let mut vertical = Vec::with_capacity(points.len());
    for &z in points {
        columns.push(push_unique(&mut sites, upper_bulk_site(z, &g)?));
    }
    for &z in points {
        vertical.push(push_unique(&mut sites, upper_bulk_site(Point::new(0.0, z.norm()), &g)?));
    }
    let refs: Vec<Point> = points.iter().map(|z| Point::new(0.0, z.norm())).collect();
    let radius = box_radius(&[points, &refs[..]].concat(), box_factor, &g)?;
    let bounds = Region::SiteDisk { center: SiteCoord::ORIGIN, radius };
    let probe = ConnectionProbe::new(Sublattice::Upper, SiteCoord::ORIGIN, &sites, bounds, &g)?;
    let arms = if with_normalizers {
        Some((
            ArmProbe::new(SiteCoord::ORIGIN, &[UNIT_RADIUS], Sublattice::Whole, &g)?,
            ArmProbe::new(SiteCoord::ORIGIN, &[UNIT_RADIUS], Sublattice::Upper, &g)?,
        ))
    } else {
        None
    };
    let m = sites.len();
    let width = m + if arms.is_some() { 2 } else { 0 };
    let tally = runner.tally(n, seed, width, |ex, key, out| {
        let f = key.field();
        let res = probe.explore(ex, &f);
        for (t, o) in out[..m].iter_mut().enumerate() {
            let hit = res.hit(t);
            *o = EventOutcome { hit, truncated: !hit && res.truncated };
        }
        if let Some((bulk, bnd)) = &arms {
            out[m].hit = bulk.holds(ex, &f);
            out[m + 1].hit = bnd.holds(ex, &f);
        }
        0
    });
    let normalizers = match arms {
        Some(_) => Some(Normalizers { bulk: tally.estimate(m)?, boundary: tally.estimate(m + 1)? }),
        None => None,
    };
    let first_shape = anchored_density_shape(points[0]);
    let mut rows = Vec::with_capacity(points.len());
    for (k, &z) in points.iter().enumerate() {
        let estimate = tally.estimate(columns[k])?;
        let shape = anchored_density_shape(z);
        let c_h = normalizers.map(|nz| estimate.p_hat / (nz.bulk.p_hat * nz.boundary.p_hat) / shape);
        rows.push(AnchoredRow {
            z,
            r: z.norm(),
            theta: z.y.atan2(z.x),
            estimate,
            vs_vertical: tally.ratio(columns[k], vertical[k])?,
            vertical_target: (z.y / z.norm()).powf(ANGULAR_EXPONENT),
            vs_first: tally.ratio(columns[k], columns[0])?,
            first_target: shape / first_shape,
            c_h,
        });
    }
    Ok(AnchoredProfile { mesh, box_radius: radius, rows, normalizers, tally, columns })
}

/// How gasket membership is decided for each sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GasketRoute {
    /// One multi-source exploration from the open collar sites.
    #[default]
    Collar,
    /// One exploration from each point, stopping at the first escape.
    PerPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasketRow {
    pub z: Point,
    pub rad: f64,
    pub estimate: Estimate,
    pub vs_first: RatioEstimate,
    /// `(rad / rad_first)^(-5/48)`.
    pub target: f64,
    /// `P / pi / rad^(-5/48)`, when the normalizer was run.
    pub c_g: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasketProfile {
    pub mesh: f64,
    pub domain: Domain,
    pub rows: Vec<GasketRow>,
    pub normalizer: Option<Estimate>,
    /// `P(point 0) / P(bulk arm to radius 1)`, shared samples.
    pub vs_normalizer: Option<RatioEstimate>,
    pub tally: Tally,
}

impl GasketProfile {
    pub fn ratio(&self, a: usize, b: usize) -> Result<RatioEstimate, EstimateError> {
        self.tally.ratio(a, b)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn gasket_profile(
    domain: &Domain,
    points: &[Point],
    mesh: f64,
    route: GasketRoute,
    with_normalizer: bool,
    n: u64,
    seed: u64,
    runner: &Runner,
) -> Result<GasketProfile, EstimateError> {
    check_n(n)?;
    if points.is_empty() {
        return Err(invalid("gasket profile needs at least one point"));
    }
    let g = LatticeGeometry::new(mesh)?;
    let probe = GasketProbe::new(domain, points, &g)?;
    let mut rads = Vec::with_capacity(points.len());
    for &z in points {
        rads.push(domain.conformal_radius(z).map_err(ExploreError::from)?);
    }
    let arm = if with_normalizer {
        Some(ArmProbe::new(SiteCoord::ORIGIN, &[UNIT_RADIUS], Sublattice::Whole, &g)?)
    } else {
        None
    };
    let m = points.len();
    let width = m + usize::from(arm.is_some());
    let tally = runner.tally(n, seed, width, |ex, key, out| {
        let f = key.field();
        match route {
            GasketRoute::Collar => {
                for (o, hit) in out.iter_mut().zip(probe.hits_from_collar(ex, &f)) {
                    o.hit = hit;
                }
            }
            GasketRoute::PerPoint => {
                for (k, o) in out[..m].iter_mut().enumerate() {
                    o.hit = probe.hit_from_point(ex, &f, k);
                }
            }
        }
        if let Some(a) = &arm {
            out[m].hit = a.holds(ex, &f);
        }
        0
    });
    let normalizer = if arm.is_some() { Some(tally.estimate(m)?) } else { None };
    let vs_normalizer = if arm.is_some() { Some(tally.ratio(0, m)?) } else { None };
    let mut rows = Vec::with_capacity(m);
    for (k, &z) in points.iter().enumerate() {
        let estimate = tally.estimate(k)?;
        let c_g = normalizer.map(|nz| estimate.p_hat / nz.p_hat / rads[k].powf(BULK_EXPONENT));
        rows.push(GasketRow {
            z,
            rad: rads[k],
            estimate,
            vs_first: tally.ratio(k, 0)?,
            target: (rads[k] / rads[0]).powf(BULK_EXPONENT),
            c_g,
        });
    }
    Ok(GasketProfile { mesh, domain: domain.clone(), rows, normalizer, vs_normalizer, tally })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagesReport {
    pub z: Point,
    pub mesh: f64,
    pub upper: Estimate,
    pub lower: Estimate,
    pub both: Estimate,
    /// `P_both - P_upper * P_lower`.
    pub product_gap: f64,
    pub product_stderr: f64,
    pub z_product: f64,
    pub symmetry_gap: f64,
    pub symmetry_stderr: f64,
    pub z_symmetry: f64,
    /// Samples on which `both` disagreed with `upper && lower`.
    pub violations: u64,
}

impl ImagesReport {
    pub fn checks(&self, tol: &Tolerances) -> [Check; 2] {
        [Check::z_bound("images product", self.z_product, tol.sigmas), Check::z_bound("images symmetry", self.z_symmetry, tol.sigmas)]
    }
}

fn standardize(gap: f64, var: f64) -> (f64, f64) {
    let se = var.max(0.0).sqrt();
    let z = if se > 0.0 {
        gap / se
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    (se, z)
}

/// The anchored event in the upper half-plane and its reflected copy in the
/// lower half-plane, on one shared configuration per sample.
pub fn images_check(z: Point, mesh: f64, box_factor: f64, n: u64, seed: u64, runner: &Runner) -> Result<ImagesReport, EstimateError> {
    check_n(n)?;
    let g = LatticeGeometry::new(mesh)?;
    let probe = AnchoredProbe::new(z, &g, box_factor)?;
    let tally = runner.tally(n, seed, 3, |ex, key, out| {
        let f = key.field();
        out[0] = probe.evaluate(ex, &f);
        out[1] = probe.evaluate_lower(ex, f);
        out[2].hit = out[0].hit && out[1].hit;
        0
    });
    let j = tally.joint_counts(0, 1);
    let violations = j.both.abs_diff(tally.hits[2]);
    let nf = j.n as f64;
    let (b, uo, lo) = (j.both as f64 / nf, j.first_only as f64 / nf, j.second_only as f64 / nf);
    let (pu, pl) = (b + uo, b + lo);
    // Delta method over the multinomial cells (both, upper only, lower only).
    let grad = [1.0 - pu - pl, -pl, -pu];
    let cells = [b, uo, lo];
    let mut var = 0.0;
    for a in 0..3 {
        for c in 0..3 {
            let cov = if a == c { cells[a] * (1.0 - cells[a]) } else { -cells[a] * cells[c] };
            var += grad[a] * grad[c] * cov;
        }
    }
    let product_gap = b - pu * pl;
    let (product_stderr, z_product) = standardize(product_gap, var / nf);
    let symmetry_gap = uo - lo;
    let (symmetry_stderr, z_symmetry) = standardize(symmetry_gap, (uo + lo - symmetry_gap * symmetry_gap) / nf);
    Ok(ImagesReport {
        z,
        mesh,
        upper: tally.estimate(0)?,
        lower: tally.estimate(1)?,
        both: tally.estimate(2)?,
        product_gap,
        product_stderr,
        z_product,
        symmetry_gap,
        symmetry_stderr,
        z_symmetry,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipointReport {
    pub bulk: Vec<Point>,
    pub boundary: Vec<f64>,
    pub scale: f64,
    pub mesh: f64,
    pub original: Estimate,
    pub scaled: Estimate,
    /// `P(scaled points) / P(original points)`.
    pub ratio: RatioEstimate,
    /// `s^(-5k/48 - n/3)`.
    pub target: f64,
}

impl MultipointReport {
    pub fn check(&self, tol: &Tolerances) -> Check {
        Check::new("multipoint scale covariance", self.ratio.ratio, self.ratio.stderr, self.target, tol.sigmas, tol.multipoint_rel)
    }
}

pub fn multipoint_target(k: usize, n: usize, s: f64) -> f64 {
    s.powf(k as f64 * BULK_EXPONENT + n as f64 * BOUNDARY_EXPONENT)
}

/// Multipoint connection of the original and the dilated point sets on
/// shared samples. Each event gets its own safety box scaled with its points.
#[allow(clippy::too_many_arguments)]
pub fn multipoint_covariance(
    bulk: &[Point],
    boundary: &[f64],
    scale: f64,
    mesh: f64,
    box_factor: f64,
    n: u64,
    seed: u64,
    runner: &Runner,
) -> Result<MultipointReport, EstimateError> {
    check_n(n)?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(invalid("scale must be positive"));
    }
    let g = LatticeGeometry::new(mesh)?;
    let original = MultipointProbe::new(bulk, boundary, &g, box_factor)?;
    let sbulk: Vec<Point> = bulk.iter().map(|&z| scale * z).collect();
    let sbnd: Vec<f64> = boundary.iter().map(|&x| scale * x).collect();
    let scaled = MultipointProbe::new(&sbulk, &sbnd, &g, box_factor)?;
    let tally = runner.tally(n, seed, 2, |ex, key, out| {
        let f = key.field();
        out[0] = original.evaluate(ex, &f);
        out[1] = scaled.evaluate(ex, &f);
        0
    });
    Ok(MultipointReport {
        bulk: bulk.to_vec(),
        boundary: boundary.to_vec(),
        scale,
        mesh,
        original: tally.estimate(0)?,
        scaled: tally.estimate(1)?,
        ratio: tally.ratio(1, 0)?,
        target: multipoint_target(bulk.len(), boundary.len(), scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets() {
        assert!((multipoint_target(1, 1, 2.0) - 0.738_413).abs() < 1e-6);
        assert!((multipoint_target(1, 2, 2.0) - 0.586_079).abs() < 1e-6);
        assert_eq!(multipoint_target(3, 2, 1.0), 1.0);
        let ang = anchored_density_shape(Point::new(0.0, 0.5)) / anchored_density_shape(Point::polar(0.5, std::f64::consts::FRAC_PI_6));
        assert!((ang - 1.172_158).abs() < 1e-6);
        let rad = anchored_density_shape(Point::new(0.0, 0.25)) / anchored_density_shape(Point::new(0.0, 0.5));
        assert!((rad - 1.354_256).abs() < 1e-6);
    }

    #[test]
    fn unit_scale_gives_exact_unit_ratio() {
        let r = multipoint_covariance(&[Point::new(0.1, 0.2)], &[0.0, 0.15], 1.0, 1.0 / 32.0, 4.0, 4000, 5, &Runner::new(1))
            .unwrap();
        assert_eq!(r.ratio.ratio, 1.0);
        assert_eq!(r.ratio.stderr, 0.0);
    }

    #[test]
    fn sweep_ratios_exceed_one_and_decrease() {
        let s = arm_sweep(false, 1.0 / 32.0, &[0.125, 0.25, 0.5], 20_000, 1, &Runner::new(1)).unwrap();
        assert!(s.points.windows(2).all(|w| w[0].ratio.ratio >= w[1].ratio.ratio));
        assert!(s.points.iter().all(|p| p.ratio.ratio >= 1.0));
        assert!(s.fit.slope < 0.0);
    }

    #[test]
    fn gasket_routes_agree_exactly() {
        let d = Domain::unit_disk();
        let pts = [Point::ORIGIN, Point::new(0.5, 0.0), Point::new(0.0, -0.7)];
        let a = gasket_profile(&d, &pts, 1.0 / 16.0, GasketRoute::Collar, true, 3000, 8, &Runner::new(1)).unwrap();
        let b = gasket_profile(&d, &pts, 1.0 / 16.0, GasketRoute::PerPoint, true, 3000, 8, &Runner::new(1)).unwrap();
        assert_eq!(a.tally, b.tally);
    }

    #[test]
    fn images_identity_holds_per_sample() {
        let r = images_check(Point::new(0.0, 0.25), 1.0 / 16.0, 4.0, 20_000, 2, &Runner::new(1)).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.both.successes <= r.upper.successes.min(r.lower.successes));
    }

    #[test]
    fn anchored_profile_dedups_vertical_references() {
        let p = anchored_profile(&[Point::new(0.0, 0.25), Point::new(0.2, 0.15)], 1.0 / 16.0, 4.0, false, 2000, 3, &Runner::new(1))
            .unwrap();
        assert_eq!(p.rows[0].vs_vertical.ratio, 1.0);
        assert_eq!(p.tally.width(), 2);
    }
}
