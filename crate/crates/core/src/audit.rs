//! Per-sample invariants of the event detectors.
//!
//! Each invariant is an implication or identity between events evaluated on
//! the same configuration. The audit counts, per invariant, how often its
//! premise held and how often it was violated.

use serde::{Deserialize, Serialize};

use crate::domains::Domain;
use crate::error::{EstimateError, ExploreError};
use crate::estimators::{EventKind, EventSpec, Runner};
use crate::explorer::{images_with, AnchoredProbe, ArmProbe, GasketProbe, MultipointProbe};
use crate::lattice::{LatticeGeometry, Point, SiteCoord, Sublattice};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub mesh: f64,
    /// Bulk point of the anchored, images and multipoint events.
    pub z: Point,
    /// Increasing radii for the monotonicity checks.
    pub eps: Vec<f64>,
    pub box_factor: f64,
    pub domain: Domain,
    /// Points of the gasket checks, inside `domain`.
    pub gasket_points: Vec<Point>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            mesh: 1.0 / 32.0,
            z: Point::new(0.15, 0.3),
            eps: vec![0.0625, 0.125, 0.25, 0.5],
            box_factor: 4.0,
            domain: Domain::unit_disk(),
            gasket_points: vec![Point::ORIGIN, Point::new(0.5, 0.2), Point::new(-0.1, -0.8)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantCount {
    pub name: String,
    /// Samples on which the premise held (the check was not vacuous).
    pub premise: u64,
    pub violations: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub samples: u64,
    pub invariants: Vec<InvariantCount>,
}

impl AuditReport {
    pub fn violations(&self) -> u64 {
        self.invariants.iter().map(|i| i.violations).sum()
    }
}

const NAMES: [&str; 8] = [
    "anchored implies bulk arm at z",
    "anchored implies boundary arm",
    "gasket implies one-arm",
    "bulk arm monotone in eps",
    "boundary arm monotone in eps",
    "anchored monotone in box",
    "images both equals upper and lower",
    "gasket routes agree",
];

const MULTIPOINT_NAME: &str = "multipoint reduces to anchored";

/// Audits `n` samples of seed `seed`.
pub fn audit(cfg: &AuditConfig, n: u64, seed: u64, runner: &Runner) -> Result<AuditReport, EstimateError> {
    if n == 0 {
        return Err(EstimateError::NoSamples);
    }
    let g = LatticeGeometry::new(cfg.mesh)?;
    if cfg.eps.is_empty() {
        return Err(EstimateError::InvalidParameter("audit needs at least one radius".into()));
    }
    // Radii short enough that the anchored path must leave them.
    let arm_eps = 0.45 * cfg.z.y;
    let anchored = AnchoredProbe::new(cfg.z, &g, cfg.box_factor)?;
    let anchored_wide = AnchoredProbe::new(cfg.z, &g, 2.0 * cfg.box_factor)?;
    let bulk_at_z = ArmProbe::new(anchored.site(), &[arm_eps], Sublattice::Whole, &g)?;
    let boundary_short = ArmProbe::new(SiteCoord::ORIGIN, &[arm_eps], Sublattice::Upper, &g)?;
    let bulk_eps: Vec<ArmProbe> =
        cfg.eps.iter().map(|&e| ArmProbe::new(SiteCoord::ORIGIN, &[e], Sublattice::Whole, &g)).collect::<Result<_, _>>()?;
    let boundary_eps: Vec<ArmProbe> =
        cfg.eps.iter().map(|&e| ArmProbe::new(SiteCoord::ORIGIN, &[e], Sublattice::Upper, &g)).collect::<Result<_, _>>()?;
    let gasket = GasketProbe::new(&cfg.domain, &cfg.gasket_points, &g)?;
    let mut gasket_arms = Vec::with_capacity(cfg.gasket_points.len());
    for (&z, &site) in cfg.gasket_points.iter().zip(gasket.sites()) {
        let dist = cfg.domain.boundary_distance(z).map_err(ExploreError::from)?;
        let eps = 0.5 * (dist - cfg.mesh);
        if eps <= 0.0 {
            return Err(EstimateError::InvalidParameter(format!("gasket point {z} is within one mesh of the boundary")));
        }
        gasket_arms.push(ArmProbe::new(site, &[eps], Sublattice::Whole, &g)?);
    }
    let multipoint = MultipointProbe::new(&[cfg.z], &[0.0], &g, cfg.box_factor)?;
    let images = EventSpec::new(cfg.mesh, EventKind::Images { z: cfg.z, box_factor: cfg.box_factor }).compile()?;

    let k = NAMES.len() + 1;
    let tally = runner.tally(n, seed, 2 * k, |ex, key, out| {
        let f = key.field();
        let mut mark = |slot: usize, premise: bool, ok: bool| {
            out[slot].hit |= premise;
            out[k + slot].hit |= !ok;
        };
        let a = anchored.evaluate(ex, &f).hit;
        mark(0, a, !a || bulk_at_z.holds(ex, &f));
        mark(1, a, !a || boundary_short.holds(ex, &f));

        let from_collar = gasket.hits_from_collar(ex, &f);
        let mut any_gasket = false;
        let mut gasket_ok = true;
        let mut routes_ok = true;
        for (p, arm) in gasket_arms.iter().enumerate() {
            let hit = gasket.hit_from_point(ex, &f, p);
            routes_ok &= hit == from_collar[p];
            any_gasket |= hit;
            gasket_ok &= !hit || arm.holds(ex, &f);
        }
        mark(2, any_gasket, gasket_ok);

        let monotone = |probes: &[ArmProbe], ex: &mut crate::explorer::Explorer| {
            let holds: Vec<bool> = probes.iter().map(|p| p.holds(ex, &f)).collect();
            (holds.iter().any(|&h| h), holds.windows(2).all(|w| w[0] || !w[1]))
        };
        let (premise, ok) = monotone(&bulk_eps, ex);
        mark(3, premise, ok);
        let (premise, ok) = monotone(&boundary_eps, ex);
        mark(4, premise, ok);

        mark(5, a, !a || anchored_wide.evaluate(ex, &f).hit);

        let im = images_with(&anchored, ex, f, f);
        let both = images.evaluate(ex, &f).hit;
        mark(6, im.upper, both == im.both && im.both == (im.upper && im.lower));

        mark(7, any_gasket, routes_ok);
        let m = multipoint.evaluate(ex, &f).hit;
        mark(8, a || m, a == m);

        out[k..].iter().filter(|o| o.hit).count() as u64
    });
    let names = NAMES.iter().copied().chain([MULTIPOINT_NAME]);
    let invariants = names
        .enumerate()
        .map(|(slot, name)| InvariantCount { name: name.to_string(), premise: tally.hits[slot], violations: tally.hits[k + slot] })
        .collect();
    Ok(AuditReport { samples: tally.n, invariants })
}
