//! Exact event probabilities on small patches by exhaustive enumeration.
//!
//! Connectivity is decided by bitmask flooding over the enumerated
//! configurations, independently of the breadth-first explorer. Sites through
//! which a cluster escapes are not enumerated: a component adjacent to `m`
//! such sites escapes with probability `1 - 2^-m`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::domains::Domain;
use crate::estimators::{EventKind, EventSpec};
use crate::lattice::{LatticeGeometry, Point, SiteCoord, Sublattice};

/// Most sites a patch may enumerate.
pub const MAX_ENUMERATED: usize = 24;

/// Exact dyadic probability `numerator / 2^log2_denominator`, in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Dyadic {
    pub numerator: u128,
    pub log2_denominator: u32,
}

impl Dyadic {
    pub fn new(mut numerator: u128, mut log2_denominator: u32) -> Self {
        while log2_denominator > 0 && numerator.is_multiple_of(2) {
            numerator /= 2;
            log2_denominator -= 1;
        }
        Dyadic { numerator, log2_denominator }
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / 2f64.powi(self.log2_denominator as i32)
    }
}

impl std::fmt::Display for Dyadic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.log2_denominator)
    }
}

fn adjacency(sites: &[SiteCoord]) -> Vec<u32> {
    let index: BTreeMap<SiteCoord, usize> = sites.iter().enumerate().map(|(k, s)| (*s, k)).collect();
    sites
        .iter()
        .map(|s| s.neighbors().iter().filter_map(|n| index.get(n)).fold(0u32, |m, &k| m | 1 << k))
        .collect()
}

fn flood(adj: &[u32], open: u32, seed: u32) -> u32 {
    let mut comp = seed & open;
    loop {
        let mut next = comp;
        let mut rest = comp;
        while rest != 0 {
            let k = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            next |= adj[k] & open;
        }
        if next == comp {
            return comp;
        }
        comp = next;
    }
}

/// Probability that `start` is open and its open cluster within `interior`
/// touches an open site of `exits` (sites outside `interior`).
pub fn exact_escape(interior: &[SiteCoord], exits: &[SiteCoord], start: SiteCoord) -> Dyadic {
    let n = interior.len();
    let c = exits.len();
    assert!(n <= MAX_ENUMERATED && c <= 64, "patch too large to enumerate");
    let s = interior.iter().position(|&x| x == start).expect("start in interior");
    let adj = adjacency(interior);
    let exit_adj: Vec<u64> = interior
        .iter()
        .map(|x| {
            let nb = x.neighbors();
            exits.iter().enumerate().filter(|(_, e)| nb.contains(e)).fold(0u64, |m, (k, _)| m | 1 << k)
        })
        .collect();
    let mut total: u128 = 0;
    for open in 0..(1u32 << n) {
        if open >> s & 1 == 0 {
            continue;
        }
        let mut comp = flood(&adj, open, 1 << s);
        let mut touched = 0u64;
        while comp != 0 {
            let k = comp.trailing_zeros() as usize;
            comp &= comp - 1;
            touched |= exit_adj[k];
        }
        let m = touched.count_ones();
        total += ((1u128 << m) - 1) << (c as u32 - m);
    }
    Dyadic::new(total, (n + c) as u32)
}

/// Probability that all `terminals` lie in one open cluster of `patch`.
pub fn exact_connection(patch: &[SiteCoord], terminals: &[SiteCoord]) -> Dyadic {
    let n = patch.len();
    assert!(n <= MAX_ENUMERATED, "patch too large to enumerate");
    let adj = adjacency(patch);
    let need = terminals.iter().fold(0u32, |m, t| m | 1 << patch.iter().position(|p| p == t).expect("terminal in patch"));
    let first = 1u32 << need.trailing_zeros();
    let mut hits: u128 = 0;
    for open in 0..(1u32 << n) {
        if open & need == need && flood(&adj, open, first) & need == need {
            hits += 1;
        }
    }
    Dyadic::new(hits, n as u32)
}

fn outer_ring(interior: &[SiteCoord], lattice: Sublattice) -> Vec<SiteCoord> {
    let mut ring: Vec<SiteCoord> = interior
        .iter()
        .flat_map(|s| s.neighbors())
        .filter(|n| lattice.contains(*n) && !interior.contains(n))
        .collect();
    ring.sort();
    ring.dedup();
    ring
}

fn window(r: i32) -> impl Iterator<Item = SiteCoord> {
    (-r..=r).flat_map(move |j| (-r..=r).map(move |i| SiteCoord::new(i, j)))
}

/// Sites within distance `< eps` of the origin and their exit ring.
pub fn arm_patch(eps: f64, mesh: f64, lattice: Sublattice) -> (Vec<SiteCoord>, Vec<SiteCoord>) {
    let r = eps / mesh;
    let interior: Vec<SiteCoord> =
        window(r.ceil() as i32 + 1).filter(|s| lattice.contains(*s) && (s.norm2_to(SiteCoord::ORIGIN) as f64) < r * r).collect();
    let ring = outer_ring(&interior, lattice);
    (interior, ring)
}

/// Sites inside a bounded domain and their exit ring.
pub fn domain_patch(dom: &Domain, g: &LatticeGeometry) -> (Vec<SiteCoord>, Vec<SiteCoord>) {
    let (c, rad) = dom.bounding_disk().expect("bounded domain");
    let reach = ((c.norm() + rad) / g.mesh()).ceil() as i32 * 2 + 2;
    let interior: Vec<SiteCoord> = window(reach).filter(|s| dom.contains(g.position(*s))).collect();
    let ring = outer_ring(&interior, Sublattice::Whole);
    (interior, ring)
}

fn rect(i: std::ops::RangeInclusive<i32>, j: std::ops::RangeInclusive<i32>) -> Vec<SiteCoord> {
    j.flat_map(|j| i.clone().map(move |i| SiteCoord::new(i, j))).collect()
}

/// One enumerable event with its matching Monte Carlo specification.
#[derive(Clone, Debug, Serialize)]
pub struct OracleCase {
    pub event: &'static str,
    pub patch: &'static str,
    pub spec: EventSpec,
    pub exact: Dyadic,
    /// Sites whose states were enumerated.
    pub enumerated: usize,
}

impl OracleCase {
    pub fn name(&self) -> String {
        format!("{}/{}", self.event, self.patch)
    }
}

fn arm_case(event: &'static str, patch: &'static str, eps: f64, lattice: Sublattice) -> OracleCase {
    let (interior, ring) = arm_patch(eps, 1.0, lattice);
    let kind = match lattice {
        Sublattice::Upper => EventKind::BoundaryArm { eps },
        _ => EventKind::OneArm { z: Point::ORIGIN, eps },
    };
    OracleCase {
        event,
        patch,
        spec: EventSpec::new(1.0, kind),
        exact: exact_escape(&interior, &ring, SiteCoord::ORIGIN),
        enumerated: interior.len(),
    }
}

fn connection_case(event: &'static str, patch: &'static str, sites: Vec<SiteCoord>, terminals: Vec<SiteCoord>) -> OracleCase {
    OracleCase {
        event,
        patch,
        exact: exact_connection(&sites, &terminals),
        enumerated: sites.len(),
        spec: EventSpec::new(1.0, EventKind::PatchConnect { patch: sites, terminals }),
    }
}

/// The fixed catalog of enumerable patches.
pub fn catalog() -> Vec<OracleCase> {
    let dom = Domain::unit_disk();
    let g = LatticeGeometry::new(0.5).expect("valid mesh");
    let (interior, ring) = domain_patch(&dom, &g);
    let gasket = OracleCase {
        event: "gasket",
        patch: "disk-mesh-1/2",
        spec: EventSpec::new(0.5, EventKind::Gasket { z: Point::ORIGIN, domain: dom }),
        exact: exact_escape(&interior, &ring, SiteCoord::ORIGIN),
        enumerated: interior.len(),
    };
    vec![
        arm_case("one-arm", "r1/2", 0.5, Sublattice::Whole),
        arm_case("one-arm", "r5/2", 2.5, Sublattice::Whole),
        arm_case("boundary-arm", "r1/2", 0.5, Sublattice::Upper),
        arm_case("boundary-arm", "r5/2", 2.5, Sublattice::Upper),
        connection_case("anchored", "4x4", rect(-1..=2, 0..=3), vec![SiteCoord::ORIGIN, SiteCoord::new(0, 2)]),
        connection_case(
            "multipoint",
            "5x4",
            rect(-2..=2, 0..=3),
            vec![SiteCoord::ORIGIN, SiteCoord::new(-2, 3), SiteCoord::new(1, 2)],
        ),
        gasket,
    ]
}

/// Catalog entries matching an event name and, optionally, a patch label.
pub fn find(event: &str, patch: Option<&str>) -> Vec<OracleCase> {
    catalog().into_iter().filter(|c| c.event == event && patch.is_none_or(|p| c.patch == p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_reduces() {
        assert_eq!(Dyadic::new(8, 5), Dyadic { numerator: 1, log2_denominator: 2 });
        assert_eq!(Dyadic::new(0, 5), Dyadic { numerator: 0, log2_denominator: 0 });
        assert_eq!(Dyadic::new(3, 2).value(), 0.75);
    }

    #[test]
    fn single_site_patch() {
        let p = exact_connection(&[SiteCoord::ORIGIN], &[SiteCoord::ORIGIN]);
        assert_eq!(p.value(), 0.5);
    }

    #[test]
    fn marginalized_exits_match_full_enumeration() {
        // Enumerate the exit ring explicitly as part of a patch: the escape
        // event is "start connected to some open ring site".
        let (interior, ring) = arm_patch(1.5, 1.0, Sublattice::Whole);
        let marg = exact_escape(&interior, &ring, SiteCoord::ORIGIN);
        let all: Vec<SiteCoord> = interior.iter().chain(&ring).copied().collect();
        let adj = adjacency(&all);
        let n = all.len();
        let ring_mask: u32 = ((1u32 << ring.len()) - 1) << interior.len();
        let start = 1u32 << interior.iter().position(|&x| x == SiteCoord::ORIGIN).unwrap();
        let mut hits = 0u128;
        for open in 0..(1u32 << n) {
            // Ring sites do not propagate.
            let inner_open = open & !ring_mask;
            let comp = flood(&adj, inner_open, start);
            let mut touched = 0u32;
            let mut rest = comp;
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                touched |= adj[k];
            }
            hits += u128::from(comp != 0 && touched & ring_mask & open != 0);
        }
        assert_eq!(marg, Dyadic::new(hits, n as u32));
    }
}
