//! Monte Carlo estimation over lazily sampled configurations.
//!
//! Sample `k` of a run with seed `s` is always the configuration keyed by
//! `SampleKey { seed: s, sample: k }`. Work is split into fixed-size chunks of
//! consecutive sample indices and per-chunk integer tallies are summed, so
//! every result is bit-identical for any worker count.

mod experiments;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use experiments::*;
pub use stats::*;

use crate::domains::Domain;
use crate::error::EstimateError;
use crate::explorer::{AnchoredProbe, ArmProbe, ConnectionProbe, EventOutcome, Explorer, GasketProbe, MultipointProbe, Region};
use crate::lattice::{LatticeGeometry, Point, SiteCoord, Sublattice};
use crate::randomness::{SampleField, SampleKey, SiteStates};

/// Samples per work item.
pub const CHUNK: u64 = 256;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PERCOLAB_WORKERS";

/// Worker pool configuration. The worker count only affects wall time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Runner {
    pub workers: usize,
}

impl Default for Runner {
    fn default() -> Self {
        let from_env = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&w| w > 0);
        let workers = from_env.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Runner { workers }
    }
}

impl Runner {
    pub fn new(workers: usize) -> Self {
        Runner { workers: workers.max(1) }
    }

    /// Evaluates `width` events on samples `0..n`. `eval` fills one outcome
    /// per event and returns the number of per-sample invariant violations
    /// it observed.
    pub fn tally<F>(&self, n: u64, seed: u64, width: usize, eval: F) -> Tally
    where
        F: Fn(&mut Explorer, SampleKey, &mut [EventOutcome]) -> u64 + Sync,
    {
        let chunks = n.div_ceil(CHUNK);
        let work = || {
            (0..chunks)
                .into_par_iter()
                .map_init(
                    || (Explorer::new(), vec![EventOutcome::default(); width]),
                    |(ex, buf), chunk| {
                        let mut t = Tally::new(width);
                        for sample in chunk * CHUNK..((chunk + 1) * CHUNK).min(n) {
                            buf.iter_mut().for_each(|o| *o = EventOutcome::default());
                            let violations = eval(ex, SampleKey::new(seed, sample), buf);
                            t.record(buf, violations);
                        }
                        t
                    },
                )
                .reduce(|| Tally::new(width), Tally::merge)
        };
        if self.workers == 1 {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
            pool.install(work)
        } else {
            match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
                Ok(pool) => pool.install(work),
                Err(_) => work(),
            }
        }
    }
}

/// Integer outcome counts of several events on shared samples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub n: u64,
    pub hits: Vec<u64>,
    /// Row-major `width x width` counts of joint occurrence.
    pub joint: Vec<u64>,
    pub truncated: Vec<u64>,
    pub violations: u64,
}

impl Tally {
    pub fn new(width: usize) -> Self {
        Tally { n: 0, hits: vec![0; width], joint: vec![0; width * width], truncated: vec![0; width], violations: 0 }
    }

    pub fn width(&self) -> usize {
        self.hits.len()
    }

    fn record(&mut self, outcomes: &[EventOutcome], violations: u64) {
        let w = self.width();
        self.n += 1;
        self.violations += violations;
        for (a, oa) in outcomes.iter().enumerate() {
            if oa.truncated {
                self.truncated[a] += 1;
            }
            if !oa.hit {
                continue;
            }
            self.hits[a] += 1;
            for (b, ob) in outcomes.iter().enumerate().skip(a + 1) {
                if ob.hit {
                    self.joint[a * w + b] += 1;
                }
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.n += other.n;
        self.violations += other.violations;
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
        for (a, b) in self.joint.iter_mut().zip(other.joint) {
            *a += b;
        }
        for (a, b) in self.truncated.iter_mut().zip(other.truncated) {
            *a += b;
        }
        self
    }

    pub fn estimate(&self, k: usize) -> Result<Estimate, EstimateError> {
        Ok(Estimate::from_counts(self.hits[k], self.n)?.with_truncated(self.truncated[k]))
    }

    pub fn both(&self, a: usize, b: usize) -> u64 {
        if a == b {
            self.hits[a]
        } else {
            let w = self.width();
            self.joint[a.min(b) * w + a.max(b)]
        }
    }

    pub fn joint_counts(&self, first: usize, second: usize) -> JointCounts {
        let both = self.both(first, second);
        JointCounts { n: self.n, both, first_only: self.hits[first] - both, second_only: self.hits[second] - both }
    }

    /// Shared-sample ratio `P(first) / P(second)`.
    pub fn ratio(&self, first: usize, second: usize) -> Result<RatioEstimate, EstimateError> {
        RatioEstimate::shared(&self.joint_counts(first, second))
    }
}

/// Declarative description of one connection event at one mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub mesh: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EventKind {
    SiteOpen { site: SiteCoord },
    OneArm { z: Point, eps: f64 },
    BoundaryArm { eps: f64 },
    Anchored { z: Point, box_factor: f64 },
    Multipoint { bulk: Vec<Point>, boundary: Vec<f64>, box_factor: f64 },
    Gasket { z: Point, domain: Domain },
    /// Success means both the upper event and its mirror image hold on one
    /// shared configuration.
    Images { z: Point, box_factor: f64 },
    /// All terminals joined by open paths inside a finite patch of sites.
    PatchConnect { patch: Vec<SiteCoord>, terminals: Vec<SiteCoord> },
}

impl EventSpec {
    pub fn new(mesh: f64, kind: EventKind) -> Self {
        EventSpec { mesh, kind }
    }

    pub fn compile(&self) -> Result<CompiledEvent, EstimateError> {
        let g = LatticeGeometry::new(self.mesh)?;
        Ok(match &self.kind {
            EventKind::SiteOpen { site } => CompiledEvent::SiteOpen(*site),
            EventKind::OneArm { z, eps } => {
                CompiledEvent::Arm(ArmProbe::new(g.site_near(*z), &[*eps], Sublattice::Whole, &g)?)
            }
            EventKind::BoundaryArm { eps } => {
                CompiledEvent::Arm(ArmProbe::new(SiteCoord::ORIGIN, &[*eps], Sublattice::Upper, &g)?)
            }
            EventKind::Anchored { z, box_factor } => CompiledEvent::Anchored(AnchoredProbe::new(*z, &g, *box_factor)?),
            EventKind::Multipoint { bulk, boundary, box_factor } => {
                CompiledEvent::Multipoint(MultipointProbe::new(bulk, boundary, &g, *box_factor)?)
            }
            EventKind::Gasket { z, domain } => CompiledEvent::Gasket(GasketProbe::new(domain, &[*z], &g)?),
            EventKind::Images { z, box_factor } => CompiledEvent::Images(AnchoredProbe::new(*z, &g, *box_factor)?),
            EventKind::PatchConnect { patch, terminals } => {
                let (first, rest) = terminals
                    .split_first()
                    .ok_or_else(|| EstimateError::InvalidParameter("patch event needs terminals".into()))?;
                let bounds = Region::Sites(patch.iter().copied().collect());
                CompiledEvent::Patch(ConnectionProbe::new(Sublattice::Whole, *first, rest, bounds, &g)?)
            }
        })
    }
}

/// An [`EventSpec`] with its exploration geometry precomputed.
#[derive(Clone, Debug)]
pub enum CompiledEvent {
    SiteOpen(SiteCoord),
    Arm(ArmProbe),
    Anchored(AnchoredProbe),
    Multipoint(MultipointProbe),
    Gasket(GasketProbe),
    Images(AnchoredProbe),
    Patch(ConnectionProbe),
}

impl CompiledEvent {
    pub fn evaluate(&self, ex: &mut Explorer, field: &SampleField) -> EventOutcome {
        let hit = |hit| EventOutcome { hit, truncated: false };
        match self {
            CompiledEvent::SiteOpen(c) => hit(field.is_open(*c)),
            CompiledEvent::Arm(p) => hit(p.holds(ex, field)),
            CompiledEvent::Anchored(p) => p.evaluate(ex, field),
            CompiledEvent::Multipoint(p) => p.evaluate(ex, field),
            CompiledEvent::Gasket(p) => hit(p.hit_from_point(ex, field, 0)),
            CompiledEvent::Images(p) => {
                let u = p.evaluate(ex, field);
                if !u.hit {
                    return EventOutcome { hit: false, truncated: u.truncated };
                }
                let l = p.evaluate_lower(ex, *field);
                EventOutcome { hit: l.hit, truncated: l.truncated }
            }
            // The patch is the whole world of the event, so leaving it is not a truncation.
            CompiledEvent::Patch(p) => hit(p.connects_all(ex, field).hit),
        }
    }
}

/// Success frequency of one event over samples `0..n`.
pub fn mc_probability(spec: &EventSpec, n: u64, seed: u64, runner: &Runner) -> Result<Estimate, EstimateError> {
    if n == 0 {
        return Err(EstimateError::NoSamples);
    }
    let ev = spec.compile()?;
    let tally = runner.tally(n, seed, 1, |ex, key, out| {
        out[0] = ev.evaluate(ex, &key.field());
        0
    });
    tally.estimate(0)
}

/// Both events on identical configurations; ratio `P(numerator) / P(denominator)`.
pub fn coupled_ratio(
    numerator: &EventSpec,
    denominator: &EventSpec,
    n: u64,
    seed: u64,
    runner: &Runner,
) -> Result<RatioEstimate, EstimateError> {
    if n == 0 {
        return Err(EstimateError::NoSamples);
    }
    let (a, b) = (numerator.compile()?, denominator.compile()?);
    let tally = runner.tally(n, seed, 2, |ex, key, out| {
        let f = key.field();
        out[0] = a.evaluate(ex, &f);
        out[1] = b.evaluate(ex, &f);
        0
    });
    tally.ratio(0, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_open_is_fair() {
        let spec = EventSpec::new(1.0, EventKind::SiteOpen { site: SiteCoord::ORIGIN });
        let e = mc_probability(&spec, 1_000_000, 42, &Runner::new(1)).unwrap();
        assert!((e.p_hat - 0.5).abs() <= 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn one_arm_below_mesh_matches_enumeration() {
        let spec = EventSpec::new(1.0, EventKind::OneArm { z: Point::ORIGIN, eps: 0.5 });
        let e = mc_probability(&spec, 1_000_000, 7, &Runner::new(1)).unwrap();
        let exact = 63.0 / 128.0;
        assert!(e.z_score(exact).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn zero_samples_rejected() {
        let spec = EventSpec::new(1.0, EventKind::SiteOpen { site: SiteCoord::ORIGIN });
        assert_eq!(mc_probability(&spec, 0, 1, &Runner::new(1)), Err(EstimateError::NoSamples));
    }

    #[test]
    fn identical_specs_give_unit_ratio() {
        let spec = EventSpec::new(1.0 / 16.0, EventKind::OneArm { z: Point::ORIGIN, eps: 0.25 });
        let r = coupled_ratio(&spec, &spec, 20_000, 3, &Runner::new(1)).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn nested_one_arm_ratio_at_least_one_and_coupling_helps() {
        let small = EventSpec::new(1.0 / 32.0, EventKind::OneArm { z: Point::ORIGIN, eps: 0.125 });
        let large = EventSpec::new(1.0 / 32.0, EventKind::OneArm { z: Point::ORIGIN, eps: 0.5 });
        let runner = Runner::new(2);
        let n = 40_000;
        let shared = coupled_ratio(&small, &large, n, 9, &runner).unwrap();
        assert!(shared.ratio >= 1.0);
        let num = mc_probability(&small, n, 10, &runner).unwrap();
        let den = mc_probability(&large, n, 11, &runner).unwrap();
        let independent = RatioEstimate::independent(&num, &den).unwrap();
        assert!(shared.stderr <= independent.stderr, "{shared:?} vs {independent:?}");
    }

    #[test]
    fn undefined_ratio_reported() {
        let never = EventSpec::new(1.0, EventKind::PatchConnect { patch: vec![SiteCoord::ORIGIN], terminals: vec![SiteCoord::ORIGIN] });
        let closed_pair = EventSpec::new(
            1.0,
            EventKind::PatchConnect {
                patch: vec![SiteCoord::ORIGIN, SiteCoord::new(5, 0)],
                terminals: vec![SiteCoord::ORIGIN, SiteCoord::new(5, 0)],
            },
        );
        assert_eq!(coupled_ratio(&never, &closed_pair, 1000, 1, &Runner::new(1)), Err(EstimateError::UndefinedRatio));
    }

    #[test]
    fn partition_invariance() {
        let spec = EventSpec::new(1.0 / 16.0, EventKind::Anchored { z: Point::new(0.2, 0.3), box_factor: 4.0 });
        let n = 5_000;
        let base = mc_probability(&spec, n, 77, &Runner::new(1)).unwrap();
        for w in [4, 16] {
            assert_eq!(mc_probability(&spec, n, 77, &Runner::new(w)).unwrap(), base);
        }
    }

    #[test]
    fn event_spec_serde_round_trip() {
        let spec = EventSpec::new(
            0.125,
            EventKind::Gasket { z: Point::new(0.1, 0.2), domain: "disk:0,0,1*2+0.5,0".parse().unwrap() },
        );
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"event\":\"gasket\""), "{json}");
        assert_eq!(serde_json::from_str::<EventSpec>(&json).unwrap(), spec);
    }
}
