//! Cluster exploration and the connection-event detectors built on it.
//!
//! Every event is decided by a breadth-first search over open sites. The
//! geometry of an event (which sites may be explored, which count as escaping,
//! where the safety box ends) is compiled once into an [`Arena`]: a dense
//! axial window holding one class byte per site. A worker-local [`Explorer`]
//! carries the visited stamps and the queue, so evaluating one sample costs
//! nothing beyond the sites the cluster actually touches.

use std::collections::BTreeSet;

use crate::domains::{disk_axial_window, Domain};
use crate::error::ExploreError;
use crate::lattice::{LatticeGeometry, Point, SiteCoord, Sublattice, NEIGHBOR_OFFSETS};
use crate::randomness::{Reflected, SiteStates};

pub const MAX_TARGETS: usize = 64;
pub const MAX_LEVELS: usize = 31;
const MAX_CELLS: usize = 1 << 28;

const ABSENT: u8 = 0;
const INSIDE: u8 = 1;
const ESCAPE: u8 = 2;
const TRUNCATE: u8 = 3;
const CLASS_MASK: u8 = 0b11;
const TARGET_FLAG: u8 = 0b100;
const LEVEL_SHIFT: u8 = 3;

/// Site-membership predicate.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Everywhere,
    /// Open disk in the plane: sites whose position is at distance `< radius`.
    Disk { center: Point, radius: f64 },
    /// Sites at distance `< radius` from a lattice site, decided in exact
    /// integer arithmetic.
    SiteDisk { center: SiteCoord, radius: f64 },
    Domain(Domain),
    Sites(BTreeSet<SiteCoord>),
    /// Inclusive axial rectangle.
    Rect { i: (i32, i32), j: (i32, i32) },
    Intersection(Vec<Region>),
}

impl Region {
    pub fn contains(&self, c: SiteCoord, g: &LatticeGeometry) -> bool {
        match self {
            Region::Everywhere => true,
            Region::Disk { center, radius } => (g.position(c) - *center).norm2() < radius * radius,
            Region::SiteDisk { center, radius } => {
                let r = radius / g.mesh();
                (c.norm2_to(*center) as f64) < r * r
            }
            Region::Domain(d) => d.contains(g.position(c)),
            Region::Sites(s) => s.contains(&c),
            Region::Rect { i, j } => (i.0..=i.1).contains(&c.i) && (j.0..=j.1).contains(&c.j),
            Region::Intersection(parts) => parts.iter().all(|p| p.contains(c, g)),
        }
    }

    /// Axial window `(i_min, i_max, j_min, j_max)` containing every member,
    /// or `None` when the region is unbounded.
    pub fn axial_window(&self, g: &LatticeGeometry) -> Option<(i32, i32, i32, i32)> {
        match self {
            Region::Everywhere => None,
            Region::Disk { center, radius } => Some(disk_axial_window(g, *center, *radius)),
            Region::SiteDisk { center, radius } => Some(disk_axial_window(g, g.position(*center), *radius)),
            Region::Domain(d) => d.axial_window(g, 1.0).ok(),
            Region::Sites(s) => {
                let first = s.iter().next()?;
                Some(s.iter().fold((first.i, first.i, first.j, first.j), |(a, b, c, d), s| {
                    (a.min(s.i), b.max(s.i), c.min(s.j), d.max(s.j))
                }))
            }
            Region::Rect { i, j } => Some((i.0, i.1, j.0, j.1)),
            Region::Intersection(parts) => parts
                .iter()
                .filter_map(|p| p.axial_window(g))
                .reduce(|a, b| (a.0.max(b.0), a.1.min(b.1), a.2.max(b.2), a.3.min(b.3))),
        }
    }
}

/// Where a cluster may grow and what stopping it means.
///
/// Open sites inside `lattice ∩ bounds ∩ region` are explored. An open site
/// of the sublattice inside `bounds` but outside `region` is an escape: it is
/// recorded and not expanded. An open site of the sublattice outside `bounds`
/// marks the exploration as truncated. Sites outside the sublattice do not
/// exist.
#[derive(Clone, Debug, PartialEq)]
pub struct Shape {
    pub lattice: Sublattice,
    pub region: Region,
    pub bounds: Region,
}

/// Concentric distance levels around a site, used to answer several
/// one-arm radii from a single exploration.
#[derive(Clone, Debug, PartialEq)]
pub struct Levels {
    pub center: SiteCoord,
    /// Increasing radii in plane units.
    pub radii: Vec<f64>,
}

impl Levels {
    fn level_of(&self, c: SiteCoord, g: &LatticeGeometry) -> u8 {
        let d2 = c.norm2_to(self.center) as f64;
        self.radii
            .iter()
            .take_while(|r| {
                let r = **r / g.mesh();
                d2 >= r * r
            })
            .count() as u8
    }
}

/// A compiled event geometry.
#[derive(Clone, Debug)]
pub struct Arena {
    i0: i32,
    j0: i32,
    width: i32,
    height: i32,
    cells: Vec<u8>,
    targets: Vec<(u32, SiteCoord)>,
    escape_cells: Vec<u32>,
    levels: usize,
}

impl Arena {
    pub fn new(
        shape: &Shape,
        targets: &[SiteCoord],
        levels: Option<&Levels>,
        g: &LatticeGeometry,
    ) -> Result<Self, ExploreError> {
        if targets.len() > MAX_TARGETS {
            return Err(ExploreError::TooManyTargets { max: MAX_TARGETS, got: targets.len() });
        }
        let window = Region::Intersection(vec![shape.region.clone(), shape.bounds.clone()])
            .axial_window(g)
            .ok_or(ExploreError::Unbounded)?;
        let (mut ri0, ri1, mut rj0, mut rj1) = window;
        match shape.lattice {
            Sublattice::Upper => rj0 = rj0.max(0),
            Sublattice::Lower => rj1 = rj1.min(-1),
            Sublattice::Whole => {}
        }
        if ri0 > ri1 || rj0 > rj1 {
            // Empty explorable set; keep a 1x1 window so indexing stays valid.
            ri0 = ri1;
            rj0 = rj1;
        }
        // Two rings of margin: collar sites used as sources must have all
        // their neighbors inside the window.
        let (i0, j0) = (ri0 - 2, rj0 - 2);
        let width = ri1 - ri0 + 5;
        let height = rj1 - rj0 + 5;
        let n = (width as usize)
            .checked_mul(height as usize)
            .filter(|&n| n <= MAX_CELLS)
            .ok_or(ExploreError::TooLarge(usize::MAX))?;
        let level_count = levels.map_or(0, |l| l.radii.len());
        if level_count > MAX_LEVELS {
            return Err(ExploreError::TooManyTargets { max: MAX_LEVELS, got: level_count });
        }
        let mut cells = vec![ABSENT; n];
        let mut escape_cells = Vec::new();
        for y in 0..height {
            for x in 0..width {
                let c = SiteCoord::new(i0 + x, j0 + y);
                let border = x <= 1 || y <= 1 || x >= width - 2 || y >= height - 2;
                let class = if !shape.lattice.contains(c) {
                    ABSENT
                } else if !shape.bounds.contains(c, g) {
                    TRUNCATE
                } else if !shape.region.contains(c, g) {
                    ESCAPE
                } else if border {
                    // Only reachable if a window was computed too tight.
                    debug_assert!(false, "explorable site {c} on the arena border");
                    TRUNCATE
                } else {
                    INSIDE
                };
                let level = levels.map_or(0, |l| l.level_of(c, g));
                let idx = (y * width + x) as usize;
                cells[idx] = class | (level << LEVEL_SHIFT);
            }
        }
        let w = width as isize;
        for idx in 0..n {
            let (x, y) = ((idx as isize) % w, (idx as isize) / w);
            if cells[idx] & CLASS_MASK != ESCAPE || x == 0 || y == 0 || x == w - 1 || y == height as isize - 1 {
                continue;
            }
            let touches_inside = NEIGHBOR_OFFSETS
                .iter()
                .any(|&(di, dj)| cells[(idx as isize + di as isize + dj as isize * w) as usize] & CLASS_MASK == INSIDE);
            if touches_inside {
                escape_cells.push(idx as u32);
            }
        }
        let mut arena = Arena { i0, j0, width, height, cells, targets: Vec::new(), escape_cells, levels: level_count };
        for &t in targets {
            let idx = arena.index(t).filter(|&i| arena.cells[i as usize] & CLASS_MASK == INSIDE);
            let idx = idx.ok_or(ExploreError::StartOutside(t))?;
            arena.cells[idx as usize] |= TARGET_FLAG;
            arena.targets.push((idx, t));
        }
        Ok(arena)
    }

    pub fn index(&self, c: SiteCoord) -> Option<u32> {
        let (x, y) = (c.i - self.i0, c.j - self.j0);
        if x < 0 || y < 0 || x >= self.width || y >= self.height {
            return None;
        }
        Some((y * self.width + x) as u32)
    }

    #[inline(always)]
    fn coord(&self, idx: u32) -> SiteCoord {
        let w = self.width as u32;
        SiteCoord::new((idx % w) as i32 + self.i0, (idx / w) as i32 + self.j0)
    }

    pub fn is_explorable(&self, c: SiteCoord) -> bool {
        self.index(c).is_some_and(|i| self.cells[i as usize] & CLASS_MASK == INSIDE)
    }

    pub fn targets(&self) -> impl Iterator<Item = SiteCoord> + '_ {
        self.targets.iter().map(|t| t.1)
    }

    pub fn target_count(&self) -> usize {
        self.targets.len()
    }

    /// Escape sites adjacent to an explorable site (for a domain region: its
    /// exterior collar).
    pub fn escape_sites(&self) -> impl Iterator<Item = SiteCoord> + '_ {
        self.escape_cells.iter().map(|&i| self.coord(i))
    }

    pub fn explorable_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c & CLASS_MASK == INSIDE).count()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn level_count(&self) -> usize {
        self.levels
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StopRule {
    pub on_escape: bool,
    pub on_all_targets: bool,
}

impl StopRule {
    pub const EXHAUST: StopRule = StopRule { on_escape: false, on_all_targets: false };
    pub const ON_ESCAPE: StopRule = StopRule { on_escape: true, on_all_targets: false };
    pub const ON_ALL_TARGETS: StopRule = StopRule { on_escape: false, on_all_targets: true };
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExplorationResult {
    /// An open escape site joined the cluster.
    pub escaped: bool,
    /// Bit `t` is set when target `t` joined the cluster.
    pub targets_hit: u64,
    /// Open explorable sites that joined the cluster.
    pub visited_count: u64,
    /// The cluster reached past the safety bounds; connection events derived
    /// from this result are lower bounds.
    pub truncated: bool,
    /// Highest distance level among the open sites found (escapes included).
    pub max_level: u8,
}

impl ExplorationResult {
    pub fn hit(&self, target: usize) -> bool {
        self.targets_hit >> target & 1 == 1
    }

    pub fn hit_all(&self, n_targets: usize) -> bool {
        let all = if n_targets >= 64 { u64::MAX } else { (1u64 << n_targets) - 1 };
        self.targets_hit & all == all
    }

    pub fn targets_hit_list(&self) -> Vec<usize> {
        (0..64).filter(|&t| self.hit(t)).collect()
    }
}

/// Worker-local exploration scratch, reusable across arenas and samples.
#[derive(Debug, Default)]
pub struct Explorer {
    stamps: Vec<u32>,
    epoch: u32,
    queue: Vec<u32>,
}

impl Explorer {
    pub fn new() -> Self {
        Self::default()
    }

    fn begin(&mut self, arena: &Arena) {
        if self.stamps.len() < arena.cells.len() {
            self.stamps.resize(arena.cells.len(), 0);
        }
        if self.epoch == u32::MAX {
            self.stamps.iter_mut().for_each(|s| *s = 0);
            self.epoch = 0;
        }
        self.epoch += 1;
        self.queue.clear();
    }

    /// Explores the open cluster of `start`, which must be an explorable
    /// site of the arena. A closed start yields the empty result.
    pub fn explore<S: SiteStates + ?Sized>(
        &mut self,
        arena: &Arena,
        states: &S,
        start: SiteCoord,
        stop: StopRule,
    ) -> Result<ExplorationResult, ExploreError> {
        let idx = arena
            .index(start)
            .filter(|&i| arena.cells[i as usize] & CLASS_MASK == INSIDE)
            .ok_or(ExploreError::StartOutside(start))?;
        Ok(self.run(arena, states, std::iter::once(idx), stop))
    }

    /// Explores the union of the clusters of every open escape site, growing
    /// only through explorable sites. For a domain region this marks every
    /// open site connected to the outside.
    pub fn explore_from_escapes<S: SiteStates + ?Sized>(
        &mut self,
        arena: &Arena,
        states: &S,
        stop: StopRule,
    ) -> ExplorationResult {
        let sources = arena.escape_cells.iter().copied();
        self.run(arena, states, sources, StopRule { on_escape: false, ..stop })
    }

    fn run<S: SiteStates + ?Sized>(
        &mut self,
        arena: &Arena,
        states: &S,
        sources: impl Iterator<Item = u32>,
        stop: StopRule,
    ) -> ExplorationResult {
        self.begin(arena);
        let epoch = self.epoch;
        let w = arena.width as isize;
        let offsets: [isize; 6] = NEIGHBOR_OFFSETS.map(|(di, dj)| di as isize + dj as isize * w);
        let n_targets = arena.targets.len();
        let all_targets = if n_targets == 64 { u64::MAX } else { (1u64 << n_targets) - 1 };
        let mut res = ExplorationResult::default();

        let cells = &arena.cells;
        let stamps = &mut self.stamps;
        let queue = &mut self.queue;

        // Returns true when exploration should stop.
        let absorb = |idx: u32, cell: u8, res: &mut ExplorationResult, queue: &mut Vec<u32>| -> bool {
            res.max_level = res.max_level.max(cell >> LEVEL_SHIFT);
            match cell & CLASS_MASK {
                INSIDE => {
                    queue.push(idx);
                    res.visited_count += 1;
                    if cell & TARGET_FLAG != 0 {
                        for (t, &(tidx, _)) in arena.targets.iter().enumerate() {
                            if tidx == idx {
                                res.targets_hit |= 1 << t;
                            }
                        }
                        if stop.on_all_targets && res.targets_hit == all_targets {
                            return true;
                        }
                    }
                    false
                }
                ESCAPE => {
                    res.escaped = true;
                    stop.on_escape
                }
                _ => {
                    res.truncated = true;
                    false
                }
            }
        };

        for src in sources {
            let s = src as usize;
            if stamps[s] == epoch {
                continue;
            }
            stamps[s] = epoch;
            if !states.is_open(arena.coord(src)) {
                continue;
            }
            let cell = cells[s];
            if cell & CLASS_MASK == INSIDE {
                if absorb(src, cell, &mut res, queue) {
                    return res;
                }
            } else {
                // Escape sources seed the frontier without being explorable.
                res.max_level = res.max_level.max(cell >> LEVEL_SHIFT);
                queue.push(src);
            }
        }

        let mut head = 0;
        while head < queue.len() {
            let idx = queue[head];
            head += 1;
            let c = arena.coord(idx);
            for (k, &(di, dj)) in NEIGHBOR_OFFSETS.iter().enumerate() {
                let n = (idx as isize + offsets[k]) as usize;
                if stamps[n] == epoch {
                    continue;
                }
                stamps[n] = epoch;
                let cell = cells[n];
                if cell & CLASS_MASK == ABSENT {
                    continue;
                }
                if !states.is_open(SiteCoord::new(c.i + di, c.j + dj)) {
                    continue;
                }
                if absorb(n as u32, cell, &mut res, queue) {
                    return res;
                }
            }
        }
        res
    }
}

/// One-shot exploration: compiles the arena, explores from `start` and stops
/// once every target is found.
pub fn explore<S: SiteStates + ?Sized>(
    states: &S,
    start: SiteCoord,
    shape: &Shape,
    targets: &[SiteCoord],
    g: &LatticeGeometry,
    stop: StopRule,
) -> Result<ExplorationResult, ExploreError> {
    let arena = Arena::new(shape, targets, None, g)?;
    Explorer::new().explore(&arena, states, start, stop)
}

/// Connection outcome with truncation diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventOutcome {
    pub hit: bool,
    /// The event was false and the cluster touched the safety box.
    pub truncated: bool,
}

/// Bulk or boundary one-arm event at one or more radii around a fixed site.
#[derive(Clone, Debug)]
pub struct ArmProbe {
    arena: Arena,
    center: SiteCoord,
    radii: Vec<f64>,
}

impl ArmProbe {
    /// `lattice = Whole` gives the bulk event, `Upper` the boundary event
    /// confined to the discrete upper half-plane.
    pub fn new(center: SiteCoord, radii: &[f64], lattice: Sublattice, g: &LatticeGeometry) -> Result<Self, ExploreError> {
        let mut radii = radii.to_vec();
        if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(ExploreError::Domain(crate::error::DomainError::InvalidParameter(
                "arm radii must be positive".into(),
            )));
        }
        radii.sort_by(|a, b| a.total_cmp(b));
        radii.dedup();
        if !lattice.contains(center) {
            return Err(ExploreError::StartOutside(center));
        }
        let max = *radii.last().unwrap();
        let shape = Shape { lattice, region: Region::SiteDisk { center, radius: max }, bounds: Region::Everywhere };
        let levels = Levels { center, radii: radii.clone() };
        let arena = Arena::new(&shape, &[], Some(&levels), g)?;
        Ok(ArmProbe { arena, center, radii })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Number of radii (in increasing order) the cluster of the center
    /// reaches: the event holds at `radii()[k]` iff `k < reach`.
    pub fn reach<S: SiteStates + ?Sized>(&self, ex: &mut Explorer, states: &S) -> usize {
        let res = ex
            .explore(&self.arena, states, self.center, StopRule::ON_ESCAPE)
            .expect("center is explorable by construction");
        if res.escaped {
            self.radii.len()
        } else {
            usize::from(res.max_level)
        }
    }

    pub fn holds<S: SiteStates + ?Sized>(&self, ex: &mut Explorer, states: &S) -> bool {
        self.reach(ex, states) == self.radii.len()
    }
}

/// Joint connection of a start site with a set of targets inside a
/// (half-plane) safety box.
#[derive(Clone, Debug)]
pub struct ConnectionProbe {
    arena: Arena,
    start: SiteCoord,
    targets: Vec<SiteCoord>,
    lattice: Sublattice,
}

impl ConnectionProbe {
    pub fn new(
        lattice: Sublattice,
        start: SiteCoord,
        targets: &[SiteCoord],
        bounds: Region,
        g: &LatticeGeometry,
    ) -> Result<Self, ExploreError> {
        let shape = Shape { lattice, region: Region::Everywhere, bounds };
        let arena = Arena::new(&shape, targets, None, g)?;
        if !arena.is_explorable(start) {
            return Err(ExploreError::StartOutside(start));
        }
        Ok(ConnectionProbe { arena, start, targets: targets.to_vec(), lattice })
    }

    pub fn targets(&self) -> &[SiteCoord] {
        &self.targets
    }

    pub fn start(&self) -> SiteCoord {
        self.start
    }

    pub fn lattice(&self) -> Sublattice {
        self.lattice
    }

    /// Explores until every target is found or the cluster is exhausted.
    pub fn explore<S: SiteStates + ?Sized>(&self, ex: &mut Explorer, states: &S) -> ExplorationResult {
        ex.explore(&self.arena, states, self.start, StopRule::ON_ALL_TARGETS)
            .expect("start is explorable by construction")
    }

    /// True iff the start and every target lie in one open cluster.
    pub fn connects_all<S: SiteStates + ?Sized>(&self, ex: &mut Explorer, states: &S) -> EventOutcome {
        if !self.targets.iter().all(|&t| states.is_open(t)) {
            return EventOutcome::default();
        }
        let res = self.explore(ex, states);
        let hit = res.hit_all(self.targets.len());
        EventOutcome { hit, truncated: !hit && res.truncated }
    }
}

/// Anchored connection `z^a <-> 0` in the discrete upper half-plane.
#[derive(Clone, Debug)]
pub struct AnchoredProbe {
    inner: ConnectionProbe,
    site: SiteCoord,
}

impl AnchoredProbe {
    pub fn new(z: Point, g: &LatticeGeometry, box_factor: f64) -> Result<Self, ExploreError> {
        let site = upper_bulk_site(z, g)?;
        let radius = box_radius(&[z], box_factor, g)?;
        let bounds = Region::SiteDisk { center: SiteCoord::ORIGIN, radius };
        let inner = ConnectionProbe::new(Sublattice::Upper, SiteCoord::ORIGIN, &[site], bounds, g)?;
        Ok(AnchoredProbe { inner, site })
    }

    pub fn site(&self) -> SiteCoord {
        self.site
    }

    pub fn evaluate<S: SiteStates + ?Sized>(&self, ex: &mut Explorer, states: &S) -> EventOutcome {
        self.inner.connects_all(ex, states)
    }

    /// Mirror event in the discrete lower half-plane: `reflect_lower(z^a)`
    /// connected to the lower origin, reading states through the reflection.
    pub fn evaluate_lower<S: SiteStates>(&self, ex: &mut Explorer, states: S) -> EventOutcome {
        self.inner.connects_all(ex, &Reflected(states))
    }
}

/// All bulk and boundary points in one open cluster of the discrete upper
/// half-plane.
#[derive(Clone, Debug)]
pub struct MultipointProbe {
    inner: ConnectionProbe,
}

impl MultipointProbe {
    pub fn new(bulk: &[Point], boundary: &[f64], g: &LatticeGeometry, box_factor: f64) -> Result<Self, ExploreError> {
        if bulk.is_empty() || boundary.is_empty() {
            return Err(param("multipoint needs at least one bulk and one boundary point"));
        }
        let mut sites = Vec::new();
        let mut points = Vec::new();
        for &x in boundary {
            sites.push(boundary_site(x, g)?);
            points.push(Point::new(x, 0.0));
        }
        for &z in bulk {
            sites.push(upper_bulk_site(z, g)?);
            points.push(z);
        }
        let radius = box_radius(&points, box_factor, g)?;
        let bounds = Region::SiteDisk { center: SiteCoord::ORIGIN, radius };
        let inner = ConnectionProbe::new(Sublattice::Upper, sites[0], &sites[1..], bounds, g)?;
        Ok(MultipointProbe { inner })
    }

    pub fn evaluate<S: SiteStates + ?Sized>(&self, ex: &mut Explorer, states: &S) -> EventOutcome {
        self.inner.connects_all(ex, states)
    }
}

/// Gasket membership: the cluster of a point leaves a bounded domain.
#[derive(Clone, Debug)]
pub struct GasketProbe {
    arena: Arena,
    sites: Vec<SiteCoord>,
}

impl GasketProbe {
    /// Probe for the points `zs`, all inside the bounded domain `dom`.
    pub fn new(dom: &Domain, zs: &[Point], g: &LatticeGeometry) -> Result<Self, ExploreError> {
        if !dom.is_bounded() {
            return Err(crate::error::DomainError::Unbounded.into());
        }
        let mut sites = Vec::with_capacity(zs.len());
        for &z in zs {
            if !dom.contains(z) {
                return Err(crate::error::DomainError::PointOutside(z).into());
            }
            sites.push(g.site_near(z));
        }
        let shape = Shape { lattice: Sublattice::Whole, region: Region::Domain(dom.clone()), bounds: Region::Everywhere };
        let mut inside: Vec<SiteCoord> = sites.iter().copied().filter(|s| dom.contains(g.position(*s))).collect();
        inside.sort();
        inside.dedup();
        let arena = Arena::new(&shape, &inside, None, g)?;
        Ok(GasketProbe { arena, sites })
    }

    pub fn sites(&self) -> &[SiteCoord] {
        &self.sites
    }

    pub fn collar(&self) -> Vec<SiteCoord> {
        let mut v: Vec<_> = self.arena.escape_sites().collect();
        v.sort();
        v
    }

    /// Single-point route: explore from point `k` and stop at the first
    /// open collar site.
    pub fn hit_from_point<S: SiteStates + ?Sized>(&self, ex: &mut Explorer, states: &S, k: usize) -> bool {
        let site = self.sites[k];
        if !self.arena.is_explorable(site) {
            // The nearest site already lies outside the domain.
            return states.is_open(site);
        }
        ex.explore(&self.arena, states, site, StopRule::ON_ESCAPE)
            .expect("site is explorable")
            .escaped
    }

    /// Collar route: one multi-source exploration from every open collar
    /// site; returns one flag per point.
    pub fn hits_from_collar<S: SiteStates + ?Sized>(&self, ex: &mut Explorer, states: &S) -> Vec<bool> {
        let res = ex.explore_from_escapes(&self.arena, states, StopRule::ON_ALL_TARGETS);
        self.sites
            .iter()
            .map(|s| match self.arena.targets().position(|t| t == *s) {
                Some(t) => res.hit(t),
                None => states.is_open(*s),
            })
            .collect()
    }
}

fn param(msg: &str) -> ExploreError {
    ExploreError::Domain(crate::error::DomainError::InvalidParameter(msg.to_string()))
}

pub(crate) fn upper_bulk_site(z: Point, g: &LatticeGeometry) -> Result<SiteCoord, ExploreError> {
    if z.y.is_nan() || z.y <= 0.0 {
        return Err(crate::error::LatticeError::OutsideHalfPlane(z).into());
    }
    Ok(g.nearest_site(z, Sublattice::Upper)?)
}

pub(crate) fn boundary_site(x: f64, g: &LatticeGeometry) -> Result<SiteCoord, ExploreError> {
    let c = g.nearest_site(Point::new(x, 0.0), Sublattice::Upper)?;
    debug_assert_eq!(c.j, 0);
    Ok(c)
}

/// Safety-box radius: `box_factor` times the largest point norm, never below
/// a few mesh units so that the marked sites stay inside.
pub(crate) fn box_radius(points: &[Point], box_factor: f64, g: &LatticeGeometry) -> Result<f64, ExploreError> {
    if !(box_factor.is_finite() && box_factor >= 1.0) {
        return Err(param("box factor must be at least 1"));
    }
    let max_norm = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    Ok((box_factor * max_norm).max(max_norm + 2.0 * g.mesh()))
}

pub fn one_arm<S: SiteStates + ?Sized>(states: &S, z: Point, eps: f64, g: &LatticeGeometry) -> Result<bool, ExploreError> {
    let probe = ArmProbe::new(g.site_near(z), &[eps], Sublattice::Whole, g)?;
    Ok(probe.holds(&mut Explorer::new(), states))
}

pub fn boundary_one_arm<S: SiteStates + ?Sized>(states: &S, eps: f64, g: &LatticeGeometry) -> Result<bool, ExploreError> {
    let probe = ArmProbe::new(SiteCoord::ORIGIN, &[eps], Sublattice::Upper, g)?;
    Ok(probe.holds(&mut Explorer::new(), states))
}

pub fn anchored<S: SiteStates + ?Sized>(
    states: &S,
    z: Point,
    g: &LatticeGeometry,
    box_factor: f64,
) -> Result<EventOutcome, ExploreError> {
    Ok(AnchoredProbe::new(z, g, box_factor)?.evaluate(&mut Explorer::new(), states))
}

pub fn multipoint<S: SiteStates + ?Sized>(
    states: &S,
    bulk: &[Point],
    boundary: &[f64],
    g: &LatticeGeometry,
    box_factor: f64,
) -> Result<EventOutcome, ExploreError> {
    Ok(MultipointProbe::new(bulk, boundary, g, box_factor)?.evaluate(&mut Explorer::new(), states))
}

pub fn gasket_hit<S: SiteStates + ?Sized>(states: &S, z: Point, dom: &Domain, g: &LatticeGeometry) -> Result<bool, ExploreError> {
    Ok(GasketProbe::new(dom, &[z], g)?.hit_from_point(&mut Explorer::new(), states, 0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ImagesOutcome {
    pub upper: bool,
    pub lower: bool,
    pub both: bool,
    pub truncated: bool,
}

/// The anchored event in the upper half-plane under `upper` and its mirror in
/// the lower half-plane under `lower`. With one shared configuration the two
/// read disjoint site sets.
pub fn images_event<U: SiteStates, L: SiteStates>(
    upper: U,
    lower: L,
    z: Point,
    g: &LatticeGeometry,
    box_factor: f64,
) -> Result<ImagesOutcome, ExploreError> {
    let probe = AnchoredProbe::new(z, g, box_factor)?;
    Ok(images_with(&probe, &mut Explorer::new(), upper, lower))
}

pub fn images_with<U: SiteStates, L: SiteStates>(
    probe: &AnchoredProbe,
    ex: &mut Explorer,
    upper: U,
    lower: L,
) -> ImagesOutcome {
    let u = probe.evaluate(ex, &upper);
    let l = probe.evaluate_lower(ex, lower);
    ImagesOutcome { upper: u.hit, lower: l.hit, both: u.hit && l.hit, truncated: u.truncated || l.truncated }
}
