//! Lazily evaluated critical site configurations.
//!
//! A configuration is never stored. The state of a site is a pure function of
//! `(seed, sample, i, j)`: the sample key is folded into a 64-bit stream key
//! once, and each site hashes its packed coordinates against that key with a
//! strong 64-bit finalizer. The top bit of the hash decides open/closed, so
//! every site is open with probability 1/2.

use serde::{Deserialize, Serialize};

use crate::lattice::{reflect_lower_unchecked, SiteCoord};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_SALT: u64 = 0x6A09_E667_F3BC_C909;
const SAMPLE_SALT: u64 = 0xBB67_AE85_84CA_A73B;

/// Moremur finalizer (Pelle Evensen's improved MurmurHash3 mixing constants).
#[inline(always)]
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 27;
    x = x.wrapping_mul(0x3C79_AC49_2BA7_B653);
    x ^= x >> 33;
    x = x.wrapping_mul(0x1C69_B3F7_4AC4_AE35);
    x ^= x >> 27;
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub seed: u64,
    pub sample: u64,
}

impl SampleKey {
    pub const fn new(seed: u64, sample: u64) -> Self {
        SampleKey { seed, sample }
    }

    pub fn field(self) -> SampleField {
        let k = mix64(self.seed ^ SEED_SALT);
        let k = mix64(k.wrapping_add(self.sample.wrapping_mul(GOLDEN_GAMMA)) ^ SAMPLE_SALT);
        SampleField { key: k }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteState {
    Open,
    Closed,
}

/// Anything that assigns open/closed to lattice sites.
pub trait SiteStates {
    fn is_open(&self, c: SiteCoord) -> bool;

    fn state(&self, c: SiteCoord) -> SiteState {
        if self.is_open(c) {
            SiteState::Open
        } else {
            SiteState::Closed
        }
    }
}

impl<S: SiteStates + ?Sized> SiteStates for &S {
    #[inline(always)]
    fn is_open(&self, c: SiteCoord) -> bool {
        (**self).is_open(c)
    }
}

/// Precomputed stream key of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleField {
    key: u64,
}

impl SampleField {
    #[inline(always)]
    pub fn bits(&self, c: SiteCoord) -> u64 {
        let packed = (u64::from(c.i as u32) << 32) | u64::from(c.j as u32);
        mix64(self.key.wrapping_add(packed.wrapping_mul(GOLDEN_GAMMA)))
    }
}

impl SiteStates for SampleField {
    #[inline(always)]
    fn is_open(&self, c: SiteCoord) -> bool {
        self.bits(c) >> 63 == 1
    }
}

impl SiteStates for SampleKey {
    fn is_open(&self, c: SiteCoord) -> bool {
        self.field().is_open(c)
    }
}

pub fn site_state(k: SampleKey, c: SiteCoord) -> SiteState {
    k.field().state(c)
}

/// Every site open.
#[derive(Clone, Copy, Debug, Default)]
pub struct AllOpen;

impl SiteStates for AllOpen {
    fn is_open(&self, _: SiteCoord) -> bool {
        true
    }
}

/// Every site closed.
#[derive(Clone, Copy, Debug, Default)]
pub struct AllClosed;

impl SiteStates for AllClosed {
    fn is_open(&self, _: SiteCoord) -> bool {
        false
    }
}

/// Reads the states of `inner` through the upper-to-lower half-plane reflection:
/// site `c` of the upper half-plane gets the state of `reflect_lower(c)`.
#[derive(Clone, Copy, Debug)]
pub struct Reflected<S>(pub S);

impl<S: SiteStates> SiteStates for Reflected<S> {
    #[inline(always)]
    fn is_open(&self, c: SiteCoord) -> bool {
        self.0.is_open(reflect_lower_unchecked(c))
    }
}

/// An explicit finite configuration; sites not listed take `default`.
#[derive(Clone, Debug, Default)]
pub struct FixedStates {
    pub open: std::collections::HashSet<SiteCoord>,
    pub closed: std::collections::HashSet<SiteCoord>,
    pub default_open: bool,
}

impl FixedStates {
    pub fn closed_except(open: impl IntoIterator<Item = SiteCoord>) -> Self {
        FixedStates { open: open.into_iter().collect(), ..Default::default() }
    }

    pub fn open_except(closed: impl IntoIterator<Item = SiteCoord>) -> Self {
        FixedStates { closed: closed.into_iter().collect(), default_open: true, ..Default::default() }
    }
}

impl SiteStates for FixedStates {
    fn is_open(&self, c: SiteCoord) -> bool {
        if self.open.contains(&c) {
            true
        } else if self.closed.contains(&c) {
            false
        } else {
            self.default_open
        }
    }
}
