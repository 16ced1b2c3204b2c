//! Monte Carlo laboratory for critical site percolation on the triangular
//! lattice.
//!
//! Configurations are never stored: [`randomness`] assigns every site a lazy,
//! deterministic state keyed by `(seed, sample)`, [`explorer`] decides
//! connection events by breadth-first search over those states, and
//! [`estimators`] turns per-sample outcomes into probability, ratio and
//! exponent estimates whose results do not depend on the worker count.

pub mod audit;
pub mod domains;
pub mod error;
pub mod estimators;
pub mod explorer;
pub mod lattice;
pub mod oracle;
pub mod randomness;

pub use domains::Domain;
pub use error::{DomainError, EstimateError, ExploreError, LatticeError};
pub use estimators::{Estimate, EventKind, EventSpec, ExponentFit, RatioEstimate};
pub use explorer::{Explorer, Region, Shape};
pub use lattice::{LatticeGeometry, Point, SiteCoord, Sublattice};
pub use randomness::{SampleKey, SiteState, SiteStates};
