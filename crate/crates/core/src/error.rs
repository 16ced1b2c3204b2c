use thiserror::Error;

use crate::lattice::{Point, SiteCoord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("mesh must be a positive finite number, got {0}")]
    InvalidMesh(f64),
    #[error("point is not finite")]
    NonFinitePoint,
    #[error("point {0} lies outside the requested half-plane")]
    OutsideHalfPlane(Point),
    #[error("site {0} is not in the discrete upper half-plane")]
    NotInUpperHalfPlane(SiteCoord),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("invalid domain parameter: {0}")]
    InvalidParameter(String),
    #[error("point {0} is not inside the domain")]
    PointOutside(Point),
    #[error("domain is unbounded; only bounded domains have a finite collar")]
    Unbounded,
    #[error("cannot parse domain `{0}`: expected disk:cx,cy,R | halfplane | strip:h, optionally followed by *s+tx,ty")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error("exploration region is unbounded")]
    Unbounded,
    #[error("start site {0} is not inside the explored region")]
    StartOutside(SiteCoord),
    #[error("at most {max} targets are supported, got {got}")]
    TooManyTargets { max: usize, got: usize },
    #[error("exploration arena of {0} cells is too large")]
    TooLarge(usize),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("denominator event never occurred; ratio undefined")]
    UndefinedRatio,
    #[error("power-law fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("power-law fit needs positive x and positive estimates (point {0})")]
    NonPositive(usize),
    #[error("power-law fit needs at least two distinct x values")]
    DegenerateAbscissa,
    #[error("invalid experiment parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Explore(#[from] ExploreError),
}

impl From<LatticeError> for EstimateError {
    fn from(e: LatticeError) -> Self {
        EstimateError::Explore(e.into())
    }
}

impl From<DomainError> for EstimateError {
    fn from(e: DomainError) -> Self {
        EstimateError::Explore(e.into())
    }
}
