//! Run configuration: everything needed to reproduce a run, as recorded in
//! the manifest.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use percolab::estimators::{GasketRoute, Tolerances};
use percolab::Point;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A real number kept in the textual form it was given in, so that
/// fractions such as `1/512` survive a manifest round trip unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct Num {
    text: String,
    value: f64,
}

impl Num {
    pub fn value(&self) -> f64 {
        self.value
    }
}

fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
            if b == 0.0 {
                bail!("zero denominator in {s:?}");
            }
            a / b
        }
        None => s.parse()?,
    };
    if !v.is_finite() {
        bail!("{s:?} is not finite");
    }
    Ok(v)
}

impl FromStr for Num {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let value = parse_real(s).with_context(|| format!("invalid number {s:?}"))?;
        Ok(Num { text: s.trim().to_string(), value })
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A point written `x,y` or, in polar form, `r@deg` (angle in degrees).
#[derive(Clone, Debug, PartialEq)]
pub struct PointArg {
    text: String,
    value: Point,
}

impl PointArg {
    pub fn value(&self) -> Point {
        self.value
    }
}

impl FromStr for PointArg {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let value = if let Some((r, deg)) = t.split_once('@') {
            let (r, deg) = (parse_real(r)?, parse_real(deg)?);
            Point::polar(r, deg.to_radians())
        } else {
            let (x, y) = t.split_once(',').ok_or_else(|| anyhow!("expected x,y or r@deg, got {t:?}"))?;
            Point::new(parse_real(x)?, parse_real(y)?)
        };
        Ok(PointArg { text: t.to_string(), value })
    }
}

impl fmt::Display for PointArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for PointArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for PointArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Seed given in decimal or as `0x`-prefixed hexadecimal.
pub fn parse_seed(s: &str) -> Result<u64> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => t.replace('_', "").parse(),
    };
    parsed.with_context(|| format!("invalid seed {t:?}"))
}

/// One experiment and its geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    OneArm { mesh: Num, eps: Vec<Num> },
    BoundaryArm { mesh: Num, eps: Vec<Num> },
    Anchored { mesh: Num, points: Vec<PointArg>, box_factor: Num, normalizers: bool },
    Gasket { mesh: Num, domain: String, points: Vec<PointArg>, route: GasketRoute, normalizer: bool },
    Images { mesh: Num, z: PointArg, box_factor: Num },
    Multipoint { mesh: Num, bulk: Vec<PointArg>, boundary: Vec<Num>, scale: Num, box_factor: Num },
    Oracle { event: Option<String>, patch: Option<String> },
    Selftest { mesh: Num },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub n: u64,
    pub seed: u64,
    /// Worker count the run used. Never affects results.
    pub workers: usize,
    pub csv: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub tolerances: Tolerances,
}
