use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::FeatureKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregation {
    /// One column per voxel and component.
    Raw,
    /// Percentile (0–100) of the component over occupied voxels.
    Percentile(u8),
}

/// Names one scalar column of a feature matrix.
///
/// The derived ordering (resolution, kind, aggregation, component, voxel) is
/// the canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureDescriptor {
    pub resolution: u32,
    pub kind: FeatureKind,
    pub aggregation: Aggregation,
    /// Present only for multi-component kinds (AN, QF, EV).
    pub component: Option<u8>,
    /// Present only for [`Aggregation::Raw`].
    pub voxel: Option<[u32; 3]>,
}

impl FeatureDescriptor {
    pub fn raw(resolution: u32, kind: FeatureKind, component: usize, voxel: [u32; 3]) -> Self {
        Self {
            resolution,
            kind,
            aggregation: Aggregation::Raw,
            component: (kind.dimension() > 1).then_some(component as u8),
            voxel: Some(voxel),
        }
    }

    pub fn percentile(resolution: u32, kind: FeatureKind, percentile: u8, component: usize) -> Self {
        Self {
            resolution,
            kind,
            aggregation: Aggregation::Percentile(percentile),
            component: (kind.dimension() > 1).then_some(component as u8),
            voxel: None,
        }
    }

    pub fn component_index(&self) -> usize {
        self.component.unwrap_or(0) as usize
    }

    pub fn level(&self) -> u32 {
        self.resolution.trailing_zeros()
    }
}

/// `[Resolution][Kind][histP][Component][vI,J,K]`; the percentile part only
/// for percentile columns, the component only for AN/QF/EV, and the voxel
/// suffix only for raw columns above resolution 1.
impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}][{}]", self.resolution, self.kind)?;
        if let Aggregation::Percentile(p) = self.aggregation {
            write!(f, "[hist{p}]")?;
        }
        if let Some(c) = self.component {
            write!(f, "[{c}]")?;
        }
        if let Some([i, j, k]) = self.voxel {
            if self.resolution > 1 {
                write!(f, "[v{i},{j},{k}]")?;
            }
        }
        Ok(())
    }
}

impl FromStr for FeatureDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Recipe(format!("invalid column name {s:?}: {why}"));
        let inner = s
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| bad("expected bracketed fields"))?;
        let parts: Vec<&str> = inner.split("][").collect();
        if parts.len() < 2 {
            return Err(bad("too few fields"));
        }
        let resolution: u32 = parts[0].parse().map_err(|_| bad("resolution"))?;
        if !resolution.is_power_of_two() {
            return Err(bad("resolution must be a power of two"));
        }
        let kind: FeatureKind = parts[1].parse()?;
        let mut rest = &parts[2..];

        let mut aggregation = Aggregation::Raw;
        if let Some(p) = rest.first().and_then(|f| f.strip_prefix("hist")) {
            let p: u8 = p.parse().map_err(|_| bad("percentile"))?;
            if p > 100 {
                return Err(bad("percentile above 100"));
            }
            aggregation = Aggregation::Percentile(p);
            rest = &rest[1..];
        }
        let mut component = None;
        if kind.dimension() > 1 {
            let c: u8 = rest
                .first()
                .ok_or_else(|| bad("missing component"))?
                .parse()
                .map_err(|_| bad("component"))?;
            if c as usize >= kind.dimension() {
                return Err(bad("component out of range"));
            }
            component = Some(c);
            rest = &rest[1..];
        }
        let mut voxel = None;
        if aggregation == Aggregation::Raw {
            if resolution == 1 {
                voxel = Some([0, 0, 0]);
            } else {
                let v = rest
                    .first()
                    .and_then(|f| f.strip_prefix('v'))
                    .ok_or_else(|| bad("missing voxel suffix"))?;
                let coords: Vec<u32> = v
                    .split(',')
                    .map(|c| c.parse().map_err(|_| bad("voxel index")))
                    .collect::<Result<_>>()?;
                match coords.as_slice() {
                    &[i, j, k] if i < resolution && j < resolution && k < resolution => voxel = Some([i, j, k]),
                    _ => return Err(bad("voxel index out of range")),
                }
                rest = &rest[1..];
            }
        }
        if !rest.is_empty() {
            return Err(bad("trailing fields"));
        }
        Ok(Self {
            resolution,
            kind,
            aggregation,
            component,
            voxel,
        })
    }
}
