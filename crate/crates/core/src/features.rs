//! Per-voxel integral-geometric features.
//!
//! | kind | dim | needs consistent mesh | additive |
//! |------|-----|-----------------------|----------|
//! | Bool | 1   | no                    | no       |
//! | SA   | 1   | no                    | yes      |
//! | AN   | 3   | yes                   | yes      |
//! | QF   | 6   | no                    | yes      |
//! | EV   | 3   | no                    | no       |
//! | VAD  | 1   | yes                   | yes      |
//! | EAD  | 1   | yes                   | yes      |
//! | VE   | 1   | yes                   | yes      |
//!
//! Summed over all voxels, SA is the surface area, AN vanishes on closed
//! meshes, VAD is `2π·χ`, EAD is the integrated (doubled) mean curvature and
//! VE is the enclosed volume. VE is measured from the origin of the
//! normalized unit cube, so its per-voxel values depend on that choice.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};
use crate::voxelize::{self, ClippedCell, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    Bool,
    SA,
    AN,
    QF,
    EV,
    VAD,
    EAD,
    VE,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 8] = [
        FeatureKind::Bool,
        FeatureKind::SA,
        FeatureKind::AN,
        FeatureKind::QF,
        FeatureKind::EV,
        FeatureKind::VAD,
        FeatureKind::EAD,
        FeatureKind::VE,
    ];

    pub fn dimension(self) -> usize {
        match self {
            FeatureKind::AN | FeatureKind::EV => 3,
            FeatureKind::QF => 6,
            _ => 1,
        }
    }

    pub fn requires_consistency(self) -> bool {
        matches!(
            self,
            FeatureKind::AN | FeatureKind::VAD | FeatureKind::EAD | FeatureKind::VE
        )
    }

    pub fn is_additive(self) -> bool {
        !matches!(self, FeatureKind::Bool | FeatureKind::EV)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Bool => "Bool",
            FeatureKind::SA => "SA",
            FeatureKind::AN => "AN",
            FeatureKind::QF => "QF",
            FeatureKind::EV => "EV",
            FeatureKind::VAD => "VAD",
            FeatureKind::EAD => "EAD",
            FeatureKind::VE => "VE",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Recipe(format!(
                    "unknown feature kind {s:?}; expected one of {}",
                    Self::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

/// The value of one feature in one voxel. QF is stored as
/// `[xx, yy, zz, xy, xz, yz]`; EV is sorted in descending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureValue {
    kind: FeatureKind,
    data: [f64; 6],
}

impl FeatureValue {
    /// Panics if `components` does not match the kind's dimension.
    pub fn new(kind: FeatureKind, components: &[f64]) -> Self {
        assert_eq!(components.len(), kind.dimension(), "wrong component count for {kind}");
        let mut data = [0.0; 6];
        data[..components.len()].copy_from_slice(components);
        Self { kind, data }
    }

    pub fn zero(kind: FeatureKind) -> Self {
        Self { kind, data: [0.0; 6] }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn components(&self) -> &[f64] {
        &self.data[..self.kind.dimension()]
    }

    pub fn component(&self, index: usize) -> f64 {
        self.components()[index]
    }

    /// Component-wise sum, used to merge voxels of additive kinds.
    pub fn accumulate(&mut self, other: &FeatureValue) {
        debug_assert_eq!(self.kind, other.kind);
        for (a, b) in self.data.iter_mut().zip(other.data) {
            *a += b;
        }
    }
}

/// Surface integrals of one cell, from which every kind is derived.
#[derive(Debug, Clone, Copy, Default)]
struct CellIntegrals {
    area: f64,
    area_normal: Vec3,
    quad_form: [f64; 6],
    volume: f64,
}

impl CellIntegrals {
    fn of(cell: &ClippedCell) -> Self {
        let mut acc = Self::default();
        for poly in &cell.polygons {
            let area = poly.area();
            let n = poly.normal;
            acc.area += area;
            acc.area_normal += area * n;
            let q = [n.x * n.x, n.y * n.y, n.z * n.z, n.x * n.y, n.x * n.z, n.y * n.z];
            for (a, b) in acc.quad_form.iter_mut().zip(q) {
                *a += area * b;
            }
            // r·n is constant on the polygon's plane.
            acc.volume += n.dot(&poly.vertices[0]) * area / 3.0;
        }
        acc
    }
}

fn require_consistent(mesh: &TriangleMesh, kind: FeatureKind) -> Result<()> {
    if mesh.is_consistent() {
        Ok(())
    } else {
        Err(Error::ConsistencyRequired(vec![kind]))
    }
}

/// Always 1: only non-empty cells are materialized.
pub fn feature_bool(_cell: &ClippedCell) -> FeatureValue {
    FeatureValue::new(FeatureKind::Bool, &[1.0])
}

pub fn feature_sa(cell: &ClippedCell) -> FeatureValue {
    FeatureValue::new(FeatureKind::SA, &[cell.polygons.iter().map(|p| p.area()).sum()])
}

pub fn feature_an(cell: &ClippedCell, mesh: &TriangleMesh) -> Result<FeatureValue> {
    require_consistent(mesh, FeatureKind::AN)?;
    let an = CellIntegrals::of(cell).area_normal;
    Ok(FeatureValue::new(FeatureKind::AN, an.as_slice()))
}

pub fn feature_qf(cell: &ClippedCell) -> FeatureValue {
    FeatureValue::new(FeatureKind::QF, &CellIntegrals::of(cell).quad_form)
}

pub fn feature_ev(cell: &ClippedCell) -> FeatureValue {
    FeatureValue::new(
        FeatureKind::EV,
        &symmetric_eigenvalues(&CellIntegrals::of(cell).quad_form),
    )
}

pub fn feature_vad(cell: &ClippedCell, mesh: &TriangleMesh) -> Result<FeatureValue> {
    require_consistent(mesh, FeatureKind::VAD)?;
    Ok(FeatureValue::new(FeatureKind::VAD, &[vertex_defect_sum(cell, mesh)]))
}

pub fn feature_ead(cell: &ClippedCell, mesh: &TriangleMesh) -> Result<FeatureValue> {
    require_consistent(mesh, FeatureKind::EAD)?;
    Ok(FeatureValue::new(FeatureKind::EAD, &[edge_defect_sum(cell, mesh)]))
}

pub fn feature_ve(cell: &ClippedCell, mesh: &TriangleMesh) -> Result<FeatureValue> {
    require_consistent(mesh, FeatureKind::VE)?;
    Ok(FeatureValue::new(FeatureKind::VE, &[CellIntegrals::of(cell).volume]))
}

fn vertex_defect_sum(cell: &ClippedCell, mesh: &TriangleMesh) -> f64 {
    cell.interior_vertices.iter().map(|&v| mesh.angular_defect(v)).sum()
}

fn edge_defect_sum(cell: &ClippedCell, mesh: &TriangleMesh) -> f64 {
    cell.segments
        .iter()
        .map(|s| mesh.edge_turning(s.edge) * s.length())
        .sum()
}

/// Values of several kinds for one cell, sharing the surface integrals.
/// Consistency must have been checked by the caller.
pub(crate) fn cell_values(cell: &ClippedCell, mesh: &TriangleMesh, kinds: &[FeatureKind]) -> Vec<FeatureValue> {
    let mut out = Vec::with_capacity(kinds.len());
    for_each_cell_value(cell, mesh, kinds, |kind, data| out.push(FeatureValue::new(kind, data)));
    out
}

/// Calls `emit(kind, components)` for each of `kinds` in order, without allocating.
pub(crate) fn for_each_cell_value(
    cell: &ClippedCell,
    mesh: &TriangleMesh,
    kinds: &[FeatureKind],
    mut emit: impl FnMut(FeatureKind, &[f64]),
) {
    let needs_integrals = kinds
        .iter()
        .any(|k| !matches!(k, FeatureKind::Bool | FeatureKind::VAD | FeatureKind::EAD));
    let integrals = if needs_integrals {
        CellIntegrals::of(cell)
    } else {
        CellIntegrals::default()
    };
    for &kind in kinds {
        match kind {
            FeatureKind::Bool => emit(kind, &[1.0]),
            FeatureKind::SA => emit(kind, &[integrals.area]),
            FeatureKind::AN => emit(kind, integrals.area_normal.as_slice()),
            FeatureKind::QF => emit(kind, &integrals.quad_form),
            FeatureKind::EV => emit(kind, &symmetric_eigenvalues(&integrals.quad_form)),
            FeatureKind::VAD => emit(kind, &[vertex_defect_sum(cell, mesh)]),
            FeatureKind::EAD => emit(kind, &[edge_defect_sum(cell, mesh)]),
            FeatureKind::VE => emit(kind, &[integrals.volume]),
        }
    }
}

/// Fails with every requested kind that needs a consistent mesh if `mesh` is not.
pub fn check_kinds(mesh: &TriangleMesh, kinds: &[FeatureKind]) -> Result<()> {
    if mesh.is_consistent() {
        return Ok(());
    }
    let mut offending: Vec<FeatureKind> = kinds.iter().copied().filter(|k| k.requires_consistency()).collect();
    offending.sort();
    offending.dedup();
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::ConsistencyRequired(offending))
    }
}

/// Sparse grids of the requested kinds at one level, from a single traversal.
pub fn compute_grid(
    mesh: &TriangleMesh,
    level: u32,
    kinds: &[FeatureKind],
) -> Result<BTreeMap<FeatureKind, VoxelGrid<FeatureValue>>> {
    let mut all = compute_grids(mesh, &[level], kinds)?;
    Ok(all.remove(&level).unwrap_or_default())
}

/// Sparse grids of the requested kinds at several levels, from a single
/// traversal down to the deepest requested level.
pub fn compute_grids(
    mesh: &TriangleMesh,
    levels: &[u32],
    kinds: &[FeatureKind],
) -> Result<BTreeMap<u32, BTreeMap<FeatureKind, VoxelGrid<FeatureValue>>>> {
    check_kinds(mesh, kinds)?;
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    let mut out: BTreeMap<u32, BTreeMap<FeatureKind, VoxelGrid<FeatureValue>>> = levels
        .iter()
        .map(|&level| (level, kinds.iter().map(|&k| (k, VoxelGrid::new(level))).collect()))
        .collect();
    let Some(&max_level) = levels.iter().max() else {
        return Ok(out);
    };
    voxelize::traverse(mesh, max_level, |cell| {
        if let Some(grids) = out.get_mut(&cell.key.level()) {
            for value in cell_values(cell, mesh, &kinds) {
                grids
                    .get_mut(&value.kind())
                    .expect("grid per kind")
                    .insert(cell.key, value);
            }
        }
    })?;
    Ok(out)
}

/// Eigenvalues of the symmetric matrix `[xx, yy, zz, xy, xz, yz]`, in
/// descending order and clamped to be nonnegative. Closed form via the
/// trigonometric solution of the characteristic cubic.
pub fn symmetric_eigenvalues(m: &[f64; 6]) -> [f64; 3] {
    let [a, b, c, d, e, f] = *m;
    let off = d * d + e * e + f * f;
    let mut eig = if off == 0.0 {
        [a, b, c]
    } else {
        let q = (a + b + c) / 3.0;
        let p2 = (a - q).powi(2) + (b - q).powi(2) + (c - q).powi(2) + 2.0 * off;
        let p = (p2 / 6.0).sqrt();
        let (ba, bb, bc) = ((a - q) / p, (b - q) / p, (c - q) / p);
        let (bd, be, bf) = (d / p, e / p, f / p);
        let det = ba * (bb * bc - bf * bf) - bd * (bd * bc - bf * be) + be * (bd * bf - bb * be);
        let phi = (0.5 * det).clamp(-1.0, 1.0).acos() / 3.0;
        let largest = q + 2.0 * p * phi.cos();
        let smallest = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
        [largest, 3.0 * q - largest - smallest, smallest]
    };
    eig.sort_by(|x, y| y.total_cmp(x));
    eig.map(|v| v.max(0.0))
}
