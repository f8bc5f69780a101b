//! Sparse surface voxelization by recursive octree clipping.
//!
//! The root cell `[0, 1]³` holds every face, edge and vertex of a normalized
//! mesh. Each node is split at its three midplanes; convex polygons and edge
//! segments are cut against the planes and every piece is handed to the
//! child octant it lies in. Only children that receive geometry are visited,
//! so the work is proportional to the number of occupied cells.
//!
//! Ownership is half-open: voxel `i` owns `[i·h, (i+1)·h)` along each axis and
//! the last voxel is closed. Geometry lying exactly on a splitting plane
//! (within [`CLIP_EPS`]) is attributed to one side by applying that rule to
//! the centroid of the piece, so areas and lengths partition exactly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

/// Deepest supported octree level (resolution 4096).
pub const MAX_LEVEL: u32 = 12;

/// Distance to a splitting plane below which a point counts as on the plane.
pub const CLIP_EPS: f64 = 1e-12;

/// Clipped polygons smaller than this are discarded.
pub const MIN_POLYGON_AREA: f64 = 1e-18;

/// Integer coordinates of a voxel at octree level `level` (resolution `2^level`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    level: u8,
    i: u16,
    j: u16,
    k: u16,
}

impl VoxelKey {
    /// Panics if `level > MAX_LEVEL` or a coordinate is out of range.
    pub fn new(level: u32, i: u32, j: u32, k: u32) -> Self {
        assert!(level <= MAX_LEVEL, "voxel level {level} out of range");
        let n = 1u32 << level;
        assert!(i < n && j < n && k < n, "voxel ({i}, {j}, {k}) outside level {level}");
        Self {
            level: level as u8,
            i: i as u16,
            j: j as u16,
            k: k as u16,
        }
    }

    pub fn root() -> Self {
        Self::new(0, 0, 0, 0)
    }

    pub fn level(&self) -> u32 {
        self.level as u32
    }

    pub fn resolution(&self) -> u32 {
        1 << self.level
    }

    pub fn coords(&self) -> [u32; 3] {
        [self.i as u32, self.j as u32, self.k as u32]
    }

    /// Row-major position `(i·N + j)·N + k` in a dense `N³` array.
    pub fn linear_index(&self) -> usize {
        let n = self.resolution() as usize;
        (self.i as usize * n + self.j as usize) * n + self.k as usize
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| {
            Self::new(
                self.level() - 1,
                self.i as u32 / 2,
                self.j as u32 / 2,
                self.k as u32 / 2,
            )
        })
    }

    /// Packs into one word: three 12-bit coordinates and the level.
    pub fn pack(&self) -> u64 {
        (self.level as u64) << 36 | (self.i as u64) << 24 | (self.j as u64) << 12 | self.k as u64
    }

    pub fn unpack(word: u64) -> Self {
        let mask = (1u64 << 12) - 1;
        Self::new(
            (word >> 36) as u32,
            ((word >> 24) & mask) as u32,
            ((word >> 12) & mask) as u32,
            (word & mask) as u32,
        )
    }

    /// Lower corner and edge length in unit-cube coordinates.
    pub fn bounds(&self) -> (Vec3, f64) {
        let h = 1.0 / self.resolution() as f64;
        (Vec3::new(self.i as f64 * h, self.j as f64 * h, self.k as f64 * h), h)
    }

    fn child(&self, octant: usize) -> Self {
        Self::new(
            self.level() + 1,
            2 * self.i as u32 + (octant >> 2 & 1) as u32,
            2 * self.j as u32 + (octant >> 1 & 1) as u32,
            2 * self.k as u32 + (octant & 1) as u32,
        )
    }
}

/// A convex planar piece of one mesh face inside a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedPolygon {
    pub face: u32,
    /// Unit normal of the source face.
    pub normal: Vec3,
    pub vertices: Vec<Vec3>,
}

impl ClippedPolygon {
    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn centroid(&self) -> Vec3 {
        polygon_centroid(&self.vertices)
    }
}

/// The part of a mesh edge inside a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSegment {
    pub edge: u32,
    pub start: Vec3,
    pub end: Vec3,
}

impl EdgeSegment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

/// The clipped surface geometry inside one voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedCell {
    pub key: VoxelKey,
    pub polygons: Vec<ClippedPolygon>,
    pub segments: Vec<EdgeSegment>,
    /// Mesh vertices owned by this voxel.
    pub interior_vertices: Vec<u32>,
}

impl ClippedCell {
    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty() && self.segments.is_empty() && self.interior_vertices.is_empty()
    }

    /// `(edge id, clipped length)` pairs.
    pub fn clipped_edges(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.segments.iter().map(|s| (s.edge, s.length()))
    }

    pub fn area(&self) -> f64 {
        self.polygons.iter().map(|p| p.area()).sum()
    }
}

/// Sparse map from voxel keys to values at a single level.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<F> {
    level: u32,
    cells: BTreeMap<VoxelKey, F>,
}

impl<F> VoxelGrid<F> {
    pub fn new(level: u32) -> Self {
        Self {
            level,
            cells: BTreeMap::new(),
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn resolution(&self) -> u32 {
        1 << self.level
    }

    /// Panics if the key's level differs from the grid's.
    pub fn insert(&mut self, key: VoxelKey, value: F) -> Option<F> {
        assert_eq!(key.level(), self.level, "key level does not match grid level");
        self.cells.insert(key, value)
    }

    pub fn get(&self, key: &VoxelKey) -> Option<&F> {
        self.cells.get(key)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (&VoxelKey, &F)> {
        self.cells.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &VoxelKey> {
        self.cells.keys()
    }

    pub fn values(&self) -> impl Iterator<Item = &F> {
        self.cells.values()
    }

    pub fn occupancy(&self) -> f64 {
        occupancy(self.len(), self.level)
    }

    /// Re-keys every cell to its parent, combining siblings with `merge`.
    pub fn coarsen(&self, mut merge: impl FnMut(&mut F, &F)) -> VoxelGrid<F>
    where
        F: Clone,
    {
        assert!(self.level > 0, "cannot coarsen the root level");
        let mut out = VoxelGrid::new(self.level - 1);
        for (key, value) in &self.cells {
            let parent = key.parent().expect("level > 0");
            match out.cells.get_mut(&parent) {
                Some(existing) => merge(existing, value),
                None => {
                    out.cells.insert(parent, value.clone());
                }
            }
        }
        out
    }

    pub fn map<G>(&self, mut f: impl FnMut(&F) -> G) -> VoxelGrid<G> {
        VoxelGrid {
            level: self.level,
            cells: self.cells.iter().map(|(k, v)| (*k, f(v))).collect(),
        }
    }
}

impl<F> FromIterator<(VoxelKey, F)> for VoxelGrid<F> {
    /// Panics on an empty iterator or mixed levels.
    fn from_iter<I: IntoIterator<Item = (VoxelKey, F)>>(iter: I) -> Self {
        let cells: BTreeMap<VoxelKey, F> = iter.into_iter().collect();
        let level = cells.keys().next().map(|k| k.level()).expect("empty grid has no level");
        assert!(cells.keys().all(|k| k.level() == level), "mixed levels");
        Self { level, cells }
    }
}

pub fn cell_count(cells: &[ClippedCell]) -> usize {
    cells.len()
}

/// Fraction of the `8^level` voxels that are occupied.
pub fn occupancy(count: usize, level: u32) -> f64 {
    count as f64 / (8f64).powi(level as i32)
}

/// Clips `mesh` (normalized to the unit cube) into the voxels of level `level`.
pub fn octree_clip(mesh: &TriangleMesh, level: u32) -> Result<Vec<ClippedCell>> {
    let mut cells = Vec::new();
    traverse(mesh, level, |cell| {
        if cell.key.level() == level {
            cells.push(cell.clone());
        }
    })?;
    Ok(cells)
}

/// Depth-first octree traversal calling `visit` for every non-empty cell at
/// every level from 0 to `max_level`. A cell at level `m` is identical to what
/// [`octree_clip`] produces at level `m`.
pub fn traverse(mesh: &TriangleMesh, max_level: u32, mut visit: impl FnMut(&ClippedCell)) -> Result<()> {
    if max_level > MAX_LEVEL {
        return Err(Error::ResolutionTooHigh(max_level));
    }
    for (i, v) in mesh.vertices().iter().enumerate() {
        if v.iter().any(|c| !(*c >= -CLIP_EPS && *c <= 1.0 + CLIP_EPS)) {
            return Err(Error::MeshOutOfBounds {
                vertex: i,
                position: [v.x, v.y, v.z],
            });
        }
    }
    if mesh.is_empty() {
        return Ok(());
    }

    let vertices = mesh.vertices();
    let root = ClippedCell {
        key: VoxelKey::root(),
        polygons: mesh
            .faces()
            .iter()
            .enumerate()
            .map(|(fi, f)| ClippedPolygon {
                face: fi as u32,
                normal: mesh.face_normal(fi as u32),
                vertices: f.iter().map(|&v| vertices[v as usize]).collect(),
            })
            .collect(),
        segments: mesh
            .edges()
            .iter()
            .enumerate()
            .map(|(ei, e)| EdgeSegment {
                edge: ei as u32,
                start: vertices[e.vertices[0] as usize],
                end: vertices[e.vertices[1] as usize],
            })
            .collect(),
        interior_vertices: (0..vertices.len() as u32).collect(),
    };
    descend(root, vertices, max_level, &mut visit);
    Ok(())
}

fn descend(cell: ClippedCell, vertices: &[Vec3], max_level: u32, visit: &mut impl FnMut(&ClippedCell)) {
    visit(&cell);
    if cell.key.level() == max_level {
        return;
    }
    let (lo, h) = cell.key.bounds();
    let mid = lo + Vec3::repeat(0.5 * h);

    // Octant index bit 2 is x, bit 1 is y, bit 0 is z.
    let mut parts: Vec<Parts> = vec![Parts::from(cell)];
    for axis in 0..3 {
        let mut next = Vec::with_capacity(parts.len() * 2);
        for part in parts {
            let (lower, upper) = part.split(axis, mid[axis], vertices);
            next.push(lower);
            next.push(upper);
        }
        parts = next;
    }
    for (octant, part) in parts.into_iter().enumerate() {
        if part.is_empty() {
            continue;
        }
        let child = ClippedCell {
            key: cell_key_child(&part.key, octant),
            polygons: part.polygons,
            segments: part.segments,
            interior_vertices: part.vertices,
        };
        descend(child, vertices, max_level, visit);
    }
}

fn cell_key_child(parent: &VoxelKey, octant: usize) -> VoxelKey {
    parent.child(octant)
}

/// Geometry of a cell part while it is being split along the three axes.
struct Parts {
    key: VoxelKey,
    polygons: Vec<ClippedPolygon>,
    segments: Vec<EdgeSegment>,
    vertices: Vec<u32>,
}

impl From<ClippedCell> for Parts {
    fn from(cell: ClippedCell) -> Self {
        Self {
            key: cell.key,
            polygons: cell.polygons,
            segments: cell.segments,
            vertices: cell.interior_vertices,
        }
    }
}

impl Parts {
    fn is_empty(&self) -> bool {
        self.polygons.is_empty() && self.segments.is_empty() && self.vertices.is_empty()
    }

    fn empty(key: VoxelKey) -> Self {
        Self {
            key,
            polygons: Vec::new(),
            segments: Vec::new(),
            vertices: Vec::new(),
        }
    }

    fn split(self, axis: usize, plane: f64, mesh_vertices: &[Vec3]) -> (Parts, Parts) {
        let mut lower = Parts::empty(self.key);
        let mut upper = Parts::empty(self.key);

        for poly in self.polygons {
            match split_polygon(&poly.vertices, axis, plane) {
                Split::Lower => lower.polygons.push(poly),
                Split::Upper => upper.polygons.push(poly),
                Split::OnPlane => {
                    if poly.centroid()[axis] < plane {
                        lower.polygons.push(poly)
                    } else {
                        upper.polygons.push(poly)
                    }
                }
                Split::Both(lo, hi) => {
                    for (pts, side) in [(lo, &mut lower), (hi, &mut upper)] {
                        if pts.len() >= 3 && polygon_area(&pts) >= MIN_POLYGON_AREA {
                            side.polygons.push(ClippedPolygon {
                                face: poly.face,
                                normal: poly.normal,
                                vertices: pts,
                            });
                        }
                    }
                }
            }
        }

        for seg in self.segments {
            let da = seg.start[axis] - plane;
            let db = seg.end[axis] - plane;
            let le = da <= CLIP_EPS && db <= CLIP_EPS;
            let ge = da >= -CLIP_EPS && db >= -CLIP_EPS;
            match (le, ge) {
                (true, true) => {
                    if 0.5 * (seg.start[axis] + seg.end[axis]) < plane {
                        lower.segments.push(seg)
                    } else {
                        upper.segments.push(seg)
                    }
                }
                (true, false) => lower.segments.push(seg),
                (false, true) => upper.segments.push(seg),
                (false, false) => {
                    let t = da / (da - db);
                    let mut cut = seg.start + t * (seg.end - seg.start);
                    cut[axis] = plane;
                    let (below, above) = if da < 0.0 {
                        ((seg.start, cut), (cut, seg.end))
                    } else {
                        ((cut, seg.end), (seg.start, cut))
                    };
                    for ((start, end), side) in [(below, &mut lower), (above, &mut upper)] {
                        let piece = EdgeSegment {
                            edge: seg.edge,
                            start,
                            end,
                        };
                        if piece.length() >= CLIP_EPS {
                            side.segments.push(piece);
                        }
                    }
                }
            }
        }

        for v in self.vertices {
            if mesh_vertices[v as usize][axis] < plane {
                lower.vertices.push(v);
            } else {
                upper.vertices.push(v);
            }
        }
        (lower, upper)
    }
}

enum Split {
    Lower,
    Upper,
    OnPlane,
    Both(Vec<Vec3>, Vec<Vec3>),
}

/// Splits a convex polygon by the plane `p[axis] = plane`, treating points
/// within [`CLIP_EPS`] of the plane as lying on it.
fn split_polygon(points: &[Vec3], axis: usize, plane: f64) -> Split {
    let mut all_le = true;
    let mut all_ge = true;
    for p in points {
        let d = p[axis] - plane;
        all_le &= d <= CLIP_EPS;
        all_ge &= d >= -CLIP_EPS;
    }
    match (all_le, all_ge) {
        (true, true) => return Split::OnPlane,
        (true, false) => return Split::Lower,
        (false, true) => return Split::Upper,
        (false, false) => {}
    }
    let mut lower = Vec::with_capacity(points.len() + 1);
    let mut upper = Vec::with_capacity(points.len() + 1);
    for (idx, p) in points.iter().enumerate() {
        let q = &points[(idx + 1) % points.len()];
        let dp = p[axis] - plane;
        let dq = q[axis] - plane;
        if dp <= CLIP_EPS {
            lower.push(*p);
        }
        if dp >= -CLIP_EPS {
            upper.push(*p);
        }
        if (dp < -CLIP_EPS && dq > CLIP_EPS) || (dp > CLIP_EPS && dq < -CLIP_EPS) {
            let t = dp / (dp - dq);
            let mut cut = p + t * (q - p);
            cut[axis] = plane;
            lower.push(cut);
            upper.push(cut);
        }
    }
    Split::Both(lower, upper)
}

pub(crate) fn polygon_area(points: &[Vec3]) -> f64 {
    polygon_area_vector(points).norm()
}

/// Half the sum of fan cross products: area times unit normal.
fn polygon_area_vector(points: &[Vec3]) -> Vec3 {
    let mut sum = Vec3::zeros();
    let base = points[0];
    for w in points[1..].windows(2) {
        sum += (w[0] - base).cross(&(w[1] - base));
    }
    0.5 * sum
}

fn polygon_centroid(points: &[Vec3]) -> Vec3 {
    let base = points[0];
    let mut weighted = Vec3::zeros();
    let mut total = 0.0;
    for w in points[1..].windows(2) {
        let a = 0.5 * (w[0] - base).cross(&(w[1] - base)).norm();
        weighted += a * (base + w[0] + w[1]) / 3.0;
        total += a;
    }
    if total > 0.0 {
        weighted / total
    } else {
        points.iter().sum::<Vec3>() / points.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{normalize_to_unit_cube, primitives};

    fn sphere() -> TriangleMesh {
        primitives::icosphere(Vec3::repeat(0.5), 0.4, 4)
    }

    #[test]
    fn key_packing_round_trips() {
        let key = VoxelKey::new(12, 4095, 17, 2048);
        assert_eq!(VoxelKey::unpack(key.pack()), key);
        assert_eq!(key.parent().unwrap(), VoxelKey::new(11, 2047, 8, 1024));
        assert_eq!(VoxelKey::new(2, 1, 2, 3).linear_index(), (4 + 2) * 4 + 3);
    }

    #[test]
    fn triangle_inside_one_voxel() {
        let tri = TriangleMesh::new(
            vec![
                Vec3::new(0.51, 0.51, 0.52),
                Vec3::new(0.56, 0.52, 0.53),
                Vec3::new(0.52, 0.57, 0.55),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let cells = octree_clip(&tri, 3).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].polygons.len(), 1);
        assert!((cells[0].area() - tri.total_area()).abs() < 1e-15);
        assert_eq!(cells[0].key, VoxelKey::new(3, 4, 4, 4));
    }

    #[test]
    fn unit_cube_at_level_one() {
        let cube = primitives::unit_cube();
        let cells = octree_clip(&cube, 1).unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!(occupancy(cells.len(), 1), 1.0);
        for cell in &cells {
            assert!((cell.area() - 0.75).abs() < 1e-15);
            assert_eq!(cell.interior_vertices.len(), 1);
        }
    }

    #[test]
    fn unit_cube_surface_voxels_at_level_two() {
        let cells = octree_clip(&primitives::unit_cube(), 2).unwrap();
        assert_eq!(cells.len(), 64 - 8);
    }

    #[test]
    fn sphere_area_partition() {
        let mesh = sphere();
        let cells = octree_clip(&mesh, 4).unwrap();
        let total: f64 = cells.iter().map(|c| c.area()).sum();
        let exact = mesh.total_area();
        assert!((total - exact).abs() / exact < 1e-9);
    }

    #[test]
    fn edge_and_vertex_partition() {
        let mesh = normalize_to_unit_cube(&primitives::l_prism([0.0; 3], 2.0, 2.0, 1.0, 1.0, 1.0), 0.0)
            .unwrap()
            .0;
        for level in 0..=5 {
            let cells = octree_clip(&mesh, level).unwrap();
            let mut lengths = vec![0.0; mesh.edges().len()];
            let mut seen = vec![0; mesh.vertices().len()];
            for cell in &cells {
                for (e, len) in cell.clipped_edges() {
                    lengths[e as usize] += len;
                }
                for &v in &cell.interior_vertices {
                    seen[v as usize] += 1;
                }
            }
            for (e, edge) in mesh.edges().iter().enumerate() {
                let [a, b] = edge.vertices;
                let full = (mesh.vertices()[a as usize] - mesh.vertices()[b as usize]).norm();
                assert!((lengths[e] - full).abs() <= 1e-9 * full, "edge {e} at level {level}");
            }
            assert!(seen.iter().all(|&c| c == 1));
            let area: f64 = cells.iter().map(|c| c.area()).sum();
            assert!((area - mesh.total_area()).abs() < 1e-9 * mesh.total_area());
        }
    }

    #[test]
    fn sphere_occupancy_is_sparse_at_level_seven() {
        let mut count = 0;
        traverse(&sphere(), 7, |c| {
            if c.key.level() == 7 {
                count += 1
            }
        })
        .unwrap();
        assert!(occupancy(count, 7) < 0.05, "occupancy {}", occupancy(count, 7));
    }

    #[test]
    fn traversal_levels_match_direct_clipping() {
        let mesh = sphere();
        let mut by_level: Vec<Vec<ClippedCell>> = vec![Vec::new(); 4];
        traverse(&mesh, 3, |c| by_level[c.key.level() as usize].push(c.clone())).unwrap();
        for level in 0..=3 {
            let direct = octree_clip(&mesh, level).unwrap();
            assert_eq!(direct, by_level[level as usize]);
        }
    }

    #[test]
    fn empty_mesh_has_no_cells() {
        let empty = TriangleMesh::new(vec![], vec![]).unwrap();
        assert_eq!(cell_count(&octree_clip(&empty, 3).unwrap()), 0);
    }

    #[test]
    fn errors() {
        let cube = primitives::unit_cube();
        assert!(matches!(octree_clip(&cube, 13), Err(Error::ResolutionTooHigh(13))));
        let big = primitives::box_mesh(Vec3::zeros(), Vec3::repeat(1.0), 1);
        assert!(matches!(octree_clip(&big, 1), Err(Error::MeshOutOfBounds { .. })));
    }

    #[test]
    fn coarsen_merges_children() {
        let grid: VoxelGrid<f64> = [(VoxelKey::new(1, 0, 0, 0), 1.0), (VoxelKey::new(1, 1, 1, 1), 2.0)]
            .into_iter()
            .collect();
        let parent = grid.coarsen(|a, b| *a += b);
        assert_eq!(parent.len(), 1);
        assert_eq!(parent.get(&VoxelKey::root()), Some(&3.0));
    }
}
