//! Indexed triangle meshes with the adjacency needed by curvature features.
//!
//! A [`TriangleMesh`] is immutable once built. Construction validates face
//! indices, drops degenerate faces, compacts unreferenced vertices and
//! precomputes edge adjacency, vertex fans, angular defects and dihedral
//! turning angles.

mod io;
pub mod primitives;
mod transform;

use std::collections::HashMap;
use std::f64::consts::PI;

use log::warn;
use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use io::{load_mesh, parse_mesh, write_obj, write_off, write_stl_binary, MeshFormat};
pub use transform::{normalize_to_unit_cube, sample_rotations, Transform};

pub type Vec3 = Vector3<f64>;

/// Faces whose area falls below this fraction of the squared bounding-box
/// diagonal are dropped at construction.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-12;

/// An undirected mesh edge and the faces incident to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoint vertex indices, smaller index first.
    pub vertices: [u32; 2],
    /// Incident faces in ascending order. Two for a manifold interior edge.
    pub faces: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConsistencyReport {
    pub is_consistent: bool,
    pub boundary_edge_count: usize,
    pub conflicting_edge_count: usize,
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    edges: Vec<Edge>,
    edge_lookup: HashMap<(u32, u32), u32>,
    vertex_fan: Vec<Vec<(u32, f64)>>,
    face_normals: Vec<Vec3>,
    face_areas: Vec<f64>,
    angular_defects: Vec<f64>,
    edge_turning: Vec<f64>,
    consistency: ConsistencyReport,
    dropped_faces: usize,
}

impl TriangleMesh {
    /// Builds a mesh from raw arrays.
    ///
    /// Faces with repeated vertices or negligible area are dropped (the count
    /// is available through [`TriangleMesh::dropped_faces`]); vertices not
    /// referenced by any surviving face are removed and the remaining ones
    /// keep their relative order.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        for (fi, face) in faces.iter().enumerate() {
            for &index in face {
                if index as usize >= vertices.len() {
                    return Err(Error::InvalidFace {
                        face: fi,
                        index,
                        count: vertices.len(),
                    });
                }
            }
        }

        let diag2 = bounding_box(&vertices)
            .map(|(lo, hi)| (hi - lo).norm_squared())
            .unwrap_or(0.0);
        let min_area = DEGENERATE_AREA_RATIO * diag2;

        let mut kept = Vec::with_capacity(faces.len());
        for face in faces.iter() {
            let [a, b, c] = *face;
            if a == b || b == c || a == c {
                continue;
            }
            let area = triangle_area(&vertices[a as usize], &vertices[b as usize], &vertices[c as usize]);
            if area < min_area || area == 0.0 {
                continue;
            }
            kept.push(*face);
        }
        let dropped_faces = faces.len() - kept.len();
        if dropped_faces > 0 {
            warn!("dropped {dropped_faces} degenerate faces");
        }

        // Compact unreferenced vertices.
        let mut remap = vec![u32::MAX; vertices.len()];
        for face in &kept {
            for &v in face {
                remap[v as usize] = 0;
            }
        }
        let mut compact = Vec::with_capacity(vertices.len());
        for (old, slot) in remap.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = compact.len() as u32;
                compact.push(vertices[old]);
            }
        }
        for face in &mut kept {
            for v in face.iter_mut() {
                *v = remap[*v as usize];
            }
        }

        Ok(Self::build(compact, kept, dropped_faces))
    }

    fn build(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>, dropped_faces: usize) -> Self {
        let mut face_normals = Vec::with_capacity(faces.len());
        let mut face_areas = Vec::with_capacity(faces.len());
        let mut vertex_fan: Vec<Vec<(u32, f64)>> = vec![Vec::new(); vertices.len()];

        for (fi, &[a, b, c]) in faces.iter().enumerate() {
            let (pa, pb, pc) = (vertices[a as usize], vertices[b as usize], vertices[c as usize]);
            let cross = (pb - pa).cross(&(pc - pa));
            let norm = cross.norm();
            face_areas.push(0.5 * norm);
            face_normals.push(cross / norm);
            vertex_fan[a as usize].push((fi as u32, corner_angle(&pa, &pb, &pc)));
            vertex_fan[b as usize].push((fi as u32, corner_angle(&pb, &pc, &pa)));
            vertex_fan[c as usize].push((fi as u32, corner_angle(&pc, &pa, &pb)));
        }

        // Directed half-edge orientation per incident face: +1 if the face
        // traverses the edge from the smaller to the larger vertex index.
        let mut adjacency: HashMap<(u32, u32), Vec<(u32, i8)>> = HashMap::new();
        for (fi, face) in faces.iter().enumerate() {
            for corner in 0..3 {
                let u = face[corner];
                let v = face[(corner + 1) % 3];
                let (key, dir) = if u < v { ((u, v), 1) } else { ((v, u), -1) };
                adjacency.entry(key).or_default().push((fi as u32, dir));
            }
        }
        let mut keys: Vec<(u32, u32)> = adjacency.keys().copied().collect();
        keys.sort_unstable();

        let mut edges = Vec::with_capacity(keys.len());
        let mut edge_lookup = HashMap::with_capacity(keys.len());
        let mut boundary = 0;
        let mut conflicting = 0;
        for key in keys {
            let incident = &adjacency[&key];
            match incident.as_slice() {
                [_] => boundary += 1,
                [(_, d0), (_, d1)] if d0 != d1 => {}
                _ => conflicting += 1,
            }
            let mut faces_of_edge: Vec<u32> = incident.iter().map(|&(f, _)| f).collect();
            faces_of_edge.sort_unstable();
            edge_lookup.insert(key, edges.len() as u32);
            edges.push(Edge {
                vertices: [key.0, key.1],
                faces: faces_of_edge,
            });
        }

        let angular_defects = vertex_fan
            .iter()
            .map(|fan| 2.0 * PI - fan.iter().map(|&(_, angle)| angle).sum::<f64>())
            .collect();

        let mut mesh = Self {
            vertices,
            faces,
            edges,
            edge_lookup,
            vertex_fan,
            face_normals,
            face_areas,
            angular_defects,
            edge_turning: Vec::new(),
            consistency: ConsistencyReport {
                is_consistent: boundary == 0 && conflicting == 0,
                boundary_edge_count: boundary,
                conflicting_edge_count: conflicting,
            },
            dropped_faces,
        };
        mesh.edge_turning = (0..mesh.edges.len()).map(|e| mesh.compute_turning(e)).collect();
        mesh
    }

    /// `π − β` for a two-face edge, where `β` is the interior dihedral angle.
    /// Positive on convex edges, negative on reflex ones, zero otherwise.
    fn compute_turning(&self, edge: usize) -> f64 {
        let edge = &self.edges[edge];
        let [fa, fb] = match edge.faces.as_slice() {
            [fa, fb] => [*fa as usize, *fb as usize],
            _ => return 0.0,
        };
        let na = self.face_normals[fa];
        let nb = self.face_normals[fb];
        let theta = na.cross(&nb).norm().atan2(na.dot(&nb));
        let opposite = self.faces[fb]
            .iter()
            .copied()
            .find(|v| !edge.vertices.contains(v))
            .expect("face has a vertex off the shared edge");
        let base = self.vertices[edge.vertices[0] as usize];
        let offset = self.vertices[opposite as usize] - base;
        if na.dot(&offset) <= 0.0 {
            theta
        } else {
            -theta
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Index into [`TriangleMesh::edges`] of the undirected edge `{u, v}`.
    pub fn edge_index(&self, u: u32, v: u32) -> Option<u32> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.edge_lookup.get(&key).copied()
    }

    /// Incident `(face, corner angle)` pairs of a vertex.
    pub fn vertex_fan(&self, vertex: u32) -> &[(u32, f64)] {
        &self.vertex_fan[vertex as usize]
    }

    pub fn face_normal(&self, face: u32) -> Vec3 {
        self.face_normals[face as usize]
    }

    pub fn face_area(&self, face: u32) -> f64 {
        self.face_areas[face as usize]
    }

    /// `2π` minus the sum of the incident corner angles.
    pub fn angular_defect(&self, vertex: u32) -> f64 {
        self.angular_defects[vertex as usize]
    }

    /// `π − β_e` of an edge, see [`Edge`]. Zero for boundary and non-manifold edges.
    pub fn edge_turning(&self, edge: u32) -> f64 {
        self.edge_turning[edge as usize]
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Signed enclosed volume from the divergence theorem.
    pub fn enclosed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let (pa, pb, pc) = (
                    self.vertices[a as usize],
                    self.vertices[b as usize],
                    self.vertices[c as usize],
                );
                pa.dot(&pb.cross(&pc)) / 6.0
            })
            .sum()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn consistency(&self) -> ConsistencyReport {
        self.consistency
    }

    pub fn is_consistent(&self) -> bool {
        self.consistency.is_consistent
    }

    pub fn dropped_faces(&self) -> usize {
        self.dropped_faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        bounding_box(&self.vertices)
    }

    /// Returns the mesh with every face's winding reversed.
    pub fn flipped(&self) -> Self {
        let faces = self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect();
        Self::build(self.vertices.clone(), faces, 0)
    }

    /// Returns a mesh without the given faces.
    pub fn without_faces(&self, remove: &[usize]) -> Result<Self> {
        let faces = self
            .faces
            .iter()
            .enumerate()
            .filter(|(i, _)| !remove.contains(i))
            .map(|(_, f)| *f)
            .collect();
        Self::new(self.vertices.clone(), faces)
    }

    /// Maps each vertex through `t`, flipping windings for improper rotations.
    pub fn transformed(&self, t: &Transform) -> Self {
        let vertices = self.vertices.iter().map(|v| t.apply(v)).collect();
        let faces = if t.rotation.determinant() < 0.0 {
            self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect()
        } else {
            self.faces.clone()
        };
        Self::build(vertices, faces, 0)
    }
}

/// Consistency of a mesh: every edge shared by exactly two faces traversing it
/// in opposite directions.
pub fn check_consistency(mesh: &TriangleMesh) -> ConsistencyReport {
    mesh.consistency()
}

/// See [`TriangleMesh::transformed`].
pub fn apply_transform(mesh: &TriangleMesh, t: &Transform) -> TriangleMesh {
    mesh.transformed(t)
}

pub(crate) fn bounding_box(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in &points[1..] {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    Some((lo, hi))
}

pub(crate) fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn corner_angle(apex: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let u = b - apex;
    let v = c - apex;
    u.cross(&v).norm().atan2(u.dot(&v))
}

#[cfg(test)]
mod tests {
    use super::primitives;
    use super::*;

    #[test]
    fn cube_is_consistent() {
        let cube = primitives::unit_cube();
        assert_eq!(cube.vertices().len(), 8);
        assert_eq!(cube.faces().len(), 12);
        assert_eq!(
            check_consistency(&cube),
            ConsistencyReport {
                is_consistent: true,
                boundary_edge_count: 0,
                conflicting_edge_count: 0
            }
        );
        assert_eq!(cube.euler_characteristic(), 2);
    }

    #[test]
    fn cube_missing_face_has_three_boundary_edges() {
        let cube = primitives::unit_cube().without_faces(&[0]).unwrap();
        let report = check_consistency(&cube);
        assert!(!report.is_consistent);
        assert_eq!(report.boundary_edge_count, 3);
        assert_eq!(report.conflicting_edge_count, 0);
    }

    #[test]
    fn cube_with_reversed_face_has_three_conflicts() {
        let cube = primitives::unit_cube();
        let mut faces = cube.faces().to_vec();
        faces[5].swap(1, 2);
        let broken = TriangleMesh::new(cube.vertices().to_vec(), faces).unwrap();
        let report = check_consistency(&broken);
        assert!(!report.is_consistent);
        assert_eq!(report.boundary_edge_count, 0);
        assert_eq!(report.conflicting_edge_count, 3);
    }

    #[test]
    fn cube_corner_defects_sum_to_four_pi() {
        let cube = primitives::unit_cube();
        for v in 0..8 {
            assert!((cube.angular_defect(v) - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cube_edges_turn_by_right_angles_or_zero() {
        let cube = primitives::unit_cube();
        let total: f64 = cube
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                let [u, v] = edge.vertices;
                cube.edge_turning(e as u32) * (cube.vertices()[u as usize] - cube.vertices()[v as usize]).norm()
            })
            .sum();
        assert!((total - 6.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn reflex_edge_turns_negative() {
        let l = primitives::l_prism([0.0; 3], 1.0, 1.0, 0.5, 0.5, 1.0);
        assert!(l.is_consistent());
        let negatives = (0..l.edges().len() as u32)
            .filter(|&e| l.edge_turning(e) < -1e-9)
            .count();
        assert_eq!(negatives, 1);
    }

    #[test]
    fn degenerate_faces_are_dropped() {
        let vertices = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        let mesh = TriangleMesh::new(vertices, vec![[0, 1, 2], [0, 1, 3], [0, 0, 2]]).unwrap();
        assert_eq!(mesh.faces().len(), 1);
        assert_eq!(mesh.dropped_faces(), 2);
        assert_eq!(mesh.vertices().len(), 3);
    }

    #[test]
    fn out_of_range_face_is_rejected() {
        let vertices = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(matches!(
            TriangleMesh::new(vertices, vec![[0, 1, 3]]),
            Err(Error::InvalidFace { index: 3, .. })
        ));
    }

    #[test]
    fn flip_negates_volume() {
        let cube = primitives::unit_cube();
        assert!((cube.enclosed_volume() - 1.0).abs() < 1e-12);
        assert!((cube.flipped().enclosed_volume() + 1.0).abs() < 1e-12);
        assert!(cube.flipped().is_consistent());
    }
}
