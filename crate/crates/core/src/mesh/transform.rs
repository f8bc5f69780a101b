use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{TriangleMesh, Vec3};
use crate::error::{Error, Result};

/// A similarity `v ↦ scale · rotation · v + translation` with an orthogonal
/// `rotation` (determinant ±1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self {
            rotation,
            ..Self::identity()
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            translation,
            ..Self::identity()
        }
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.scale * (self.rotation * v) + self.translation
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Transform) -> Transform {
        Transform {
            rotation: next.rotation * self.rotation,
            translation: next.scale * (next.rotation * self.translation) + next.translation,
            scale: next.scale * self.scale,
        }
    }

    pub fn is_reflection(&self) -> bool {
        self.rotation.determinant() < 0.0
    }

    /// Checks orthonormality of the rotation to `tol` and positivity of the scale.
    pub fn is_valid(&self, tol: f64) -> bool {
        let gram = self.rotation.transpose() * self.rotation;
        (gram - Matrix3::identity()).amax() <= tol && self.scale > 0.0 && self.scale.is_finite()
    }
}

/// Centers the bounding box at `(0.5, 0.5, 0.5)` and uniformly scales the
/// longest box edge to `1 − 2·margin`.
pub fn normalize_to_unit_cube(mesh: &TriangleMesh, margin: f64) -> Result<(TriangleMesh, Transform)> {
    let (lo, hi) = mesh.bounding_box().ok_or(Error::EmptyMesh)?;
    let extent = (hi - lo).max();
    if !extent.is_finite() || extent <= 0.0 {
        return Err(Error::DegenerateExtent);
    }
    let scale = (1.0 - 2.0 * margin) / extent;
    let center = 0.5 * (lo + hi);
    let t = Transform {
        rotation: Matrix3::identity(),
        translation: Vec3::repeat(0.5) - scale * center,
        scale,
    };
    Ok((mesh.transformed(&t), t))
}

/// Draws `count` rotations uniformly from SO(3), or from O(3) when
/// `include_reflections` is set (each draw composed with the central
/// inversion with probability 1/2). Deterministic in `seed`.
pub fn sample_rotations(count: usize, seed: u64, include_reflections: bool) -> Vec<Transform> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut q = [0.0f64; 4];
            // Reject the measure-zero all-zero draw.
            loop {
                for c in q.iter_mut() {
                    *c = rng.sample(StandardNormal);
                }
                if q.iter().map(|c| c * c).sum::<f64>() > 1e-24 {
                    break;
                }
            }
            let unit = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
            let mut rotation = unit.to_rotation_matrix().into_inner();
            if include_reflections && rng.random_bool(0.5) {
                rotation = -rotation;
            }
            Transform::from_rotation(rotation)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use nalgebra::Rotation3;

    use super::*;
    use crate::mesh::primitives;

    fn sorted_points(mesh: &TriangleMesh) -> Vec<[i64; 3]> {
        let mut pts: Vec<[i64; 3]> = mesh
            .vertices()
            .iter()
            .map(|v| {
                [
                    (v.x * 1e9).round() as i64,
                    (v.y * 1e9).round() as i64,
                    (v.z * 1e9).round() as i64,
                ]
            })
            .collect();
        pts.sort();
        pts
    }

    #[test]
    fn identity_is_noop() {
        let cube = primitives::unit_cube();
        let moved = cube.transformed(&Transform::identity());
        assert_eq!(moved.vertices(), cube.vertices());
        assert_eq!(moved.faces(), cube.faces());
    }

    #[test]
    fn quarter_turn_maps_centered_cube_to_itself() {
        let cube = primitives::box_mesh(Vec3::zeros(), Vec3::repeat(1.0), 1);
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), FRAC_PI_2).into_inner();
        let turned = cube.transformed(&Transform::from_rotation(rot));
        assert_eq!(sorted_points(&turned), sorted_points(&cube));
        assert!(turned.is_consistent());
    }

    #[test]
    fn reflection_preserves_outward_orientation() {
        let cube = primitives::unit_cube();
        let mut mirror = Matrix3::identity();
        mirror[(0, 0)] = -1.0;
        let reflected = cube.transformed(&Transform::from_rotation(mirror));
        assert!(cube.is_consistent());
        assert!(reflected.is_consistent());
        assert!((reflected.enclosed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_scaled_cube() {
        let cube = primitives::box_mesh(Vec3::repeat(5.0), Vec3::repeat(5.0), 1);
        let (unit, t) = normalize_to_unit_cube(&cube, 0.0).unwrap();
        assert!((t.scale - 0.1).abs() < 1e-15);
        let (lo, hi) = unit.bounding_box().unwrap();
        assert!(lo.amax() < 1e-15);
        assert!((hi - Vec3::repeat(1.0)).amax() < 1e-15);
    }

    #[test]
    fn normalize_sphere_with_margin() {
        let sphere = primitives::octasphere(Vec3::repeat(7.0), 2.0, 3);
        let (unit, t) = normalize_to_unit_cube(&sphere, 0.05).unwrap();
        assert!((t.scale - 0.225).abs() < 1e-12);
        let (lo, hi) = unit.bounding_box().unwrap();
        let center = 0.5 * (lo + hi);
        assert!((center - Vec3::repeat(0.5)).amax() < 1e-12);
        // Octasphere vertices reach the axis extremes, so the box spans one diameter.
        assert!(((hi - lo).max() - 0.9).abs() < 1e-12);
        let radius = unit.vertices().iter().map(|v| (v - center).norm()).fold(0.0, f64::max);
        assert!((radius - 0.45).abs() < 1e-12);
    }

    #[test]
    fn normalize_sliver_centers_flat_axis() {
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 3.0),
                Vec3::new(4.0, 0.0, 3.0),
                Vec3::new(0.0, 2.0, 3.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let (unit, _) = normalize_to_unit_cube(&mesh, 0.0).unwrap();
        for v in unit.vertices() {
            assert_eq!(v.z, 0.5);
        }
    }

    #[test]
    fn normalize_rejects_empty_mesh() {
        let empty = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(matches!(normalize_to_unit_cube(&empty, 0.0), Err(Error::EmptyMesh)));
    }

    #[test]
    fn normalize_is_idempotent() {
        let sphere = primitives::icosphere(Vec3::new(-3.0, 2.0, 9.0), 5.0, 2);
        let (once, _) = normalize_to_unit_cube(&sphere, 0.1).unwrap();
        let (twice, t) = normalize_to_unit_cube(&once, 0.1).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        for (a, b) in once.vertices().iter().zip(twice.vertices()) {
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn rotations_are_deterministic_and_orthogonal() {
        let a = sample_rotations(20, 42, false);
        let b = sample_rotations(20, 42, false);
        assert_eq!(a, b);
        for t in &a {
            assert!(t.is_valid(1e-12));
            assert!((t.rotation.determinant() - 1.0).abs() < 1e-12);
        }
        let single = sample_rotations(1, 7, false);
        assert_eq!(single.len(), 1);
        assert!((single[0].rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflections_appear_when_enabled() {
        let rs = sample_rotations(64, 3, true);
        let reflections = rs.iter().filter(|t| t.is_reflection()).count();
        assert!(reflections > 10 && reflections < 54);
        assert!(rs.iter().all(|t| t.is_valid(1e-12)));
    }

    #[test]
    fn rotations_are_uniform_in_mean() {
        let rs = sample_rotations(10_000, 11, false);
        let mean: Vec3 = rs.iter().map(|t| t.rotation * Vec3::x()).sum::<Vec3>() / rs.len() as f64;
        assert!(mean.norm() < 0.05, "mean {}", mean.norm());
    }

    #[test]
    fn compose_matches_sequential_application() {
        let rs = sample_rotations(2, 5, true);
        let a = Transform {
            scale: 2.0,
            translation: Vec3::new(1.0, -2.0, 0.5),
            ..rs[0]
        };
        let b = Transform {
            scale: 0.25,
            translation: Vec3::new(0.0, 3.0, 1.0),
            ..rs[1]
        };
        let p = Vec3::new(0.3, -0.7, 1.1);
        let direct = b.apply(&a.apply(&p));
        assert!((a.then(&b).apply(&p) - direct).amax() < 1e-12);
    }
}
