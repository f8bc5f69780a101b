//! Procedural three-class shape task: boxes, spheres and cylinders with
//! randomized proportions, tessellation and orientation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{primitives, sample_rotations, Transform, TriangleMesh, Vec3};
use crate::pipeline::{Dataset, DatasetObject, MeshSource, Split};

pub const CLASSES: [&str; 3] = ["box", "cylinder", "sphere"];

/// One random mesh of class `class` (an index into [`CLASSES`]).
pub fn random_shape(class: usize, rng: &mut impl Rng) -> TriangleMesh {
    let mesh = match CLASSES[class] {
        "box" => {
            let half = Vec3::new(
                rng.random_range(0.3..1.0),
                rng.random_range(0.3..1.0),
                rng.random_range(0.3..1.0),
            );
            primitives::box_mesh(Vec3::zeros(), half, rng.random_range(1..=3))
        }
        "cylinder" => primitives::cylinder(
            Vec3::zeros(),
            rng.random_range(0.3..1.0),
            rng.random_range(0.6..2.0),
            rng.random_range(10..=32),
            rng.random_range(1..=3),
        ),
        _ => {
            let sphere = primitives::icosphere(Vec3::zeros(), 1.0, rng.random_range(1..=3));
            // Mildly squashed so the class is not a single point in feature space.
            let stretch = Vec3::new(1.0, rng.random_range(0.8..1.0), rng.random_range(0.8..1.0));
            TriangleMesh::new(
                sphere.vertices().iter().map(|v| v.component_mul(&stretch)).collect(),
                sphere.faces().to_vec(),
            )
            .expect("scaled sphere stays valid")
        }
    };
    let rotation = sample_rotations(1, rng.random(), false)[0];
    let placement = Transform {
        translation: Vec3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        ),
        scale: rng.random_range(0.5..3.0),
        ..rotation
    };
    mesh.transformed(&placement)
}

/// `per_class` objects of each class with a seeded stratified split sending
/// `test_fraction` of every class to the test set.
pub fn dataset(per_class: usize, test_fraction: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects = Vec::with_capacity(per_class * CLASSES.len());
    for i in 0..per_class {
        for (class, name) in CLASSES.iter().enumerate() {
            objects.push(DatasetObject {
                id: format!("{name}_{i:04}"),
                label: name.to_string(),
                split: Split::Train,
                source: MeshSource::Mesh(Arc::new(random_shape(class, &mut rng))),
            });
        }
    }
    let mut d = Dataset::from_objects(objects).expect("generated labels are consistent");
    d.stratified_split(test_fraction, seed ^ 0x5eed);
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for class in 0..3 {
            for _ in 0..5 {
                let m = random_shape(class, &mut rng);
                assert!(m.is_consistent());
                assert_eq!(m.euler_characteristic(), 2);
                assert!(m.enclosed_volume() > 0.0);
            }
        }
    }

    #[test]
    fn dataset_is_stratified_and_deterministic() {
        let d = dataset(10, 0.3, 7);
        assert_eq!(d.len(), 30);
        assert_eq!(d.labels(), ["box", "cylinder", "sphere"]);
        let test = d.objects().iter().filter(|o| o.split == Split::Test).count();
        assert_eq!(test, 9);
        let again = dataset(10, 0.3, 7);
        let ids = |d: &Dataset| d.objects().iter().map(|o| (o.id.clone(), o.split)).collect::<Vec<_>>();
        assert_eq!(ids(&d), ids(&again));
    }
}
