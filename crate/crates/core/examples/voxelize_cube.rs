//! Clips a mesh into the octree at several levels and reports occupancy.

use voxfeat::mesh::{normalize_to_unit_cube, primitives, Vec3};
use voxfeat::voxelize::{cell_count, occupancy, octree_clip};

pub fn run_example() {
    let torus = primitives::torus(Vec3::zeros(), 2.0, 0.6, 48, 24);
    let (unit, transform) = normalize_to_unit_cube(&torus, 0.05).unwrap();
    println!("normalized with scale {:.4}", transform.scale);

    for level in 0..=6 {
        let cells = octree_clip(&unit, level).unwrap();
        let count = cell_count(&cells);
        let area: f64 = cells.iter().map(|c| c.area()).sum();
        println!(
            "level {level}: {count:>5} occupied of {:>6}  occupancy {:.4}  clipped area {area:.6}",
            1u64 << (3 * level),
            occupancy(count, level)
        );
        assert!((area - unit.total_area()).abs() < 1e-9 * unit.total_area());
    }
}

#[allow(dead_code)]
fn main() {
    run_example();
}
