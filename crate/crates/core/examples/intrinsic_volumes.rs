//! Per-voxel features of a sphere summed over the grid, against the
//! smooth-sphere values.

use std::f64::consts::PI;

use voxfeat::features::{compute_grid, FeatureKind};
use voxfeat::mesh::{primitives, Vec3};

pub fn run_example() {
    let r = 0.4;
    let sphere = primitives::icosphere(Vec3::repeat(0.5), r, 4);
    let kinds = [
        FeatureKind::SA,
        FeatureKind::VE,
        FeatureKind::EAD,
        FeatureKind::VAD,
        FeatureKind::AN,
    ];
    let expected = [
        4.0 * PI * r * r,
        4.0 / 3.0 * PI * r.powi(3),
        8.0 * PI * r,
        4.0 * PI,
        0.0,
    ];
    for level in [2, 4, 6] {
        let grids = compute_grid(&sphere, level, &kinds).unwrap();
        println!("level {level} ({} voxels)", grids[&FeatureKind::SA].len());
        for (kind, want) in kinds.iter().zip(expected) {
            let got: f64 = grids[kind].values().map(|v| v.components()[0]).sum();
            println!("  {kind:<3} total {got:>10.6}  smooth {want:>10.6}");
        }
    }
}

#[allow(dead_code)]
fn main() {
    run_example();
}
