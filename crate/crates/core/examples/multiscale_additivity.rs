//! Merging the eight children of every voxel reproduces the coarser grid for
//! the additive kinds; EV is not additive and does not.

use voxfeat::features::{compute_grids, FeatureKind};
use voxfeat::mesh::primitives;

pub fn run_example() {
    let mesh = primitives::l_prism([0.1, 0.05, 0.2], 0.8, 0.7, 0.35, 0.3, 0.55);
    let grids = compute_grids(&mesh, &[3, 4], &FeatureKind::ALL).unwrap();
    for kind in FeatureKind::ALL {
        let merged = grids[&4][&kind].coarsen(|a, b| a.accumulate(b));
        let coarse = &grids[&3][&kind];
        let worst = coarse
            .iter()
            .map(|(key, v)| {
                let m = merged.get(key).expect("same support");
                v.components()
                    .iter()
                    .zip(m.components())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        println!(
            "{kind:<4} additive {:<5}  max parent-merge deviation {worst:.3e}",
            kind.is_additive()
        );
        if kind.is_additive() {
            assert!(worst < 1e-9);
        }
    }
}

#[allow(dead_code)]
fn main() {
    run_example();
}
