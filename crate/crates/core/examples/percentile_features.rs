//! Percentile summaries of per-voxel features: the VAD maximum picks out
//! the corners of a box, which a sphere lacks.

use voxfeat::aggregate::percentile_summary;
use voxfeat::features::{compute_grid, FeatureKind};
use voxfeat::mesh::{normalize_to_unit_cube, primitives, Vec3};
use voxfeat::pipeline::STANDARD_PERCENTILES;

pub fn run_example() {
    let shapes = [
        ("box", primitives::box_mesh(Vec3::zeros(), Vec3::new(1.0, 0.6, 0.4), 2)),
        ("sphere", primitives::icosphere(Vec3::zeros(), 1.0, 3)),
    ];
    let percentiles = STANDARD_PERCENTILES.map(f64::from);
    for (name, mesh) in shapes {
        let (unit, _) = normalize_to_unit_cube(&mesh, 0.05).unwrap();
        let grids = compute_grid(&unit, 3, &[FeatureKind::VAD, FeatureKind::SA]).unwrap();
        for kind in [FeatureKind::SA, FeatureKind::VAD] {
            let s = percentile_summary(&grids[&kind], kind, 0, &percentiles);
            let values: Vec<String> = s.percentiles.iter().map(|(p, v)| format!("p{p}={v:.4}")).collect();
            println!("{name:<6} {kind:<3} {}", values.join(" "));
        }
    }
}

#[allow(dead_code)]
fn main() {
    run_example();
}
