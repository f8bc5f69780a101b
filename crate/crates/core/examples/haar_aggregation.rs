//! Separable 3D Haar transform of a feature grid: energy is preserved and the
//! inverse restores the dense grid.

use voxfeat::aggregate::{densify, haar_matrix, haar_transform};
use voxfeat::features::{compute_grid, FeatureKind};
use voxfeat::mesh::{primitives, Vec3};

pub fn run_example() {
    let h = haar_matrix(2);
    println!("4x4 Haar matrix:");
    for row in &h {
        println!(
            "  {}",
            row.iter().map(|x| format!("{x:>7.4}")).collect::<Vec<_>>().join(" ")
        );
    }

    let sphere = primitives::octasphere(Vec3::repeat(0.5), 0.35, 3);
    let grid = &compute_grid(&sphere, 4, &[FeatureKind::SA]).unwrap()[&FeatureKind::SA];
    let dense = densify(grid, 0);
    let coeffs = haar_transform(grid, 0);
    let energy = dense.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("grid norm {energy:.12}  coefficient norm {:.12}", coeffs.norm());
    println!(
        "DC coefficient {:.6} (total area / 8^2 = {:.6})",
        coeffs.get(0, 0, 0),
        sphere.total_area() / 64.0
    );

    let back = coeffs.inverse();
    let err = dense.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("round trip max error {err:.3e}");
    assert!(err < 1e-12);
}

#[allow(dead_code)]
fn main() {
    run_example();
}
