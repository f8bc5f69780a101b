//! Builds a feature matrix for a small procedural dataset and round-trips it
//! through the CSV and binary formats.

use voxfeat::pipeline::{build_matrix, FeatureMatrix, FeatureRecipe, MatrixFormat, Split};
use voxfeat::synthetic;

pub fn run_example() {
    let dataset = synthetic::dataset(4, 0.25, 11);
    let mut recipe = FeatureRecipe::parse("SA+EV+VAD@2+4:hist0+hist50+hist100").unwrap();
    recipe.rotations = 3;
    let (matrix, report) = build_matrix(&dataset, &recipe).unwrap();
    println!(
        "{} objects -> {} rows x {} columns, {} failures",
        report.objects,
        matrix.n_rows(),
        matrix.n_cols(),
        report.failures.len()
    );
    println!(
        "train rows {}  test rows {}",
        matrix.split(Split::Train).n_rows(),
        matrix.split(Split::Test).n_rows()
    );

    let dir = tempfile::tempdir().unwrap();
    for (file, format) in [("m.csv", MatrixFormat::Csv), ("m.bin", MatrixFormat::Binary)] {
        let path = dir.path().join(file);
        matrix.save(&path, format).unwrap();
        let back = FeatureMatrix::load(&path, format).unwrap();
        assert_eq!(back, matrix);
        println!(
            "{file}: {} bytes, identical after reload",
            std::fs::metadata(&path).unwrap().len()
        );
    }
}

#[allow(dead_code)]
fn main() {
    run_example();
}
