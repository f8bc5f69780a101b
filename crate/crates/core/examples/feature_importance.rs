//! Ranks columns by how often the trained trees split on them.

use voxfeat::classify::{importance, train, TrainParams};
use voxfeat::pipeline::{build_matrix, FeatureRecipe, Split};
use voxfeat::synthetic;

pub fn run_example() {
    let dataset = synthetic::dataset(10, 0.2, 8);
    let mut recipe = FeatureRecipe::parse("*@2+4:hist0+hist50+hist100").unwrap();
    recipe.rotations = 4;
    let (matrix, _) = build_matrix(&dataset, &recipe).unwrap();
    let params = TrainParams {
        max_depth: 2,
        rounds: 20,
        ..Default::default()
    };
    let model = train(&matrix.split(Split::Train), &params).unwrap();
    let report = importance(&model, Some(8));
    for (rank, e) in report.entries.iter().enumerate() {
        let kind = e.descriptor().map(|d| d.kind.to_string()).unwrap_or_default();
        println!("{:>2}. {:<24} {:>3} splits  ({kind})", rank + 1, e.name, e.count);
    }
}

#[allow(dead_code)]
fn main() {
    run_example();
}
