//! Averaging class probabilities over the rotated copies of each test object
//! against scoring every rotation on its own.

use voxfeat::classify::{evaluate, train, TrainParams};
use voxfeat::pipeline::{build_matrix, FeatureRecipe, Split};
use voxfeat::synthetic;

pub fn run_example() {
    let dataset = synthetic::dataset(12, 0.3, 5);
    let mut recipe = FeatureRecipe::parse("SA+EV+VAD+EAD@2+4+8:hist0+hist25+hist50+hist75+hist100").unwrap();
    recipe.rotations = 6;
    let (matrix, _) = build_matrix(&dataset, &recipe).unwrap();
    let params = TrainParams {
        max_depth: 2,
        rounds: 30,
        ..Default::default()
    };
    let model = train(&matrix.split(Split::Train), &params).unwrap();
    let test = matrix.split(Split::Test);
    let per_row = evaluate(&model, &test, false).unwrap();
    let sym = evaluate(&model, &test, true).unwrap();
    println!(
        "per-rotation error {:.4} over {} rows",
        per_row.error_rate,
        per_row.predictions.len()
    );
    println!(
        "symmetrized error  {:.4} over {} objects",
        sym.error_rate,
        sym.predictions.len()
    );
    for p in sym.predictions.iter().take(4) {
        let probs: Vec<String> = p.probabilities.iter().map(|x| format!("{x:.3}")).collect();
        println!(
            "  {:<14} true {:<8} predicted {:<8} [{}]",
            p.object_id,
            model.labels()[p.label],
            model.labels()[p.predicted],
            probs.join(", ")
        );
    }
}

#[allow(dead_code)]
fn main() {
    run_example();
}
