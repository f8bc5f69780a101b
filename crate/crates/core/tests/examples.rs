//! Runs every example so they stay working.

#[path = "../examples/boosted_trees.rs"]
mod boosted_trees;

#[path = "../examples/cli_pipeline.rs"]
mod cli_pipeline;

#[path = "../examples/feature_importance.rs"]
mod feature_importance;

#[path = "../examples/feature_matrix.rs"]
mod feature_matrix;

#[path = "../examples/feature_recipe.rs"]
mod feature_recipe;

#[path = "../examples/haar_aggregation.rs"]
mod haar_aggregation;

#[path = "../examples/intrinsic_volumes.rs"]
mod intrinsic_volumes;


#[path = "../examples/multiscale_additivity.rs"]
mod multiscale_additivity;

#[path = "../examples/percentile_features.rs"]
mod percentile_features;

#[path = "../examples/symmetrized_prediction.rs"]
mod symmetrized_prediction;

#[path = "../examples/voxelize_cube.rs"]
mod voxelize_cube;

#[test]
fn boosted_trees_runs() {
    boosted_trees::run_example();
}

#[test]
fn cli_pipeline_runs() {
    cli_pipeline::run_example();
}

#[test]
fn feature_importance_runs() {
    feature_importance::run_example();
}

#[test]
fn feature_matrix_runs() {
    feature_matrix::run_example();
}

#[test]
fn feature_recipe_runs() {
    feature_recipe::run_example();
}

#[test]
fn haar_aggregation_runs() {
    haar_aggregation::run_example();
}

#[test]
fn intrinsic_volumes_runs() {
    intrinsic_volumes::run_example();
}

#[test]
fn mesh_io_runs() {
    mesh_io::run_example();
}

#[test]
fn multiscale_additivity_runs() {
    multiscale_additivity::run_example();
}

#[test]
fn percentile_features_runs() {
    percentile_features::run_example();
}

#[test]
fn symmetrized_prediction_runs() {
    symmetrized_prediction::run_example();
}

#[test]
fn voxelize_cube_runs() {
    voxelize_cube::run_example();
}
