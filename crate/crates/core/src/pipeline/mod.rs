//! Per-object feature rows, datasets and feature matrices.

mod dataset;
mod descriptor;
mod extract;
mod matrix;
mod recipe;

pub use dataset::{build_matrix, BuildReport, Dataset, DatasetObject, MeshSource};
pub use descriptor::{Aggregation, FeatureDescriptor};
pub use extract::{extract_object, recipe_rotations, ExtractionPlan};
pub use matrix::{FeatureMatrix, MatrixFormat, RowMeta, Split};
pub use recipe::{
    FeatureRecipe, RecipeConfig, RecipeEntry, MAX_PERCENTILE_RESOLUTION, MAX_RAW_RESOLUTION, STANDARD_PERCENTILES,
};
