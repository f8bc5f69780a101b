//! Recipes name the feature columns; an extraction plan turns one rotated
//! mesh into one row.

use voxfeat::mesh::{primitives, Vec3};
use voxfeat::pipeline::{recipe_rotations, ExtractionPlan, FeatureRecipe};

pub fn run_example() {
    let standard = FeatureRecipe::standard();
    println!(
        "standard: {} columns, {} rotations",
        standard.columns().len(),
        standard.rotations
    );
    println!("  {}", standard.canonical());

    let mut recipe = FeatureRecipe::parse("SA+EV@1:raw, VAD+EV@4+8:hist0+hist50+hist100").unwrap();
    recipe.rotations = 4;
    let plan = ExtractionPlan::new(&recipe);
    let names: Vec<String> = plan.columns().iter().map(|c| c.to_string()).collect();
    println!("{} columns: {}", names.len(), names.join(" "));

    let mesh = primitives::cylinder(Vec3::zeros(), 0.5, 2.0, 24, 2);
    for (r, rotation) in recipe_rotations(&recipe).iter().enumerate() {
        let row = plan.extract(&mesh, rotation).unwrap();
        let head: Vec<String> = row.iter().take(4).map(|x| format!("{x:.4}")).collect();
        println!("rotation {r}: {} ...", head.join(" "));
    }
}

#[allow(dead_code)]
fn main() {
    run_example();
}
