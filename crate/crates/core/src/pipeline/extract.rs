use std::collections::BTreeMap;

use super::descriptor::{Aggregation, FeatureDescriptor};
use super::recipe::FeatureRecipe;
use crate::aggregate::percentiles_of_unsorted;
use crate::error::Result;
use crate::features::{self, FeatureKind};
use crate::mesh::{normalize_to_unit_cube, sample_rotations, Transform, TriangleMesh};
use crate::voxelize;

/// What one level of the traversal must collect.
#[derive(Debug, Default)]
struct LevelPlan {
    kinds: Vec<FeatureKind>,
    raw: Vec<bool>,
    /// Requested percentiles per kind slot; empty when none.
    percentiles: Vec<Vec<u8>>,
}

#[derive(Debug)]
struct LevelAcc {
    /// Dense `component·N³ + linear_index` arrays, per kind slot.
    raw: Vec<Vec<f64>>,
    /// Occupied-voxel values per kind slot and component.
    samples: Vec<Vec<Vec<f64>>>,
    /// Percentile values per kind slot and component, in plan order.
    summaries: Vec<Vec<Vec<f64>>>,
}

/// Column layout of a recipe, computed once and reused across objects.
#[derive(Debug)]
pub struct ExtractionPlan {
    columns: Vec<FeatureDescriptor>,
    levels: BTreeMap<u32, LevelPlan>,
    kinds: Vec<FeatureKind>,
    margin: f64,
}

impl ExtractionPlan {
    pub fn new(recipe: &FeatureRecipe) -> Self {
        let mut levels: BTreeMap<u32, LevelPlan> = BTreeMap::new();
        for e in recipe.entries() {
            let plan = levels.entry(e.resolution.trailing_zeros()).or_default();
            let slot = match plan.kinds.iter().position(|&k| k == e.kind) {
                Some(s) => s,
                None => {
                    plan.kinds.push(e.kind);
                    plan.raw.push(false);
                    plan.percentiles.push(Vec::new());
                    plan.kinds.len() - 1
                }
            };
            match e.aggregation {
                Aggregation::Raw => plan.raw[slot] = true,
                Aggregation::Percentile(p) => plan.percentiles[slot].push(p),
            }
        }
        Self {
            columns: recipe.columns(),
            levels,
            kinds: recipe.kinds(),
            margin: recipe.margin,
        }
    }

    pub fn columns(&self) -> &[FeatureDescriptor] {
        &self.columns
    }

    /// Feature row of `mesh` after `rotation` and unit-cube normalization.
    pub fn extract(&self, mesh: &TriangleMesh, rotation: &Transform) -> Result<Vec<f64>> {
        if self.columns.is_empty() {
            return Ok(Vec::new());
        }
        features::check_kinds(mesh, &self.kinds)?;
        let (mesh, _) = normalize_to_unit_cube(&mesh.transformed(rotation), self.margin)?;

        let mut accs: BTreeMap<u32, LevelAcc> = self
            .levels
            .iter()
            .map(|(&level, plan)| {
                let cells = 1usize << (3 * level);
                let acc = LevelAcc {
                    raw: plan
                        .kinds
                        .iter()
                        .zip(&plan.raw)
                        .map(|(k, &raw)| {
                            if raw {
                                vec![0.0; k.dimension() * cells]
                            } else {
                                Vec::new()
                            }
                        })
                        .collect(),
                    samples: plan.kinds.iter().map(|k| vec![Vec::new(); k.dimension()]).collect(),
                    summaries: Vec::new(),
                };
                (level, acc)
            })
            .collect();

        let max_level = *self.levels.keys().next_back().expect("non-empty plan");
        voxelize::traverse(&mesh, max_level, |cell| {
            let level = cell.key.level();
            let (Some(plan), Some(acc)) = (self.levels.get(&level), accs.get_mut(&level)) else {
                return;
            };
            let cells = 1usize << (3 * level);
            let index = cell.key.linear_index();
            let mut slot = 0;
            features::for_each_cell_value(cell, &mesh, &plan.kinds, |_, values| {
                for (c, &x) in values.iter().enumerate() {
                    if plan.raw[slot] {
                        acc.raw[slot][c * cells + index] = x;
                    }
                    if !plan.percentiles[slot].is_empty() {
                        acc.samples[slot][c].push(x);
                    }
                }
                slot += 1;
            });
        })?;
        for (level, acc) in accs.iter_mut() {
            let plan = &self.levels[level];
            acc.summaries = acc
                .samples
                .iter_mut()
                .zip(&plan.percentiles)
                .map(|(per_kind, ps)| {
                    let ps: Vec<f64> = ps.iter().map(|&p| p as f64).collect();
                    per_kind
                        .iter_mut()
                        .map(|values| percentiles_of_unsorted(values, &ps))
                        .collect()
                })
                .collect();
        }

        let row = self
            .columns
            .iter()
            .map(|d| {
                let level = d.level();
                let plan = &self.levels[&level];
                let acc = &accs[&level];
                let slot = plan.kinds.iter().position(|&k| k == d.kind).expect("kind planned");
                let c = d.component_index();
                match (d.aggregation, d.voxel) {
                    (Aggregation::Raw, Some([i, j, k])) => {
                        let n = d.resolution as usize;
                        acc.raw[slot][c * n * n * n + (i as usize * n + j as usize) * n + k as usize]
                    }
                    (Aggregation::Percentile(p), _) => {
                        let at = plan.percentiles[slot]
                            .iter()
                            .position(|&q| q == p)
                            .expect("percentile planned");
                        acc.summaries[slot][c][at]
                    }
                    (Aggregation::Raw, None) => unreachable!("raw descriptors carry a voxel"),
                }
            })
            .collect();
        Ok(row)
    }
}

/// Feature row of one mesh under one rotation, in canonical column order.
pub fn extract_object(mesh: &TriangleMesh, recipe: &FeatureRecipe, rotation: &Transform) -> Result<Vec<f64>> {
    ExtractionPlan::new(recipe).extract(mesh, rotation)
}

/// The augmentation rotations of a recipe. A single rotation is the identity,
/// so one-rotation recipes see meshes in their stored orientation.
pub fn recipe_rotations(recipe: &FeatureRecipe) -> Vec<Transform> {
    if recipe.rotations <= 1 {
        vec![Transform::identity()]
    } else {
        sample_rotations(recipe.rotations, recipe.seed, recipe.include_reflections)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::mesh::{primitives, Vec3};

    fn one(recipe: &str, mesh: &TriangleMesh) -> Vec<f64> {
        let r = FeatureRecipe::parse(recipe).unwrap();
        extract_object(mesh, &r, &Transform::identity()).unwrap()
    }

    #[test]
    fn ev_at_resolution_one_is_global_eigenvalues() {
        let mesh = primitives::l_prism([0.1, 0.2, 0.0], 0.7, 0.5, 0.3, 0.2, 0.4);
        let row = one("EV@1:raw", &mesh);
        let (norm, _) = normalize_to_unit_cube(&mesh, 0.0).unwrap();
        let grid = features::compute_grid(&norm, 0, &[FeatureKind::EV]).unwrap();
        let expected = grid[&FeatureKind::EV]
            .get(&voxelize::VoxelKey::root())
            .unwrap()
            .components()
            .to_vec();
        assert_eq!(row, expected);
    }

    #[test]
    fn sphere_surface_area() {
        let sphere = primitives::icosphere(Vec3::repeat(0.5), 0.4, 4);
        let row = one("SA@1:raw", &sphere);
        // Normalization rescales the icosphere slightly, so compare against its own area.
        let (norm, t) = normalize_to_unit_cube(&sphere, 0.0).unwrap();
        assert!((row[0] - norm.total_area()).abs() < 1e-9);
        assert!((row[0] / (t.scale * t.scale) - 4.0 * PI * 0.16).abs() < 0.01 * 4.0 * PI * 0.16);
    }

    #[test]
    fn sphere_with_margin_keeps_its_radius() {
        let sphere = primitives::octasphere(Vec3::repeat(0.5), 0.4, 5);
        let mut r = FeatureRecipe::parse("SA@1:raw").unwrap();
        r.margin = 0.1;
        let row = extract_object(&sphere, &r, &Transform::identity()).unwrap();
        assert!((row[0] - 2.0106).abs() < 0.01 * 2.0106, "{}", row[0]);
    }

    #[test]
    fn cube_corner_defects() {
        let row = one("VAD@2:hist100", &primitives::unit_cube());
        assert!((row[0] - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn translation_is_normalized_away() {
        let cube = primitives::unit_cube();
        let moved = cube.transformed(&Transform::from_translation(Vec3::new(1.0, 0.0, 0.0)));
        assert_eq!(one("VE@1:raw", &moved), one("VE@1:raw", &cube));
        assert!((one("VE@1:raw", &moved)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn raw_columns_match_grid() {
        let mesh = primitives::torus(Vec3::repeat(0.5), 0.3, 0.1, 16, 8);
        let row = one("AN@4:raw", &mesh);
        let (norm, _) = normalize_to_unit_cube(&mesh, 0.0).unwrap();
        let grid = &features::compute_grid(&norm, 2, &[FeatureKind::AN]).unwrap()[&FeatureKind::AN];
        let cols = FeatureRecipe::parse("AN@4:raw").unwrap().columns();
        for (d, x) in cols.iter().zip(&row) {
            let [i, j, k] = d.voxel.unwrap();
            let key = voxelize::VoxelKey::new(2, i, j, k);
            let want = grid.get(&key).map_or(0.0, |v| v.component(d.component_index()));
            assert_eq!(*x, want, "{d}");
        }
    }

    #[test]
    fn rotation_invariant_columns_agree_across_rotations() {
        let mesh = primitives::cylinder(Vec3::zeros(), 1.0, 2.0, 24, 2);
        let recipe = FeatureRecipe::parse("VAD@1:raw").unwrap();
        let plan = ExtractionPlan::new(&recipe);
        let rows: Vec<Vec<f64>> = sample_rotations(20, 3, false)
            .iter()
            .map(|t| plan.extract(&mesh, t).unwrap())
            .collect();
        for r in &rows {
            assert!((r[0] - 4.0 * PI).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn inconsistent_mesh_is_rejected_for_vad() {
        let soup = primitives::unit_cube().without_faces(&[0]).unwrap();
        let r = FeatureRecipe::parse("SA+VAD@1:raw").unwrap();
        assert!(extract_object(&soup, &r, &Transform::identity()).is_err());
        assert!(extract_object(
            &soup,
            &FeatureRecipe::parse("SA@1:raw").unwrap(),
            &Transform::identity()
        )
        .is_ok());
    }

    #[test]
    fn single_rotation_is_identity() {
        let r = FeatureRecipe::parse("SA@1:raw").unwrap();
        assert_eq!(recipe_rotations(&r), vec![Transform::identity()]);
    }
}
