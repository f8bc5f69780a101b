use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::extract::{recipe_rotations, ExtractionPlan};
use super::matrix::{FeatureMatrix, RowMeta, Split};
use super::recipe::FeatureRecipe;
use crate::error::{Error, Result};
use crate::mesh::{load_mesh, TriangleMesh};

#[derive(Debug, Clone)]
pub enum MeshSource {
    Path(PathBuf),
    Mesh(Arc<TriangleMesh>),
}

impl MeshSource {
    pub fn load(&self) -> Result<Arc<TriangleMesh>> {
        match self {
            MeshSource::Path(p) => Ok(Arc::new(load_mesh(p, None)?)),
            MeshSource::Mesh(m) => Ok(Arc::clone(m)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetObject {
    pub id: String,
    pub label: String,
    pub split: Split,
    pub source: MeshSource,
}

/// Labelled objects with a fixed label set; label indices follow the
/// label set order.
#[derive(Debug, Clone)]
pub struct Dataset {
    labels: Vec<String>,
    objects: Vec<DatasetObject>,
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    path: String,
    label: String,
    split: String,
}

impl Dataset {
    /// `labels` is the declared label set; objects with other labels are rejected.
    pub fn new(labels: Vec<String>, objects: Vec<DatasetObject>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::Manifest(format!("label {l:?} declared twice")));
            }
        }
        let mut ids = BTreeSet::new();
        for o in &objects {
            if !seen.contains(&o.label) {
                return Err(Error::Manifest(format!(
                    "object {:?} has undeclared label {:?}",
                    o.id, o.label
                )));
            }
            if !ids.insert(&o.id) {
                return Err(Error::Manifest(format!("object id {:?} listed twice", o.id)));
            }
        }
        Ok(Self { labels, objects })
    }

    /// Labels are the sorted set of labels in use.
    pub fn from_objects(objects: Vec<DatasetObject>) -> Result<Self> {
        let labels: BTreeSet<String> = objects.iter().map(|o| o.label.clone()).collect();
        Self::new(labels.into_iter().collect(), objects)
    }

    /// Reads a `path,label,split` CSV manifest; paths are relative to the
    /// manifest's directory and double as object ids. Without `declared`,
    /// the label set is the sorted set of labels present.
    pub fn from_manifest(path: impl AsRef<Path>, declared: Option<&[String]>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let text = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(&text[..]);
        let mut objects = Vec::new();
        for (line, row) in reader.deserialize::<ManifestRow>().enumerate() {
            let row = row.map_err(|e| Error::Manifest(format!("line {}: {e}", line + 2)))?;
            objects.push(DatasetObject {
                id: row.path.clone(),
                label: row.label,
                split: row.split.parse()?,
                source: MeshSource::Path(base.join(&row.path)),
            });
        }
        match declared {
            Some(labels) => Self::new(labels.to_vec(), objects),
            None => Self::from_objects(objects),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn objects(&self) -> &[DatasetObject] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Reassigns splits so that each class sends `round(test_fraction·count)`
    /// of its objects to the test split, chosen by a seeded shuffle.
    pub fn stratified_split(&mut self, test_fraction: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, o) in self.objects.iter().enumerate() {
            by_label.entry(&o.label).or_default().push(i);
        }
        let mut test = BTreeSet::new();
        for members in by_label.values_mut() {
            members.shuffle(&mut rng);
            let n_test = (test_fraction * members.len() as f64).round() as usize;
            test.extend(members.iter().take(n_test).copied());
        }
        for (i, o) in self.objects.iter_mut().enumerate() {
            o.split = if test.contains(&i) { Split::Test } else { Split::Train };
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    pub objects: usize,
    pub rows: usize,
    /// `(object id, reason)` for every skipped object.
    pub failures: Vec<(String, String)>,
}

/// One row per (object, rotation), ordered by manifest position then
/// rotation index. Failed objects are skipped and recorded; more than 10%
/// failures aborts.
pub fn build_matrix(dataset: &Dataset, recipe: &FeatureRecipe) -> Result<(FeatureMatrix, BuildReport)> {
    let plan = ExtractionPlan::new(recipe);
    let rotations = recipe_rotations(recipe);
    let total = dataset.len();
    let done = std::sync::atomic::AtomicUsize::new(0);

    let results: Vec<Result<Vec<Vec<f64>>>> = dataset
        .objects
        .par_iter()
        .map(|object| {
            let rows = object
                .source
                .load()
                .and_then(|mesh| rotations.iter().map(|t| plan.extract(&mesh, t)).collect());
            let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            log::debug!("[{n}/{total}] {}", object.id);
            if let Err(e) = &rows {
                log::warn!("skipping {}: {e}", object.id);
            }
            rows
        })
        .collect();

    let mut matrix = FeatureMatrix::new(plan.columns().to_vec(), dataset.labels.clone());
    let mut report = BuildReport {
        objects: total,
        ..Default::default()
    };
    for (object, rows) in dataset.objects.iter().zip(results) {
        match rows {
            Ok(rows) => {
                let label = dataset.label_index(&object.label).expect("validated label");
                for (r, values) in rows.iter().enumerate() {
                    let meta = RowMeta {
                        object_id: object.id.clone(),
                        label,
                        rotation: r as u32,
                        split: object.split,
                    };
                    matrix.push_row(meta, values)?;
                }
            }
            Err(e) => report.failures.push((object.id.clone(), e.to_string())),
        }
    }
    if report.failures.len() * 10 > total {
        return Err(Error::TooManyFailures {
            failed: report.failures.len(),
            total,
        });
    }
    report.rows = matrix.n_rows();
    log::info!(
        "extracted {} rows from {} objects ({} skipped)",
        report.rows,
        total - report.failures.len(),
        report.failures.len()
    );
    Ok((matrix, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{primitives, Vec3};

    fn object(id: &str, label: &str, mesh: TriangleMesh) -> DatasetObject {
        DatasetObject {
            id: id.into(),
            label: label.into(),
            split: Split::Train,
            source: MeshSource::Mesh(Arc::new(mesh)),
        }
    }

    fn toy() -> Dataset {
        Dataset::from_objects(vec![
            object("cube", "box", primitives::unit_cube()),
            object("ball", "sphere", primitives::icosphere(Vec3::zeros(), 1.0, 1)),
            object("can", "cylinder", primitives::cylinder(Vec3::zeros(), 1.0, 2.0, 12, 1)),
        ])
        .unwrap()
    }

    #[test]
    fn rows_per_object_and_rotation() {
        let mut recipe = FeatureRecipe::parse("SA+EV@1:raw,VAD@2:hist50").unwrap();
        recipe.rotations = 20;
        let (m, report) = build_matrix(&toy(), &recipe).unwrap();
        assert_eq!(m.n_rows(), 60);
        assert_eq!(report.failures.len(), 0);
        assert_eq!(m.labels(), ["box", "cylinder", "sphere"]);
        assert_eq!(m.rows()[20].object_id, "ball");
        assert_eq!(m.rows()[20].label, 2);
    }

    #[test]
    fn deterministic() {
        let mut recipe = FeatureRecipe::parse("*@2:raw+hist25").unwrap();
        recipe.rotations = 3;
        recipe.seed = 11;
        let (a, _) = build_matrix(&toy(), &recipe).unwrap();
        let (b, _) = build_matrix(&toy(), &recipe).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn undeclared_label_is_rejected() {
        let objects = vec![object("cube", "box", primitives::unit_cube())];
        assert!(matches!(
            Dataset::new(vec!["sphere".into()], objects),
            Err(Error::Manifest(_))
        ));
    }

    #[test]
    fn failures_are_skipped_until_the_limit() {
        let soup = primitives::unit_cube().without_faces(&[0]).unwrap();
        let mut objects: Vec<DatasetObject> = (0..10)
            .map(|i| object(&format!("c{i}"), "box", primitives::unit_cube()))
            .collect();
        objects.push(object("soup", "box", soup.clone()));
        let recipe = FeatureRecipe::parse("VAD@1:raw").unwrap();
        let (m, report) = build_matrix(&Dataset::from_objects(objects.clone()).unwrap(), &recipe).unwrap();
        assert_eq!(m.n_rows(), 10);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].0, "soup");

        objects.push(object("soup2", "box", soup));
        let err = build_matrix(&Dataset::from_objects(objects).unwrap(), &recipe).unwrap_err();
        assert!(matches!(err, Error::TooManyFailures { failed: 2, total: 12 }));
    }

    #[test]
    fn stratified_split_per_class() {
        let objects: Vec<DatasetObject> = (0..30)
            .map(|i| object(&format!("o{i}"), ["a", "b", "c"][i % 3], primitives::unit_cube()))
            .collect();
        let mut d = Dataset::from_objects(objects).unwrap();
        d.stratified_split(0.3, 5);
        for label in ["a", "b", "c"] {
            let test = d
                .objects()
                .iter()
                .filter(|o| o.label == label && o.split == Split::Test)
                .count();
            assert_eq!(test, 3);
        }
    }
}
