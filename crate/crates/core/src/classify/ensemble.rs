use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::TrainParams;
use super::tree::DecisionTree;
use crate::error::{Error, Result};
use crate::pipeline::FeatureMatrix;
use crate::util::write_atomic;

const FORMAT: &str = "voxfeat-trees";
const VERSION: u32 = 1;

/// Softmax-boosted trees: one tree per class per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    format: String,
    version: u32,
    columns: Vec<String>,
    labels: Vec<String>,
    params: TrainParams,
    /// `trees[round][class]`.
    trees: Vec<Vec<DecisionTree>>,
    train_loss: Vec<f64>,
    #[serde(default)]
    validation_loss: Vec<f64>,
}

impl TreeEnsemble {
    pub(crate) fn new(columns: Vec<String>, labels: Vec<String>, params: TrainParams) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            columns,
            labels,
            params,
            trees: Vec::new(),
            train_loss: Vec::new(),
            validation_loss: Vec::new(),
        }
    }

    pub(crate) fn push_round(&mut self, trees: Vec<DecisionTree>, loss: f64) {
        debug_assert_eq!(trees.len(), self.labels.len());
        self.trees.push(trees);
        self.train_loss.push(loss);
    }

    pub(crate) fn set_validation_loss(&mut self, loss: Vec<f64>) {
        self.validation_loss = loss;
    }

    pub(crate) fn set_params(&mut self, params: TrainParams) {
        self.params = params;
    }

    /// Keeps the first `rounds` rounds.
    pub fn truncate(&mut self, rounds: usize) {
        self.trees.truncate(rounds);
        self.train_loss.truncate(rounds);
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn rounds(&self) -> usize {
        self.trees.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn params(&self) -> &TrainParams {
        &self.params
    }

    pub fn trees(&self) -> &[Vec<DecisionTree>] {
        &self.trees
    }

    /// Mean training cross-entropy after each round.
    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    /// Held-out loss per kept round when trained with early stopping.
    pub fn validation_loss(&self) -> &[f64] {
        &self.validation_loss
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() == self.columns.len() {
            Ok(())
        } else {
            Err(Error::ColumnMismatch {
                expected: self.columns.len(),
                actual: row.len(),
            })
        }
    }

    /// Fails unless `matrix` has exactly the model's columns.
    pub fn check_columns(&self, matrix: &FeatureMatrix) -> Result<()> {
        if matrix.n_cols() != self.columns.len() {
            return Err(Error::ColumnMismatch {
                expected: self.columns.len(),
                actual: matrix.n_cols(),
            });
        }
        if let Some((c, (want, got))) = self
            .columns
            .iter()
            .zip(matrix.column_names())
            .enumerate()
            .find(|(_, (a, b))| *a != b)
        {
            return Err(Error::ColumnNames(format!(
                "column {c} is {got:?}, model expects {want:?}"
            )));
        }
        Ok(())
    }

    /// Per-class additive scores after the first `rounds` rounds.
    pub fn margins_at(&self, row: &[f64], rounds: usize) -> Vec<f64> {
        let mut m = vec![self.params.base_score; self.n_classes()];
        for trees in &self.trees[..rounds.min(self.trees.len())] {
            for (k, t) in trees.iter().enumerate() {
                m[k] += t.predict(row);
            }
        }
        m
    }

    pub fn predict_margin(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_row(row)?;
        Ok(self.margins_at(row, self.rounds()))
    }

    /// Class probabilities.
    pub fn predict(&self, row: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.predict_margin(row)?))
    }

    /// Mean of the class probabilities over rotated copies of one object.
    pub fn predict_symmetrized(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        if rows.is_empty() {
            return Err(Error::DegenerateData(
                "symmetrized prediction needs at least one row".into(),
            ));
        }
        let mut mean = vec![0.0; self.n_classes()];
        for row in rows {
            for (m, p) in mean.iter_mut().zip(self.predict(row)?) {
                *m += p;
            }
        }
        let n = rows.len() as f64;
        Ok(mean.into_iter().map(|m| m / n).collect())
    }

    /// Mean cross-entropy of `matrix` rows after each round.
    pub fn loss_history(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_columns(matrix)?;
        let labels = super::map_labels(self, matrix)?;
        let k = self.n_classes();
        let mut margins = vec![self.params.base_score; matrix.n_rows() * k];
        let mut out = Vec::with_capacity(self.rounds());
        for trees in &self.trees {
            for (r, m) in margins.chunks_mut(k).enumerate() {
                let row = matrix.row(r);
                for (c, t) in trees.iter().enumerate() {
                    m[c] += t.predict(row);
                }
            }
            let probs: Vec<f64> = margins.chunks(k).flat_map(softmax).collect();
            out.push(log_loss(&probs, &labels, k));
        }
        Ok(out)
    }

    /// JSON model file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), |w| {
            serde_json::to_writer(&mut *w, self)?;
            Ok(())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header =
            serde_json::from_slice(bytes).map_err(|_| Error::VersionMismatch("not a model file".into()))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(Error::VersionMismatch(format!(
                "model format {} version {}, expected {FORMAT} version {VERSION}",
                header.format, header.version
            )));
        }
        let model: TreeEnsemble = serde_json::from_slice(bytes)?;
        if model.trees.iter().any(|r| r.len() != model.labels.len()) {
            return Err(Error::VersionMismatch("tree count does not match class count".into()));
        }
        Ok(model)
    }

    /// Readable description of every tree.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "classes: {}\nrounds: {}\ncolumns: {}\nbase_score: {:?}\n",
            self.labels.join(", "),
            self.rounds(),
            self.columns.len(),
            self.params.base_score
        );
        for (r, trees) in self.trees.iter().enumerate() {
            for (k, t) in trees.iter().enumerate() {
                out.push_str(&format!("round {r} class {}:\n", self.labels[k]));
                out.push_str(&t.dump(&self.columns));
            }
        }
        out
    }
}

pub fn softmax(margins: &[f64]) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = margins.iter().map(|m| (m - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn log_loss(probs: &[f64], labels: &[usize], n_classes: usize) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &y)| -probs[r * n_classes + y].max(1e-300).ln())
        .sum();
    total / labels.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::train_dense;

    fn toy() -> TreeEnsemble {
        let x: Vec<f64> = (0..30).map(|i| (i % 10) as f64).collect();
        let y: Vec<usize> = (0..30).map(|i| (i % 10) / 4).collect();
        let params = TrainParams {
            rounds: 4,
            ..Default::default()
        };
        train_dense(
            &x,
            vec!["[1][SA]".into()],
            &y,
            vec!["a".into(), "b".into(), "c".into()],
            &params,
        )
        .unwrap()
    }

    #[test]
    fn probabilities_form_a_simplex() {
        let m = toy();
        for x in [-1.0, 0.0, 3.5, 9.0, f64::NAN] {
            let p = m.predict(&[x]).unwrap();
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&[0.3, -1.2, 2.0]);
        let b = softmax(&[100.3, 98.8, 102.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrized_prediction_of_copies_equals_prediction() {
        let m = toy();
        let row = [2.0];
        let single = m.predict(&row).unwrap();
        assert_eq!(m.predict_symmetrized(&[&row]).unwrap(), single);
        let rep = m.predict_symmetrized(&[&row, &row, &row]).unwrap();
        for (x, y) in rep.iter().zip(&single) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(m.predict_symmetrized(&[]).is_err());
    }

    #[test]
    fn column_mismatch() {
        assert!(matches!(
            toy().predict(&[1.0, 2.0]),
            Err(Error::ColumnMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let m = toy();
        let json = serde_json::to_vec(&m).unwrap();
        assert_eq!(TreeEnsemble::from_json(&json).unwrap(), m);
        let bumped = String::from_utf8(json)
            .unwrap()
            .replace("\"version\":1", "\"version\":7");
        assert!(matches!(
            TreeEnsemble::from_json(bumped.as_bytes()),
            Err(Error::VersionMismatch(_))
        ));
        assert!(TreeEnsemble::from_json(b"{").is_err());
    }

    #[test]
    fn dump_mentions_columns_and_leaves() {
        let text = toy().dump();
        assert!(text.contains("round 0 class a:"));
        assert!(text.contains("[[1][SA] <"));
        assert!(text.contains("leaf="));
    }
}
