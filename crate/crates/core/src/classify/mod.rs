//! Softmax gradient-boosted decision trees over feature matrices.

mod ensemble;
mod train;
mod tree;

use std::io::Write;

pub use ensemble::{softmax, TreeEnsemble};
pub use train::{
    grow_tree, split_gain, train, train_dense, EarlyStopping, SplitCandidate, TrainParams, TrainingData, MIN_SPLIT_GAIN,
};
pub use tree::{DecisionTree, Node};

use crate::error::{Error, Result};
use crate::pipeline::{FeatureDescriptor, FeatureMatrix};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Matrix label indices translated to the model's label order.
pub(crate) fn map_labels(model: &TreeEnsemble, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
    let lookup: Vec<usize> = matrix
        .labels()
        .iter()
        .map(|l| {
            model
                .labels()
                .iter()
                .position(|m| m == l)
                .ok_or_else(|| Error::Manifest(format!("label {l:?} is unknown to the model")))
        })
        .collect::<Result<_>>()?;
    Ok(matrix.rows().iter().map(|r| lookup[r.label]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub object_id: String,
    /// Row index for per-row predictions; None when rows were averaged.
    pub rotation: Option<u32>,
    pub label: usize,
    pub predicted: usize,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub symmetrized: bool,
    pub error_rate: f64,
    /// `confusion[true][predicted]`, in model label order.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<Prediction>,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.error_rate
    }

    /// Confusion matrix as CSV with a `true\predicted` header row.
    pub fn write_confusion_csv<W: Write>(&self, labels: &[String], w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(labels.iter().cloned());
        out.write_record(&header)?;
        for (l, row) in labels.iter().zip(&self.confusion) {
            let mut record = vec![l.clone()];
            record.extend(row.iter().map(|c| c.to_string()));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_predictions_csv<W: Write>(&self, labels: &[String], w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["object_id", "rotation", "label", "predicted"]
            .map(String::from)
            .to_vec();
        header.extend(labels.iter().map(|l| format!("p_{l}")));
        out.write_record(&header)?;
        for p in &self.predictions {
            let mut record = vec![
                p.object_id.clone(),
                p.rotation.map_or(String::new(), |r| r.to_string()),
                labels[p.label].clone(),
                labels[p.predicted].clone(),
            ];
            record.extend(p.probabilities.iter().map(|x| format!("{x:.16e}")));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Error rate and confusion matrix over `matrix`. With `symmetrize`, the
/// rows of each object are averaged into one prediction; otherwise every row
/// is scored on its own.
pub fn evaluate(model: &TreeEnsemble, matrix: &FeatureMatrix, symmetrize: bool) -> Result<Evaluation> {
    model.check_columns(matrix)?;
    let labels = map_labels(model, matrix)?;
    let k = model.n_classes();
    let mut predictions = Vec::new();
    if symmetrize {
        for group in matrix.object_groups() {
            let rows: Vec<&[f64]> = group.iter().map(|&r| matrix.row(r)).collect();
            let probabilities = model.predict_symmetrized(&rows)?;
            predictions.push(Prediction {
                object_id: matrix.rows()[group[0]].object_id.clone(),
                rotation: None,
                label: labels[group[0]],
                predicted: argmax(&probabilities),
                probabilities,
            });
        }
    } else {
        for (r, meta) in matrix.rows().iter().enumerate() {
            let probabilities = model.predict(matrix.row(r))?;
            predictions.push(Prediction {
                object_id: meta.object_id.clone(),
                rotation: Some(meta.rotation),
                label: labels[r],
                predicted: argmax(&probabilities),
                probabilities,
            });
        }
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for p in &predictions {
        confusion[p.label][p.predicted] += 1;
    }
    let wrong = predictions.iter().filter(|p| p.label != p.predicted).count();
    Ok(Evaluation {
        symmetrized: symmetrize,
        error_rate: if predictions.is_empty() {
            0.0
        } else {
            wrong as f64 / predictions.len() as f64
        },
        confusion,
        predictions,
    })
}

/// Error rate after each boosting round (entry `r` uses rounds `0..=r`).
pub fn error_history(model: &TreeEnsemble, matrix: &FeatureMatrix, symmetrize: bool) -> Result<Vec<f64>> {
    model.check_columns(matrix)?;
    let labels = map_labels(model, matrix)?;
    let k = model.n_classes();
    let groups: Vec<Vec<usize>> = if symmetrize {
        matrix.object_groups()
    } else {
        (0..matrix.n_rows()).map(|r| vec![r]).collect()
    };
    let mut margins = vec![model.params().base_score; matrix.n_rows() * k];
    let mut history = Vec::with_capacity(model.rounds());
    for trees in model.trees() {
        for (r, m) in margins.chunks_mut(k).enumerate() {
            let row = matrix.row(r);
            for (c, t) in trees.iter().enumerate() {
                m[c] += t.predict(row);
            }
        }
        let wrong = groups
            .iter()
            .filter(|g| {
                let mut mean = vec![0.0; k];
                for &r in g.iter() {
                    for (a, p) in mean.iter_mut().zip(softmax(&margins[r * k..(r + 1) * k])) {
                        *a += p;
                    }
                }
                argmax(&mean) != labels[g[0]]
            })
            .count();
        history.push(if groups.is_empty() {
            0.0
        } else {
            wrong as f64 / groups.len() as f64
        });
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceEntry {
    pub column: usize,
    pub name: String,
    pub count: usize,
}

impl ImportanceEntry {
    pub fn descriptor(&self) -> Option<FeatureDescriptor> {
        self.name.parse().ok()
    }
}

/// Split-occurrence counts, most frequent first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImportanceReport {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["rank", "column", "count"])?;
        for (i, e) in self.entries.iter().enumerate() {
            out.write_record([(i + 1).to_string(), e.name.clone(), e.count.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Number of splits on each column across all trees; ties keep column order.
/// `top_k` of None keeps every used column.
pub fn importance(model: &TreeEnsemble, top_k: Option<usize>) -> ImportanceReport {
    let mut counts = vec![0usize; model.columns().len()];
    for trees in model.trees() {
        for t in trees {
            for c in t.split_columns() {
                counts[c] += 1;
            }
        }
    }
    let mut entries: Vec<ImportanceEntry> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(column, &count)| ImportanceEntry {
            column,
            name: model.columns()[column].clone(),
            count,
        })
        .collect();
    entries.sort_by(|a, b| b.count.cmp(&a.count).then(a.column.cmp(&b.column)));
    if let Some(k) = top_k {
        entries.truncate(k);
    }
    ImportanceReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;
    use crate::pipeline::{RowMeta, Split};

    fn matrix(rows: &[(f64, usize, &str)]) -> FeatureMatrix {
        let cols = vec![FeatureDescriptor::raw(1, FeatureKind::SA, 0, [0, 0, 0])];
        let mut m = FeatureMatrix::new(cols, vec!["a".into(), "b".into()]);
        for (i, &(x, label, id)) in rows.iter().enumerate() {
            let meta = RowMeta {
                object_id: id.into(),
                label,
                rotation: i as u32,
                split: Split::Test,
            };
            m.push_row(meta, &[x]).unwrap();
        }
        m
    }

    fn model(rounds: usize) -> TreeEnsemble {
        let data = matrix(&[(0.0, 0, "p"), (1.0, 0, "q"), (2.0, 1, "r"), (3.0, 1, "s")]);
        let params = TrainParams {
            max_depth: 1,
            rounds,
            min_child_weight: 0.0,
            ..Default::default()
        };
        train(&data, &params).unwrap()
    }

    #[test]
    fn argmax_ties_go_low() {
        let mut p = vec![0.0; 10];
        p[3] = 0.4;
        p[7] = 0.4;
        assert_eq!(argmax(&p), 3);
    }

    #[test]
    fn perfect_and_uniform_error() {
        let m = model(5);
        let test = matrix(&[(0.5, 0, "x"), (2.5, 1, "y")]);
        let e = evaluate(&m, &test, false).unwrap();
        assert_eq!(e.error_rate, 0.0);
        assert_eq!(e.confusion, vec![vec![1, 0], vec![0, 1]]);

        let untrained = model(0);
        let p = untrained.predict(&[1.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let e = evaluate(&untrained, &test, false).unwrap();
        // Every prediction is class 0 by the tie rule.
        assert_eq!(e.error_rate, 0.5);
    }

    #[test]
    fn symmetrized_groups_rows_by_object() {
        let m = model(5);
        let test = matrix(&[(0.5, 0, "x"), (0.6, 0, "x"), (2.5, 1, "y"), (1.9, 1, "y")]);
        let sym = evaluate(&m, &test, true).unwrap();
        assert_eq!(sym.predictions.len(), 2);
        let hist = error_history(&m, &test, true).unwrap();
        assert_eq!(hist.len(), 5);
        assert_eq!(*hist.last().unwrap(), sym.error_rate);
        let per_row = error_history(&m, &test, false).unwrap();
        assert_eq!(*per_row.last().unwrap(), evaluate(&m, &test, false).unwrap().error_rate);
    }

    #[test]
    fn importance_counts_splits() {
        assert!(importance(&model(0), None).is_empty());
        let m = model(1);
        let report = importance(&m, Some(20));
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.entries[0].name, "[1][SA]");
        // One stump per class in the single round.
        assert_eq!(report.entries[0].count, 2);
        assert_eq!(report.entries[0].descriptor().unwrap().kind, FeatureKind::SA);
    }

    #[test]
    fn mismatched_columns_are_rejected() {
        let m = model(2);
        let other = matrix(&[(0.0, 0, "x")]).select_columns(|_| false);
        assert!(matches!(evaluate(&m, &other, false), Err(Error::ColumnMismatch { .. })));
    }
}
