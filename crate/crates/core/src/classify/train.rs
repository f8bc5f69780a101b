use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{log_loss, softmax, TreeEnsemble};
use super::tree::{DecisionTree, Node};
use crate::error::{Error, Result};
use crate::pipeline::FeatureMatrix;

/// Splits must improve the objective by more than this.
pub const MIN_SPLIT_GAIN: f64 = 1e-6;
const MIN_HESSIAN: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub max_depth: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum loss reduction per split.
    pub gamma: f64,
    pub min_child_weight: f64,
    /// Initial margin of every class.
    pub base_score: f64,
    pub seed: u64,
    pub early_stopping: Option<EarlyStopping>,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            max_depth: 2,
            rounds: 100,
            learning_rate: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            base_score: 0.5,
            seed: 0,
            early_stopping: None,
        }
    }
}

/// Holds out a fraction of the objects (all rows of an object together)
/// and stops once their loss has not improved for `patience` rounds; the
/// ensemble is cut back to its best round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub validation_fraction: f64,
    pub patience: usize,
}

/// Best split of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub column: usize,
    pub threshold: f64,
    pub gain: f64,
    pub missing_left: bool,
}

/// Dense row-major training data with per-column sort orders.
pub struct TrainingData<'a> {
    values: &'a [f64],
    n_rows: usize,
    n_cols: usize,
    /// Row indices of non-missing values, by ascending value, per column.
    order: Vec<Vec<u32>>,
    sorted: Vec<Vec<f64>>,
    has_missing: Vec<bool>,
}

impl<'a> TrainingData<'a> {
    pub fn new(values: &'a [f64], n_cols: usize) -> Self {
        let n_rows = values.len().checked_div(n_cols).unwrap_or(0);
        assert_eq!(n_rows * n_cols, values.len(), "ragged matrix");
        let columns: Vec<(Vec<u32>, Vec<f64>, bool)> = (0..n_cols)
            .into_par_iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n_rows as u32)
                    .filter(|&r| !values[r as usize * n_cols + c].is_nan())
                    .collect();
                let missing = idx.len() < n_rows;
                // Stable sort keeps equal values in row order.
                idx.sort_by(|&a, &b| values[a as usize * n_cols + c].total_cmp(&values[b as usize * n_cols + c]));
                let sorted = idx.iter().map(|&r| values[r as usize * n_cols + c]).collect();
                (idx, sorted, missing)
            })
            .collect();
        let mut order = Vec::with_capacity(n_cols);
        let mut sorted = Vec::with_capacity(n_cols);
        let mut has_missing = Vec::with_capacity(n_cols);
        for (o, s, m) in columns {
            order.push(o);
            sorted.push(s);
            has_missing.push(m);
        }
        Self {
            values,
            n_rows,
            n_cols,
            order,
            sorted,
            has_missing,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    /// Best split per frontier slot; `slot[r]` is the slot of row `r` or
    /// `u32::MAX` for rows not being split.
    fn best_splits(
        &self,
        g: &[f64],
        h: &[f64],
        slot: &[u32],
        totals: &[(f64, f64)],
        params: &TrainParams,
    ) -> Vec<Option<SplitCandidate>> {
        let per_column: Vec<Vec<Option<SplitCandidate>>> = (0..self.n_cols)
            .into_par_iter()
            .map(|c| self.column_splits(c, g, h, slot, totals, params))
            .collect();
        let mut best: Vec<Option<SplitCandidate>> = vec![None; totals.len()];
        for column in per_column {
            for (b, cand) in best.iter_mut().zip(column) {
                if let Some(cand) = cand {
                    if b.is_none_or(|b| cand.gain > b.gain) {
                        *b = Some(cand);
                    }
                }
            }
        }
        best
    }

    fn column_splits(
        &self,
        c: usize,
        g: &[f64],
        h: &[f64],
        slot: &[u32],
        totals: &[(f64, f64)],
        params: &TrainParams,
    ) -> Vec<Option<SplitCandidate>> {
        let n_slots = totals.len();
        // Sums of non-missing rows per slot, needed to size the missing part.
        let present: Vec<(f64, f64)> = if self.has_missing[c] {
            let mut sums = vec![(0.0, 0.0); n_slots];
            for &r in &self.order[c] {
                let s = slot[r as usize];
                if s != u32::MAX {
                    sums[s as usize].0 += g[r as usize];
                    sums[s as usize].1 += h[r as usize];
                }
            }
            sums
        } else {
            totals.to_vec()
        };

        let mut left = vec![(0.0f64, 0.0f64); n_slots];
        let mut last: Vec<Option<f64>> = vec![None; n_slots];
        let mut best: Vec<Option<SplitCandidate>> = vec![None; n_slots];
        for (&r, &x) in self.order[c].iter().zip(&self.sorted[c]) {
            let s = slot[r as usize];
            if s == u32::MAX {
                continue;
            }
            let s = s as usize;
            if let Some(prev) = last[s] {
                if x > prev {
                    let (gt, ht) = totals[s];
                    let missing = (gt - present[s].0, ht - present[s].1);
                    let has_missing = self.has_missing[c] && present[s] != totals[s];
                    let (gl, hl) = left[s];
                    let threshold = midpoint(prev, x);
                    let mut consider = |gl: f64, hl: f64, missing_left: bool| {
                        if let Some(gain) = split_gain((gl, hl), (gt - gl, ht - hl), (gt, ht), params) {
                            if best[s].is_none_or(|b| gain > b.gain) {
                                best[s] = Some(SplitCandidate {
                                    column: c,
                                    threshold,
                                    gain,
                                    missing_left,
                                });
                            }
                        }
                    };
                    consider(gl, hl, false);
                    if has_missing {
                        consider(gl + missing.0, hl + missing.1, true);
                    }
                }
            }
            left[s].0 += g[r as usize];
            left[s].1 += h[r as usize];
            last[s] = Some(x);
        }
        best.into_iter()
            .map(|b| b.filter(|b| b.gain > MIN_SPLIT_GAIN))
            .collect()
    }
}

/// `a < t ≤ b` with `t` the midpoint when representable.
fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid > a && mid <= b {
        mid
    } else {
        b
    }
}

/// Second-order gain of splitting `total` into `left` and `right`, or None
/// when a child is below the minimum hessian weight.
pub fn split_gain(left: (f64, f64), right: (f64, f64), total: (f64, f64), params: &TrainParams) -> Option<f64> {
    if left.1 < params.min_child_weight || right.1 < params.min_child_weight {
        return None;
    }
    let score = |(g, h): (f64, f64)| g * g / (h + params.lambda);
    Some(0.5 * (score(left) + score(right) - score(total)) - params.gamma)
}

/// Grows one tree level by level with exact greedy splits.
pub fn grow_tree(data: &TrainingData, g: &[f64], h: &[f64], params: &TrainParams) -> DecisionTree {
    let n = data.n_rows();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut frontier: Vec<usize> = vec![0];
    let mut slot: Vec<u32> = vec![0; n];
    let leaf_value = |(gs, hs): (f64, f64)| -gs / (hs + params.lambda) * params.learning_rate;

    for depth in 0..=params.max_depth {
        let mut totals = vec![(0.0f64, 0.0f64); frontier.len()];
        for r in 0..n {
            if slot[r] != u32::MAX {
                totals[slot[r] as usize].0 += g[r];
                totals[slot[r] as usize].1 += h[r];
            }
        }
        let splits = if depth < params.max_depth {
            data.best_splits(g, h, &slot, &totals, params)
        } else {
            vec![None; frontier.len()]
        };

        let mut next = Vec::new();
        // Old slot -> first new slot, or MAX for leaves.
        let mut remap = vec![u32::MAX; frontier.len()];
        for (s, (&node, split)) in frontier.iter().zip(&splits).enumerate() {
            match split {
                Some(split) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node] = Node::Split {
                        column: split.column as u32,
                        threshold: split.threshold,
                        missing_left: split.missing_left,
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    remap[s] = next.len() as u32;
                    next.push(left);
                    next.push(left + 1);
                }
                None => {
                    nodes[node] = Node::Leaf {
                        value: leaf_value(totals[s]),
                    };
                }
            }
        }
        if next.is_empty() {
            break;
        }
        for (r, at) in slot.iter_mut().enumerate() {
            if *at == u32::MAX {
                continue;
            }
            let s = *at as usize;
            *at = match &splits[s] {
                Some(split) => {
                    let x = data.value(r, split.column);
                    let go_left = if x.is_nan() {
                        split.missing_left
                    } else {
                        x < split.threshold
                    };
                    remap[s] + u32::from(!go_left)
                }
                None => u32::MAX,
            };
        }
        frontier = next;
    }
    DecisionTree::from_nodes(nodes)
}

/// Softmax gradient and hessian of class `k` for every row.
fn gradients(probs: &[f64], labels: &[usize], k: usize, n_classes: usize) -> (Vec<f64>, Vec<f64>) {
    labels
        .iter()
        .enumerate()
        .map(|(r, &y)| {
            let p = probs[r * n_classes + k];
            let target = if y == k { 1.0 } else { 0.0 };
            (p - target, (2.0 * p * (1.0 - p)).max(MIN_HESSIAN))
        })
        .unzip()
}

/// Trains on dense row-major data. Column and label names are only carried
/// into the model.
pub fn train_dense(
    values: &[f64],
    columns: Vec<String>,
    labels: &[usize],
    class_names: Vec<String>,
    params: &TrainParams,
) -> Result<TreeEnsemble> {
    let n_cols = columns.len();
    let n_classes = class_names.len();
    if labels.is_empty() || n_cols == 0 {
        return Err(Error::DegenerateData("no training rows or no columns".into()));
    }
    if values.len() != labels.len() * n_cols {
        return Err(Error::ColumnMismatch {
            expected: n_cols,
            actual: values.len() / labels.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::DegenerateData("at least two classes are required".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        if y >= n_classes {
            return Err(Error::DegenerateData(format!("label index {y} out of range")));
        }
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateData(format!(
            "class {:?} has no training rows",
            class_names[empty]
        )));
    }
    let mut ensemble = TreeEnsemble::new(columns, class_names, params.clone());
    let data = TrainingData::new(values, n_cols);
    let mut margins = vec![params.base_score; labels.len() * n_classes];
    for round in 0..params.rounds {
        let probs = softmax_rows(&margins, n_classes);
        let trees: Vec<DecisionTree> = (0..n_classes)
            .map(|k| {
                let (g, h) = gradients(&probs, labels, k, n_classes);
                grow_tree(&data, &g, &h, params)
            })
            .collect();
        for (r, m) in margins.chunks_mut(n_classes).enumerate() {
            let row = &values[r * n_cols..(r + 1) * n_cols];
            for (k, t) in trees.iter().enumerate() {
                m[k] += t.predict(row);
            }
        }
        let loss = log_loss(&softmax_rows(&margins, n_classes), labels, n_classes);
        log::debug!("round {}: train loss {loss:.6}", round + 1);
        ensemble.push_round(trees, loss);
    }
    Ok(ensemble)
}

/// Trains on every row of `matrix`, with optional early stopping on a
/// held-out set of objects.
pub fn train(matrix: &FeatureMatrix, params: &TrainParams) -> Result<TreeEnsemble> {
    let Some(stop) = params.early_stopping else {
        return train_dense(
            matrix.values(),
            matrix.column_names(),
            &matrix.row_labels(),
            matrix.labels().to_vec(),
            params,
        );
    };
    if !(stop.validation_fraction > 0.0 && stop.validation_fraction < 1.0) {
        return Err(Error::DegenerateData("validation fraction must lie in (0, 1)".into()));
    }
    let mut groups = matrix.object_groups();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let n_val = ((stop.validation_fraction * groups.len() as f64).round() as usize).clamp(1, groups.len() - 1);
    let mut held_out = vec![false; matrix.n_rows()];
    for g in &groups[..n_val] {
        for &r in g {
            held_out[r] = true;
        }
    }
    let mut fit = FeatureMatrix::new(matrix.columns().to_vec(), matrix.labels().to_vec());
    let mut val = FeatureMatrix::new(matrix.columns().to_vec(), matrix.labels().to_vec());
    for (r, meta) in matrix.rows().iter().enumerate() {
        let target = if held_out[r] { &mut val } else { &mut fit };
        target.push_row(meta.clone(), matrix.row(r))?;
    }

    let mut ensemble = train_dense(
        fit.values(),
        fit.column_names(),
        &fit.row_labels(),
        fit.labels().to_vec(),
        &TrainParams {
            early_stopping: None,
            ..params.clone()
        },
    )?;
    let history = ensemble.loss_history(&val)?;
    let mut best = 0;
    for (i, &loss) in history.iter().enumerate() {
        if loss < history[best] {
            best = i;
        }
        if i - best >= stop.patience {
            break;
        }
    }
    log::info!("early stopping kept {} of {} rounds", best + 1, history.len());
    ensemble.truncate(best + 1);
    ensemble.set_validation_loss(history[..=best].to_vec());
    ensemble.set_params(params.clone());
    Ok(ensemble)
}

pub(crate) fn softmax_rows(margins: &[f64], n_classes: usize) -> Vec<f64> {
    margins.chunks(n_classes).flat_map(softmax).collect()
}
