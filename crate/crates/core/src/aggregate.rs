//! Aggregation of raw voxel grids: separable 3D Haar wavelet coefficients
//! and percentile statistics over occupied voxels. Vector-valued features
//! are aggregated one component at a time.

use crate::features::{FeatureKind, FeatureValue};
use crate::voxelize::VoxelGrid;

/// The orthogonal `2^n × 2^n` Haar matrix, row-major.
///
/// Row 1 (1-based) is constant `2^{-n/2}`. Rows `2^m < k ≤ 2^{m+1}` hold the
/// wavelet at length scale `m`: `+2^{-(n-m)/2}` on the first half of its
/// support and `-2^{-(n-m)/2}` on the second half.
pub fn haar_matrix(level: u32) -> Vec<Vec<f64>> {
    let n = level as i64;
    let size = 1usize << level;
    let mut h = vec![vec![0.0; size]; size];
    for k in 1..=size as i64 {
        for s in 1..=size as i64 {
            h[(k - 1) as usize][(s - 1) as usize] = if k == 1 {
                2f64.powf(-(n as f64) / 2.0)
            } else {
                // 2^m < k ≤ 2^{m+1}
                let m = 63 - (k - 1).leading_zeros() as i64;
                let amp = 2f64.powf(-((n - m) as f64) / 2.0);
                let width = 1i64 << (n - m);
                let offset = k - (1 << m) - 1;
                // Doubled bounds keep the half-integer endpoints exact.
                let (s2, w2) = (2 * s, 2 * offset * width);
                if w2 < s2 && s2 <= w2 + width {
                    amp
                } else if w2 + width < s2 && s2 <= w2 + 2 * width {
                    -amp
                } else {
                    0.0
                }
            };
        }
    }
    h
}

/// Length scale `m` of Haar matrix row `row` (0-based); `None` for the
/// constant row.
pub fn haar_row_scale(row: usize) -> Option<u32> {
    (row > 0).then(|| usize::BITS - 1 - row.leading_zeros())
}

/// Dense Haar coefficients of one component of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarCoefficients {
    level: u32,
    values: Vec<f64>,
}

impl HaarCoefficients {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Row-major `N³` array indexed `(i·N + j)·N + k`, where `i`, `j`, `k`
    /// are Haar matrix rows along x, y, z.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = 1usize << self.level;
        self.values[(i * n + j) * n + k]
    }

    /// Length scales `(m_x, m_y, m_z)` of an entry.
    pub fn scale_index(&self, i: usize, j: usize, k: usize) -> [Option<u32>; 3] {
        [haar_row_scale(i), haar_row_scale(j), haar_row_scale(k)]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Applies the transposed transform, returning the dense grid.
    pub fn inverse(&self) -> Vec<f64> {
        let mut out = self.values.clone();
        apply_separable(&mut out, self.level, inverse_haar_line);
        out
    }
}

/// Dense `N³` array of one component, absent voxels as zero.
pub fn densify(grid: &VoxelGrid<FeatureValue>, component: usize) -> Vec<f64> {
    let n = grid.resolution() as usize;
    let mut dense = vec![0.0; n * n * n];
    for (key, value) in grid.iter() {
        dense[key.linear_index()] = value.component(component);
    }
    dense
}

/// `H ⊗ H ⊗ H` applied to one densified component.
pub fn haar_transform(grid: &VoxelGrid<FeatureValue>, component: usize) -> HaarCoefficients {
    haar_transform_dense(densify(grid, component), grid.level())
}

/// `H ⊗ H ⊗ H` applied to a dense row-major `N³` array.
pub fn haar_transform_dense(mut values: Vec<f64>, level: u32) -> HaarCoefficients {
    let n = 1usize << level;
    assert_eq!(values.len(), n * n * n, "dense array does not match level");
    apply_separable(&mut values, level, haar_line);
    HaarCoefficients { level, values }
}

fn apply_separable(values: &mut [f64], level: u32, line_op: fn(&mut [f64], &mut [f64])) {
    let n = 1usize << level;
    if n == 1 {
        return;
    }
    let mut line = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let strides = [n * n, n, 1];
    for (axis, &stride) in strides.iter().enumerate() {
        let others: Vec<usize> = strides
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != axis)
            .map(|(_, &s)| s)
            .collect();
        for a in 0..n {
            for b in 0..n {
                let base = a * others[0] + b * others[1];
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = values[base + t * stride];
                }
                line_op(&mut line, &mut scratch);
                for (t, v) in line.iter().enumerate() {
                    values[base + t * stride] = *v;
                }
            }
        }
    }
}

/// In-place fast Haar transform of one line, producing coefficients in the
/// row order of [`haar_matrix`]: `[scaling, m=0, m=1 (2 entries), …]`.
fn haar_line(line: &mut [f64], scratch: &mut [f64]) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut len = line.len();
    while len > 1 {
        let half = len / 2;
        for p in 0..half {
            let (a, b) = (line[2 * p], line[2 * p + 1]);
            scratch[p] = (a + b) * r;
            scratch[half + p] = (a - b) * r;
        }
        line[..len].copy_from_slice(&scratch[..len]);
        len = half;
    }
}

fn inverse_haar_line(line: &mut [f64], scratch: &mut [f64]) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let n = line.len();
    let mut len = 1;
    while len < n {
        for p in 0..len {
            let (s, d) = (line[p], line[len + p]);
            scratch[2 * p] = (s + d) * r;
            scratch[2 * p + 1] = (s - d) * r;
        }
        line[..2 * len].copy_from_slice(&scratch[..2 * len]);
        len *= 2;
    }
}

/// Order statistics of one component over the occupied voxels of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileSummary {
    pub kind: FeatureKind,
    pub component: usize,
    pub resolution: u32,
    /// `(percentile, value)` pairs in the requested order.
    pub percentiles: Vec<(f64, f64)>,
    /// Set when the grid had no occupied voxels; all values are then zero.
    pub empty: bool,
}

impl PercentileSummary {
    pub fn value(&self, percentile: f64) -> Option<f64> {
        self.percentiles.iter().find(|(p, _)| *p == percentile).map(|(_, v)| *v)
    }
}

pub fn percentile_summary(
    grid: &VoxelGrid<FeatureValue>,
    kind: FeatureKind,
    component: usize,
    percentiles: &[f64],
) -> PercentileSummary {
    let mut values: Vec<f64> = grid.values().map(|v| v.component(component)).collect();
    let empty = values.is_empty();
    values.sort_by(f64::total_cmp);
    PercentileSummary {
        kind,
        component,
        resolution: grid.resolution(),
        percentiles: percentiles
            .iter()
            .map(|&p| (p, percentile_of_sorted(&values, p)))
            .collect(),
        empty,
    }
}

/// Linear interpolation between order statistics at rank `p/100·(count−1)`.
/// Returns 0 for an empty slice.
pub fn percentile_of_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// [`percentile_of_sorted`] for several percentiles of unsorted values,
/// by selection instead of a full sort.
pub fn percentiles_of_unsorted(values: &[f64], percentiles: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return vec![0.0; percentiles.len()];
    }
    let last = values.len() - 1;
    let ranks: Vec<(usize, usize, f64)> = percentiles
        .iter()
        .map(|&p| {
            let rank = (p / 100.0).clamp(0.0, 1.0) * last as f64;
            (rank.floor() as usize, rank.ceil() as usize, rank - rank.floor())
        })
        .collect();
    let mut needed: Vec<usize> = ranks.iter().flat_map(|&(lo, hi, _)| [lo, hi]).collect();
    needed.sort_unstable();
    needed.dedup();
    // Integer keys with the order of f64::total_cmp select much faster.
    let mut keys: Vec<i64> = values.iter().map(|v| total_order_key(*v)).collect();
    // Each selection leaves everything after the pivot no smaller than it,
    // so later ranks only need to search the remaining tail.
    let mut start = 0;
    let mut stats = std::collections::HashMap::with_capacity(needed.len());
    for &n in &needed {
        let (_, nth, _) = keys[start..].select_nth_unstable(n - start);
        stats.insert(n, f64::from_bits(total_order_key(f64::from_bits(*nth as u64)) as u64));
        start = n;
    }
    ranks
        .iter()
        .map(|&(lo, hi, frac)| {
            if lo == hi {
                stats[&lo]
            } else {
                stats[&lo] + frac * (stats[&hi] - stats[&lo])
            }
        })
        .collect()
}

/// Maps f64 bits to an i64 ordered like `f64::total_cmp`; applying it to
/// the key's bits gives back the value.
fn total_order_key(x: f64) -> i64 {
    let bits = x.to_bits() as i64;
    bits ^ ((((bits >> 63) as u64) >> 1) as i64)
}
