//! Binary-classification datasets: loading, splitting, synthesis.
//!
//! A dataset is a list of pairs `(a_j, b_j)` with `a_j ∈ ℝⁿ` and labels
//! `b_j ∈ {−1, +1}`. Loaders accept the LIBSVM sparse text format and plain
//! CSV with the label in the last column; files using `{0, 1}` labels are
//! mapped to `{−1, +1}` on load.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported label {found}: labels must be -1/+1 or 0/1")]
    Label { found: f64 },
    #[error("labels mix the 0/1 and -1/+1 conventions")]
    MixedLabels,
    #[error("row {row} has {found} features, expected {expected}")]
    Dimension {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("no data")]
    Empty,
    #[error("dataset needs at least 2 points, got {0}")]
    TooSmall(usize),
    #[error("split leaves the {side} side empty")]
    DegenerateSplit { side: &'static str },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
}

/// Feature storage. Dense is the default layout produced by the loaders; a
/// sparse layout is available for wide data. The evaluation-cost model is
/// representation independent: one scalar product per `a_jᵀx` either way.
#[derive(Debug, Clone, PartialEq)]
pub enum Features<T> {
    Dense { data: Vec<T>, dim: usize },
    Sparse { rows: Vec<Vec<(u32, T)>>, dim: usize },
}

impl<T: Scalar> Features<T> {
    pub fn dim(&self) -> usize {
        match self {
            Features::Dense { dim, .. } | Features::Sparse { dim, .. } => *dim,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            Features::Dense { data, dim } => {
                if *dim == 0 {
                    0
                } else {
                    data.len() / dim
                }
            }
            Features::Sparse { rows, .. } => rows.len(),
        }
    }

    /// `a_jᵀx` for row `j`.
    pub fn dot(&self, j: usize, x: &[T]) -> T {
        match self {
            Features::Dense { data, dim } => linalg::dot(&data[j * dim..(j + 1) * dim], x),
            Features::Sparse { rows, .. } => {
                let mut acc = T::zero();
                for &(i, v) in &rows[j] {
                    acc = acc + v * x[i as usize];
                }
                acc
            }
        }
    }

    /// `out += coef * a_j`.
    pub fn add_scaled(&self, j: usize, coef: T, out: &mut [T]) {
        match self {
            Features::Dense { data, dim } => {
                linalg::axpy(coef, &data[j * dim..(j + 1) * dim], out)
            }
            Features::Sparse { rows, .. } => {
                for &(i, v) in &rows[j] {
                    out[i as usize] = out[i as usize] + coef * v;
                }
            }
        }
    }

    pub fn row_norm_sq(&self, j: usize) -> T {
        match self {
            Features::Dense { data, dim } => linalg::norm_sq(&data[j * dim..(j + 1) * dim]),
            Features::Sparse { rows, .. } => {
                let mut acc = T::zero();
                for &(_, v) in &rows[j] {
                    acc = acc + v * v;
                }
                acc
            }
        }
    }

    /// Densified copy of row `j`.
    pub fn row(&self, j: usize) -> Vec<T> {
        match self {
            Features::Dense { data, dim } => data[j * dim..(j + 1) * dim].to_vec(),
            Features::Sparse { rows, dim } => {
                let mut out = vec![T::zero(); *dim];
                for &(i, v) in &rows[j] {
                    out[i as usize] = v;
                }
                out
            }
        }
    }
}

/// Feature vectors with `{−1, +1}` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Features<T>,
    labels: Vec<i8>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from dense rows, validating the invariants: uniform
    /// dimension, labels in `{−1, +1}`, at least two points.
    pub fn from_dense(rows: Vec<Vec<T>>, labels: Vec<i8>) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        if rows.len() < 2 {
            return Err(DataError::TooSmall(rows.len()));
        }
        assert_eq!(rows.len(), labels.len(), "one label per feature row");
        let dim = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(DataError::Dimension {
                    row: i + 1,
                    expected: dim,
                    found: r.len(),
                });
            }
        }
        for &b in &labels {
            assert!(b == 1 || b == -1, "labels must be normalized to ±1");
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            data.extend_from_slice(r);
        }
        Ok(Dataset {
            features: Features::Dense { data, dim },
            labels,
        })
    }

    /// Total number of points `N̂`.
    pub fn count(&self) -> usize {
        self.labels.len()
    }

    /// Feature dimension `n`.
    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn label(&self, j: usize) -> i8 {
        self.labels[j]
    }

    pub fn features(&self) -> &Features<T> {
        &self.features
    }

    /// Converts the feature storage to the sparse layout, dropping exact
    /// zeros. Values and labels are unchanged.
    pub fn into_sparse(self) -> Self {
        let dim = self.features.dim();
        let rows = (0..self.count())
            .map(|j| {
                self.features
                    .row(j)
                    .into_iter()
                    .enumerate()
                    .filter(|(_, v)| *v != T::zero())
                    .map(|(i, v)| (i as u32, v))
                    .collect()
            })
            .collect();
        Dataset {
            features: Features::Sparse { rows, dim },
            labels: self.labels,
        }
    }

    /// Serializes to LIBSVM sparse text (1-based indices, zeros omitted).
    pub fn to_libsvm_string(&self) -> String {
        let mut out = String::new();
        for j in 0..self.count() {
            let _ = write!(out, "{}", if self.labels[j] > 0 { "+1" } else { "-1" });
            for (i, v) in self.features.row(j).iter().enumerate() {
                if *v != T::zero() {
                    let _ = write!(out, " {}:{}", i + 1, v);
                }
            }
            out.push('\n');
        }
        out
    }
}

fn normalize_labels(raw: Vec<f64>) -> Result<Vec<i8>, DataError> {
    let mut has_zero = false;
    let mut has_neg = false;
    for &v in &raw {
        if v == 0.0 {
            has_zero = true;
        } else if v == -1.0 {
            has_neg = true;
        } else if v != 1.0 {
            return Err(DataError::Label { found: v });
        }
    }
    if has_zero && has_neg {
        return Err(DataError::MixedLabels);
    }
    Ok(raw
        .into_iter()
        .map(|v| if v == 1.0 { 1 } else { -1 })
        .collect())
}

/// Loads a LIBSVM sparse text file: `label idx:val idx:val ...` per line with
/// 1-based, strictly ascending indices. The feature dimension is the maximum
/// index present in the file.
pub fn load_libsvm<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>, DataError> {
    parse_libsvm(&fs::read_to_string(path)?)
}

pub fn parse_libsvm<T: Scalar>(text: &str) -> Result<Dataset<T>, DataError> {
    let mut raw_labels = Vec::new();
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a first token");
        let label: f64 = label_tok.parse().map_err(|_| DataError::Parse {
            line: lineno,
            msg: format!("bad label `{label_tok}`"),
        })?;
        let mut row = Vec::new();
        let mut prev_index = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: lineno,
                msg: format!("expected `index:value`, got `{tok}`"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| DataError::Parse {
                line: lineno,
                msg: format!("bad feature index `{idx_s}`"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| DataError::Parse {
                line: lineno,
                msg: format!("bad feature value `{val_s}`"),
            })?;
            if idx == 0 || idx <= prev_index {
                return Err(DataError::Parse {
                    line: lineno,
                    msg: format!("indices must be 1-based and ascending, got {idx}"),
                });
            }
            prev_index = idx;
            max_index = max_index.max(idx);
            row.push((idx, val));
        }
        raw_labels.push(label);
        sparse_rows.push(row);
    }

    if sparse_rows.is_empty() {
        return Err(DataError::Empty);
    }
    let labels = normalize_labels(raw_labels)?;
    let rows = sparse_rows
        .into_iter()
        .map(|row| {
            let mut dense = vec![T::zero(); max_index];
            for (idx, val) in row {
                dense[idx - 1] = T::from_f64(val).expect("finite feature value");
            }
            dense
        })
        .collect();
    Dataset::from_dense(rows, labels)
}

/// Loads comma-separated rows whose last column is the label.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>, DataError> {
    parse_csv(&fs::read_to_string(path)?)
}

pub fn parse_csv<T: Scalar>(text: &str) -> Result<Dataset<T>, DataError> {
    let mut raw_labels = Vec::new();
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut dim: Option<usize> = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(DataError::Parse {
                line: lineno,
                msg: "need at least one feature and a label".to_string(),
            });
        }
        let n = fields.len() - 1;
        match dim {
            None => dim = Some(n),
            Some(d) if d != n => {
                return Err(DataError::Dimension {
                    row: lineno,
                    expected: d,
                    found: n,
                })
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(n);
        for f in &fields[..n] {
            let v: f64 = f.trim().parse().map_err(|_| DataError::Parse {
                line: lineno,
                msg: format!("bad feature value `{}`", f.trim()),
            })?;
            row.push(T::from_f64(v).expect("finite feature value"));
        }
        let label: f64 = fields[n].trim().parse().map_err(|_| DataError::Parse {
            line: lineno,
            msg: format!("bad label `{}`", fields[n].trim()),
        })?;
        raw_labels.push(label);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let labels = normalize_labels(raw_labels)?;
    Dataset::from_dense(rows, labels)
}

/// Disjoint train/validation index partition covering the whole dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    train: Vec<usize>,
    validation: Vec<usize>,
}

impl Split {
    /// Training index set, ascending.
    pub fn train(&self) -> &[usize] {
        &self.train
    }

    /// Validation index set, ascending.
    pub fn validation(&self) -> &[usize] {
        &self.validation
    }

    /// Training set size `N`.
    pub fn train_count(&self) -> usize {
        self.train.len()
    }
}

/// Uniformly random partition into `round(train_fraction · N̂)` training
/// points and the rest for validation, reproducible from `seed`.
pub fn split<T: Scalar>(
    ds: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<Split, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadFraction(train_fraction));
    }
    let total = ds.count();
    let n_train = (train_fraction * total as f64).round() as usize;
    if n_train == 0 {
        return Err(DataError::DegenerateSplit { side: "train" });
    }
    if n_train >= total {
        return Err(DataError::DegenerateSplit { side: "validation" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut validation: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    Ok(Split { train, validation })
}

/// Trivial split that puts every point in the training set. Useful for
/// objectives that do not need a validation side.
pub fn split_all_train<T: Scalar>(ds: &Dataset<T>) -> Split {
    Split {
        train: (0..ds.count()).collect(),
        validation: Vec::new(),
    }
}

/// Generates a linearly structured binary classification problem: a ground
/// truth vector `w*` and features are drawn from the standard normal
/// distribution, labels are `sign(a_jᵀw* + noise·ξ_j)` with standard normal
/// `ξ_j`. `noise = 0` gives data exactly separable by `w*`.
pub fn synthesize<T: Scalar>(dim: usize, count: usize, seed: u64, noise: f64) -> Dataset<T> {
    synthesize_conditioned(dim, count, seed, noise, 1.0)
}

/// As [`synthesize`], but feature coordinate `i` is scaled by
/// `condition^(-i/(dim-1))`, so the coordinate scales span `1..1/condition`.
/// Real tabular datasets have wildly heterogeneous feature scales; this is
/// the knob that makes a synthetic benchmark comparably hard instead of a
/// well-conditioned spherical cloud.
pub fn synthesize_conditioned<T: Scalar>(
    dim: usize,
    count: usize,
    seed: u64,
    noise: f64,
    condition: f64,
) -> Dataset<T> {
    assert!(dim >= 1, "dimension must be at least 1");
    assert!(count >= 2, "need at least 2 points");
    assert!(condition >= 1.0, "condition must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let scales: Vec<f64> = (0..dim)
        .map(|i| {
            if dim == 1 {
                1.0
            } else {
                condition.powf(-(i as f64) / (dim as f64 - 1.0))
            }
        })
        .collect();
    let w_star: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
    let mut rows = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let a: Vec<f64> = (0..dim)
            .map(|i| {
                let z: f64 = normal.sample(&mut rng);
                z * scales[i]
            })
            .collect();
        let xi: f64 = normal.sample(&mut rng);
        let margin = a.iter().zip(&w_star).map(|(x, w)| x * w).sum::<f64>() + noise * xi;
        labels.push(if margin >= 0.0 { 1i8 } else { -1i8 });
        rows.push(
            a.into_iter()
                .map(|v| T::from_f64(v).expect("finite"))
                .collect::<Vec<T>>(),
        );
    }
    Dataset::from_dense(rows, labels).expect("synthesized data satisfies the invariants")
}

/// Draws `count` indices uniformly without replacement from `0..total` via a
/// partial Fisher-Yates shuffle. Result is ascending.
pub(crate) fn draw_without_replacement<R: Rng>(
    total: usize,
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert!(count <= total);
    let mut pool: Vec<usize> = (0..total).collect();
    partial_shuffle(&mut pool, count, rng);
    let mut out = pool[..count].to_vec();
    out.sort_unstable();
    out
}

/// First `count` slots of `pool` become a uniform sample without replacement.
pub(crate) fn partial_shuffle<E, R: Rng>(pool: &mut [E], count: usize, rng: &mut R) {
    let n = pool.len();
    for i in 0..count.min(n.saturating_sub(1)) {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
}
