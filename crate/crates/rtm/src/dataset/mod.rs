//! In-memory data model for source/target domains.
//!
//! Samples are stored column-wise: a [`FeatureMatrix`] is `k x n` with one
//! column per sample, which is the orientation every training formula in
//! [`crate::model`] is written for. On disk the dense format stores one
//! sample per row; the loaders in [`io`] transpose.

mod io;

pub use io::{load_dense, load_labels, load_sparse, save_dense, SparseDataset};

use ndarray::{Array1, Array2};

use crate::error::{Result, RtmError};

/// A `k x n` matrix of finite reals: `k` feature dimensions, `n` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    /// Wraps a column-sample matrix, rejecting empty shapes and non-finite
    /// entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(RtmError::Validation(format!(
                "feature matrix must be at least 1x1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(((row, col), value)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(RtmError::Validation(format!(
                "non-finite feature value {value} at feature {row}, sample {col}"
            )));
        }
        Ok(FeatureMatrix { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Number of feature dimensions (rows).
    pub fn n_features(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples (columns).
    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    /// Appends a constant all-ones feature row, e.g. to emulate a bias term.
    /// The new row is a feature like any other to everything downstream.
    pub fn with_constant_row(&self) -> FeatureMatrix {
        let (k, n) = (self.n_features(), self.n_samples());
        let mut out = Array2::zeros((k + 1, n));
        out.slice_mut(ndarray::s![..k, ..]).assign(&self.values);
        out.row_mut(k).fill(1.0);
        FeatureMatrix { values: out }
    }

    /// Pads with zero rows up to `k` feature dimensions. Useful when a
    /// sparse file's max index falls short of the dimensionality of the
    /// data it must be compared or scored against.
    pub fn padded_to(&self, k: usize) -> Result<FeatureMatrix> {
        if k < self.n_features() {
            return Err(RtmError::Dimension(format!(
                "cannot pad {} features down to {k}",
                self.n_features()
            )));
        }
        if k == self.n_features() {
            return Ok(self.clone());
        }
        let mut out = Array2::zeros((k, self.n_samples()));
        out.slice_mut(ndarray::s![..self.n_features(), ..])
            .assign(&self.values);
        Ok(FeatureMatrix { values: out })
    }
}

/// Integer class labels for `n` samples, with ids in `[0, n_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    class_ids: Vec<usize>,
    n_classes: usize,
}

impl LabelSet {
    pub fn new(class_ids: Vec<usize>, n_classes: usize) -> Result<Self> {
        if class_ids.is_empty() {
            return Err(RtmError::Validation("label set is empty".into()));
        }
        if n_classes == 0 {
            return Err(RtmError::Validation("n_classes must be at least 1".into()));
        }
        if let Some((i, &id)) = class_ids
            .iter()
            .enumerate()
            .find(|(_, &id)| id >= n_classes)
        {
            return Err(RtmError::Validation(format!(
                "class id {id} at sample {i} is out of range [0, {n_classes})"
            )));
        }
        Ok(LabelSet {
            class_ids,
            n_classes,
        })
    }

    pub fn class_ids(&self) -> &[usize] {
        &self.class_ids
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    /// The `C x n` one-hot matrix with a single 1 per column.
    pub fn one_hot(&self) -> Array2<f64> {
        one_hot(&self.class_ids, self.n_classes).expect("label set is validated on construction")
    }
}

/// Builds the `C x n` 0/1 matrix whose column `i` has a single 1 at row
/// `class_ids[i]`.
pub fn one_hot(class_ids: &[usize], n_classes: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((n_classes, class_ids.len()));
    for (i, &id) in class_ids.iter().enumerate() {
        if id >= n_classes {
            return Err(RtmError::Validation(format!(
                "class id {id} at sample {i} is out of range [0, {n_classes})"
            )));
        }
        out[[id, i]] = 1.0;
    }
    Ok(out)
}

/// A labeled source domain paired with a target domain in the same feature
/// space. Target labels are optional and only ever used for evaluation.
#[derive(Debug, Clone)]
pub struct DomainPair {
    source: FeatureMatrix,
    source_labels: LabelSet,
    target: FeatureMatrix,
    target_labels: Option<LabelSet>,
    task_name: String,
}

impl DomainPair {
    pub fn new(
        source: FeatureMatrix,
        source_labels: LabelSet,
        target: FeatureMatrix,
        target_labels: Option<LabelSet>,
        task_name: impl Into<String>,
    ) -> Result<Self> {
        if source.n_features() != target.n_features() {
            return Err(RtmError::Dimension(format!(
                "source has {} features but target has {}",
                source.n_features(),
                target.n_features()
            )));
        }
        if source.n_samples() != source_labels.len() {
            return Err(RtmError::Dimension(format!(
                "source has {} samples but {} labels",
                source.n_samples(),
                source_labels.len()
            )));
        }
        if source_labels.n_classes() < 2 {
            return Err(RtmError::Validation(
                "source label set must contain at least 2 classes".into(),
            ));
        }
        if let Some(labels) = &target_labels {
            if target.n_samples() != labels.len() {
                return Err(RtmError::Dimension(format!(
                    "target has {} samples but {} labels",
                    target.n_samples(),
                    labels.len()
                )));
            }
        }
        Ok(DomainPair {
            source,
            source_labels,
            target,
            target_labels,
            task_name: task_name.into(),
        })
    }

    pub fn source(&self) -> &FeatureMatrix {
        &self.source
    }

    pub fn source_labels(&self) -> &LabelSet {
        &self.source_labels
    }

    pub fn target(&self) -> &FeatureMatrix {
        &self.target
    }

    pub fn target_labels(&self) -> Option<&LabelSet> {
        self.target_labels.as_ref()
    }

    pub fn task_name(&self) -> &str {
        &self.task_name
    }

    /// Standardizes both domains with statistics fitted on the source only,
    /// leaving labels untouched.
    pub fn standardized(&self) -> Result<DomainPair> {
        let scaler = Standardizer::fit(&self.source);
        Ok(DomainPair {
            source: scaler.transform(&self.source)?,
            source_labels: self.source_labels.clone(),
            target: scaler.transform(&self.target)?,
            target_labels: self.target_labels.clone(),
            task_name: self.task_name.clone(),
        })
    }

    /// Appends the constant all-ones feature row to both domains.
    pub fn with_constant_row(&self) -> DomainPair {
        DomainPair {
            source: self.source.with_constant_row(),
            source_labels: self.source_labels.clone(),
            target: self.target.with_constant_row(),
            target_labels: self.target_labels.clone(),
            task_name: self.task_name.clone(),
        }
    }
}

/// Per-feature affine rescaling fitted on one domain and applied to any
/// matrix in the same feature space.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    /// Fits per-feature mean and population standard deviation. Features
    /// with zero spread keep a unit scale so they are only centered.
    pub fn fit(reference: &FeatureMatrix) -> Standardizer {
        let values = reference.values();
        let n = values.ncols() as f64;
        let mean = values.sum_axis(ndarray::Axis(1)) / n;
        let mut scale = Array1::zeros(values.nrows());
        for (row, values_row) in values.outer_iter().enumerate() {
            let m = mean[row];
            let var = values_row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            scale[row] = if sd > 0.0 { sd } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    pub fn transform(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
        if fm.n_features() != self.mean.len() {
            return Err(RtmError::Dimension(format!(
                "standardizer was fitted on {} features, got {}",
                self.mean.len(),
                fm.n_features()
            )));
        }
        let mut out = fm.values().clone();
        for (row, mut out_row) in out.outer_iter_mut().enumerate() {
            let (m, s) = (self.mean[row], self.scale[row]);
            out_row.mapv_inplace(|v| (v - m) / s);
        }
        FeatureMatrix::new(out)
    }
}
