//! Text loaders and writers for the dense and sparse on-disk formats.
//!
//! Dense features: UTF-8, one sample per line, comma-separated reals; an
//! optional first line starting with `#` is skipped. Labels: one base-10
//! integer per line. Sparse: `<label> <index>:<value> ...` per line with
//! 1-based, strictly increasing indices; absent indices are zero.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{FeatureMatrix, LabelSet};
use crate::error::{Result, RtmError};

/// Reads a dense feature file (and, if given, its label file) into the
/// column-sample layout. File rows are samples, so the matrix is transposed
/// on the way in: row `i` of the file becomes column `i` in memory.
pub fn load_dense(
    features_path: impl AsRef<Path>,
    labels_path: Option<&Path>,
) -> Result<(FeatureMatrix, Option<LabelSet>)> {
    let features_path = features_path.as_ref();
    let text = fs::read_to_string(features_path).map_err(|e| RtmError::io(features_path, e))?;

    let mut lines = text.lines().peekable();
    if lines.peek().is_some_and(|l| l.starts_with('#')) {
        lines.next();
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (idx, line) in lines.enumerate() {
        let row_no = idx + 1;
        let mut row = Vec::with_capacity(width);
        for cell in line.split(',') {
            let cell = cell.trim();
            let value: f64 = cell.parse().map_err(|_| {
                RtmError::parse(features_path, row_no, format!("invalid number {cell:?}"))
            })?;
            if !value.is_finite() {
                return Err(RtmError::Validation(format!(
                    "{}: row {row_no}: non-finite value {value}",
                    features_path.display()
                )));
            }
            row.push(value);
        }
        if row_no == 1 {
            width = row.len();
        } else if row.len() != width {
            return Err(RtmError::format(
                features_path,
                row_no,
                format!("expected {width} values, found {}", row.len()),
            ));
        }
        rows.push(row);
    }

    if rows.is_empty() || width == 0 {
        return Err(RtmError::Validation(format!(
            "{}: no samples found",
            features_path.display()
        )));
    }

    let mut values = Array2::zeros((width, rows.len()));
    for (sample, row) in rows.iter().enumerate() {
        for (feature, &v) in row.iter().enumerate() {
            values[[feature, sample]] = v;
        }
    }
    let features = FeatureMatrix::new(values)?;

    let labels = match labels_path {
        Some(path) => {
            let labels = load_labels(path)?;
            if labels.len() != features.n_samples() {
                return Err(RtmError::Dimension(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    features.n_samples()
                )));
            }
            Some(labels)
        }
        None => None,
    };

    Ok((features, labels))
}

/// Reads one class id per line. Ids must be non-negative; the class count is
/// inferred as `max id + 1`.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| RtmError::io(path, e))?;

    let mut ids = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row_no = idx + 1;
        let raw: i64 = line.trim().parse().map_err(|_| {
            RtmError::parse(path, row_no, format!("invalid label {:?}", line.trim()))
        })?;
        if raw < 0 {
            return Err(RtmError::Validation(format!(
                "{}: row {row_no}: negative class id {raw}",
                path.display()
            )));
        }
        ids.push(raw as usize);
    }
    if ids.is_empty() {
        return Err(RtmError::Validation(format!(
            "{}: no labels found",
            path.display()
        )));
    }
    let n_classes = ids.iter().max().copied().unwrap_or(0) + 1;
    LabelSet::new(ids, n_classes)
}

/// Writes a feature matrix in the dense format, one sample per row, with 17
/// significant digits so reloading reproduces every value bit for bit.
pub fn save_dense(features: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dense_to_string(features)).map_err(|e| RtmError::io(path, e))
}

pub(crate) fn dense_to_string(features: &FeatureMatrix) -> String {
    let values = features.values();
    let mut out = String::new();
    for sample in values.columns() {
        let row: Vec<String> = sample.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// A sparse file densified into the in-memory model, plus the table mapping
/// each contiguous class id back to the label written in the file.
#[derive(Debug, Clone)]
pub struct SparseDataset {
    pub features: FeatureMatrix,
    pub labels: LabelSet,
    /// `original_labels[new_id]` is the file label remapped to `new_id`,
    /// in first-occurrence order.
    pub original_labels: Vec<i64>,
}

/// Reads a sparse file. The feature dimensionality is the maximum index seen
/// anywhere in the file; absent indices are zero. Labels are remapped to
/// contiguous ids in `[0, C)` preserving first-occurrence order.
pub fn load_sparse(path: impl AsRef<Path>) -> Result<SparseDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| RtmError::io(path, e))?;

    let mut raw_labels: Vec<i64> = Vec::new();
    let mut samples: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (idx, line) in text.lines().enumerate() {
        let row_no = idx + 1;
        let mut tokens = line.split_whitespace();
        let label_token = tokens
            .next()
            .ok_or_else(|| RtmError::format(path, row_no, "empty line".to_string()))?;
        let label: i64 = label_token
            .parse()
            .map_err(|_| RtmError::parse(path, row_no, format!("invalid label {label_token:?}")))?;

        let mut entries = Vec::new();
        let mut prev_index = 0usize;
        for token in tokens {
            let (index_str, value_str) = token.split_once(':').ok_or_else(|| {
                RtmError::format(
                    path,
                    row_no,
                    format!("expected index:value, found {token:?}"),
                )
            })?;
            let index: usize = index_str.parse().map_err(|_| {
                RtmError::parse(path, row_no, format!("invalid index {index_str:?}"))
            })?;
            if index < 1 {
                return Err(RtmError::format(
                    path,
                    row_no,
                    "index must be >= 1".to_string(),
                ));
            }
            if index <= prev_index {
                return Err(RtmError::format(
                    path,
                    row_no,
                    format!("indices must be strictly increasing, {index} follows {prev_index}"),
                ));
            }
            let value: f64 = value_str.parse().map_err(|_| {
                RtmError::parse(path, row_no, format!("invalid value {value_str:?}"))
            })?;
            if !value.is_finite() {
                return Err(RtmError::Validation(format!(
                    "{}: row {row_no}: non-finite value {value}",
                    path.display()
                )));
            }
            prev_index = index;
            max_index = max_index.max(index);
            entries.push((index - 1, value));
        }
        raw_labels.push(label);
        samples.push(entries);
    }

    if samples.is_empty() {
        return Err(RtmError::Validation(format!(
            "{}: no samples found",
            path.display()
        )));
    }
    if max_index == 0 {
        return Err(RtmError::Validation(format!(
            "{}: no feature indices found",
            path.display()
        )));
    }

    let mut values = Array2::zeros((max_index, samples.len()));
    for (sample, entries) in samples.iter().enumerate() {
        for &(feature, v) in entries {
            values[[feature, sample]] = v;
        }
    }
    let features = FeatureMatrix::new(values)?;

    // Remap labels to contiguous ids in first-occurrence order.
    let mut original_labels: Vec<i64> = Vec::new();
    let mut ids = Vec::with_capacity(raw_labels.len());
    for label in raw_labels {
        let id = match original_labels.iter().position(|&l| l == label) {
            Some(id) => id,
            None => {
                original_labels.push(label);
                original_labels.len() - 1
            }
        };
        ids.push(id);
    }
    let labels = LabelSet::new(ids, original_labels.len())?;

    Ok(SparseDataset {
        features,
        labels,
        original_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;
    use tempfile::NamedTempFile;

    fn write_temp(contents: &str) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn dense_rows_become_columns() {
        let f = write_temp("1.0,2.0\n3.0,4.0\n");
        let (features, labels) = load_dense(f.path(), None).unwrap();
        assert_eq!(features.values(), &array![[1.0, 3.0], [2.0, 4.0]]);
        assert!(labels.is_none());
    }

    #[test]
    fn dense_skips_leading_comment() {
        let f = write_temp("# feature dump\n1.0,2.0\n");
        let (features, _) = load_dense(f.path(), None).unwrap();
        assert_eq!(features.n_features(), 2);
        assert_eq!(features.n_samples(), 1);
    }

    #[test]
    fn ragged_rows_name_the_offending_row() {
        let f = write_temp("1,2,3\n4,5\n");
        let err = load_dense(f.path(), None).unwrap_err();
        match err {
            RtmError::Format { row, .. } => assert_eq!(row, 2),
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn non_numeric_cell_is_a_parse_error() {
        let f = write_temp("1,a\n");
        let err = load_dense(f.path(), None).unwrap_err();
        assert!(matches!(err, RtmError::Parse { .. }), "{err}");
    }

    #[test]
    fn non_finite_cell_is_a_validation_error() {
        let f = write_temp("1,inf\n");
        let err = load_dense(f.path(), None).unwrap_err();
        assert!(matches!(err, RtmError::Validation(_)), "{err}");
    }

    #[test]
    fn label_count_mismatch_is_a_dimension_error() {
        let features = write_temp("1,2\n3,4\n");
        let labels = write_temp("0\n1\n1\n");
        let err = load_dense(features.path(), Some(labels.path())).unwrap_err();
        assert!(matches!(err, RtmError::Dimension(_)), "{err}");
    }

    #[test]
    fn labels_load_with_inferred_class_count() {
        let features = write_temp("1,2\n3,4\n");
        let labels = write_temp("0\n2\n");
        let (_, labels) = load_dense(features.path(), Some(labels.path())).unwrap();
        let labels = labels.unwrap();
        assert_eq!(labels.class_ids(), &[0, 2]);
        assert_eq!(labels.n_classes(), 3);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_dense("/nonexistent/features.csv", None).unwrap_err();
        assert!(matches!(err, RtmError::Io { .. }), "{err}");
    }

    #[test]
    fn dense_round_trip_is_exact() {
        let original = FeatureMatrix::new(array![
            [
                1.0,
                -0.333333333333333314829616256247390992939472198486328125
            ],
            [1e-300, 12345.6789012345678]
        ])
        .unwrap();
        let f = NamedTempFile::new().unwrap();
        save_dense(&original, f.path()).unwrap();
        let (reloaded, _) = load_dense(f.path(), None).unwrap();
        assert_eq!(reloaded.values(), original.values());
    }

    #[test]
    fn sparse_single_line() {
        let f = write_temp("1 1:0.5 3:2.0\n");
        let ds = load_sparse(f.path()).unwrap();
        assert_eq!(ds.features.values(), &array![[0.5], [0.0], [2.0]]);
        assert_eq!(ds.labels.class_ids(), &[0]);
        assert_eq!(ds.original_labels, vec![1]);
    }

    #[test]
    fn sparse_remaps_labels_in_first_occurrence_order() {
        let f = write_temp("0 2:1.0\n1 1:1.0\n");
        let ds = load_sparse(f.path()).unwrap();
        assert_eq!(ds.features.values(), &array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(ds.labels.class_ids(), &[0, 1]);
        assert_eq!(ds.original_labels, vec![0, 1]);
    }

    #[test]
    fn sparse_rejects_decreasing_indices() {
        let f = write_temp("1 3:1 2:1\n");
        let err = load_sparse(f.path()).unwrap_err();
        assert!(matches!(err, RtmError::Format { .. }), "{err}");
    }

    #[test]
    fn sparse_rejects_zero_index() {
        let f = write_temp("1 0:1\n");
        let err = load_sparse(f.path()).unwrap_err();
        assert!(matches!(err, RtmError::Format { .. }), "{err}");
    }

    #[test]
    fn sparse_agrees_with_hand_densified_fixture() {
        // Hand-densified: 3 samples, max index 4.
        //   "2 1:1.5 4:-2"    -> [1.5, 0, 0, -2], label 2 -> id 0
        //   "7 2:0.25"        -> [0, 0.25, 0, 0], label 7 -> id 1
        //   "2 3:1 4:1"       -> [0, 0, 1, 1],    label 2 -> id 0
        let f = write_temp("2 1:1.5 4:-2\n7 2:0.25\n2 3:1 4:1\n");
        let ds = load_sparse(f.path()).unwrap();
        let want = array![
            [1.5, 0.0, 0.0],
            [0.0, 0.25, 0.0],
            [0.0, 0.0, 1.0],
            [-2.0, 0.0, 1.0]
        ];
        assert_eq!(ds.features.values(), &want);
        assert_eq!(ds.labels.class_ids(), &[0, 1, 0]);
        assert_eq!(ds.original_labels, vec![2, 7]);
    }
}
