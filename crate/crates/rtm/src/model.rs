//! Marginalized dropout moments and the closed-form linear classifier.
//!
//! Training pretends every feature of every source sample is independently
//! zeroed with probability `p`, over infinitely many corrupted copies.
//! Rather than materializing copies, the expected moments have closed forms:
//!
//! ```text
//! cross  P = E[Y Z̃ᵀ] = (1-p) · Y Zᵀ                       (C x k)
//! scatter Q = E[Z̃ Z̃ᵀ]: Q_ab = (1-p)² [Z Zᵀ]_ab  (a ≠ b)   (k x k)
//!                        Q_aa = (1-p)  [Z Zᵀ]_aa
//! ```
//!
//! and the ridge system `W (Q + αI) = P` is solved directly, so training is
//! deterministic and costs one `k x k` factorization. `p = 0` recovers the
//! plain ridge baseline trained on uncorrupted data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::Array2;

use crate::dataset::{FeatureMatrix, LabelSet};
use crate::error::{Result, RtmError};
use crate::linalg;

/// Training hyper-parameters: dropout probability and ridge coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtmConfig {
    p: f64,
    alpha: f64,
}

impl RtmConfig {
    pub fn new(p: f64, alpha: f64) -> Result<Self> {
        validate_probability(p)?;
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(RtmError::Validation(format!(
                "alpha must be a positive real, got {alpha}"
            )));
        }
        Ok(RtmConfig { p, alpha })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

pub(crate) fn validate_probability(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(RtmError::Validation(format!(
            "dropout probability must lie in [0, 1), got {p}"
        )));
    }
    Ok(())
}

/// The two expectation matrices the closed-form solve consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPair {
    cross: Array2<f64>,
    scatter: Array2<f64>,
}

impl MomentPair {
    /// Pairs a `C x k` cross-moment with a `k x k` scatter. The scatter must
    /// be symmetric to within `1e-12` relative tolerance; positive
    /// semidefiniteness is the caller's contract and is only surfaced later,
    /// by the factorization of `scatter + αI`.
    pub fn new(cross: Array2<f64>, scatter: Array2<f64>) -> Result<Self> {
        if scatter.nrows() != scatter.ncols() {
            return Err(RtmError::Dimension(format!(
                "scatter must be square, got {}x{}",
                scatter.nrows(),
                scatter.ncols()
            )));
        }
        if cross.ncols() != scatter.nrows() {
            return Err(RtmError::Dimension(format!(
                "cross moment has {} columns but scatter is {}x{}",
                cross.ncols(),
                scatter.nrows(),
                scatter.ncols()
            )));
        }
        let scale = scatter.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..scatter.nrows() {
            for j in (i + 1)..scatter.ncols() {
                if (scatter[[i, j]] - scatter[[j, i]]).abs() > 1e-12 * scale {
                    return Err(RtmError::Validation(format!(
                        "scatter is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(MomentPair { cross, scatter })
    }

    pub fn cross(&self) -> &Array2<f64> {
        &self.cross
    }

    pub fn scatter(&self) -> &Array2<f64> {
        &self.scatter
    }
}

/// Where a model came from. Kept in memory only; the on-disk format carries
/// just the weights and hyper-parameters.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub task: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub unix_time: u64,
    /// Random generator used, if any randomness was involved.
    pub rng: Option<String>,
}

impl Provenance {
    fn now(n_samples: usize, n_features: usize, n_classes: usize, rng: Option<String>) -> Self {
        let unix_time = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Provenance {
            task: String::new(),
            n_samples,
            n_features,
            n_classes,
            unix_time,
            rng,
        }
    }
}

/// A trained `C x k` weight matrix plus the hyper-parameters it was trained
/// with. Prediction scores a sample `z` as `W z`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    weights: Array2<f64>,
    config: RtmConfig,
    provenance: Option<Provenance>,
}

impl LinearModel {
    pub(crate) fn from_training(
        weights: Array2<f64>,
        config: RtmConfig,
        provenance: Provenance,
    ) -> Self {
        LinearModel {
            weights,
            config,
            provenance: Some(provenance),
        }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn config(&self) -> &RtmConfig {
        &self.config
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    /// Renders the model in the `rtm-model v1` text format: a header line,
    /// a `C k p alpha` line, then one comma-separated row of weights per
    /// class at 17 significant digits. The rendering round-trips bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::from("rtm-model v1\n");
        let _ = writeln!(
            out,
            "{} {} {:.16e} {:.16e}",
            self.n_classes(),
            self.n_features(),
            self.config.p(),
            self.config.alpha()
        );
        for row in self.weights.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the `rtm-model v1` text format. The loaded model carries no
    /// provenance.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header != "rtm-model v1" {
            return Err(RtmError::Validation(format!(
                "unsupported model header {header:?}, expected \"rtm-model v1\""
            )));
        }
        let meta = lines.next().ok_or_else(|| {
            RtmError::Validation("model file is missing the C k p alpha line".into())
        })?;
        let fields: Vec<&str> = meta.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(RtmError::Validation(format!(
                "expected \"C k p alpha\", got {meta:?}"
            )));
        }
        let n_classes: usize = fields[0]
            .parse()
            .map_err(|_| RtmError::Validation(format!("invalid class count {:?}", fields[0])))?;
        let n_features: usize = fields[1]
            .parse()
            .map_err(|_| RtmError::Validation(format!("invalid feature count {:?}", fields[1])))?;
        let p: f64 = fields[2]
            .parse()
            .map_err(|_| RtmError::Validation(format!("invalid p {:?}", fields[2])))?;
        let alpha: f64 = fields[3]
            .parse()
            .map_err(|_| RtmError::Validation(format!("invalid alpha {:?}", fields[3])))?;
        let config = RtmConfig::new(p, alpha)?;

        let mut weights = Array2::zeros((n_classes, n_features));
        for c in 0..n_classes {
            let line = lines.next().ok_or_else(|| {
                RtmError::Validation(format!(
                    "model file ends after {c} of {n_classes} weight rows"
                ))
            })?;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != n_features {
                return Err(RtmError::Dimension(format!(
                    "weight row {c} has {} entries, expected {n_features}",
                    cells.len()
                )));
            }
            for (j, cell) in cells.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    RtmError::Validation(format!("invalid weight {cell:?} at row {c}, column {j}"))
                })?;
                if !v.is_finite() {
                    return Err(RtmError::Validation(format!(
                        "non-finite weight at row {c}, column {j}"
                    )));
                }
                weights[[c, j]] = v;
            }
        }
        if lines.next().is_some_and(|l| !l.trim().is_empty()) {
            return Err(RtmError::Validation(
                "model file has trailing content after the weight rows".into(),
            ));
        }
        Ok(LinearModel {
            weights,
            config,
            provenance: None,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| RtmError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| RtmError::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Expected label/feature cross-moment under dropout: `(1-p) · Y Zᵀ`.
pub fn cross_moment(features: &FeatureMatrix, labels: &LabelSet, p: f64) -> Result<Array2<f64>> {
    validate_probability(p)?;
    if features.n_samples() != labels.len() {
        return Err(RtmError::Dimension(format!(
            "{} samples but {} labels",
            features.n_samples(),
            labels.len()
        )));
    }
    let mut cross = labels.one_hot().dot(&features.values().t());
    cross.mapv_inplace(|v| (1.0 - p) * v);
    Ok(cross)
}

/// Expected corrupted scatter under dropout. Off-diagonal entries of `Z Zᵀ`
/// pick up `(1-p)²` (two independent survivals), diagonal entries `(1-p)`
/// (a feature always survives jointly with itself). Symmetric by
/// construction: the upper triangle is computed once and mirrored.
pub fn second_moment(features: &FeatureMatrix, p: f64) -> Result<Array2<f64>> {
    validate_probability(p)?;
    let z = features.values();
    let raw = z.dot(&z.t());
    let keep = 1.0 - p;
    let k = raw.nrows();
    let mut out = Array2::zeros((k, k));
    for i in 0..k {
        out[[i, i]] = keep * raw[[i, i]];
        for j in (i + 1)..k {
            let v = keep * keep * raw[[i, j]];
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok(out)
}

/// Solves `W (Q + αI) = P` for `W` by Cholesky factorization of `Q + αI`.
///
/// The contract is the residual, not the method: for `P ≠ 0` the relative
/// residual `‖W (Q + αI) - P‖_F / ‖P‖_F` stays below `1e-8`, and `P = 0`
/// yields exactly `W = 0`.
pub fn solve_weights(
    cross: &Array2<f64>,
    scatter: &Array2<f64>,
    alpha: f64,
) -> Result<Array2<f64>> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(RtmError::Validation(format!(
            "alpha must be a positive real, got {alpha}"
        )));
    }
    // Shape and symmetry checks shared with MomentPair.
    let moments = MomentPair::new(cross.clone(), scatter.clone())?;
    let k = moments.scatter().nrows();

    let mut system = moments.scatter().clone();
    for i in 0..k {
        system[[i, i]] += alpha;
    }
    let factor = linalg::cholesky(&system).map_err(|minor| RtmError::Numeric { minor })?;

    let mut weights = Array2::zeros((moments.cross().nrows(), k));
    for (c, row) in moments.cross().rows().into_iter().enumerate() {
        let x = linalg::solve_with_factor(&factor, row);
        weights.row_mut(c).assign(&x);
    }
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(RtmError::Validation(
            "solved weights contain non-finite entries".into(),
        ));
    }
    Ok(weights)
}

/// Trains the marginalized-dropout classifier: cross and second moments in
/// closed form, then one regularized solve. Deterministic; no randomness
/// anywhere on this path.
pub fn train_rtm(
    features: &FeatureMatrix,
    labels: &LabelSet,
    config: RtmConfig,
) -> Result<LinearModel> {
    let cross = cross_moment(features, labels, config.p())?;
    let scatter = second_moment(features, config.p())?;
    let weights = solve_weights(&cross, &scatter, config.alpha())?;
    let provenance = Provenance::now(
        features.n_samples(),
        features.n_features(),
        labels.n_classes(),
        None,
    );
    Ok(LinearModel::from_training(weights, config, provenance))
}

/// Trains the uncorrupted ridge baseline `W = (Y Zᵀ)(Z Zᵀ + αI)⁻¹`, i.e.
/// the same model `train_rtm` produces at `p = 0`.
pub fn train_ridge(features: &FeatureMatrix, labels: &LabelSet, alpha: f64) -> Result<LinearModel> {
    let config = RtmConfig::new(0.0, alpha)?;
    let cross = cross_moment(features, labels, 0.0)?;
    let scatter = second_moment(features, 0.0)?;
    let weights = solve_weights(&cross, &scatter, alpha)?;
    let provenance = Provenance::now(
        features.n_samples(),
        features.n_features(),
        labels.n_classes(),
        None,
    );
    Ok(LinearModel::from_training(weights, config, provenance))
}

/// Class scores (`C x n`) and argmax class ids for each sample. Ties go to
/// the lowest class index.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub class_ids: Vec<usize>,
    pub scores: Array2<f64>,
}

pub fn predict(model: &LinearModel, features: &FeatureMatrix) -> Result<Prediction> {
    if features.n_features() != model.n_features() {
        return Err(RtmError::Dimension(format!(
            "model expects {} features, got {}",
            model.n_features(),
            features.n_features()
        )));
    }
    let scores = model.weights().dot(features.values());
    let class_ids = scores
        .columns()
        .into_iter()
        .map(|col| {
            let mut best = 0usize;
            for (c, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(Prediction { class_ids, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use ndarray::array;

    fn fm(values: Array2<f64>) -> FeatureMatrix {
        FeatureMatrix::new(values).unwrap()
    }

    /// Average of Y z̃ᵀ over every dropout mask of a single sample, weighted
    /// by exact Bernoulli probabilities. Independent of the closed form.
    fn hand_cross_single_sample(z: &[f64], y_col: &[f64], p: f64) -> Array2<f64> {
        let k = z.len();
        let mut acc = Array2::zeros((y_col.len(), k));
        for mask in 0u32..(1 << k) {
            let mut weight = 1.0;
            for bit in 0..k {
                weight *= if mask >> bit & 1 == 1 { 1.0 - p } else { p };
            }
            for (c, &yc) in y_col.iter().enumerate() {
                for (a, &za) in z.iter().enumerate() {
                    let kept = mask >> a & 1 == 1;
                    if kept {
                        acc[[c, a]] += weight * yc * za;
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn cross_moment_matches_mask_average() {
        // k=2, n=1, C=2, p=0.5: averaging over the 4 equiprobable masks.
        let z = fm(array![[1.0], [2.0]]);
        let y = LabelSet::new(vec![0], 2).unwrap();
        let got = cross_moment(&z, &y, 0.5).unwrap();
        assert_eq!(got, array![[0.5, 1.0], [0.0, 0.0]]);

        let oracle = hand_cross_single_sample(&[1.0, 2.0], &[1.0, 0.0], 0.5);
        for (g, o) in got.iter().zip(oracle.iter()) {
            assert!((g - o).abs() < 1e-15, "{g} vs {o}");
        }
    }

    #[test]
    fn cross_moment_at_p_zero_is_the_plain_product() {
        let z = fm(array![[1.0, -2.0], [0.5, 3.0]]);
        let y = LabelSet::new(vec![1, 0], 2).unwrap();
        let got = cross_moment(&z, &y, 0.0).unwrap();
        assert_eq!(got, y.one_hot().dot(&z.values().t()));
    }

    #[test]
    fn cross_moment_scales_linearly_in_keep_probability() {
        let z = fm(array![[1.0], [2.0]]);
        let y = LabelSet::new(vec![0], 2).unwrap();
        let got = cross_moment(&z, &y, 0.99).unwrap();
        let base = y.one_hot().dot(&z.values().t());
        for (g, b) in got.iter().zip(base.iter()) {
            assert!((g - 0.01 * b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn cross_moment_rejects_sample_count_mismatch() {
        let z = fm(array![[1.0, 2.0]]);
        let y = LabelSet::new(vec![0], 2).unwrap();
        let err = cross_moment(&z, &y, 0.1).unwrap_err();
        assert!(matches!(err, RtmError::Dimension(_)), "{err}");
    }

    #[test]
    fn second_moment_matches_mask_average() {
        // Same 4-mask enumeration: diagonal keeps (1-p), off-diagonal (1-p)^2.
        let z = fm(array![[1.0], [2.0]]);
        let got = second_moment(&z, 0.5).unwrap();
        assert_eq!(got, array![[0.5, 0.5], [0.5, 2.0]]);
    }

    #[test]
    fn second_moment_at_p_zero_is_the_scatter() {
        let z = fm(array![[1.0, -2.0], [0.5, 3.0]]);
        let got = second_moment(&z, 0.0).unwrap();
        assert_eq!(got, z.values().dot(&z.values().t()));
    }

    #[test]
    fn second_moment_single_feature() {
        let z = fm(array![[1.0]]);
        let got = second_moment(&z, 0.3).unwrap();
        assert_eq!(got, array![[0.7]]);
    }

    fn assert_close(got: &Array2<f64>, want: &Array2<f64>, tol: f64) {
        assert_eq!(got.dim(), want.dim());
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= tol, "{got} vs {want}");
        }
    }

    #[test]
    fn solve_weights_scaled_identity() {
        let p = array![[1.0, 0.0]];
        let q = Array2::zeros((2, 2));
        let w = solve_weights(&p, &q, 2.0).unwrap();
        assert_close(&w, &array![[0.5, 0.0]], 1e-15);
    }

    #[test]
    fn solve_weights_zero_numerator_gives_zero() {
        let p = Array2::zeros((3, 2));
        let q = array![[2.0, 1.0], [1.0, 2.0]];
        let w = solve_weights(&p, &q, 0.5).unwrap();
        assert_eq!(w, Array2::<f64>::zeros((3, 2)));
    }

    #[test]
    fn solve_weights_diagonal_system() {
        let p = array![[1.0, 1.0]];
        let q = array![[1.0, 0.0], [0.0, 3.0]];
        let w = solve_weights(&p, &q, 1.0).unwrap();
        assert_close(&w, &array![[0.5, 0.25]], 1e-15);
    }

    #[test]
    fn solve_weights_names_the_failing_minor() {
        // Symmetric but indefinite once alpha is too small to rescue it.
        let p = array![[1.0, 1.0]];
        let q = array![[0.0, 2.0], [2.0, 0.0]];
        match solve_weights(&p, &q, 1.0).unwrap_err() {
            RtmError::Numeric { minor } => assert_eq!(minor, 2),
            other => panic!("expected numeric error, got {other}"),
        }
    }

    #[test]
    fn solve_weights_rejects_asymmetric_scatter() {
        let p = array![[1.0, 1.0]];
        let q = array![[1.0, 0.5], [0.0, 1.0]];
        let err = solve_weights(&p, &q, 1.0).unwrap_err();
        assert!(matches!(err, RtmError::Validation(_)), "{err}");
    }

    #[test]
    fn ridge_scalar_system() {
        // k=1, n=2: W = (Y Zᵀ)(Z Zᵀ + 1)⁻¹ = [[1], [-1]] / 3.
        let z = fm(array![[1.0, -1.0]]);
        let y = LabelSet::new(vec![0, 1], 2).unwrap();
        let model = train_ridge(&z, &y, 1.0).unwrap();
        let w = model.weights();
        assert!((w[[0, 0]] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w[[1, 0]] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ridge_weights_vanish_under_huge_regularization() {
        let z = fm(array![[1.0, -1.0], [2.0, 0.5]]);
        let y = LabelSet::new(vec![0, 1], 2).unwrap();
        let model = train_ridge(&z, &y, 1e12).unwrap();
        assert!(frobenius(model.weights()) < 1e-10);
    }

    #[test]
    fn rtm_at_p_zero_equals_ridge_exactly() {
        let z = fm(array![[1.0, -2.0, 0.3], [0.5, 3.0, -1.1], [2.0, 2.0, 2.0]]);
        let y = LabelSet::new(vec![0, 1, 0], 2).unwrap();
        let rtm = train_rtm(&z, &y, RtmConfig::new(0.0, 0.7).unwrap()).unwrap();
        let ridge = train_ridge(&z, &y, 0.7).unwrap();
        assert_eq!(rtm.weights(), ridge.weights());
    }

    #[test]
    fn weight_norm_shrinks_as_dropout_grows() {
        let z = fm(array![[1.0, -2.0, 0.3], [0.5, 3.0, -1.1]]);
        let y = LabelSet::new(vec![0, 1, 0], 2).unwrap();
        let norm = |p: f64| {
            let model = train_rtm(&z, &y, RtmConfig::new(p, 1.0).unwrap()).unwrap();
            frobenius(model.weights())
        };
        let at_zero = norm(0.0);
        let at_half = norm(0.5);
        let at_high = norm(0.99);
        let near_one = norm(0.999);
        assert!(at_half < at_zero);
        assert!(at_high < at_half);
        assert!(near_one < at_high);
        assert!(near_one < 0.05 * at_zero);
    }

    #[test]
    fn training_is_deterministic() {
        let z = fm(array![[1.0, -2.0, 0.3], [0.5, 3.0, -1.1]]);
        let y = LabelSet::new(vec![0, 1, 1], 2).unwrap();
        let config = RtmConfig::new(0.35, 2.5).unwrap();
        let a = train_rtm(&z, &y, config).unwrap();
        let b = train_rtm(&z, &y, config).unwrap();
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn predict_identity_weights() {
        let model = LinearModel {
            weights: array![[1.0, 0.0], [0.0, 1.0]],
            config: RtmConfig::new(0.0, 1.0).unwrap(),
            provenance: None,
        };
        let z = fm(array![[3.0], [-1.0]]);
        let pred = predict(&model, &z).unwrap();
        assert_eq!(pred.class_ids, vec![0]);
        assert_eq!(pred.scores, array![[3.0], [-1.0]]);
    }

    #[test]
    fn predict_breaks_ties_toward_the_lowest_class() {
        let model = LinearModel {
            weights: array![[1.0, 0.0], [1.0, 0.0]],
            config: RtmConfig::new(0.0, 1.0).unwrap(),
            provenance: None,
        };
        let z = fm(array![[5.0], [2.0]]);
        let pred = predict(&model, &z).unwrap();
        assert_eq!(pred.scores, array![[5.0], [5.0]]);
        assert_eq!(pred.class_ids, vec![0]);
    }

    #[test]
    fn predict_zero_weights_yields_class_zero() {
        let model = LinearModel {
            weights: Array2::zeros((3, 2)),
            config: RtmConfig::new(0.0, 1.0).unwrap(),
            provenance: None,
        };
        let z = fm(array![[1.0, -5.0], [2.0, 4.0]]);
        let pred = predict(&model, &z).unwrap();
        assert_eq!(pred.class_ids, vec![0, 0]);
    }

    #[test]
    fn predict_rejects_feature_count_mismatch() {
        let model = LinearModel {
            weights: Array2::zeros((2, 3)),
            config: RtmConfig::new(0.0, 1.0).unwrap(),
            provenance: None,
        };
        let z = fm(array![[1.0], [2.0]]);
        assert!(matches!(
            predict(&model, &z).unwrap_err(),
            RtmError::Dimension(_)
        ));
    }

    #[test]
    fn model_text_round_trip_is_bit_exact() {
        let z = fm(array![[1.0, -2.0, 0.3], [0.5, 3.0, -1.1]]);
        let y = LabelSet::new(vec![0, 1, 1], 2).unwrap();
        let model = train_rtm(&z, &y, RtmConfig::new(0.35, 2.5).unwrap()).unwrap();

        let text = model.to_text();
        let reloaded = LinearModel::from_text(&text).unwrap();
        assert_eq!(reloaded.weights(), model.weights());
        assert_eq!(reloaded.config(), model.config());
        assert_eq!(reloaded.to_text(), text);
    }

    #[test]
    fn model_parser_rejects_malformed_input() {
        assert!(LinearModel::from_text("not a model\n").is_err());
        assert!(LinearModel::from_text("rtm-model v1\n2 2\n").is_err());
        // Row with the wrong number of entries.
        let bad = "rtm-model v1\n1 2 0.0e0 1.0e0\n1.0\n";
        assert!(matches!(
            LinearModel::from_text(bad).unwrap_err(),
            RtmError::Dimension(_)
        ));
        // p outside its domain.
        let bad = "rtm-model v1\n1 1 1.5e0 1.0e0\n1.0\n";
        assert!(LinearModel::from_text(bad).is_err());
    }

    #[test]
    fn config_validates_domains() {
        assert!(RtmConfig::new(0.0, 1.0).is_ok());
        assert!(RtmConfig::new(0.95, 1e-9).is_ok());
        assert!(RtmConfig::new(1.0, 1.0).is_err());
        assert!(RtmConfig::new(-0.1, 1.0).is_err());
        assert!(RtmConfig::new(0.5, 0.0).is_err());
        assert!(RtmConfig::new(0.5, -1.0).is_err());
        assert!(RtmConfig::new(f64::NAN, 1.0).is_err());
    }
}
