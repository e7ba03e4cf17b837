//! Ground-truth counterparts to the closed form: explicit Monte-Carlo
//! corrupted training and exact dropout-mask enumeration.
//!
//! Both exist to validate [`crate::model`]: the Monte-Carlo estimate must
//! drift toward the marginalized weights as the number of corrupted copies
//! grows, and the enumeration must agree with the closed-form moments to
//! near machine precision on small problems.
//!
//! # Randomness
//!
//! All corruption randomness comes from ChaCha8 keyed by the run seed.
//! Column `i` of corrupted copy `j` draws its mask bits from stream
//! `j * n + i`, so every (copy, column) pair is reproducible in isolation
//! and accumulated results do not depend on evaluation order.

use ndarray::linalg::general_mat_mul;
use ndarray::Array2;
use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{FeatureMatrix, LabelSet};
use crate::error::{Result, RtmError};
use crate::linalg::frobenius;
use crate::model::{self, validate_probability, LinearModel, MomentPair, RtmConfig};

/// Parameters of one explicit corruption experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionRun {
    copies: u64,
    seed: u64,
    p: f64,
}

impl CorruptionRun {
    pub fn new(copies: u64, seed: u64, p: f64) -> Result<Self> {
        if copies == 0 {
            return Err(RtmError::Validation(
                "a corruption run needs at least one copy".into(),
            ));
        }
        validate_probability(p)?;
        Ok(CorruptionRun { copies, seed, p })
    }

    pub fn copies(&self) -> u64 {
        self.copies
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Applies one dropout corruption: every entry is independently zeroed with
/// probability `p` and kept unchanged otherwise. Equivalent to
/// [`corrupt_copy`] with copy index 0.
pub fn corrupt_dropout(features: &FeatureMatrix, p: f64, seed: u64) -> Result<FeatureMatrix> {
    corrupt_copy(features, p, seed, 0)
}

/// Applies the `copy`-th dropout corruption of `features` under `seed`.
/// Deterministic in (seed, copy, matrix shape, p); the values themselves do
/// not influence which entries are dropped.
pub fn corrupt_copy(
    features: &FeatureMatrix,
    p: f64,
    seed: u64,
    copy: u64,
) -> Result<FeatureMatrix> {
    validate_probability(p)?;
    let n = features.n_samples() as u64;
    let drop = Bernoulli::new(p).expect("p is validated");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = features.values().clone();
    for (i, mut column) in values.columns_mut().into_iter().enumerate() {
        let stream = copy
            .checked_mul(n)
            .and_then(|base| base.checked_add(i as u64))
            .ok_or_else(|| {
                RtmError::Capacity(format!(
                    "stream index overflow for copy {copy} of {n} columns"
                ))
            })?;
        // Same state as a freshly keyed generator on this stream, without
        // rerunning the key schedule per column.
        rng.set_stream(stream);
        rng.set_word_pos(0);
        for value in column.iter_mut() {
            if drop.sample(&mut rng) {
                *value = 0.0;
            }
        }
    }
    Ok(FeatureMatrix::new(values).expect("zeroing entries preserves validity"))
}

/// Cross and scatter moments averaged over `copies` explicit corruptions.
/// One corrupted copy is held in memory at a time.
fn accumulate_moments(
    features: &FeatureMatrix,
    one_hot: &Array2<f64>,
    p: f64,
    seed: u64,
    copies: u64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let k = features.n_features();
    let mut cross = Array2::zeros((one_hot.nrows(), k));
    let mut scatter = Array2::zeros((k, k));
    for copy in 0..copies {
        let corrupted = corrupt_copy(features, p, seed, copy)?;
        let z = corrupted.values();
        general_mat_mul(1.0, one_hot, &z.t(), 1.0, &mut cross);
        general_mat_mul(1.0, z, &z.t(), 1.0, &mut scatter);
    }
    let scale = 1.0 / copies as f64;
    cross.mapv_inplace(|v| v * scale);
    scatter.mapv_inplace(|v| v * scale);
    Ok((cross, mirror_upper(scatter)))
}

/// Copies the upper triangle onto the lower one so downstream symmetry
/// checks never trip on last-bit asymmetry from the accumulation.
fn mirror_upper(mut m: Array2<f64>) -> Array2<f64> {
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            m[[j, i]] = m[[i, j]];
        }
    }
    m
}

/// Trains on `run.copies` explicit dropout corruptions of the source data,
/// with labels repeated per copy: the weights solve the same regularized
/// system as the closed form but with the per-copy average of `Y Z̃ᵀ` and
/// `Z̃ Z̃ᵀ` in place of their expectations. As the copy count grows this
/// converges to [`model::train_rtm`].
pub fn train_mc(
    features: &FeatureMatrix,
    labels: &LabelSet,
    config: RtmConfig,
    run: CorruptionRun,
) -> Result<LinearModel> {
    if run.p() != config.p() {
        return Err(RtmError::Validation(format!(
            "corruption run has p = {} but the training config has p = {}",
            run.p(),
            config.p()
        )));
    }
    if features.n_samples() != labels.len() {
        return Err(RtmError::Dimension(format!(
            "{} samples but {} labels",
            features.n_samples(),
            labels.len()
        )));
    }
    let one_hot = labels.one_hot();
    let (cross, scatter) =
        accumulate_moments(features, &one_hot, config.p(), run.seed(), run.copies())?;
    let weights = model::solve_weights(&cross, &scatter, config.alpha())?;
    let provenance = model::Provenance {
        task: String::new(),
        n_samples: features.n_samples(),
        n_features: features.n_features(),
        n_classes: labels.n_classes(),
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        rng: Some(format!(
            "chacha8 seed={} stream=copy*n+column copies={}",
            run.seed(),
            run.copies()
        )),
    };
    Ok(LinearModel::from_training(weights, config, provenance))
}

/// Exact expectations of `Y Z̃ᵀ` and `Z̃ Z̃ᵀ` by brute force: every one of
/// the `2^k` dropout masks is applied to the whole matrix and weighted by
/// `p^(dropped) (1-p)^(kept)`. Capped at `k <= 20`.
pub fn enumerate_expectation(
    features: &FeatureMatrix,
    labels: &LabelSet,
    p: f64,
) -> Result<MomentPair> {
    validate_probability(p)?;
    if features.n_samples() != labels.len() {
        return Err(RtmError::Dimension(format!(
            "{} samples but {} labels",
            features.n_samples(),
            labels.len()
        )));
    }
    let k = features.n_features();
    if k > 20 {
        return Err(RtmError::Capacity(format!(
            "exact enumeration is limited to 20 features, got {k}"
        )));
    }

    let one_hot = labels.one_hot();
    let mut cross = Array2::zeros((labels.n_classes(), k));
    let mut scatter = Array2::zeros((k, k));
    let mut masked = Array2::zeros(features.values().raw_dim());

    for mask in 0u32..(1u32 << k) {
        let kept = mask.count_ones() as i32;
        let weight = p.powi(k as i32 - kept) * (1.0 - p).powi(kept);
        if weight == 0.0 {
            continue;
        }
        masked.assign(features.values());
        for feature in 0..k {
            if mask >> feature & 1 == 0 {
                masked.row_mut(feature).fill(0.0);
            }
        }
        general_mat_mul(weight, &one_hot, &masked.t(), 1.0, &mut cross);
        general_mat_mul(weight, &masked, &masked.t(), 1.0, &mut scatter);
    }

    MomentPair::new(cross, mirror_upper(scatter))
}

/// One row of the Monte-Carlo convergence report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub copies: u64,
    pub relative_error: f64,
}

/// Relative Frobenius distance between the Monte-Carlo weights and the
/// marginalized weights, snapshotted at each requested copy count. The
/// stream-per-(copy, column) seeding makes each snapshot identical to an
/// independent [`train_mc`] run with the same seed and that copy count.
pub fn convergence_table(
    features: &FeatureMatrix,
    labels: &LabelSet,
    config: RtmConfig,
    seed: u64,
    copy_counts: &[u64],
) -> Result<Vec<ConvergencePoint>> {
    if copy_counts.is_empty() {
        return Err(RtmError::Validation("copy count list is empty".into()));
    }
    if copy_counts[0] == 0 {
        return Err(RtmError::Validation(
            "copy counts must be at least 1".into(),
        ));
    }
    if copy_counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RtmError::Validation(
            "copy counts must be strictly increasing".into(),
        ));
    }

    let reference = model::train_rtm(features, labels, config)?;
    let reference_norm = frobenius(reference.weights());
    if reference_norm == 0.0 {
        return Err(RtmError::Validation(
            "marginalized weights are zero; relative error is undefined".into(),
        ));
    }

    let one_hot = labels.one_hot();
    let k = features.n_features();
    let mut cross_sum = Array2::zeros((labels.n_classes(), k));
    let mut scatter_sum = Array2::zeros((k, k));
    let mut table = Vec::with_capacity(copy_counts.len());
    let mut done = 0u64;

    for &target in copy_counts {
        for copy in done..target {
            let corrupted = corrupt_copy(features, config.p(), seed, copy)?;
            let z = corrupted.values();
            general_mat_mul(1.0, &one_hot, &z.t(), 1.0, &mut cross_sum);
            general_mat_mul(1.0, z, &z.t(), 1.0, &mut scatter_sum);
        }
        done = target;

        let scale = 1.0 / target as f64;
        let cross = cross_sum.mapv(|v| v * scale);
        let scatter = mirror_upper(scatter_sum.mapv(|v| v * scale));
        let weights = model::solve_weights(&cross, &scatter, config.alpha())?;
        let diff = &weights - reference.weights();
        table.push(ConvergencePoint {
            copies: target,
            relative_error: frobenius(&diff) / reference_norm,
        });
    }
    Ok(table)
}
