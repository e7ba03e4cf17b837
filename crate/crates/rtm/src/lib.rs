//! Linear classification trained as if on infinitely many dropout-corrupted
//! copies of the training data, in closed form.
//!
//! The classifier scores a sample `z` as `W z` and is fit by ridge
//! regression against one-hot labels. Instead of materializing corrupted
//! copies, training plugs the expected corruption moments into the normal
//! equations — see [`model`] for the formulas — so the whole fit is one
//! `k x k` factorization, deterministic, with `p = 0` recovering plain
//! ridge. Two independent oracles back the closed form: explicit seeded
//! Monte-Carlo corruption and exact dropout-mask enumeration ([`oracle`]).
//!
//! The intended workload is unsupervised domain adaptation: train on a
//! labeled source domain, score a differently-distributed target domain.
//! [`eval`] implements the corresponding protocol — a sweep over the
//! dropout probability with best-target-accuracy selection and
//! per-task/per-group comparison tables against the ridge baseline.
//!
//! ```
//! use ndarray::array;
//! use rtm::dataset::{FeatureMatrix, LabelSet};
//! use rtm::model::{predict, train_rtm, RtmConfig};
//!
//! // Two features, four samples (one sample per column).
//! let features = FeatureMatrix::new(array![
//!     [2.0, 1.5, -2.0, -1.5],
//!     [0.1, -0.1, 0.1, -0.1],
//! ])?;
//! let labels = LabelSet::new(vec![0, 0, 1, 1], 2)?;
//!
//! let model = train_rtm(&features, &labels, RtmConfig::new(0.5, 1.0)?)?;
//! let prediction = predict(&model, &features)?;
//! assert_eq!(prediction.class_ids, vec![0, 0, 1, 1]);
//! # Ok::<(), rtm::RtmError>(())
//! ```

pub mod dataset;
pub mod error;
pub mod eval;
mod linalg;
pub mod model;
pub mod oracle;

pub use dataset::{DomainPair, FeatureMatrix, LabelSet};
pub use error::{Result, RtmError};
pub use model::{LinearModel, MomentPair, RtmConfig};
