//! Self-contained inferential statistics for small cohort studies.
//!
//! Everything is computed in-house: p-values come from a continued-fraction
//! regularized incomplete beta function, least squares goes through a
//! Householder QR decomposition, and clustering is a plain O(n^3) Ward
//! agglomeration. No external numerics dependencies; accuracy targets are
//! covered by the oracle-backed test suites.

pub mod cluster;
pub mod corr;
pub mod describe;
pub mod design;
pub mod error;
pub mod ftest;
mod linalg;
pub mod ols;
pub mod predict;
pub mod special;
pub mod stepwise;

pub use cluster::{ward_cluster, znorm, Clustering, FeatureMatrix, Merge};
pub use corr::{pearson, Pearson};
pub use describe::{descriptives, Descriptives};
pub use design::{Dataset, Term};
pub use error::StatError;
pub use ftest::{omnibus_block_test, partial_f, partial_f_from_r2, FTestResult};
pub use ols::{ols_fit, CoefEntry, RegressionReport};
pub use predict::{predict_with_intervals, Prediction};
pub use special::{f_sf, reg_inc_beta, student_t_ppf, student_t_two_tailed_p};
pub use stepwise::{stepwise_select, SelectionTrace, StepwiseConfig, StepwiseOutcome};
