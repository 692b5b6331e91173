//! Multiclass credit-risk classification toolkit.
//!
//! The pipeline is built from small, independently testable pieces:
//!
//! * [`dataset`]: CSV ingestion, rating-to-bucket mapping, standardization and
//!   stratified splitting.
//! * [`lasso`]: L1-penalised least squares by cyclic coordinate descent, used as a
//!   one-vs-rest feature selector.
//! * [`classifiers`]: six base learners (DT, RF, GBT, KNN, SVM, MLP) behind one
//!   train / predict / score interface.
//! * [`ecoc`]: error-correcting output code meta-classifier.
//! * [`metrics`]: the seven-metric evaluation engine.
//! * [`pfi`]: permutation feature importance, global and per class.
//! * [`experiment`]: the config-driven harness that runs every
//!   (variant, classifier) cell with stratified cross-validation and writes reports.

pub mod classifiers;
pub mod dataset;
pub mod ecoc;
mod error;
pub mod experiment;
pub mod lasso;
mod matrix;
pub mod metrics;
pub mod pfi;
pub mod seed;

pub use error::{Error, Result};
pub use matrix::Matrix;

/// Prediction surface shared by single classifiers and ECOC ensembles.
pub trait Predictor: Sync {
    fn n_classes(&self) -> usize;
    fn n_features(&self) -> usize;
    fn predict(&self, x: &Matrix) -> Result<Vec<usize>>;
    fn score(&self, x: &Matrix) -> Result<Matrix>;
}

/// Index of the largest value, ties resolved toward the lowest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax, written in place.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
