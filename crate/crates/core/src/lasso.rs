//! L1-penalised least squares by cyclic coordinate descent, and a
//! one-vs-rest feature selector built on it.
//!
//! The objective is `RSS(β₀, β) + λ Σ|βⱼ|` with an unpenalised intercept.
//! Minimising over a single coordinate `βⱼ` with the others fixed gives
//!
//! ```text
//! βⱼ = S(ρⱼ, λ/2) / zⱼ,   ρⱼ = Σᵢ x̃ᵢⱼ (rᵢ + x̃ᵢⱼ βⱼ),   zⱼ = Σᵢ x̃ᵢⱼ²
//! ```
//!
//! where `x̃` is the column-centred design, `r` the current residual and `S`
//! the soft-threshold operator. The intercept is recovered in closed form
//! after every sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FoldAssignment};
use crate::{Error, Matrix, Result};

/// Coefficients with magnitude at or below this count as zero.
pub const SUPPORT_EPS: f64 = 1e-10;

/// `sign(z) · max(|z| − γ, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Stop once the largest coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Record the objective after every sweep and assert it never rises.
    pub track_objective: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-7,
            max_iter: 10_000,
            track_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub n_iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_history: Vec<f64>,
}

impl LassoModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_cols(self.coefficients.len())?;
        Ok(x.iter_rows()
            .map(|row| self.intercept + row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().map(|b| b.abs()).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, b)| b.abs() > SUPPORT_EPS)
            .map(|(j, _)| j)
            .collect()
    }
}

/// `RSS + λ Σ|βⱼ|` on the uncentred data.
pub fn objective(x: &Matrix, y: &[f64], model: &LassoModel) -> Result<f64> {
    let pred = model.predict(x)?;
    let rss: f64 = pred.iter().zip(y).map(|(p, t)| (t - p).powi(2)).sum();
    Ok(rss + model.lambda * model.l1_norm())
}

/// Column-centred copy of the design, stored column-major.
struct CenteredDesign {
    n: usize,
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    sq_norms: Vec<f64>,
}

impl CenteredDesign {
    fn new(x: &Matrix) -> Self {
        let n = x.rows();
        let mut cols = Vec::with_capacity(x.cols());
        let mut means = Vec::with_capacity(x.cols());
        let mut sq_norms = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let centered: Vec<f64> = col.iter().map(|v| v - mean).collect();
            sq_norms.push(centered.iter().map(|v| v * v).sum());
            means.push(mean);
            cols.push(centered);
        }
        CenteredDesign {
            n,
            cols,
            means,
            sq_norms,
        }
    }

    fn dot(&self, j: usize, r: &[f64]) -> f64 {
        self.cols[j].iter().zip(r).map(|(a, b)| a * b).sum()
    }
}

fn check_inputs(x: &Matrix, y: &[f64], lambda: f64) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("LASSO needs at least one row".into()));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LASSO design matrix".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LASSO targets".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "penalty must be a finite non-negative number, got {lambda}"
        )));
    }
    Ok(())
}

/// Smallest λ at which the all-zero coefficient vector is optimal:
/// `2 · maxⱼ |x̃ⱼᵀ (y − ȳ)|`.
pub fn critical_lambda(x: &Matrix, y: &[f64]) -> Result<f64> {
    check_inputs(x, y, 0.0)?;
    let design = CenteredDesign::new(x);
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let r: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    Ok((0..x.cols()).map(|j| 2.0 * design.dot(j, &r).abs()).fold(0.0, f64::max))
}

pub fn fit_lasso(x: &Matrix, y: &[f64], lambda: f64, tol: f64, max_iter: usize) -> Result<LassoModel> {
    fit_lasso_with(
        x,
        y,
        lambda,
        &LassoOptions {
            tol,
            max_iter,
            track_objective: cfg!(debug_assertions),
        },
        None,
    )
}

/// Coordinate descent from an optional warm start.
#[allow(clippy::needless_range_loop)] // j indexes several per-coordinate arrays
pub fn fit_lasso_with(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    opts: &LassoOptions,
    warm_start: Option<&[f64]>,
) -> Result<LassoModel> {
    check_inputs(x, y, lambda)?;
    let design = CenteredDesign::new(x);
    let p = x.cols();
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut beta = match warm_start {
        Some(b) if b.len() == p => b.to_vec(),
        Some(b) => {
            return Err(Error::Shape(format!(
                "warm start has {} coefficients, expected {p}",
                b.len()
            )))
        }
        None => vec![0.0; p],
    };
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (r, xv) in resid.iter_mut().zip(&design.cols[j]) {
                *r -= xv * b;
            }
        }
    }

    let centered_objective = |resid: &[f64], beta: &[f64]| {
        resid.iter().map(|r| r * r).sum::<f64>() + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    };
    let mut history = Vec::new();
    if opts.track_objective {
        history.push(centered_objective(&resid, &beta));
    }

    let half_lambda = lambda / 2.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            let z = design.sq_norms[j];
            let old = beta[j];
            if z == 0.0 {
                // constant column carries no signal
                if old != 0.0 {
                    beta[j] = 0.0;
                    max_change = max_change.max(old.abs());
                }
                continue;
            }
            let rho = design.dot(j, &resid) + z * old;
            let new = soft_threshold(rho, half_lambda) / z;
            let delta = new - old;
            if delta != 0.0 {
                for (r, xv) in resid.iter_mut().zip(&design.cols[j]) {
                    *r -= xv * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if opts.track_objective {
            let obj = centered_objective(&resid, &beta);
            let prev = *history.last().unwrap();
            assert!(
                obj <= prev + 1e-10 * prev.abs().max(1.0),
                "LASSO objective rose from {prev} to {obj} in sweep {iterations}"
            );
            history.push(obj);
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("LASSO did not converge in {} sweeps (λ = {lambda})", opts.max_iter);
    }

    let intercept = y_mean - design.means.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    debug_assert_eq!(design.n, y.len());
    Ok(LassoModel {
        coefficients: beta,
        intercept,
        lambda,
        n_iterations: iterations,
        converged,
        objective_history: history,
    })
}

/// `count` log-spaced values from `lambda_max` down to `lambda_max · min_ratio`.
pub fn lambda_grid(lambda_max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    if count == 1 || lambda_max <= 0.0 {
        return vec![lambda_max.max(0.0)];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * min_ratio).ln());
    (0..count)
        .map(|i| (hi + (lo - hi) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Targets +1 for class `c`, −1 otherwise.
fn one_vs_rest_targets(labels: &[usize], c: usize) -> Vec<f64> {
    labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect()
}

/// Default grid: 50 values spanning three decades below the largest
/// per-class critical penalty.
pub fn default_lambda_grid(data: &Dataset, count: usize, min_ratio: f64) -> Result<Vec<f64>> {
    let mut lambda_max = 0.0f64;
    for c in 0..data.k() {
        let y = one_vs_rest_targets(data.labels(), c);
        lambda_max = lambda_max.max(critical_lambda(data.features(), &y)?);
    }
    Ok(lambda_grid(lambda_max, count, min_ratio))
}

/// Union of per-class one-vs-rest LASSO supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// Ascending, deduplicated union of `per_class_supports`.
    pub selected: Vec<usize>,
    pub per_class_supports: Vec<Vec<usize>>,
    /// Penalty chosen by cross-validation for each class.
    pub per_class_lambda: Vec<f64>,
    /// Smallest per-class penalty, i.e. the one admitting the most features.
    pub lambda_used: f64,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl FeatureSelection {
    /// Every feature, as if no selection had been made.
    pub fn all(data: &Dataset) -> Self {
        let all: Vec<usize> = (0..data.p()).collect();
        FeatureSelection {
            selected: all.clone(),
            per_class_supports: vec![all; data.k()],
            per_class_lambda: vec![0.0; data.k()],
            lambda_used: 0.0,
            feature_names: data.feature_names().to_vec(),
            class_names: data.class_names().to_vec(),
        }
    }

    pub fn selected_names(&self) -> Vec<String> {
        self.selected.iter().map(|&j| self.feature_names[j].clone()).collect()
    }

    /// `{lambda_used, selected: [names], per_class: {class: [names]}}`
    pub fn to_json(&self) -> serde_json::Value {
        let per_class: serde_json::Map<String, serde_json::Value> = self
            .class_names
            .iter()
            .zip(&self.per_class_supports)
            .map(|(c, s)| {
                let names: Vec<&str> = s.iter().map(|&j| self.feature_names[j].as_str()).collect();
                (c.clone(), serde_json::json!(names))
            })
            .collect();
        serde_json::json!({
            "lambda_used": self.lambda_used,
            "selected": self.selected_names(),
            "per_class": per_class,
            "per_class_lambda": self.per_class_lambda,
        })
    }
}

/// Mean held-out squared error of a one-vs-rest fit for each λ on the grid.
fn cv_errors(
    x: &Matrix,
    y: &[f64],
    grid_desc: &[f64],
    folds: &FoldAssignment,
    opts: &LassoOptions,
) -> Result<Vec<f64>> {
    let mut totals = vec![0.0; grid_desc.len()];
    for f in 0..folds.k_folds {
        let train = folds.train_indices(f);
        let test = folds.test_indices(f);
        if train.is_empty() || test.is_empty() {
            continue;
        }
        let x_train = x.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let x_test = x.select_rows(&test);
        let mut warm: Option<Vec<f64>> = None;
        for (g, &lambda) in grid_desc.iter().enumerate() {
            let model = fit_lasso_with(&x_train, &y_train, lambda, opts, warm.as_deref())?;
            let pred = model.predict(&x_test)?;
            let mse = pred.iter().zip(&test).map(|(p, &i)| (y[i] - p).powi(2)).sum::<f64>() / test.len() as f64;
            totals[g] += mse / folds.k_folds as f64;
            warm = Some(model.coefficients);
        }
    }
    Ok(totals)
}

/// Per class, picks λ by minimum mean CV squared error (ties go to the
/// larger λ), refits on all rows and keeps the nonzero coefficients.
pub fn select_features(data: &Dataset, lambda_grid: &[f64], folds: &FoldAssignment) -> Result<FeatureSelection> {
    select_features_with(data, lambda_grid, folds, &LassoOptions::default())
}

pub fn select_features_with(
    data: &Dataset,
    lambda_grid: &[f64],
    folds: &FoldAssignment,
    opts: &LassoOptions,
) -> Result<FeatureSelection> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("empty λ grid".into()));
    }
    if data.k() < 2 || data.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    if folds.assignment.len() != data.n() {
        return Err(Error::Shape(format!(
            "fold assignment covers {} rows, dataset has {}",
            folds.assignment.len(),
            data.n()
        )));
    }
    let mut grid_desc = lambda_grid.to_vec();
    grid_desc.sort_by(|a, b| b.total_cmp(a));

    let x = data.features();
    let per_class: Vec<(Vec<usize>, f64)> = (0..data.k())
        .into_par_iter()
        .map(|c| {
            let y = one_vs_rest_targets(data.labels(), c);
            let errors = cv_errors(x, &y, &grid_desc, folds, opts)?;
            let mut best = 0;
            for g in 1..errors.len() {
                if errors[g] < errors[best] {
                    best = g;
                }
            }
            let lambda = grid_desc[best];
            let model = fit_lasso_with(x, &y, lambda, opts, None)?;
            Ok((model.support(), lambda))
        })
        .collect::<Result<_>>()?;

    let mut selected: Vec<usize> = per_class.iter().flat_map(|(s, _)| s.iter().copied()).collect();
    selected.sort_unstable();
    selected.dedup();
    if selected.is_empty() {
        log::warn!("LASSO selected no features; every coefficient is zero on the grid");
    }
    let per_class_lambda: Vec<f64> = per_class.iter().map(|(_, l)| *l).collect();
    Ok(FeatureSelection {
        selected,
        lambda_used: per_class_lambda.iter().copied().fold(f64::INFINITY, f64::min),
        per_class_lambda,
        per_class_supports: per_class.into_iter().map(|(s, _)| s).collect(),
        feature_names: data.feature_names().to_vec(),
        class_names: data.class_names().to_vec(),
    })
}

/// Keeps only the selected columns, in ascending index order.
pub fn restrict(data: &Dataset, selection: &FeatureSelection) -> Result<Dataset> {
    if selection.selected.is_empty() {
        return Err(Error::InvalidArgument(
            "feature selection is empty; nothing to restrict to".into(),
        ));
    }
    let mut cols = selection.selected.clone();
    cols.sort_unstable();
    cols.dedup();
    data.select_columns(&cols)
}
