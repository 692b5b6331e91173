//! Permutation feature importance.
//!
//! For each feature and repeat, one column of a copy of the evaluation matrix
//! is shuffled and the model re-predicted. Global importance compares the
//! permuted error with the baseline error (difference or ratio). Per-class
//! importance is 100 times the mean drop in the class's recall. The input
//! matrix is never modified.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{basic_metrics, confusion};
use crate::{seed, Error, Matrix, Predictor, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Difference,
    Ratio,
}

/// Loss used for the global importance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossMetric {
    #[default]
    ErrorRate,
    OneMinusF1,
}

/// Source of row permutations, addressed by (feature, repeat).
pub trait Permuter: Sync {
    fn permutation(&self, n_rows: usize, feature: usize, repeat: usize) -> Vec<usize>;
}

/// Fisher-Yates shuffle seeded with `derive(seed, [feature, repeat])`.
#[derive(Debug, Clone, Copy)]
pub struct SeededShuffle {
    pub seed: u64,
}

impl Permuter for SeededShuffle {
    fn permutation(&self, n_rows: usize, feature: usize, repeat: usize) -> Vec<usize> {
        let mut rng = seed::rng(seed::derive(self.seed, &[feature as u64, repeat as u64]));
        let mut order: Vec<usize> = (0..n_rows).collect();
        order.shuffle(&mut rng);
        order
    }
}

/// Leaves every column in place.
#[derive(Debug, Clone, Copy)]
pub struct IdentityPermutation;

impl Permuter for IdentityPermutation {
    fn permutation(&self, n_rows: usize, _feature: usize, _repeat: usize) -> Vec<usize> {
        (0..n_rows).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfiOptions {
    pub repeats: usize,
    pub seed: u64,
    pub mode: Mode,
    pub metric: LossMetric,
}

impl Default for PfiOptions {
    fn default() -> Self {
        PfiOptions {
            repeats: 30,
            seed: 0,
            mode: Mode::Difference,
            metric: LossMetric::ErrorRate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub global: Vec<f64>,
    pub global_std: Vec<f64>,
    /// `per_class[c][j]`: recall drop of class `c` in percentage points.
    pub per_class: Vec<Vec<f64>>,
    pub per_class_std: Vec<Vec<f64>>,
    pub repeats: usize,
    pub seed: u64,
    pub mode: Mode,
    pub metric: LossMetric,
}

/// Returns a copy of `x` with column `j` reordered by `perm`.
pub fn permute_column(x: &Matrix, j: usize, perm: &[usize]) -> Matrix {
    let mut out = x.clone();
    for (i, &src) in perm.iter().enumerate() {
        out.set(i, j, x.get(src, j));
    }
    out
}

fn loss(metric: LossMetric, y: &[usize], pred: &[usize], k: usize) -> Result<f64> {
    match metric {
        LossMetric::ErrorRate => Ok(y.iter().zip(pred).filter(|(a, b)| a != b).count() as f64 / y.len() as f64),
        LossMetric::OneMinusF1 => Ok(1.0 - basic_metrics(&confusion(y, pred, k)?)?.macro_f1),
    }
}

/// Per class, the fraction of its rows that are misclassified.
fn class_errors(y: &[usize], pred: &[usize], k: usize) -> Vec<f64> {
    let mut wrong = vec![0usize; k];
    let mut total = vec![0usize; k];
    for (&t, &p) in y.iter().zip(pred) {
        total[t] += 1;
        wrong[t] += usize::from(t != p);
    }
    wrong
        .iter()
        .zip(&total)
        .map(|(&w, &n)| if n == 0 { 0.0 } else { w as f64 / n as f64 })
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_inputs<M: Predictor + ?Sized>(model: &M, x: &Matrix, y: &[usize], repeats: usize) -> Result<()> {
    x.check_cols(model.n_features())?;
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if x.rows() < 2 {
        return Err(Error::InvalidArgument("importance needs at least 2 rows".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= model.n_classes()) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside the model's classes"
        )));
    }
    Ok(())
}

/// Global and per-class importance from one shared set of permutations.
pub fn importance_table_with<M: Predictor + ?Sized>(
    model: &M,
    x: &Matrix,
    y: &[usize],
    feature_names: &[String],
    class_names: &[String],
    options: &PfiOptions,
    permuter: &dyn Permuter,
) -> Result<ImportanceTable> {
    check_inputs(model, x, y, options.repeats)?;
    let k = model.n_classes();
    let p = x.cols();
    if feature_names.len() != p || class_names.len() != k {
        return Err(Error::Shape("feature or class names do not match the model".into()));
    }
    let mut present = vec![false; k];
    y.iter().for_each(|&c| present[c] = true);
    if let Some(c) = present.iter().position(|&seen| !seen) {
        return Err(Error::InvalidArgument(format!(
            "class `{}` is absent from the evaluation labels",
            class_names[c]
        )));
    }

    let base_pred = model.predict(x)?;
    let base_loss = loss(options.metric, y, &base_pred, k)?;
    if options.mode == Mode::Ratio && base_loss == 0.0 {
        return Err(Error::ZeroBaselineError);
    }
    let base_class = class_errors(y, &base_pred, k);

    let per_feature = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut global = Vec::with_capacity(options.repeats);
            let mut per_class = vec![Vec::with_capacity(options.repeats); k];
            for r in 0..options.repeats {
                let perm = permuter.permutation(x.rows(), j, r);
                let pred = model.predict(&permute_column(x, j, &perm))?;
                let l = loss(options.metric, y, &pred, k)?;
                global.push(match options.mode {
                    Mode::Difference => l - base_loss,
                    Mode::Ratio => l / base_loss,
                });
                for (c, e) in class_errors(y, &pred, k).into_iter().enumerate() {
                    per_class[c].push(100.0 * (e - base_class[c]));
                }
            }
            Ok((
                mean_std(&global),
                per_class.iter().map(|v| mean_std(v)).collect::<Vec<_>>(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = ImportanceTable {
        feature_names: feature_names.to_vec(),
        class_names: class_names.to_vec(),
        global: Vec::with_capacity(p),
        global_std: Vec::with_capacity(p),
        per_class: vec![vec![0.0; p]; k],
        per_class_std: vec![vec![0.0; p]; k],
        repeats: options.repeats,
        seed: options.seed,
        mode: options.mode,
        metric: options.metric,
    };
    for (j, ((g, gs), classes)) in per_feature.into_iter().enumerate() {
        table.global.push(g);
        table.global_std.push(gs);
        for (c, (m, s)) in classes.into_iter().enumerate() {
            table.per_class[c][j] = m;
            table.per_class_std[c][j] = s;
        }
    }
    Ok(table)
}

pub fn importance_table<M: Predictor + ?Sized>(
    model: &M,
    x: &Matrix,
    y: &[usize],
    feature_names: &[String],
    class_names: &[String],
    options: &PfiOptions,
) -> Result<ImportanceTable> {
    let permuter = SeededShuffle { seed: options.seed };
    importance_table_with(model, x, y, feature_names, class_names, options, &permuter)
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Global importance with the error-rate loss.
pub fn permutation_importance<M: Predictor + ?Sized>(
    model: &M,
    x: &Matrix,
    y: &[usize],
    repeats: usize,
    seed: u64,
    mode: Mode,
) -> Result<Vec<f64>> {
    check_inputs(model, x, y, repeats)?;
    let options = PfiOptions {
        repeats,
        seed,
        mode,
        metric: LossMetric::ErrorRate,
    };
    let base = loss(options.metric, y, &model.predict(x)?, model.n_classes())?;
    if mode == Mode::Ratio && base == 0.0 {
        return Err(Error::ZeroBaselineError);
    }
    let permuter = SeededShuffle { seed };
    (0..x.cols())
        .into_par_iter()
        .map(|j| {
            let mut total = 0.0;
            for r in 0..repeats {
                let perm = permuter.permutation(x.rows(), j, r);
                let l = loss(
                    options.metric,
                    y,
                    &model.predict(&permute_column(x, j, &perm))?,
                    model.n_classes(),
                )?;
                total += match mode {
                    Mode::Difference => l - base,
                    Mode::Ratio => l / base,
                };
            }
            Ok(total / repeats as f64)
        })
        .collect()
}

/// `k x p` recall degradation in percentage points.
pub fn per_class_importance<M: Predictor + ?Sized>(
    model: &M,
    x: &Matrix,
    y: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let options = PfiOptions {
        repeats,
        seed,
        ..Default::default()
    };
    let table = importance_table(
        model,
        x,
        y,
        &default_names("x", x.cols()),
        &default_names("class", model.n_classes()),
        &options,
    )?;
    Ok(table.per_class)
}

/// Features by descending importance, ties to the lower index. `None`
/// ranks by the global column.
pub fn rank_features(table: &ImportanceTable, class: Option<usize>) -> Result<Vec<usize>> {
    let values = match class {
        None => &table.global,
        Some(c) => table.per_class.get(c).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "class index {c} out of range for {} classes",
                table.per_class.len()
            ))
        })?,
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    Ok(order)
}

impl ImportanceTable {
    /// Features as rows, one column per class, then the global value.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Feature".to_string()];
        header.extend(self.class_names.iter().cloned());
        header.push("Global".into());
        w.write_record(&header)?;
        for (j, name) in self.feature_names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend(self.per_class.iter().map(|row| format!("{:.4}", row[j])));
            rec.push(format!("{:.6}", self.global[j]));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Horizontal bar chart of one class's importances, largest on top.
    pub fn to_svg(&self, class: usize) -> Result<String> {
        let order = rank_features(self, Some(class))?;
        let values = &self.per_class[class];
        let (bar_h, label_w, plot_w, pad) = (18.0, 180.0, 420.0, 30.0);
        let height = pad * 2.0 + bar_h * order.len() as f64;
        let width = label_w + plot_w + 80.0;
        let hi = values.iter().copied().fold(0.0_f64, f64::max);
        let lo = values.iter().copied().fold(0.0_f64, f64::min);
        let span = if hi - lo > 0.0 { hi - lo } else { 1.0 };
        let zero_x = label_w + plot_w * (-lo / span);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" font-size="13">Permutation importance: {}</text>"#,
            label_w,
            xml_escape(&self.class_names[class])
        );
        for (rank, &j) in order.iter().enumerate() {
            let y = pad + bar_h * rank as f64;
            let v = values[j];
            let w = plot_w * v.abs() / span;
            let x = if v >= 0.0 { zero_x } else { zero_x - w };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                label_w - 6.0,
                y + bar_h * 0.7,
                xml_escape(&self.feature_names[j])
            );
            let _ = writeln!(
                s,
                r##"<rect x="{x:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="#3b6ea5"/>"##,
                y + 2.0,
                bar_h - 4.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}">{v:.2}</text>"#,
                x + w + 4.0,
                y + bar_h * 0.7
            );
        }
        let _ = writeln!(
            s,
            r##"<line x1="{zero_x:.2}" y1="{pad}" x2="{zero_x:.2}" y2="{}" stroke="#333"/>"##,
            height - pad
        );
        s.push_str("</svg>\n");
        Ok(s)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
