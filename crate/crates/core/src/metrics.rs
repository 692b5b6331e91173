//! Seven-metric evaluation: accuracy, macro precision / F1 / Jaccard (plus
//! macro recall), Cohen's kappa and mean one-vs-rest ROC AUC.

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// `counts[t][p]` = rows with true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    fn row_sum(&self, t: usize) -> u64 {
        self.counts[t].iter().sum()
    }

    fn col_sum(&self, p: usize) -> u64 {
        self.counts.iter().map(|r| r[p]).sum()
    }
}

pub fn confusion(truth: &[usize], pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= k || p >= k {
            return Err(Error::InvalidArgument(format!(
                "label {} out of range for {k} classes",
                t.max(p)
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall, F1 and Jaccard for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub jaccard: f64,
    pub support: u64,
}

/// Per-class ratios; any 0/0 is reported as 0.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.k())
        .map(|c| {
            let tp = cm.get(c, c);
            let fp = cm.col_sum(c) - tp;
            let fn_ = cm.row_sum(c) - tp;
            if tp + fp == 0 {
                log::warn!("class {c} is never predicted; its precision is set to 0");
            }
            ClassMetrics {
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                f1: ratio(2 * tp, 2 * tp + fp + fn_),
                jaccard: ratio(tp, tp + fp + fn_),
                support: tp + fn_,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_jaccard: f64,
}

pub fn basic_metrics(cm: &ConfusionMatrix) -> Result<BasicMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let diag: u64 = (0..cm.k()).map(|c| cm.get(c, c)).sum();
    let per = per_class_metrics(cm);
    let k = per.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per.iter().map(f).sum::<f64>() / k;
    Ok(BasicMetrics {
        accuracy: diag as f64 / total as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        macro_jaccard: mean(|m| m.jaccard),
    })
}

pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let n = total as f64;
    let p_o = (0..cm.k()).map(|c| cm.get(c, c)).sum::<u64>() as f64 / n;
    let p_e: f64 = (0..cm.k())
        .map(|c| (cm.row_sum(c) as f64 / n) * (cm.col_sum(c) as f64 / n))
        .sum();
    if p_e == 1.0 {
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Mann-Whitney AUC of `scores` for separating `positive` rows, with
/// midranks for ties. `None` when either side is empty.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks; the tie group spans ranks i+1 ..= j+1
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if positive[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Some((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

/// Per-class one-vs-rest AUCs (`None` for classes that cannot be scored).
pub fn roc_auc_per_class(truth: &[usize], scores: &Matrix) -> Result<Vec<Option<f64>>> {
    if truth.len() != scores.rows() {
        return Err(Error::Shape(format!(
            "{} labels but {} score rows",
            truth.len(),
            scores.rows()
        )));
    }
    if scores.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("score matrix".into()));
    }
    Ok((0..scores.cols())
        .map(|c| {
            let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            let auc = binary_auc(&scores.column(c), &positive);
            if auc.is_none() {
                log::warn!("class {c} lacks positives or negatives; its AUC is skipped");
            }
            auc
        })
        .collect())
}

pub fn roc_auc_ovr_mean(truth: &[usize], scores: &Matrix) -> Result<f64> {
    let aucs: Vec<f64> = roc_auc_per_class(truth, scores)?.into_iter().flatten().collect();
    if aucs.is_empty() {
        return Err(Error::NoComputableAuc);
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub jaccard: f64,
    pub support: f64,
    pub roc_auc: Option<f64>,
}

/// The seven headline metrics plus a per-class table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_jaccard: f64,
    pub cohen_kappa: f64,
    pub roc_auc_ovr_mean: f64,
    pub per_class: Vec<PerClassRow>,
}

/// Headline metric columns: the six tabulated metrics in their usual
/// reporting order, then macro recall.
pub const METRIC_COLUMNS: [&str; 7] = [
    "Accuracy",
    "Precision",
    "F1 Score",
    "Jaccard score",
    "Cohen Kappa Score",
    "ROC AUC Mean",
    "Recall",
];

impl MetricReport {
    /// Values in [`METRIC_COLUMNS`] order.
    pub fn row(&self) -> [f64; 7] {
        [
            self.accuracy,
            self.macro_precision,
            self.macro_f1,
            self.macro_jaccard,
            self.cohen_kappa,
            self.roc_auc_ovr_mean,
            self.macro_recall,
        ]
    }

    /// Element-wise mean of several reports (e.g. one per CV fold).
    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        let first = reports.first()?;
        let n = reports.len() as f64;
        let avg = |f: &dyn Fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let per_class = (0..first.per_class.len())
            .map(|c| {
                let avgc =
                    |f: &dyn Fn(&PerClassRow) -> f64| reports.iter().map(|r| f(&r.per_class[c])).sum::<f64>() / n;
                let aucs: Vec<f64> = reports.iter().filter_map(|r| r.per_class[c].roc_auc).collect();
                PerClassRow {
                    precision: avgc(&|r| r.precision),
                    recall: avgc(&|r| r.recall),
                    f1: avgc(&|r| r.f1),
                    jaccard: avgc(&|r| r.jaccard),
                    support: avgc(&|r| r.support),
                    roc_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
                }
            })
            .collect();
        Some(MetricReport {
            accuracy: avg(&|r| r.accuracy),
            macro_precision: avg(&|r| r.macro_precision),
            macro_recall: avg(&|r| r.macro_recall),
            macro_f1: avg(&|r| r.macro_f1),
            macro_jaccard: avg(&|r| r.macro_jaccard),
            cohen_kappa: avg(&|r| r.cohen_kappa),
            roc_auc_ovr_mean: avg(&|r| r.roc_auc_ovr_mean),
            per_class,
        })
    }
}

pub fn evaluate(truth: &[usize], pred: &[usize], scores: &Matrix) -> Result<MetricReport> {
    if truth.len() != scores.rows() {
        return Err(Error::Shape(format!(
            "{} labels but {} score rows",
            truth.len(),
            scores.rows()
        )));
    }
    let cm = confusion(truth, pred, scores.cols())?;
    let basic = basic_metrics(&cm)?;
    let kappa = cohen_kappa(&cm)?;
    let aucs = roc_auc_per_class(truth, scores)?;
    let computable: Vec<f64> = aucs.iter().flatten().copied().collect();
    if computable.is_empty() {
        return Err(Error::NoComputableAuc);
    }
    let per_class = per_class_metrics(&cm)
        .into_iter()
        .zip(&aucs)
        .map(|(m, auc)| PerClassRow {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            jaccard: m.jaccard,
            support: m.support as f64,
            roc_auc: *auc,
        })
        .collect();
    Ok(MetricReport {
        accuracy: basic.accuracy,
        macro_precision: basic.macro_precision,
        macro_recall: basic.macro_recall,
        macro_f1: basic.macro_f1,
        macro_jaccard: basic.macro_jaccard,
        cohen_kappa: kappa,
        roc_auc_ovr_mean: computable.iter().sum::<f64>() / computable.len() as f64,
        per_class,
    })
}

pub fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64 / truth.len() as f64
}
