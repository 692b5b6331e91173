use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Format, Variant};
use crate::classifiers::{Algorithm, ClassifierSpec};
use crate::ecoc::CodingMatrix;
use crate::metrics::{MetricReport, METRIC_COLUMNS};
use crate::pfi::ImportanceTable;
use crate::{Error, Result};

pub const REPORT_FORMAT: &str = "riskforge-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    /// Seconds since the Unix epoch at which the run finished.
    pub timestamp: u64,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub features: usize,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub k_folds: usize,
}

/// LASSO selection fitted on the whole training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub feature_count: usize,
    pub selected: Vec<String>,
    pub lambda_used: f64,
    pub per_class_lambda: Vec<f64>,
    /// Selected feature count in each CV fold.
    pub fold_feature_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// Mean of the per-fold metric reports.
    pub cv: MetricReport,
    pub fold_accuracy: Vec<f64>,
    /// Mean held-out fold accuracy.
    pub cv_mean_score: f64,
    /// Mean fit time over the CV folds.
    pub mean_training_time_seconds: f64,
    /// Fit time of the final model on the training split.
    pub training_time_seconds: f64,
    /// Wall-clock of the whole CV loop (fits, predictions, scoring).
    pub cv_time_seconds: f64,
    /// Final model evaluated on the held-out test split.
    pub holdout: MetricReport,
    /// Final model accuracy on its own training split.
    pub train_score: f64,
    pub feature_count_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub variant: Variant,
    pub classifier: String,
    pub algorithm: Algorithm,
    pub spec: ClassifierSpec,
    pub result: Option<CellResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSection {
    pub variant: Variant,
    pub classifier: String,
    /// Split the importances were measured on.
    pub evaluated_on: String,
    pub table: ImportanceTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub dataset: DatasetSummary,
    pub selection: Option<SelectionSummary>,
    pub selection_error: Option<String>,
    pub coding_matrix: Option<CodingMatrix>,
    pub cells: Vec<Cell>,
    pub importance: Option<ImportanceSection>,
    pub importance_error: Option<String>,
}

fn round_ms(seconds: f64) -> f64 {
    (seconds * 1000.0).round() / 1000.0
}

impl CellResult {
    pub(crate) fn round_timings(&mut self) {
        self.mean_training_time_seconds = round_ms(self.mean_training_time_seconds);
        self.training_time_seconds = round_ms(self.training_time_seconds);
        self.cv_time_seconds = round_ms(self.cv_time_seconds);
    }
}

impl RunReport {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn cell(&self, variant: Variant, classifier: &str) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.classifier == classifier)
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut seen = Vec::new();
        for c in &self.cells {
            if !seen.contains(&c.variant) {
                seen.push(c.variant);
            }
        }
        seen
    }

    /// Copy with the timestamp and every timing set to zero; two runs with
    /// the same config and seed give identical normalized reports.
    pub fn normalized(&self) -> RunReport {
        let mut r = self.clone();
        r.provenance.timestamp = 0;
        for cell in &mut r.cells {
            if let Some(res) = cell.result.as_mut() {
                res.mean_training_time_seconds = 0.0;
                res.training_time_seconds = 0.0;
                res.cv_time_seconds = 0.0;
            }
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(text)?;
        if r.format != REPORT_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "not a report document: format `{}`",
                r.format
            )));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Cross-validated metrics of one variant, one row per classifier.
    pub fn metrics_csv(&self, variant: Variant) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Classifier"];
        header.extend_from_slice(&METRIC_COLUMNS[..6]);
        header.push("CV Mean Scores");
        header.push(METRIC_COLUMNS[6]);
        w.write_record(&header)?;
        for cell in self.cells.iter().filter(|c| c.variant == variant) {
            let mut rec = vec![cell.classifier.clone()];
            match &cell.result {
                Some(res) => {
                    let row = res.cv.row();
                    rec.extend(row[..6].iter().map(|v| format!("{v:.4}")));
                    rec.push(format!("{:.4}", res.cv_mean_score));
                    rec.push(format!("{:.4}", row[6]));
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 8)),
            }
            w.write_record(&rec)?;
        }
        finish_csv(w)
    }

    /// Features, timings and accuracy for every cell.
    pub fn cost_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "Variant",
            "Classifier",
            "Features",
            "Training Time",
            "Mean Training Time",
            "CV Time",
            "Accuracy",
            "Note",
        ])?;
        for cell in &self.cells {
            let mut rec = vec![cell.variant.tag().to_string(), cell.classifier.clone()];
            match &cell.result {
                Some(res) => rec.extend([
                    res.feature_count_used.to_string(),
                    format!("{:.3}", res.training_time_seconds),
                    format!("{:.3}", res.mean_training_time_seconds),
                    format!("{:.3}", res.cv_time_seconds),
                    format!("{:.4}", res.cv_mean_score),
                    String::new(),
                ]),
                None => {
                    rec.extend(std::iter::repeat_n(String::new(), 5));
                    rec.push(cell.error.clone().unwrap_or_default());
                }
            }
            w.write_record(&rec)?;
        }
        finish_csv(w)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `contents` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes the requested formats into `directory`, creating it if needed,
/// and returns the written paths.
pub fn emit_report(report: &RunReport, directory: &Path, formats: &BTreeSet<Format>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(directory).map_err(|e| Error::io(directory, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: String| -> Result<()> {
        let path = directory.join(name);
        write_atomic(&path, contents.as_bytes())?;
        written.push(path);
        Ok(())
    };
    if formats.contains(&Format::Csv) {
        for v in report.variants() {
            put(format!("metrics_{}.csv", v.tag()), report.metrics_csv(v)?)?;
        }
        put("cost.csv".into(), report.cost_csv()?)?;
        if let Some(imp) = &report.importance {
            put("importance.csv".into(), imp.table.to_csv()?)?;
        }
    }
    if formats.contains(&Format::Json) {
        put("report.json".into(), report.to_json()?)?;
    }
    if formats.contains(&Format::Svg) {
        if let Some(imp) = &report.importance {
            for (c, class) in imp.table.class_names.iter().enumerate() {
                put(format!("importance_{}.svg", file_safe(class)), imp.table.to_svg(c)?)?;
            }
        }
    }
    Ok(written)
}
