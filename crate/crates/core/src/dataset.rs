//! Dataset ingestion, rating buckets, standardization and stratified splits.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Matrix, Result};

/// Integer-coded string column: `levels[code]` is the original string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub feature_index: usize,
    pub levels: Vec<String>,
}

/// Feature matrix with named columns, integer labels and class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    feature_names: Vec<String>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    categorical: Vec<CategoricalColumn>,
}

impl Dataset {
    /// Builds a dataset, checking that labels are in range, every class is
    /// present, feature names are unique and all values are finite.
    pub fn new(
        features: Matrix,
        feature_names: Vec<String>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Dataset::from_parts(features, feature_names, labels, class_names)?;
        let mut seen = vec![false; ds.k()];
        for &l in &ds.labels {
            seen[l] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "class `{}` has no rows",
                ds.class_names[c]
            )));
        }
        if ds.k() == 1 {
            log::warn!("dataset has a single class `{}`", ds.class_names[0]);
        }
        Ok(ds)
    }

    /// Like [`Dataset::new`] but allows classes with no rows, as happens for
    /// row subsets such as a held-out fold.
    pub fn from_parts(
        features: Matrix,
        feature_names: Vec<String>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features.cols() != feature_names.len() {
            return Err(Error::Shape(format!(
                "{} feature columns but {} names",
                features.cols(),
                feature_names.len()
            )));
        }
        let mut names = HashSet::new();
        for n in &feature_names {
            if !names.insert(n.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate feature name `{n}`")));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos / features.cols(), pos % features.cols());
            return Err(Error::NonFinite(format!("row {r}, column `{}`", feature_names[c])));
        }
        Ok(Dataset {
            features,
            feature_names,
            labels,
            class_names,
            categorical: Vec::new(),
        })
    }

    pub fn with_categorical(mut self, categorical: Vec<CategoricalColumn>) -> Self {
        self.categorical = categorical;
        self
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn categorical(&self) -> &[CategoricalColumn] {
        &self.categorical
    }

    /// Indices of integer-coded categorical features.
    pub fn categorical_indices(&self) -> BTreeSet<usize> {
        self.categorical.iter().map(|c| c.feature_index).collect()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn k(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Rows in the given order; class list and metadata are kept.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows),
            feature_names: self.feature_names.clone(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_names: self.class_names.clone(),
            categorical: self.categorical.clone(),
        }
    }

    /// Columns in the given order; categorical metadata is re-indexed.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.p()) {
            return Err(Error::InvalidArgument(format!(
                "feature index {bad} out of range for {} features",
                self.p()
            )));
        }
        let categorical = self
            .categorical
            .iter()
            .filter_map(|c| {
                cols.iter()
                    .position(|&j| j == c.feature_index)
                    .map(|pos| CategoricalColumn {
                        feature_index: pos,
                        levels: c.levels.clone(),
                    })
            })
            .collect();
        Ok(Dataset {
            features: self.features.select_columns(cols),
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            categorical,
        })
    }

    /// Same rows and names with a replaced feature matrix.
    pub fn with_features(&self, features: Matrix) -> Result<Dataset> {
        if features.rows() != self.n() || features.cols() != self.p() {
            return Err(Error::Shape(format!(
                "replacement matrix is {}x{}, dataset is {}x{}",
                features.rows(),
                features.cols(),
                self.n(),
                self.p()
            )));
        }
        Ok(Dataset {
            features,
            ..self.clone()
        })
    }

    /// Writes features plus a trailing label column holding class names.
    /// Floats use the shortest round-trip representation, so reloading
    /// reproduces the matrix bit for bit.
    pub fn write_csv(&self, path: &Path, label_column: &str) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_column);
        w.write_record(&header)?;
        for (row, &label) in self.features.iter_rows().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(self.class_names[label].clone());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Column layout expected in an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Every column the header must contain, in any order.
    pub columns: Vec<String>,
    /// String column holding the agency rating.
    pub rating_column: String,
    /// String columns integer-coded in first-appearance order.
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Columns read but not used as features.
    #[serde(default)]
    pub ignored: Vec<String>,
}

/// The 25 financial ratio columns of the corporate credit ratings file.
pub const RATIO_COLUMNS: [&str; 25] = [
    "currentRatio",
    "quickRatio",
    "cashRatio",
    "daysOfSalesOutstanding",
    "netProfitMargin",
    "pretaxProfitMargin",
    "grossProfitMargin",
    "operatingProfitMargin",
    "returnOnAssets",
    "returnOnCapitalEmployed",
    "returnOnEquity",
    "assetTurnover",
    "fixedAssetTurnover",
    "debtEquityRatio",
    "debtRatio",
    "effectiveTaxRate",
    "freeCashFlowOperatingCashFlowRatio",
    "freeCashFlowPerShare",
    "cashPerShare",
    "companyEquityMultiplier",
    "ebitPerRevenue",
    "enterpriseValueMultiple",
    "operatingCashFlowPerShare",
    "operatingCashFlowSalesRatio",
    "payablesTurnover",
];

impl CsvSchema {
    /// Layout of the public corporate credit ratings file: a rating column,
    /// five descriptive string columns (all integer-coded) and 25 ratios,
    /// which gives 30 features.
    pub fn corporate_ratings() -> Self {
        let descriptive = ["Name", "Symbol", "Rating Agency Name", "Date", "Sector"];
        let mut columns = vec!["Rating".to_string()];
        columns.extend(descriptive.iter().map(|s| s.to_string()));
        columns.extend(RATIO_COLUMNS.iter().map(|s| s.to_string()));
        CsvSchema {
            columns,
            rating_column: "Rating".into(),
            categorical: descriptive.iter().map(|s| s.to_string()).collect(),
            ignored: Vec::new(),
        }
    }
}

/// Features and raw rating strings, before the ratings are bucketed.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub features: Matrix,
    pub feature_names: Vec<String>,
    pub categorical: Vec<CategoricalColumn>,
    pub ratings: Vec<String>,
}

impl RawDataset {
    /// Buckets the ratings and drops buckets that never occur.
    pub fn into_dataset(self, map: &RatingMap) -> Result<Dataset> {
        let (labels, class_names) = map_ratings(&self.ratings, map)?;
        let (labels, class_names) = compact_classes(labels, class_names);
        Ok(Dataset::new(self.features, self.feature_names, labels, class_names)?.with_categorical(self.categorical))
    }
}

/// Levels of a categorical column and their lookup table.
type LevelCodes = (Vec<String>, HashMap<String, usize>);

/// Reads a CSV whose header matches `schema` up to column order.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<RawDataset> {
    load_csv_with_levels(path, schema, &[])
}

/// Like [`load_csv`], seeding categorical codes from known levels so that a
/// new file is coded consistently with the data a model was trained on.
/// Unseen strings are appended as new codes.
pub fn load_csv_with_levels(path: &Path, schema: &CsvSchema, known: &[CategoricalColumn]) -> Result<RawDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let expected: HashSet<&str> = schema.columns.iter().map(String::as_str).collect();
    let found: HashSet<&str> = header.iter().map(String::as_str).collect();
    let missing: Vec<String> = schema
        .columns
        .iter()
        .filter(|c| !found.contains(c.as_str()))
        .cloned()
        .collect();
    let extra: Vec<String> = header
        .iter()
        .filter(|c| !expected.contains(c.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() || !found.contains(schema.rating_column.as_str()) {
        let mut missing = missing;
        if !found.contains(schema.rating_column.as_str()) && !missing.contains(&schema.rating_column) {
            missing.push(schema.rating_column.clone());
        }
        return Err(Error::HeaderMismatch { missing, extra });
    }

    let rating_pos = header.iter().position(|h| *h == schema.rating_column).unwrap();
    let categorical: HashSet<&str> = schema.categorical.iter().map(String::as_str).collect();
    let ignored: HashSet<&str> = schema.ignored.iter().map(String::as_str).collect();

    // (csv position, is categorical)
    let feature_cols: Vec<(usize, bool)> = header
        .iter()
        .enumerate()
        .filter(|(i, h)| *i != rating_pos && !ignored.contains(h.as_str()))
        .map(|(i, h)| (i, categorical.contains(h.as_str())))
        .collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&(i, _)| header[i].clone()).collect();

    let mut codes: Vec<Option<LevelCodes>> = feature_cols
        .iter()
        .map(|&(i, is_cat)| {
            is_cat.then(|| {
                let levels = known
                    .iter()
                    .find(|c| feature_names.get(c.feature_index) == Some(&header[i]))
                    .map(|c| c.levels.clone())
                    .unwrap_or_default();
                let lookup = levels.iter().enumerate().map(|(j, l)| (l.clone(), j)).collect();
                (levels, lookup)
            })
        })
        .collect();

    let mut data = Vec::new();
    let mut ratings = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        let rating = record.get(rating_pos).map(str::trim).unwrap_or("");
        if rating.is_empty() {
            return Err(Error::MissingValue {
                row,
                column: schema.rating_column.clone(),
            });
        }
        ratings.push(rating.to_string());
        for (slot, &(pos, _)) in feature_cols.iter().enumerate() {
            let cell = record.get(pos).map(str::trim).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    row,
                    column: header[pos].clone(),
                });
            }
            let value = match &mut codes[slot] {
                Some((levels, lookup)) => {
                    let next = levels.len();
                    let code = *lookup.entry(cell.to_string()).or_insert_with(|| {
                        levels.push(cell.to_string());
                        next
                    });
                    code as f64
                }
                None => {
                    let v: f64 = cell.parse().map_err(|_| Error::ParseNumber {
                        row,
                        column: header[pos].clone(),
                        value: cell.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::ParseNumber {
                            row,
                            column: header[pos].clone(),
                            value: cell.to_string(),
                        });
                    }
                    v
                }
            };
            data.push(value);
        }
    }

    let features = Matrix::from_vec(ratings.len(), feature_names.len(), data)?;
    let categorical = codes
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| {
            c.map(|(levels, _)| CategoricalColumn {
                feature_index: i,
                levels,
            })
        })
        .collect();
    Ok(RawDataset {
        features,
        feature_names,
        categorical,
        ratings,
    })
}

/// Ordered rating-to-bucket table.
///
/// Text form: an ordered `buckets:` header line followed by one
/// `RATING=bucket_name` line per rating. `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingMap {
    buckets: Vec<String>,
    entries: Vec<(String, usize)>,
}

impl RatingMap {
    pub fn new(buckets: Vec<String>, entries: Vec<(String, usize)>) -> Result<Self> {
        if buckets.is_empty() {
            return Err(Error::RatingMap("no buckets declared".into()));
        }
        let mut seen = HashSet::new();
        for b in &buckets {
            if !seen.insert(b.as_str()) {
                return Err(Error::RatingMap(format!("duplicate bucket `{b}`")));
            }
        }
        let mut ratings = HashSet::new();
        for (r, b) in &entries {
            if *b >= buckets.len() {
                return Err(Error::RatingMap(format!(
                    "rating `{r}` maps to undeclared bucket index {b}"
                )));
            }
            if !ratings.insert(r.as_str()) {
                return Err(Error::RatingMap(format!("rating `{r}` listed twice")));
            }
        }
        Ok(RatingMap { buckets, entries })
    }

    /// Four risk buckets: upper investment grade is Low, BBB is Medium, the
    /// BB/B speculative tiers are High, and CCC and below are Highest.
    pub fn default_corporate() -> Self {
        let table = [
            ("AAA", 0),
            ("AA", 0),
            ("A", 0),
            ("BBB", 1),
            ("BB", 2),
            ("B", 2),
            ("CCC", 3),
            ("CC", 3),
            ("C", 3),
            ("D", 3),
        ];
        RatingMap {
            buckets: ["Low", "Medium", "High", "Highest"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            entries: table.iter().map(|&(r, b)| (r.to_string(), b)).collect(),
        }
    }

    /// One bucket per class name, each rating mapping to itself.
    pub fn identity(class_names: &[String]) -> Self {
        RatingMap {
            buckets: class_names.to_vec(),
            entries: class_names.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut buckets: Option<Vec<String>> = None;
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("buckets:") {
                if buckets.is_some() {
                    return Err(Error::RatingMap("`buckets:` declared twice".into()));
                }
                buckets = Some(
                    rest.split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect(),
                );
                continue;
            }
            let Some(declared) = &buckets else {
                return Err(Error::RatingMap(format!(
                    "line {}: mapping before the `buckets:` header",
                    lineno + 1
                )));
            };
            let (rating, bucket) = line
                .split_once('=')
                .ok_or_else(|| Error::RatingMap(format!("line {}: expected RATING=bucket", lineno + 1)))?;
            let (rating, bucket) = (rating.trim(), bucket.trim());
            let idx = declared
                .iter()
                .position(|b| b == bucket)
                .ok_or_else(|| Error::RatingMap(format!("line {}: bucket `{bucket}` is not declared", lineno + 1)))?;
            entries.push((rating.to_string(), idx));
        }
        let buckets = buckets.ok_or_else(|| Error::RatingMap("missing `buckets:` header".into()))?;
        RatingMap::new(buckets, entries)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RatingMap::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("buckets: {}\n", self.buckets.join(", "));
        for (r, b) in &self.entries {
            out.push_str(&format!("{r}={}\n", self.buckets[*b]));
        }
        out
    }

    pub fn bucket_names(&self) -> &[String] {
        &self.buckets
    }

    pub fn lookup(&self, rating: &str) -> Option<usize> {
        self.entries.iter().find(|(r, _)| r == rating).map(|&(_, b)| b)
    }
}

/// Maps rating strings to bucket indices. `class_names` lists every bucket.
pub fn map_ratings(raw_ratings: &[String], map: &RatingMap) -> Result<(Vec<usize>, Vec<String>)> {
    let labels = raw_ratings
        .iter()
        .map(|r| map.lookup(r.trim()).ok_or_else(|| Error::UnmappedRating(r.clone())))
        .collect::<Result<Vec<_>>>()?;
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() == 1 {
        log::warn!(
            "every rating maps to bucket `{}`; downstream classifiers need at least two classes",
            map.buckets[labels[0]]
        );
    }
    Ok((labels, map.buckets.clone()))
}

/// Drops classes with no rows, re-indexing the remaining ones in order.
pub fn compact_classes(labels: Vec<usize>, class_names: Vec<String>) -> (Vec<usize>, Vec<String>) {
    let mut present = vec![false; class_names.len()];
    for &l in &labels {
        present[l] = true;
    }
    if present.iter().all(|&p| p) {
        return (labels, class_names);
    }
    let mut remap = vec![usize::MAX; class_names.len()];
    let mut kept = Vec::new();
    for (i, name) in class_names.into_iter().enumerate() {
        if present[i] {
            remap[i] = kept.len();
            kept.push(name);
        } else {
            log::warn!("bucket `{name}` has no rows and is dropped");
        }
    }
    (labels.into_iter().map(|l| remap[l]).collect(), kept)
}

/// Per-feature mean and population standard deviation from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub exempt: BTreeSet<usize>,
}

impl StandardizationStats {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.means.len())?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            for (j, v) in row.iter_mut().enumerate() {
                if !self.exempt.contains(&j) {
                    *v = (*v - self.means[j]) / self.stds[j];
                }
            }
        }
        Ok(out)
    }
}

pub fn fit_standardizer(train: &Dataset, exempt: &BTreeSet<usize>) -> Result<StandardizationStats> {
    if train.n() == 0 {
        return Err(Error::InvalidArgument("cannot standardize an empty dataset".into()));
    }
    let x = train.features();
    let n = x.rows() as f64;
    let mut means = vec![0.0; x.cols()];
    let mut stds = vec![1.0; x.cols()];
    for j in 0..x.cols() {
        let mean = (0..x.rows()).map(|r| x.get(r, j)).sum::<f64>() / n;
        let var = (0..x.rows()).map(|r| (x.get(r, j) - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        means[j] = mean;
        // summing n copies of v and dividing by n need not give v exactly
        stds[j] = if std <= 1e-12 * mean.abs().max(1.0) { 1.0 } else { std };
    }
    Ok(StandardizationStats {
        feature_names: train.feature_names().to_vec(),
        means,
        stds,
        exempt: exempt.clone(),
    })
}

pub fn apply_standardizer(data: &Dataset, stats: &StandardizationStats) -> Result<Dataset> {
    if data.feature_names() != stats.feature_names.as_slice() {
        return Err(Error::Shape(
            "dataset features differ from those the standardizer was fit on".into(),
        ));
    }
    data.with_features(stats.transform(data.features())?)
}

/// Per-feature clipping bounds at symmetric quantiles, fit on training rows.
/// Off by default in experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileClipper {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub exempt: BTreeSet<usize>,
}

impl QuantileClipper {
    pub fn fit(train: &Dataset, quantile: f64, exempt: &BTreeSet<usize>) -> Result<Self> {
        if !(0.0..0.5).contains(&quantile) {
            return Err(Error::InvalidArgument(format!(
                "clip quantile must be in [0, 0.5), got {quantile}"
            )));
        }
        if train.n() == 0 {
            return Err(Error::InvalidArgument("cannot fit clipper on empty data".into()));
        }
        let x = train.features();
        let mut lower = Vec::with_capacity(x.cols());
        let mut upper = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let mut col = x.column(j);
            col.sort_by(f64::total_cmp);
            let at = |q: f64| {
                let pos = q * (col.len() - 1) as f64;
                let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
                col[lo] + (col[hi] - col[lo]) * (pos - lo as f64)
            };
            lower.push(at(quantile));
            upper.push(at(1.0 - quantile));
        }
        Ok(QuantileClipper {
            lower,
            upper,
            exempt: exempt.clone(),
        })
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.lower.len())?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                if !self.exempt.contains(&j) {
                    *v = v.clamp(self.lower[j], self.upper[j]);
                }
            }
        }
        Ok(out)
    }
}

fn rows_by_class(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Stratified split of row indices into (train, test), both ascending.
///
/// The train total is `round(fraction * n)`; per class it is the floor or
/// ceiling of `fraction * count`, assigned by largest remainder with ties to
/// the lower class index, and always leaves at least one row on each side.
pub fn split_indices(
    labels: &[usize],
    class_names: &[String],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let by_class = rows_by_class(labels, class_names.len());
    for (c, rows) in by_class.iter().enumerate() {
        if !rows.is_empty() && rows.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: class_names[c].clone(),
                count: rows.len(),
                required: 2,
            });
        }
    }
    let n = labels.len();
    let target = (train_fraction * n as f64 + 0.5).floor() as usize;
    let ideal: Vec<f64> = by_class.iter().map(|r| train_fraction * r.len() as f64).collect();
    let mut alloc: Vec<usize> = ideal.iter().map(|v| v.floor() as usize).collect();
    let mut order: Vec<usize> = (0..by_class.len()).filter(|&c| !by_class[c].is_empty()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (ideal[a] - ideal[a].floor(), ideal[b] - ideal[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = target.saturating_sub(alloc.iter().sum());
    for &c in &order {
        if remaining == 0 {
            break;
        }
        if alloc[c] < by_class[c].len() {
            alloc[c] += 1;
            remaining -= 1;
        }
    }
    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(n - target);
    for (c, rows) in by_class.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let take = alloc[c].clamp(1, rows.len() - 1);
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut seed::rng(seed::derive(seed, &[0x5911, c as u64])));
        train.extend_from_slice(&shuffled[..take]);
        test.extend_from_slice(&shuffled[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.labels(), data.class_names(), train_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Fold index for every row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k_folds: usize,
    pub assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_folds];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified fold assignment over raw labels.
///
/// Rows are shuffled within each class, the classes are laid end to end, and
/// the sequence is dealt to folds round-robin. Each class then lands in every
/// fold `floor` or `ceil` of `count / k` times and the fold sizes differ by at
/// most one, with the larger folds first.
pub fn stratified_folds(labels: &[usize], class_names: &[String], k_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if k_folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "k_folds must be at least 2, got {k_folds}"
        )));
    }
    let by_class = rows_by_class(labels, class_names.len());
    for (c, rows) in by_class.iter().enumerate() {
        if !rows.is_empty() && rows.len() < k_folds {
            return Err(Error::ClassTooSmall {
                class: class_names[c].clone(),
                count: rows.len(),
                required: k_folds,
            });
        }
    }
    let mut assignment = vec![0; labels.len()];
    let mut position = 0usize;
    for (c, rows) in by_class.iter().enumerate() {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut seed::rng(seed::derive(seed, &[0xf01d, c as u64])));
        for r in shuffled {
            assignment[r] = position % k_folds;
            position += 1;
        }
    }
    Ok(FoldAssignment { k_folds, assignment })
}

pub fn stratified_k_fold(data: &Dataset, k_folds: usize, seed: u64) -> Result<FoldAssignment> {
    stratified_folds(data.labels(), data.class_names(), k_folds, seed)
}
