use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{Algorithm, ClassifierSpec, Hyperparameters};
use crate::dataset::{CsvSchema, RatingMap};
use crate::ecoc::Scheme;
use crate::pfi::{LossMetric, Mode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    Ecoc,
    Lasso,
    LassoEcoc,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Ecoc, Variant::Lasso, Variant::LassoEcoc];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Ecoc => "ecoc",
            Variant::Lasso => "lasso",
            Variant::LassoEcoc => "lasso_ecoc",
        }
    }

    pub fn uses_lasso(self) -> bool {
        matches!(self, Variant::Lasso | Variant::LassoEcoc)
    }

    pub fn uses_ecoc(self) -> bool {
        matches!(self, Variant::Ecoc | Variant::LassoEcoc)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag.trim().to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "svg" => Some(Format::Svg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    /// Rating map text file; the built-in four-bucket map when absent.
    #[serde(default)]
    pub rating_map: Option<PathBuf>,
    /// Column layout; the corporate ratings layout when absent.
    #[serde(default)]
    pub schema: Option<CsvSchema>,
    /// Feature columns left unscaled by the standardizer.
    #[serde(default = "default_exempt")]
    pub standardize_exempt: Vec<String>,
}

fn default_exempt() -> Vec<String> {
    vec!["Sector".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    /// Explicit penalty grid; generated from the data when empty.
    pub lambdas: Vec<f64>,
    pub grid_size: usize,
    pub min_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambdas: Vec::new(),
            grid_size: 50,
            min_ratio: 1e-3,
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcocConfig {
    pub scheme: Scheme,
    /// Code length for dense random codes.
    pub length: usize,
    pub max_attempts: usize,
    /// Pins an exact coding matrix (JSON); overrides `scheme`.
    pub matrix: Option<PathBuf>,
}

impl Default for EcocConfig {
    fn default() -> Self {
        EcocConfig {
            scheme: Scheme::OneVsAll,
            length: 10,
            max_attempts: 200,
            matrix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfiConfig {
    pub enabled: bool,
    pub repeats: usize,
    pub mode: Mode,
    pub metric: LossMetric,
}

impl Default for PfiConfig {
    fn default() -> Self {
        PfiConfig {
            enabled: true,
            repeats: 30,
            mode: Mode::Difference,
            metric: LossMetric::ErrorRate,
        }
    }
}

fn default_seed() -> u64 {
    42
}

fn default_k_folds() -> usize {
    3
}

fn default_train_fraction() -> f64 {
    0.7
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn default_classifiers() -> Vec<Hyperparameters> {
    Algorithm::ALL.into_iter().map(Hyperparameters::default_for).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("report")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<Hyperparameters>,
    #[serde(default)]
    pub lasso: LassoConfig,
    #[serde(default)]
    pub ecoc: EcocConfig,
    #[serde(default)]
    pub pfi: PfiConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl ExperimentConfig {
    /// A config with every default and the given data file.
    pub fn with_data(path: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            data: DataConfig {
                path: path.into(),
                rating_map: None,
                schema: None,
                standardize_exempt: default_exempt(),
            },
            seed: default_seed(),
            k_folds: default_k_folds(),
            train_fraction: default_train_fraction(),
            variants: default_variants(),
            classifiers: default_classifiers(),
            lasso: LassoConfig::default(),
            ecoc: EcocConfig::default(),
            pfi: PfiConfig::default(),
            output_dir: default_output_dir(),
            formats: default_formats(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parses a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.data.path);
        if let Some(p) = config.data.rating_map.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.ecoc.matrix.as_mut() {
            resolve(p);
        }
        resolve(&mut config.output_dir);
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.k_folds < 2 {
            return fail(format!("k_folds must be at least 2, got {}", self.k_folds));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if self.variants.is_empty() {
            return fail("at least one variant is required".into());
        }
        if self.classifiers.is_empty() {
            return fail("at least one classifier is required".into());
        }
        let unique: BTreeSet<_> = self.variants.iter().collect();
        if unique.len() != self.variants.len() {
            return fail("variants are listed more than once".into());
        }
        for h in &self.classifiers {
            h.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let l = &self.lasso;
        if l.lambdas.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return fail("lasso.lambdas must be finite and nonnegative".into());
        }
        if l.lambdas.is_empty() && l.grid_size == 0 {
            return fail("lasso.grid_size must be at least 1".into());
        }
        if !(l.min_ratio > 0.0 && l.min_ratio <= 1.0) {
            return fail("lasso.min_ratio must lie in (0, 1]".into());
        }
        if l.tol.is_nan() || l.tol <= 0.0 || l.max_iter == 0 {
            return fail("lasso.tol must be positive and lasso.max_iter at least 1".into());
        }
        if self.ecoc.max_attempts == 0 {
            return fail("ecoc.max_attempts must be at least 1".into());
        }
        if self.pfi.repeats == 0 {
            return fail("pfi.repeats must be at least 1".into());
        }
        Ok(())
    }

    pub fn schema(&self) -> CsvSchema {
        self.data.schema.clone().unwrap_or_else(CsvSchema::corporate_ratings)
    }

    pub fn rating_map(&self) -> Result<RatingMap> {
        match &self.data.rating_map {
            Some(p) => RatingMap::from_file(p),
            None => Ok(RatingMap::default_corporate()),
        }
    }

    /// Classifier labels, suffixed with their position when an algorithm
    /// appears more than once.
    pub fn classifier_labels(&self) -> Vec<String> {
        let tags: Vec<Algorithm> = self.classifiers.iter().map(Hyperparameters::algorithm).collect();
        tags.iter()
            .enumerate()
            .map(|(i, a)| {
                if tags.iter().filter(|b| *b == a).count() > 1 {
                    format!("{a}#{i}")
                } else {
                    a.tag().to_string()
                }
            })
            .collect()
    }

    /// Spec for classifier `index` in `variant`, seeded from the master seed.
    pub fn cell_spec(&self, variant: Variant, index: usize) -> ClassifierSpec {
        let seed = crate::seed::derive(self.seed, &[crate::seed::hash_str(variant.tag()), index as u64]);
        ClassifierSpec::new(self.classifiers[index].clone(), seed)
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
