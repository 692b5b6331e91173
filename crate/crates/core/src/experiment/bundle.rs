use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Variant;
use crate::classifiers::FittedClassifier;
use crate::dataset::{
    apply_standardizer, load_csv_with_levels, map_ratings, CategoricalColumn, CsvSchema, Dataset, RatingMap,
    StandardizationStats,
};
use crate::ecoc::EcocModel;
use crate::lasso::{restrict, FeatureSelection};
use crate::{Error, Matrix, Predictor, Result};

/// A single classifier or an ECOC ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Single(FittedClassifier),
    Ecoc(EcocModel),
}

impl TrainedModel {
    pub fn training_time(&self) -> f64 {
        match self {
            TrainedModel::Single(m) => m.training_time,
            TrainedModel::Ecoc(m) => m.training_time(),
        }
    }
}

impl Predictor for TrainedModel {
    fn n_classes(&self) -> usize {
        match self {
            TrainedModel::Single(m) => m.n_classes(),
            TrainedModel::Ecoc(m) => m.n_classes(),
        }
    }

    fn n_features(&self) -> usize {
        match self {
            TrainedModel::Single(m) => m.n_features(),
            TrainedModel::Ecoc(m) => m.n_features(),
        }
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Single(m) => m.predict(x),
            TrainedModel::Ecoc(m) => m.predict(x),
        }
    }

    fn score(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            TrainedModel::Single(m) => m.score(x),
            TrainedModel::Ecoc(m) => m.score(x),
        }
    }
}

pub const BUNDLE_FORMAT: &str = "riskforge-model";
pub const BUNDLE_VERSION: u32 = 1;

/// Everything needed to score a raw CSV: input layout, rating map,
/// categorical levels, standardizer, feature selection and model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub variant: Variant,
    pub classifier: String,
    pub schema: CsvSchema,
    pub rating_map: RatingMap,
    pub class_names: Vec<String>,
    pub levels: Vec<CategoricalColumn>,
    pub standardizer: StandardizationStats,
    pub selection: Option<FeatureSelection>,
    pub model: TrainedModel,
}

impl ModelBundle {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bundle: ModelBundle = serde_json::from_str(&text)?;
        if bundle.format != BUNDLE_FORMAT || bundle.version != BUNDLE_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{} is not a version {BUNDLE_VERSION} model bundle",
                path.display()
            )));
        }
        Ok(bundle)
    }

    /// Loads a CSV in the bundle's layout and labels it with the bundle's
    /// classes; the features are returned unscaled.
    pub fn load_dataset(&self, path: &Path) -> Result<Dataset> {
        let raw = load_csv_with_levels(path, &self.schema, &self.levels)?;
        let (bucket_labels, bucket_names) = map_ratings(&raw.ratings, &self.rating_map)?;
        let labels = bucket_labels
            .iter()
            .map(|&b| {
                self.class_names
                    .iter()
                    .position(|c| *c == bucket_names[b])
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "bucket `{}` was not seen when the model was trained",
                            bucket_names[b]
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(
            Dataset::from_parts(raw.features, raw.feature_names, labels, self.class_names.clone())?
                .with_categorical(raw.categorical),
        )
    }

    /// Standardizes and, if the model was trained on a selection, restricts.
    pub fn prepare(&self, data: &Dataset) -> Result<Dataset> {
        let scaled = apply_standardizer(data, &self.standardizer)?;
        match &self.selection {
            Some(sel) => restrict(&scaled, sel),
            None => Ok(scaled),
        }
    }
}
