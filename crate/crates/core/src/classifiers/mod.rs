//! Six base learners behind one fit / predict / score interface.
//!
//! Every learner scores a row with a length-k vector that sums to 1, and
//! `predict` is always the argmax of that vector with ties going to the
//! lowest class index. Parallel training derives each subtask's seed from the
//! spec seed and the subtask index, so fitted models do not depend on thread
//! scheduling.

mod forest;
mod gbt;
mod knn;
mod mlp;
mod svm;
pub(crate) mod tree;

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use forest::Forest;
pub use gbt::Boosted;
pub use knn::NearestNeighbors;
pub use mlp::Network;
pub use svm::LinearSvm;
pub use tree::Tree;

use crate::dataset::Dataset;
use crate::{argmax, Error, Matrix, Predictor, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    DT,
    RF,
    GBT,
    KNN,
    SVM,
    MLP,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::DT,
        Algorithm::RF,
        Algorithm::GBT,
        Algorithm::KNN,
        Algorithm::SVM,
        Algorithm::MLP,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::DT => "DT",
            Algorithm::RF => "RF",
            Algorithm::GBT => "GBT",
            Algorithm::KNN => "KNN",
            Algorithm::SVM => "SVM",
            Algorithm::MLP => "MLP",
        }
    }

    pub fn parse(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag().eq_ignore_ascii_case(tag))
    }

    /// Whether the learner depends on feature scale.
    pub fn needs_standardized_input(self) -> bool {
        matches!(self, Algorithm::KNN | Algorithm::SVM | Algorithm::MLP)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(12),
            min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features examined per split; `None` means floor(sqrt(p)).
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            max_features: None,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 150,
            learning_rate: 0.1,
            max_depth: 4,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub regularization: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            regularization: 1e-3,
            epochs: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_units: 64,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm")]
pub enum Hyperparameters {
    DT(TreeParams),
    RF(ForestParams),
    GBT(GbtParams),
    KNN(KnnParams),
    SVM(SvmParams),
    MLP(MlpParams),
}

impl Hyperparameters {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::DT => Hyperparameters::DT(TreeParams::default()),
            Algorithm::RF => Hyperparameters::RF(ForestParams::default()),
            Algorithm::GBT => Hyperparameters::GBT(GbtParams::default()),
            Algorithm::KNN => Hyperparameters::KNN(KnnParams::default()),
            Algorithm::SVM => Hyperparameters::SVM(SvmParams::default()),
            Algorithm::MLP => Hyperparameters::MLP(MlpParams::default()),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Hyperparameters::DT(_) => Algorithm::DT,
            Hyperparameters::RF(_) => Algorithm::RF,
            Hyperparameters::GBT(_) => Algorithm::GBT,
            Hyperparameters::KNN(_) => Algorithm::KNN,
            Hyperparameters::SVM(_) => Algorithm::SVM,
            Hyperparameters::MLP(_) => Algorithm::MLP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let algorithm = self.algorithm().tag();
        let fail = |message: &str| {
            Err(Error::Hyperparameter {
                algorithm,
                message: message.to_string(),
            })
        };
        let rate_ok = |r: f64| r.is_finite() && r > 0.0;
        match self {
            Hyperparameters::DT(p) => {
                if p.max_depth == Some(0) {
                    return fail("max_depth must be at least 1");
                }
                if p.min_samples_leaf == 0 {
                    return fail("min_samples_leaf must be at least 1");
                }
            }
            Hyperparameters::RF(p) => {
                if p.n_trees == 0 {
                    return fail("n_trees must be at least 1");
                }
                if p.max_depth == Some(0) {
                    return fail("max_depth must be at least 1");
                }
                if p.max_features == Some(0) {
                    return fail("max_features must be at least 1");
                }
                if p.min_samples_leaf == 0 {
                    return fail("min_samples_leaf must be at least 1");
                }
            }
            Hyperparameters::GBT(p) => {
                if p.n_rounds == 0 {
                    return fail("n_rounds must be at least 1");
                }
                if !rate_ok(p.learning_rate) {
                    return fail("learning_rate must be positive");
                }
                if p.max_depth == 0 {
                    return fail("max_depth must be at least 1");
                }
                if p.min_samples_leaf == 0 {
                    return fail("min_samples_leaf must be at least 1");
                }
            }
            Hyperparameters::KNN(p) => {
                if p.k == 0 {
                    return fail("k must be at least 1");
                }
            }
            Hyperparameters::SVM(p) => {
                if !rate_ok(p.regularization) {
                    return fail("regularization must be positive");
                }
                if p.epochs == 0 {
                    return fail("epochs must be at least 1");
                }
            }
            Hyperparameters::MLP(p) => {
                if p.hidden_units == 0 {
                    return fail("hidden_units must be at least 1");
                }
                if !rate_ok(p.learning_rate) {
                    return fail("learning_rate must be positive");
                }
                if p.epochs == 0 {
                    return fail("epochs must be at least 1");
                }
                if p.batch_size == 0 {
                    return fail("batch_size must be at least 1");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(hyperparameters: Hyperparameters, seed: u64) -> Self {
        ClassifierSpec { hyperparameters, seed }
    }

    pub fn default_for(algorithm: Algorithm, seed: u64) -> Self {
        Self::new(Hyperparameters::default_for(algorithm), seed)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.hyperparameters.algorithm()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self::new(self.hyperparameters.clone(), seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Tree(Tree<Vec<f64>>),
    Forest(Forest),
    Boosted(Boosted),
    Neighbors(NearestNeighbors),
    Svm(LinearSvm),
    Mlp(Network),
}

impl Model {
    fn score_row(&self, row: &[f64]) -> Vec<f64> {
        match self {
            Model::Tree(t) => t.leaf(row).clone(),
            Model::Forest(f) => f.score_row(row),
            Model::Boosted(b) => b.score_row(row),
            Model::Neighbors(k) => k.score_row(row),
            Model::Svm(s) => s.score_row(row),
            Model::Mlp(m) => m.forward(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedClassifier {
    pub spec: ClassifierSpec,
    pub n_classes: usize,
    pub n_features: usize,
    /// Wall-clock seconds spent in `fit`.
    pub training_time: f64,
    pub model: Model,
}

pub fn fit(spec: &ClassifierSpec, train: &Dataset) -> Result<FittedClassifier> {
    fit_arrays(spec, train.features(), train.labels(), train.k())
}

/// Fits on a raw matrix; labels must lie in `[0, n_classes)`.
pub fn fit_arrays(spec: &ClassifierSpec, x: &Matrix, labels: &[usize], n_classes: usize) -> Result<FittedClassifier> {
    spec.hyperparameters.validate()?;
    if x.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} labels",
            x.rows(),
            labels.len()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} outside [0, {n_classes})")));
    }
    if n_classes < 2 || labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass);
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features".into()));
    }

    let start = Instant::now();
    let seed = spec.seed;
    let model = match &spec.hyperparameters {
        Hyperparameters::DT(p) => {
            let rows: Vec<usize> = (0..x.rows()).collect();
            let grow = tree::GrowParams {
                max_depth: p.max_depth,
                min_samples_leaf: p.min_samples_leaf,
                max_features: None,
            };
            Model::Tree(tree::grow_classifier(x, labels, n_classes, &rows, grow, None))
        }
        Hyperparameters::RF(p) => Model::Forest(Forest::fit(x, labels, n_classes, p, seed)),
        Hyperparameters::GBT(p) => Model::Boosted(Boosted::fit(x, labels, n_classes, p, cfg!(debug_assertions))),
        Hyperparameters::KNN(p) => Model::Neighbors(NearestNeighbors::fit(x, labels, n_classes, p.k)),
        Hyperparameters::SVM(p) => Model::Svm(LinearSvm::fit(x, labels, n_classes, p, seed)),
        Hyperparameters::MLP(p) => Model::Mlp(Network::fit(x, labels, n_classes, p, seed)),
    };
    Ok(FittedClassifier {
        spec: spec.clone(),
        n_classes,
        n_features: x.cols(),
        training_time: start.elapsed().as_secs_f64(),
        model,
    })
}

impl FittedClassifier {
    pub fn algorithm(&self) -> Algorithm {
        self.spec.algorithm()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Predictor for FittedClassifier {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let scores = self.score(x)?;
        Ok(scores.iter_rows().map(argmax).collect())
    }

    fn score(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.n_features)?;
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .into_par_iter()
            .map(|i| self.model.score_row(x.row(i)))
            .collect();
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        for (i, r) in rows.into_iter().enumerate() {
            out.row_mut(i).copy_from_slice(&r);
        }
        Ok(out)
    }
}
