use std::collections::BTreeSet;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use super::bundle::{ModelBundle, TrainedModel, BUNDLE_FORMAT, BUNDLE_VERSION};
use super::config::{ExperimentConfig, Variant};
use super::report::{
    Cell, CellResult, DatasetSummary, ImportanceSection, Provenance, RunReport, SelectionSummary, REPORT_FORMAT,
    REPORT_VERSION,
};
use crate::classifiers::{self, ClassifierSpec};
use crate::dataset::{
    apply_standardizer, fit_standardizer, load_csv, split_indices, stratified_folds, stratified_k_fold, Dataset,
    FoldAssignment, StandardizationStats,
};
use crate::ecoc::{fit_ecoc, make_matrix, CodingMatrix};
use crate::lasso::{default_lambda_grid, restrict, select_features_with, FeatureSelection, LassoOptions};
use crate::metrics::{accuracy, evaluate, MetricReport};
use crate::pfi::{importance_table, PfiOptions};
use crate::{seed, Error, Predictor, Result};

const SPLIT_STREAM: u64 = 0x5e1;
const FOLD_STREAM: u64 = 0xf0;
const INNER_STREAM: u64 = 0x1aa;
const ECOC_STREAM: u64 = 0xec0c;
const PFI_STREAM: u64 = 0x9f1;
const FINAL_FIT: u64 = u64::MAX;

/// Which training set a preprocessing artifact was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Training rows of a CV fold (the training split minus that fold).
    Fold(usize),
    /// The whole training split, for the final model.
    Final,
}

impl Stage {
    fn id(self) -> u64 {
        match self {
            Stage::Fold(f) => f as u64,
            Stage::Final => FINAL_FIT,
        }
    }
}

/// Instrumentation hooks called as preprocessing artifacts are fitted.
pub trait Observer: Sync {
    fn standardizer(&self, _stage: Stage, _stats: &StandardizationStats) {}
    fn selection(&self, _stage: Stage, _selection: &FeatureSelection) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

/// Row bookkeeping of a run: the stratified train/test split and the CV
/// folds, indexed within the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub folds: FoldAssignment,
}

impl Plan {
    pub fn new(config: &ExperimentConfig, data: &Dataset) -> Result<Self> {
        let (train_rows, test_rows) = split_indices(
            data.labels(),
            data.class_names(),
            config.train_fraction,
            seed::derive(config.seed, &[SPLIT_STREAM]),
        )?;
        let train_labels: Vec<usize> = train_rows.iter().map(|&r| data.labels()[r]).collect();
        let folds = stratified_folds(
            &train_labels,
            data.class_names(),
            config.k_folds,
            seed::derive(config.seed, &[FOLD_STREAM]),
        )?;
        Ok(Plan {
            train_rows,
            test_rows,
            folds,
        })
    }

    /// Dataset row indices (not training-split positions) of fold `f`'s
    /// held-out part.
    pub fn fold_test_rows(&self, f: usize) -> Vec<usize> {
        self.folds
            .test_indices(f)
            .into_iter()
            .map(|i| self.train_rows[i])
            .collect()
    }

    fn stage_rows(&self, stage: Stage) -> (Vec<usize>, Vec<usize>) {
        match stage {
            Stage::Fold(f) => {
                let map = |v: Vec<usize>| v.into_iter().map(|i| self.train_rows[i]).collect();
                (map(self.folds.train_indices(f)), map(self.folds.test_indices(f)))
            }
            Stage::Final => (self.train_rows.clone(), self.test_rows.clone()),
        }
    }
}

struct Selected {
    selection: FeatureSelection,
    train: Dataset,
    eval: Dataset,
}

/// Standardized (and optionally LASSO-restricted) train/eval pair for one stage.
struct Prepared {
    stats: StandardizationStats,
    train: Dataset,
    eval: Dataset,
    lasso: Option<std::result::Result<Selected, String>>,
}

fn exempt_indices(config: &ExperimentConfig, data: &Dataset) -> BTreeSet<usize> {
    config
        .data
        .standardize_exempt
        .iter()
        .filter_map(|name| data.feature_index(name))
        .collect()
}

fn lasso_options(config: &ExperimentConfig) -> LassoOptions {
    LassoOptions {
        tol: config.lasso.tol,
        max_iter: config.lasso.max_iter,
        ..LassoOptions::default()
    }
}

fn select(config: &ExperimentConfig, train: &Dataset, stage: Stage) -> Result<FeatureSelection> {
    let grid = if config.lasso.lambdas.is_empty() {
        default_lambda_grid(train, config.lasso.grid_size, config.lasso.min_ratio)?
    } else {
        config.lasso.lambdas.clone()
    };
    let inner = stratified_k_fold(
        train,
        config.k_folds,
        seed::derive(config.seed, &[INNER_STREAM, stage.id()]),
    )?;
    select_features_with(train, &grid, &inner, &lasso_options(config))
}

fn prepare(
    config: &ExperimentConfig,
    data: &Dataset,
    plan: &Plan,
    stage: Stage,
    need_lasso: bool,
    observer: &dyn Observer,
) -> Result<Prepared> {
    let (train_rows, eval_rows) = plan.stage_rows(stage);
    let raw_train = data.subset(&train_rows);
    let stats = fit_standardizer(&raw_train, &exempt_indices(config, data))?;
    observer.standardizer(stage, &stats);
    let train = apply_standardizer(&raw_train, &stats)?;
    let eval = apply_standardizer(&data.subset(&eval_rows), &stats)?;
    let lasso = need_lasso.then(|| {
        let run = || -> Result<Selected> {
            let selection = select(config, &train, stage)?;
            observer.selection(stage, &selection);
            Ok(Selected {
                train: restrict(&train, &selection)?,
                eval: restrict(&eval, &selection)?,
                selection,
            })
        };
        run().map_err(|e| format!("feature selection failed: {e}"))
    });
    Ok(Prepared {
        stats,
        train,
        eval,
        lasso,
    })
}

/// Loads the configured CSV and buckets its ratings.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let raw = load_csv(&config.data.path, &config.schema())?;
    raw.into_dataset(&config.rating_map()?)
}

/// The coding matrix for ECOC variants: the pinned file if configured,
/// otherwise generated from the scheme.
pub fn coding_matrix(config: &ExperimentConfig, k: usize) -> Result<CodingMatrix> {
    if let Some(path) = &config.ecoc.matrix {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m = CodingMatrix::from_json(&text)?;
        if m.k() != k {
            return Err(Error::Config(format!(
                "pinned coding matrix has {} rows but the data has {k} classes",
                m.k()
            )));
        }
        return Ok(m);
    }
    make_matrix(
        config.ecoc.scheme,
        k,
        config.ecoc.length,
        seed::derive(config.seed, &[ECOC_STREAM]),
        config.ecoc.max_attempts,
    )
}

fn fit_model(
    variant: Variant,
    spec: &ClassifierSpec,
    matrix: Option<&CodingMatrix>,
    train: &Dataset,
) -> Result<TrainedModel> {
    if variant.uses_ecoc() {
        let matrix = matrix.ok_or_else(|| Error::Config("no coding matrix available".into()))?;
        Ok(TrainedModel::Ecoc(fit_ecoc(spec, matrix, train)?))
    } else {
        Ok(TrainedModel::Single(classifiers::fit(spec, train)?))
    }
}

fn stage_data(variant: Variant, prep: &Prepared) -> Result<(&Dataset, &Dataset)> {
    if variant.uses_lasso() {
        match &prep.lasso {
            Some(Ok(s)) => Ok((&s.train, &s.eval)),
            Some(Err(e)) => Err(Error::InvalidArgument(e.clone())),
            None => Err(Error::Config("feature selection was not prepared".into())),
        }
    } else {
        Ok((&prep.train, &prep.eval))
    }
}

fn assess(model: &TrainedModel, data: &Dataset) -> Result<MetricReport> {
    let x = data.features();
    let scores = model.score(x)?;
    let pred = model.predict(x)?;
    evaluate(data.labels(), &pred, &scores)
}

/// Everything shared by the cells of a run.
struct Context<'a> {
    config: &'a ExperimentConfig,
    folds: Vec<Prepared>,
    last: Prepared,
    matrix: Option<std::result::Result<CodingMatrix, String>>,
}

impl<'a> Context<'a> {
    fn build(
        config: &'a ExperimentConfig,
        data: &Dataset,
        plan: &Plan,
        variants: &[Variant],
        observer: &dyn Observer,
    ) -> Result<Self> {
        let need_lasso = variants.iter().any(|v| v.uses_lasso());
        let need_ecoc = variants.iter().any(|v| v.uses_ecoc());
        let mut stages: Vec<Stage> = (0..config.k_folds).map(Stage::Fold).collect();
        stages.push(Stage::Final);
        let mut prepared = stages
            .par_iter()
            .map(|&s| prepare(config, data, plan, s, need_lasso, observer))
            .collect::<Result<Vec<_>>>()?;
        let last = prepared.pop().expect("final stage present");
        let matrix = need_ecoc.then(|| coding_matrix(config, data.k()).map_err(|e| e.to_string()));
        Ok(Context {
            config,
            folds: prepared,
            last,
            matrix,
        })
    }

    fn matrix(&self, variant: Variant) -> Result<Option<&CodingMatrix>> {
        if !variant.uses_ecoc() {
            return Ok(None);
        }
        match &self.matrix {
            Some(Ok(m)) => Ok(Some(m)),
            Some(Err(e)) => Err(Error::Config(format!("coding matrix unavailable: {e}"))),
            None => Err(Error::Config("coding matrix was not prepared".into())),
        }
    }

    fn run_cell(&self, variant: Variant, index: usize) -> (Cell, Option<TrainedModel>) {
        let spec = self.config.cell_spec(variant, index);
        let classifier = self.config.classifier_labels()[index].clone();
        let mut cell = Cell {
            variant,
            classifier,
            algorithm: spec.algorithm(),
            spec: spec.clone(),
            result: None,
            error: None,
        };
        match self.evaluate_cell(variant, &spec) {
            Ok((result, model)) => {
                cell.result = Some(result);
                (cell, Some(model))
            }
            Err(e) => {
                log::warn!("cell {variant}/{} failed: {e}", cell.classifier);
                cell.error = Some(e.to_string());
                (cell, None)
            }
        }
    }

    fn evaluate_cell(&self, variant: Variant, spec: &ClassifierSpec) -> Result<(CellResult, TrainedModel)> {
        let matrix = self.matrix(variant)?;
        let cv_start = Instant::now();
        let mut reports = Vec::with_capacity(self.folds.len());
        let mut fit_times = Vec::with_capacity(self.folds.len());
        for (f, prep) in self.folds.iter().enumerate() {
            let (train, eval) = stage_data(variant, prep)?;
            let fold_spec = spec.with_seed(seed::derive(spec.seed, &[f as u64]));
            let start = Instant::now();
            let model = fit_model(variant, &fold_spec, matrix, train)?;
            fit_times.push(start.elapsed().as_secs_f64());
            reports.push(assess(&model, eval)?);
        }
        let cv_time = cv_start.elapsed().as_secs_f64();

        let (train, eval) = stage_data(variant, &self.last)?;
        let final_spec = spec.with_seed(seed::derive(spec.seed, &[FINAL_FIT]));
        let start = Instant::now();
        let model = fit_model(variant, &final_spec, matrix, train)?;
        let training_time = start.elapsed().as_secs_f64();
        let holdout = assess(&model, eval)?;
        let train_score = accuracy(train.labels(), &model.predict(train.features())?);

        let fold_accuracy: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
        let mut result = CellResult {
            cv: MetricReport::mean(&reports).expect("at least two folds"),
            cv_mean_score: fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64,
            fold_accuracy,
            mean_training_time_seconds: fit_times.iter().sum::<f64>() / fit_times.len() as f64,
            training_time_seconds: training_time,
            cv_time_seconds: cv_time,
            holdout,
            train_score,
            feature_count_used: train.p(),
        };
        result.round_timings();
        Ok((result, model))
    }

    fn bundle(&self, data: &Dataset, cell: &Cell, model: TrainedModel) -> Result<ModelBundle> {
        let selection = match (cell.variant.uses_lasso(), &self.last.lasso) {
            (true, Some(Ok(s))) => Some(s.selection.clone()),
            (true, _) => return Err(Error::Config("feature selection unavailable".into())),
            (false, _) => None,
        };
        Ok(ModelBundle {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            variant: cell.variant,
            classifier: cell.classifier.clone(),
            schema: self.config.schema(),
            rating_map: self.config.rating_map()?,
            class_names: data.class_names().to_vec(),
            levels: data.categorical().to_vec(),
            standardizer: self.last.stats.clone(),
            selection,
            model,
        })
    }
}

/// Report plus the model bundle used for importance (if any).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub pfi_model: Option<ModelBundle>,
}

/// Runs one (variant, classifier) cell in isolation. `spec` overrides the
/// hyperparameters of classifier slot 0 with its seed kept as given.
pub fn run_variant(config: &ExperimentConfig, variant: Variant, spec: &ClassifierSpec) -> Result<Cell> {
    let data = load_dataset(config)?;
    run_variant_on(config, &data, variant, spec)
}

pub fn run_variant_on(
    config: &ExperimentConfig,
    data: &Dataset,
    variant: Variant,
    spec: &ClassifierSpec,
) -> Result<Cell> {
    let mut single = config.clone();
    single.classifiers = vec![spec.hyperparameters.clone()];
    single.variants = vec![variant];
    single.validate()?;
    let plan = Plan::new(&single, data)?;
    let ctx = Context::build(&single, data, &plan, &[variant], &NoObserver)?;
    let mut cell = Cell {
        variant,
        classifier: spec.algorithm().tag().to_string(),
        algorithm: spec.algorithm(),
        spec: spec.clone(),
        result: None,
        error: None,
    };
    match ctx.evaluate_cell(variant, spec) {
        Ok((r, _)) => cell.result = Some(r),
        Err(e) => cell.error = Some(e.to_string()),
    }
    Ok(cell)
}

/// Loads the data and runs the full grid. Only a data load failure is fatal.
pub fn run_all(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let data = load_dataset(config)?;
    run_all_on(config, &data, &NoObserver)
}

pub fn run_all_on(config: &ExperimentConfig, data: &Dataset, observer: &dyn Observer) -> Result<RunOutput> {
    config.validate()?;
    let plan = Plan::new(config, data)?;
    let ctx = Context::build(config, data, &plan, &config.variants, observer)?;

    let mut cells = Vec::new();
    let mut baseline_models = Vec::new();
    for &variant in &config.variants {
        for index in 0..config.classifiers.len() {
            let (cell, model) = ctx.run_cell(variant, index);
            if variant == Variant::Baseline {
                if let Some(m) = model {
                    baseline_models.push((cells.len(), m));
                }
            }
            cells.push(cell);
        }
    }

    let (selection, selection_error) = match &ctx.last.lasso {
        Some(Ok(s)) => (
            Some(SelectionSummary {
                feature_count: s.selection.selected.len(),
                selected: s.selection.selected_names(),
                lambda_used: s.selection.lambda_used,
                per_class_lambda: s.selection.per_class_lambda.clone(),
                fold_feature_counts: ctx
                    .folds
                    .iter()
                    .map(|p| match &p.lasso {
                        Some(Ok(s)) => s.selection.selected.len(),
                        _ => 0,
                    })
                    .collect(),
            }),
            None,
        ),
        Some(Err(e)) => (None, Some(e.clone())),
        None => (None, None),
    };

    // importance on the best baseline model by CV score, first on ties
    let mut best: Option<(usize, TrainedModel)> = None;
    for (i, m) in baseline_models {
        let score = cells[i].result.as_ref().map_or(f64::NEG_INFINITY, |r| r.cv_mean_score);
        let better = match &best {
            None => true,
            Some((b, _)) => score > cells[*b].result.as_ref().map_or(f64::NEG_INFINITY, |r| r.cv_mean_score),
        };
        if better {
            best = Some((i, m));
        }
    }
    let mut importance = None;
    let mut importance_error = None;
    let mut pfi_model = None;
    if let Some((i, model)) = best {
        let cell = &cells[i];
        if config.pfi.enabled {
            let options = PfiOptions {
                repeats: config.pfi.repeats,
                seed: seed::derive(config.seed, &[PFI_STREAM]),
                mode: config.pfi.mode,
                metric: config.pfi.metric,
            };
            let eval = &ctx.last.eval;
            match importance_table(
                &model,
                eval.features(),
                eval.labels(),
                eval.feature_names(),
                eval.class_names(),
                &options,
            ) {
                Ok(table) => {
                    importance = Some(ImportanceSection {
                        variant: cell.variant,
                        classifier: cell.classifier.clone(),
                        evaluated_on: "test".into(),
                        table,
                    })
                }
                Err(e) => importance_error = Some(e.to_string()),
            }
        }
        match ctx.bundle(data, cell, model) {
            Ok(b) => pfi_model = Some(b),
            Err(e) => log::warn!("could not assemble model bundle: {e}"),
        }
    } else if config.variants.contains(&Variant::Baseline) && config.pfi.enabled {
        importance_error = Some("no baseline cell succeeded".into());
    }

    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let report = RunReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        provenance: Provenance {
            seed: config.seed,
            config_hash: config.hash(),
            timestamp,
            tool_version: env!("CARGO_PKG_VERSION").into(),
        },
        dataset: DatasetSummary {
            rows: data.n(),
            features: data.p(),
            feature_names: data.feature_names().to_vec(),
            class_names: data.class_names().to_vec(),
            class_counts: data.class_counts(),
            train_rows: plan.train_rows.len(),
            test_rows: plan.test_rows.len(),
            k_folds: config.k_folds,
        },
        selection,
        selection_error,
        coding_matrix: match &ctx.matrix {
            Some(Ok(m)) => Some(m.clone()),
            _ => None,
        },
        cells,
        importance,
        importance_error,
    };
    Ok(RunOutput { report, pfi_model })
}
