//! Config-driven experiment harness.
//!
//! A run splits the data into a stratified training split and a held-out
//! test split, then cross-validates every (variant, classifier) cell on the
//! training split. Standardizer statistics and LASSO selections are fitted on
//! each fold's training rows only, once per fold, and shared by all cells.
//! The final model of each cell is refit on the whole training split and
//! scored on the test split.

mod bundle;
mod config;
mod report;
mod runner;

pub use bundle::{ModelBundle, TrainedModel};
pub use config::{DataConfig, EcocConfig, ExperimentConfig, Format, LassoConfig, PfiConfig, Variant};
pub use report::{
    emit_report, write_atomic, Cell, CellResult, DatasetSummary, ImportanceSection, Provenance, RunReport,
    SelectionSummary,
};
pub use runner::{
    coding_matrix, load_dataset, run_all, run_all_on, run_variant, run_variant_on, NoObserver, Observer, Plan,
    RunOutput, Stage,
};
