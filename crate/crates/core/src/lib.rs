//! Two-stage Bayesian variable selection for categorical case-control data.
//!
//! Stage 1 searches regression space for predictor sets with high exact
//! marginal likelihood under a conjugate prior with equal fictive cell
//! counts; stage 2 searches the hierarchical log-linear models over each top
//! regression for the best interaction structure. Fitted models are averaged
//! into a classifier whose accuracy is assessed by stratified k-fold
//! cross-validation. A moving-window scan, an optimal binary recoder for
//! diallelic SNPs and a disease-model simulator round out the toolkit.
//!
//! All randomized procedures are deterministic given a seed; scores and
//! weights are handled on the natural-log scale throughout.

mod error;
pub mod math;

mod linalg;

pub mod data;
pub mod evidence;
pub mod loglin;
pub mod pipeline;
pub mod predict;
pub mod report;
pub mod search;
pub mod sim;
pub mod stage2;
pub mod window;

pub use data::{
    contingency_table, contingency_table_filtered, load_dataset, load_dimens_sidecar,
    ContingencyTable, Dataset, DimensSpec,
};
pub use error::{Error, Result};
pub use evidence::{
    log_marglik_regression, log_marglik_saturated, LogEvidence, PriorConfig,
};
pub use loglin::{
    dual_generators, fit_posterior_mode, log_marglik_loglinear, model_neighborhood,
    FittedModel, FittedTerm, GeneratingClass, SufficientStats,
};
pub use pipeline::{run_moss_pipeline, MossOutcome, RegressionAnalysis};
pub use predict::{cross_validate, roc_auc, Classifier, CvReport, SelectedComponent};
pub use report::{build_run_report, code_map_tsv, window_tsv, RunReport};
pub use search::{
    moss_stage1, posterior_inclusion_probs, regression_neighborhood, Regression, SearchConfig,
    Stage1Result,
};
pub use sim::{simulate_dataset, SimConfig};
pub use stage2::{moss_stage2, Stage2Result};
pub use window::{moving_window, recode_data, RecodeResult, WindowResult, WindowRow};
