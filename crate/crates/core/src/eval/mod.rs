//! Stratified cross-validation with a fresh latent graph, threshold choice
//! and validation split in every fold.

mod folds;
mod metrics;
mod report;
mod run;

pub use folds::{carve_validation, fold_seed, stratified_kfold, Carve, FoldPlan};
pub use metrics::{accuracy, macro_f1, mean_std};
pub use report::{Aggregate, EvalReport, FoldResult, MeanStd, Timing};
pub use run::{
    plan_splits, run_cv, run_cv_with_plan, run_fold, run_splits, run_sweep, select_theta, EvalConfig, FoldModel,
    FoldOutcome, FoldSplit, GraphContext, Method, SplitRun, SvdConfig, SweepRow, ThetaMode, ThetaSelection, ThetaTrial,
};
