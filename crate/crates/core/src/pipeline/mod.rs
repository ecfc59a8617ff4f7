//! Experimental protocol: preprocessing fitted on training data only,
//! cross-validated hyperparameter selection, repeated-split benchmarking
//! and training-fraction sweeps.

mod cv;
mod methods;
mod preprocess;
mod protocol;
mod ridge;

pub use cv::{cross_validate, cross_validate_with, ridge_logistic_baseline, CvOutcome, DEFAULT_FOLDS};
pub use methods::{
    train_method, Classifier, ExhaustiveSettings, HyperParam, Method, MethodSettings, RandomSettings,
    RbmSettings, SaSettings,
};
pub use preprocess::{PcaModel, Preprocessing, Reduction, ReductionSpec, ZScoreStats};
pub use protocol::{
    fraction_sweep, run_benchmark, split_seed, AggregateRow, BenchmarkConfig, DatasetSummary,
    PairwiseTest, ReportKind, RunReport, SplitRecord, Summary,
};
pub use ridge::{fit_ridge_logistic, ridge_gradient_norm, ridge_objective, RidgeFit, RidgeSettings};
