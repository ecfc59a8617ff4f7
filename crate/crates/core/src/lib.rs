//! Classification by Ising energy minimization.
//!
//! A labelled dataset is turned into an Ising problem whose ground state
//! encodes binary classifier weights ([`formulation`]). The problem is
//! solved by simulated annealing, random search, a field-only rule or
//! exhaustive enumeration ([`solvers`]), and the low-energy configurations
//! are averaged into final weights. A classification RBM ([`rbm`]) and a
//! ridge-penalised logistic model serve as comparators, and [`pipeline`]
//! runs the repeated-split evaluation protocol with the metrics in
//! [`eval`] and the paired tests in [`stats`].

pub mod dataset;
pub mod error;
pub mod eval;
pub mod formulation;
pub mod ising;
pub mod pipeline;
pub mod rbm;
pub mod seed;
pub mod solvers;
pub mod stats;
pub mod synth;

pub use dataset::LabeledDataset;
pub use error::{Error, Result};
pub use eval::{compute_metrics, Metric, MetricSet, TrainedModel};
pub use formulation::{
    build_binomial_problem, build_multiclass_problem, exact_nll, BuildIntermediates, BuiltProblem,
};
pub use ising::{ClassBlockLayout, IsingProblem, SpinConfiguration};
pub use pipeline::{
    fraction_sweep, run_benchmark, BenchmarkConfig, Classifier, Method, MethodSettings, Preprocessing,
    ReductionSpec, RunReport,
};
pub use rbm::{RbmModel, RbmTrainConfig};
pub use solvers::{
    ensemble_average, exhaustive_solve, field_solve, random_search, simulated_anneal,
    AnnealSchedule, SolveResult,
};
pub use stats::{bonferroni, wilcoxon_signed_rank, PairedSample, WilcoxonResult};
pub use synth::SyntheticSpec;
