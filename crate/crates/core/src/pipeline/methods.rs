use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::preprocess::Preprocessing;
use super::ridge::{train_ridge, RidgeSettings};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::{argmax, evaluate_with, MetricSet, TrainedModel};
use crate::formulation::{build_multiclass_problem_with_capacity, DEFAULT_CAPACITY};
use crate::rbm::{train_rbm, RbmModel, RbmTrainConfig};
use crate::solvers::{
    ensemble_average, exhaustive_solve_top, field_solve, random_search, simulated_anneal,
    AnnealSchedule, DEFAULT_ENSEMBLE_SIZE, DEFAULT_RANDOM_SAMPLES,
};

/// Training methods compared by the protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sa,
    Random,
    Field,
    Exhaustive,
    Rbm,
    Ridge,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Sa,
        Method::Random,
        Method::Field,
        Method::Exhaustive,
        Method::Rbm,
        Method::Ridge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sa => "sa",
            Method::Random => "random",
            Method::Field => "field",
            Method::Exhaustive => "exhaustive",
            Method::Rbm => "rbm",
            Method::Ridge => "ridge",
        }
    }

    /// Stable identifier used to derive per-method seeds.
    pub fn id(self) -> u64 {
        match self {
            Method::Sa => 1,
            Method::Random => 2,
            Method::Field => 3,
            Method::Exhaustive => 4,
            Method::Rbm => 5,
            Method::Ridge => 6,
        }
    }

    /// Methods that train by minimising the Ising energy.
    pub fn is_ising(self) -> bool {
        matches!(self, Method::Sa | Method::Random | Method::Field | Method::Exhaustive)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown method `{s}` (expected one of sa, random, field, exhaustive, rbm, ridge)"
                ))
            })
    }
}

/// A single point of a method's hyperparameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "value", rename_all = "snake_case")]
pub enum HyperParam {
    None,
    BetaFinal(f64),
    Epochs(usize),
    Lambda(f64),
}

impl fmt::Display for HyperParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperParam::None => f.write_str("none"),
            HyperParam::BetaFinal(b) => write!(f, "beta_final={b}"),
            HyperParam::Epochs(e) => write!(f, "epochs={e}"),
            HyperParam::Lambda(l) => write!(f, "lambda={l}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaSettings {
    pub sweeps: usize,
    pub beta_initial: f64,
    pub beta_final_grid: Vec<f64>,
    pub restarts: usize,
    pub top_n: usize,
}

impl Default for SaSettings {
    fn default() -> Self {
        let s = AnnealSchedule::default();
        Self {
            sweeps: s.sweeps,
            beta_initial: s.beta_initial,
            beta_final_grid: AnnealSchedule::BETA_FINAL_GRID.to_vec(),
            restarts: 1000,
            top_n: DEFAULT_ENSEMBLE_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomSettings {
    pub samples: usize,
    pub top_n: usize,
}

impl Default for RandomSettings {
    fn default() -> Self {
        Self {
            samples: DEFAULT_RANDOM_SAMPLES,
            top_n: DEFAULT_ENSEMBLE_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExhaustiveSettings {
    pub top_n: usize,
}

impl Default for ExhaustiveSettings {
    fn default() -> Self {
        Self {
            top_n: DEFAULT_ENSEMBLE_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbmSettings {
    pub n_hidden: usize,
    pub cd_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs_grid: Vec<usize>,
}

impl Default for RbmSettings {
    fn default() -> Self {
        let c = RbmTrainConfig::default();
        Self {
            n_hidden: c.n_hidden,
            cd_steps: c.cd_steps,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            epochs_grid: vec![20, 50],
        }
    }
}

/// Solver and model settings for every method, including the grids
/// searched by cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodSettings {
    /// Largest Ising problem the builder accepts.
    pub capacity: usize,
    pub sa: SaSettings,
    pub random: RandomSettings,
    pub exhaustive: ExhaustiveSettings,
    pub rbm: RbmSettings,
    pub ridge: RidgeSettings,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            capacity: DEFAULT_CAPACITY,
            sa: SaSettings::default(),
            random: RandomSettings::default(),
            exhaustive: ExhaustiveSettings::default(),
            rbm: RbmSettings::default(),
            ridge: RidgeSettings::default(),
        }
    }
}

impl MethodSettings {
    /// Hyperparameter grid searched for `method`.
    pub fn grid(&self, method: Method) -> Vec<HyperParam> {
        match method {
            Method::Sa => self.sa.beta_final_grid.iter().map(|&b| HyperParam::BetaFinal(b)).collect(),
            Method::Rbm => self.rbm.epochs_grid.iter().map(|&e| HyperParam::Epochs(e)).collect(),
            Method::Ridge => self.ridge.lambda_grid.iter().map(|&l| HyperParam::Lambda(l)).collect(),
            Method::Random | Method::Field | Method::Exhaustive => vec![HyperParam::None],
        }
    }
}

/// A trained model of any method, with the transform from raw features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Linear(TrainedModel),
    Rbm {
        model: RbmModel,
        preprocessing: Option<Preprocessing>,
    },
}

impl Classifier {
    /// Class probabilities for an already-preprocessed sample.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Classifier::Linear(m) => m.predict_proba(x),
            Classifier::Rbm { model, .. } => model.predict_proba(x),
        }
    }

    /// Class probabilities for a raw sample.
    pub fn predict_proba_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.preprocessing() {
            Some(p) => self.predict_proba(&p.apply_row(x)?),
            None => self.predict_proba(x),
        }
    }

    pub fn classify_raw(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba_raw(x)?))
    }

    pub fn preprocessing(&self) -> Option<&Preprocessing> {
        match self {
            Classifier::Linear(m) => m.preprocessing.as_ref(),
            Classifier::Rbm { preprocessing, .. } => preprocessing.as_ref(),
        }
    }

    pub fn set_preprocessing(&mut self, p: Option<Preprocessing>) {
        match self {
            Classifier::Linear(m) => m.preprocessing = p,
            Classifier::Rbm { preprocessing, .. } => *preprocessing = p,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Classifier::Linear(m) => m.n_classes,
            Classifier::Rbm { model, .. } => model.n_classes(),
        }
    }

    /// Metrics on a dataset already in model space.
    pub fn evaluate(&self, data: &LabeledDataset) -> Result<MetricSet> {
        evaluate_with(data, |x| self.predict_proba(x))
    }

    /// Metrics on a dataset of raw features.
    pub fn evaluate_raw(&self, data: &LabeledDataset) -> Result<MetricSet> {
        match self.preprocessing() {
            Some(p) => self.evaluate(&p.apply(data)?),
            None => self.evaluate(data),
        }
    }
}

fn mismatch(method: Method, hp: &HyperParam) -> Error {
    Error::Domain(format!("hyperparameter {hp} does not apply to method {method}"))
}

/// Trains `method` on already-preprocessed data.
pub fn train_method(
    method: Method,
    data: &LabeledDataset,
    hp: &HyperParam,
    settings: &MethodSettings,
    seed: u64,
) -> Result<Classifier> {
    match method {
        Method::Rbm => {
            let epochs = match hp {
                HyperParam::Epochs(e) => *e,
                HyperParam::None => RbmTrainConfig::default().epochs,
                other => return Err(mismatch(method, other)),
            };
            let r = &settings.rbm;
            let config = RbmTrainConfig {
                cd_steps: r.cd_steps,
                batch_size: r.batch_size,
                learning_rate: r.learning_rate,
                epochs,
                n_hidden: r.n_hidden,
                seed,
            };
            Ok(Classifier::Rbm {
                model: train_rbm(data, &config)?,
                preprocessing: None,
            })
        }
        Method::Ridge => {
            let lambda = match hp {
                HyperParam::Lambda(l) => *l,
                other => return Err(mismatch(method, other)),
            };
            Ok(Classifier::Linear(train_ridge(data, lambda, &settings.ridge)?))
        }
        _ => train_ising(method, data, hp, settings, seed).map(Classifier::Linear),
    }
}

/// Build, rescale to unit magnitude, solve, and average the low-energy
/// configurations into weights in `[-1, 1]`.
fn train_ising(
    method: Method,
    data: &LabeledDataset,
    hp: &HyperParam,
    settings: &MethodSettings,
    seed: u64,
) -> Result<TrainedModel> {
    let built = build_multiclass_problem_with_capacity(data, Some(settings.capacity))?;
    let problem = built.problem.scale_to_unit()?;
    let weights = match method {
        Method::Sa => {
            let beta_final = match hp {
                HyperParam::BetaFinal(b) => *b,
                HyperParam::None => AnnealSchedule::default().beta_final,
                other => return Err(mismatch(method, other)),
            };
            let s = &settings.sa;
            let schedule = AnnealSchedule::new(s.sweeps, s.beta_initial, beta_final)?;
            let result = simulated_anneal(&problem, &schedule, s.restarts, seed)?;
            ensemble_average(&problem, &result, s.top_n)?
        }
        Method::Random => {
            let s = &settings.random;
            let result = random_search(&problem, s.samples, seed)?;
            ensemble_average(&problem, &result, s.top_n)?
        }
        Method::Field => field_solve(&problem).to_real(),
        Method::Exhaustive => {
            let top = settings.exhaustive.top_n;
            let result = exhaustive_solve_top(&problem, top.max(1))?;
            ensemble_average(&problem, &result, top)?
        }
        Method::Rbm | Method::Ridge => unreachable!("not an Ising method"),
    };
    TrainedModel::new(built.layout.to_weight_matrix(&weights)?, data.n_classes(), method.name())
}
