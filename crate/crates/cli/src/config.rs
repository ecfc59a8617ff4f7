use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use isingml::pipeline::{BenchmarkConfig, Method, MethodSettings, ReductionSpec, DEFAULT_FOLDS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// File-based run configuration. Every field is optional in the file;
/// command-line flags and `ISINGML_*` variables override it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub n_splits: usize,
    pub train_fraction: f64,
    pub folds: usize,
    pub reduction: ReductionSpec,
    pub fractions: Vec<f64>,
    pub settings: MethodSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = BenchmarkConfig::default();
        Self {
            dataset: None,
            out_dir: PathBuf::from("out"),
            threads: None,
            seed: b.seed,
            methods: b.methods,
            n_splits: b.n_splits,
            train_fraction: b.train_fraction,
            folds: DEFAULT_FOLDS,
            reduction: b.reduction,
            fractions: vec![0.95, 0.55, 0.25],
            settings: b.settings,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn benchmark(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            methods: self.methods.clone(),
            n_splits: self.n_splits,
            train_fraction: self.train_fraction,
            reduction: self.reduction.clone(),
            folds: self.folds,
            seed: self.seed,
            settings: self.settings.clone(),
        }
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        match &self.dataset {
            Some(p) => Ok(p),
            None => bail!("no dataset given (use --data or set `dataset` in the config file)"),
        }
    }
}

/// Parses `sa,ridge` style lists.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    let methods = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.parse::<Method>().map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        bail!("empty method list");
    }
    Ok(methods)
}

pub fn parse_fractions(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid fraction `{t}`"))
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
