use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, DEFAULT_FOLDS};
use super::methods::{train_method, HyperParam, Method, MethodSettings};
use super::preprocess::{Preprocessing, ReductionSpec};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::{stratified_split_indices, stratified_subsample_indices, Metric, MetricSet};
use crate::seed::{derive_seed, stream};
use crate::stats::{bonferroni, wilcoxon_signed_rank, PMethod, PairedSample};

/// Settings shared by the repeated-split benchmark and the fraction sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    /// Benchmark: number of train/test partitions. Sweep: subsamples per fraction.
    pub n_splits: usize,
    pub train_fraction: f64,
    pub reduction: ReductionSpec,
    pub folds: usize,
    pub seed: u64,
    pub settings: MethodSettings,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Sa, Method::Random, Method::Field, Method::Rbm, Method::Ridge],
            n_splits: 100,
            train_fraction: 0.8,
            reduction: ReductionSpec::Pca { k: 44 },
            folds: DEFAULT_FOLDS,
            seed: 0,
            settings: MethodSettings::default(),
        }
    }
}

impl BenchmarkConfig {
    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Empty("no methods selected"));
        }
        let mut seen = self.methods.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Domain("method list contains duplicates".into()));
        }
        if self.n_splits == 0 {
            return Err(Error::Domain("n_splits must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seed of benchmark partition `split` (and of sweep subsample `split` at fraction 1).
pub fn split_seed(master: u64, split: usize) -> u64 {
    derive_seed(master, stream::SPLIT, split as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Benchmark,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
}

impl DatasetSummary {
    pub fn of(data: &LabeledDataset) -> Self {
        Self {
            n_samples: data.n_samples(),
            n_features: data.n_features(),
            n_classes: data.n_classes(),
            class_names: data.class_names().to_vec(),
            class_counts: data.class_counts(),
        }
    }
}

/// Outcome of one method on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub fraction: Option<f64>,
    pub split_id: usize,
    pub method: Method,
    pub hyperparameter: HyperParam,
    /// Mean validation balanced accuracy of the chosen grid point.
    pub cv_score: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub test: MetricSet,
    pub train: MetricSet,
    /// Train minus test balanced accuracy.
    pub overfit_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sem: f64,
}

impl Summary {
    /// Mean and standard error (sample standard deviation over √n).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sem = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Self { mean, sem }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub fraction: Option<f64>,
    pub method: Method,
    pub n_splits: usize,
    pub accuracy: Summary,
    pub balanced_accuracy: Summary,
    pub auc: Summary,
    pub f1: Summary,
    pub train_balanced_accuracy: Summary,
    pub overfit_gap: Summary,
}

impl AggregateRow {
    pub fn metric(&self, metric: Metric) -> Summary {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::BalancedAccuracy => self.balanced_accuracy,
            Metric::Auc => self.auc,
            Metric::F1 => self.f1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub fraction: Option<f64>,
    pub metric: Metric,
    pub method_a: Method,
    pub method_b: Method,
    pub statistic: f64,
    pub n_effective: usize,
    pub p_method: PMethod,
    pub p_value: f64,
    pub p_adjusted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: ReportKind,
    pub master_seed: u64,
    /// Full configuration of the run; callers may replace it with a richer one.
    pub config_snapshot: serde_json::Value,
    pub dataset: DatasetSummary,
    /// Sample ids of the fixed held-out test set (sweeps only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_out_test_ids: Option<Vec<String>>,
    pub per_split_metrics: Vec<SplitRecord>,
    pub aggregate: Vec<AggregateRow>,
    /// Comparisons per Bonferroni family: method pairs × metrics, within
    /// each fraction.
    pub bonferroni_family_size: usize,
    pub pairwise_tests: Vec<PairwiseTest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
}

impl RunReport {
    pub fn aggregate_for(&self, fraction: Option<f64>, method: Method) -> Option<&AggregateRow> {
        self.aggregate
            .iter()
            .find(|r| r.fraction == fraction && r.method == method)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per (split, method), with `provenance` pairs as leading
    /// constant columns.
    pub fn write_metrics_csv<W: Write>(&self, out: W, provenance: &[(&str, String)]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = provenance.iter().map(|(k, _)| k.to_string()).collect();
        header.extend(
            ["fraction", "split_id", "method", "hyperparameter", "cv_score", "n_train", "n_test"]
                .map(String::from),
        );
        for prefix in ["test", "train"] {
            for m in Metric::ALL {
                header.push(format!("{prefix}_{}", m.name()));
            }
        }
        header.push("overfit_gap".into());
        w.write_record(&header)?;
        for r in &self.per_split_metrics {
            let mut row: Vec<String> = provenance.iter().map(|(_, v)| v.clone()).collect();
            row.push(r.fraction.map(|f| format!("{f:?}")).unwrap_or_default());
            row.push(r.split_id.to_string());
            row.push(r.method.to_string());
            row.push(r.hyperparameter.to_string());
            row.push(r.cv_score.map(|v| format!("{v:?}")).unwrap_or_default());
            row.push(r.n_train.to_string());
            row.push(r.n_test.to_string());
            for set in [&r.test, &r.train] {
                for m in Metric::ALL {
                    row.push(format!("{:?}", set.get(m)));
                }
            }
            row.push(format!("{:?}", r.overfit_gap));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per (fraction, method) with mean and SEM of every metric.
    pub fn write_aggregate_csv<W: Write>(&self, out: W, provenance: &[(&str, String)]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = provenance.iter().map(|(k, _)| k.to_string()).collect();
        header.extend(["fraction", "method", "n_splits"].map(String::from));
        let names: Vec<&str> = Metric::ALL
            .iter()
            .map(|m| m.name())
            .chain(["train_balanced_accuracy", "overfit_gap"])
            .collect();
        for n in &names {
            header.push(format!("{n}_mean"));
            header.push(format!("{n}_sem"));
        }
        w.write_record(&header)?;
        for a in &self.aggregate {
            let mut row: Vec<String> = provenance.iter().map(|(_, v)| v.clone()).collect();
            row.push(a.fraction.map(|f| format!("{f:?}")).unwrap_or_default());
            row.push(a.method.to_string());
            row.push(a.n_splits.to_string());
            let sums = Metric::ALL
                .iter()
                .map(|&m| a.metric(m))
                .chain([a.train_balanced_accuracy, a.overfit_gap]);
            for s in sums {
                row.push(format!("{:?}", s.mean));
                row.push(format!("{:?}", s.sem));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Preprocess, select hyperparameters, train and score every method on one
/// train/test pair.
fn run_unit(
    train_raw: &LabeledDataset,
    test_raw: &LabeledDataset,
    config: &BenchmarkConfig,
    unit_seed: u64,
    split_id: usize,
    fraction: Option<f64>,
) -> Result<Vec<SplitRecord>> {
    let wrap = |method: &str, e: Error| Error::Split {
        split_id,
        method: method.to_string(),
        source: Box::new(e),
    };
    let pre = Preprocessing::fit(train_raw, &config.reduction).map_err(|e| wrap("preprocessing", e))?;
    let train = pre.apply(train_raw).map_err(|e| wrap("preprocessing", e))?;
    let test = pre.apply(test_raw).map_err(|e| wrap("preprocessing", e))?;
    config
        .methods
        .iter()
        .map(|&method| {
            let run = || -> Result<SplitRecord> {
                let grid = config.settings.grid(method);
                let cv_seed = derive_seed(unit_seed, stream::CV, method.id());
                let cv = cross_validate(&train, method, &grid, &config.settings, config.folds, cv_seed)?;
                let train_seed = derive_seed(unit_seed, stream::SOLVER, method.id());
                let model = train_method(method, &train, &cv.best, &config.settings, train_seed)?;
                let test_m = model.evaluate(&test)?;
                let train_m = model.evaluate(&train)?;
                Ok(SplitRecord {
                    fraction,
                    split_id,
                    method,
                    hyperparameter: cv.best,
                    cv_score: cv.scores.get(cv.best_index).copied(),
                    n_train: train.n_samples(),
                    n_test: test.n_samples(),
                    overfit_gap: train_m.balanced_accuracy - test_m.balanced_accuracy,
                    test: test_m,
                    train: train_m,
                })
            };
            run().map_err(|e| wrap(method.name(), e))
        })
        .collect()
}

/// Runs work units in parallel and returns their records in unit order;
/// the first failing unit (in order) aborts the run.
fn run_units<F>(n: usize, unit: F) -> Result<Vec<SplitRecord>>
where
    F: Fn(usize) -> Result<Vec<SplitRecord>> + Sync,
{
    let results: Vec<Result<Vec<SplitRecord>>> = (0..n).into_par_iter().map(&unit).collect();
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    Ok(records)
}

fn aggregate(records: &[SplitRecord], fractions: &[Option<f64>], methods: &[Method]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &fraction in fractions {
        for &method in methods {
            let group: Vec<&SplitRecord> = records
                .iter()
                .filter(|r| r.fraction == fraction && r.method == method)
                .collect();
            if group.is_empty() {
                continue;
            }
            let of = |f: &dyn Fn(&SplitRecord) -> f64| Summary::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            rows.push(AggregateRow {
                fraction,
                method,
                n_splits: group.len(),
                accuracy: of(&|r| r.test.accuracy),
                balanced_accuracy: of(&|r| r.test.balanced_accuracy),
                auc: of(&|r| r.test.auc),
                f1: of(&|r| r.test.f1),
                train_balanced_accuracy: of(&|r| r.train.balanced_accuracy),
                overfit_gap: of(&|r| r.overfit_gap),
            });
        }
    }
    rows
}

/// Wilcoxon tests for every method pair and metric, Bonferroni-corrected
/// within each fraction. Returns the tests and the family size.
fn pairwise(records: &[SplitRecord], fractions: &[Option<f64>], methods: &[Method]) -> Result<(Vec<PairwiseTest>, usize)> {
    let n_pairs = methods.len() * (methods.len().saturating_sub(1)) / 2;
    let family = n_pairs * Metric::ALL.len();
    let mut tests = Vec::new();
    for &fraction in fractions {
        let values = |method: Method, metric: Metric| -> Vec<f64> {
            records
                .iter()
                .filter(|r| r.fraction == fraction && r.method == method)
                .map(|r| r.test.get(metric))
                .collect()
        };
        let mut group = Vec::with_capacity(family);
        for metric in Metric::ALL {
            for (i, &a) in methods.iter().enumerate() {
                for &b in &methods[i + 1..] {
                    let pair = PairedSample::new(values(a, metric), values(b, metric))?;
                    let w = wilcoxon_signed_rank(&pair);
                    group.push(PairwiseTest {
                        fraction,
                        metric,
                        method_a: a,
                        method_b: b,
                        statistic: w.statistic,
                        n_effective: w.n_effective,
                        p_method: w.method,
                        p_value: w.p_value,
                        p_adjusted: w.p_value,
                    });
                }
            }
        }
        let raw: Vec<f64> = group.iter().map(|t| t.p_value).collect();
        for (t, adj) in group.iter_mut().zip(bonferroni(&raw, family)?) {
            t.p_adjusted = adj;
        }
        tests.extend(group);
    }
    Ok((tests, family))
}

fn notices(data: &LabeledDataset) -> Vec<String> {
    let counts = data.class_counts();
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(k, _)| format!("class {} has no samples", data.class_names()[k]))
        .collect()
}

/// Repeated stratified train/test evaluation of every configured method.
///
/// Split `s` is drawn from a seed that depends only on the master seed and
/// `s`; method seeds additionally mix in the method's stable id, so adding
/// or removing methods leaves every other result unchanged.
pub fn run_benchmark(data: &LabeledDataset, config: &BenchmarkConfig) -> Result<RunReport> {
    config.validate()?;
    let records = run_units(config.n_splits, |s| {
        let seed = split_seed(config.seed, s);
        let (tr, te) = stratified_split_indices(data, config.train_fraction, seed).map_err(|e| Error::Split {
            split_id: s,
            method: "split".into(),
            source: Box::new(e),
        })?;
        run_unit(&data.subset(&tr), &data.subset(&te), config, seed, s, None)
    })?;
    let groups = [None];
    let (pairwise_tests, family) = pairwise(&records, &groups, &config.methods)?;
    Ok(RunReport {
        kind: ReportKind::Benchmark,
        master_seed: config.seed,
        config_snapshot: serde_json::to_value(config)?,
        dataset: DatasetSummary::of(data),
        held_out_test_ids: None,
        aggregate: aggregate(&records, &groups, &config.methods),
        per_split_metrics: records,
        bonferroni_family_size: family,
        pairwise_tests,
        notices: notices(data),
    })
}

/// Training-set-size sweep against one fixed held-out test set.
///
/// The held-out partition is benchmark split 0 of the same master seed.
/// For each fraction, `config.n_splits` independent class-balanced
/// subsamples of the training pool are drawn and every method is trained on
/// each. At fraction 1 subsample `s` reuses the seeds of benchmark split `s`.
pub fn fraction_sweep(data: &LabeledDataset, config: &BenchmarkConfig, fractions: &[f64]) -> Result<RunReport> {
    config.validate()?;
    if fractions.is_empty() {
        return Err(Error::Empty("no training fractions"));
    }
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Domain(format!("training fraction must lie in (0, 1], got {f}")));
        }
    }
    let (pool_idx, test_idx) = stratified_split_indices(data, config.train_fraction, split_seed(config.seed, 0))?;
    let pool = data.subset(&pool_idx);
    let test = data.subset(&test_idx);

    let units: Vec<(f64, usize)> = fractions
        .iter()
        .flat_map(|&f| (0..config.n_splits).map(move |s| (f, s)))
        .collect();
    let records = run_units(units.len(), |u| {
        let (f, s) = units[u];
        let unit_seed = if f == 1.0 {
            split_seed(config.seed, s)
        } else {
            derive_seed(split_seed(config.seed, s), stream::SUBSAMPLE, f.to_bits())
        };
        let keep = stratified_subsample_indices(&pool, f, derive_seed(unit_seed, stream::SUBSAMPLE, 0)).map_err(|e| {
            Error::Split {
                split_id: s,
                method: format!("subsample at fraction {f}"),
                source: Box::new(e),
            }
        })?;
        run_unit(&pool.subset(&keep), &test, config, unit_seed, s, Some(f))
    })?;
    let groups: Vec<Option<f64>> = fractions.iter().map(|&f| Some(f)).collect();
    let (pairwise_tests, family) = pairwise(&records, &groups, &config.methods)?;
    Ok(RunReport {
        kind: ReportKind::Sweep,
        master_seed: config.seed,
        config_snapshot: serde_json::json!({ "benchmark": config, "fractions": fractions }),
        dataset: DatasetSummary::of(data),
        held_out_test_ids: Some(test.sample_ids().to_vec()),
        aggregate: aggregate(&records, &groups, &config.methods),
        per_split_metrics: records,
        bonferroni_family_size: family,
        pairwise_tests,
        notices: notices(data),
    })
}
