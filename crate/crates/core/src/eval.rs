//! Prediction, performance metrics and class-balanced splitting.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::pipeline::Preprocessing;
use crate::seed;

/// Reference-class softmax classifier: `K - 1` weight rows, the last class
/// has a fixed logit of zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub weights: DMatrix<f64>,
    pub n_classes: usize,
    /// Transform from raw input features to the space the weights live in.
    pub preprocessing: Option<Preprocessing>,
    pub method: String,
}

impl TrainedModel {
    pub fn new(weights: DMatrix<f64>, n_classes: usize, method: impl Into<String>) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Degenerate("model needs at least two classes".into()));
        }
        check_len("weight rows", n_classes - 1, weights.nrows())?;
        Ok(Self {
            weights,
            n_classes,
            preprocessing: None,
            method: method.into(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    /// Class probabilities for an already-preprocessed sample.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("sample features", self.n_features(), x.len())?;
        let x = DVector::from_column_slice(x);
        let mut logits: Vec<f64> = (&self.weights * x).iter().copied().collect();
        logits.push(0.0);
        Ok(softmax(&logits))
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// The four reported performance metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub auc: f64,
    pub f1: f64,
    /// Notes about metrics computed on incomplete class coverage.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Metric identifiers, in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    BalancedAccuracy,
    Auc,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Accuracy,
        Metric::BalancedAccuracy,
        Metric::Auc,
        Metric::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::Auc => "auc",
            Metric::F1 => "f1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl MetricSet {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::BalancedAccuracy => self.balanced_accuracy,
            Metric::Auc => self.auc,
            Metric::F1 => self.f1,
        }
    }
}

/// Accuracy, balanced accuracy, AUC and F1.
///
/// * Balanced accuracy averages recall over the classes present in
///   `y_true`; absent classes are skipped and noted in `warnings`.
/// * For two classes F1 treats label 0 as positive and AUC is the
///   Mann-Whitney statistic of the class-1 score. For more classes both are
///   macro one-vs-rest averages.
/// * `y_scores[i]` is the per-class probability vector of sample `i`.
pub fn compute_metrics(
    y_true: &[usize],
    y_pred: &[usize],
    y_scores: &[Vec<f64>],
    n_classes: usize,
) -> Result<MetricSet> {
    let n = y_true.len();
    check_len("predictions", n, y_pred.len())?;
    check_len("scores", n, y_scores.len())?;
    if n == 0 {
        return Err(Error::Empty("no samples to score"));
    }
    if n_classes < 2 {
        return Err(Error::Degenerate("metrics need at least two classes".into()));
    }
    for s in y_scores {
        check_len("class scores", n_classes, s.len())?;
    }
    if let Some(&bad) = y_true.iter().chain(y_pred).find(|&&y| y >= n_classes) {
        return Err(Error::Domain(format!("label {bad} out of range")));
    }
    let mut warnings = Vec::new();

    let correct = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    let accuracy = correct as f64 / n as f64;

    // confusion[t][p]
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        confusion[t][p] += 1;
    }
    let support: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
    let predicted: Vec<usize> = (0..n_classes)
        .map(|c| confusion.iter().map(|row| row[c]).sum())
        .collect();

    let mut recalls = Vec::new();
    for c in 0..n_classes {
        if support[c] == 0 {
            warnings.push(format!("class {c} absent from y_true; excluded from balanced accuracy"));
        } else {
            recalls.push(confusion[c][c] as f64 / support[c] as f64);
        }
    }
    let balanced_accuracy = recalls.iter().sum::<f64>() / recalls.len() as f64;

    let f1_of = |c: usize| {
        let tp = confusion[c][c] as f64;
        let denom = (support[c] + predicted[c]) as f64;
        if denom == 0.0 {
            0.0
        } else {
            2.0 * tp / denom
        }
    };
    let f1 = if n_classes == 2 {
        f1_of(0)
    } else {
        let present: Vec<usize> = (0..n_classes)
            .filter(|&c| support[c] > 0 || predicted[c] > 0)
            .collect();
        present.iter().map(|&c| f1_of(c)).sum::<f64>() / present.len() as f64
    };

    let auc = if n_classes == 2 {
        let scores: Vec<f64> = y_scores.iter().map(|s| s[1]).collect();
        let positive: Vec<bool> = y_true.iter().map(|&y| y == 1).collect();
        match auc_binary(&scores, &positive) {
            Some(a) => a,
            None => {
                warnings.push("only one class in y_true; AUC set to 0.5".into());
                0.5
            }
        }
    } else {
        let mut per_class = Vec::new();
        for c in 0..n_classes {
            let scores: Vec<f64> = y_scores.iter().map(|s| s[c]).collect();
            let positive: Vec<bool> = y_true.iter().map(|&y| y == c).collect();
            if let Some(a) = auc_binary(&scores, &positive) {
                per_class.push(a);
            }
        }
        if per_class.is_empty() {
            warnings.push("no class has both positives and negatives; AUC set to 0.5".into());
            0.5
        } else {
            per_class.iter().sum::<f64>() / per_class.len() as f64
        }
    };

    Ok(MetricSet {
        accuracy,
        balanced_accuracy,
        auc,
        f1,
        warnings,
    })
}

/// Area under the ROC curve via the rank-sum statistic: the probability
/// that a random positive scores above a random negative, ties counting
/// one half. `None` when either class is empty.
pub fn auc_binary(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of average ranks (1-based) of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg_rank * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Scores a dataset with any per-sample probability function.
pub fn evaluate_with<F>(data: &LabeledDataset, mut proba: F) -> Result<MetricSet>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut scores = Vec::with_capacity(data.n_samples());
    let mut preds = Vec::with_capacity(data.n_samples());
    for i in 0..data.n_samples() {
        let x: Vec<f64> = data.features().row(i).iter().copied().collect();
        let p = proba(&x)?;
        preds.push(argmax(&p));
        scores.push(p);
    }
    compute_metrics(data.labels(), &preds, &scores, data.n_classes())
}

/// Indices of each class, in dataset order.
fn class_indices(data: &LabeledDataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); data.n_classes()];
    for (i, &y) in data.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    by_class
}

/// Class-balanced train/test partition: each class contributes
/// `round(fraction * n_c)` samples to train, clamped so both sides keep at
/// least one sample of every class present. Indices on each side are in
/// dataset order.
pub fn stratified_split_indices(
    data: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut idx) in class_indices(data).into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {c} has {} sample(s); need at least 2 to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_train = ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(
    data: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = stratified_split_indices(data, train_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Class-balanced subsample keeping `round(fraction * n_c)` of every class.
/// `fraction = 1` returns every index.
pub fn stratified_subsample_indices(
    data: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "subsample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut keep = Vec::new();
    for (c, mut idx) in class_indices(data).into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let n_keep = (fraction * idx.len() as f64).round() as usize;
        if n_keep == 0 {
            return Err(Error::Stratification(format!(
                "fraction {fraction} leaves class {c} with no samples"
            )));
        }
        idx.shuffle(&mut rng);
        keep.extend_from_slice(&idx[..n_keep]);
    }
    keep.sort_unstable();
    Ok(keep)
}

/// Stratified fold assignment: shuffled within each class, then dealt
/// round-robin across folds. Returns `(train, validation)` index pairs.
pub fn stratified_folds(
    data: &LabeledDataset,
    folds: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 {
        return Err(Error::Domain(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = seed::rng(seed);
    let mut assignment = vec![0usize; data.n_samples()];
    let mut offset = 0;
    for (c, mut idx) in class_indices(data).into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {c} has {} sample(s); too few for stratified folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (r, &i) in idx.iter().enumerate() {
            assignment[i] = (offset + r) % folds;
        }
        // Continue dealing where the previous class stopped so small classes
        // do not all land in the first folds.
        offset = (offset + idx.len()) % folds;
    }
    Ok((0..folds)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) =
                (0..data.n_samples()).partition(|&i| assignment[i] == f);
            (train, val)
        })
        .filter(|(_, val)| !val.is_empty())
        .collect())
}
