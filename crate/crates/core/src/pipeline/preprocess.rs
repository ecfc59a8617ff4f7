use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{check_len, Error, Result};

/// Standard deviations below this are treated as zero.
const MIN_STD: f64 = 1e-12;

/// Per-feature mean and (population) standard deviation of a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScoreStats {
    pub means: DVector<f64>,
    pub stds: DVector<f64>,
    /// Features whose std was below the threshold; their std is stored as 1.
    pub flagged: Vec<usize>,
}

impl ZScoreStats {
    pub fn fit(train: &LabeledDataset) -> Result<Self> {
        let n = train.n_samples();
        if n == 0 {
            return Err(Error::Empty("cannot fit z-score on an empty training set"));
        }
        let x = train.features();
        let means = x.row_mean().transpose();
        let mut stds = DVector::zeros(x.ncols());
        let mut flagged = Vec::new();
        for j in 0..x.ncols() {
            let var = x.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            if sd < MIN_STD {
                flagged.push(j);
                stds[j] = 1.0;
            } else {
                stds[j] = sd;
            }
        }
        Ok(Self {
            means,
            stds,
            flagged,
        })
    }

    pub fn apply(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        check_len("z-score features", self.means.len(), data.n_features())?;
        let mut x = data.features().clone();
        for j in 0..x.ncols() {
            let (mu, sd) = (self.means[j], self.stds[j]);
            x.column_mut(j).apply(|v| *v = (*v - mu) / sd);
        }
        data.with_features(x, data.feature_names().to_vec())
    }

    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("z-score features", self.means.len(), x.len())?;
        Ok(x.iter()
            .enumerate()
            .map(|(j, v)| (v - self.means[j]) / self.stds[j])
            .collect())
    }
}

/// Principal components of a (centred) training matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// k × M, orthonormal rows; the largest-magnitude entry of each row is positive.
    pub components: DMatrix<f64>,
    /// Variance of the training projection on each component, non-increasing.
    pub explained_variance: DVector<f64>,
    pub center: DVector<f64>,
}

impl PcaModel {
    /// Top-`k` right singular vectors of the centred training matrix.
    pub fn fit(train: &LabeledDataset, k: usize) -> Result<Self> {
        let (n, m) = (train.n_samples(), train.n_features());
        let limit = m.min(n);
        if k == 0 || k > limit {
            return Err(Error::Capacity {
                what: "principal components",
                required: k,
                limit,
            });
        }
        let center = train.features().row_mean().transpose();
        let mut centred = train.features().clone();
        for mut row in centred.row_iter_mut() {
            row -= center.transpose();
        }
        let svd = centred.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let sv = svd.singular_values;
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

        let mut components = DMatrix::zeros(k, m);
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let mut explained = DVector::zeros(k);
        for (r, &i) in order.iter().take(k).enumerate() {
            let mut row = v_t.row(i).into_owned();
            let lead = (0..m)
                .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()).then(b.cmp(&a)))
                .expect("at least one feature");
            if row[lead] < 0.0 {
                row.neg_mut();
            }
            components.set_row(r, &row);
            explained[r] = sv[i] * sv[i] / denom;
        }
        Ok(Self {
            components,
            explained_variance: explained,
            center,
        })
    }

    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    /// `(X − center) · componentsᵀ`.
    pub fn project(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        check_len("pca features", self.center.len(), data.n_features())?;
        let mut x = data.features().clone();
        for mut row in x.row_iter_mut() {
            row -= self.center.transpose();
        }
        let projected = x * self.components.transpose();
        let names = (0..self.k()).map(|i| format!("PC{}", i + 1)).collect();
        data.with_features(projected, names)
    }

    pub fn project_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("pca features", self.center.len(), x.len())?;
        let v = DVector::from_column_slice(x) - &self.center;
        Ok((&self.components * v).iter().copied().collect())
    }

    /// Indices of the `n` largest-magnitude loadings of the first component,
    /// by decreasing magnitude (ties by index).
    pub fn top_features_by_pc1(&self, n: usize) -> Result<Vec<usize>> {
        let m = self.components.ncols();
        if n > m {
            return Err(Error::Capacity {
                what: "top PC1 features",
                required: n,
                limit: m,
            });
        }
        let pc1 = self.components.row(0);
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| pc1[b].abs().total_cmp(&pc1[a].abs()).then(a.cmp(&b)));
        idx.truncate(n);
        Ok(idx)
    }
}

/// How features are reduced after z-scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReductionSpec {
    /// Use the z-scored features as they are.
    None,
    /// Project onto the top `k` principal components.
    Pca { k: usize },
    /// Keep the `n` original features with the largest PC1 loadings.
    Pc1Features { n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reduction {
    None,
    Pca(PcaModel),
    Features { indices: Vec<usize> },
}

/// Fitted transform from raw features to model inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub zscore: ZScoreStats,
    pub reduction: Reduction,
}

impl Preprocessing {
    /// Fits on `train` only.
    pub fn fit(train: &LabeledDataset, spec: &ReductionSpec) -> Result<Self> {
        let zscore = ZScoreStats::fit(train)?;
        let reduction = match spec {
            ReductionSpec::None => Reduction::None,
            ReductionSpec::Pca { k } => Reduction::Pca(PcaModel::fit(&zscore.apply(train)?, *k)?),
            ReductionSpec::Pc1Features { n } => {
                let pca = PcaModel::fit(&zscore.apply(train)?, 1)?;
                Reduction::Features {
                    indices: pca.top_features_by_pc1(*n)?,
                }
            }
        };
        Ok(Self { zscore, reduction })
    }

    pub fn apply(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        let z = self.zscore.apply(data)?;
        match &self.reduction {
            Reduction::None => Ok(z),
            Reduction::Pca(p) => p.project(&z),
            Reduction::Features { indices } => z.select_features(indices),
        }
    }

    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.zscore.apply_row(x)?;
        match &self.reduction {
            Reduction::None => Ok(z),
            Reduction::Pca(p) => p.project_row(&z),
            Reduction::Features { indices } => Ok(indices.iter().map(|&i| z[i]).collect()),
        }
    }
}
