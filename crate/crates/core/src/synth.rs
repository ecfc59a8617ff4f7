//! Gaussian class-conditional synthetic datasets.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::seed;

/// Class means and covariances. `covariances` holds either one matrix per
/// class or a single matrix shared by all classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub n_per_class: usize,
}

impl SyntheticSpec {
    /// Two classes with means `±delta` on every coordinate, identity covariance.
    pub fn two_class_shift(n_features: usize, delta: f64, n_per_class: usize) -> Result<Self> {
        Ok(Self {
            means: vec![vec![delta; n_features], vec![-delta; n_features]],
            covariances: vec![identity(n_features)],
            n_per_class,
        })
    }

    /// Two classes with means `±delta · e₁`, identity covariance.
    pub fn two_class_axis(n_features: usize, delta: f64, n_per_class: usize) -> Result<Self> {
        let mut a = vec![0.0; n_features];
        a[0] = delta;
        let b = a.iter().map(|v| -v).collect();
        Ok(Self {
            means: vec![a, b],
            covariances: vec![identity(n_features)],
            n_per_class,
        })
    }

    /// `k` classes; class `c` has mean `delta · e_{c mod M}`.
    pub fn multiclass_axes(
        n_classes: usize,
        n_features: usize,
        delta: f64,
        n_per_class: usize,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::Empty("no features"));
        }
        let means = (0..n_classes)
            .map(|c| {
                let mut m = vec![0.0; n_features];
                m[c % n_features] = delta;
                m
            })
            .collect();
        Ok(Self {
            means,
            covariances: vec![identity(n_features)],
            n_per_class,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    pub fn n_features(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Square-root factors of the covariances; errors if any is not
    /// symmetric positive semidefinite.
    fn factors(&self) -> Result<Vec<DMatrix<f64>>> {
        let m = self.n_features();
        if self.n_classes() < 2 {
            return Err(Error::Degenerate("need at least two classes".into()));
        }
        if m == 0 {
            return Err(Error::Empty("no features"));
        }
        if self.n_per_class == 0 {
            return Err(Error::Empty("n_per_class is zero"));
        }
        for mean in &self.means {
            check_len("class mean", m, mean.len())?;
            if mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("non-finite class mean".into()));
            }
        }
        if self.covariances.len() != 1 && self.covariances.len() != self.n_classes() {
            return Err(Error::Dimension {
                what: "covariance count",
                expected: self.n_classes(),
                got: self.covariances.len(),
            });
        }
        self.covariances
            .iter()
            .map(|rows| {
                check_len("covariance rows", m, rows.len())?;
                for r in rows {
                    check_len("covariance columns", m, r.len())?;
                }
                let cov = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
                if cov.iter().any(|v| !v.is_finite()) || (&cov - cov.transpose()).abs().max() > 1e-12 {
                    return Err(Error::Domain("covariance must be finite and symmetric".into()));
                }
                let eig = cov.symmetric_eigen();
                let scale = eig.eigenvalues.abs().max().max(1.0);
                if eig.eigenvalues.min() < -1e-10 * scale {
                    return Err(Error::Domain(format!(
                        "covariance is not positive semidefinite (eigenvalue {:e})",
                        eig.eigenvalues.min()
                    )));
                }
                let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root))
            })
            .collect()
    }

    /// Draws `n_per_class` samples per class, class by class.
    pub fn generate(&self, seed: u64) -> Result<LabeledDataset> {
        let factors = self.factors()?;
        let (k, m, n) = (self.n_classes(), self.n_features(), self.n_per_class);
        let mut rng = seed::rng(seed);
        let mut x = DMatrix::zeros(k * n, m);
        let mut labels = Vec::with_capacity(k * n);
        let mut ids = Vec::with_capacity(k * n);
        for c in 0..k {
            let l = &factors[if factors.len() == 1 { 0 } else { c }];
            let mean = DVector::from_column_slice(&self.means[c]);
            for i in 0..n {
                let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
                let row = &mean + l * z;
                x.set_row(c * n + i, &row.transpose());
                labels.push(c);
                ids.push(format!("c{c:02}_{i:05}"));
            }
        }
        let names = (0..m).map(|j| format!("x{j}")).collect();
        let classes = (0..k).map(|c| format!("c{c:02}")).collect();
        LabeledDataset::new(x, labels, k, names, ids, classes)
    }
}

fn identity(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}
