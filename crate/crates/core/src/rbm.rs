//! Classification restricted Boltzmann machine.
//!
//! The visible layer is the feature vector concatenated with a one-hot
//! label. Feature units are real-valued with linear (Gaussian-mean)
//! reconstructions; label units are a softmax group; hidden units are
//! binary. With `v = [x, e_y]` the energy is
//!
//! ```text
//! E(v, h) = −bᵀv − cᵀh − hᵀ W v
//! ```
//!
//! and classes are scored by the free energy `F(x, e_y)`, marginalised
//! exactly over the hidden units.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::eval::softmax;
use crate::seed::{self, Rng64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbmModel {
    /// H × M
    pub weights_data: DMatrix<f64>,
    /// H × K
    pub weights_label: DMatrix<f64>,
    pub bias_visible_data: DVector<f64>,
    pub bias_visible_label: DVector<f64>,
    pub bias_hidden: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbmTrainConfig {
    pub cd_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub n_hidden: usize,
    pub seed: u64,
}

impl Default for RbmTrainConfig {
    fn default() -> Self {
        Self {
            cd_steps: 1,
            batch_size: 32,
            learning_rate: 0.01,
            epochs: 50,
            n_hidden: 64,
            seed: 0,
        }
    }
}

impl RbmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cd_steps == 0 || self.batch_size == 0 || self.n_hidden == 0 {
            return Err(Error::Domain(
                "cd_steps, batch_size and n_hidden must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain("learning rate must be positive".into()));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl RbmModel {
    pub fn zeros(n_features: usize, n_classes: usize, n_hidden: usize) -> Self {
        Self {
            weights_data: DMatrix::zeros(n_hidden, n_features),
            weights_label: DMatrix::zeros(n_hidden, n_classes),
            bias_visible_data: DVector::zeros(n_features),
            bias_visible_label: DVector::zeros(n_classes),
            bias_hidden: DVector::zeros(n_hidden),
        }
    }

    /// Weights drawn from N(0, 0.01²), biases zero.
    pub fn initialized(n_features: usize, n_classes: usize, n_hidden: usize, rng: &mut Rng64) -> Self {
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        let mut m = Self::zeros(n_features, n_classes, n_hidden);
        m.weights_data.iter_mut().for_each(|w| *w = normal.sample(rng));
        m.weights_label.iter_mut().for_each(|w| *w = normal.sample(rng));
        m
    }

    pub fn n_hidden(&self) -> usize {
        self.bias_hidden.len()
    }

    pub fn n_features(&self) -> usize {
        self.bias_visible_data.len()
    }

    pub fn n_classes(&self) -> usize {
        self.bias_visible_label.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights_data
            .iter()
            .chain(self.weights_label.iter())
            .chain(self.bias_visible_data.iter())
            .chain(self.bias_visible_label.iter())
            .chain(self.bias_hidden.iter())
            .all(|v| v.is_finite())
    }

    fn hidden_input(&self, x: &DVector<f64>, label: &DVector<f64>) -> DVector<f64> {
        &self.bias_hidden + &self.weights_data * x + &self.weights_label * label
    }

    /// `F(v) = −bᵀv − Σ_j softplus(c_j + W_j · v)`.
    pub fn free_energy(&self, v_data: &[f64], v_label: &[f64]) -> Result<f64> {
        check_len("visible data", self.n_features(), v_data.len())?;
        check_len("visible label", self.n_classes(), v_label.len())?;
        let ones = v_label.iter().filter(|&&v| v == 1.0).count();
        let zeros = v_label.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != v_label.len() {
            return Err(Error::Domain("label units must be one-hot".into()));
        }
        let x = DVector::from_column_slice(v_data);
        let l = DVector::from_column_slice(v_label);
        Ok(self.free_energy_unchecked(&x, &l))
    }

    fn free_energy_unchecked(&self, x: &DVector<f64>, label: &DVector<f64>) -> f64 {
        let visible = self.bias_visible_data.dot(x) + self.bias_visible_label.dot(label);
        let hidden: f64 = self.hidden_input(x, label).iter().map(|&a| softplus(a)).sum();
        -visible - hidden
    }

    /// Class probabilities: softmax over `−F(x, e_c)`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("sample features", self.n_features(), x.len())?;
        let xv = DVector::from_column_slice(x);
        let k = self.n_classes();
        let neg_f: Vec<f64> = (0..k)
            .map(|c| {
                let mut l = DVector::zeros(k);
                l[c] = 1.0;
                -self.free_energy_unchecked(&xv, &l)
            })
            .collect();
        Ok(softmax(&neg_f))
    }

    /// Text format: a header line `rbm <M> <K> <H>` followed by one line per
    /// parameter block in this order: `weights_data` (H × M, row-major),
    /// `weights_label` (H × K, row-major), `bias_visible_data`,
    /// `bias_visible_label`, `bias_hidden`. Values are space separated.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rbm {} {} {}", self.n_features(), self.n_classes(), self.n_hidden())?;
        let line = |vals: Vec<f64>| {
            let mut s = String::new();
            for (i, v) in vals.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                write!(s, "{v:?}").expect("write to string");
            }
            s
        };
        let row_major = |m: &DMatrix<f64>| m.transpose().iter().copied().collect::<Vec<_>>();
        writeln!(out, "{}", line(row_major(&self.weights_data)))?;
        writeln!(out, "{}", line(row_major(&self.weights_label)))?;
        writeln!(out, "{}", line(self.bias_visible_data.iter().copied().collect()))?;
        writeln!(out, "{}", line(self.bias_visible_label.iter().copied().collect()))?;
        writeln!(out, "{}", line(self.bias_hidden.iter().copied().collect()))?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty rbm file".into()))??;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 4 || dims[0] != "rbm" {
            return Err(Error::Format(format!("bad rbm header {header:?}")));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad dimension {s:?}")))
        };
        let (m, k, h) = (parse_dim(dims[1])?, parse_dim(dims[2])?, parse_dim(dims[3])?);
        let mut block = |len: usize, what: &str| -> Result<Vec<f64>> {
            let l = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing {what}")))??;
            let vals = l
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Format(format!("bad number {t:?} in {what}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != len {
                return Err(Error::Format(format!(
                    "{what}: expected {len} values, found {}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let wd = block(h * m, "weights_data")?;
        let wl = block(h * k, "weights_label")?;
        let bd = block(m, "bias_visible_data")?;
        let bl = block(k, "bias_visible_label")?;
        let bh = block(h, "bias_hidden")?;
        Ok(Self {
            weights_data: DMatrix::from_row_slice(h, m, &wd),
            weights_label: DMatrix::from_row_slice(h, k, &wl),
            bias_visible_data: DVector::from_vec(bd),
            bias_visible_label: DVector::from_vec(bl),
            bias_hidden: DVector::from_vec(bh),
        })
    }
}

/// Per-epoch training diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RbmTrace {
    /// Mean squared reconstruction error of the data units, per epoch.
    pub reconstruction_error: Vec<f64>,
}

/// Trains with CD-k on minibatches. Deterministic given `config.seed`.
pub fn train_rbm(data: &LabeledDataset, config: &RbmTrainConfig) -> Result<RbmModel> {
    train_rbm_traced(data, config).map(|(m, _)| m)
}

pub fn train_rbm_traced(data: &LabeledDataset, config: &RbmTrainConfig) -> Result<(RbmModel, RbmTrace)> {
    config.validate()?;
    if data.n_samples() == 0 {
        return Err(Error::Empty("no training samples"));
    }
    let (m, k, h) = (data.n_features(), data.n_classes(), config.n_hidden);
    let mut rng = seed::rng(config.seed);
    let mut model = RbmModel::initialized(m, k, h, &mut rng);
    let mut trace = RbmTrace::default();
    let mut order: Vec<usize> = (0..data.n_samples()).collect();

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut g_wd = DMatrix::zeros(h, m);
            let mut g_wl = DMatrix::zeros(h, k);
            let mut g_bd = DVector::zeros(m);
            let mut g_bl = DVector::zeros(k);
            let mut g_bh = DVector::zeros(h);
            for &i in batch {
                let x0 = data.sample(i);
                let mut l0 = DVector::zeros(k);
                l0[data.labels()[i]] = 1.0;

                let ph0 = model.hidden_input(&x0, &l0).map(sigmoid);
                let mut hs = sample_binary(&ph0, &mut rng);
                let (mut xk, mut lk, mut phk) = (x0.clone(), l0.clone(), ph0.clone());
                for step in 0..config.cd_steps {
                    xk = &model.bias_visible_data + model.weights_data.tr_mul(&hs);
                    let label_in = &model.bias_visible_label + model.weights_label.tr_mul(&hs);
                    lk = DVector::from_vec(softmax(label_in.as_slice()));
                    phk = model.hidden_input(&xk, &lk).map(sigmoid);
                    if step + 1 < config.cd_steps {
                        hs = sample_binary(&phk, &mut rng);
                    }
                }

                g_wd += &ph0 * x0.transpose() - &phk * xk.transpose();
                g_wl += &ph0 * l0.transpose() - &phk * lk.transpose();
                g_bd += &x0 - &xk;
                g_bl += &l0 - &lk;
                g_bh += &ph0 - &phk;
            }
            let step = config.learning_rate / batch.len() as f64;
            model.weights_data += g_wd * step;
            model.weights_label += g_wl * step;
            model.bias_visible_data += g_bd * step;
            model.bias_visible_label += g_bl * step;
            model.bias_hidden += g_bh * step;
        }
        if !model.is_finite() {
            return Err(Error::Domain(
                "RBM parameters diverged; lower the learning rate".into(),
            ));
        }
        trace.reconstruction_error.push(model.reconstruction_error(data));
    }
    Ok((model, trace))
}

impl RbmModel {
    /// Mean squared error of the mean-field one-step reconstruction of the
    /// data units, averaged over samples and features.
    pub fn reconstruction_error(&self, data: &LabeledDataset) -> f64 {
        let (m, k) = (self.n_features(), self.n_classes());
        let mut total = 0.0;
        for i in 0..data.n_samples() {
            let x = data.sample(i);
            let mut l = DVector::zeros(k);
            l[data.labels()[i]] = 1.0;
            let ph = self.hidden_input(&x, &l).map(sigmoid);
            let recon = &self.bias_visible_data + self.weights_data.tr_mul(&ph);
            total += (recon - x).norm_squared() / m as f64;
        }
        total / data.n_samples().max(1) as f64
    }
}

fn sample_binary(p: &DVector<f64>, rng: &mut Rng64) -> DVector<f64> {
    p.map(|pi| if rng.gen::<f64>() < pi { 1.0 } else { 0.0 })
}
