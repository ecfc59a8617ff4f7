use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::TrainedModel;
use crate::formulation::exact_nll;

/// Full-batch solver settings for the L2-penalised multinomial logistic model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeSettings {
    pub lambda_grid: Vec<f64>,
    pub max_iter: usize,
    /// Stop once the Frobenius norm of the gradient falls below this.
    pub tol: f64,
}

impl Default for RidgeSettings {
    fn default() -> Self {
        Self {
            lambda_grid: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0],
            max_iter: 200_000,
            tol: 1e-6,
        }
    }
}

/// Fitted weights plus solver diagnostics.
#[derive(Clone, Debug)]
pub struct RidgeFit {
    pub weights: DMatrix<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// `mean NLL + λ/2 ‖W‖²` and its gradient.
fn objective(x: &DMatrix<f64>, onehot: &DMatrix<f64>, w: &DMatrix<f64>, lambda: f64) -> (f64, DMatrix<f64>) {
    let n = x.nrows() as f64;
    let k1 = w.nrows();
    let logits = x * w.transpose();
    let mut resid = DMatrix::zeros(x.nrows(), k1);
    let mut nll = 0.0;
    for i in 0..x.nrows() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(0.0_f64, f64::max);
        let ref_exp = (-max).exp();
        let total: f64 = row.iter().map(|z| (z - max).exp()).sum::<f64>() + ref_exp;
        let log_z = max + total.ln();
        let mut z_y = 0.0;
        for c in 0..k1 {
            let p = (row[c] - log_z).exp();
            resid[(i, c)] = p - onehot[(i, c)];
            z_y += onehot[(i, c)] * row[c];
        }
        nll += log_z - z_y;
    }
    let grad = resid.transpose() * x / n + w * lambda;
    (nll / n + 0.5 * lambda * w.norm_squared(), grad)
}

/// Minimises the penalised mean negative log-likelihood by accelerated
/// gradient descent with step `1/L`, where `L` bounds the Hessian.
pub fn fit_ridge_logistic(data: &LabeledDataset, lambda: f64, settings: &RidgeSettings) -> Result<RidgeFit> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("ridge penalty must be positive, got {lambda}")));
    }
    let k = data.n_classes();
    if k < 2 {
        return Err(Error::Degenerate("ridge model needs at least two classes".into()));
    }
    let n = data.n_samples();
    if n == 0 {
        return Err(Error::Empty("no training samples"));
    }
    let x = data.features();
    let m = x.ncols();
    let onehot = DMatrix::from_fn(n, k - 1, |i, c| if data.labels()[i] == c { 1.0 } else { 0.0 });

    // Softmax Hessian is bounded by ½ XᵀX / n (Böhning).
    let gram = x.transpose() * x / n as f64;
    let top = gram.symmetric_eigenvalues().max().max(0.0);
    let lipschitz = 0.5 * top + lambda;
    let step = 1.0 / lipschitz;
    let kappa = lipschitz / lambda;
    let momentum = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);

    let mut w = DMatrix::zeros(k - 1, m);
    let mut w_prev = w.clone();
    let (mut f, mut grad) = objective(x, &onehot, &w, lambda);
    for it in 0..settings.max_iter {
        let g_norm = grad.norm();
        if g_norm < settings.tol {
            return Ok(RidgeFit {
                weights: w,
                iterations: it,
                grad_norm: g_norm,
            });
        }
        let y = &w + (&w - &w_prev) * momentum;
        let (_, gy) = objective(x, &onehot, &y, lambda);
        let next = &y - gy * step;
        let (f_next, g_next) = objective(x, &onehot, &next, lambda);
        if f_next > f {
            // Restart the momentum with a plain gradient step.
            w -= &grad * step;
            w_prev.copy_from(&w);
            (f, grad) = objective(x, &onehot, &w, lambda);
        } else {
            w_prev = std::mem::replace(&mut w, next);
            f = f_next;
            grad = g_next;
        }
    }
    let g_norm = grad.norm();
    if g_norm < settings.tol {
        return Ok(RidgeFit {
            weights: w,
            iterations: settings.max_iter,
            grad_norm: g_norm,
        });
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iter,
        grad_norm: g_norm,
    })
}

/// Gradient norm of the penalised objective at `w`.
pub fn ridge_gradient_norm(data: &LabeledDataset, weights: &DMatrix<f64>, lambda: f64) -> f64 {
    let k = data.n_classes();
    let onehot = DMatrix::from_fn(data.n_samples(), k - 1, |i, c| {
        if data.labels()[i] == c {
            1.0
        } else {
            0.0
        }
    });
    objective(data.features(), &onehot, weights, lambda).1.norm()
}

/// Penalised objective at `w`, via the exact likelihood.
pub fn ridge_objective(data: &LabeledDataset, weights: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    Ok(exact_nll(weights, data)? / data.n_samples() as f64 + 0.5 * lambda * weights.norm_squared())
}

pub(crate) fn train_ridge(data: &LabeledDataset, lambda: f64, settings: &RidgeSettings) -> Result<TrainedModel> {
    let fit = fit_ridge_logistic(data, lambda, settings)?;
    TrainedModel::new(fit.weights, data.n_classes(), "ridge")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::evaluate_with;
    use crate::pipeline::ZScoreStats;
    use crate::synth::SyntheticSpec;

    fn toy(k: usize, seed: u64) -> LabeledDataset {
        SyntheticSpec::multiclass_axes(k, 4, 1.0, 30).unwrap().generate(seed).unwrap()
    }

    #[test]
    fn converges_to_stationary_point() {
        for (k, lambda) in [(2, 1e-3), (3, 1e-2), (4, 1.0)] {
            let d = toy(k, k as u64);
            let fit = fit_ridge_logistic(&d, lambda, &RidgeSettings::default()).unwrap();
            assert!(fit.grad_norm < 1e-6);
            assert!(ridge_gradient_norm(&d, &fit.weights, lambda) < 1e-6);
        }
    }

    #[test]
    fn optimum_beats_perturbations() {
        let d = toy(3, 9);
        let lambda = 0.1;
        let fit = fit_ridge_logistic(&d, lambda, &RidgeSettings::default()).unwrap();
        let f0 = ridge_objective(&d, &fit.weights, lambda).unwrap();
        for (r, c) in [(0, 0), (1, 3), (0, 2)] {
            for delta in [1e-3, -1e-3] {
                let mut w = fit.weights.clone();
                w[(r, c)] += delta;
                assert!(ridge_objective(&d, &w, lambda).unwrap() > f0);
            }
        }
    }

    #[test]
    fn heavy_penalty_gives_uniform_predictions() {
        let d = toy(3, 4);
        let model = train_ridge(&d, 1e8, &RidgeSettings::default()).unwrap();
        assert!(model.weights.abs().max() < 1e-6);
        let p = model.predict_proba(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn separable_data_small_penalty() {
        let d = SyntheticSpec::two_class_shift(10, 3.0, 250).unwrap().generate(2).unwrap();
        let (train, test) = crate::eval::stratified_split(&d, 0.8, 3).unwrap();
        let z = ZScoreStats::fit(&train).unwrap();
        let (train, test) = (z.apply(&train).unwrap(), z.apply(&test).unwrap());
        let model = train_ridge(&train, 1e-3, &RidgeSettings::default()).unwrap();
        let m = evaluate_with(&test, |x| model.predict_proba(x)).unwrap();
        assert!(m.balanced_accuracy >= 0.95);
    }

    #[test]
    fn iteration_cap_reports_gradient() {
        let d = toy(2, 1);
        let settings = RidgeSettings {
            max_iter: 1,
            ..RidgeSettings::default()
        };
        match fit_ridge_logistic(&d, 1e-3, &settings) {
            Err(Error::NonConvergence { grad_norm, .. }) => assert!(grad_norm > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
