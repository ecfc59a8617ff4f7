//! Multinomial classification as an Ising problem.
//!
//! With `K` classes the model keeps `K - 1` weight vectors `w_k` over `M`
//! features; the last class is the reference and scores a constant logit of
//! zero. Expanding the negative log-likelihood to second order around zero
//! logits gives, up to the constant `N log K`,
//!
//! ```text
//! L(w) ≈ Σ_k w_kᵀ (b_k + μ) + Σ_k w_kᵀ J′ w_k − Σ_k Σ_{j≠k} w_jᵀ J″ w_k
//!
//! b_k = −Σ_{i: y_i = k} x_i        μ  = (1/K) Σ_i x_i
//! J′  = (K−1)/(2K²) Σ_i x_i x_iᵀ   J″ = 1/(2K²) Σ_i x_i x_iᵀ
//! ```
//!
//! The builders lay the `K - 1` vectors out as consecutive spin blocks and
//! produce an [`IsingProblem`] whose energy equals this objective exactly,
//! for spins and for real weights alike. Because Ising energies count every
//! edge once, an off-diagonal entry `Q_pq` of the quadratic form becomes the
//! coupling `2 Q_pq`; diagonal entries are stored as-is.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::ising::{ClassBlockLayout, IsingProblem};

/// Largest complete graph the formulation is validated against by default.
pub const DEFAULT_CAPACITY: usize = 66;

/// The pieces of the quadratic objective before they are laid out as spins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildIntermediates {
    /// `b_k` for each non-reference class.
    pub b_vectors: Vec<DVector<f64>>,
    /// `(1/K) Σ_i x_i`.
    pub mean_term: DVector<f64>,
    /// `J′`, coupling within a class block.
    pub intra_coupling: DMatrix<f64>,
    /// `J″`, coupling between different class blocks.
    pub inter_coupling: DMatrix<f64>,
}

impl BuildIntermediates {
    /// Linear part of the objective at weights `W` ((K−1) × M).
    pub fn linear_form(&self, weights: &DMatrix<f64>) -> f64 {
        self.b_vectors
            .iter()
            .enumerate()
            .map(|(k, b)| weights.row(k).transpose().dot(&(b + &self.mean_term)))
            .sum()
    }

    /// Quadratic part of the objective at weights `W`.
    pub fn quadratic_form(&self, weights: &DMatrix<f64>) -> f64 {
        let blocks = weights.nrows();
        let mut total = 0.0;
        for k in 0..blocks {
            let wk = weights.row(k).transpose();
            total += wk.dot(&(&self.intra_coupling * &wk));
            for j in (0..blocks).filter(|&j| j != k) {
                let wj = weights.row(j).transpose();
                total -= wj.dot(&(&self.inter_coupling * &wk));
            }
        }
        total
    }
}

/// Output of the builders.
#[derive(Clone, Debug)]
pub struct BuiltProblem {
    pub problem: IsingProblem,
    pub layout: ClassBlockLayout,
    pub intermediates: BuildIntermediates,
}

/// Builds the Ising problem for a `K ≥ 2` class dataset, enforcing the
/// default spin capacity.
pub fn build_multiclass_problem(data: &LabeledDataset) -> Result<BuiltProblem> {
    build_multiclass_problem_with_capacity(data, Some(DEFAULT_CAPACITY))
}

/// As [`build_multiclass_problem`]; `capacity = None` disables the size check.
pub fn build_multiclass_problem_with_capacity(
    data: &LabeledDataset,
    capacity: Option<usize>,
) -> Result<BuiltProblem> {
    let k = data.n_classes();
    let m = data.n_features();
    if k < 2 {
        return Err(Error::Degenerate(format!(
            "classification needs at least two classes, dataset has {k}"
        )));
    }
    if data.n_samples() == 0 {
        return Err(Error::Empty("dataset has no samples"));
    }
    let layout = ClassBlockLayout::new(k, m)?;
    if let Some(limit) = capacity {
        if layout.n_spins() > limit {
            return Err(Error::Capacity {
                what: "M x (K - 1) spins",
                required: layout.n_spins(),
                limit,
            });
        }
    }

    let x = data.features();
    let kf = k as f64;
    let gram = x.transpose() * x;
    let mut b_vectors = vec![DVector::zeros(m); k - 1];
    let mut sum = DVector::zeros(m);
    for (i, &y) in data.labels().iter().enumerate() {
        let xi = x.row(i).transpose();
        if y < k - 1 {
            b_vectors[y] -= &xi;
        }
        sum += &xi;
    }
    let intermediates = BuildIntermediates {
        b_vectors,
        mean_term: sum / kf,
        intra_coupling: &gram * ((kf - 1.0) / (2.0 * kf * kf)),
        inter_coupling: &gram * (1.0 / (2.0 * kf * kf)),
    };

    let n = layout.n_spins();
    let mut fields = DVector::zeros(n);
    let mut couplings = DMatrix::zeros(n, n);
    for p in 0..n {
        let (bp, mp) = layout.block_feature(p);
        fields[p] = intermediates.b_vectors[bp][mp] + intermediates.mean_term[mp];
        for q in p..n {
            let (bq, mq) = layout.block_feature(q);
            let form = if bp == bq {
                intermediates.intra_coupling[(mp, mq)]
            } else {
                -intermediates.inter_coupling[(mp, mq)]
            };
            let c = if p == q { form } else { 2.0 * form };
            couplings[(p, q)] = c;
            couplings[(q, p)] = c;
        }
    }
    let problem = IsingProblem::new(fields, couplings)?.with_layout(layout)?;
    Ok(BuiltProblem {
        problem,
        layout,
        intermediates,
    })
}

/// Two-class entry point; identical to the multiclass builder with `K = 2`.
pub fn build_binomial_problem(data: &LabeledDataset) -> Result<BuiltProblem> {
    build_binomial_problem_with_capacity(data, Some(DEFAULT_CAPACITY))
}

pub fn build_binomial_problem_with_capacity(
    data: &LabeledDataset,
    capacity: Option<usize>,
) -> Result<BuiltProblem> {
    if data.n_classes() != 2 {
        return Err(Error::WrongArity {
            expected: 2,
            got: data.n_classes(),
        });
    }
    build_multiclass_problem_with_capacity(data, capacity)
}

/// `log Σ_k exp(z_k)` over the given logits plus the reference logit 0.
pub(crate) fn log_partition(logits: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = logits.clone().fold(0.0_f64, f64::max);
    let tail: f64 = logits.map(|z| (z - max).exp()).sum();
    max + (tail + (-max).exp()).ln()
}

/// Exact negative log-likelihood `−Σ_i log Pr(y_i)` of the reference-class
/// softmax model with weights `W` ((K−1) × M).
pub fn exact_nll(weights: &DMatrix<f64>, data: &LabeledDataset) -> Result<f64> {
    check_len("weight rows", data.n_classes() - 1, weights.nrows())?;
    check_len("weight columns", data.n_features(), weights.ncols())?;
    let logits = data.features() * weights.transpose();
    let reference = data.n_classes() - 1;
    let mut nll = 0.0;
    for (i, &y) in data.labels().iter().enumerate() {
        let row = logits.row(i);
        let z_y = if y == reference { 0.0 } else { row[y] };
        nll += log_partition(row.iter().copied()) - z_y;
    }
    Ok(nll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn data(x: &[&[f64]], y: &[usize], k: usize) -> LabeledDataset {
        let m = x[0].len();
        let flat: Vec<f64> = x.iter().flat_map(|r| r.iter().copied()).collect();
        LabeledDataset::from_parts(DMatrix::from_row_slice(x.len(), m, &flat), y.to_vec(), k)
            .unwrap()
    }

    pub(crate) fn random_dataset(n: usize, m: usize, k: usize, seed: u64) -> LabeledDataset {
        let mut rng = seed::rng(seed);
        let x = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
        LabeledDataset::from_parts(x, y, k).unwrap()
    }

    #[test]
    fn single_sample_hand_values() {
        let d = data(&[&[1.0]], &[0], 2);
        let b = build_multiclass_problem(&d).unwrap();
        let im = &b.intermediates;
        assert_eq!(im.b_vectors[0].as_slice(), &[-1.0]);
        assert_eq!(im.mean_term.as_slice(), &[0.5]);
        assert_eq!(im.intra_coupling[(0, 0)], 0.125);
        assert_eq!(b.problem.fields().as_slice(), &[-0.5]);
        assert!((b.problem.energy(&[1]).unwrap() - -0.375).abs() < 1e-15);
        assert!((b.problem.energy(&[-1]).unwrap() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn two_sample_hand_values() {
        let d = data(&[&[1.0], &[-1.0]], &[0, 1], 2);
        let im = build_multiclass_problem(&d).unwrap().intermediates;
        assert_eq!(im.b_vectors[0].as_slice(), &[-1.0]);
        assert_eq!(im.mean_term.as_slice(), &[0.0]);
        assert_eq!(im.intra_coupling[(0, 0)], 0.25);
    }

    #[test]
    fn three_class_two_feature_dimensions() {
        let d = random_dataset(9, 2, 3, 1);
        let b = build_multiclass_problem(&d).unwrap();
        assert_eq!(b.problem.n_spins(), 4);
        assert_eq!(b.layout.n_blocks(), 2);
    }

    #[test]
    fn binomial_matches_multiclass() {
        let d = data(&[&[1.0]], &[0], 2);
        let a = build_binomial_problem(&d).unwrap();
        let b = build_multiclass_problem(&d).unwrap();
        assert_eq!(a.problem, b.problem);
    }

    #[test]
    fn binomial_44_features_gives_44_spins_without_inter_block_terms() {
        let d = random_dataset(60, 44, 2, 4);
        let b = build_binomial_problem(&d).unwrap();
        assert_eq!(b.problem.n_spins(), 44);
        assert_eq!(b.layout.n_blocks(), 1);
        assert_eq!(b.intermediates.b_vectors.len(), 1);
    }

    #[test]
    fn binomial_rejects_three_classes() {
        let d = random_dataset(9, 2, 3, 1);
        assert!(matches!(
            build_binomial_problem(&d),
            Err(Error::WrongArity { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn capacity_and_degenerate_errors() {
        let d = random_dataset(30, 14, 6, 2);
        assert!(matches!(
            build_multiclass_problem(&d),
            Err(Error::Capacity { required: 70, limit: 66, .. })
        ));
        assert!(build_multiclass_problem_with_capacity(&d, None).is_ok());
        let single = LabeledDataset::from_parts(DMatrix::zeros(2, 1), vec![0, 0], 1).unwrap();
        assert!(matches!(
            build_multiclass_problem(&single),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn intra_is_k_minus_one_times_inter_and_psd() {
        for (k, seed) in [(2, 1), (3, 2), (6, 3)] {
            let d = random_dataset(20, 5, k, seed);
            let im = build_multiclass_problem(&d).unwrap().intermediates;
            let scaled = &im.inter_coupling * (k as f64 - 1.0);
            assert!((&im.intra_coupling - scaled).abs().max() < 1e-12);
            for mat in [&im.intra_coupling, &im.inter_coupling] {
                let eig = mat.clone().symmetric_eigen().eigenvalues;
                let top = eig.max().max(1.0);
                assert!(eig.min() >= -1e-9 * top);
            }
        }
    }

    #[test]
    fn problem_energy_equals_quadratic_objective() {
        let d = random_dataset(25, 3, 4, 8);
        let b = build_multiclass_problem(&d).unwrap();
        let mut rng = seed::rng(9);
        let w = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let flat = b.layout.flatten(&w).unwrap();
        let direct = b.intermediates.linear_form(&w) + b.intermediates.quadratic_form(&w);
        let e = b.problem.energy_real(&flat).unwrap();
        assert!((e - direct).abs() < 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn zero_weights_give_n_log_k() {
        let d = random_dataset(17, 4, 3, 5);
        let nll = exact_nll(&DMatrix::zeros(2, 4), &d).unwrap();
        assert!((nll - 17.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn taylor_agreement_single_sample() {
        // K = 2: the cubic term of log(1 + e^z) vanishes at 0, so the
        // residual shrinks at least as fast as ε³.
        let d = data(&[&[0.7, -1.3]], &[0], 2);
        let b = build_binomial_problem(&d).unwrap();
        let w = DMatrix::from_row_slice(1, 2, &[0.4, 0.9]);
        let base = exact_nll(&DMatrix::zeros(1, 2), &d).unwrap();
        for eps in [1e-1, 1e-2, 1e-3] {
            let ew = &w * eps;
            let exact = exact_nll(&ew, &d).unwrap() - base;
            let approx = b.problem.energy_real(&b.layout.flatten(&ew).unwrap()).unwrap();
            assert!((exact - approx).abs() <= 2.0 * eps.powi(3), "eps={eps}");
        }
    }

    #[test]
    fn confident_correct_weights_drive_nll_to_zero() {
        let d = data(&[&[1.0]], &[0], 2);
        let nll: Vec<f64> = [1.0, 5.0, 10.0]
            .iter()
            .map(|&s| exact_nll(&DMatrix::from_element(1, 1, s), &d).unwrap())
            .collect();
        // log(1 + e^{-s})
        for (v, s) in nll.iter().zip([1.0f64, 5.0, 10.0]) {
            assert!((v - (-s).exp().ln_1p()).abs() < 1e-14);
        }
        assert!(nll[0] > nll[1] && nll[1] > nll[2] && nll[2] < 1e-4);
    }

    #[test]
    fn exact_nll_dimension_check() {
        let d = random_dataset(5, 2, 3, 1);
        assert!(exact_nll(&DMatrix::zeros(1, 2), &d).is_err());
    }

    #[test]
    fn taylor_residual_is_cubic_for_random_data() {
        for (k, seed) in [(2usize, 11u64), (3, 12), (6, 13)] {
            let m = 4;
            let d = random_dataset(30, m, k, seed);
            let b = build_multiclass_problem(&d).unwrap();
            let mut rng = seed::rng(seed + 100);
            let w = DMatrix::from_fn(k - 1, m, |_, _| rng.gen_range(-1.0..1.0));
            let base = exact_nll(&DMatrix::zeros(k - 1, m), &d).unwrap();
            let resid = |eps: f64| {
                let ew = &w * eps;
                let l1 = b.intermediates.linear_form(&ew);
                let l2 = b.intermediates.quadratic_form(&ew);
                (exact_nll(&ew, &d).unwrap() - base - l1 - l2).abs()
            };
            let c = resid(1e-1) / 1e-3;
            for eps in [1e-2, 1e-3] {
                assert!(resid(eps) <= 10.0 * c * eps.powi(3) + 1e-11, "k={k} eps={eps}");
            }
        }
    }
}
