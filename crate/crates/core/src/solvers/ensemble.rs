use super::SolveResult;
use crate::error::{Error, Result};
use crate::ising::IsingProblem;

pub const DEFAULT_ENSEMBLE_SIZE: usize = 20;

/// Greedy averaging of the `top_n` lowest-energy configurations.
///
/// Starts from the best configuration; each following configuration (in
/// energy order) is folded into the running elementwise mean only if that
/// strictly lowers the objective evaluated at the real-valued mean. The
/// returned weights therefore never score worse than the best single
/// configuration.
pub fn ensemble_average(problem: &IsingProblem, result: &SolveResult, top_n: usize) -> Result<Vec<f64>> {
    let mut configs = result.configurations.iter().take(top_n.max(1));
    let first = configs.next().ok_or(Error::Empty("solve result has no configurations"))?;
    let mut sum = first.to_real();
    let mut count = 1.0;
    let mut best = problem.energy_real(&sum)?;
    let mut trial = vec![0.0; sum.len()];
    for config in configs {
        for ((t, s), &v) in trial.iter_mut().zip(&sum).zip(config.spins()) {
            *t = (s + f64::from(v)) / (count + 1.0);
        }
        let e = problem.energy_real(&trial)?;
        if e < best {
            best = e;
            count += 1.0;
            for (s, &v) in sum.iter_mut().zip(config.spins()) {
                *s += f64::from(v);
            }
        }
    }
    Ok(sum.into_iter().map(|s| s / count).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::SpinConfiguration;
    use crate::solvers::testutil::random_problem;
    use crate::solvers::{random_search, simulated_anneal, AnnealSchedule};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn singleton_returns_the_configuration() {
        let p = random_problem(4, 1);
        let r = random_search(&p, 1, 2).unwrap();
        let w = ensemble_average(&p, &r, 20).unwrap();
        assert_eq!(w, r.best().unwrap().to_real());
        assert_eq!(p.energy_real(&w).unwrap(), r.best_energy().unwrap());
    }

    #[test]
    fn identical_configurations_average_to_themselves() {
        let p = random_problem(3, 2);
        let c = SpinConfiguration::evaluated(vec![1, -1, 1], &p).unwrap();
        let r = SolveResult::sorted(vec![c.clone(), c.clone()], 2, 0);
        assert_eq!(ensemble_average(&p, &r, 20).unwrap(), c.to_real());
    }

    #[test]
    fn empty_result_is_an_error() {
        let p = random_problem(3, 2);
        let r = SolveResult::sorted(vec![], 0, 0);
        assert!(matches!(ensemble_average(&p, &r, 20), Err(Error::Empty(_))));
    }

    #[test]
    fn averaging_accepted_when_it_lowers_the_objective() {
        // Positive diagonal penalises |w|: the two degenerate ground states
        // [+1, +1] and [+1, -1] (J_01 = 0, h_1 = 0) average to [1, 0], which
        // drops the J_11 w_1² term.
        let h = DVector::from_row_slice(&[-1.0, 0.0]);
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.5]);
        let p = IsingProblem::new(h, j).unwrap();
        let a = SpinConfiguration::evaluated(vec![1, -1], &p).unwrap();
        let b = SpinConfiguration::evaluated(vec![1, 1], &p).unwrap();
        let r = SolveResult::sorted(vec![a, b], 2, 0);
        let w = ensemble_average(&p, &r, 20).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
        // oracle: -1 + 0.5 * 0² = -1 < -0.5
        assert_eq!(p.energy_real(&w).unwrap(), -1.0);
        assert_eq!(r.best_energy().unwrap(), -0.5);
    }

    #[test]
    fn never_worse_than_best_configuration() {
        for seed in 0..30 {
            let p = random_problem(8, seed);
            let sched = AnnealSchedule::new(20, 0.01, 0.3).unwrap();
            let r = simulated_anneal(&p, &sched, 40, seed).unwrap();
            let w = ensemble_average(&p, &r, 20).unwrap();
            assert!(w.iter().all(|v| v.abs() <= 1.0));
            assert!(p.energy_real(&w).unwrap() <= r.best_energy().unwrap());
        }
    }
}
