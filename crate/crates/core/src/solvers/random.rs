use rand::Rng;

use super::SolveResult;
use crate::error::{Error, Result};
use crate::ising::{IsingProblem, SpinConfiguration};
use crate::seed;

pub const DEFAULT_RANDOM_SAMPLES: usize = 1000;

/// Draws `samples` configurations (each spin `-1` if a uniform `[0, 1)`
/// draw is below 0.5, else `+1`) and returns them sorted by energy.
pub fn random_search(problem: &IsingProblem, samples: usize, seed: u64) -> Result<SolveResult> {
    if samples == 0 {
        return Err(Error::Domain("samples must be at least 1".into()));
    }
    let mut rng = seed::rng(seed);
    let n = problem.n_spins();
    let configs = (0..samples)
        .map(|_| {
            let spins: Vec<i8> = (0..n)
                .map(|_| if rng.gen::<f64>() < 0.5 { -1 } else { 1 })
                .collect();
            let e = problem.energy_unchecked(&spins);
            SpinConfiguration::from_parts(spins, e)
        })
        .collect();
    Ok(SolveResult::sorted(configs, samples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::exhaustive_solve;
    use crate::solvers::testutil::random_problem;
    use std::collections::BTreeSet;

    #[test]
    fn two_spin_batch_covers_all_states_and_leads_with_ground() {
        let p = random_problem(2, 6);
        let r = random_search(&p, 1000, 3).unwrap();
        let distinct: BTreeSet<Vec<i8>> = r.configurations.iter().map(|c| c.spins().to_vec()).collect();
        assert_eq!(distinct.len(), 4);
        let truth = exhaustive_solve(&p).unwrap();
        assert_eq!(r.best().unwrap().spins(), truth.best().unwrap().spins());
    }

    #[test]
    fn deterministic_and_singleton() {
        let p = random_problem(5, 2);
        assert_eq!(random_search(&p, 50, 8).unwrap(), random_search(&p, 50, 8).unwrap());
        let one = random_search(&p, 1, 8).unwrap();
        assert_eq!(one.len(), 1);
        assert!(random_search(&p, 0, 8).is_err());
    }

    #[test]
    fn best_never_below_ground() {
        for seed in 0..20 {
            let p = random_problem(7, seed);
            let ground = exhaustive_solve(&p).unwrap().best_energy().unwrap();
            let r = random_search(&p, 30, seed).unwrap();
            let best = r.best_energy().unwrap();
            assert!(best >= ground - 1e-12);
            let has_ground = r
                .configurations
                .iter()
                .any(|c| (c.energy().unwrap() - ground).abs() < 1e-12);
            if has_ground {
                assert!((best - ground).abs() < 1e-12);
            }
        }
    }
}
