//! Solvers that produce low-energy spin configurations for an
//! [`IsingProblem`](crate::ising::IsingProblem), and the post-processing that
//! turns a batch of configurations into real-valued weights.
//!
//! Every solver is a pure function of the problem, its hyperparameters and a
//! seed.

mod anneal;
mod ensemble;
mod exhaustive;
mod field;
mod random;

use serde::{Deserialize, Serialize};

use crate::ising::SpinConfiguration;

pub use anneal::{simulated_anneal, AnnealSchedule};
pub use ensemble::{ensemble_average, DEFAULT_ENSEMBLE_SIZE};
pub use exhaustive::{exhaustive_solve, exhaustive_solve_top, MAX_EXHAUSTIVE_SPINS};
pub use field::field_solve;
pub use random::{random_search, DEFAULT_RANDOM_SAMPLES};

/// Configurations returned by a solver, sorted by non-decreasing energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub configurations: Vec<SpinConfiguration>,
    pub restarts: usize,
    pub seed: u64,
}

impl SolveResult {
    pub(crate) fn sorted(mut configurations: Vec<SpinConfiguration>, restarts: usize, seed: u64) -> Self {
        // Stable: equal energies keep generation order.
        configurations.sort_by(|a, b| {
            a.energy()
                .unwrap_or(f64::INFINITY)
                .total_cmp(&b.energy().unwrap_or(f64::INFINITY))
        });
        Self {
            configurations,
            restarts,
            seed,
        }
    }

    pub fn best(&self) -> Option<&SpinConfiguration> {
        self.configurations.first()
    }

    pub fn best_energy(&self) -> Option<f64> {
        self.best().and_then(SpinConfiguration::energy)
    }

    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    use crate::ising::IsingProblem;
    use crate::seed;

    /// Dense instance with fields and couplings uniform in [-1, 1].
    pub fn random_problem(n: usize, seed: u64) -> IsingProblem {
        let mut rng = seed::rng(seed);
        let h = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let mut j = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in (a + 1)..n {
                j[(a, b)] = rng.gen_range(-1.0..1.0);
            }
        }
        IsingProblem::from_upper(h, j).unwrap()
    }

    pub fn decoupled_problem(n: usize, seed: u64) -> IsingProblem {
        let mut rng = seed::rng(seed);
        let h = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        IsingProblem::new(h, DMatrix::zeros(n, n)).unwrap()
    }
}
