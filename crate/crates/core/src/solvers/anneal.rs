use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SolveResult;
use crate::error::{Error, Result};
use crate::ising::{IsingProblem, SpinConfiguration};
use crate::seed;

/// Linear inverse-temperature schedule: one β value per sweep, from
/// `beta_initial` at the first sweep to `beta_final` at the last.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub beta_initial: f64,
    pub beta_final: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            beta_initial: 0.01,
            beta_final: 3.0,
        }
    }
}

impl AnnealSchedule {
    /// Final inverse temperatures searched by cross-validation.
    pub const BETA_FINAL_GRID: [f64; 5] = [0.03, 0.1, 0.3, 1.0, 3.0];

    pub fn new(sweeps: usize, beta_initial: f64, beta_final: f64) -> Result<Self> {
        let s = Self {
            sweeps,
            beta_initial,
            beta_final,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_beta_final(beta_final: f64) -> Result<Self> {
        Self::new(1000, 0.01, beta_final)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::Domain("schedule needs at least one sweep".into()));
        }
        if !(self.beta_initial > 0.0 && self.beta_initial.is_finite()) {
            return Err(Error::Domain(format!(
                "beta_initial must be positive, got {}",
                self.beta_initial
            )));
        }
        if !(self.beta_final >= self.beta_initial && self.beta_final.is_finite()) {
            return Err(Error::Domain(format!(
                "beta_final {} must be finite and >= beta_initial {}",
                self.beta_final, self.beta_initial
            )));
        }
        Ok(())
    }

    /// β for sweep `t` (0-based). A single-sweep schedule runs at `beta_final`.
    pub fn beta(&self, t: usize) -> f64 {
        if self.sweeps == 1 {
            return self.beta_final;
        }
        let frac = t as f64 / (self.sweeps - 1) as f64;
        self.beta_initial + (self.beta_final - self.beta_initial) * frac
    }
}

/// Metropolis simulated annealing with `restarts` independent runs.
///
/// Each run starts from uniformly random spins and performs
/// `schedule.sweeps` sweeps; a sweep visits spins in index order and flips
/// spin `i` with probability `min(1, exp(-β ΔE))`. Run `r` draws from its own
/// stream seeded with `seed ^ splitmix64(r)`, so the output does not depend
/// on how runs are scheduled across threads.
pub fn simulated_anneal(
    problem: &IsingProblem,
    schedule: &AnnealSchedule,
    restarts: usize,
    seed: u64,
) -> Result<SolveResult> {
    schedule.validate()?;
    if restarts == 0 {
        return Err(Error::Domain("restarts must be at least 1".into()));
    }
    let kernel = Kernel::new(problem);
    let betas: Vec<f64> = (0..schedule.sweeps).map(|t| schedule.beta(t)).collect();
    let configs: Vec<SpinConfiguration> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed::child_seed(seed, r as u64));
            let spins = kernel.anneal(&betas, &mut rng);
            let energy = problem.energy_unchecked(&spins);
            SpinConfiguration::from_parts(spins, energy)
        })
        .collect();
    Ok(SolveResult::sorted(configs, restarts, seed))
}

/// Dense row-major couplings with a zeroed diagonal, for ΔE updates.
struct Kernel<'a> {
    n: usize,
    fields: &'a [f64],
    couplings: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(problem: &'a IsingProblem) -> Self {
        let n = problem.n_spins();
        let j = problem.couplings();
        let mut couplings = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    couplings[a * n + b] = j[(a, b)];
                }
            }
        }
        Self {
            n,
            fields: problem.fields().as_slice(),
            couplings,
        }
    }

    fn anneal<R: Rng>(&self, betas: &[f64], rng: &mut R) -> Vec<i8> {
        let n = self.n;
        let mut s: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        // local[i] = h_i + Σ_{j≠i} J_ij s_j
        let mut local: Vec<f64> = (0..n)
            .map(|i| {
                let row = &self.couplings[i * n..(i + 1) * n];
                self.fields[i] + row.iter().zip(&s).map(|(j, sj)| j * sj).sum::<f64>()
            })
            .collect();
        for &beta in betas {
            for i in 0..n {
                let delta_e = -2.0 * s[i] * local[i];
                if delta_e <= 0.0 || rng.gen::<f64>() < (-beta * delta_e).exp() {
                    s[i] = -s[i];
                    let step = 2.0 * s[i];
                    let row = &self.couplings[i * n..(i + 1) * n];
                    for (l, j) in local.iter_mut().zip(row) {
                        *l += j * step;
                    }
                }
            }
        }
        s.into_iter().map(|v| if v > 0.0 { 1 } else { -1 }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::exhaustive_solve;
    use crate::solvers::testutil::{decoupled_problem, random_problem};

    #[test]
    fn schedule_is_linear_and_inclusive() {
        let s = AnnealSchedule::new(5, 0.01, 0.05).unwrap();
        let b: Vec<f64> = (0..5).map(|t| s.beta(t)).collect();
        assert!((b[0] - 0.01).abs() < 1e-15);
        assert!((b[4] - 0.05).abs() < 1e-15);
        assert!((b[2] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn schedule_validation() {
        assert!(AnnealSchedule::new(0, 0.01, 1.0).is_err());
        assert!(AnnealSchedule::new(10, 0.5, 0.1).is_err());
        assert!(AnnealSchedule::new(10, 0.0, 0.1).is_err());
        assert!(AnnealSchedule::new(1, 0.01, 0.01).is_ok());
    }

    #[test]
    fn decoupled_problem_anneals_to_minus_sign_of_fields() {
        let p = decoupled_problem(9, 4);
        let sched = AnnealSchedule::new(200, 0.01, 3.0).unwrap();
        let r = simulated_anneal(&p, &sched, 20, 1).unwrap();
        let expected: Vec<i8> = p
            .fields()
            .iter()
            .map(|&h| if h > 0.0 { -1 } else { 1 })
            .collect();
        assert_eq!(r.best().unwrap().spins(), expected.as_slice());
    }

    #[test]
    fn finds_ground_state_at_n12() {
        let p = random_problem(12, 77);
        let truth = exhaustive_solve(&p).unwrap().best_energy().unwrap();
        let r = simulated_anneal(&p, &AnnealSchedule::default(), 1000, 5).unwrap();
        assert!((r.best_energy().unwrap() - truth).abs() < 1e-9);
    }

    #[test]
    fn output_sorted_and_energies_cached_correctly() {
        let p = random_problem(8, 3);
        let r = simulated_anneal(&p, &AnnealSchedule::new(50, 0.01, 1.0).unwrap(), 3, 9).unwrap();
        assert_eq!(r.len(), 3);
        for w in r.configurations.windows(2) {
            assert!(w[0].energy().unwrap() <= w[1].energy().unwrap());
        }
        for c in &r.configurations {
            assert_eq!(c.energy().unwrap(), p.energy(c.spins()).unwrap());
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = random_problem(10, 8);
        let s = AnnealSchedule::new(100, 0.01, 1.0).unwrap();
        let a = simulated_anneal(&p, &s, 16, 42).unwrap();
        let b = simulated_anneal(&p, &s, 16, 42).unwrap();
        assert_eq!(a, b);
        let c = simulated_anneal(&p, &s, 16, 43).unwrap();
        assert_ne!(a.configurations, c.configurations);
    }

    #[test]
    fn zero_restarts_rejected() {
        let p = random_problem(3, 1);
        assert!(simulated_anneal(&p, &AnnealSchedule::default(), 0, 1).is_err());
    }

    #[test]
    fn incremental_local_fields_match_full_evaluation() {
        // Track energy through random flips using the same ΔE rule as the kernel.
        let p = random_problem(11, 21);
        let k = Kernel::new(&p);
        let n = 11;
        let mut rng = seed::rng(5);
        let mut s: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let to_spins = |s: &[f64]| s.iter().map(|&v| if v > 0.0 { 1i8 } else { -1 }).collect::<Vec<_>>();
        let mut local: Vec<f64> = (0..n)
            .map(|i| p.fields()[i] + (0..n).map(|j| k.couplings[i * n + j] * s[j]).sum::<f64>())
            .collect();
        let mut e = p.energy(&to_spins(&s)).unwrap();
        for _ in 0..500 {
            let i = rng.gen_range(0..n);
            e += -2.0 * s[i] * local[i];
            s[i] = -s[i];
            for (j, l) in local.iter_mut().enumerate() {
                *l += k.couplings[i * n + j] * 2.0 * s[i];
            }
            let full = p.energy(&to_spins(&s)).unwrap();
            assert!((e - full).abs() < 1e-9);
        }
    }
}
