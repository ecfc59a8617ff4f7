use crate::ising::{IsingProblem, SpinConfiguration};

/// Sets each spin opposite to its local field and ignores the couplings:
/// `-1` where `h_i > 0`, `+1` otherwise (a zero field maps to `+1`).
pub fn field_solve(problem: &IsingProblem) -> SpinConfiguration {
    let spins: Vec<i8> = problem
        .fields()
        .iter()
        .map(|&h| if h > 0.0 { -1 } else { 1 })
        .collect();
    let e = problem.energy_unchecked(&spins);
    SpinConfiguration::from_parts(spins, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::exhaustive_solve;
    use crate::solvers::testutil::decoupled_problem;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn sign_rule_with_tie() {
        let p = IsingProblem::new(DVector::from_row_slice(&[0.5, -2.0, 0.0]), DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(field_solve(&p).spins(), &[-1, 1, 1]);
    }

    #[test]
    fn couplings_are_ignored() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, -5.0, -5.0, 0.0]);
        let p = IsingProblem::new(DVector::from_row_slice(&[1.0, 1.0]), j).unwrap();
        assert_eq!(field_solve(&p).spins(), &[-1, -1]);
    }

    #[test]
    fn exact_on_decoupled_problems() {
        for seed in 0..10 {
            let p = decoupled_problem(10, seed);
            let truth = exhaustive_solve(&p).unwrap();
            assert_eq!(field_solve(&p).spins(), truth.best().unwrap().spins());
        }
    }
}
