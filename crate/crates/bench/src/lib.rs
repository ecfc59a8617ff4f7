//! Benchmark fixtures.

use nalgebra::{DMatrix, DVector};
use isingml::seed::rng;
use isingml::IsingProblem;
use rand::Rng;

/// Dense problem with fields and couplings uniform in [-1, 1].
pub fn dense_problem(n: usize, seed: u64) -> IsingProblem {
    let mut r = rng(seed);
    let h = DVector::from_fn(n, |_, _| r.gen_range(-1.0..=1.0));
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let v = r.gen_range(-1.0..=1.0);
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    IsingProblem::new(h, j).expect("symmetric couplings")
}
