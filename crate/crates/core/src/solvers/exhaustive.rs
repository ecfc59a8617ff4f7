use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::SolveResult;
use crate::error::{Error, Result};
use crate::ising::{IsingProblem, SpinConfiguration};

/// Largest problem [`exhaustive_solve`] will enumerate.
pub const MAX_EXHAUSTIVE_SPINS: usize = 26;

/// Enumerates all `2^N` configurations and returns every one, sorted by
/// energy. Equal energies are ordered by the configuration's bit pattern
/// (bit `i` set when spin `i` is `+1`).
pub fn exhaustive_solve(problem: &IsingProblem) -> Result<SolveResult> {
    exhaustive_solve_top(problem, usize::MAX)
}

/// As [`exhaustive_solve`] but keeps only the `top_k` lowest configurations.
pub fn exhaustive_solve_top(problem: &IsingProblem, top_k: usize) -> Result<SolveResult> {
    let n = problem.n_spins();
    if n > MAX_EXHAUSTIVE_SPINS {
        return Err(Error::Capacity {
            what: "exhaustive enumeration spins",
            required: n,
            limit: MAX_EXHAUSTIVE_SPINS,
        });
    }
    if top_k == 0 {
        return Err(Error::Domain("top_k must be at least 1".into()));
    }
    let total: u64 = 1 << n;
    let keep = usize::try_from(total).map_or(top_k, |t| t.min(top_k));

    let fields = problem.fields();
    let j = problem.couplings();
    // Gray-code walk from all spins down (code 0), one flip per step.
    let mut s = vec![-1.0_f64; n];
    let mut local: Vec<f64> = (0..n)
        .map(|i| fields[i] - (0..n).filter(|&k| k != i).map(|k| j[(i, k)]).sum::<f64>())
        .collect();
    let mut energy = problem.energy_unchecked(&vec![-1; n]);
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(keep.min(1 << 20) + 1);
    let mut code: u64 = 0;
    for step in 0..total {
        if step > 0 {
            let bit = step.trailing_zeros() as usize;
            energy += -2.0 * s[bit] * local[bit];
            s[bit] = -s[bit];
            code ^= 1 << bit;
            let delta = 2.0 * s[bit];
            for (k, l) in local.iter_mut().enumerate() {
                if k != bit {
                    *l += j[(k, bit)] * delta;
                }
            }
        }
        let cand = Candidate { energy, code };
        if heap.len() < keep {
            heap.push(cand);
        } else if cand < *heap.peek().expect("heap is full") {
            heap.pop();
            heap.push(cand);
        }
    }

    // Replace the accumulated energies with exact evaluations before sorting.
    let mut kept: Vec<Candidate> = heap
        .into_iter()
        .map(|c| Candidate {
            energy: problem.energy_unchecked(&decode(c.code, n)),
            code: c.code,
        })
        .collect();
    kept.sort();
    let configs = kept
        .into_iter()
        .map(|c| SpinConfiguration::from_parts(decode(c.code, n), c.energy))
        .collect();
    Ok(SolveResult {
        configurations: configs,
        restarts: 1,
        seed: 0,
    })
}

fn decode(code: u64, n: usize) -> Vec<i8> {
    (0..n).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect()
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    energy: f64,
    code: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then(self.code.cmp(&other.code))
    }
}
