//! Ising problems over ±1 spins.
//!
//! The energy of a configuration `s` is
//!
//! ```text
//! E(s) = Σ_i h_i s_i + Σ_{i<j} J_ij s_i s_j + Σ_i J_ii
//! ```
//!
//! Each edge is counted once. The diagonal of `J` is kept in the matrix: it
//! is a constant offset for spin configurations, but contributes `J_ii w_i²`
//! when the same form is evaluated at real-valued weights (see
//! [`IsingProblem::energy_real`]).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Local fields and symmetric couplings over `n` spins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingProblem {
    fields: DVector<f64>,
    couplings: DMatrix<f64>,
    layout: Option<ClassBlockLayout>,
}

impl IsingProblem {
    /// Builds a problem from fields and a symmetric coupling matrix.
    pub fn new(fields: DVector<f64>, couplings: DMatrix<f64>) -> Result<Self> {
        let n = fields.len();
        if n == 0 {
            return Err(Error::Empty("ising problem has no spins"));
        }
        check_len("coupling rows", n, couplings.nrows())?;
        check_len("coupling columns", n, couplings.ncols())?;
        if fields.iter().chain(couplings.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if couplings[(i, j)] != couplings[(j, i)] {
                    return Err(Error::Domain(format!(
                        "couplings not symmetric at ({i}, {j}): {} vs {}",
                        couplings[(i, j)],
                        couplings[(j, i)]
                    )));
                }
            }
        }
        Ok(Self {
            fields,
            couplings,
            layout: None,
        })
    }

    /// Builds a problem from the upper triangle (diagonal included) of
    /// `couplings`; the lower triangle is ignored and overwritten.
    pub fn from_upper(fields: DVector<f64>, mut couplings: DMatrix<f64>) -> Result<Self> {
        let n = couplings.nrows().min(couplings.ncols());
        for i in 0..n {
            for j in (i + 1)..n {
                couplings[(j, i)] = couplings[(i, j)];
            }
        }
        Self::new(fields, couplings)
    }

    pub fn with_layout(mut self, layout: ClassBlockLayout) -> Result<Self> {
        check_len("layout spins", self.n_spins(), layout.n_spins())?;
        self.layout = Some(layout);
        Ok(self)
    }

    pub fn n_spins(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &DVector<f64> {
        &self.fields
    }

    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }

    pub fn layout(&self) -> Option<&ClassBlockLayout> {
        self.layout.as_ref()
    }

    /// Sum of the diagonal couplings: the constant every spin configuration pays.
    pub fn diagonal_offset(&self) -> f64 {
        self.couplings.diagonal().sum()
    }

    /// True when every off-diagonal coupling is zero.
    pub fn is_decoupled(&self) -> bool {
        let n = self.n_spins();
        (0..n).all(|i| ((i + 1)..n).all(|j| self.couplings[(i, j)] == 0.0))
    }

    /// Energy of a ±1 configuration.
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        check_len("spin configuration", self.n_spins(), spins.len())?;
        Ok(self.energy_unchecked(spins))
    }

    pub(crate) fn energy_unchecked(&self, spins: &[i8]) -> f64 {
        // Shares the evaluation path with `energy_real` so both agree
        // bit-for-bit on ±1 inputs.
        let w: Vec<f64> = spins.iter().map(|&s| f64::from(s)).collect();
        self.quadratic_form(&w)
    }

    /// The same bilinear form at real weights in `[-1, 1]^n`; diagonal
    /// couplings contribute `J_ii w_i²`.
    pub fn energy_real(&self, weights: &[f64]) -> Result<f64> {
        check_len("weight vector", self.n_spins(), weights.len())?;
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| w.is_nan() || w.abs() > 1.0)
        {
            return Err(Error::Domain(format!("weight {i} = {w} outside [-1, 1]")));
        }
        Ok(self.quadratic_form(weights))
    }

    /// Bilinear form without the `[-1, 1]` domain check.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn quadratic_form(&self, w: &[f64]) -> f64 {
        let n = self.n_spins();
        let mut e = 0.0;
        for i in 0..n {
            let mut row = self.couplings[(i, i)] * w[i];
            for j in (i + 1)..n {
                row += self.couplings[(i, j)] * w[j];
            }
            e += w[i] * (self.fields[i] + row);
        }
        e
    }

    /// Largest absolute field or coupling.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.fields
            .iter()
            .chain(self.couplings.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Divides every coefficient by the largest magnitude so all lie in
    /// `[-1, 1]`. Positive scaling keeps the energy ordering of configurations.
    pub fn scale_to_unit(&self) -> Result<Self> {
        let scale = self.max_abs_coefficient();
        if scale == 0.0 {
            return Err(Error::Degenerate("all coefficients are zero".into()));
        }
        Ok(Self {
            fields: &self.fields / scale,
            couplings: &self.couplings / scale,
            layout: self.layout,
        })
    }

    /// Same problem with spins relabelled: new spin `i` is old spin `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_spins();
        check_len("permutation", n, perm.len())?;
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Domain("not a permutation".into()));
            }
        }
        let fields = DVector::from_fn(n, |i, _| self.fields[perm[i]]);
        let couplings = DMatrix::from_fn(n, n, |i, j| self.couplings[(perm[i], perm[j])]);
        Self::new(fields, couplings)
    }

    /// Writes the text exchange format:
    ///
    /// ```text
    /// # comment lines start with '#'
    /// N
    /// h_0 h_1 ... h_{N-1}        (whitespace separated, may span lines)
    /// i j J_ij                   (one triple per line, i <= j, zero entries omitted)
    /// ```
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.n_spins();
        writeln!(out, "{n}")?;
        let mut line = String::new();
        for (i, h) in self.fields.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            write!(line, "{h:?}").expect("write to string");
        }
        writeln!(out, "{line}")?;
        for i in 0..n {
            for j in i..n {
                let v = self.couplings[(i, j)];
                if v != 0.0 {
                    writeln!(out, "{i} {j} {v:?}")?;
                }
            }
        }
        Ok(())
    }

    /// Reads the format produced by [`write_text`](Self::write_text). Triples
    /// with `i > j` are accepted and mirrored; repeated pairs are summed.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut tokens: Vec<(usize, String)> = Vec::new();
        let mut lines: Vec<(usize, Vec<String>)> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let toks: Vec<String> = body.split_whitespace().map(str::to_owned).collect();
            lines.push((lineno + 1, toks.clone()));
            tokens.extend(toks.into_iter().map(|t| (lineno + 1, t)));
        }
        let mut it = tokens.into_iter();
        let (_, n_tok) = it
            .next()
            .ok_or_else(|| Error::Format("empty ising problem file".into()))?;
        let n: usize = n_tok
            .parse()
            .map_err(|_| Error::Format(format!("bad spin count {n_tok:?}")))?;
        if n == 0 {
            return Err(Error::Empty("ising problem has no spins"));
        }
        let mut fields = DVector::zeros(n);
        let mut last_line = 0;
        for i in 0..n {
            let (ln, t) = it
                .next()
                .ok_or_else(|| Error::Format(format!("expected {n} fields, found {i}")))?;
            fields[i] = parse_f64(&t, ln)?;
            last_line = ln;
        }
        let mut couplings = DMatrix::zeros(n, n);
        for (ln, toks) in lines.into_iter().filter(|(ln, _)| *ln > last_line) {
            if toks.len() != 3 {
                return Err(Error::Format(format!(
                    "line {ln}: expected `i j J_ij`, found {} tokens",
                    toks.len()
                )));
            }
            let i = parse_index(&toks[0], n, ln)?;
            let j = parse_index(&toks[1], n, ln)?;
            let v = parse_f64(&toks[2], ln)?;
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            couplings[(a, b)] += v;
        }
        Self::from_upper(fields, couplings)
    }
}

fn parse_f64(t: &str, line: usize) -> Result<f64> {
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Format(format!("line {line}: bad number {t:?}")))
}

fn parse_index(t: &str, n: usize, line: usize) -> Result<usize> {
    t.parse::<usize>()
        .ok()
        .filter(|&i| i < n)
        .ok_or_else(|| Error::Format(format!("line {line}: bad spin index {t:?} (n = {n})")))
}

/// A ±1 configuration, optionally carrying its energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
    energy: Option<f64>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(i) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::Domain(format!("spin {i} is {}, not ±1", spins[i])));
        }
        Ok(Self { spins, energy: None })
    }

    /// Builds the configuration and caches its energy under `problem`.
    pub fn evaluated(spins: Vec<i8>, problem: &IsingProblem) -> Result<Self> {
        let mut c = Self::new(spins)?;
        c.energy = Some(problem.energy(&c.spins)?);
        Ok(c)
    }

    pub(crate) fn from_parts(spins: Vec<i8>, energy: f64) -> Self {
        debug_assert!(spins.iter().all(|&s| s == 1 || s == -1));
        Self {
            spins,
            energy: Some(energy),
        }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn energy(&self) -> Option<f64> {
        self.energy
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.spins.iter().map(|&s| f64::from(s)).collect()
    }
}

/// Maps spins to (class block, feature) pairs: spin `k * M + m` holds the
/// weight of feature `m` for class `k`. There are `K - 1` blocks; the last
/// class is the reference and has no block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBlockLayout {
    n_classes: usize,
    n_features: usize,
}

impl ClassBlockLayout {
    pub fn new(n_classes: usize, n_features: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Degenerate(format!(
                "need at least two classes, got {n_classes}"
            )));
        }
        if n_features == 0 {
            return Err(Error::Empty("layout has no features"));
        }
        Ok(Self {
            n_classes,
            n_features,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_blocks(&self) -> usize {
        self.n_classes - 1
    }

    pub fn n_spins(&self) -> usize {
        self.n_features * self.n_blocks()
    }

    pub fn spin_index(&self, block: usize, feature: usize) -> usize {
        assert!(block < self.n_blocks() && feature < self.n_features);
        block * self.n_features + feature
    }

    pub fn block_feature(&self, spin: usize) -> (usize, usize) {
        assert!(spin < self.n_spins());
        (spin / self.n_features, spin % self.n_features)
    }

    /// Reshapes a flat spin-ordered vector into a `(K-1) × M` weight matrix.
    pub fn to_weight_matrix(&self, flat: &[f64]) -> Result<DMatrix<f64>> {
        check_len("flat weights", self.n_spins(), flat.len())?;
        Ok(DMatrix::from_row_slice(self.n_blocks(), self.n_features, flat))
    }

    /// Flattens a `(K-1) × M` weight matrix in spin order.
    pub fn flatten(&self, weights: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_len("weight rows", self.n_blocks(), weights.nrows())?;
        check_len("weight columns", self.n_features, weights.ncols())?;
        let mut out = Vec::with_capacity(self.n_spins());
        for k in 0..self.n_blocks() {
            out.extend(weights.row(k).iter());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn problem(h: &[f64], j: &[(usize, usize, f64)]) -> IsingProblem {
        let n = h.len();
        let mut c = DMatrix::zeros(n, n);
        for &(a, b, v) in j {
            c[(a, b)] = v;
        }
        IsingProblem::from_upper(DVector::from_row_slice(h), c).unwrap()
    }

    pub(crate) fn random_problem(n: usize, seed: u64) -> IsingProblem {
        let mut rng = seed::rng(seed);
        let h = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let mut j = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                j[(a, b)] = rng.gen_range(-1.0..1.0);
            }
        }
        IsingProblem::from_upper(h, j).unwrap()
    }

    // Independent of `energy_unchecked`: full double loop over ordered pairs.
    fn brute_energy(p: &IsingProblem, s: &[i8]) -> f64 {
        let n = p.n_spins();
        let mut e = 0.0;
        for i in 0..n {
            e += p.fields()[i] * f64::from(s[i]);
            for j in 0..n {
                if i < j {
                    e += p.couplings()[(i, j)] * f64::from(s[i] * s[j]);
                } else if i == j {
                    e += p.couplings()[(i, i)];
                }
            }
        }
        e
    }

    #[test]
    fn linear_only_energy() {
        let p = problem(&[1.0, -1.0], &[]);
        assert_eq!(p.energy(&[-1, 1]).unwrap(), -2.0);
    }

    #[test]
    fn single_bond_energy() {
        let p = problem(&[0.0, 0.0], &[(0, 1, 1.0)]);
        assert_eq!(p.energy(&[1, -1]).unwrap(), -1.0);
    }

    #[test]
    fn random_instance_matches_double_loop() {
        let p = random_problem(4, 11);
        for bits in 0..16u32 {
            let s: Vec<i8> = (0..4).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let e = p.energy(&s).unwrap();
            assert!((e - brute_energy(&p, &s)).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_rejects_wrong_length() {
        let p = problem(&[1.0, 2.0], &[]);
        assert!(matches!(p.energy(&[1]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn asymmetric_couplings_rejected() {
        let mut c = DMatrix::zeros(2, 2);
        c[(0, 1)] = 1.0;
        assert!(IsingProblem::new(DVector::zeros(2), c).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let p = IsingProblem::new(DVector::from_row_slice(&[f64::NAN]), DMatrix::zeros(1, 1));
        assert!(matches!(p, Err(Error::Domain(_))));
    }

    #[test]
    fn energy_real_consistent_at_spins() {
        let p = random_problem(6, 3);
        let s = [1, -1, -1, 1, 1, -1];
        let w: Vec<f64> = s.iter().map(|&v| f64::from(v)).collect();
        assert_eq!(p.energy_real(&w).unwrap(), p.energy(&s).unwrap());
    }

    #[test]
    fn energy_real_zero_vector() {
        let p = problem(&[0.3, -2.0, 1.5], &[(0, 1, 0.7), (1, 2, -0.4)]);
        assert_eq!(p.energy_real(&[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn energy_real_at_average_of_two_configs() {
        let p = random_problem(5, 19);
        let a = [1i8, -1, 1, 1, -1];
        let b = [1i8, 1, -1, 1, 1];
        let w: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| (f64::from(x) + f64::from(y)) / 2.0)
            .collect();
        // direct summation over ordered pairs
        let n = 5;
        let mut e = 0.0;
        for i in 0..n {
            e += p.fields()[i] * w[i];
            for j in 0..n {
                if i <= j {
                    e += p.couplings()[(i, j)] * w[i] * w[j];
                }
            }
        }
        assert!((p.energy_real(&w).unwrap() - e).abs() < 1e-12);
    }

    #[test]
    fn energy_real_domain_error() {
        let p = problem(&[1.0], &[]);
        assert!(matches!(p.energy_real(&[1.5]), Err(Error::Domain(_))));
        assert!(matches!(p.energy_real(&[f64::NAN]), Err(Error::Domain(_))));
    }

    #[test]
    fn scale_max_abs() {
        let p = problem(&[2.0, -4.0], &[]);
        let s = p.scale_to_unit().unwrap();
        assert_eq!(s.fields().as_slice(), &[0.5, -1.0]);
    }

    #[test]
    fn scale_identity_on_unit_problem() {
        let p = problem(&[0.5, -1.0], &[(0, 1, 0.25)]);
        assert_eq!(p.scale_to_unit().unwrap(), p);
    }

    #[test]
    fn scale_all_zero_is_degenerate() {
        let p = problem(&[0.0, 0.0], &[]);
        assert!(matches!(p.scale_to_unit(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spin_configuration_rejects_non_spins() {
        assert!(SpinConfiguration::new(vec![1, 0, -1]).is_err());
        assert!(SpinConfiguration::new(vec![1, -1]).is_ok());
    }

    #[test]
    fn text_format_round_trip() {
        let p = random_problem(7, 5);
        let mut buf = Vec::new();
        p.write_text(&mut buf).unwrap();
        let q = IsingProblem::read_text(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn text_format_mirrors_lower_triples() {
        let text = "# tiny\n3\n1 0 -1\n2 0 0.5\n1 1 2\n";
        let p = IsingProblem::read_text(text.as_bytes()).unwrap();
        assert_eq!(p.couplings()[(0, 2)], 0.5);
        assert_eq!(p.couplings()[(2, 0)], 0.5);
        assert_eq!(p.couplings()[(1, 1)], 2.0);
    }

    #[test]
    fn text_format_errors() {
        assert!(IsingProblem::read_text("2\n1\n".as_bytes()).is_err());
        assert!(IsingProblem::read_text("2\n1 1\n0 5 1\n".as_bytes()).is_err());
        assert!(IsingProblem::read_text("2\n1 x\n".as_bytes()).is_err());
    }

    #[test]
    fn layout_bijection() {
        let l = ClassBlockLayout::new(3, 2).unwrap();
        assert_eq!(l.n_spins(), 4);
        let mut seen = std::collections::BTreeSet::new();
        for k in 0..2 {
            for m in 0..2 {
                let s = l.spin_index(k, m);
                assert_eq!(l.block_feature(s), (k, m));
                seen.insert(s);
            }
        }
        assert_eq!(seen.len(), 4);
    }

    proptest! {
        #[test]
        fn energy_invariant_under_permutation(seed in 0u64..500, bits in 0u32..256) {
            let n = 8;
            let p = random_problem(n, seed);
            let s: Vec<i8> = (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let mut rng = seed::rng(seed ^ 0xABCD);
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let q = p.permuted(&perm).unwrap();
            let sq: Vec<i8> = perm.iter().map(|&i| s[i]).collect();
            let (a, b) = (p.energy(&s).unwrap(), q.energy(&sq).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn energy_real_equals_energy_on_spins(seed in 0u64..500, bits in 0u32..1024) {
            let n = 10;
            let p = random_problem(n, seed);
            let s: Vec<i8> = (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let w: Vec<f64> = s.iter().map(|&v| f64::from(v)).collect();
            prop_assert_eq!(p.energy_real(&w).unwrap(), p.energy(&s).unwrap());
        }
    }
}
