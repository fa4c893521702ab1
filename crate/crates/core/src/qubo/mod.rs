//! QUBO energies over candidate edges.

pub mod build;
pub mod geometry;
pub mod ising;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub use build::{build_qubo, reward_links, QuboMode, QuboParams};
pub use geometry::{angle_kernel, z_intercept, Scales, TripletAngles};
pub use ising::{qubo_to_ising, IsingModel};

/// `E(x) = offset + sum_i h_i x_i + sum_{i<j} J_ij x_i x_j` over binary `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Qubo {
    pub n: usize,
    pub linear: Vec<f64>,
    /// Upper-triangular couplings, keys `(i, j)` with `i < j`, no stored zeros.
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
    /// Edge id carried by each variable.
    pub var_to_edge: Vec<u64>,
}

impl Qubo {
    pub fn new(n: usize) -> Self {
        Qubo::with_edges((0..n as u64).collect())
    }

    pub fn with_edges(var_to_edge: Vec<u64>) -> Self {
        let n = var_to_edge.len();
        Qubo { n, linear: vec![0.0; n], quadratic: BTreeMap::new(), offset: 0.0, var_to_edge }
    }

    pub fn add_linear(&mut self, i: usize, v: f64) {
        self.linear[i] += v;
    }

    /// Accumulate onto `J_ij`. The diagonal folds into the linear term since
    /// `x * x = x`. Coefficients that cancel to exactly zero are dropped.
    pub fn add_quadratic(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.linear[i] += v;
            return;
        }
        let key = if i < j { (i, j) } else { (j, i) };
        let slot = self.quadratic.entry(key).or_insert(0.0);
        *slot += v;
        if *slot == 0.0 {
            self.quadratic.remove(&key);
        }
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.quadratic.get(&key).copied().unwrap_or(0.0)
    }

    pub fn energy(&self, bits: &[bool]) -> Result<f64> {
        if bits.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: bits.len() });
        }
        let mut e = self.offset;
        for (h, &b) in self.linear.iter().zip(bits) {
            if b {
                e += h;
            }
        }
        for (&(i, j), &v) in &self.quadratic {
            if bits[i] && bits[j] {
                e += v;
            }
        }
        Ok(e)
    }

    /// Evaluate a bit vector and package it with its energy.
    pub fn assignment(&self, bits: Vec<bool>) -> Result<Assignment> {
        let energy = self.energy(&bits)?;
        Ok(Assignment { bits, energy })
    }

    /// Edge ids of the variables set in `bits`.
    pub fn selected_edges(&self, bits: &[bool]) -> Vec<u64> {
        bits.iter().zip(&self.var_to_edge).filter(|(b, _)| **b).map(|(_, e)| *e).collect()
    }

    /// Text form: `n`, `offset`, one `lin`/`quad` line per nonzero term and
    /// one `var` line per variable. Floats use the shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "n {}", self.n).unwrap();
        writeln!(s, "offset {}", self.offset).unwrap();
        for (i, h) in self.linear.iter().enumerate() {
            if *h != 0.0 {
                writeln!(s, "lin {i} {h}").unwrap();
            }
        }
        for ((i, j), v) in &self.quadratic {
            writeln!(s, "quad {i} {j} {v}").unwrap();
        }
        for (i, e) in self.var_to_edge.iter().enumerate() {
            writeln!(s, "var {i} {e}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { path: "<qubo>".into(), line, message };
        let mut q: Option<Qubo> = None;
        let mut offset = 0.0;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if toks.is_empty() || toks[0].starts_with('#') {
                continue;
            }
            let idx = |t: &str| t.parse::<usize>().map_err(|e| err(line, format!("bad index {t:?}: {e}")));
            let num = |t: &str| t.parse::<f64>().map_err(|e| err(line, format!("bad value {t:?}: {e}")));
            let want = |n: usize| {
                if toks.len() == n {
                    Ok(())
                } else {
                    Err(err(line, format!("expected {n} fields, found {}", toks.len())))
                }
            };
            match toks[0] {
                "n" => {
                    want(2)?;
                    if q.is_some() {
                        return Err(err(line, "repeated n line".into()));
                    }
                    q = Some(Qubo::new(idx(toks[1])?));
                }
                "offset" => {
                    want(2)?;
                    offset = num(toks[1])?;
                }
                kind @ ("lin" | "quad" | "var") => {
                    let q = q.as_mut().ok_or_else(|| err(line, "term before n line".into()))?;
                    let check = |i: usize| {
                        if i < q.n {
                            Ok(i)
                        } else {
                            Err(err(line, format!("index {i} out of range for n = {}", q.n)))
                        }
                    };
                    match kind {
                        "lin" => {
                            want(3)?;
                            let i = check(idx(toks[1])?)?;
                            q.linear[i] = num(toks[2])?;
                        }
                        "quad" => {
                            want(4)?;
                            let (i, j) = (check(idx(toks[1])?)?, check(idx(toks[2])?)?);
                            if i >= j {
                                return Err(err(line, format!("quad key ({i}, {j}) not upper-triangular")));
                            }
                            let v = num(toks[3])?;
                            if v != 0.0 {
                                q.quadratic.insert((i, j), v);
                            }
                        }
                        _ => {
                            want(3)?;
                            let i = check(idx(toks[1])?)?;
                            q.var_to_edge[i] = toks[2].parse().map_err(|e| err(line, format!("bad edge id: {e}")))?;
                        }
                    }
                }
                other => return Err(err(line, format!("unknown record {other:?}"))),
            }
        }
        let mut q = q.ok_or_else(|| err(0, "missing n line".into()))?;
        q.offset = offset;
        Ok(q)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Qubo::from_text(&std::fs::read_to_string(path)?).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse { path: path.to_owned(), line, message },
            other => other,
        })
    }
}

/// A bit vector together with its energy under some Qubo.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub bits: Vec<bool>,
    pub energy: f64,
}

impl Assignment {
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::Qubo;
    use rand::Rng;

    /// Dense Qubo with every coefficient uniform in [-1, 1).
    pub(crate) fn random_qubo<R: Rng>(n: usize, rng: &mut R) -> Qubo {
        let mut q = Qubo::new(n);
        for i in 0..n {
            q.linear[i] = rng.random_range(-1.0..1.0);
            for j in i + 1..n {
                q.add_quadratic(i, j, rng.random_range(-1.0..1.0));
            }
        }
        q.offset = rng.random_range(-1.0..1.0);
        q
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::random_qubo;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_selection_is_offset() {
        let mut q = Qubo::new(3);
        q.offset = 2.5;
        q.linear[1] = -4.0;
        assert_eq!(q.energy(&[false; 3]).unwrap(), 2.5);
    }

    #[test]
    fn single_variable() {
        let mut q = Qubo::new(1);
        q.linear[0] = -1.0;
        assert_eq!(q.energy(&[true]).unwrap(), -1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(Qubo::new(2).energy(&[true]), Err(Error::LengthMismatch { expected: 2, actual: 1 })));
    }

    #[test]
    fn matches_dense_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let q = random_qubo(10, &mut rng);
            let bits: Vec<bool> = (0..10).map(|_| rng.random()).collect();
            let x: Vec<f64> = bits.iter().map(|b| *b as u8 as f64).collect();
            let mut oracle = q.offset;
            for i in 0..10 {
                oracle += q.linear[i] * x[i];
                for j in 0..10 {
                    if i < j {
                        oracle += q.coupling(i, j) * x[i] * x[j];
                    }
                }
            }
            assert!((q.energy(&bits).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn cancelled_couplings_are_not_stored() {
        let mut q = Qubo::new(3);
        q.add_quadratic(2, 0, 1.5);
        q.add_quadratic(0, 2, -1.5);
        assert!(q.quadratic.is_empty());
        q.add_quadratic(1, 1, 2.0);
        assert_eq!(q.linear[1], 2.0);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut q = random_qubo(7, &mut rng);
        q.var_to_edge = vec![10, 11, 12, 1 << 33, 14, 15, 16];
        q.offset = 0.1 + 0.2;
        let back = Qubo::from_text(&q.to_text()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn malformed_text_names_the_line() {
        let err = Qubo::from_text("n 2\noffset 0\nquad 1 0 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = Qubo::from_text("n 2\nlin 5 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
