use std::collections::BTreeMap;

use super::Qubo;
use crate::error::{Error, Result};

/// Spin form `E(s) = offset + sum h_i s_i + sum_{i<j} J_ij s_i s_j`, `s_i = +-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub n: usize,
    pub fields: Vec<f64>,
    pub couplings: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: spins.len() });
        }
        let mut e = self.offset;
        for (h, &s) in self.fields.iter().zip(spins) {
            e += h * s as f64;
        }
        for (&(i, j), &v) in &self.couplings {
            e += v * (spins[i] as f64) * (spins[j] as f64);
        }
        Ok(e)
    }
}

/// Substitute `x_i = (s_i + 1) / 2`. The constant is kept so energies agree
/// exactly with the source Qubo.
pub fn qubo_to_ising(q: &Qubo) -> IsingModel {
    let mut fields: Vec<f64> = q.linear.iter().map(|h| h / 2.0).collect();
    let mut couplings = BTreeMap::new();
    let mut offset = q.offset + q.linear.iter().sum::<f64>() / 2.0;
    for (&(i, j), &v) in &q.quadratic {
        couplings.insert((i, j), v / 4.0);
        fields[i] += v / 4.0;
        fields[j] += v / 4.0;
        offset += v / 4.0;
    }
    IsingModel { n: q.n, fields, couplings, offset }
}

/// Spin vector for a bit vector.
pub fn spins_of(bits: &[bool]) -> Vec<i8> {
    bits.iter().map(|b| if *b { 1 } else { -1 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn states(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0u32..1 << n).map(move |m| (0..n).map(|i| m >> i & 1 == 1).collect())
    }

    #[test]
    fn single_field() {
        let mut q = Qubo::new(1);
        q.linear[0] = 2.0;
        let m = qubo_to_ising(&q);
        assert_eq!(m.fields, vec![1.0]);
        assert_eq!(m.offset, 1.0);
        assert_eq!(m.energy(&[1]).unwrap(), 2.0);
        assert_eq!(q.energy(&[true]).unwrap(), 2.0);
    }

    #[test]
    fn single_coupling() {
        let mut q = Qubo::new(2);
        q.add_quadratic(0, 1, 4.0);
        let m = qubo_to_ising(&q);
        assert_eq!(m.couplings[&(0, 1)], 1.0);
        assert_eq!(m.fields, vec![1.0, 1.0]);
        assert_eq!(m.offset, 1.0);
        for bits in states(2) {
            let oracle = if bits[0] && bits[1] { 4.0 } else { 0.0 };
            assert_eq!(m.energy(&spins_of(&bits)).unwrap(), oracle);
        }
    }

    #[test]
    fn empty_keeps_offset() {
        let mut q = Qubo::new(0);
        q.offset = -3.5;
        let m = qubo_to_ising(&q);
        assert_eq!(m.n, 0);
        assert!(m.couplings.is_empty());
        assert_eq!(m.offset, -3.5);
    }
}
