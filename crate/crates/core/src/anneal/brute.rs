use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sa::Csr;
use super::sa::State;
use crate::error::{Error, Result};
use crate::qubo::{Assignment, Qubo};

pub const BRUTE_FORCE_LIMIT: usize = 25;

/// Exact minimum by Gray-code enumeration of all `2^n` states. Energy ties
/// go to the lexicographically smallest bit vector.
pub fn brute_force(q: &Qubo) -> Result<Assignment> {
    if q.n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(format!("{} variables exceeds the exhaustive limit of {BRUTE_FORCE_LIMIT}", q.n)));
    }
    let csr = Csr::new(q);
    let mut st = State::new(q, &csr, vec![false; q.n]);
    // Incremental energies carry rounding, so near-ties are re-scored exactly.
    let tol = 1e-9 * (1.0 + q.linear.iter().chain(q.quadratic.values()).map(|v| v.abs()).sum::<f64>());
    let mut best_e = st.energy;
    let mut ties: Vec<Vec<bool>> = vec![st.bits.clone()];
    for k in 1u64..(1u64 << q.n) {
        st.flip(k.trailing_zeros() as usize);
        if st.energy < best_e - tol {
            best_e = st.energy;
            ties.clear();
            ties.push(st.bits.clone());
        } else if st.energy <= best_e + tol {
            best_e = best_e.min(st.energy);
            ties.push(st.bits.clone());
        }
    }
    let mut scored: Vec<Assignment> = ties.into_iter().map(|b| q.assignment(b)).collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.bits.cmp(&b.bits)));
    Ok(scored.swap_remove(0))
}

/// I.i.d. Bernoulli(`true_fraction`) selection.
pub fn random_baseline(n_vars: usize, true_fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&true_fraction) {
        return Err(Error::Config(format!("true_fraction {true_fraction} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_vars).map(|_| rng.random_bool(true_fraction)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::tests_support::random_qubo;

    fn states(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0u32..1 << n).map(move |m| (0..n).map(|i| m >> (n - 1 - i) & 1 == 1).collect())
    }

    #[test]
    fn empty_qubo() {
        let mut q = Qubo::new(0);
        q.offset = 1.5;
        let a = brute_force(&q).unwrap();
        assert!(a.bits.is_empty());
        assert_eq!(a.energy, 1.5);
    }

    #[test]
    fn positive_field_stays_off() {
        let mut q = Qubo::new(1);
        q.linear[0] = 2.0;
        assert_eq!(brute_force(&q).unwrap(), Assignment { bits: vec![false], energy: 0.0 });
    }

    #[test]
    fn pair_with_attractive_coupling() {
        let mut q = Qubo::new(2);
        q.linear = vec![1.0, 1.0];
        q.add_quadratic(0, 1, -3.0);
        assert_eq!(brute_force(&q).unwrap(), Assignment { bits: vec![true, true], energy: -1.0 });
    }

    #[test]
    fn ties_break_lexicographically() {
        // Both single-bit states cost -1.
        let mut q = Qubo::new(2);
        q.linear = vec![-1.0, -1.0];
        q.add_quadratic(0, 1, 1.0);
        assert_eq!(brute_force(&q).unwrap().bits, vec![false, true]);
    }

    #[test]
    fn matches_plain_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=9 {
            let q = random_qubo(n, &mut rng);
            let oracle = states(n).map(|b| q.energy(&b).unwrap()).fold(f64::INFINITY, f64::min);
            assert!((brute_force(&q).unwrap().energy - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn size_guard() {
        assert!(matches!(brute_force(&Qubo::new(26)), Err(Error::TooLarge(_))));
    }

    #[test]
    fn baseline_extremes_and_rate() {
        assert!(random_baseline(100, 0.0, 1).unwrap().iter().all(|b| !b));
        assert!(random_baseline(100, 1.0, 1).unwrap().iter().all(|b| *b));
        let ones = random_baseline(10_000, 0.01, 7).unwrap().iter().filter(|b| **b).count();
        assert!((50..=150).contains(&ones), "{ones}");
        assert_eq!(random_baseline(50, 0.3, 2).unwrap(), random_baseline(50, 0.3, 2).unwrap());
        assert!(random_baseline(5, 1.5, 0).is_err());
    }
}
