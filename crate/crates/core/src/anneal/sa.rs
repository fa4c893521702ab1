//! Metropolis simulated annealing with a linear inverse-temperature ramp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{Assignment, Qubo};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub beta_init: f64,
    pub beta_fin: f64,
    pub sweeps: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { beta_init: 0.1, beta_fin: 10.0, sweeps: 1000 }
    }
}

impl Schedule {
    pub fn with_sweeps(self, sweeps: usize) -> Self {
        Schedule { sweeps, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_init > 0.0 && self.beta_fin > self.beta_init && self.beta_fin.is_finite()) {
            return Err(Error::Config(format!(
                "schedule needs beta_fin > beta_init > 0, got {} -> {}",
                self.beta_init, self.beta_fin
            )));
        }
        if self.sweeps == 0 {
            return Err(Error::Config("schedule needs at least one sweep".into()));
        }
        Ok(())
    }

    pub fn increment(&self) -> f64 {
        (self.beta_fin - self.beta_init) / self.sweeps as f64
    }

    /// Inverse temperature used during sweep `k` (0-based).
    pub fn beta_at(&self, k: usize) -> f64 {
        self.beta_init + k as f64 * self.increment()
    }
}

/// Accept a move of energy change `delta` at inverse temperature `beta`.
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, beta: f64, rng: &mut R) -> bool {
    delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp()
}

/// Symmetric adjacency of the couplings in compressed rows.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    start: Vec<usize>,
    nbr: Vec<usize>,
    weight: Vec<f64>,
}

impl Csr {
    pub(crate) fn new(q: &Qubo) -> Self {
        let mut deg = vec![0usize; q.n + 1];
        for &(i, j) in q.quadratic.keys() {
            deg[i + 1] += 1;
            deg[j + 1] += 1;
        }
        for k in 1..deg.len() {
            deg[k] += deg[k - 1];
        }
        let mut fill = deg.clone();
        let mut nbr = vec![0; deg[q.n]];
        let mut weight = vec![0.0; deg[q.n]];
        for (&(i, j), &v) in &q.quadratic {
            for (a, b) in [(i, j), (j, i)] {
                nbr[fill[a]] = b;
                weight[fill[a]] = v;
                fill[a] += 1;
            }
        }
        Csr { start: deg, nbr, weight }
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.start[i]..self.start[i + 1];
        self.nbr[r.clone()].iter().copied().zip(self.weight[r].iter().copied())
    }
}

/// Bit state with cached local fields `f_i = h_i + sum_j J_ij x_j`.
pub(crate) struct State<'a> {
    q: &'a Qubo,
    csr: &'a Csr,
    pub(crate) bits: Vec<bool>,
    field: Vec<f64>,
    pub(crate) energy: f64,
}

impl<'a> State<'a> {
    pub(crate) fn new(q: &'a Qubo, csr: &'a Csr, bits: Vec<bool>) -> Self {
        let mut field = q.linear.clone();
        for (&(i, j), &v) in &q.quadratic {
            if bits[j] {
                field[i] += v;
            }
            if bits[i] {
                field[j] += v;
            }
        }
        let energy = q.energy(&bits).expect("state length matches");
        State { q, csr, bits, field, energy }
    }

    /// Energy change of flipping bit `i`.
    pub(crate) fn delta(&self, i: usize) -> f64 {
        if self.bits[i] {
            -self.field[i]
        } else {
            self.field[i]
        }
    }

    pub(crate) fn flip(&mut self, i: usize) {
        let d = self.delta(i);
        let sign = if self.bits[i] { -1.0 } else { 1.0 };
        self.bits[i] = !self.bits[i];
        self.energy += d;
        for (j, w) in self.csr.row(i) {
            self.field[j] += sign * w;
        }
    }

    fn exact(&self) -> f64 {
        self.q.energy(&self.bits).expect("state length matches")
    }
}

fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// One annealing run from a uniform random start. Returns the best state
/// seen at sweep boundaries (including the start) with its exact energy.
/// `observe` is called with the state after every sweep.
pub(crate) fn anneal_once(
    q: &Qubo,
    csr: &Csr,
    schedule: &Schedule,
    rng: &mut ChaCha8Rng,
    mut observe: impl FnMut(usize, &[bool], f64),
) -> Assignment {
    let init: Vec<bool> = (0..q.n).map(|_| rng.random()).collect();
    let mut st = State::new(q, csr, init);
    let mut best = (st.energy, st.bits.clone());
    for sweep in 0..schedule.sweeps {
        let beta = schedule.beta_at(sweep);
        for i in 0..q.n {
            if metropolis_accept(st.delta(i), beta, rng) {
                st.flip(i);
            }
        }
        observe(sweep, &st.bits, st.energy);
        if st.energy < best.0 {
            best = (st.energy, st.bits.clone());
        }
    }
    // Drift from accumulated updates is removed by an exact re-evaluation;
    // the current state is also a candidate.
    let end = st.exact();
    let best_exact = q.energy(&best.1).expect("state length matches");
    if end < best_exact || (end == best_exact && st.bits < best.1) {
        return Assignment { energy: end, bits: st.bits };
    }
    Assignment { energy: best_exact, bits: best.1 }
}

fn better(a: &Assignment, b: &Assignment) -> bool {
    a.energy < b.energy || (a.energy == b.energy && a.bits < b.bits)
}

/// Best of `runs` independent annealing runs. Run `k` draws from stream `k`
/// of a generator seeded with `seed`, so the result does not depend on the
/// thread count.
pub fn simulated_anneal(q: &Qubo, schedule: &Schedule, runs: usize, seed: u64) -> Result<Assignment> {
    schedule.validate()?;
    if runs == 0 {
        return Err(Error::Config("at least one annealing run is required".into()));
    }
    if q.n == 0 {
        return q.assignment(Vec::new());
    }
    let csr = Csr::new(q);
    let best = (0..runs as u64)
        .into_par_iter()
        .map(|r| anneal_once(q, &csr, schedule, &mut run_rng(seed, r), |_, _, _| {}))
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .expect("runs >= 1");
    Ok(best)
}

/// Single run recording a snapshot of the state every `every` sweeps.
pub fn anneal_trace(q: &Qubo, schedule: &Schedule, seed: u64, every: usize) -> Result<(Assignment, Vec<Assignment>)> {
    schedule.validate()?;
    let csr = Csr::new(q);
    let every = every.max(1);
    let mut snaps = Vec::new();
    let best = anneal_once(q, &csr, schedule, &mut run_rng(seed, 0), |k, bits, e| {
        if (k + 1) % every == 0 {
            snaps.push(Assignment { bits: bits.to_vec(), energy: e });
        }
    });
    for s in &mut snaps {
        s.energy = q.energy(&s.bits)?;
    }
    Ok((best, snaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::tests_support::random_qubo;

    #[test]
    fn single_negative_field() {
        let mut q = Qubo::new(1);
        q.linear[0] = -1.0;
        for sweeps in [1, 10, 100] {
            let a = simulated_anneal(&q, &Schedule::default().with_sweeps(sweeps), 3, 1).unwrap();
            assert_eq!(a.bits, vec![true]);
            assert_eq!(a.energy, -1.0);
        }
    }

    #[test]
    fn pair_with_attractive_coupling() {
        let mut q = Qubo::new(2);
        q.linear = vec![1.0, 1.0];
        q.add_quadratic(0, 1, -3.0);
        let a = simulated_anneal(&q, &Schedule::default().with_sweeps(200), 4, 9).unwrap();
        assert_eq!(a.bits, vec![true, true]);
        assert_eq!(a.energy, -1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_qubo(30, &mut rng);
        let s = Schedule::default().with_sweeps(50);
        assert_eq!(simulated_anneal(&q, &s, 8, 42).unwrap(), simulated_anneal(&q, &s, 8, 42).unwrap());
    }

    #[test]
    fn incremental_delta_matches_full_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [1, 2, 7, 25] {
            let q = random_qubo(n, &mut rng);
            let csr = Csr::new(&q);
            let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let mut st = State::new(&q, &csr, bits);
            for _ in 0..500 {
                let i = rng.random_range(0..n);
                let before = q.energy(&st.bits).unwrap();
                let d = st.delta(i);
                st.flip(i);
                let after = q.energy(&st.bits).unwrap();
                assert!((after - before - d).abs() < 1e-9, "n {n}");
                assert!((st.energy - after).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn never_worse_than_initial_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let q = random_qubo(15, &mut rng);
        let s = Schedule::default().with_sweeps(3);
        let best = simulated_anneal(&q, &s, 6, 5).unwrap();
        for r in 0..6u64 {
            let mut g = run_rng(5, r);
            let init: Vec<bool> = (0..q.n).map(|_| g.random()).collect();
            assert!(best.energy <= q.energy(&init).unwrap());
        }
    }

    #[test]
    fn metropolis_rate_matches_boltzmann_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (beta, delta) in [(0.5, 1.0), (1.0, 0.3), (2.0, 1.5)] {
            let n = 100_000;
            let acc = (0..n).filter(|_| metropolis_accept(delta, beta, &mut rng)).count() as f64;
            let p = f64::exp(-beta * delta);
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((acc - n as f64 * p).abs() < 3.0 * sigma, "beta {beta} delta {delta}");
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::default().validate().is_ok());
        assert!(Schedule { beta_init: 1.0, beta_fin: 0.5, sweeps: 5 }.validate().is_err());
        assert!(Schedule::default().with_sweeps(0).validate().is_err());
        let s = Schedule::default().with_sweeps(99);
        assert!((s.increment() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn trace_snapshots() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = random_qubo(10, &mut rng);
        let (best, snaps) = anneal_trace(&q, &Schedule::default().with_sweeps(20), 1, 5).unwrap();
        assert_eq!(snaps.len(), 4);
        assert!(snaps.iter().all(|s| s.energy >= best.energy));
    }
}
