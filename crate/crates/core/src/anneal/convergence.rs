//! Sweeps-to-convergence measurement.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_mean, DEFAULT_PSEUDO};
use super::sa::{anneal_once, simulated_anneal, Csr, Schedule};
use crate::error::{Error, Result};
use crate::qubo::Qubo;

/// Instances above this many variables get a relative tolerance by default.
pub const RELAX_ABOVE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceProtocol {
    pub long_sweeps: usize,
    pub long_runs: usize,
    pub samples: usize,
    /// Absolute energy tolerance. `None` picks 0, or `relaxed * |E_ref|`
    /// for instances above [`RELAX_ABOVE`] variables.
    pub epsilon: Option<f64>,
    pub relaxed: f64,
    /// Search ceiling; samples that never converge are recorded at this value.
    pub max_sweeps: usize,
    pub beta_init: f64,
    pub beta_fin: f64,
}

impl Default for ConvergenceProtocol {
    fn default() -> Self {
        ConvergenceProtocol {
            long_sweeps: 15000,
            long_runs: 5,
            samples: 5,
            epsilon: None,
            relaxed: 1e-3,
            max_sweeps: 30000,
            beta_init: 0.1,
            beta_fin: 10.0,
        }
    }
}

impl ConvergenceProtocol {
    fn schedule(&self, sweeps: usize) -> Schedule {
        Schedule { beta_init: self.beta_init, beta_fin: self.beta_fin, sweeps }
    }

    pub fn epsilon_for(&self, n: usize, reference: f64) -> f64 {
        match self.epsilon {
            Some(e) => e,
            None if n > RELAX_ABOVE => self.relaxed * reference.abs(),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub sample: usize,
    pub sweeps: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStats {
    pub reference_energy: f64,
    pub sweeps_to_converge: Vec<usize>,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub epsilon: f64,
    /// Samples that hit `max_sweeps` without converging.
    pub censored: usize,
    pub trials: Vec<Trial>,
}

fn trial_seed(seed: u64, sample: usize, sweeps: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(sample as u64 + 1));
    rng.set_stream(sweeps as u64);
    rng
}

enum Outcome {
    Converged(usize),
    Censored,
    /// A trial found a state below the reference.
    Improved(f64),
}

/// Reference energy from `long_runs` long anneals, then for each sample the
/// smallest sweep count whose run reaches it (within epsilon): doubling to
/// bracket, then bisection.
pub fn measure_convergence(q: &Qubo, protocol: &ConvergenceProtocol, seed: u64) -> Result<ConvergenceStats> {
    if q.n == 0 {
        return Err(Error::Insufficient("cannot time an empty Qubo".into()));
    }
    if protocol.samples == 0 || protocol.long_runs == 0 || protocol.max_sweeps == 0 {
        return Err(Error::Config("protocol counts must be positive".into()));
    }
    protocol.schedule(protocol.long_sweeps).validate()?;
    let csr = Csr::new(q);
    let mut reference = simulated_anneal(q, &protocol.schedule(protocol.long_sweeps), protocol.long_runs, seed)?.energy;
    let mut trials = Vec::new();
    'restart: loop {
        let eps = protocol.epsilon_for(q.n, reference);
        let tiny = 1e-9 * (1.0 + reference.abs());
        trials.clear();
        let mut out = Vec::with_capacity(protocol.samples);
        let mut censored = 0;
        for sample in 0..protocol.samples {
            let mut run = |s: usize| {
                let a = anneal_once(q, &csr, &protocol.schedule(s), &mut trial_seed(seed, sample, s), |_, _, _| {});
                trials.push(Trial { sample, sweeps: s, energy: a.energy });
                a.energy
            };
            let reached = |e: f64| e <= reference + eps + tiny;
            let outcome = (|| {
                let mut hi = 1usize;
                let mut lo = 0usize;
                loop {
                    let e = run(hi);
                    if e < reference - tiny {
                        return Outcome::Improved(e);
                    }
                    if reached(e) {
                        break;
                    }
                    if hi >= protocol.max_sweeps {
                        return Outcome::Censored;
                    }
                    lo = hi;
                    hi = (hi * 2).min(protocol.max_sweeps);
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    let e = run(mid);
                    if e < reference - tiny {
                        return Outcome::Improved(e);
                    }
                    if reached(e) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Outcome::Converged(hi)
            })();
            match outcome {
                Outcome::Converged(s) => out.push(s),
                Outcome::Censored => {
                    censored += 1;
                    out.push(protocol.max_sweeps);
                }
                Outcome::Improved(e) => {
                    reference = e;
                    continue 'restart;
                }
            }
        }
        let summary = bootstrap_mean(
            &BTreeMap::from([(0usize, out.iter().map(|&s| s as f64).collect::<Vec<_>>())]),
            DEFAULT_PSEUDO,
            seed,
        )?;
        return Ok(ConvergenceStats {
            reference_energy: reference,
            sweeps_to_converge: out,
            mean: summary.mean,
            ci_low: summary.ci_low,
            ci_high: summary.ci_high,
            epsilon: eps,
            censored,
            trials: std::mem::take(&mut trials),
        });
    }
}

/// CSV rows `subqubo_id,m,sample_1..k,mean,ci_low,ci_high`.
pub fn write_convergence_csv<W: Write>(rows: &[(usize, usize, ConvergenceStats)], out: W) -> Result<()> {
    let k = rows.iter().map(|r| r.2.sweeps_to_converge.len()).max().unwrap_or(5);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["subqubo_id".to_string(), "m".to_string()];
    header.extend((1..=k).map(|i| format!("sample_{i}")));
    header.extend(["mean", "ci_low", "ci_high"].map(String::from));
    w.write_record(&header)?;
    for (id, m, s) in rows {
        let mut rec = vec![id.to_string(), m.to_string()];
        rec.extend((0..k).map(|i| s.sweeps_to_converge.get(i).map(|v| v.to_string()).unwrap_or_default()));
        rec.extend([s.mean, s.ci_low, s.ci_high].map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::tests_support::random_qubo;

    fn quick() -> ConvergenceProtocol {
        ConvergenceProtocol { long_sweeps: 500, max_sweeps: 1000, ..Default::default() }
    }

    #[test]
    fn single_variable_converges_in_one_sweep() {
        let mut q = Qubo::new(1);
        q.linear[0] = -1.0;
        let s = measure_convergence(&q, &quick(), 1).unwrap();
        assert_eq!(s.sweeps_to_converge, vec![1; 5]);
        assert_eq!(s.reference_energy, -1.0);
        assert_eq!(s.mean, 1.0);
    }

    #[test]
    fn reference_bounds_every_trial() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for seed in 0..5 {
            let q = random_qubo(14, &mut rng);
            let s = measure_convergence(&q, &quick(), seed).unwrap();
            assert_eq!(s.sweeps_to_converge.len(), 5);
            assert!(s.sweeps_to_converge.iter().all(|&k| k >= 1));
            assert!(s.trials.iter().all(|t| s.reference_energy <= t.energy + 1e-9));
            assert!(s.ci_low <= s.mean && s.mean <= s.ci_high);
        }
    }

    #[test]
    fn epsilon_relaxes_only_for_large_instances() {
        let p = ConvergenceProtocol::default();
        assert_eq!(p.epsilon_for(100, -50.0), 0.0);
        assert!((p.epsilon_for(2500, -50.0) - 0.05).abs() < 1e-12);
        let fixed = ConvergenceProtocol { epsilon: Some(0.5), ..p };
        assert_eq!(fixed.epsilon_for(10, -50.0), 0.5);
    }

    #[test]
    fn csv_layout() {
        let mut q = Qubo::new(1);
        q.linear[0] = -1.0;
        let s = measure_convergence(&q, &quick(), 1).unwrap();
        let mut buf = Vec::new();
        write_convergence_csv(&[(0, 1, s)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("subqubo_id,m,sample_1,sample_2,sample_3,sample_4,sample_5,mean,ci_low,ci_high\n"));
        assert!(text.contains("\n0,1,1,1,1,1,1,1,1,1\n"));
    }
}
