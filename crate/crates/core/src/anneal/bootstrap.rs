use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_PSEUDO: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    /// 16th and 84th percentiles of the pseudo-sums.
    pub ci_low: f64,
    pub ci_high: f64,
    pub pseudo_sums: Vec<f64>,
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Resample one value per key uniformly, sum over keys, repeat `n_pseudo`
/// times. Reports the mean of the sums and their central 68% interval.
pub fn bootstrap_mean<K: Ord>(samples: &BTreeMap<K, Vec<f64>>, n_pseudo: usize, seed: u64) -> Result<BootstrapSummary> {
    if samples.is_empty() || n_pseudo == 0 {
        return Err(Error::Insufficient("bootstrap needs at least one sample set and one pseudo-sample".into()));
    }
    if samples.values().any(|v| v.is_empty()) {
        return Err(Error::Insufficient("every sample set needs at least one value".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sums: Vec<f64> =
        (0..n_pseudo).map(|_| samples.values().map(|v| v[rng.random_range(0..v.len())]).sum()).collect();
    let mean = sums.iter().sum::<f64>() / n_pseudo as f64;
    let mut sorted = sums.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BootstrapSummary {
        mean,
        ci_low: quantile(&sorted, 0.16).min(mean),
        ci_high: quantile(&sorted, 0.84).max(mean),
        pseudo_sums: sums,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_samples() {
        let s: BTreeMap<usize, Vec<f64>> = (0..4).map(|k| (k, vec![7.0; 5])).collect();
        let b = bootstrap_mean(&s, 250, 1).unwrap();
        assert_eq!(b.mean, 28.0);
        assert_eq!(b.ci_low, b.ci_high);
        assert_eq!(b.pseudo_sums.len(), 250);
    }

    #[test]
    fn one_set_of_one_to_five() {
        let s = BTreeMap::from([(0, vec![1.0, 2.0, 3.0, 4.0, 5.0])]);
        let b = bootstrap_mean(&s, 250, 3).unwrap();
        assert!((2.6..=3.4).contains(&b.mean), "{}", b.mean);
        assert!(b.ci_low <= b.mean && b.mean <= b.ci_high);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(bootstrap_mean(&BTreeMap::<u8, Vec<f64>>::new(), 250, 0).is_err());
        assert!(bootstrap_mean(&BTreeMap::from([(0, vec![])]), 250, 0).is_err());
    }
}
