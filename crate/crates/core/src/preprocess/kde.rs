//! Two-dimensional Gaussian kernel density over segment features
//! (z-intercept in mm, rz inclination in rad).
//!
//! Kernels are truncated at [`CUTOFF`] bandwidths per axis and looked up
//! through a uniform cell index, so a query only touches nearby samples.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, Hit};
use crate::qubo::geometry::{rz_angle, z_intercept_rz};

/// Kernel truncation radius, in bandwidths per axis.
pub const CUTOFF: f64 = 7.0;
/// Minimum number of true segments needed to train.
pub const MIN_SAMPLES: usize = 100;
pub const MODEL_VERSION: u32 = 1;
/// Bandwidth used on an axis whose training spread is exactly zero.
const DEGENERATE_BANDWIDTH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KdeConfig {
    /// Per-axis bandwidth override; Scott's rule when absent.
    pub bandwidth: Option<[f64; 2]>,
    /// Training samples beyond this count are thinned by a fixed stride.
    pub max_samples: usize,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig { bandwidth: None, max_samples: 4000 }
    }
}

/// Feature vector of the segment `a -> b`: (z-intercept, rz angle).
pub fn segment_features(a: &Hit, b: &Hit) -> Option<[f64; 2]> {
    let z0 = z_intercept_rz(a.r, a.z, b.r, b.z)?;
    Some([z0, rz_angle(a, b)])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredModel {
    version: u32,
    bandwidth: [f64; 2],
    peak: f64,
    samples: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default)]
struct CellIndex {
    cell: [f64; 2],
    /// Samples reordered so each cell's members are contiguous.
    sorted: Vec<[f64; 2]>,
    ranges: HashMap<(i64, i64), (u32, u32)>,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl CellIndex {
    fn build(samples: &[[f64; 2]], bandwidth: [f64; 2]) -> Self {
        let cell = [CUTOFF * bandwidth[0] / 2.0, CUTOFF * bandwidth[1] / 2.0];
        let key = |s: &[f64; 2]| ((s[0] / cell[0]).floor() as i64, (s[1] / cell[1]).floor() as i64);
        let mut keyed: Vec<((i64, i64), [f64; 2])> = samples.iter().map(|s| (key(s), *s)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1[0].total_cmp(&b.1[0])).then(a.1[1].total_cmp(&b.1[1])));
        let mut ranges = HashMap::new();
        let mut start = 0;
        for i in 1..=keyed.len() {
            if i == keyed.len() || keyed[i].0 != keyed[start].0 {
                ranges.insert(keyed[start].0, (start as u32, i as u32));
                start = i;
            }
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for s in samples {
            for d in 0..2 {
                lo[d] = lo[d].min(s[d] - CUTOFF * bandwidth[d]);
                hi[d] = hi[d].max(s[d] + CUTOFF * bandwidth[d]);
            }
        }
        CellIndex { cell, sorted: keyed.into_iter().map(|(_, s)| s).collect(), ranges, lo, hi }
    }
}

/// Gaussian KDE over true-segment features. Immutable after training.
#[derive(Debug, Clone)]
pub struct KdeModel {
    samples: Vec<[f64; 2]>,
    bandwidth: [f64; 2],
    norm: f64,
    peak: f64,
    index: CellIndex,
}

impl PartialEq for KdeModel {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples && self.bandwidth == other.bandwidth && self.peak == other.peak
    }
}

impl KdeModel {
    /// Fit on explicit feature samples.
    pub fn fit(samples: Vec<[f64; 2]>, config: &KdeConfig) -> Result<Self> {
        if samples.len() < MIN_SAMPLES {
            return Err(Error::Insufficient(format!(
                "{} true segments available, at least {MIN_SAMPLES} required",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s[0].is_finite() || !s[1].is_finite()) {
            return Err(Error::Geometry("non-finite training feature".into()));
        }
        let samples = thin(samples, config.max_samples.max(MIN_SAMPLES));
        let bandwidth = match config.bandwidth {
            Some(bw) if bw.iter().all(|b| *b > 0.0) => bw,
            Some(bw) => return Err(Error::Config(format!("bandwidth {bw:?} must be positive"))),
            None => scott_bandwidth(&samples),
        };
        let mut model = Self::assemble(samples, bandwidth, 1.0);
        model.peak = model.find_peak();
        Ok(model)
    }

    fn assemble(samples: Vec<[f64; 2]>, bandwidth: [f64; 2], peak: f64) -> Self {
        let norm = 1.0 / (samples.len() as f64 * std::f64::consts::TAU * bandwidth[0] * bandwidth[1]);
        let index = CellIndex::build(&samples, bandwidth);
        KdeModel { samples, bandwidth, norm, peak, index }
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    pub fn bandwidth(&self) -> [f64; 2] {
        self.bandwidth
    }

    /// Highest density found (at a sample location refined by mean shift).
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// Normalized density at `x`.
    pub fn density(&self, x: [f64; 2]) -> f64 {
        self.kernel_sum(x, |_, _| {}) * self.norm
    }

    /// Density rescaled by the peak into [0, 1].
    pub fn prior(&self, x: [f64; 2]) -> f64 {
        (self.density(x) / self.peak).min(1.0)
    }

    fn kernel_sum(&self, x: [f64; 2], mut visit: impl FnMut(&[f64; 2], f64)) -> f64 {
        let ix = &self.index;
        if x[0] < ix.lo[0] || x[0] > ix.hi[0] || x[1] < ix.lo[1] || x[1] > ix.hi[1] {
            return 0.0;
        }
        let [h0, h1] = self.bandwidth;
        let c0 = (x[0] / ix.cell[0]).floor() as i64;
        let c1 = (x[1] / ix.cell[1]).floor() as i64;
        let mut sum = 0.0;
        for k0 in c0 - 2..=c0 + 2 {
            for k1 in c1 - 2..=c1 + 2 {
                let Some(&(s, e)) = ix.ranges.get(&(k0, k1)) else { continue };
                for smp in &ix.sorted[s as usize..e as usize] {
                    let u = (x[0] - smp[0]) / h0;
                    let v = (x[1] - smp[1]) / h1;
                    if u.abs() > CUTOFF || v.abs() > CUTOFF {
                        continue;
                    }
                    let w = (-0.5 * (u * u + v * v)).exp();
                    visit(smp, w);
                    sum += w;
                }
            }
        }
        sum
    }

    fn find_peak(&self) -> f64 {
        let mut scored: Vec<(f64, [f64; 2])> = self.samples.iter().map(|s| (self.density(*s), *s)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1[0].total_cmp(&b.1[0])).then(a.1[1].total_cmp(&b.1[1])));
        let mut best = scored.first().map(|s| s.0).unwrap_or(0.0);
        for &(_, start) in scored.iter().take(8) {
            let mut x = start;
            for _ in 0..100 {
                let mut acc = [0.0; 2];
                let total = self.kernel_sum(x, |s, w| {
                    acc[0] += w * s[0];
                    acc[1] += w * s[1];
                });
                if total == 0.0 {
                    break;
                }
                let next = [acc[0] / total, acc[1] / total];
                let step = ((next[0] - x[0]) / self.bandwidth[0]).hypot((next[1] - x[1]) / self.bandwidth[1]);
                x = next;
                if step < 1e-9 {
                    break;
                }
            }
            best = best.max(self.density(x));
        }
        best
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let stored = StoredModel {
            version: MODEL_VERSION,
            bandwidth: self.bandwidth,
            peak: self.peak,
            samples: self.samples.clone(),
        };
        std::fs::write(path, serde_json::to_string(&stored)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let stored: StoredModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_stored(stored)
    }

    fn from_stored(s: StoredModel) -> Result<Self> {
        if s.version != MODEL_VERSION {
            return Err(Error::Config(format!("unsupported KDE model version {}", s.version)));
        }
        Ok(Self::assemble(s.samples, s.bandwidth, s.peak))
    }
}

impl Serialize for KdeModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StoredModel {
            version: MODEL_VERSION,
            bandwidth: self.bandwidth,
            peak: self.peak,
            samples: self.samples.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for KdeModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let stored = StoredModel::deserialize(deserializer)?;
        KdeModel::from_stored(stored).map_err(serde::de::Error::custom)
    }
}

fn thin(samples: Vec<[f64; 2]>, max: usize) -> Vec<[f64; 2]> {
    let n = samples.len();
    if n <= max {
        return samples;
    }
    (0..max).map(|i| samples[i * n / max]).collect()
}

fn scott_bandwidth(samples: &[[f64; 2]]) -> [f64; 2] {
    let n = samples.len() as f64;
    let factor = n.powf(-1.0 / 6.0);
    let mut bw = [0.0; 2];
    for (d, slot) in bw.iter_mut().enumerate() {
        let mean = samples.iter().map(|s| s[d]).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s[d] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let h = var.sqrt() * factor;
        *slot = if h > 0.0 { h } else { DEGENERATE_BANDWIDTH };
    }
    bw
}

/// Features of every true consecutive-hit segment in the events.
pub fn true_segment_features(events: &[Event]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for ev in events {
        for (a, b) in ev.true_edges() {
            let (ha, hb) = (ev.hit(a).expect("true edge hit"), ev.hit(b).expect("true edge hit"));
            if let Some(f) = segment_features(ha, hb) {
                out.push(f);
            }
        }
    }
    out
}

/// Train on the true consecutive-hit segments of truth-labelled events.
pub fn train_kde(events: &[Event], config: &KdeConfig) -> Result<KdeModel> {
    KdeModel::fit(true_segment_features(events), config)
}

/// Prior probability in [0, 1] that `a -> b` is a true segment.
pub fn edge_prior(model: &KdeModel, a: &Hit, b: &Hit) -> Result<f64> {
    if !(a.r < b.r) {
        return Err(Error::Geometry(format!("edge ({}, {}) needs r_a < r_b, got {} and {}", a.id, b.id, a.r, b.r)));
    }
    let f = segment_features(a, b).expect("distinct radii");
    Ok(model.prior(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian_samples(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nz = Normal::new(0.0, 5.5).unwrap();
        (0..n).map(|_| [nz.sample(&mut rng), rng.random_range(-0.8..0.8)]).collect()
    }

    /// Direct untruncated Gaussian sum, independent of the cell index.
    fn direct_density(samples: &[[f64; 2]], bw: [f64; 2], x: [f64; 2]) -> f64 {
        let norm = 1.0 / (samples.len() as f64 * std::f64::consts::TAU * bw[0] * bw[1]);
        samples
            .iter()
            .map(|s| {
                let u = (x[0] - s[0]) / bw[0];
                let v = (x[1] - s[1]) / bw[1];
                (-0.5 * (u * u + v * v)).exp()
            })
            .sum::<f64>()
            * norm
    }

    #[test]
    fn indexed_density_matches_direct_sum() {
        let samples = gaussian_samples(800, 1);
        let m = KdeModel::fit(samples.clone(), &KdeConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x = [rng.random_range(-30.0..30.0), rng.random_range(-1.0..1.0)];
            let d = direct_density(&samples, m.bandwidth(), x);
            assert!((m.density(x) - d).abs() <= 1e-8 * m.peak(), "{x:?}");
        }
    }

    #[test]
    fn far_query_is_negligible() {
        let samples = gaussian_samples(500, 3);
        let m = KdeModel::fit(samples.clone(), &KdeConfig::default()).unwrap();
        let bw = m.bandwidth();
        let max0 = samples.iter().map(|s| s[0]).fold(f64::MIN, f64::max);
        let q = [max0 + 10.0 * bw[0], 0.0];
        assert!(direct_density(&samples, bw, q) < 1e-6 * m.peak());
        assert!(m.density(q) < 1e-6 * m.peak());
    }

    #[test]
    fn origin_pointing_segments_peak_at_zero_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples: Vec<_> = (0..300).map(|_| [0.0, rng.random_range(-0.5..0.5)]).collect();
        let m = KdeModel::fit(samples, &KdeConfig::default()).unwrap();
        for a in [-0.3, 0.0, 0.2] {
            let at0 = m.density([0.0, a]);
            for dz in [0.01, 0.1, 1.0, 10.0] {
                assert!(m.density([dz, a]) < at0);
                assert!(m.density([-dz, a]) < at0);
            }
        }
    }

    #[test]
    fn integrates_to_one() {
        let samples = gaussian_samples(400, 5);
        let m = KdeModel::fit(samples, &KdeConfig::default()).unwrap();
        let (n0, n1) = (600, 300);
        let (lo0, hi0, lo1, hi1) = (-60.0, 60.0, -1.5, 1.5);
        let (d0, d1) = ((hi0 - lo0) / n0 as f64, (hi1 - lo1) / n1 as f64);
        let mut total = 0.0;
        for i in 0..n0 {
            for j in 0..n1 {
                let x = [lo0 + (i as f64 + 0.5) * d0, lo1 + (j as f64 + 0.5) * d1];
                let d = m.density(x);
                assert!(d >= 0.0);
                total += d * d0 * d1;
            }
        }
        assert!((total - 1.0).abs() < 0.01, "integral {total}");
    }

    #[test]
    fn prior_is_one_at_mode_and_pure() {
        let samples = gaussian_samples(600, 6);
        let m = KdeModel::fit(samples, &KdeConfig::default()).unwrap();
        // The peak location is where the density equals the stored peak.
        let best = m.samples().iter().map(|s| m.prior(*s)).fold(0.0, f64::max);
        assert!(best <= 1.0 && best > 0.9);
        let x = [1.0, 0.1];
        assert_eq!(m.prior(x), m.prior(x));
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(KdeModel::fit(gaussian_samples(50, 7), &KdeConfig::default()), Err(Error::Insufficient(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let m = KdeModel::fit(gaussian_samples(300, 8), &KdeConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("kde.json");
        m.save(&p).unwrap();
        let back = KdeModel::load(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.density([1.0, 0.2]), m.density([1.0, 0.2]));
    }

    #[test]
    fn thinning_is_deterministic_and_bounded() {
        let s = gaussian_samples(1000, 9);
        let cfg = KdeConfig { max_samples: 250, ..Default::default() };
        let a = KdeModel::fit(s.clone(), &cfg).unwrap();
        let b = KdeModel::fit(s, &cfg).unwrap();
        assert_eq!(a.samples().len(), 250);
        assert_eq!(a, b);
    }
}
