//! Synthetic barrel-detector events.
//!
//! Particles leave the beam line at `(0, 0, z0)` and follow a helix in a
//! uniform solenoidal field: a circle through the origin in the transverse
//! plane and a straight line in (arc length, z). One hit is recorded per
//! crossed cylindrical layer until the track curls back or leaves the barrel.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Event, Hit, HitTruth, Particle, NOISE};
use crate::error::{Error, Result};

/// Curvature constant: radius [m] = pt [GeV] / (0.3 * B [T]).
const CURVATURE_K: f64 = 0.3;

/// Volume id stamped on synthetic barrel hits.
pub const SYNTHETIC_VOLUME: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_particles: usize,
    pub noise_fraction: f64,
    /// Gaussian width of the production vertex along z (mm).
    pub beamspot_sigma_z: f64,
    /// Transverse momentum range (GeV), sampled log-uniformly.
    pub pt_range: (f64, f64),
    /// Pseudorapidity range, sampled uniformly.
    pub eta_range: (f64, f64),
    /// Barrel layer radii (mm), strictly increasing.
    pub layer_radii: Vec<f64>,
    /// Barrel half-length along z (mm).
    pub half_length: f64,
    /// Solenoid field (T).
    pub field_strength: f64,
    /// Per-coordinate Gaussian position smearing (mm).
    pub smear_sigma: f64,
    /// Probability that a signal hit gets a same-layer twin from an
    /// overlapping sensor.
    pub duplicate_fraction: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_particles: 100,
            noise_fraction: 0.15,
            beamspot_sigma_z: 5.5,
            pt_range: (2.0, 20.0),
            eta_range: (-1.0, 1.0),
            layer_radii: vec![32.0, 52.0, 72.0, 94.0, 116.0, 172.0, 260.0, 360.0, 500.0, 660.0, 820.0, 1020.0],
            half_length: 1300.0,
            field_strength: 2.0,
            smear_sigma: 0.05,
            duplicate_fraction: 0.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_particles(mut self, n: usize) -> Self {
        self.n_particles = n;
        self
    }

    /// Helix radius (mm) in the transverse plane for a given pt.
    pub fn helix_radius(&self, pt: f64) -> f64 {
        pt / (CURVATURE_K * self.field_strength) * 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_particles == 0 {
            return bad("n_particles must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return bad(format!("noise_fraction {} outside [0, 1)", self.noise_fraction));
        }
        if !(self.beamspot_sigma_z > 0.0) {
            return bad("beamspot_sigma_z must be positive".into());
        }
        let (lo, hi) = self.pt_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("pt_range ({lo}, {hi}) is not a positive interval"));
        }
        if !(self.eta_range.1 >= self.eta_range.0) {
            return bad("eta_range is empty".into());
        }
        if self.layer_radii.is_empty() {
            return bad("at least one layer radius is required".into());
        }
        if self.layer_radii.iter().any(|r| !(*r > 0.0)) {
            return bad("layer radii must be positive".into());
        }
        if self.layer_radii.windows(2).any(|w| w[1] <= w[0]) {
            return bad("layer radii must be strictly increasing".into());
        }
        if !(self.half_length > 0.0) {
            return bad("half_length must be positive".into());
        }
        if !(self.field_strength > 0.0) {
            return bad("field_strength must be positive".into());
        }
        if !(self.smear_sigma >= 0.0) {
            return bad("smear_sigma must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.duplicate_fraction) {
            return bad("duplicate_fraction outside [0, 1]".into());
        }
        let diameter = 2.0 * self.helix_radius(lo);
        if diameter <= self.layer_radii[0] {
            return bad(format!(
                "pt {lo} GeV curls within {diameter:.1} mm, inside the first layer at {} mm",
                self.layer_radii[0]
            ));
        }
        Ok(())
    }
}

struct RawHit {
    x: f64,
    y: f64,
    z: f64,
    layer: usize,
    particle_id: u64,
    truth: Option<HitTruth>,
}

/// Generate one synthetic event. Identical configs (including the seed)
/// produce bit-identical events.
pub fn generate_event(config: &GeneratorConfig) -> Result<Event> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vertex = Normal::new(0.0, config.beamspot_sigma_z).expect("validated sigma");
    let smear = (config.smear_sigma > 0.0).then(|| Normal::new(0.0, config.smear_sigma).expect("validated sigma"));
    let (ln_lo, ln_hi) = (config.pt_range.0.ln(), config.pt_range.1.ln());

    let mut raw: Vec<RawHit> = Vec::new();
    let mut kinematics = Vec::with_capacity(config.n_particles);
    for p in 0..config.n_particles {
        let pid = p as u64 + 1;
        let pt = if ln_hi > ln_lo { rng.random_range(ln_lo..ln_hi).exp() } else { config.pt_range.0 };
        let eta = if config.eta_range.1 > config.eta_range.0 {
            rng.random_range(config.eta_range.0..config.eta_range.1)
        } else {
            config.eta_range.0
        };
        let phi0 = rng.random_range(-PI..PI);
        let charge = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let z0 = vertex.sample(&mut rng);
        kinematics.push((pid, pt, eta, phi0, z0));

        let radius = config.helix_radius(pt);
        let slope = eta.sinh();
        for (layer, &r) in config.layer_radii.iter().enumerate() {
            if r >= 2.0 * radius {
                break;
            }
            let half_turn = (r / (2.0 * radius)).asin();
            let arc = 2.0 * radius * half_turn;
            let z = z0 + arc * slope;
            if z.abs() > config.half_length {
                break;
            }
            let phi_hit = phi0 - charge * half_turn;
            let phi_dir = phi0 - charge * 2.0 * half_turn;
            let truth = HitTruth {
                tx: r * phi_hit.cos(),
                ty: r * phi_hit.sin(),
                tz: z,
                tpx: pt * phi_dir.cos(),
                tpy: pt * phi_dir.sin(),
                tpz: pt * slope,
                weight: 0.0,
            };
            let (mut x, mut y, mut zs) = (truth.tx, truth.ty, truth.tz);
            if let Some(s) = &smear {
                x += s.sample(&mut rng);
                y += s.sample(&mut rng);
                zs += s.sample(&mut rng);
            }
            raw.push(RawHit { x, y, z: zs, layer, particle_id: pid, truth: Some(truth) });

            if config.duplicate_fraction > 0.0 && rng.random::<f64>() < config.duplicate_fraction {
                // Overlapping sensor: slightly further out and rotated.
                let dphi: f64 = rng.random_range(-2e-3..2e-3);
                let dr = rng.random_range(0.2..1.0);
                let (c, s) = (dphi.cos(), dphi.sin());
                let scale = (r + dr) / r;
                raw.push(RawHit {
                    x: scale * (x * c - y * s),
                    y: scale * (x * s + y * c),
                    z: zs + rng.random_range(-0.5..0.5),
                    layer,
                    particle_id: pid,
                    truth: Some(truth),
                });
            }
        }
    }

    let n_signal = raw.len();
    let f = config.noise_fraction;
    let n_noise = (n_signal as f64 * f / (1.0 - f)).round() as usize;
    for _ in 0..n_noise {
        let layer = rng.random_range(0..config.layer_radii.len());
        let r = config.layer_radii[layer];
        let phi = rng.random_range(-PI..PI);
        let z = rng.random_range(-config.half_length..config.half_length);
        raw.push(RawHit { x: r * phi.cos(), y: r * phi.sin(), z, layer, particle_id: NOISE, truth: None });
    }

    // Shuffle so hit ids carry no truth information.
    raw.shuffle(&mut rng);

    let mut counts = std::collections::HashMap::<u64, usize>::new();
    for h in raw.iter().filter(|h| h.particle_id != NOISE) {
        *counts.entry(h.particle_id).or_default() += 1;
    }

    let hits: Vec<Hit> = raw
        .into_iter()
        .enumerate()
        .map(|(i, h)| {
            let module = 0;
            let mut hit = Hit::new(i as u64 + 1, h.x, h.y, h.z)
                .with_layer(SYNTHETIC_VOLUME, 2 * (h.layer as u32 + 1), module)
                .with_particle(h.particle_id);
            let truth = match h.truth {
                Some(mut t) => {
                    t.weight = 1.0 / counts[&h.particle_id] as f64;
                    t
                }
                None => HitTruth { tx: h.x, ty: h.y, tz: h.z, tpx: 0.0, tpy: 0.0, tpz: 0.0, weight: 0.0 },
            };
            hit.truth = Some(truth);
            hit
        })
        .collect();

    let mut members: std::collections::BTreeMap<u64, Vec<&Hit>> = Default::default();
    for h in hits.iter().filter(|h| !h.is_noise()) {
        members.entry(h.particle_id).or_default().push(h);
    }
    let particles = kinematics
        .into_iter()
        .filter_map(|(pid, pt, eta, phi0, z0)| {
            let mut m = members.remove(&pid)?;
            m.sort_by(|a, b| a.r.total_cmp(&b.r).then(a.id.cmp(&b.id)));
            Some(Particle {
                particle_id: pid,
                vertex_z: z0,
                pt,
                eta,
                phi: phi0,
                hit_ids: m.iter().map(|h| h.id).collect(),
            })
        })
        .collect();

    Event::new(hits, particles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(seed: u64) -> GeneratorConfig {
        GeneratorConfig { n_particles: 1, noise_fraction: 0.0, seed, ..Default::default() }
    }

    #[test]
    fn noise_free_single_track_hits_every_layer() {
        let ev = generate_event(&single(7)).unwrap();
        let layers = GeneratorConfig::default().layer_radii.len();
        assert_eq!(ev.hits().len(), layers);
        assert!(ev.hits().iter().all(|h| !h.is_noise()));
        assert_eq!(ev.particles().len(), 1);
        assert_eq!(ev.particles()[0].n_hits(), layers);
    }

    #[test]
    fn noise_fraction_close_to_requested() {
        let ev = generate_event(&GeneratorConfig::default().with_seed(3)).unwrap();
        let noise = ev.hits().iter().filter(|h| h.is_noise()).count() as f64;
        let frac = noise / ev.hits().len() as f64;
        assert!((frac - 0.15).abs() <= 0.02, "noise fraction {frac}");
    }

    #[test]
    fn vertex_spread_matches_beamspot() {
        let cfg = GeneratorConfig { n_particles: 1000, noise_fraction: 0.0, seed: 11, ..Default::default() };
        let ev = generate_event(&cfg).unwrap();
        let z: Vec<f64> = ev.particles().iter().map(|p| p.vertex_z).collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((5.0..=6.0).contains(&sd), "vertex sd {sd}");
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig::default().with_seed(99);
        assert_eq!(generate_event(&cfg).unwrap(), generate_event(&cfg).unwrap());
        let other = generate_event(&cfg.clone().with_seed(100)).unwrap();
        assert_ne!(generate_event(&cfg).unwrap(), other);
    }

    #[test]
    fn curling_pt_is_rejected() {
        let cfg = GeneratorConfig { pt_range: (0.005, 1.0), ..Default::default() };
        let err = generate_event(&cfg).unwrap_err();
        assert!(err.to_string().contains("curls"), "{err}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = GeneratorConfig { n_particles: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = GeneratorConfig { layer_radii: vec![10.0, 5.0], ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn high_pt_tracks_are_straight_in_rz() {
        let cfg = GeneratorConfig {
            n_particles: 20,
            noise_fraction: 0.0,
            pt_range: (50.0, 100.0),
            seed: 5,
            ..Default::default()
        };
        let ev = generate_event(&cfg).unwrap();
        for p in ev.particles() {
            let hits: Vec<_> = p.hit_ids.iter().map(|id| ev.hit(*id).unwrap()).collect();
            let (a, b) = (hits[0], hits[hits.len() - 1]);
            let slope = (b.z - a.z) / (b.r - a.r);
            for h in &hits {
                let pred = a.z + slope * (h.r - a.r);
                assert!((h.z - pred).abs() < 1.0, "residual {}", h.z - pred);
            }
        }
    }
}
