//! Hits, truth particles and events.
//!
//! An [`Event`] is immutable once built: every constructor validates the
//! truth linkage (noise hits belong to no particle, every other hit to
//! exactly one) and builds an id index for O(1) hit lookup.

mod dedup;
mod generate;
pub mod trackml;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dedup::dedup_hits;
pub use generate::{generate_event, GeneratorConfig};

/// Particle id used for noise hits.
pub const NOISE: u64 = 0;

/// Truth record attached to a hit: the unsmeared crossing point and the
/// particle momentum there (GeV), as carried by the TrackML truth file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitTruth {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub tpx: f64,
    pub tpy: f64,
    pub tpz: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Transverse radius, derived from `x` and `y`.
    pub r: f64,
    /// Azimuth in (-pi, pi], derived from `x` and `y`.
    pub phi: f64,
    pub volume_id: u32,
    pub layer_id: u32,
    pub module_id: u32,
    pub particle_id: u64,
    pub truth: Option<HitTruth>,
}

impl Hit {
    pub fn new(id: u64, x: f64, y: f64, z: f64) -> Self {
        Hit {
            id,
            x,
            y,
            z,
            r: x.hypot(y),
            phi: azimuth(x, y),
            volume_id: 0,
            layer_id: 0,
            module_id: 0,
            particle_id: NOISE,
            truth: None,
        }
    }

    /// Build a hit from cylindrical coordinates.
    pub fn from_cylindrical(id: u64, r: f64, phi: f64, z: f64) -> Self {
        Hit::new(id, r * phi.cos(), r * phi.sin(), z)
    }

    pub fn with_layer(mut self, volume_id: u32, layer_id: u32, module_id: u32) -> Self {
        self.volume_id = volume_id;
        self.layer_id = layer_id;
        self.module_id = module_id;
        self
    }

    pub fn with_particle(mut self, particle_id: u64) -> Self {
        self.particle_id = particle_id;
        self
    }

    pub fn with_truth(mut self, truth: HitTruth) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn is_noise(&self) -> bool {
        self.particle_id == NOISE
    }

    /// Detector layer identity used for duplicate detection.
    pub fn layer_key(&self) -> (u32, u32) {
        (self.volume_id, self.layer_id)
    }
}

/// Azimuth of `(x, y)` folded into (-pi, pi].
pub fn azimuth(x: f64, y: f64) -> f64 {
    let phi = y.atan2(x);
    if phi <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        phi
    }
}

/// Wrap an angle difference into (-pi, pi].
pub fn wrap_angle(mut d: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    d %= TAU;
    if d > PI {
        d -= TAU;
    } else if d <= -PI {
        d += TAU;
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub particle_id: u64,
    pub vertex_z: f64,
    pub pt: f64,
    pub eta: f64,
    /// Momentum azimuth at production (or at the innermost hit for ingested data).
    pub phi: f64,
    /// Member hits ordered by increasing r.
    pub hit_ids: Vec<u64>,
}

impl Particle {
    pub fn n_hits(&self) -> usize {
        self.hit_ids.len()
    }
}

/// Pseudorapidity of a momentum vector, `-ln tan(theta / 2)`.
pub fn pseudorapidity(pt: f64, pz: f64) -> f64 {
    let theta = pt.atan2(pz);
    -(theta / 2.0).tan().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    hits: Vec<Hit>,
    particles: Vec<Particle>,
    noise_fraction: f64,
    index: HashMap<u64, usize>,
}

impl Event {
    /// Assemble an event, checking id uniqueness and the truth linkage.
    pub fn new(hits: Vec<Hit>, particles: Vec<Particle>) -> Result<Self> {
        let mut index = HashMap::with_capacity(hits.len());
        for (i, h) in hits.iter().enumerate() {
            if let Some(prev) = index.insert(h.id, i) {
                return Err(Error::DuplicateHit { id: h.id, first: prev, second: i });
            }
        }
        let mut owner: HashMap<u64, u64> = HashMap::new();
        for p in &particles {
            if p.particle_id == NOISE {
                return Err(Error::Config("particle id 0 is reserved for noise".into()));
            }
            for id in &p.hit_ids {
                let &i = index.get(id).ok_or(Error::UnknownHit(*id))?;
                if hits[i].particle_id != p.particle_id {
                    return Err(Error::Config(format!(
                        "hit {id} listed under particle {} but labelled {}",
                        p.particle_id, hits[i].particle_id
                    )));
                }
                if owner.insert(*id, p.particle_id).is_some() {
                    return Err(Error::Config(format!("hit {id} owned by two particles")));
                }
            }
        }
        if let Some(h) = hits.iter().find(|h| !h.is_noise() && !owner.contains_key(&h.id)) {
            return Err(Error::Config(format!(
                "hit {} labelled particle {} which does not list it",
                h.id, h.particle_id
            )));
        }
        let n_noise = hits.iter().filter(|h| h.is_noise()).count();
        let noise_fraction = if hits.is_empty() { 0.0 } else { n_noise as f64 / hits.len() as f64 };
        Ok(Event { hits, particles, noise_fraction, index })
    }

    /// Build an event whose particles are reconstructed from the hits' truth
    /// labels; kinematics come from the truth momentum at the innermost hit.
    pub fn from_labelled_hits(hits: Vec<Hit>) -> Result<Self> {
        let mut groups: BTreeMap<u64, Vec<&Hit>> = BTreeMap::new();
        for h in hits.iter().filter(|h| !h.is_noise()) {
            groups.entry(h.particle_id).or_default().push(h);
        }
        let particles = groups
            .into_iter()
            .map(|(pid, mut members)| {
                members.sort_by(|a, b| a.r.total_cmp(&b.r).then(a.id.cmp(&b.id)));
                let first = members[0];
                let (pt, eta, phi, vertex_z) = match first.truth {
                    Some(t) => {
                        let pt = t.tpx.hypot(t.tpy);
                        let tr = t.tx.hypot(t.ty);
                        let vz = if pt > 0.0 { t.tz - tr * t.tpz / pt } else { t.tz };
                        (pt, pseudorapidity(pt, t.tpz), azimuth(t.tpx, t.tpy), vz)
                    }
                    None => (f64::NAN, f64::NAN, first.phi, f64::NAN),
                };
                Particle { particle_id: pid, vertex_z, pt, eta, phi, hit_ids: members.iter().map(|h| h.id).collect() }
            })
            .collect();
        Event::new(hits, particles)
    }

    pub fn hits(&self) -> &[Hit] {
        &self.hits
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn noise_fraction(&self) -> f64 {
        self.noise_fraction
    }

    pub fn hit(&self, id: u64) -> Option<&Hit> {
        self.index.get(&id).map(|&i| &self.hits[i])
    }

    pub fn try_hit(&self, id: u64) -> Result<&Hit> {
        self.hit(id).ok_or(Error::UnknownHit(id))
    }

    pub fn particle(&self, particle_id: u64) -> Option<&Particle> {
        self.particles
            .binary_search_by_key(&particle_id, |p| p.particle_id)
            .ok()
            .map(|i| &self.particles[i])
            .or_else(|| self.particles.iter().find(|p| p.particle_id == particle_id))
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    /// True segments: consecutive hits (by r) of each particle, as `(inner, outer)`
    /// hit-id pairs. Pairs with equal r are skipped since no edge can represent them.
    pub fn true_edges(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for p in &self.particles {
            for w in p.hit_ids.windows(2) {
                let (a, b) = (&self.hits[self.index[&w[0]]], &self.hits[self.index[&w[1]]]);
                if a.r < b.r {
                    out.push((a.id, b.id));
                }
            }
        }
        out
    }

    /// Split into owned parts (hits, particles).
    pub fn into_parts(self) -> (Vec<Hit>, Vec<Particle>) {
        (self.hits, self.particles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylindrical_fields_match_cartesian() {
        let h = Hit::new(1, -3.0, 4.0, 10.0);
        assert_eq!(h.r, 5.0);
        assert!((h.phi - 4f64.atan2(-3.0)).abs() < 1e-15);
        let back = Hit::from_cylindrical(2, h.r, h.phi, h.z);
        assert!((back.x - h.x).abs() < 1e-12 && (back.y - h.y).abs() < 1e-12);
    }

    #[test]
    fn azimuth_is_half_open() {
        assert_eq!(azimuth(-1.0, -0.0), std::f64::consts::PI);
        assert_eq!(azimuth(-1.0, 0.0), std::f64::consts::PI);
        assert!((wrap_angle(3.5 * std::f64::consts::PI) - (-0.5 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn pseudorapidity_is_zero_at_ninety_degrees() {
        assert!(pseudorapidity(1.0, 0.0).abs() < 1e-12);
        let eta = pseudorapidity(1.0, 1.0_f64.sinh());
        assert!((eta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn event_rejects_duplicate_ids() {
        let hits = vec![Hit::new(1, 1.0, 0.0, 0.0), Hit::new(1, 2.0, 0.0, 0.0)];
        assert!(matches!(Event::new(hits, vec![]), Err(Error::DuplicateHit { id: 1, .. })));
    }

    #[test]
    fn event_rejects_orphan_labels() {
        let hits = vec![Hit::new(1, 1.0, 0.0, 0.0).with_particle(5)];
        assert!(Event::new(hits, vec![]).is_err());
    }

    #[test]
    fn labelled_hits_group_into_particles() {
        let hits = vec![
            Hit::new(3, 3.0, 0.0, 0.0).with_particle(7),
            Hit::new(1, 1.0, 0.0, 0.0).with_particle(7),
            Hit::new(2, 2.0, 0.0, 0.0),
        ];
        let ev = Event::from_labelled_hits(hits).unwrap();
        assert_eq!(ev.particles().len(), 1);
        assert_eq!(ev.particles()[0].hit_ids, vec![1, 3]);
        assert_eq!(ev.true_edges(), vec![(1, 3)]);
        assert!((ev.noise_fraction() - 1.0 / 3.0).abs() < 1e-15);
    }
}
