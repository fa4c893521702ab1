use std::collections::{BTreeMap, HashSet};

use super::{Event, Hit};

/// Remove same-layer duplicate hits of each particle using the truth labels.
///
/// Among a particle's hits on one layer the one with the smallest r survives,
/// ties broken by the smallest id. Noise hits are untouched. Idempotent.
pub fn dedup_hits(event: &Event) -> Event {
    let mut dropped: HashSet<u64> = HashSet::new();
    for p in event.particles() {
        let mut best: BTreeMap<(u32, u32), &Hit> = BTreeMap::new();
        for id in &p.hit_ids {
            let h = event.hit(*id).expect("event invariant: particle hits exist");
            match best.get(&h.layer_key()) {
                Some(cur) if (cur.r, cur.id) <= (h.r, h.id) => {
                    dropped.insert(h.id);
                }
                Some(cur) => {
                    dropped.insert(cur.id);
                    best.insert(h.layer_key(), h);
                }
                None => {
                    best.insert(h.layer_key(), h);
                }
            }
        }
    }
    if dropped.is_empty() {
        return event.clone();
    }
    let hits = event.hits().iter().filter(|h| !dropped.contains(&h.id)).cloned().collect();
    let particles = event
        .particles()
        .iter()
        .map(|p| {
            let mut p = p.clone();
            p.hit_ids.retain(|id| !dropped.contains(id));
            p
        })
        .collect();
    Event::new(hits, particles).expect("subset of a valid event is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{generate_event, GeneratorConfig, Particle};

    fn hit(id: u64, r: f64, layer: u32, pid: u64) -> Hit {
        Hit::from_cylindrical(id, r, 0.1, r).with_layer(8, layer, 0).with_particle(pid)
    }

    fn particle(pid: u64, hit_ids: Vec<u64>) -> Particle {
        Particle { particle_id: pid, vertex_z: 0.0, pt: 1.0, eta: 0.0, phi: 0.0, hit_ids }
    }

    #[test]
    fn keeps_innermost_duplicate() {
        let hits =
            vec![hit(1, 30.0, 2, 1), hit(2, 70.0, 3, 1), hit(3, 70.5, 3, 1), hit(4, 110.0, 4, 1), hit(5, 70.2, 3, 0)];
        let ev = Event::new(hits, vec![particle(1, vec![1, 2, 3, 4])]).unwrap();
        let out = dedup_hits(&ev);
        assert_eq!(out.particles()[0].hit_ids, vec![1, 2, 4]);
        assert!(out.hit(3).is_none());
        assert!(out.hit(5).is_some(), "noise untouched");
    }

    #[test]
    fn radius_ties_fall_back_to_id() {
        let hits = vec![hit(9, 70.0, 3, 1), hit(4, 70.0, 3, 1)];
        let ev = Event::new(hits, vec![particle(1, vec![4, 9])]).unwrap();
        assert_eq!(dedup_hits(&ev).particles()[0].hit_ids, vec![4]);
    }

    #[test]
    fn no_duplicates_is_identity_and_idempotent() {
        let ev = generate_event(&GeneratorConfig::default().with_seed(1)).unwrap();
        assert_eq!(dedup_hits(&ev), ev);

        let dup = generate_event(&GeneratorConfig { duplicate_fraction: 0.3, seed: 2, ..Default::default() }).unwrap();
        let once = dedup_hits(&dup);
        assert!(once.hits().len() < dup.hits().len());
        assert_eq!(dedup_hits(&once), once);
        for p in once.particles() {
            let mut layers: Vec<_> = p.hit_ids.iter().map(|id| once.hit(*id).unwrap().layer_key()).collect();
            let n = layers.len();
            layers.dedup();
            assert_eq!(layers.len(), n);
        }
    }
}
