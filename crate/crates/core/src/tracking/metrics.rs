//! Purity, efficiency and F1 of reconstructed tracks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::assemble::TrackCandidate;
use crate::error::{Error, Result};
use crate::event::{Event, NOISE};
use crate::preprocess::N_SECTORS;

pub const DEFAULT_MIN_HITS: usize = 3;

/// When a reconstructed track counts as true.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// All hits from one particle, covering at least half of its hits.
    #[default]
    Majority,
    /// Hit set identical to the particle's.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Absent when nothing was reconstructed.
    pub purity: Option<f64>,
    /// Absent when there are no reconstructable particles.
    pub efficiency: Option<f64>,
    pub f1: Option<f64>,
    pub n_reconstructed: usize,
    pub n_true_reconstructed: usize,
    /// Distinct particles matched by a true track.
    pub n_matched: usize,
    pub n_true: usize,
    /// Spread of the per-sector values.
    pub purity_sigma: Option<f64>,
    pub efficiency_sigma: Option<f64>,
}

pub fn harmonic(p: f64, e: f64) -> f64 {
    if p == 0.0 || e == 0.0 {
        0.0
    } else {
        2.0 * p * e / (p + e)
    }
}

fn ratio(n: usize, d: usize) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

/// Truth verdict for one reconstructed track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Judged {
    pub(crate) matched: Option<u64>,
    pub(crate) majority: Option<u64>,
    pub(crate) phi: f64,
}

/// Circular mean azimuth of a hit set.
pub(crate) fn mean_phi(event: &Event, ids: &[u64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for id in ids {
        if let Some(h) = event.hit(*id) {
            s += h.phi.sin();
            c += h.phi.cos();
        }
    }
    s.atan2(c)
}

/// Sector whose centre is nearest to `phi`.
pub(crate) fn nearest_sector(phi: f64) -> usize {
    let stride = TAU / N_SECTORS as f64;
    // Sector k is centred at -pi + (k + 1) * stride.
    let k = ((phi + PI) / stride - 1.0).round() as i64;
    k.rem_euclid(N_SECTORS as i64) as usize
}

pub(crate) fn judge(c: &TrackCandidate, event: &Event, rule: MatchRule) -> Judged {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for id in &c.hit_ids {
        let pid = event.hit(*id).map(|h| h.particle_id).unwrap_or(NOISE);
        *counts.entry(pid).or_default() += 1;
    }
    let majority =
        counts.iter().filter(|(p, _)| **p != NOISE).max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(p, _)| *p);
    let matched = match (counts.len(), majority) {
        (1, Some(pid)) => event.particle(pid).and_then(|p| {
            let ok = match rule {
                MatchRule::Majority => 2 * c.hit_ids.len() >= p.n_hits(),
                MatchRule::Exact => {
                    let a: BTreeSet<_> = c.hit_ids.iter().collect();
                    let b: BTreeSet<_> = p.hit_ids.iter().collect();
                    a == b
                }
            };
            ok.then_some(pid)
        }),
        _ => None,
    };
    Judged { matched, majority, phi: mean_phi(event, &c.hit_ids) }
}

pub(crate) fn require_truth(event: &Event) -> Result<()> {
    let labelled = !event.particles().is_empty() || event.hits().iter().any(|h| h.truth.is_some());
    if labelled || event.is_empty() {
        Ok(())
    } else {
        Err(Error::Insufficient("event carries no truth labels".into()))
    }
}

fn sample_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    Some((v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Metrics over a pre-judged set of tracks and reconstructable particles
/// given as `(particle_id, mean phi)`.
pub(crate) fn aggregate(judged: &[Judged], particles: &[(u64, f64)]) -> Metrics {
    let n_rec = judged.len();
    let n_true_rec = judged.iter().filter(|j| j.matched.is_some()).count();
    let wanted: HashMap<u64, usize> = particles.iter().map(|(p, phi)| (*p, nearest_sector(*phi))).collect();
    let matched: BTreeSet<u64> = judged.iter().filter_map(|j| j.matched).filter(|p| wanted.contains_key(p)).collect();
    let purity = ratio(n_true_rec, n_rec);
    let efficiency = ratio(matched.len(), particles.len());
    let f1 = match (purity, efficiency) {
        (Some(p), Some(e)) => Some(harmonic(p, e)),
        _ => None,
    };

    let mut sec_rec = vec![(0usize, 0usize); N_SECTORS];
    for j in judged {
        let s = &mut sec_rec[nearest_sector(j.phi)];
        s.0 += 1;
        s.1 += j.matched.is_some() as usize;
    }
    let mut sec_eff = vec![(0usize, 0usize); N_SECTORS];
    for (p, s) in &wanted {
        sec_eff[*s].0 += 1;
        sec_eff[*s].1 += matched.contains(p) as usize;
    }
    let pur: Vec<f64> = sec_rec.iter().filter_map(|(n, t)| ratio(*t, *n)).collect();
    let eff: Vec<f64> = sec_eff.iter().filter_map(|(n, t)| ratio(*t, *n)).collect();
    Metrics {
        purity,
        efficiency,
        f1,
        n_reconstructed: n_rec,
        n_true_reconstructed: n_true_rec,
        n_matched: matched.len(),
        n_true: particles.len(),
        purity_sigma: sample_sd(&pur),
        efficiency_sigma: sample_sd(&eff),
    }
}

/// Score track candidates against the event truth. Tracks and particles
/// with fewer than `min_hits` hits are ignored.
pub fn score(candidates: &[TrackCandidate], event: &Event, min_hits: usize, rule: MatchRule) -> Result<Metrics> {
    require_truth(event)?;
    let judged: Vec<Judged> =
        candidates.iter().filter(|c| c.len() >= min_hits).map(|c| judge(c, event, rule)).collect();
    let particles: Vec<(u64, f64)> = event
        .particles()
        .iter()
        .filter(|p| p.n_hits() >= min_hits)
        .map(|p| (p.particle_id, mean_phi(event, &p.hit_ids)))
        .collect();
    Ok(aggregate(&judged, &particles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Hit;

    /// `n_particles` particles of `per` hits each, laid out radially at
    /// distinct azimuths.
    pub(crate) fn toy_event(n_particles: u64, per: u64) -> Event {
        let mut hits = Vec::new();
        for p in 1..=n_particles {
            for k in 0..per {
                let id = p * 100 + k;
                let phi = -3.0 + 0.5 * p as f64;
                hits.push(Hit::from_cylindrical(id, 50.0 + 100.0 * k as f64, phi, 10.0 * k as f64).with_particle(p));
            }
        }
        Event::from_labelled_hits(hits).unwrap()
    }

    fn track(ids: &[u64]) -> TrackCandidate {
        TrackCandidate { hit_ids: ids.to_vec(), edge_ids: (0..ids.len() as u64 - 1).collect() }
    }

    fn full(p: u64, per: u64) -> TrackCandidate {
        track(&(0..per).map(|k| p * 100 + k).collect::<Vec<_>>())
    }

    #[test]
    fn purity_and_efficiency_definitions() {
        let ev = toy_event(10, 6);
        let mut c: Vec<_> = (1..=6).map(|p| full(p, 6)).collect();
        c.push(track(&[700, 701, 802])); // mixed
        c.push(track(&[900, 901, 902, 1000])); // mixed
        let m = score(&c, &ev, 3, MatchRule::Majority).unwrap();
        assert_eq!(m.purity, Some(0.75));
        assert_eq!(m.efficiency, Some(0.6));
        let f1 = m.f1.unwrap();
        assert!((f1 * (0.75 + 0.6) - 2.0 * 0.75 * 0.6).abs() < 1e-15);
    }

    #[test]
    fn majority_needs_half_the_hits() {
        let ev = toy_event(1, 8);
        let m = score(&[track(&[100, 101, 102, 103])], &ev, 3, MatchRule::Majority).unwrap();
        assert_eq!(m.n_true_reconstructed, 1);
        let m = score(&[track(&[100, 101, 102])], &ev, 3, MatchRule::Majority).unwrap();
        assert_eq!(m.n_true_reconstructed, 0);
        let m = score(&[track(&[100, 101, 102, 103])], &ev, 3, MatchRule::Exact).unwrap();
        assert_eq!(m.n_true_reconstructed, 0);
        assert_eq!(score(&[full(1, 8)], &ev, 3, MatchRule::Exact).unwrap().purity, Some(1.0));
    }

    #[test]
    fn short_tracks_are_ignored_and_empty_is_absent() {
        let ev = toy_event(2, 5);
        let m = score(&[track(&[100, 101])], &ev, 3, MatchRule::Majority).unwrap();
        assert_eq!(m.n_reconstructed, 0);
        assert_eq!(m.purity, None);
        assert_eq!(m.efficiency, Some(0.0));
        assert_eq!(m.f1, None);
    }

    #[test]
    fn unlabelled_event_rejected() {
        let ev = Event::new(vec![Hit::new(1, 1.0, 0.0, 0.0)], vec![]).unwrap();
        assert!(score(&[], &ev, 3, MatchRule::Majority).is_err());
    }

    #[test]
    fn sector_assignment() {
        assert_eq!(nearest_sector(-PI + TAU / 32.0), 0);
        assert_eq!(nearest_sector(0.0), 15);
        assert_eq!(nearest_sector(PI), 31);
    }
}
