//! Metrics broken down by a particle variable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::assemble::TrackCandidate;
use super::metrics::{aggregate, judge, mean_phi, require_truth, Judged, MatchRule, Metrics};
use crate::error::{Error, Result};
use crate::event::{pseudorapidity, Event, Particle};

/// Field assumed when estimating the momentum of a track with no particle.
pub const DEFAULT_FIELD_T: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinVariable {
    Pt,
    Length,
    Phi,
    Eta,
}

impl std::str::FromStr for BinVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pt" => Ok(BinVariable::Pt),
            "length" => Ok(BinVariable::Length),
            "phi" => Ok(BinVariable::Phi),
            "eta" => Ok(BinVariable::Eta),
            other => Err(Error::Config(format!("unknown binning variable {other:?}"))),
        }
    }
}

impl BinVariable {
    pub fn name(self) -> &'static str {
        match self {
            BinVariable::Pt => "pt",
            BinVariable::Length => "length",
            BinVariable::Phi => "phi",
            BinVariable::Eta => "eta",
        }
    }

    fn of_particle(self, p: &Particle) -> f64 {
        match self {
            BinVariable::Pt => p.pt,
            BinVariable::Length => p.n_hits() as f64,
            BinVariable::Phi => p.phi,
            BinVariable::Eta => p.eta,
        }
    }

    /// Estimate from the track's own hits, for tracks made of noise only.
    fn of_track(self, c: &TrackCandidate, event: &Event) -> f64 {
        let first = c.hit_ids.first().and_then(|id| event.hit(*id));
        let last = c.hit_ids.last().and_then(|id| event.hit(*id));
        let (a, b) = match (first, last) {
            (Some(a), Some(b)) => (a, b),
            _ => return f64::NAN,
        };
        match self {
            BinVariable::Length => c.len() as f64,
            BinVariable::Phi => mean_phi(event, &c.hit_ids),
            BinVariable::Eta => pseudorapidity(b.r - a.r, b.z - a.z),
            BinVariable::Pt => {
                // Circle through the origin and both end hits.
                let cross = (a.x * b.y - a.y * b.x).abs();
                let chord = (a.x - b.x).hypot(a.y - b.y);
                let radius_mm = a.r * b.r * chord / (2.0 * cross);
                0.3 * DEFAULT_FIELD_T * radius_mm / 1000.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMetrics {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub metrics: Metrics,
}

fn bin_of(x: f64, edges: &[f64]) -> Option<usize> {
    if !x.is_finite() && !(x == f64::INFINITY && edges[edges.len() - 1] == f64::INFINITY) {
        return None;
    }
    let last = edges.len() - 2;
    (0..=last).find(|&k| x >= edges[k] && (x < edges[k + 1] || (k == last && x <= edges[k + 1])))
}

/// Per-bin metrics. Particles are binned by their own value; true tracks
/// follow their particle; other tracks follow their majority particle, or
/// their own measured value when they hold no signal hit.
pub fn binned_metrics(
    candidates: &[TrackCandidate],
    event: &Event,
    variable: BinVariable,
    bin_edges: &[f64],
    min_hits: usize,
    rule: MatchRule,
) -> Result<Vec<BinMetrics>> {
    require_truth(event)?;
    if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("bin edges must be strictly increasing with at least two entries".into()));
    }
    let nb = bin_edges.len() - 1;
    let mut particle_bin: HashMap<u64, usize> = HashMap::new();
    let mut per_bin_particles: Vec<Vec<(u64, f64)>> = vec![Vec::new(); nb];
    for p in event.particles().iter().filter(|p| p.n_hits() >= min_hits) {
        if let Some(k) = bin_of(variable.of_particle(p), bin_edges) {
            particle_bin.insert(p.particle_id, k);
            per_bin_particles[k].push((p.particle_id, mean_phi(event, &p.hit_ids)));
        }
    }
    let mut per_bin_tracks: Vec<Vec<Judged>> = vec![Vec::new(); nb];
    for c in candidates.iter().filter(|c| c.len() >= min_hits) {
        let j = judge(c, event, rule);
        let k = match j.matched.or(j.majority) {
            Some(pid) => match particle_bin.get(&pid) {
                Some(k) => Some(*k),
                None => event.particle(pid).and_then(|p| bin_of(variable.of_particle(p), bin_edges)),
            },
            None => bin_of(variable.of_track(c, event), bin_edges),
        };
        if let Some(k) = k {
            per_bin_tracks[k].push(j);
        }
    }
    Ok((0..nb)
        .map(|k| BinMetrics {
            lo: bin_edges[k],
            hi: bin_edges[k + 1],
            center: 0.5 * (bin_edges[k] + bin_edges[k + 1]),
            metrics: aggregate(&per_bin_tracks[k], &per_bin_particles[k]),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{dedup_hits, generate_event, GeneratorConfig, Hit};
    use crate::tracking::metrics::score;

    fn truth_tracks(ev: &Event) -> Vec<TrackCandidate> {
        ev.particles().iter().map(|p| TrackCandidate { hit_ids: p.hit_ids.clone(), edge_ids: Vec::new() }).collect()
    }

    #[test]
    fn single_bin_equals_score() {
        let ev = dedup_hits(&generate_event(&GeneratorConfig::default().with_particles(40).with_seed(3)).unwrap());
        let mut cands = truth_tracks(&ev);
        cands.truncate(30);
        // A track made only of noise hits.
        let noise: Vec<u64> = ev.hits().iter().filter(|h| h.is_noise()).take(3).map(|h| h.id).collect();
        cands.push(TrackCandidate { hit_ids: noise, edge_ids: Vec::new() });
        let whole = score(&cands, &ev, 3, MatchRule::Majority).unwrap();
        for var in [BinVariable::Pt, BinVariable::Length, BinVariable::Phi, BinVariable::Eta] {
            let b =
                binned_metrics(&cands, &ev, var, &[f64::NEG_INFINITY, f64::INFINITY], 3, MatchRule::Majority).unwrap();
            assert_eq!(b.len(), 1);
            assert_eq!(b[0].metrics, whole, "{}", var.name());
        }
    }

    #[test]
    fn empty_bin_reports_absent_fractions() {
        let ev = dedup_hits(&generate_event(&GeneratorConfig::default().with_particles(10).with_seed(5)).unwrap());
        let b =
            binned_metrics(&truth_tracks(&ev), &ev, BinVariable::Pt, &[100.0, 200.0, 300.0], 3, MatchRule::Majority)
                .unwrap();
        for bin in b {
            assert_eq!(bin.metrics.n_true, 0);
            assert_eq!(bin.metrics.purity, None);
            assert_eq!(bin.metrics.efficiency, None);
        }
    }

    #[test]
    fn bad_inputs() {
        let ev = Event::from_labelled_hits(vec![Hit::new(1, 10.0, 0.0, 0.0).with_particle(1)]).unwrap();
        assert!(binned_metrics(&[], &ev, BinVariable::Eta, &[1.0, 1.0], 3, MatchRule::Majority).is_err());
        assert!("theta".parse::<BinVariable>().is_err());
        assert_eq!("eta".parse::<BinVariable>().unwrap(), BinVariable::Eta);
    }
}
