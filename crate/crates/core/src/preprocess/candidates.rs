//! Candidate edge enumeration with a recall-calibrated KDE cut.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kde::{edge_prior, segment_features, KdeModel};
use super::sector::Sector;
use crate::error::{Error, Result};
use crate::event::Event;

/// Ordered hit pair `a -> b` with `r_a < r_b`; one QUBO variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: u64,
    pub a: u64,
    pub b: u64,
    pub prior: f64,
}

/// Edge ids encode the sector in the upper 32 bits.
pub fn edge_id(sector: usize, local: u32) -> u64 {
    ((sector as u64) << 32) | local as u64
}

pub fn edge_sector(id: u64) -> usize {
    (id >> 32) as usize
}

/// Set of true consecutive-hit segments of an event.
pub fn true_edge_set(event: &Event) -> HashSet<(u64, u64)> {
    event.true_edges().into_iter().collect()
}

/// A trained prior plus the frozen cut derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub version: u32,
    pub model: KdeModel,
    /// Prior cut; edges with `prior >= threshold` are kept.
    pub threshold: f64,
    pub target_recall: f64,
    /// Fraction of calibration true edges at or above the cut.
    pub recall: f64,
    pub n_true_edges: usize,
}

pub const CALIBRATION_VERSION: u32 = 1;

impl Calibration {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cal: Calibration = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if cal.version != CALIBRATION_VERSION {
            return Err(Error::Config(format!("unsupported calibration version {}", cal.version)));
        }
        Ok(cal)
    }
}

/// Pick the largest prior threshold that keeps at least `target_recall` of
/// the true edges in `events`.
pub fn calibrate(model: KdeModel, events: &[Event], target_recall: f64) -> Result<Calibration> {
    if !(target_recall > 0.0 && target_recall <= 1.0) {
        return Err(Error::Config(format!("target_recall {target_recall} outside (0, 1]")));
    }
    let mut priors = Vec::new();
    for ev in events {
        for (a, b) in ev.true_edges() {
            let (ha, hb) = (ev.try_hit(a)?, ev.try_hit(b)?);
            priors.push(edge_prior(&model, ha, hb)?);
        }
    }
    if priors.is_empty() {
        return Err(Error::Insufficient("calibration events contain no true edges".into()));
    }
    priors.sort_by(|a, b| b.total_cmp(a));
    let n = priors.len();
    let keep = ((target_recall * n as f64).ceil() as usize).clamp(1, n);
    let threshold = priors[keep - 1];
    let retained = priors.iter().filter(|p| **p >= threshold).count();
    Ok(Calibration {
        version: CALIBRATION_VERSION,
        model,
        threshold,
        target_recall,
        recall: retained as f64 / n as f64,
        n_true_edges: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub sector: usize,
    pub edges: Vec<Edge>,
    /// Hit pairs examined; at most h(h-1)/2 for h sector hits.
    pub pair_visits: u64,
}

pub fn select_candidates(sector: &Sector, event: &Event, calibration: &Calibration) -> Result<CandidateSet> {
    select_with_threshold(sector, event, &calibration.model, calibration.threshold)
}

/// Enumerate every r-ordered hit pair in the sector once and keep those whose
/// prior reaches `threshold`.
pub fn select_with_threshold(sector: &Sector, event: &Event, model: &KdeModel, threshold: f64) -> Result<CandidateSet> {
    let hits = sector.hit_ids.iter().map(|id| event.try_hit(*id)).collect::<Result<Vec<_>>>()?;
    let mut edges = Vec::new();
    let mut visits = 0u64;
    let mut local = 0u32;
    for (i, a) in hits.iter().enumerate() {
        for b in &hits[i + 1..] {
            visits += 1;
            let (inner, outer) = match a.r.total_cmp(&b.r) {
                std::cmp::Ordering::Less => (a, b),
                std::cmp::Ordering::Greater => (b, a),
                std::cmp::Ordering::Equal => continue,
            };
            let prior = model.prior(segment_features(inner, outer).expect("distinct radii"));
            if prior < threshold {
                continue;
            }
            edges.push(Edge { id: edge_id(sector.index, local), a: inner.id, b: outer.id, prior });
            local += 1;
        }
    }
    Ok(CandidateSet { sector: sector.index, edges, pair_visits: visits })
}

pub const EDGES_HEADER: [&str; 4] = ["edge_id", "hit_a", "hit_b", "prior"];

pub fn write_edges_csv<W: Write>(edges: &[Edge], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EDGES_HEADER)?;
    for e in edges {
        w.write_record([e.id.to_string(), e.a.to_string(), e.b.to_string(), format!("{}", e.prior)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edges_csv<R: Read>(src: R) -> Result<Vec<Edge>> {
    let mut rdr = csv::Reader::from_reader(src);
    let header: Vec<_> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != EDGES_HEADER {
        return Err(Error::Parse {
            path: "<edges>".into(),
            line: 1,
            message: format!("expected header {}", EDGES_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err = |m: String| Error::Parse { path: "<edges>".into(), line, message: m };
        let get = |i: usize| rec.get(i).ok_or_else(|| parse_err(format!("missing column {i}")));
        out.push(Edge {
            id: get(0)?.parse().map_err(|e| parse_err(format!("edge_id: {e}")))?,
            a: get(1)?.parse().map_err(|e| parse_err(format!("hit_a: {e}")))?,
            b: get(2)?.parse().map_err(|e| parse_err(format!("hit_b: {e}")))?,
            prior: get(3)?.parse().map_err(|e| parse_err(format!("prior: {e}")))?,
        });
    }
    Ok(out)
}

pub fn save_edges(edges: &[Edge], path: &Path) -> Result<()> {
    write_edges_csv(edges, std::fs::File::create(path)?)
}

pub fn load_edges(path: &Path) -> Result<Vec<Edge>> {
    read_edges_csv(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{dedup_hits, generate_event, GeneratorConfig};
    use crate::preprocess::kde::{train_kde, KdeConfig};
    use crate::preprocess::sector::sectorize;

    fn events(n: usize, seed: u64) -> Vec<Event> {
        (0..n)
            .map(|i| dedup_hits(&generate_event(&GeneratorConfig::default().with_seed(seed + i as u64)).unwrap()))
            .collect()
    }

    #[test]
    fn recall_target_is_met_on_calibration_set() {
        let cal_events = events(3, 100);
        let model = train_kde(&cal_events, &KdeConfig::default()).unwrap();
        let cal = calibrate(model, &cal_events, 0.93).unwrap();
        assert!(cal.recall >= 0.93 && cal.recall < 0.94, "{}", cal.recall);
        assert!(cal.threshold > 0.0 && cal.threshold < 1.0);
    }

    #[test]
    fn invalid_target_recall() {
        let cal_events = events(2, 200);
        let model = train_kde(&cal_events, &KdeConfig::default()).unwrap();
        for t in [0.0, -0.1, 1.01] {
            assert!(calibrate(model.clone(), &cal_events, t).is_err());
        }
    }

    #[test]
    fn zero_threshold_keeps_every_ordered_pair() {
        let ev = &events(1, 300)[0];
        let model = train_kde(&events(2, 310), &KdeConfig::default()).unwrap();
        let sector = &sectorize(ev)[5];
        let set = select_with_threshold(sector, ev, &model, 0.0).unwrap();
        let h = sector.hit_ids.len() as u64;
        assert_eq!(set.pair_visits, h * (h - 1) / 2);
        let radii: Vec<f64> = sector.hit_ids.iter().map(|id| ev.hit(*id).unwrap().r).collect();
        let distinct = (0..radii.len())
            .flat_map(|i| (i + 1..radii.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| radii[i] != radii[j])
            .count();
        assert_eq!(set.edges.len(), distinct);
        for e in &set.edges {
            assert!(ev.hit(e.a).unwrap().r < ev.hit(e.b).unwrap().r);
        }
    }

    #[test]
    fn edges_csv_round_trip() {
        let edges = vec![
            Edge { id: edge_id(3, 0), a: 1, b: 2, prior: 0.1 },
            Edge { id: edge_id(31, 7), a: 9, b: 4, prior: 1.0 / 3.0 },
        ];
        let mut buf = Vec::new();
        write_edges_csv(&edges, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("edge_id,hit_a,hit_b,prior\n"));
        assert_eq!(read_edges_csv(buf.as_slice()).unwrap(), edges);
        assert_eq!(edge_sector(edges[1].id), 31);
    }
}
