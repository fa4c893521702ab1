//! Chain extraction from a set of selected edges.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::event::Event;
use crate::preprocess::Edge;
use crate::qubo::{angle_kernel, Scales};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackCandidate {
    /// Hits ordered by increasing r.
    pub hit_ids: Vec<u64>,
    /// Edges linking consecutive hits.
    pub edge_ids: Vec<u64>,
}

impl TrackCandidate {
    pub fn len(&self) -> usize {
        self.hit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hit_ids.is_empty()
    }
}

fn better(c: f64, id: (u64, u64), best: &Option<(f64, (u64, u64))>) -> bool {
    match best {
        None => true,
        Some((bc, bid)) => c > *bc || (c == *bc && id < *bid),
    }
}

/// Edges `a -> c` bypassing a selected path `a -> b -> ... -> c`.
fn shortcuts(edges: &[Edge], event: &Event) -> Result<Vec<bool>> {
    let mut outs: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        outs.entry(e.a).or_default().push(i);
    }
    let mut flag = vec![false; edges.len()];
    for (i, e) in edges.iter().enumerate() {
        let r_end = event.try_hit(e.b)?.r;
        let mut stack: Vec<u64> = outs[&e.a].iter().filter(|&&j| j != i).map(|&j| edges[j].b).collect();
        let mut seen: HashSet<u64> = HashSet::new();
        while let Some(h) = stack.pop() {
            if h == e.b {
                flag[i] = true;
                break;
            }
            if !seen.insert(h) || event.try_hit(h)?.r >= r_end {
                continue;
            }
            stack.extend(outs.get(&h).into_iter().flatten().map(|&j| edges[j].b));
        }
    }
    Ok(flag)
}

/// Turn selected edges into disjoint chains. Shortcut edges that bypass a
/// selected path between the same hits are dropped first. Then every hit
/// keeps at most one inbound and one outbound edge: through-going hits keep the pair with the
/// straightest continuation, end hits keep the edge whose far side continues
/// best (lowest id when nothing continues). An edge survives when both of
/// its hits keep it; chains shorter than two hits vanish.
pub fn assemble_tracks(selected: &[Edge], event: &Event, scales: &Scales) -> Result<Vec<TrackCandidate>> {
    // Collapse duplicates of the same hit pair onto the smallest id.
    let mut by_pair: BTreeMap<(u64, u64), Edge> = BTreeMap::new();
    for e in selected {
        event.try_hit(e.a)?;
        event.try_hit(e.b)?;
        by_pair
            .entry((e.a, e.b))
            .and_modify(|k| {
                if e.id < k.id {
                    *k = *e
                }
            })
            .or_insert(*e);
    }
    let edges: Vec<Edge> = by_pair.into_values().collect();
    let redundant = shortcuts(&edges, event)?;
    let edges: Vec<Edge> = edges.into_iter().zip(redundant).filter(|(_, r)| !r).map(|(e, _)| e).collect();
    let mut ins: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut outs: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        outs.entry(e.a).or_default().push(i);
        ins.entry(e.b).or_default().push(i);
    }
    let cos = |a: u64, b: u64, c: u64| -> Result<f64> {
        Ok(angle_kernel(event.try_hit(a)?, event.try_hit(b)?, event.try_hit(c)?, scales)?.cos_theta)
    };

    let mut hits: Vec<u64> = ins.keys().chain(outs.keys()).copied().collect();
    hits.sort_unstable();
    hits.dedup();
    let mut keep_in: HashMap<u64, usize> = HashMap::new();
    let mut keep_out: HashMap<u64, usize> = HashMap::new();
    let empty = Vec::new();
    for &h in &hits {
        let hin = ins.get(&h).unwrap_or(&empty);
        let hout = outs.get(&h).unwrap_or(&empty);
        if !hin.is_empty() && !hout.is_empty() {
            let mut best: Option<(f64, (u64, u64))> = None;
            let mut pick = (0, 0);
            for &i in hin {
                for &j in hout {
                    let c = cos(edges[i].a, h, edges[j].b)?;
                    let id = (edges[i].id, edges[j].id);
                    if better(c, id, &best) {
                        best = Some((c, id));
                        pick = (i, j);
                    }
                }
            }
            keep_in.insert(h, pick.0);
            keep_out.insert(h, pick.1);
        } else if !hout.is_empty() {
            // Chain start: prefer the edge whose outer hit continues straightest.
            let mut best: Option<(f64, (u64, u64))> = None;
            let mut pick = 0;
            for &j in hout {
                let c_hit = edges[j].b;
                let mut c_best = f64::NEG_INFINITY;
                for &k in outs.get(&c_hit).unwrap_or(&empty) {
                    c_best = c_best.max(cos(h, c_hit, edges[k].b)?);
                }
                if better(c_best, (edges[j].id, 0), &best) {
                    best = Some((c_best, (edges[j].id, 0)));
                    pick = j;
                }
            }
            keep_out.insert(h, pick);
        } else {
            let mut best: Option<(f64, (u64, u64))> = None;
            let mut pick = 0;
            for &i in hin {
                let a_hit = edges[i].a;
                let mut c_best = f64::NEG_INFINITY;
                for &k in ins.get(&a_hit).unwrap_or(&empty) {
                    c_best = c_best.max(cos(edges[k].a, a_hit, h)?);
                }
                if better(c_best, (edges[i].id, 0), &best) {
                    best = Some((c_best, (edges[i].id, 0)));
                    pick = i;
                }
            }
            keep_in.insert(h, pick);
        }
    }

    let kept: Vec<bool> = edges
        .iter()
        .enumerate()
        .map(|(i, e)| keep_out.get(&e.a) == Some(&i) && keep_in.get(&e.b) == Some(&i))
        .collect();
    let mut next: HashMap<u64, usize> = HashMap::new();
    let mut has_in: HashMap<u64, bool> = HashMap::new();
    for (i, e) in edges.iter().enumerate().filter(|(i, _)| kept[*i]) {
        next.insert(e.a, i);
        has_in.insert(e.b, true);
    }
    let mut starts: Vec<u64> = next.keys().filter(|h| !has_in.contains_key(h)).copied().collect();
    starts.sort_unstable();
    let mut out = Vec::new();
    for s in starts {
        let mut cand = TrackCandidate { hit_ids: vec![s], edge_ids: Vec::new() };
        let mut h = s;
        while let Some(&i) = next.get(&h) {
            cand.edge_ids.push(edges[i].id);
            h = edges[i].b;
            cand.hit_ids.push(h);
        }
        out.push(cand);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Hit;

    fn e(id: u64, a: u64, b: u64) -> Edge {
        Edge { id, a, b, prior: 1.0 }
    }

    fn line_event() -> Event {
        let hits = (1..=6).map(|i| Hit::from_cylindrical(i, 100.0 * i as f64, 0.2, 50.0 * i as f64)).collect();
        Event::new(hits, vec![]).unwrap()
    }

    #[test]
    fn simple_chain() {
        let ev = line_event();
        let c = assemble_tracks(&[e(2, 3, 4), e(0, 1, 2), e(1, 2, 3)], &ev, &Scales::default()).unwrap();
        assert_eq!(c, vec![TrackCandidate { hit_ids: vec![1, 2, 3, 4], edge_ids: vec![0, 1, 2] }]);
    }

    #[test]
    fn empty_selection() {
        assert!(assemble_tracks(&[], &line_event(), &Scales::default()).unwrap().is_empty());
    }

    #[test]
    fn y_branch_keeps_the_straighter_continuation() {
        let s = Scales::default();
        let ev = Event::new(
            vec![
                Hit::from_cylindrical(1, 100.0, 0.0, 100.0),
                Hit::from_cylindrical(2, 200.0, 0.0, 200.0),
                Hit::from_cylindrical(3, 300.0, 0.0, 300.0),
                Hit::from_cylindrical(4, 300.0, 0.05, 420.0),
            ],
            vec![],
        )
        .unwrap();
        let (h1, h2, h3, h4) = (ev.hit(1).unwrap(), ev.hit(2).unwrap(), ev.hit(3).unwrap(), ev.hit(4).unwrap());
        let keep_c = angle_kernel(h1, h2, h3, &s).unwrap().cos_theta > angle_kernel(h1, h2, h4, &s).unwrap().cos_theta;
        assert!(keep_c);
        let c = assemble_tracks(&[e(0, 1, 2), e(1, 2, 3), e(2, 2, 4)], &ev, &s).unwrap();
        assert_eq!(c, vec![TrackCandidate { hit_ids: vec![1, 2, 3], edge_ids: vec![0, 1] }]);
    }

    #[test]
    fn shortcut_over_a_selected_path_is_dropped() {
        let ev = line_event();
        let c = assemble_tracks(&[e(0, 1, 2), e(1, 2, 3), e(2, 3, 4), e(3, 1, 3), e(4, 2, 5)], &ev, &Scales::default())
            .unwrap();
        // 1 -> 3 bypasses 1 -> 2 -> 3; 2 -> 5 is not bypassing anything selected.
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].edge_ids, vec![0, 1, 2]);
    }

    #[test]
    fn duplicate_pairs_collapse() {
        let ev = line_event();
        let c = assemble_tracks(&[e(5, 1, 2), e(3, 1, 2)], &ev, &Scales::default()).unwrap();
        assert_eq!(c[0].edge_ids, vec![3]);
    }

    #[test]
    fn forked_start_prefers_continuing_edge() {
        // Hit 1 has two outgoing edges; only 1 -> 2 continues to 3.
        let ev = Event::new(
            vec![
                Hit::from_cylindrical(1, 100.0, 0.0, 100.0),
                Hit::from_cylindrical(2, 200.0, 0.0, 200.0),
                Hit::from_cylindrical(3, 300.0, 0.0, 300.0),
                Hit::from_cylindrical(9, 200.0, 0.3, 100.0),
            ],
            vec![],
        )
        .unwrap();
        let c = assemble_tracks(&[e(0, 1, 9), e(1, 1, 2), e(2, 2, 3)], &ev, &Scales::default()).unwrap();
        assert_eq!(c, vec![TrackCandidate { hit_ids: vec![1, 2, 3], edge_ids: vec![1, 2] }]);
    }
}
