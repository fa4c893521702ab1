//! Degree-capped flood-fill decomposition of the candidate graph.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::candidates::Edge;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEGREE: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGraph {
    pub index: usize,
    /// Member edge ids, ascending.
    pub edge_ids: Vec<u64>,
    pub m: usize,
}

/// Single-edge bias `beta * P - gamma` for every edge.
pub fn linear_biases(edges: &[Edge], beta: f64, gamma: f64) -> BTreeMap<u64, f64> {
    edges.iter().map(|e| (e.id, beta * e.prior - gamma)).collect()
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

fn components(ids: &[u64], dsu: &mut Dsu) -> Vec<SubGraph> {
    let mut groups: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        groups.entry(dsu.find(i)).or_default().push(*id);
    }
    let mut out: Vec<Vec<u64>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_unstable();
    }
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out.into_iter().enumerate().map(|(index, edge_ids)| SubGraph { index, m: edge_ids.len(), edge_ids }).collect()
}

fn canonical(edges: &[Edge]) -> Result<Vec<Edge>> {
    let mut sorted = edges.to_vec();
    sorted.sort_by_key(|e| e.id);
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Config(format!("edge id {} listed twice", w[0].id)));
    }
    Ok(sorted)
}

/// Keep, at every hit, the `max_degree` incident edges with the highest bias
/// (ties to the lower id). An edge survives only if both of its hits keep it.
pub fn prune_degree(edges: &[Edge], bias: &BTreeMap<u64, f64>, max_degree: usize) -> Result<Vec<Edge>> {
    let edges = canonical(edges)?;
    let b = |e: &Edge| bias.get(&e.id).copied().ok_or(Error::Config(format!("no bias for edge {}", e.id)));
    let biases = edges.iter().map(b).collect::<Result<Vec<f64>>>()?;
    let mut by_hit: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        by_hit.entry(e.a).or_default().push(i);
        by_hit.entry(e.b).or_default().push(i);
    }
    let mut votes = vec![0u8; edges.len()];
    for list in by_hit.values_mut() {
        list.sort_by(|&x, &y| biases[y].total_cmp(&biases[x]).then(edges[x].id.cmp(&edges[y].id)));
        for &i in list.iter().take(max_degree) {
            votes[i] += 1;
        }
    }
    Ok(edges.into_iter().zip(votes).filter(|(_, v)| *v == 2).map(|(e, _)| e).collect())
}

/// Degree-cap the edges, then label connected components over shared hits.
/// Components come back largest first, ties by smallest member id.
pub fn subgraph(edges: &[Edge], bias: &BTreeMap<u64, f64>, max_degree: usize) -> Result<Vec<SubGraph>> {
    let kept = prune_degree(edges, bias, max_degree)?;
    Ok(flood_fill(&kept))
}

/// Connected components of `edges` under the "shares a hit" relation, without pruning.
pub fn flood_fill(edges: &[Edge]) -> Vec<SubGraph> {
    let mut edges = edges.to_vec();
    edges.sort_by_key(|e| e.id);
    edges.dedup_by_key(|e| e.id);
    let mut dsu = Dsu::new(edges.len());
    let mut first_at: HashMap<u64, usize> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        for h in [e.a, e.b] {
            match first_at.get(&h) {
                Some(&j) => dsu.union(i, j),
                None => {
                    first_at.insert(h, i);
                }
            }
        }
    }
    let ids: Vec<u64> = edges.iter().map(|e| e.id).collect();
    components(&ids, &mut dsu)
}

/// Components over explicit weighted links between edges. Every edge keeps
/// its `max_links` strongest links (ties to the lower partner id); a link
/// joins two edges only if both ends keep it. Unlinked edges are singletons.
pub fn subgraph_by_links(edge_ids: &[u64], links: &[(u64, u64, f64)], max_links: usize) -> Result<Vec<SubGraph>> {
    let mut ids = edge_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let pos: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut adj: Vec<Vec<(f64, usize)>> = vec![Vec::new(); ids.len()];
    for &(u, v, w) in links {
        let (&i, &j) = match (pos.get(&u), pos.get(&v)) {
            (Some(i), Some(j)) => (i, j),
            _ => return Err(Error::Config(format!("link ({u}, {v}) references an unknown edge"))),
        };
        if i != j {
            adj[i].push((w, j));
            adj[j].push((w, i));
        }
    }
    let mut keep: Vec<Vec<usize>> = Vec::with_capacity(ids.len());
    for list in &mut adj {
        list.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        let mut k: Vec<usize> = list.iter().take(max_links).map(|x| x.1).collect();
        k.sort_unstable();
        keep.push(k);
    }
    let mut dsu = Dsu::new(ids.len());
    for i in 0..ids.len() {
        for &j in &keep[i] {
            if keep[j].binary_search(&i).is_ok() {
                dsu.union(i, j);
            }
        }
    }
    Ok(components(&ids, &mut dsu))
}
