use std::collections::BTreeMap;

use crate::preprocess::Edge;

/// Union of per-sector selections. An edge found in both of its sectors is
/// kept once, under its smallest id. Output is ordered by id.
pub fn merge_sectors<'a, I>(per_sector: I) -> Vec<Edge>
where
    I: IntoIterator<Item = &'a Vec<Edge>>,
{
    let mut by_pair: BTreeMap<(u64, u64), Edge> = BTreeMap::new();
    for edges in per_sector {
        for e in edges {
            by_pair
                .entry((e.a, e.b))
                .and_modify(|k| {
                    if e.id < k.id {
                        *k = *e
                    }
                })
                .or_insert(*e);
        }
    }
    let mut out: Vec<Edge> = by_pair.into_values().collect();
    out.sort_by_key(|e| e.id);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::edge_id;

    fn e(sector: usize, local: u32, a: u64, b: u64) -> Edge {
        Edge { id: edge_id(sector, local), a, b, prior: 0.5 }
    }

    #[test]
    fn overlap_appears_once() {
        let sel = BTreeMap::from([(3, vec![e(3, 0, 1, 2), e(3, 1, 2, 3)]), (4, vec![e(4, 0, 1, 2)])]);
        let m = merge_sectors(sel.values());
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].id, edge_id(3, 0));
    }

    #[test]
    fn disjoint_sizes_add_and_merge_is_idempotent() {
        let sel = BTreeMap::from([(0, vec![e(0, 0, 1, 2), e(0, 1, 5, 6)]), (9, vec![e(9, 0, 7, 8)])]);
        let m = merge_sectors(sel.values());
        assert_eq!(m.len(), 3);
        assert_eq!(merge_sectors([&m, &m]), m);
    }
}
