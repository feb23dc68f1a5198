use std::collections::BTreeMap;

use crate::dem::DecodingGraph;
use crate::tracer::PairProbs;

/// Slot key of a related edge: its displacement from the centre edge in
/// doubled coordinates and a rank separating coincident partners.
type SlotKey = ([i64; 3], u32);

/// Per-edge feature layout: a one-hot type block followed by `k_max` slots
/// of `(matched, pair probability)` for the correlated partner edges.
///
/// Slots are ordered by relative position within each edge type, so edges of
/// the same type see their partners in the same order wherever they sit.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSchema {
    num_types: usize,
    k_max: usize,
    /// Per edge: `(partner edge, slot)`.
    slots: Vec<Vec<(u32, usize)>>,
}

impl FeatureSchema {
    /// Partners are the edges fired together with each edge by some
    /// decomposed mechanism.
    pub fn new(graph: &DecodingGraph) -> Self {
        let ne = graph.num_edges();
        let mut partners: Vec<Vec<u32>> = vec![Vec::new(); ne];
        for c in graph.corr_truth() {
            partners[c.first].push(c.second as u32);
            partners[c.second].push(c.first as u32);
        }
        let pos = |e: usize| {
            graph.edge(e).coord.map_or([0; 3], |c| {
                [
                    (2.0 * c[0]).round() as i64,
                    (2.0 * c[1]).round() as i64,
                    (2.0 * c[2]).round() as i64,
                ]
            })
        };
        let mut keyed: Vec<Vec<(SlotKey, u32)>> = Vec::with_capacity(ne);
        let mut per_type: BTreeMap<u32, BTreeMap<SlotKey, ()>> = BTreeMap::new();
        for (e, list) in partners.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            let origin = pos(e);
            let mut keys: Vec<([i64; 3], u32, u32)> = list
                .iter()
                .map(|&f| {
                    let p = pos(f as usize);
                    let off = [p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]];
                    (off, graph.edge(f as usize).type_id, f)
                })
                .collect();
            keys.sort_unstable();
            let mut out = Vec::with_capacity(keys.len());
            let mut rank = 0;
            for (i, &(off, _, f)) in keys.iter().enumerate() {
                rank = if i > 0 && keys[i - 1].0 == off {
                    rank + 1
                } else {
                    0
                };
                let key = (off, rank);
                per_type
                    .entry(graph.edge(e).type_id)
                    .or_default()
                    .insert(key, ());
                out.push((key, f));
            }
            keyed.push(out);
        }
        let index: BTreeMap<u32, BTreeMap<SlotKey, usize>> = per_type
            .into_iter()
            .map(|(t, keys)| {
                (
                    t,
                    keys.into_keys().enumerate().map(|(i, k)| (k, i)).collect(),
                )
            })
            .collect();
        let k_max = index.values().map(|m| m.len()).max().unwrap_or(0);
        let slots = keyed
            .into_iter()
            .enumerate()
            .map(|(e, list)| {
                let ty = graph.edge(e).type_id;
                list.into_iter().map(|(k, f)| (f, index[&ty][&k])).collect()
            })
            .collect();
        Self {
            num_types: graph.num_types(),
            k_max,
            slots,
        }
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn num_edges(&self) -> usize {
        self.slots.len()
    }

    pub fn dim(&self) -> usize {
        self.num_types + 2 * self.k_max
    }

    /// Feature row of one edge.
    pub fn extract(
        &self,
        graph: &DecodingGraph,
        edge: usize,
        matched: &[bool],
        pairs: &PairProbs,
    ) -> Vec<f64> {
        let mut row = vec![0.0; self.dim()];
        self.fill(graph, edge, matched, pairs, &mut row);
        row
    }

    /// Row-major `num_edges x dim` matrix for all edges.
    pub fn extract_all(
        &self,
        graph: &DecodingGraph,
        matched: &[bool],
        pairs: &PairProbs,
    ) -> Vec<f64> {
        let dim = self.dim();
        let mut out = vec![0.0; dim * self.num_edges()];
        for (e, row) in out.chunks_mut(dim).enumerate() {
            self.fill(graph, e, matched, pairs, row);
        }
        out
    }

    fn fill(
        &self,
        graph: &DecodingGraph,
        edge: usize,
        matched: &[bool],
        pairs: &PairProbs,
        row: &mut [f64],
    ) {
        row[graph.edge(edge).type_id as usize] = 1.0;
        for &(f, slot) in &self.slots[edge] {
            let base = self.num_types + 2 * slot;
            row[base] = f64::from(u8::from(matched[f as usize]));
            row[base + 1] = pairs.get(edge as u32, f);
        }
    }
}

/// Membership flags of `edges` over `num_edges`.
pub fn matched_flags(num_edges: usize, edges: &[usize]) -> Vec<bool> {
    let mut out = vec![false; num_edges];
    for &e in edges {
        out[e] = true;
    }
    out
}
