use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dem::DecodingGraph;

/// Marks "no predecessor" in [`ShortestPaths::pred`].
pub const NO_EDGE: u32 = u32::MAX;

/// Single-source shortest paths over the decoding graph, boundary node included.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortestPaths {
    pub source: usize,
    pub dist: Vec<f64>,
    /// Edge id through which each node is reached, [`NO_EDGE`] at the source
    /// and at unreachable nodes.
    pub pred: Vec<u32>,
}

impl ShortestPaths {
    /// Edge ids along the path from the source to `target`, target end first.
    pub fn path_to(&self, graph: &DecodingGraph, target: usize) -> Vec<usize> {
        walk(graph, &self.pred, target)
    }
}

pub(crate) fn walk(graph: &DecodingGraph, pred: &[u32], target: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut v = target;
    while pred[v] != NO_EDGE {
        let e = pred[v] as usize;
        out.push(e);
        let (a, b) = graph.endpoints(e);
        v = if a == v { b } else { a };
    }
    out
}

#[derive(PartialEq)]
struct Entry(f64, u32);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (distance, node).
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `source`. Equal-distance ties keep the lower edge id.
pub fn shortest_paths(graph: &DecodingGraph, source: usize) -> ShortestPaths {
    let n = graph.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_EDGE; n];
    let mut done = vec![false; n];
    let weights = graph.weights();
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source as u32));
    while let Some(Entry(d, u)) = heap.pop() {
        let u = u as usize;
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, e) in graph.neighbors(u) {
            let v = v as usize;
            if done[v] {
                continue;
            }
            let nd = d + weights[e as usize];
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = e;
                heap.push(Entry(nd, v as u32));
            } else if nd == dist[v] && e < pred[v] {
                pred[v] = e;
            }
        }
    }
    ShortestPaths { source, dist, pred }
}

/// Shortest paths from every node, stored densely.
#[derive(Clone, Debug)]
pub struct AllPairs {
    n: usize,
    dist: Vec<f64>,
    pred: Vec<u32>,
}

impl AllPairs {
    pub fn new(graph: &DecodingGraph) -> Self {
        use rayon::prelude::*;
        let n = graph.num_nodes();
        let rows: Vec<ShortestPaths> = (0..n)
            .into_par_iter()
            .map(|s| shortest_paths(graph, s))
            .collect();
        let mut dist = Vec::with_capacity(n * n);
        let mut pred = Vec::with_capacity(n * n);
        for r in rows {
            dist.extend(r.dist);
            pred.extend(r.pred);
        }
        Self { n, dist, pred }
    }

    pub fn dist_row(&self, source: usize) -> &[f64] {
        &self.dist[source * self.n..(source + 1) * self.n]
    }

    pub fn pred_row(&self, source: usize) -> &[u32] {
        &self.pred[source * self.n..(source + 1) * self.n]
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.n + b]
    }
}
