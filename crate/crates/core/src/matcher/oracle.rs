use std::collections::HashMap;

use super::{check_detectors, MatchError, MatchedPair, Matching};
use crate::dem::DecodingGraph;

pub const ORACLE_MAX_DETECTORS: usize = 12;

/// Exhaustive minimum-weight decoding for validation.
///
/// Distances come from Floyd-Warshall, independent of the Dijkstra used by
/// the decoder; pairings (including boundary options) are enumerated with
/// branch and bound.
pub fn exact_oracle_decode(graph: &DecodingGraph, dets: &[u32]) -> Result<Matching, MatchError> {
    check_detectors(graph, dets)?;
    if dets.len() > ORACLE_MAX_DETECTORS {
        return Err(MatchError::TooManyDetectors {
            got: dets.len(),
            max: ORACLE_MAX_DETECTORS,
        });
    }
    let n = graph.num_nodes();
    let mut dist = vec![f64::INFINITY; n * n];
    let mut next = vec![usize::MAX; n * n];
    let mut edge_between = HashMap::new();
    for v in 0..n {
        dist[v * n + v] = 0.0;
        next[v * n + v] = v;
    }
    for e in 0..graph.num_edges() {
        let (a, b) = graph.endpoints(e);
        let w = graph.weight(e);
        edge_between.insert((a.min(b), a.max(b)), e);
        for (x, y) in [(a, b), (b, a)] {
            if w < dist[x * n + y] {
                dist[x * n + y] = w;
                next[x * n + y] = y;
            }
        }
    }
    for m in 0..n {
        for i in 0..n {
            let dim = dist[i * n + m];
            if !dim.is_finite() {
                continue;
            }
            for j in 0..n {
                let via = dim + dist[m * n + j];
                if via < dist[i * n + j] {
                    dist[i * n + j] = via;
                    next[i * n + j] = next[i * n + m];
                }
            }
        }
    }

    let bnd = graph.boundary_node();
    let nodes: Vec<usize> = dets.iter().map(|&d| d as usize).collect();
    let mut search = Search {
        dist: &dist,
        n,
        bnd,
        nodes: &nodes,
        used: vec![false; nodes.len()],
        current: Vec::new(),
        best_cost: f64::INFINITY,
        best: Vec::new(),
    };
    search.run(0, 0.0);
    if !search.best_cost.is_finite() && !nodes.is_empty() {
        return Err(MatchError::Unmatchable);
    }

    let path = |from: usize, to: usize| {
        let mut out = Vec::new();
        let mut v = from;
        while v != to {
            let u = next[v * n + to];
            out.push(edge_between[&(v.min(u), v.max(u))]);
            v = u;
        }
        out
    };
    let pairs = search
        .best
        .iter()
        .map(|&(i, j)| match j {
            Some(j) => MatchedPair {
                a: dets[i],
                b: Some(dets[j]),
                path: path(nodes[i], nodes[j]),
            },
            None => MatchedPair {
                a: dets[i],
                b: None,
                path: path(nodes[i], bnd),
            },
        })
        .collect();
    Ok(Matching::from_pairs(graph, pairs))
}

struct Search<'a> {
    dist: &'a [f64],
    n: usize,
    bnd: usize,
    nodes: &'a [usize],
    used: Vec<bool>,
    current: Vec<(usize, Option<usize>)>,
    best_cost: f64,
    best: Vec<(usize, Option<usize>)>,
}

impl Search<'_> {
    fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.n + b]
    }

    fn run(&mut self, start: usize, cost: f64) {
        if cost >= self.best_cost {
            return;
        }
        let Some(i) = (start..self.nodes.len()).find(|&i| !self.used[i]) else {
            self.best_cost = cost;
            self.best = self.current.clone();
            return;
        };
        self.used[i] = true;
        let b = self.d(self.nodes[i], self.bnd);
        if b.is_finite() {
            self.current.push((i, None));
            self.run(i + 1, cost + b);
            self.current.pop();
        }
        for j in i + 1..self.nodes.len() {
            if self.used[j] {
                continue;
            }
            let w = self.d(self.nodes[i], self.nodes[j]);
            if !w.is_finite() {
                continue;
            }
            self.used[j] = true;
            self.current.push((i, Some(j)));
            self.run(i + 1, cost + w);
            self.current.pop();
            self.used[j] = false;
        }
        self.used[i] = false;
    }
}
