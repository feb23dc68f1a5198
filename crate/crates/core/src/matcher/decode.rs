use super::blossom::min_weight_perfect_matching;
use super::paths::{shortest_paths, walk, AllPairs};
use super::{check_detectors, MatchError, MatchedPair, Matching};
use crate::dem::{DecodingGraph, ObsMask};

/// Integer scale for blossom weights: the largest finite distance maps here.
const INT_RANGE: f64 = (1u64 << 46) as f64;

/// Decoder with all-pairs shortest paths precomputed for a fixed graph.
#[derive(Clone, Debug)]
pub struct Decoder {
    graph: DecodingGraph,
    paths: AllPairs,
}

impl Decoder {
    pub fn new(graph: DecodingGraph) -> Self {
        let paths = AllPairs::new(&graph);
        Self { graph, paths }
    }

    pub fn graph(&self) -> &DecodingGraph {
        &self.graph
    }

    pub fn paths(&self) -> &AllPairs {
        &self.paths
    }

    pub fn decode(&self, dets: &[u32]) -> Result<Matching, MatchError> {
        check_detectors(&self.graph, dets)?;
        let rows: Vec<(&[f64], &[u32])> = dets
            .iter()
            .map(|&d| {
                (
                    self.paths.dist_row(d as usize),
                    self.paths.pred_row(d as usize),
                )
            })
            .collect();
        solve(&self.graph, dets, &rows)
    }

    pub fn predict(&self, dets: &[u32]) -> Result<ObsMask, MatchError> {
        Ok(super::predict_observables(&self.graph, &self.decode(dets)?))
    }
}

/// Decodes against `graph` without precomputation; runs Dijkstra from each
/// flipped detector.
pub fn decode(graph: &DecodingGraph, dets: &[u32]) -> Result<Matching, MatchError> {
    check_detectors(graph, dets)?;
    let sp: Vec<_> = dets
        .iter()
        .map(|&d| shortest_paths(graph, d as usize))
        .collect();
    let rows: Vec<(&[f64], &[u32])> = sp.iter().map(|s| (&s.dist[..], &s.pred[..])).collect();
    solve(graph, dets, &rows)
}

/// `rows[i]` holds distances and predecessors from `dets[i]`.
fn solve(
    graph: &DecodingGraph,
    dets: &[u32],
    rows: &[(&[f64], &[u32])],
) -> Result<Matching, MatchError> {
    let k = dets.len();
    let bnd = graph.boundary_node();
    let to_boundary = |i: usize| MatchedPair {
        a: dets[i],
        b: None,
        path: walk(graph, rows[i].1, bnd),
    };
    let to_partner = |i: usize, j: usize| MatchedPair {
        a: dets[i],
        b: Some(dets[j]),
        path: walk(graph, rows[i].1, dets[j] as usize),
    };
    let bdist = |i: usize| rows[i].0[bnd];
    let pdist = |i: usize, j: usize| rows[i].0[dets[j] as usize];

    let pairs = match k {
        0 => vec![],
        1 => {
            if !bdist(0).is_finite() {
                return Err(MatchError::Unmatchable);
            }
            vec![to_boundary(0)]
        }
        2 if pdist(0, 1) <= bdist(0) + bdist(1) => {
            if !pdist(0, 1).is_finite() {
                return Err(MatchError::Unmatchable);
            }
            vec![to_partner(0, 1)]
        }
        2 => vec![to_boundary(0), to_boundary(1)],
        _ => {
            let mut max = 0.0f64;
            for i in 0..k {
                let b = bdist(i);
                if b.is_finite() {
                    max = max.max(b);
                }
                for j in i + 1..k {
                    let d = pdist(i, j);
                    if d.is_finite() {
                        max = max.max(d);
                    }
                }
            }
            let scale = if max > 0.0 { INT_RANGE / max } else { 1.0 };
            let q = |w: f64| (w * scale).round() as i64;
            let mut edges = Vec::new();
            for i in 0..k {
                let b = bdist(i);
                if b.is_finite() {
                    edges.push((i, k + i, q(b)));
                }
                for j in i + 1..k {
                    let d = pdist(i, j);
                    // A pair costlier than both boundary routes is never needed.
                    if d.is_finite() && d <= b + bdist(j) {
                        edges.push((i, j, q(d)));
                    }
                    edges.push((k + i, k + j, 0));
                }
            }
            let mate =
                min_weight_perfect_matching(2 * k, &edges).map_err(|_| MatchError::Unmatchable)?;
            let mut pairs = Vec::with_capacity(k);
            for (i, &m) in mate.iter().enumerate().take(k) {
                if m == k + i {
                    pairs.push(to_boundary(i));
                } else if m < k && i < m {
                    pairs.push(to_partner(i, m));
                }
            }
            pairs
        }
    };
    Ok(Matching::from_pairs(graph, pairs))
}
