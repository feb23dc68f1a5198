//! Minimum-weight perfect matching decoding.
//!
//! Flipped detectors are reduced to a dense syndrome graph: every flipped
//! detector gets a boundary twin, detector pairs are joined at their
//! shortest-path distance, each detector is joined to its own twin at its
//! distance to the boundary, and twins are joined to each other at zero
//! cost. A minimum-weight perfect matching of that graph is expanded back to
//! decoding-graph edges along the stored shortest paths.

mod blossom;
mod decode;
mod oracle;
mod paths;

pub use blossom::{max_weight_matching, min_weight_perfect_matching, NoPerfectMatching};
pub use decode::{decode, Decoder};
pub use oracle::{exact_oracle_decode, ORACLE_MAX_DETECTORS};
pub use paths::{shortest_paths, AllPairs, ShortestPaths, NO_EDGE};

use thiserror::Error;

use crate::dem::{DecodingGraph, ObsMask};

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("detector D{index} out of range for a graph with {num_detectors} detectors")]
    DetectorOutOfRange { index: u32, num_detectors: usize },
    #[error("{got} flipped detectors exceed the oracle limit of {max}")]
    TooManyDetectors { got: usize, max: usize },
    #[error("syndrome cannot be matched: some flipped detectors reach neither a partner nor the boundary")]
    Unmatchable,
}

/// One matched syndrome pair and the path that serves it.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchedPair {
    pub a: u32,
    /// Partner detector, `None` for the boundary.
    pub b: Option<u32>,
    pub path: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Matching {
    /// Sorted edge ids; edges on an even number of paths cancel.
    pub edges: Vec<usize>,
    pub weight: f64,
    pub pairs: Vec<MatchedPair>,
}

impl Matching {
    pub(crate) fn from_pairs(graph: &DecodingGraph, pairs: Vec<MatchedPair>) -> Self {
        let mut all: Vec<usize> = pairs.iter().flat_map(|p| p.path.iter().copied()).collect();
        all.sort_unstable();
        let mut edges = Vec::with_capacity(all.len());
        for e in all {
            if edges.last() == Some(&e) {
                edges.pop();
            } else {
                edges.push(e);
            }
        }
        let weight = edges.iter().map(|&e| graph.weight(e)).sum();
        Self {
            edges,
            weight,
            pairs,
        }
    }

    /// Detectors at odd-degree endpoints of the edge set; the boundary absorbs parity.
    pub fn syndrome(&self, graph: &DecodingGraph) -> Vec<u32> {
        let mut dets: Vec<u32> = Vec::new();
        for &e in &self.edges {
            let edge = graph.edge(e);
            dets.push(edge.a);
            dets.extend(edge.b);
        }
        dets.sort_unstable();
        let mut out = Vec::with_capacity(dets.len());
        for d in dets {
            if out.last() == Some(&d) {
                out.pop();
            } else {
                out.push(d);
            }
        }
        out
    }
}

/// XOR of the observable masks of all matched edges.
pub fn predict_observables(graph: &DecodingGraph, matching: &Matching) -> ObsMask {
    matching
        .edges
        .iter()
        .fold(0, |m, &e| m ^ graph.edge(e).observables)
}

pub(crate) fn check_detectors(graph: &DecodingGraph, dets: &[u32]) -> Result<(), MatchError> {
    match dets.iter().find(|&&d| d as usize >= graph.num_detectors()) {
        Some(&index) => Err(MatchError::DetectorOutOfRange {
            index,
            num_detectors: graph.num_detectors(),
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::parse_dem;

    #[test]
    fn observable_prediction_cancels() {
        let g = DecodingGraph::build(
            &parse_dem("error(0.1) D0 L0\nerror(0.1) D0 D1 L0\nerror(0.1) D1").unwrap(),
        )
        .unwrap();
        let m = |edges: Vec<usize>| Matching {
            edges,
            ..Default::default()
        };
        assert_eq!(predict_observables(&g, &m(vec![])), 0);
        assert_eq!(predict_observables(&g, &m(vec![0])), 1);
        assert_eq!(predict_observables(&g, &m(vec![0, 1])), 0);
    }
}
