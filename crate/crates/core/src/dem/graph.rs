use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use super::{
    prob_from_weight, weight_from_prob, xor_combine, DetectorErrorModel, ModelError, ObsMask,
};

/// Marker for the virtual boundary in endpoint pairs.
pub const BOUNDARY: Option<u32> = None;

/// Probabilities above this are clamped so every weight stays nonnegative.
const MAX_EDGE_PROB: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("channel {channel} mechanism {mechanism} has a component with {size} detectors; decompose it into components of at most two")]
    DecompositionRequired {
        channel: usize,
        mechanism: usize,
        size: usize,
    },
    #[error("parallel mechanisms on D{a}-{b} flip different observables")]
    ConflictingObservables { a: u32, b: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("expected {expected} edge values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Topology of one decoding-graph edge. Probabilities and weights live on the
/// [`DecodingGraph`] so re-weighted copies can share the topology.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub a: u32,
    /// Second detector, or `None` for an edge to the boundary.
    pub b: Option<u32>,
    pub type_id: u32,
    pub observables: ObsMask,
    /// Midpoint of the endpoints (detector position for boundary edges).
    pub coord: Option<[f64; 3]>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.b.is_none()
    }
}

/// An unordered pair of edges driven by a common mechanism.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelatedPair {
    pub first: usize,
    pub second: usize,
    pub probability: f64,
}

#[derive(Debug)]
struct Topology {
    num_detectors: usize,
    num_observables: usize,
    edges: Vec<Edge>,
    /// `adjacency[node]` lists `(neighbour node, edge id)`; node `num_detectors` is the boundary.
    adjacency: Vec<Vec<(u32, u32)>>,
    corr_truth: Vec<CorrelatedPair>,
    /// `mechanism_edges[channel][arm]`: edges flipped when that arm fires.
    mechanism_edges: Vec<Vec<Vec<u32>>>,
    num_types: usize,
}

/// Weighted matching graph over detectors plus one virtual boundary node.
#[derive(Clone, Debug)]
pub struct DecodingGraph {
    topo: Arc<Topology>,
    probabilities: Vec<f64>,
    weights: Vec<f64>,
}

type EdgeKey = (u32, Option<u32>);

fn edge_key(dets: &[u32]) -> EdgeKey {
    match *dets {
        [a] => (a, None),
        [a, b] => (a.min(b), Some(a.max(b))),
        _ => unreachable!("components are checked to have one or two detectors"),
    }
}

fn describe(b: Option<u32>) -> String {
    b.map_or_else(|| "B".to_string(), |b| format!("D{b}"))
}

impl DecodingGraph {
    /// Builds the decoding graph of a model.
    ///
    /// Each distinct endpoint set becomes one edge. Mechanisms of one channel
    /// that hit the same edge add their probabilities (they are exclusive);
    /// contributions from different channels combine as independent events.
    /// Edges whose merged probability exceeds one half are clamped to weight 0.
    pub fn build(model: &DetectorErrorModel) -> Result<Self, GraphError> {
        model.validate()?;
        let mut index: HashMap<EdgeKey, u32> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        let mut mechanism_edges = Vec::with_capacity(model.channels.len());
        let mut pair_probs: BTreeMap<(usize, usize), f64> = BTreeMap::new();

        for (ci, ch) in model.channels.iter().enumerate() {
            let mut arms = Vec::with_capacity(ch.mechanisms.len());
            let mut local: Vec<(u32, f64)> = Vec::new();
            let mut local_pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (mi, mech) in ch.mechanisms.iter().enumerate() {
                let mut ids: Vec<u32> = Vec::with_capacity(mech.components.len());
                for comp in &mech.components {
                    match comp.detectors.len() {
                        0 => continue,
                        1 | 2 => {}
                        size => {
                            return Err(GraphError::DecompositionRequired {
                                channel: ci,
                                mechanism: mi,
                                size,
                            })
                        }
                    }
                    let key = edge_key(&comp.detectors);
                    let id = *index.entry(key).or_insert_with(|| {
                        edges.push(Edge {
                            a: key.0,
                            b: key.1,
                            type_id: 0,
                            observables: comp.observables,
                            coord: None,
                        });
                        probs.push(0.0);
                        (edges.len() - 1) as u32
                    });
                    if edges[id as usize].observables != comp.observables {
                        return Err(GraphError::ConflictingObservables {
                            a: key.0,
                            b: describe(key.1),
                        });
                    }
                    if let Some(pos) = ids.iter().position(|&e| e == id) {
                        ids.swap_remove(pos);
                    } else {
                        ids.push(id);
                    }
                }
                ids.sort_unstable();
                for &e in &ids {
                    match local.iter_mut().find(|(le, _)| *le == e) {
                        Some((_, p)) => *p += mech.probability,
                        None => local.push((e, mech.probability)),
                    }
                }
                for (i, &e1) in ids.iter().enumerate() {
                    for &e2 in &ids[i + 1..] {
                        *local_pairs.entry((e1 as usize, e2 as usize)).or_insert(0.0) +=
                            mech.probability;
                    }
                }
                arms.push(ids);
            }
            for (e, p) in local {
                let slot = &mut probs[e as usize];
                *slot = xor_combine(*slot, p);
            }
            for (k, p) in local_pairs {
                let slot = pair_probs.entry(k).or_insert(0.0);
                *slot = xor_combine(*slot, p);
            }
            mechanism_edges.push(arms);
        }

        let n = model.num_detectors;
        let mut adjacency = vec![Vec::new(); n + 1];
        for (i, e) in edges.iter().enumerate() {
            let b = e.b.unwrap_or(n as u32);
            adjacency[e.a as usize].push((b, i as u32));
            adjacency[b as usize].push((e.a, i as u32));
        }

        let coords = &model.layout.coords;
        for e in &mut edges {
            e.coord = match (coords.get(&e.a), e.b.map(|b| coords.get(&b))) {
                (Some(&ca), None) => Some(ca),
                (Some(ca), Some(Some(cb))) => Some([
                    0.5 * (ca[0] + cb[0]),
                    0.5 * (ca[1] + cb[1]),
                    0.5 * (ca[2] + cb[2]),
                ]),
                _ => None,
            };
        }
        let num_types = assign_types(&mut edges, model);

        let probabilities: Vec<f64> = probs.iter().map(|&p| p.min(MAX_EDGE_PROB)).collect();
        let weights = probabilities
            .iter()
            .map(|&p| weight_from_prob(p).expect("merged probability lies in (0, 0.5]"))
            .collect();
        let corr_truth = pair_probs
            .into_iter()
            .map(|((first, second), probability)| CorrelatedPair {
                first,
                second,
                probability,
            })
            .collect();

        Ok(Self {
            topo: Arc::new(Topology {
                num_detectors: n,
                num_observables: model.num_observables,
                edges,
                adjacency,
                corr_truth,
                mechanism_edges,
                num_types,
            }),
            probabilities,
            weights,
        })
    }

    pub fn num_detectors(&self) -> usize {
        self.topo.num_detectors
    }

    pub fn num_observables(&self) -> usize {
        self.topo.num_observables
    }

    /// Node index of the virtual boundary.
    pub fn boundary_node(&self) -> usize {
        self.topo.num_detectors
    }

    pub fn num_nodes(&self) -> usize {
        self.topo.num_detectors + 1
    }

    pub fn num_edges(&self) -> usize {
        self.topo.edges.len()
    }

    pub fn num_types(&self) -> usize {
        self.topo.num_types
    }

    pub fn edges(&self) -> &[Edge] {
        &self.topo.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.topo.edges[id]
    }

    /// Node index of the second endpoint, with the boundary mapped to [`Self::boundary_node`].
    pub fn endpoints(&self, id: usize) -> (usize, usize) {
        let e = &self.topo.edges[id];
        (
            e.a as usize,
            e.b.map_or(self.topo.num_detectors, |b| b as usize),
        )
    }

    pub fn neighbors(&self, node: usize) -> &[(u32, u32)] {
        &self.topo.adjacency[node]
    }

    pub fn probability(&self, id: usize) -> f64 {
        self.probabilities[id]
    }

    pub fn weight(&self, id: usize) -> f64 {
        self.weights[id]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn corr_truth(&self) -> &[CorrelatedPair] {
        &self.topo.corr_truth
    }

    /// Edges flipped by arm `arm` of channel `channel`.
    pub fn mechanism_edges(&self, channel: usize, arm: usize) -> &[u32] {
        &self.topo.mechanism_edges[channel][arm]
    }

    /// XOR-reduced set of edges flipped by a set of fired `(channel, arm)` pairs, sorted.
    pub fn edges_of_fired(&self, fired: &[(u32, u32)]) -> Vec<usize> {
        let mut all: Vec<usize> = fired
            .iter()
            .flat_map(|&(c, a)| self.mechanism_edges(c as usize, a as usize))
            .map(|&e| e as usize)
            .collect();
        all.sort_unstable();
        let mut out = Vec::with_capacity(all.len());
        for e in all {
            if out.last() == Some(&e) {
                out.pop();
            } else {
                out.push(e);
            }
        }
        out
    }

    /// True if both graphs were built from the same topology.
    pub fn same_topology(&self, other: &DecodingGraph) -> bool {
        Arc::ptr_eq(&self.topo, &other.topo) || self.topo.edges == other.topo.edges
    }

    /// Copy with new edge probabilities (clamped to `(0, 0.5]`).
    pub fn with_probabilities(&self, probabilities: &[f64]) -> Result<Self, GraphError> {
        self.check_len(probabilities.len())?;
        let probabilities: Vec<f64> = probabilities
            .iter()
            .map(|&p| p.clamp(f64::MIN_POSITIVE, MAX_EDGE_PROB))
            .collect();
        let weights = probabilities
            .iter()
            .map(|&p| weight_from_prob(p).expect("clamped into (0, 0.5]"))
            .collect();
        Ok(Self {
            topo: Arc::clone(&self.topo),
            probabilities,
            weights,
        })
    }

    /// Copy with new edge weights; negative weights are floored at 0.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, GraphError> {
        self.check_len(weights.len())?;
        let weights: Vec<f64> = weights.into_iter().map(|w| w.max(0.0)).collect();
        let probabilities = weights.iter().map(|&w| prob_from_weight(w)).collect();
        Ok(Self {
            topo: Arc::clone(&self.topo),
            probabilities,
            weights,
        })
    }

    fn check_len(&self, got: usize) -> Result<(), GraphError> {
        if got == self.num_edges() {
            Ok(())
        } else {
            Err(GraphError::LengthMismatch {
                expected: self.num_edges(),
                got,
            })
        }
    }
}

/// Assigns type ids from explicit `etype` metadata; edges without one fall
/// back to a signature built from their endpoint displacement, or type 0
/// when coordinates are missing. Returns the number of types.
fn assign_types(edges: &mut [Edge], model: &DetectorErrorModel) -> usize {
    let explicit = &model.layout.edge_types;
    let coords = &model.layout.coords;
    let mut next = explicit.values().map(|&t| t + 1).max().unwrap_or(0);
    let mut derived: HashMap<String, u32> = HashMap::new();
    for e in edges.iter_mut() {
        if let Some(&t) = explicit.get(&(e.a, e.b)) {
            e.type_id = t;
            continue;
        }
        let sig = match (coords.get(&e.a), e.b.map(|b| coords.get(&b))) {
            (Some(_), None) => Some("B".to_string()),
            (Some(ca), Some(Some(cb))) => {
                let mut d = [cb[0] - ca[0], cb[1] - ca[1], cb[2] - ca[2]];
                if d.iter().find(|v| v.abs() > 1e-9).is_some_and(|v| *v < 0.0) {
                    d.iter_mut().for_each(|v| *v = -*v);
                }
                Some(format!("{:.3},{:.3},{:.3}", d[0], d[1], d[2]))
            }
            _ => None,
        };
        e.type_id = match sig {
            Some(s) => *derived.entry(s).or_insert_with(|| {
                next += 1;
                next - 1
            }),
            None => 0,
        };
    }
    edges
        .iter()
        .map(|e| e.type_id as usize + 1)
        .max()
        .unwrap_or(0)
}
