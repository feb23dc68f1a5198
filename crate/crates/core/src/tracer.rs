//! Matching statistics across decoded trials.
//!
//! A [`TraceStore`] counts how often each edge and each candidate edge pair
//! appear in decoder matchings. Frequencies become edge and pair probability
//! estimates for re-weighting.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::dem::DecodingGraph;
use crate::matcher::Matching;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("no trials recorded")]
    InsufficientData,
    #[error("stores were built for different decoding graphs")]
    GraphMismatch,
    #[error("stores track different pair sets")]
    PairSetMismatch,
    #[error("windowed stores cannot be merged")]
    WindowedMerge,
}

/// Unordered edge pair, lower id first.
pub type EdgePair = (u32, u32);

fn ordered(a: u32, b: u32) -> EdgePair {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Which edge pairs a store tracks.
#[derive(Clone, Debug)]
pub enum PairSet {
    All,
    Only(Arc<HashSet<EdgePair>>),
}

impl PairSet {
    /// Edges sharing a detector, edges joined by one further edge, and all
    /// pairs fired together by a single decomposed mechanism. The boundary
    /// node does not count as shared.
    pub fn local(graph: &DecodingGraph) -> Self {
        let n = graph.num_detectors();
        let mut set = HashSet::new();
        let det_ends = |e: usize| {
            let (a, b) = graph.endpoints(e);
            [a, b].into_iter().filter(move |&v| v < n)
        };
        // Edges touching each detector or any of its detector neighbours.
        let mut near: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (v, list) in near.iter_mut().enumerate() {
            for &(u, e) in graph.neighbors(v) {
                list.push(e);
                if (u as usize) < n {
                    list.extend(graph.neighbors(u as usize).iter().map(|x| x.1));
                }
            }
            list.sort_unstable();
            list.dedup();
        }
        for e in 0..graph.num_edges() {
            for v in det_ends(e) {
                for &f in &near[v] {
                    if f as usize != e {
                        set.insert(ordered(e as u32, f));
                    }
                }
            }
        }
        for c in graph.corr_truth() {
            set.insert(ordered(c.first as u32, c.second as u32));
        }
        Self::Only(Arc::new(set))
    }

    fn contains(&self, pair: &EdgePair) -> bool {
        match self {
            Self::All => true,
            Self::Only(s) => s.contains(pair),
        }
    }

    fn same(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::All, Self::All) => true,
            (Self::Only(a), Self::Only(b)) => Arc::ptr_eq(a, b) || a == b,
            _ => false,
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            Self::All => None,
            Self::Only(s) => Some(s.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }
}

#[derive(Clone, Debug)]
pub struct TraceStore {
    graph: DecodingGraph,
    pairs: PairSet,
    trials: u64,
    edge_counts: Vec<u64>,
    pair_counts: HashMap<EdgePair, u64>,
    window: Option<(usize, VecDeque<Vec<u32>>)>,
}

impl TraceStore {
    /// Store tracking the local candidate pairs of `graph`.
    pub fn new(graph: &DecodingGraph) -> Self {
        Self::with_pairs(graph, PairSet::local(graph))
    }

    pub fn with_pairs(graph: &DecodingGraph, pairs: PairSet) -> Self {
        Self {
            graph: graph.clone(),
            pairs,
            trials: 0,
            edge_counts: vec![0; graph.num_edges()],
            pair_counts: HashMap::new(),
            window: None,
        }
    }

    /// Keeps only the most recent `capacity` trials.
    pub fn windowed(mut self, capacity: usize) -> Self {
        self.window = Some((capacity.max(1), VecDeque::new()));
        self
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn edge_count(&self, edge: usize) -> u64 {
        self.edge_counts[edge]
    }

    pub fn edge_counts(&self) -> &[u64] {
        &self.edge_counts
    }

    pub fn pair_count(&self, a: u32, b: u32) -> u64 {
        self.pair_counts.get(&ordered(a, b)).copied().unwrap_or(0)
    }

    pub fn pair_counts(&self) -> &HashMap<EdgePair, u64> {
        &self.pair_counts
    }

    pub fn pair_set(&self) -> &PairSet {
        &self.pairs
    }

    pub fn record(&mut self, matching: &Matching) {
        let edges: Vec<u32> = matching.edges.iter().map(|&e| e as u32).collect();
        self.record_edges(edges);
    }

    /// Records one trial whose matching used `edges` (distinct ids).
    pub fn record_edges(&mut self, edges: Vec<u32>) {
        self.apply(&edges, true);
        if let Some((cap, ring)) = &mut self.window {
            ring.push_back(edges);
            if ring.len() > *cap {
                let old = ring.pop_front().unwrap();
                self.apply(&old, false);
            }
        }
    }

    fn apply(&mut self, edges: &[u32], add: bool) {
        let step = |c: &mut u64| {
            if add {
                *c += 1
            } else {
                *c -= 1
            }
        };
        step(&mut self.trials);
        for &e in edges {
            step(&mut self.edge_counts[e as usize]);
        }
        for (i, &a) in edges.iter().enumerate() {
            for &b in &edges[i + 1..] {
                let key = ordered(a, b);
                if self.pairs.contains(&key) {
                    let c = self.pair_counts.entry(key).or_insert(0);
                    step(c);
                    if *c == 0 {
                        self.pair_counts.remove(&key);
                    }
                }
            }
        }
    }

    /// `c(e)/T`, with never-seen edges at `1/(2T)`.
    pub fn estimate_edge_probs(&self) -> Result<Vec<f64>, TraceError> {
        if self.trials == 0 {
            return Err(TraceError::InsufficientData);
        }
        let t = self.trials as f64;
        Ok(self
            .edge_counts
            .iter()
            .map(|&c| if c == 0 { 0.5 / t } else { c as f64 / t })
            .collect())
    }

    /// `c(e_i, e_j)/T` over pairs seen at least once.
    pub fn estimate_pair_probs(&self) -> Result<PairProbs, TraceError> {
        if self.trials == 0 {
            return Err(TraceError::InsufficientData);
        }
        let t = self.trials as f64;
        Ok(PairProbs::from_iter(
            self.graph.num_edges(),
            self.pair_counts.iter().map(|(&k, &c)| (k, c as f64 / t)),
        ))
    }

    /// Sums counts of two stores over the same graph and pair set.
    pub fn merge(&mut self, other: &TraceStore) -> Result<(), TraceError> {
        if !self.graph.same_topology(&other.graph) {
            return Err(TraceError::GraphMismatch);
        }
        if !self.pairs.same(&other.pairs) {
            return Err(TraceError::PairSetMismatch);
        }
        if self.window.is_some() || other.window.is_some() {
            return Err(TraceError::WindowedMerge);
        }
        self.trials += other.trials;
        for (a, b) in self.edge_counts.iter_mut().zip(&other.edge_counts) {
            *a += b;
        }
        for (k, c) in &other.pair_counts {
            *self.pair_counts.entry(*k).or_insert(0) += c;
        }
        Ok(())
    }

    /// Approximate heap footprint of the counters.
    pub fn memory_bytes(&self) -> usize {
        self.edge_counts.len() * 8 + self.pair_counts.capacity() * (8 + 8 + 8)
    }

    pub fn write_edge_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "edge_id,count")?;
        for (e, c) in self.edge_counts.iter().enumerate() {
            writeln!(w, "{e},{c}")?;
        }
        Ok(())
    }

    pub fn write_pair_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "edge_i,edge_j,count")?;
        let mut rows: Vec<_> = self.pair_counts.iter().collect();
        rows.sort_unstable();
        for ((a, b), c) in rows {
            writeln!(w, "{a},{b},{c}")?;
        }
        Ok(())
    }

    /// Estimated against ground-truth pair probabilities, for every pair
    /// with a nonzero value in either.
    pub fn write_heatmap_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "edge_i,edge_j,estimated,truth")?;
        let t = self.trials.max(1) as f64;
        let mut rows: HashMap<EdgePair, (f64, f64)> = HashMap::new();
        for (&k, &c) in &self.pair_counts {
            rows.entry(k).or_default().0 = c as f64 / t;
        }
        for c in self.graph.corr_truth() {
            rows.entry(ordered(c.first as u32, c.second as u32))
                .or_default()
                .1 = c.probability;
        }
        let mut rows: Vec<_> = rows.into_iter().collect();
        rows.sort_unstable_by_key(|r| r.0);
        for ((a, b), (est, truth)) in rows {
            writeln!(w, "{a},{b},{est},{truth}")?;
        }
        Ok(())
    }
}

/// Sparse symmetric pair probabilities with per-edge adjacency.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairProbs {
    map: HashMap<EdgePair, f64>,
    by_edge: Vec<Vec<(u32, f64)>>,
}

impl PairProbs {
    pub fn from_iter(num_edges: usize, items: impl IntoIterator<Item = (EdgePair, f64)>) -> Self {
        let mut map = HashMap::new();
        let mut by_edge = vec![Vec::new(); num_edges];
        for ((a, b), p) in items {
            if a == b || p == 0.0 {
                continue;
            }
            let key = ordered(a, b);
            map.insert(key, p);
        }
        for (&(a, b), &p) in &map {
            by_edge[a as usize].push((b, p));
            by_edge[b as usize].push((a, p));
        }
        for list in &mut by_edge {
            list.sort_unstable_by_key(|x| x.0);
        }
        Self { map, by_edge }
    }

    /// Ground-truth pair probabilities of a graph.
    pub fn truth(graph: &DecodingGraph) -> Self {
        Self::from_iter(
            graph.num_edges(),
            graph
                .corr_truth()
                .iter()
                .map(|c| ((c.first as u32, c.second as u32), c.probability)),
        )
    }

    pub fn get(&self, a: u32, b: u32) -> f64 {
        self.map.get(&ordered(a, b)).copied().unwrap_or(0.0)
    }

    /// Partners of `edge` with their pair probability, sorted by id.
    pub fn partners(&self, edge: usize) -> &[(u32, f64)] {
        self.by_edge.get(edge).map_or(&[], |v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgePair, f64)> + '_ {
        self.map.iter().map(|(&k, &v)| (k, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::{parse_dem, weight_from_prob};
    use crate::matcher::Decoder;
    use crate::sampler::Sampler;
    use crate::surfgen::{generate_surface_pheno, SurfaceCodeSpec};
    use proptest::prelude::*;

    fn chain() -> DecodingGraph {
        // D0-D1-D2-D3 with boundary at both ends; e0=B-D0 ... e4=D3-B
        let text =
            "error(0.1) D0\nerror(0.1) D0 D1\nerror(0.1) D1 D2\nerror(0.1) D2 D3\nerror(0.1) D3";
        DecodingGraph::build(&parse_dem(text).unwrap()).unwrap()
    }

    fn m(edges: &[usize]) -> Matching {
        Matching {
            edges: edges.to_vec(),
            ..Default::default()
        }
    }

    #[test]
    fn local_pairs_are_within_two_steps() {
        let g = chain();
        let PairSet::Only(s) = PairSet::local(&g) else {
            panic!()
        };
        assert!(s.contains(&(0, 1)));
        assert!(s.contains(&(0, 2)));
        assert!(!s.contains(&(0, 3)));
        assert!(!s.contains(&(0, 4)));
        assert!(s.contains(&(2, 4)));
    }

    #[test]
    fn recording_counts() {
        let g = chain();
        let mut st = TraceStore::new(&g);
        st.record(&m(&[]));
        assert_eq!(st.trials(), 1);
        st.record(&m(&[0, 1]));
        assert_eq!(
            (st.edge_count(0), st.edge_count(1), st.pair_count(0, 1)),
            (1, 1, 1)
        );
        st.record(&m(&[0, 4]));
        assert_eq!(st.pair_count(0, 4), 0);
        for _ in 0..10 {
            st.record(&m(&[2]));
        }
        assert_eq!(st.edge_count(2), 10);
        assert_eq!(st.trials(), 13);
    }

    #[test]
    fn estimates() {
        let g = chain();
        let mut st = TraceStore::new(&g);
        assert_eq!(
            st.estimate_edge_probs().unwrap_err(),
            TraceError::InsufficientData
        );
        for i in 0..1000 {
            let mut edges = vec![];
            if i < 250 {
                edges.push(1);
            }
            if i < 30 {
                edges.push(2);
            }
            st.record(&m(&edges));
        }
        let p = st.estimate_edge_probs().unwrap();
        assert_eq!(p[1], 0.25);
        assert_eq!(p[0], 0.0005);
        let pp = st.estimate_pair_probs().unwrap();
        assert!((pp.get(1, 2) - 0.03).abs() < 1e-15);
        assert_eq!(pp.len(), 1);
    }

    #[test]
    fn no_cooccurrence_gives_empty_pairs() {
        let g = chain();
        let mut st = TraceStore::new(&g);
        st.record(&m(&[0]));
        st.record(&m(&[3]));
        assert!(st.estimate_pair_probs().unwrap().is_empty());
    }

    #[test]
    fn window_keeps_recent_trials() {
        let g = chain();
        let mut st = TraceStore::new(&g).windowed(3);
        for e in [0, 0, 1, 1, 2] {
            st.record(&m(&[e]));
        }
        assert_eq!(st.trials(), 3);
        assert_eq!(st.edge_counts(), &[0, 2, 1, 0, 0]);
        // Same result as re-accumulating the last three trials.
        let mut fresh = TraceStore::new(&g);
        for e in [1, 1, 2] {
            fresh.record(&m(&[e]));
        }
        assert_eq!(fresh.edge_counts(), st.edge_counts());
        let other = TraceStore::new(&g);
        assert_eq!(st.merge(&other).unwrap_err(), TraceError::WindowedMerge);
    }

    #[test]
    fn merge_rejects_other_graph() {
        let mut a = TraceStore::new(&chain());
        let other = DecodingGraph::build(&parse_dem("error(0.1) D0").unwrap()).unwrap();
        let b = TraceStore::new(&other);
        assert_eq!(a.merge(&b).unwrap_err(), TraceError::GraphMismatch);
    }

    #[test]
    fn csv_exports() {
        let g = chain();
        let mut st = TraceStore::new(&g);
        st.record(&m(&[0, 1]));
        let mut out = Vec::new();
        st.write_edge_csv(&mut out).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("edge_id,count\n0,1\n1,1\n2,0\n"));
        let mut out = Vec::new();
        st.write_pair_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "edge_i,edge_j,count\n0,1,1\n"
        );
    }

    #[test]
    fn correlated_arm_frequency_matches_mechanism() {
        // Each arm is matched exactly by construction: isolated edges, no ambiguity.
        let text = "channel { error(0.05) D0 ^ D1 error(0.02) D0 error(0.02) D1 }";
        let model = parse_dem(text).unwrap();
        let g = DecodingGraph::build(&model).unwrap();
        let mut st = TraceStore::new(&g);
        let s = Sampler::new(&model, 4).keep_fired(true);
        let t = 200_000u64;
        for shot in s.iter(t) {
            st.record_edges(
                g.edges_of_fired(shot.fired.as_ref().unwrap())
                    .iter()
                    .map(|&e| e as u32)
                    .collect(),
            );
        }
        let pp = st.estimate_pair_probs().unwrap();
        let sigma = (0.05 * 0.95 / t as f64).sqrt();
        assert!((pp.get(0, 1) - 0.05).abs() < 5.0 * sigma);
    }

    #[test]
    fn decoded_estimates_converge() {
        // Oracle-weight decoder at low noise: estimate error shrinks with T.
        let model = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.005)).unwrap();
        let g = DecodingGraph::build(&model).unwrap();
        let dec = Decoder::new(g.clone());
        let sampler = Sampler::new(&model, 8);
        let mut st = TraceStore::new(&g);
        let mut errors = Vec::new();
        let mut i = 0;
        for t in [1_000u64, 10_000, 100_000] {
            while i < t {
                st.record(&dec.decode(&sampler.sample(i).detectors).unwrap());
                i += 1;
            }
            let p = st.estimate_edge_probs().unwrap();
            let mse: f64 = (0..g.num_edges())
                .map(|e| (weight_from_prob(p[e].min(0.5)).unwrap() - g.weight(e)).powi(2))
                .sum::<f64>()
                / g.num_edges() as f64;
            errors.push(mse);
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    }

    proptest! {
        #[test]
        fn merge_equals_serial(
            trials in prop::collection::vec(prop::collection::btree_set(0usize..5, 0..4), 0..40),
            split in 0usize..40,
        ) {
            let g = chain();
            let split = split.min(trials.len());
            let mut serial = TraceStore::new(&g);
            let mut a = TraceStore::with_pairs(&g, serial.pair_set().clone());
            let mut b = TraceStore::with_pairs(&g, serial.pair_set().clone());
            for (i, t) in trials.iter().enumerate() {
                let mm = m(&t.iter().copied().collect::<Vec<_>>());
                serial.record(&mm);
                if i < split { a.record(&mm) } else { b.record(&mm) }
            }
            let mut ab = a.clone();
            ab.merge(&b).unwrap();
            let mut ba = b.clone();
            ba.merge(&a).unwrap();
            prop_assert_eq!(ab.trials(), serial.trials());
            prop_assert_eq!(ab.edge_counts(), serial.edge_counts());
            prop_assert_eq!(ab.pair_counts(), serial.pair_counts());
            prop_assert_eq!(ba.pair_counts(), ab.pair_counts());
            for e in 0..g.num_edges() {
                prop_assert!(serial.edge_count(e) <= serial.trials());
            }
            for (&(x, y), &c) in serial.pair_counts() {
                prop_assert!(c <= serial.edge_count(x as usize).min(serial.edge_count(y as usize)));
            }
            let empty = TraceStore::with_pairs(&g, serial.pair_set().clone());
            let mut id = serial.clone();
            id.merge(&empty).unwrap();
            prop_assert_eq!(id.edge_counts(), serial.edge_counts());
        }
    }
}
