//! Re-weighting the decoding graph from tracer estimates.
//!
//! Alignment replaces every edge weight by the weight of its observed
//! matching frequency. Correlation re-weighting runs on difficult shots
//! only: decode once, adjust weights given the first matching, decode again.

use thiserror::Error;

use crate::dem::{DecodingGraph, GraphError};
use crate::matcher::{decode, Decoder, MatchError, Matching};
use crate::tracer::PairProbs;

#[derive(Debug, Error, PartialEq)]
pub enum ReweightError {
    #[error("expected {expected} edge estimates, got {got}")]
    MissingEstimates { expected: usize, got: usize },
    #[error("window of {window} trials is smaller than the {min_trials} trials required")]
    WindowTooSmall { window: usize, min_trials: u64 },
    #[error("correlation scale must be finite, got {0}")]
    Scale(f64),
    #[error("alignment needs at least one round")]
    Rounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelationMode {
    Off,
    Heuristic,
    Nn,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReweightPolicy {
    /// Look-back window in trials; `None` keeps every trial.
    pub window: Option<usize>,
    pub min_trials: u64,
    pub mode: CorrelationMode,
    /// Trigger threshold on the number of flipped detectors.
    pub tau: usize,
    /// Pair-ratio floor on `p(e_i)`; `None` uses `10/(2T)`.
    pub epsilon: Option<f64>,
    pub scale: f64,
    /// Alignment rounds; each traces with the previous round's weights.
    pub rounds: usize,
}

impl Default for ReweightPolicy {
    fn default() -> Self {
        Self {
            window: None,
            min_trials: 1,
            mode: CorrelationMode::Off,
            tau: 0,
            epsilon: None,
            scale: 1.0,
            rounds: 1,
        }
    }
}

impl ReweightPolicy {
    pub fn validate(&self) -> Result<(), ReweightError> {
        if let Some(window) = self.window {
            if (window as u64) < self.min_trials {
                return Err(ReweightError::WindowTooSmall {
                    window,
                    min_trials: self.min_trials,
                });
            }
        }
        if !self.scale.is_finite() {
            return Err(ReweightError::Scale(self.scale));
        }
        if self.rounds == 0 {
            return Err(ReweightError::Rounds);
        }
        Ok(())
    }

    /// Floor applied to `p(e_i)` after `trials` traced trials.
    pub fn epsilon_for(&self, trials: u64) -> f64 {
        self.epsilon.unwrap_or(10.0 / (2.0 * trials.max(1) as f64))
    }
}

/// Same topology, weights from estimated probabilities clamped to `(0, 0.5]`.
pub fn alignment_reweight(
    graph: &DecodingGraph,
    edge_probs: &[f64],
) -> Result<DecodingGraph, ReweightError> {
    graph.with_probabilities(edge_probs).map_err(|e| match e {
        GraphError::LengthMismatch { expected, got } => {
            ReweightError::MissingEstimates { expected, got }
        }
        other => unreachable!("{other}"),
    })
}

/// Alignment that only moves edges with evidence: edges never matched in
/// `trials` keep their current probability, the rest take `count / trials`.
pub fn realign_seen(
    graph: &DecodingGraph,
    counts: &[u64],
    trials: u64,
) -> Result<DecodingGraph, ReweightError> {
    if counts.len() != graph.num_edges() {
        return Err(ReweightError::MissingEstimates {
            expected: graph.num_edges(),
            got: counts.len(),
        });
    }
    let probs: Vec<f64> = counts
        .iter()
        .zip(graph.probabilities())
        .map(|(&c, &p)| {
            if c == 0 || trials == 0 {
                p
            } else {
                c as f64 / trials as f64
            }
        })
        .collect();
    alignment_reweight(graph, &probs)
}

pub fn difficulty_trigger(dets: &[u32], tau: usize) -> bool {
    dets.len() >= tau
}

/// Smallest-error threshold for a target trigger rate: returns the `tau`
/// whose rate `P(count >= tau)` lies closest to `target`, preferring rates
/// inside `[lo, hi]`.
pub fn calibrate_tau(counts: &[usize], target: f64, lo: f64, hi: f64) -> (usize, f64) {
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; max + 2];
    for &c in counts {
        hist[c] += 1;
    }
    let n = counts.len().max(1) as f64;
    let mut best = (max + 1, 0.0);
    let mut best_key = (true, f64::INFINITY);
    let mut at_least = 0u64;
    for tau in (1..=max + 1).rev() {
        at_least += hist[tau];
        let rate = at_least as f64 / n;
        let key = (!(lo..=hi).contains(&rate), (rate - target).abs());
        if key < best_key {
            best = (tau, rate);
            best_key = key;
        }
    }
    best
}

/// Adjusts weights given a first-pass matching.
pub trait CorrReweighter: Sync {
    fn reweight(&self, graph: &DecodingGraph, first: &Matching) -> DecodingGraph;
}

/// Pair-statistics correction: each edge's weight is lowered by
/// `p(e_i, e_j)/p(e_i)` for every matched partner `e_i` and raised by the
/// same ratio for every unmatched partner, then floored at zero.
#[derive(Clone, Debug)]
pub struct Heuristic {
    /// Per edge `i`: partners `j` with `p(e_i, e_j)/p(e_i)`.
    ratios: Vec<Vec<(u32, f64)>>,
    /// Per edge `j`: sum of ratios over all partners, as if none were matched.
    unmatched: Vec<f64>,
    scale: f64,
}

impl Heuristic {
    pub fn new(pairs: &PairProbs, edge_probs: &[f64], epsilon: f64, scale: f64) -> Self {
        let ne = edge_probs.len();
        let mut ratios = vec![Vec::new(); ne];
        let mut unmatched = vec![0.0; ne];
        for (i, list) in ratios.iter_mut().enumerate() {
            let pi = edge_probs[i];
            if pi < epsilon || pi <= 0.0 {
                continue;
            }
            for &(j, pij) in pairs.partners(i) {
                let r = pij / pi;
                list.push((j, r));
                unmatched[j as usize] += r;
            }
        }
        Self {
            ratios,
            unmatched,
            scale,
        }
    }

    /// New weights for `weights` given matched edge ids.
    pub fn adjusted(&self, weights: &[f64], matched: &[usize]) -> Vec<f64> {
        let mut delta = self.unmatched.clone();
        for &i in matched {
            for &(j, r) in &self.ratios[i] {
                delta[j as usize] -= 2.0 * r;
            }
        }
        weights
            .iter()
            .zip(delta)
            .map(|(w, d)| (w + self.scale * d).max(0.0))
            .collect()
    }
}

impl CorrReweighter for Heuristic {
    fn reweight(&self, graph: &DecodingGraph, first: &Matching) -> DecodingGraph {
        graph
            .with_weights(self.adjusted(graph.weights(), &first.edges))
            .expect("weight vector matches the graph")
    }
}

/// One-shot form of [`Heuristic`].
pub fn heuristic_corr_reweight(
    graph: &DecodingGraph,
    matching: &Matching,
    pairs: &PairProbs,
    edge_probs: &[f64],
    epsilon: f64,
    scale: f64,
) -> DecodingGraph {
    Heuristic::new(pairs, edge_probs, epsilon, scale).reweight(graph, matching)
}

/// Decodes once; on a difficult shot with a re-weighter, decodes again on the
/// adjusted graph. Edges and observable masks always refer to `decoder`'s graph.
pub fn two_pass_decode(
    decoder: &Decoder,
    dets: &[u32],
    tau: usize,
    corr: Option<&dyn CorrReweighter>,
) -> Result<Matching, MatchError> {
    let first = decoder.decode(dets)?;
    match corr {
        Some(c) if difficulty_trigger(dets, tau) => {
            decode(&c.reweight(decoder.graph(), &first), dets)
        }
        _ => Ok(first),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::{parse_dem, weight_from_prob, DetectorErrorModel};
    use crate::matcher::{exact_oracle_decode, predict_observables};
    use crate::surfgen::{generate_surface_pheno, SurfaceCodeSpec};
    use proptest::prelude::*;

    fn chain() -> DecodingGraph {
        let text = "error(0.01) D0\nerror(0.01) D0 D1\nerror(0.01) D1 D2\nerror(0.01) D2";
        DecodingGraph::build(&parse_dem(text).unwrap()).unwrap()
    }

    #[test]
    fn alignment_examples() {
        let g = chain();
        let same = alignment_reweight(&g, g.probabilities()).unwrap();
        for e in 0..g.num_edges() {
            assert!((same.weight(e) - g.weight(e)).abs() < 1e-12);
        }
        let a = alignment_reweight(&g, &[0.25, 0.6, 0.01, 0.01]).unwrap();
        assert!((a.weight(0) - 1.0986122887).abs() < 1e-9);
        assert_eq!(a.weight(1), 0.0);
        assert_eq!(
            alignment_reweight(&g, &[0.1]).unwrap_err(),
            ReweightError::MissingEstimates {
                expected: 4,
                got: 1
            }
        );
    }

    #[test]
    fn realign_keeps_unseen_edges() {
        let g = chain().with_weights(vec![2.0, 3.0, 4.0, 5.0]).unwrap();
        let a = realign_seen(&g, &[0, 250, 0, 1000], 1000).unwrap();
        assert_eq!(a.weight(0), 2.0);
        assert!((a.weight(1) - 3f64.ln()).abs() < 1e-12);
        assert_eq!(a.weight(2), 4.0);
        assert_eq!(a.weight(3), 0.0);
        assert!(realign_seen(&g, &[1], 10).is_err());
    }

    #[test]
    fn eq_one_worked_example() {
        // e_j = 2 at weight 5; e0 matched with ratio 0.2, e1 unmatched with 0.1.
        let g = chain().with_weights(vec![1.0, 1.0, 5.0, 1.0]).unwrap();
        let pairs = PairProbs::from_iter(4, [((0, 2), 0.002), ((1, 2), 0.001)]);
        let probs = [0.01, 0.01, 0.5, 0.5];
        let m = Matching {
            edges: vec![0],
            ..Default::default()
        };
        let out = heuristic_corr_reweight(&g, &m, &pairs, &probs, 0.0, 1.0);
        assert!((out.weight(2) - 4.9).abs() < 1e-12);
    }

    #[test]
    fn symmetric_partners() {
        let g = chain().with_weights(vec![1.0, 1.0, 5.0, 1.0]).unwrap();
        let pairs = PairProbs::from_iter(4, [((0, 2), 0.003), ((1, 2), 0.003), ((3, 2), 0.003)]);
        let probs = [0.01, 0.01, 0.5, 0.01];
        let m = Matching {
            edges: vec![0, 1, 3],
            ..Default::default()
        };
        let out = heuristic_corr_reweight(&g, &m, &pairs, &probs, 0.0, 1.0);
        assert!((out.weight(2) - (5.0 - 3.0 * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn empty_pairs_change_nothing() {
        let g = chain();
        let m = Matching {
            edges: vec![1],
            ..Default::default()
        };
        let out =
            heuristic_corr_reweight(&g, &m, &PairProbs::default(), g.probabilities(), 0.0, 1.0);
        assert_eq!(out.weights(), g.weights());
        let dec = Decoder::new(g.clone());
        let h = Heuristic::new(&PairProbs::default(), g.probabilities(), 0.0, 1.0);
        for dets in [vec![], vec![0], vec![0, 2], vec![0, 1, 2]] {
            assert_eq!(
                two_pass_decode(&dec, &dets, 0, Some(&h)).unwrap(),
                dec.decode(&dets).unwrap()
            );
        }
    }

    #[test]
    fn epsilon_skips_rare_edges() {
        let g = chain().with_weights(vec![1.0, 1.0, 5.0, 1.0]).unwrap();
        let pairs = PairProbs::from_iter(4, [((0, 2), 0.002)]);
        let m = Matching {
            edges: vec![0],
            ..Default::default()
        };
        let out = heuristic_corr_reweight(&g, &m, &pairs, &[0.01, 0.1, 0.5, 0.1], 0.05, 1.0);
        assert_eq!(out.weight(2), 5.0);
    }

    #[test]
    fn trigger() {
        assert!(!difficulty_trigger(&[], 1));
        assert!(difficulty_trigger(&[1, 2, 3, 4], 4));
        assert!(!difficulty_trigger(&[1, 2, 3], 4));
    }

    #[test]
    fn tau_calibration_prefers_band() {
        // Counts: 70% zeros, 15% twos, 10% fours, 5% sixes.
        let mut counts = vec![0; 70];
        counts.extend(vec![2; 15]);
        counts.extend(vec![4; 10]);
        counts.extend(vec![6; 5]);
        let (tau, rate) = calibrate_tau(&counts, 0.15, 0.10, 0.20);
        // Thresholds 3 and 4 select the same shots; the larger is returned.
        assert_eq!(tau, 4);
        assert!((rate - 0.15).abs() < 1e-12);
    }

    #[test]
    fn policy_validation() {
        let p = ReweightPolicy {
            window: Some(10),
            min_trials: 100,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(ReweightPolicy::default().validate().is_ok());
        assert_eq!(ReweightPolicy::default().epsilon_for(1000), 0.005);
    }

    /// Detectors and observables of fired `(channel, arm)` pairs.
    fn syndrome_of(model: &DetectorErrorModel, fired: &[(usize, usize)]) -> (Vec<u32>, u64) {
        let mut dets = Vec::new();
        let mut obs = 0;
        for &(c, a) in fired {
            let (d, o) = model.channels[c].mechanisms[a].symptoms();
            for x in d {
                if let Some(pos) = dets.iter().position(|&y| y == x) {
                    dets.remove(pos);
                } else {
                    dets.push(x);
                }
            }
            obs ^= o;
        }
        dets.sort_unstable();
        (dets, obs)
    }

    #[test]
    fn y_error_correlation_rescues_x_matching() {
        // A Y error plus one other fault. The X-check subgraph sees the Y's Z
        // part, which implies its X part; lowering that X edge breaks ties in
        // the Z-check subgraph toward the boundary the Y error actually hit.
        let d = 3;
        let model = generate_surface_pheno(&SurfaceCodeSpec::new(d, 0.01)).unwrap();
        let g = DecodingGraph::build(&model).unwrap();
        let dec = Decoder::new(g.clone());
        let h = Heuristic::new(&PairProbs::truth(&g), g.probabilities(), 0.0, 1.0);
        let per_round = d * d + (d * d - 1);
        let (mut rescued, mut broken) = (0, 0);
        for qy in 0..d * d {
            let y = (per_round + qy, 1);
            for (c, a, _) in model.mechanisms() {
                if c == y.0 {
                    continue;
                }
                let (dets, obs) = syndrome_of(&model, &[y, (c, a)]);
                let first = dec.decode(&dets).unwrap();
                let second = two_pass_decode(&dec, &dets, 0, Some(&h)).unwrap();
                assert_eq!(second.syndrome(&g), dets);
                let reweighted = h.reweight(&g, &first);
                let oracle = exact_oracle_decode(&reweighted, &dets).unwrap();
                let second_w: f64 = second.edges.iter().map(|&e| reweighted.weight(e)).sum();
                assert!((second_w - oracle.weight).abs() < 1e-9);
                let ok1 = predict_observables(&g, &first) == obs;
                let ok2 = predict_observables(&g, &second) == obs;
                rescued += usize::from(!ok1 && ok2);
                broken += usize::from(ok1 && !ok2);
            }
        }
        assert!(rescued > 0);
        assert!(rescued > broken, "{rescued} rescued, {broken} broken");
    }

    proptest! {
        #[test]
        fn adjustment_sign_follows_partner_sums(
            probs in prop::collection::vec(0.001f64..0.4, 6),
            pair_p in prop::collection::vec(0.0f64..0.001, 15),
            matched_bits in 0u8..64,
            j in 0usize..6,
        ) {
            let mut items = Vec::new();
            let mut k = 0;
            for a in 0..6u32 {
                for b in a + 1..6 {
                    items.push(((a, b), pair_p[k]));
                    k += 1;
                }
            }
            let pairs = PairProbs::from_iter(6, items);
            let matched: Vec<usize> = (0..6).filter(|i| matched_bits >> i & 1 == 1).collect();
            let weights = vec![50.0; 6];
            let h = Heuristic::new(&pairs, &probs, 0.0, 1.0);
            let out = h.adjusted(&weights, &matched);
            let (mut in_m, mut out_m) = (0.0, 0.0);
            for (i, pi) in probs.iter().enumerate() {
                if i == j { continue; }
                let r = pairs.get(i as u32, j as u32) / pi;
                if matched.contains(&i) { in_m += r } else { out_m += r }
            }
            prop_assert!((out[j] - (50.0 - in_m + out_m)).abs() < 1e-9);
            if in_m > out_m { prop_assert!(out[j] < 50.0) }
            if in_m < out_m { prop_assert!(out[j] > 50.0) }
        }
    }

    #[test]
    fn weight_floor() {
        let g = chain().with_weights(vec![0.1, 0.1, 0.1, 0.1]).unwrap();
        let pairs = PairProbs::from_iter(4, [((0, 1), 0.009)]);
        let m = Matching {
            edges: vec![0],
            ..Default::default()
        };
        let out = heuristic_corr_reweight(&g, &m, &pairs, &[0.01, 0.01, 0.01, 0.01], 0.0, 1.0);
        assert_eq!(out.weight(1), 0.0);
        assert!(weight_from_prob(out.probability(1)).unwrap().abs() < 1e-12);
    }
}
