//! Detector error models and the decoding graphs built from them.
//!
//! A [`DetectorErrorModel`] lists independent [`ExclusiveChannel`]s. Each
//! channel holds mutually exclusive [`Mechanism`]s (at most one fires per
//! shot), and each mechanism flips a set of detectors and observables. A
//! mechanism may be decomposed into several [`Component`]s, each of which
//! becomes one edge of the [`DecodingGraph`].

mod graph;
mod text;

pub use graph::{CorrelatedPair, DecodingGraph, Edge, GraphError, BOUNDARY};
pub use text::{parse_dem, serialize_dem, ParseError, ParseErrorKind};

use std::collections::BTreeMap;

use thiserror::Error;

/// Bit mask of logical observables; bit `k` is `L<k>`.
pub type ObsMask = u64;

/// Largest number of observables representable in an [`ObsMask`].
pub const MAX_OBSERVABLES: usize = 64;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("detector D{index} out of range for a model with {num_detectors} detectors")]
    DetectorOutOfRange { index: u32, num_detectors: usize },
    #[error("observable L{index} out of range for a model with {num_observables} observables")]
    ObservableOutOfRange { index: u32, num_observables: usize },
    #[error("too many observables: {0} (at most 64 supported)")]
    TooManyObservables(usize),
    #[error("channel {channel} is empty")]
    EmptyChannel { channel: usize },
    #[error("channel {channel} has total probability {total} > 1")]
    ChannelOverfull { channel: usize, total: f64 },
    #[error("mechanism components overlap on detector D{0}")]
    OverlappingComponents(u32),
}

/// One piece of a (possibly decomposed) error mechanism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Sorted detector indices.
    pub detectors: Vec<u32>,
    pub observables: ObsMask,
}

impl Component {
    pub fn new(mut detectors: Vec<u32>, observables: ObsMask) -> Self {
        detectors.sort_unstable();
        Self {
            detectors,
            observables,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mechanism {
    pub probability: f64,
    pub components: Vec<Component>,
    /// Data-qubit row the mechanism acts on, for generated surface codes.
    pub row: Option<u32>,
}

impl Mechanism {
    pub fn new(probability: f64, components: Vec<Component>) -> Self {
        Self {
            probability,
            components,
            row: None,
        }
    }

    pub fn with_row(mut self, row: u32) -> Self {
        self.row = Some(row);
        self
    }

    /// Detector flips and observable flips caused when this mechanism fires.
    pub fn symptoms(&self) -> (Vec<u32>, ObsMask) {
        let mut dets: Vec<u32> = self
            .components
            .iter()
            .flat_map(|c| c.detectors.iter().copied())
            .collect();
        dets.sort_unstable();
        let mut out = Vec::with_capacity(dets.len());
        for d in dets {
            if out.last() == Some(&d) {
                out.pop();
            } else {
                out.push(d);
            }
        }
        let obs = self.components.iter().fold(0, |m, c| m ^ c.observables);
        (out, obs)
    }
}

/// Mutually exclusive alternatives: at most one mechanism fires per shot.
#[derive(Clone, Debug, PartialEq)]
pub struct ExclusiveChannel {
    pub mechanisms: Vec<Mechanism>,
}

impl ExclusiveChannel {
    pub fn single(mechanism: Mechanism) -> Self {
        Self {
            mechanisms: vec![mechanism],
        }
    }

    pub fn total_probability(&self) -> f64 {
        self.mechanisms.iter().map(|m| m.probability).sum()
    }
}

/// Spatial layout annotations carried alongside the noise model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layout {
    /// Detector coordinates `(x, y, t)`.
    pub coords: BTreeMap<u32, [f64; 3]>,
    /// Edge type ids keyed by endpoints `(a, b)` with `b = None` for the boundary.
    pub edge_types: BTreeMap<(u32, Option<u32>), u32>,
}

impl Layout {
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty() && self.edge_types.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct DetectorErrorModel {
    pub num_detectors: usize,
    pub num_observables: usize,
    pub channels: Vec<ExclusiveChannel>,
    pub layout: Layout,
}

impl DetectorErrorModel {
    pub fn new(num_detectors: usize, num_observables: usize) -> Self {
        Self {
            num_detectors,
            num_observables,
            ..Default::default()
        }
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_observables > MAX_OBSERVABLES {
            return Err(ModelError::TooManyObservables(self.num_observables));
        }
        for (ci, ch) in self.channels.iter().enumerate() {
            if ch.mechanisms.is_empty() {
                return Err(ModelError::EmptyChannel { channel: ci });
            }
            for m in &ch.mechanisms {
                if !(m.probability > 0.0 && m.probability < 1.0) {
                    return Err(ModelError::ProbabilityOutOfRange(m.probability));
                }
                let mut seen: Vec<u32> = Vec::new();
                for c in &m.components {
                    for &d in &c.detectors {
                        if d as usize >= self.num_detectors {
                            return Err(ModelError::DetectorOutOfRange {
                                index: d,
                                num_detectors: self.num_detectors,
                            });
                        }
                        if seen.contains(&d) {
                            return Err(ModelError::OverlappingComponents(d));
                        }
                        seen.push(d);
                    }
                    if self.num_observables < MAX_OBSERVABLES
                        && c.observables >> self.num_observables != 0
                    {
                        return Err(ModelError::ObservableOutOfRange {
                            index: 63 - c.observables.leading_zeros(),
                            num_observables: self.num_observables,
                        });
                    }
                }
            }
            let total = ch.total_probability();
            if total > 1.0 + 1e-12 {
                return Err(ModelError::ChannelOverfull { channel: ci, total });
            }
        }
        Ok(())
    }

    pub fn num_mechanisms(&self) -> usize {
        self.channels.iter().map(|c| c.mechanisms.len()).sum()
    }

    /// Iterates `(channel, arm, mechanism)`.
    pub fn mechanisms(&self) -> impl Iterator<Item = (usize, usize, &Mechanism)> {
        self.channels.iter().enumerate().flat_map(|(ci, ch)| {
            ch.mechanisms
                .iter()
                .enumerate()
                .map(move |(ai, m)| (ci, ai, m))
        })
    }

    /// Returns a copy with every mechanism probability replaced by `f(mechanism)`.
    pub fn map_probabilities(&self, mut f: impl FnMut(&Mechanism) -> f64) -> Self {
        let mut out = self.clone();
        for ch in &mut out.channels {
            for m in &mut ch.mechanisms {
                m.probability = f(m);
            }
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("probability {0} outside the open interval (0, 1)")]
pub struct DomainError(pub f64);

/// Edge weight `-ln(p / (1 - p))` of an error with probability `p`.
///
/// The decoder only needs weights up to a common positive factor, so the
/// natural log is a convention. For small `p` this is close to `-ln p`.
pub fn weight_from_prob(p: f64) -> Result<f64, DomainError> {
    if p > 0.0 && p < 1.0 {
        Ok(((1.0 - p) / p).ln())
    } else {
        Err(DomainError(p))
    }
}

/// Inverse of [`weight_from_prob`].
pub fn prob_from_weight(w: f64) -> f64 {
    1.0 / (1.0 + w.exp())
}

/// Probability that exactly one of two independent events occurs.
pub fn xor_combine(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        assert_eq!(weight_from_prob(0.5).unwrap(), 0.0);
        assert!((weight_from_prob(0.1).unwrap() - 2.1972245773).abs() < 1e-9);
        assert!((weight_from_prob(0.001).unwrap() - 6.9067547786).abs() < 1e-9);
        assert!((weight_from_prob(0.01).unwrap() - 4.5951198502).abs() < 1e-9);
    }

    #[test]
    fn weight_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(weight_from_prob(p).is_err(), "{p}");
        }
    }

    #[test]
    fn xor_merge_example() {
        assert!((xor_combine(0.01, 0.02) - 0.0296).abs() < 1e-15);
    }

    #[test]
    fn symptoms_cancel_shared_detectors() {
        let m = Mechanism::new(
            0.1,
            vec![Component::new(vec![0, 1], 1), Component::new(vec![2], 1)],
        );
        assert_eq!(m.symptoms(), (vec![0, 1, 2], 0));
    }

    #[test]
    fn validate_rejects_overfull_channel() {
        let mut m = DetectorErrorModel::new(1, 0);
        m.channels.push(ExclusiveChannel {
            mechanisms: vec![
                Mechanism::new(0.6, vec![Component::new(vec![0], 0)]),
                Mechanism::new(0.6, vec![Component::new(vec![0], 0)]),
            ],
        });
        assert!(matches!(
            m.validate(),
            Err(ModelError::ChannelOverfull { .. })
        ));
    }
}
