//! Monte Carlo shot sampling.
//!
//! Shot `i` under seed `s` draws from a ChaCha8 stream keyed by `s` with
//! stream id `i`, consuming one 64-bit word per channel in channel order.
//! Shots are therefore independent of evaluation order and thread count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dem::{DetectorErrorModel, ObsMask};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Shot {
    pub index: u64,
    /// Sorted flipped detectors.
    pub detectors: Vec<u32>,
    pub observables: ObsMask,
    /// Fired `(channel, arm)` pairs, kept when requested.
    pub fired: Option<Vec<(u32, u32)>>,
}

/// Per-channel thresholds precomputed from a model.
#[derive(Clone, Debug)]
pub struct Sampler {
    /// Cumulative arm thresholds on the `u64` scale, per channel.
    thresholds: Vec<Vec<u64>>,
    /// XOR-reduced symptoms per channel and arm.
    symptoms: Vec<Vec<(Vec<u32>, ObsMask)>>,
    key: [u8; 32],
    keep_fired: bool,
}

impl Sampler {
    pub fn new(model: &DetectorErrorModel, seed: u64) -> Self {
        let scale = 2f64.powi(64);
        let thresholds = model
            .channels
            .iter()
            .map(|ch| {
                let mut acc = 0.0;
                ch.mechanisms
                    .iter()
                    .map(|m| {
                        acc += m.probability;
                        // `as` saturates, so acc >= 1 maps to u64::MAX.
                        (acc * scale) as u64
                    })
                    .collect()
            })
            .collect();
        let symptoms = model
            .channels
            .iter()
            .map(|ch| ch.mechanisms.iter().map(|m| m.symptoms()).collect())
            .collect();
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
        Self {
            thresholds,
            symptoms,
            key,
            keep_fired: false,
        }
    }

    /// Records which mechanisms fired in each shot.
    pub fn keep_fired(mut self, keep: bool) -> Self {
        self.keep_fired = keep;
        self
    }

    pub fn sample(&self, index: u64) -> Shot {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        let mut flips: Vec<u32> = Vec::new();
        let mut observables = 0;
        let mut fired = self.keep_fired.then(Vec::new);
        for (ci, th) in self.thresholds.iter().enumerate() {
            let u = rng.next_u64();
            if u >= *th.last().unwrap_or(&0) {
                continue;
            }
            let arm = th.partition_point(|&t| t <= u);
            let (dets, obs) = &self.symptoms[ci][arm];
            flips.extend_from_slice(dets);
            observables ^= obs;
            if let Some(f) = fired.as_mut() {
                f.push((ci as u32, arm as u32));
            }
        }
        Shot {
            index,
            detectors: xor_reduce(flips),
            observables,
            fired,
        }
    }

    /// Shot with exactly `faults` distinct channels fired.
    ///
    /// Channels are a uniform `faults`-subset and each fired channel picks an
    /// arm in proportion to its probability. This is the conditional law of a
    /// shot given its fault count when every channel has the same total
    /// probability. Uses stream `(faults << 56) | index`, disjoint from
    /// [`Sampler::sample`] for `faults >= 1` and indices below `2^56`.
    pub fn sample_with_faults(&self, faults: usize, index: u64) -> Shot {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(((faults as u64) << 56) | index);
        let chosen = rand::seq::index::sample(
            &mut rng,
            self.thresholds.len(),
            faults.min(self.thresholds.len()),
        );
        let mut flips: Vec<u32> = Vec::new();
        let mut observables = 0;
        let mut fired = self.keep_fired.then(Vec::new);
        for ci in chosen {
            let th = &self.thresholds[ci];
            let total = *th.last().unwrap_or(&0);
            if total == 0 {
                continue;
            }
            let u = rng.random_range(0..total);
            let arm = th.partition_point(|&t| t <= u);
            let (dets, obs) = &self.symptoms[ci][arm];
            flips.extend_from_slice(dets);
            observables ^= obs;
            if let Some(f) = fired.as_mut() {
                f.push((ci as u32, arm as u32));
            }
        }
        Shot {
            index,
            detectors: xor_reduce(flips),
            observables,
            fired,
        }
    }

    /// Shots `0..count`, produced lazily.
    pub fn iter(&self, count: u64) -> impl Iterator<Item = Shot> + '_ {
        (0..count).map(move |i| self.sample(i))
    }
}

/// Sorts and drops values that appear an even number of times.
fn xor_reduce(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    let mut out = Vec::with_capacity(v.len());
    for d in v {
        if out.last() == Some(&d) {
            out.pop();
        } else {
            out.push(d);
        }
    }
    out
}

pub fn sample_shot(model: &DetectorErrorModel, shot_index: u64, seed: u64) -> Shot {
    Sampler::new(model, seed).sample(shot_index)
}

/// Streams shots `0..count`.
pub fn sample_batch(
    model: &DetectorErrorModel,
    count: u64,
    seed: u64,
) -> impl Iterator<Item = Shot> {
    let sampler = Sampler::new(model, seed);
    (0..count).map(move |i| sampler.sample(i))
}

#[derive(Debug, Error, PartialEq)]
#[error("malformed shot line: {0}")]
pub struct ShotParseError(pub String);

/// Hex of a set of bit positions, most significant digit first.
pub fn bits_to_hex(bits: &[u32]) -> String {
    let Some(&max) = bits.iter().max() else {
        return "0".into();
    };
    let mut nibbles = vec![0u8; max as usize / 4 + 1];
    for &b in bits {
        nibbles[b as usize / 4] ^= 1 << (b % 4);
    }
    nibbles
        .iter()
        .rev()
        .map(|n| char::from_digit(u32::from(*n), 16).unwrap())
        .collect()
}

pub fn hex_to_bits(hex: &str) -> Option<Vec<u32>> {
    let mut out = Vec::new();
    for (pos, c) in hex.chars().rev().enumerate() {
        let n = c.to_digit(16)?;
        for k in 0..4 {
            if n >> k & 1 == 1 {
                out.push((pos * 4 + k) as u32);
            }
        }
    }
    Some(out)
}

impl fmt::Display for Shot {
    /// `shot <index> D:<hex> L:<hex>`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "shot {} D:{} L:{:x}",
            self.index,
            bits_to_hex(&self.detectors),
            self.observables
        )
    }
}

impl FromStr for Shot {
    type Err = ShotParseError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let err = || ShotParseError(line.to_string());
        let mut parts = line.split_whitespace();
        if parts.next() != Some("shot") {
            return Err(err());
        }
        let index = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
        let dets = parts
            .next()
            .and_then(|s| s.strip_prefix("D:"))
            .and_then(hex_to_bits)
            .ok_or_else(err)?;
        let obs = parts
            .next()
            .and_then(|s| s.strip_prefix("L:"))
            .and_then(|s| u64::from_str_radix(s, 16).ok())
            .ok_or_else(err)?;
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(Shot {
            index,
            detectors: dets,
            observables: obs,
            fired: None,
        })
    }
}
