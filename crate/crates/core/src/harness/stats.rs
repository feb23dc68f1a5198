use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dem::{DetectorErrorModel, ObsMask};
use crate::sampler::Sampler;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval for `errors` successes out of `shots`.
pub fn wilson_interval(errors: u64, shots: u64, z: f64) -> (f64, f64) {
    if shots == 0 {
        return (0.0, 1.0);
    }
    let n = shots as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Clamp so the interval always contains the point estimate despite rounding.
    (
        (centre - half).max(0.0).min(p),
        (centre + half).min(1.0).max(p),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LerEstimate {
    pub shots: u64,
    pub errors: u64,
    pub ler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl LerEstimate {
    pub fn new(errors: u64, shots: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, shots, Z95);
        Self {
            shots,
            errors,
            ler: if shots == 0 {
                0.0
            } else {
                errors as f64 / shots as f64
            },
            ci_low,
            ci_high,
        }
    }

    /// True if the two 95% intervals are disjoint.
    pub fn separated_from(&self, other: &LerEstimate) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

/// Monte Carlo logical error rate of `predict` on `shots` shots of `model`.
pub fn estimate_ler(
    model: &DetectorErrorModel,
    predict: impl Fn(&[u32]) -> ObsMask + Sync,
    shots: u64,
    seed: u64,
) -> LerEstimate {
    let sampler = Sampler::new(model, seed);
    let errors = (0..shots)
        .into_par_iter()
        .map(|i| {
            let s = sampler.sample(i);
            u64::from(predict(&s.detectors) != s.observables)
        })
        .sum();
    LerEstimate::new(errors, shots)
}

/// Shot-to-prediction function compared by the multi-decoder estimators.
pub type Predictor<'a> = &'a (dyn Fn(&[u32]) -> ObsMask + Sync);

/// Importance-sampled logical error rate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TiltedEstimate {
    pub shots: u64,
    /// Shots that failed under the tilted model.
    pub raw_errors: u64,
    pub ler: f64,
    pub std_err: f64,
}

impl TiltedEstimate {
    /// Relative standard error, infinite when nothing failed.
    pub fn rel_err(&self) -> f64 {
        if self.ler > 0.0 {
            self.std_err / self.ler
        } else {
            f64::INFINITY
        }
    }
}

/// Logical error rates of several decoders on `model`, sampling from `tilted`.
///
/// `tilted` must have the same channels and mechanisms as `model` with only the
/// probabilities changed. Each shot is weighted by its likelihood ratio, so the
/// estimates are unbiased for `model` while rare failures are seen more often.
/// All decoders see the same shots.
pub fn estimate_ler_tilted(
    model: &DetectorErrorModel,
    tilted: &DetectorErrorModel,
    predicts: &[Predictor],
    shots: u64,
    seed: u64,
) -> Vec<TiltedEstimate> {
    assert_eq!(
        model.channels.len(),
        tilted.channels.len(),
        "channel count mismatch"
    );
    let mut base = 0.0;
    let mut delta: Vec<Vec<f64>> = Vec::with_capacity(model.channels.len());
    for (a, b) in model.channels.iter().zip(&tilted.channels) {
        assert_eq!(
            a.mechanisms.len(),
            b.mechanisms.len(),
            "mechanism count mismatch"
        );
        let none = (1.0 - a.total_probability()).ln() - (1.0 - b.total_probability()).ln();
        base += none;
        delta.push(
            a.mechanisms
                .iter()
                .zip(&b.mechanisms)
                .map(|(x, y)| x.probability.ln() - y.probability.ln() - none)
                .collect(),
        );
    }
    let sampler = Sampler::new(tilted, seed).keep_fired(true);
    let k = predicts.len();
    let zero = || (0u64, vec![0.0; k], vec![0.0; k], vec![0u64; k]);
    let (n, sum, sum_sq, raw) = (0..shots)
        .into_par_iter()
        .fold(zero, |(n, mut s, mut s2, mut r), i| {
            let shot = sampler.sample(i);
            let lr = shot
                .fired
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(|&(c, m)| delta[c as usize][m as usize])
                .sum::<f64>();
            let w = (base + lr).exp();
            for (j, f) in predicts.iter().enumerate() {
                if f(&shot.detectors) != shot.observables {
                    s[j] += w;
                    s2[j] += w * w;
                    r[j] += 1;
                }
            }
            (n + 1, s, s2, r)
        })
        .reduce(zero, |a, b| {
            let add = |x: Vec<f64>, y: Vec<f64>| {
                x.iter().zip(&y).map(|(u, v)| u + v).collect::<Vec<f64>>()
            };
            (
                a.0 + b.0,
                add(a.1, b.1),
                add(a.2, b.2),
                a.3.iter().zip(&b.3).map(|(u, v)| u + v).collect(),
            )
        });
    (0..k)
        .map(|j| {
            let nf = n.max(1) as f64;
            let mean = sum[j] / nf;
            let var = (sum_sq[j] / nf - mean * mean).max(0.0);
            TiltedEstimate {
                shots: n,
                raw_errors: raw[j],
                ler: mean,
                std_err: (var / nf).sqrt(),
            }
        })
        .collect()
}

/// Fault-count-stratified error rates of several decoders.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratifiedLer {
    /// `P(K = k)` for `k = 0..=max_faults`.
    pub weights: Vec<f64>,
    /// `P(K > max_faults)`, not covered by the estimate.
    pub tail: f64,
    /// Shots drawn at each fault count.
    pub shots: Vec<u64>,
    /// Failures per decoder and fault count.
    pub failures: Vec<Vec<u64>>,
    /// Shots on which decoder `i` fails and decoder 0 does not, per `k`.
    pub only_fail: Vec<Vec<u64>>,
    /// Shots on which decoder 0 fails and decoder `i` does not, per `k`.
    pub only_first_fail: Vec<Vec<u64>>,
}

impl StratifiedLer {
    fn weighted(&self, counts: &[u64]) -> (f64, f64) {
        let mut mean = 0.0;
        let mut var = 0.0;
        for ((w, &c), &n) in self.weights.iter().zip(counts).zip(&self.shots) {
            let n = n.max(1) as f64;
            let f = c as f64 / n;
            mean += w * f;
            var += w * w * f * (1.0 - f) / n;
        }
        (mean, var)
    }

    /// `(ler, std_err)` of decoder `i`, excluding the tail.
    pub fn ler(&self, i: usize) -> (f64, f64) {
        let (m, v) = self.weighted(&self.failures[i]);
        (m, v.sqrt())
    }

    /// `LER_i / LER_0` with a paired standard error.
    ///
    /// The difference `LER_i - LER_0` is estimated from shots where exactly
    /// one of the two decoders fails, which is far less noisy than the two
    /// rates separately when the decoders mostly agree.
    pub fn ratio(&self, i: usize) -> (f64, f64) {
        let (base, base_var) = self.weighted(&self.failures[0]);
        let mut diff = 0.0;
        let mut diff_var = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            let n = self.shots[k].max(1) as f64;
            let a = self.only_fail[i][k] as f64 / n;
            let b = self.only_first_fail[i][k] as f64 / n;
            diff += w * (a - b);
            diff_var += w * w * (a + b - (a - b) * (a - b)) / n;
        }
        if base <= 0.0 {
            return (f64::NAN, f64::INFINITY);
        }
        let r = 1.0 + diff / base;
        // Delta method on (1 + D / B), treating D and B as independent.
        let se = ((diff_var + (diff / base).powi(2) * base_var) / (base * base)).sqrt();
        (r, se)
    }
}

/// Logical error rates conditioned on the number of fired channels.
///
/// Every channel of `model` must have the same total probability `p`, so the
/// fault count `K` is binomial and, given `K = k`, the fired channels are a
/// uniform `k`-subset. Fault count `k` gets `shots[k]` shots, shared by all
/// decoders; the rate is `sum_k P(K = k) f_k` over `k < shots.len()`. Returns
/// `None` if channel totals differ.
pub fn estimate_ler_by_faults(
    model: &DetectorErrorModel,
    predicts: &[Predictor],
    shots: &[u64],
    seed: u64,
) -> Option<StratifiedLer> {
    let max_faults = shots.len().checked_sub(1)?;
    let totals: Vec<f64> = model
        .channels
        .iter()
        .map(|c| c.total_probability())
        .collect();
    let p = *totals.first()?;
    if totals.iter().any(|t| (t - p).abs() > 1e-12 * p) || p <= 0.0 || p >= 1.0 {
        return None;
    }
    let n = totals.len();
    let mut weights = Vec::with_capacity(max_faults + 1);
    let mut w = (n as f64) * (-p).ln_1p();
    weights.push(w.exp());
    for k in 1..=max_faults.min(n) {
        w += ((n - k + 1) as f64 / k as f64).ln() + (p / (1.0 - p)).ln();
        weights.push(w.exp());
    }
    weights.resize(max_faults + 1, 0.0);
    let tail = (1.0 - weights.iter().sum::<f64>()).max(0.0);

    let sampler = Sampler::new(model, seed);
    let m = predicts.len();
    let mut failures = vec![vec![0u64; max_faults + 1]; m];
    let mut only_fail = failures.clone();
    let mut only_first_fail = failures.clone();
    for k in 0..=max_faults {
        let zero = || vec![(0u64, 0u64, 0u64); m];
        let counts = (0..shots[k])
            .into_par_iter()
            .fold(zero, |mut acc, i| {
                let shot = sampler.sample_with_faults(k, i);
                let fails: Vec<bool> = predicts
                    .iter()
                    .map(|f| f(&shot.detectors) != shot.observables)
                    .collect();
                for (j, slot) in acc.iter_mut().enumerate() {
                    slot.0 += u64::from(fails[j]);
                    slot.1 += u64::from(fails[j] && !fails[0]);
                    slot.2 += u64::from(fails[0] && !fails[j]);
                }
                acc
            })
            .reduce(zero, |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 += y.0;
                    x.1 += y.1;
                    x.2 += y.2;
                }
                a
            });
        for (j, c) in counts.into_iter().enumerate() {
            failures[j][k] = c.0;
            only_fail[j][k] = c.1;
            only_first_fail[j][k] = c.2;
        }
    }
    Some(StratifiedLer {
        weights,
        tail,
        shots: shots.to_vec(),
        failures,
        only_fail,
        only_first_fail,
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("need at least 3 physical error rates, got {0}")]
    TooFewPoints(usize),
    #[error("error-rate ratio does not cross 1 in the given range")]
    NoCrossing,
}

/// Physical error rate at which `ler_small / ler_large` crosses 1.
///
/// Interpolates `ln(ratio)` linearly in `ln(p)` between the first bracketing
/// pair of grid points. `ps` must be increasing.
pub fn threshold_crossing(
    ps: &[f64],
    ler_small: &[f64],
    ler_large: &[f64],
) -> Result<f64, ThresholdError> {
    if ps.len() < 3 {
        return Err(ThresholdError::TooFewPoints(ps.len()));
    }
    let log_ratio: Vec<Option<f64>> = ler_small
        .iter()
        .zip(ler_large)
        .map(|(&s, &l)| (s > 0.0 && l > 0.0).then(|| (s / l).ln()))
        .collect();
    for i in 0..ps.len() - 1 {
        let (Some(a), Some(b)) = (log_ratio[i], log_ratio[i + 1]) else {
            continue;
        };
        if a == 0.0 {
            return Ok(ps[i]);
        }
        if a.signum() != b.signum() {
            let (x0, x1) = (ps[i].ln(), ps[i + 1].ln());
            return Ok((x0 + (x1 - x0) * a / (a - b)).exp());
        }
    }
    match log_ratio.last() {
        Some(Some(r)) if *r == 0.0 => Ok(ps[ps.len() - 1]),
        _ => Err(ThresholdError::NoCrossing),
    }
}
