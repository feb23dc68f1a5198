use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::adam::Adam;
use super::features::{matched_flags, FeatureSchema};
use super::mlp::Mlp;
use super::spsa::spsa_gradient;
use crate::dem::{DecodingGraph, DetectorErrorModel};
use crate::matcher::{decode, Decoder, MatchError, Matching};
use crate::reweight::{difficulty_trigger, CorrReweighter};
use crate::sampler::Sampler;
use crate::tracer::PairProbs;

const PARAMS_MAGIC: &str = "reweigh-nn v1";

#[derive(Debug, Error)]
pub enum NnError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(
        "params were trained for {trained} types and k_max {trained_k}, graph has {types} and {k}"
    )]
    SchemaMismatch {
        trained: usize,
        trained_k: usize,
        types: usize,
        k: usize,
    },
    #[error("malformed params file: {0}")]
    Format(String),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dataset_size: usize,
    /// SPSA perturbation count.
    pub q: usize,
    /// SPSA perturbation standard deviation.
    pub sigma: f64,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            batch_size: 128,
            epochs: 100,
            dataset_size: 100_000,
            q: 8,
            sigma: 0.1,
            hidden: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::Config(m.into()));
        if self.q < 1 {
            return bad("q must be at least 1");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return bad("batch size and hidden width must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.weight_decay >= 0.0) {
            return bad("learning rate and weight decay must be nonnegative");
        }
        Ok(())
    }
}

/// One difficult shot: its detectors, the first-pass matching and the edges
/// of the mechanisms that actually fired.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub detectors: Vec<u32>,
    pub first: Vec<usize>,
    pub truth: Vec<usize>,
}

/// `|predicted xor truth| / (|truth| + 1)` on sorted edge lists.
pub fn matching_loss(predicted: &[usize], truth: &[usize]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < predicted.len() && j < truth.len() {
        match predicted[i].cmp(&truth[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    (predicted.len() + truth.len() - 2 * common) as f64 / (truth.len() + 1) as f64
}

/// Samples `truth_model` until `count` shots with at least `tau` flipped
/// detectors are collected, each decoded once by `decoder`.
///
/// Gives up after `max_shots` draws and returns what it has.
pub fn generate_dataset(
    truth_model: &DetectorErrorModel,
    decoder: &Decoder,
    count: usize,
    tau: usize,
    seed: u64,
    max_shots: u64,
) -> Result<Vec<Sample>, NnError> {
    let sampler = Sampler::new(truth_model, seed).keep_fired(true);
    let graph = decoder.graph();
    let mut out = Vec::with_capacity(count);
    const CHUNK: u64 = 4096;
    let mut next = 0u64;
    while out.len() < count && next < max_shots {
        let end = (next + CHUNK).min(max_shots);
        let found: Vec<Sample> = (next..end)
            .into_par_iter()
            .filter_map(|i| {
                let shot = sampler.sample(i);
                if !difficulty_trigger(&shot.detectors, tau) {
                    return None;
                }
                let first = match decoder.decode(&shot.detectors) {
                    Ok(m) => m.edges,
                    Err(e) => return Some(Err(e)),
                };
                let truth = graph.edges_of_fired(shot.fired.as_deref().unwrap_or(&[]));
                Some(Ok(Sample {
                    detectors: shot.detectors,
                    first,
                    truth,
                }))
            })
            .collect::<Result<_, _>>()?;
        out.extend(found);
        next = end;
    }
    out.truncate(count);
    Ok(out)
}

/// `(loss at w~, gradient w.r.t. MLP params)` for one sample: SPSA over the
/// adjusted weights `w~ = w + mlp(x)`, then back through the MLP.
pub fn chain_rule_gradient(
    mlp: &Mlp,
    xs: &[f64],
    base: &[f64],
    mut loss: impl FnMut(&[f64]) -> f64,
    q: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> (f64, Vec<f64>) {
    let adjusted: Vec<f64> = mlp
        .forward_batch(xs)
        .iter()
        .zip(base)
        .map(|(d, w)| w + d)
        .collect();
    let at = loss(&adjusted);
    let g_w = spsa_gradient(&mut loss, &adjusted, q, sigma, rng);
    let mut grad = vec![0.0; mlp.params.len()];
    mlp.backward_batch(xs, &g_w, &mut grad);
    (at, grad)
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub mlp: Mlp,
    /// Mean sample loss per mini-batch, at the pre-update parameters.
    pub loss_curve: Vec<f64>,
    pub batches_per_epoch: usize,
}

/// Trains the weight-delta predictor on `dataset` through the matcher.
///
/// Per-sample randomness is keyed by `(seed, step, sample)` and gradients are
/// summed in batch order, so results do not depend on thread count.
pub fn train(
    graph: &DecodingGraph,
    schema: &FeatureSchema,
    pairs: &PairProbs,
    dataset: &[Sample],
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainResult, NnError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut mlp = Mlp::init(schema.dim(), config.hidden, seed);
    let mut adam = Adam::new(mlp.params.len(), config.learning_rate, config.weight_decay);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let batches_per_epoch = dataset.len().div_ceil(config.batch_size);
    let mut loss_curve = Vec::with_capacity(batches_per_epoch * config.epochs);
    let key = ChaCha8Rng::seed_from_u64(seed).random::<[u8; 32]>();
    let ne = graph.num_edges();
    let base = graph.weights();

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let step = loss_curve.len() as u64;
            let per_sample: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .enumerate()
                .map(|(slot, &s)| {
                    let sample = &dataset[s];
                    let mut rng = ChaCha8Rng::from_seed(key);
                    rng.set_stream((step << 20) | slot as u64);
                    let xs = schema.extract_all(graph, &matched_flags(ne, &sample.first), pairs);
                    let loss = |w: &[f64]| {
                        let g = graph
                            .with_weights(w.iter().map(|x| x.max(0.0)).collect())
                            .expect("weight vector matches the graph");
                        decode(&g, &sample.detectors)
                            .map_or(f64::INFINITY, |m| matching_loss(&m.edges, &sample.truth))
                    };
                    chain_rule_gradient(&mlp, &xs, base, loss, config.q, config.sigma, &mut rng)
                })
                .collect();
            let inv = 1.0 / batch.len() as f64;
            let mut grad = vec![0.0; mlp.params.len()];
            let mut total = 0.0;
            for (l, g) in &per_sample {
                total += l;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b * inv;
                }
            }
            loss_curve.push(total * inv);
            adam.step(&mut mlp.params, &grad);
        }
    }
    Ok(TrainResult {
        mlp,
        loss_curve,
        batches_per_epoch,
    })
}

/// Trailing moving average with the given window.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn write_loss_csv(
    curve: &[f64],
    batches_per_epoch: usize,
    mut w: impl Write,
) -> io::Result<()> {
    writeln!(w, "batch,epoch,loss")?;
    for (i, l) in curve.iter().enumerate() {
        writeln!(w, "{i},{},{l}", i / batches_per_epoch.max(1))?;
    }
    Ok(())
}

/// Correlation re-weighter that adds the predicted delta to every edge weight.
#[derive(Clone, Debug)]
pub struct NnReweighter {
    schema: FeatureSchema,
    mlp: Mlp,
    pairs: PairProbs,
}

impl NnReweighter {
    pub fn new(schema: FeatureSchema, mlp: Mlp, pairs: PairProbs) -> Result<Self, NnError> {
        if mlp.input_dim() != schema.dim() {
            return Err(NnError::Format(format!(
                "network input {} does not match feature dimension {}",
                mlp.input_dim(),
                schema.dim()
            )));
        }
        Ok(Self { schema, mlp, pairs })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    /// Predicted weight deltas for all edges given first-pass edges.
    pub fn deltas(&self, graph: &DecodingGraph, first: &[usize]) -> Vec<f64> {
        let flags = matched_flags(graph.num_edges(), first);
        self.mlp
            .forward_batch(&self.schema.extract_all(graph, &flags, &self.pairs))
    }

    /// Text dump: magic line, schema line, then one parameter per line.
    pub fn write_params(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{PARAMS_MAGIC}")?;
        writeln!(
            w,
            "types {} kmax {} input {} hidden {}",
            self.schema.num_types(),
            self.schema.k_max(),
            self.mlp.input_dim(),
            self.mlp.hidden_dim()
        )?;
        for p in &self.mlp.params {
            writeln!(w, "{p:e}")?;
        }
        Ok(())
    }

    /// Reads params written by [`write_params`](Self::write_params) and
    /// checks them against the schema of `graph`.
    pub fn read_params(
        graph: &DecodingGraph,
        pairs: PairProbs,
        r: impl BufRead,
    ) -> Result<Self, NnError> {
        let mut lines = r.lines();
        let mut next = || -> Result<String, NnError> {
            lines
                .next()
                .ok_or_else(|| NnError::Format("unexpected end of file".into()))?
                .map_err(NnError::from)
        };
        if next()?.trim() != PARAMS_MAGIC {
            return Err(NnError::Format(format!("missing '{PARAMS_MAGIC}' header")));
        }
        let header = next()?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let field = |name: &str| -> Result<usize, NnError> {
            toks.iter()
                .position(|t| *t == name)
                .and_then(|i| toks.get(i + 1))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| NnError::Format(format!("missing '{name}' in schema line")))
        };
        let (types, kmax, input, hidden) = (
            field("types")?,
            field("kmax")?,
            field("input")?,
            field("hidden")?,
        );
        let schema = FeatureSchema::new(graph);
        if types != schema.num_types() || kmax != schema.k_max() {
            return Err(NnError::SchemaMismatch {
                trained: types,
                trained_k: kmax,
                types: schema.num_types(),
                k: schema.k_max(),
            });
        }
        let mut params = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            params.push(
                t.parse::<f64>()
                    .map_err(|_| NnError::Format(format!("bad number '{t}'")))?,
            );
        }
        let n = params.len();
        let mlp = Mlp::from_params(input, hidden, params).ok_or_else(|| {
            NnError::Format(format!(
                "expected {} params, got {n}",
                Mlp::num_params(input, hidden)
            ))
        })?;
        Self::new(schema, mlp, pairs)
    }
}

impl CorrReweighter for NnReweighter {
    fn reweight(&self, graph: &DecodingGraph, first: &Matching) -> DecodingGraph {
        let w: Vec<f64> = graph
            .weights()
            .iter()
            .zip(self.deltas(graph, &first.edges))
            .map(|(w, d)| (w + d).max(0.0))
            .collect();
        graph
            .with_weights(w)
            .expect("weight vector matches the graph")
    }
}
