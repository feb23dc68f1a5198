use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{CodeSource, Environment, ExperimentConfig, PairSource, TauSetting};
use super::stats::{threshold_crossing, LerEstimate};
use super::HarnessError;
use crate::dem::{parse_dem, DecodingGraph, DetectorErrorModel, ObsMask};
use crate::matcher::{predict_observables, Decoder};
use crate::nnrw::{generate_dataset, train, write_loss_csv, FeatureSchema, NnReweighter};
use crate::reweight::{
    alignment_reweight, calibrate_tau, realign_seen, two_pass_decode, CorrReweighter, Heuristic,
};
use crate::sampler::Sampler;
use crate::surfgen::{apply_mismatch, generate_surface_pheno};
use crate::tracer::{PairProbs, PairSet, TraceStore};

/// Seed offsets separating the shot streams of one experiment.
const TRACE_STREAM: u64 = 0x7472_6163_6500_0000;
const CALIBRATION_STREAM: u64 = 0x6361_6c69_6200_0000;
const DATASET_STREAM: u64 = 0x6461_7461_7300_0000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "&'static str")]
pub enum Arm {
    Oracle,
    Mismatched,
    Aligned,
    AlignedHeuristic,
    AlignedNn,
}

impl Arm {
    pub const ALL: [Arm; 5] = [
        Arm::Oracle,
        Arm::Mismatched,
        Arm::Aligned,
        Arm::AlignedHeuristic,
        Arm::AlignedNn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Oracle => "oracle",
            Arm::Mismatched => "mismatched",
            Arm::Aligned => "aligned",
            Arm::AlignedHeuristic => "aligned+heuristic",
            Arm::AlignedNn => "aligned+nn",
        }
    }

    fn needs_trace(self) -> bool {
        matches!(self, Arm::Aligned | Arm::AlignedHeuristic | Arm::AlignedNn)
    }
}

impl From<Arm> for &'static str {
    fn from(a: Arm) -> Self {
        a.name()
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown arm '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmRow {
    pub arm: Arm,
    #[serde(flatten)]
    pub estimate: LerEstimate,
    /// Fraction of evaluation shots that ran a second decoding pass.
    pub trigger_rate: f64,
    pub trace_trials: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub rows: Vec<ArmRow>,
    pub tau: Option<usize>,
    pub environment: Environment,
    #[serde(skip)]
    pub loss_curve: Option<(Vec<f64>, usize)>,
    #[serde(skip)]
    pub trace: Option<TraceStore>,
}

impl MetricsReport {
    pub fn row(&self, arm: Arm) -> Option<&ArmRow> {
        self.rows.iter().find(|r| r.arm == arm)
    }

    /// LER of `arm` divided by LER of `baseline`.
    pub fn ratio(&self, arm: Arm, baseline: Arm) -> Option<f64> {
        Some(self.row(arm)?.estimate.ler / self.row(baseline)?.estimate.ler)
    }

    pub const CSV_HEADER: &'static str =
        "arm,shots,errors,ler,ci_low,ci_high,trigger_rate,trace_trials";

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(w, "{}", csv_row(r))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `metrics.csv`, `report.json` and, when available,
    /// `heatmap.csv` and `loss_curve.csv` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(io::BufWriter::new(std::fs::File::create(
            dir.join("metrics.csv"),
        )?))?;
        std::fs::write(dir.join("report.json"), self.to_json() + "\n")?;
        if let Some(t) = &self.trace {
            t.write_heatmap_csv(io::BufWriter::new(std::fs::File::create(
                dir.join("heatmap.csv"),
            )?))?;
        }
        if let Some((curve, bpe)) = &self.loss_curve {
            write_loss_csv(
                curve,
                *bpe,
                io::BufWriter::new(std::fs::File::create(dir.join("loss_curve.csv"))?),
            )?;
        }
        Ok(())
    }
}

fn csv_row(r: &ArmRow) -> String {
    let e = &r.estimate;
    format!(
        "{},{},{},{:e},{:e},{:e},{},{}",
        r.arm, e.shots, e.errors, e.ler, e.ci_low, e.ci_high, r.trigger_rate, r.trace_trials
    )
}

/// True model for a config.
pub fn load_model(code: &CodeSource) -> Result<DetectorErrorModel, HarnessError> {
    Ok(match code {
        CodeSource::Surface(spec) => generate_surface_pheno(spec)?,
        CodeSource::Dem(path) => parse_dem(&std::fs::read_to_string(path)?)?,
    })
}

/// Traces `shots` shots of `model` decoded by `decoder`, tracking `pairs`.
///
/// With a window only the last `window` shots are recorded, which leaves the
/// same counts as streaming every shot through a windowed store.
pub fn trace_shots(
    model: &DetectorErrorModel,
    decoder: &Decoder,
    pairs: PairSet,
    shots: u64,
    window: Option<usize>,
    seed: u64,
) -> Result<TraceStore, HarnessError> {
    let start = window.map_or(0, |w| shots.saturating_sub(w as u64));
    let sampler = Sampler::new(model, seed);
    let graph = decoder.graph();
    let empty = || TraceStore::with_pairs(graph, pairs.clone());
    const CHUNK: u64 = 1 << 14;
    let chunks: Vec<u64> = (start..shots).step_by(CHUNK as usize).collect();
    let stores: Vec<TraceStore> = chunks
        .par_iter()
        .map(|&c| -> Result<TraceStore, HarnessError> {
            let mut store = empty();
            for i in c..(c + CHUNK).min(shots) {
                store.record(&decoder.decode(&sampler.sample(i).detectors)?);
            }
            Ok(store)
        })
        .collect::<Result<_, _>>()?;
    let mut total = empty();
    for s in &stores {
        total.merge(s)?;
    }
    Ok(total)
}

/// Traces the true model with the current weights and re-aligns, `rounds`
/// times over equal slices of the trace budget.
///
/// A single round is plain alignment, with the tracer's floor for unseen
/// edges. With several rounds an edge unseen in a round keeps its weight, so
/// edges starved by badly wrong early weights can recover later. Returns the
/// final graph, the last round's store and the total traced trials.
fn align_in_rounds(
    truth: &DetectorErrorModel,
    start: &DecodingGraph,
    cfg: &ExperimentConfig,
) -> Result<(DecodingGraph, TraceStore, u64), HarnessError> {
    let rounds = cfg.policy.rounds.max(1) as u64;
    let mut graph = start.clone();
    let mut last = None;
    let mut total = 0;
    for r in 0..rounds {
        let shots = cfg.trace_shots / rounds + u64::from(r < cfg.trace_shots % rounds);
        let decoder = Decoder::new(graph.clone());
        let seed = (cfg.seed ^ TRACE_STREAM).wrapping_add(r);
        let store = trace_shots(
            truth,
            &decoder,
            PairSet::local(start),
            shots,
            cfg.policy.window,
            seed,
        )?;
        if store.trials() >= cfg.policy.min_trials.max(1) {
            graph = if rounds == 1 {
                alignment_reweight(&graph, &store.estimate_edge_probs()?)?
            } else {
                realign_seen(&graph, store.edge_counts(), store.trials())?
            };
        }
        total += store.trials();
        last = Some(store);
    }
    Ok((graph, last.expect("at least one round"), total))
}

/// Detector counts of `shots` shots, for trigger calibration.
pub fn detector_counts(model: &DetectorErrorModel, shots: u64, seed: u64) -> Vec<usize> {
    let sampler = Sampler::new(model, seed);
    (0..shots)
        .into_par_iter()
        .map(|i| sampler.sample(i).detectors.len())
        .collect()
}

/// Decoders of every requested arm, ready to evaluate shots.
pub struct PreparedArms {
    pub arms: Vec<Arm>,
    oracle: Decoder,
    mismatched: Decoder,
    aligned: Option<Decoder>,
    heuristic: Option<Heuristic>,
    nn: Option<NnReweighter>,
    pub tau: usize,
    pub trace: Option<TraceStore>,
    /// Trials traced over all alignment rounds.
    pub trace_trials: u64,
    pub loss_curve: Option<(Vec<f64>, usize)>,
}

impl PreparedArms {
    /// Builds the models and runs the trace, calibration and training phases.
    pub fn prepare(cfg: &ExperimentConfig) -> Result<(Self, DetectorErrorModel), HarnessError> {
        let truth = load_model(&cfg.code)?;
        let true_graph = DecodingGraph::build(&truth)?;
        let mism_graph = match &cfg.mismatch {
            Some(spec) => {
                let mm = DecodingGraph::build(&apply_mismatch(&truth, spec)?)?;
                true_graph.with_probabilities(mm.probabilities())?
            }
            None => true_graph.clone(),
        };
        let oracle = Decoder::new(true_graph.clone());
        let mismatched = Decoder::new(mism_graph.clone());
        let wants = |a: Arm| cfg.arms.contains(&a);

        let mut aligned = None;
        let mut trace = None;
        let mut trace_trials = 0;
        let mut edge_probs = mism_graph.probabilities().to_vec();
        let mut pairs = PairProbs::truth(&true_graph);
        if cfg.arms.iter().any(|a| a.needs_trace()) {
            let (graph, store, trials) = if cfg.oracle_trace {
                let store = trace_shots(
                    &truth,
                    &oracle,
                    PairSet::local(&true_graph),
                    cfg.trace_shots,
                    cfg.policy.window,
                    cfg.seed ^ TRACE_STREAM,
                )?;
                let graph = if store.trials() >= cfg.policy.min_trials.max(1) {
                    alignment_reweight(&mism_graph, &store.estimate_edge_probs()?)?
                } else {
                    mism_graph.clone()
                };
                let trials = store.trials();
                (graph, store, trials)
            } else {
                align_in_rounds(&truth, &mism_graph, cfg)?
            };
            if store.trials() >= cfg.policy.min_trials.max(1) {
                edge_probs = graph.probabilities().to_vec();
                if cfg.pairs == PairSource::Traced {
                    pairs = store.estimate_pair_probs()?;
                }
            }
            aligned = Some(Decoder::new(graph));
            trace = Some(store);
            trace_trials = trials;
        }

        let tau = match cfg.tau {
            TauSetting::Fixed(t) => t,
            TauSetting::Calibrated { target, lo, hi } => {
                let counts =
                    detector_counts(&truth, cfg.calibration_shots, cfg.seed ^ CALIBRATION_STREAM);
                calibrate_tau(&counts, target, lo, hi).0
            }
        };

        let trials = trace.as_ref().map_or(0, TraceStore::trials);
        let heuristic = wants(Arm::AlignedHeuristic).then(|| {
            Heuristic::new(
                &pairs,
                &edge_probs,
                cfg.policy.epsilon_for(trials),
                cfg.policy.scale,
            )
        });

        let mut loss_curve = None;
        let nn = match (wants(Arm::AlignedNn), &aligned) {
            (true, Some(dec)) => {
                let graph = dec.graph();
                Some(match &cfg.nn.params {
                    Some(path) => {
                        let file = std::fs::File::open(path)?;
                        NnReweighter::read_params(graph, pairs.clone(), io::BufReader::new(file))?
                    }
                    None => {
                        let t = &cfg.nn.train;
                        let data = generate_dataset(
                            &truth,
                            dec,
                            t.dataset_size,
                            tau,
                            cfg.seed ^ DATASET_STREAM,
                            (t.dataset_size as u64).saturating_mul(1000).max(1 << 20),
                        )?;
                        let schema = FeatureSchema::new(graph);
                        let result = train(graph, &schema, &pairs, &data, t, cfg.seed)?;
                        loss_curve = Some((result.loss_curve, result.batches_per_epoch));
                        NnReweighter::new(schema, result.mlp, pairs.clone())?
                    }
                })
            }
            _ => None,
        };

        Ok((
            Self {
                arms: cfg.arms.clone(),
                oracle,
                mismatched,
                aligned,
                heuristic,
                nn,
                tau,
                trace,
                trace_trials,
                loss_curve,
            },
            truth,
        ))
    }

    /// Trained or loaded NN re-weighter, when the NN arm is requested.
    pub fn nn(&self) -> Option<&NnReweighter> {
        self.nn.as_ref()
    }

    fn decoder(&self, arm: Arm) -> &Decoder {
        match arm {
            Arm::Oracle => &self.oracle,
            Arm::Mismatched => &self.mismatched,
            _ => self.aligned.as_ref().expect("aligned decoder prepared"),
        }
    }

    /// Predicted observables per arm, with whether a second pass ran.
    pub fn predict(&self, dets: &[u32]) -> Result<Vec<(ObsMask, bool)>, HarnessError> {
        self.arms
            .iter()
            .map(|&arm| {
                let dec = self.decoder(arm);
                let corr: Option<&dyn CorrReweighter> = match arm {
                    Arm::AlignedHeuristic => self.heuristic.as_ref().map(|h| h as _),
                    Arm::AlignedNn => self.nn.as_ref().map(|n| n as _),
                    _ => None,
                };
                let m = two_pass_decode(dec, dets, self.tau, corr)?;
                let second = corr.is_some() && crate::reweight::difficulty_trigger(dets, self.tau);
                Ok((predict_observables(dec.graph(), &m), second))
            })
            .collect()
    }
}

/// Runs every configured arm on one shared stream of evaluation shots.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    let (arms, truth) = PreparedArms::prepare(cfg)?;
    let sampler = Sampler::new(&truth, cfg.seed);
    let n = arms.arms.len();
    let zero = || vec![(0u64, 0u64); n];
    let counts = (0..cfg.eval_shots)
        .into_par_iter()
        .try_fold(zero, |mut acc, i| -> Result<_, HarnessError> {
            let shot = sampler.sample(i);
            for (slot, (obs, second)) in acc.iter_mut().zip(arms.predict(&shot.detectors)?) {
                slot.0 += u64::from(obs != shot.observables);
                slot.1 += u64::from(second);
            }
            Ok(acc)
        })
        .try_reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.0 += y.0;
                x.1 += y.1;
            }
            Ok(a)
        })?;
    let trials = arms.trace_trials;
    let rows = arms
        .arms
        .iter()
        .zip(counts)
        .map(|(&arm, (errors, second))| ArmRow {
            arm,
            estimate: LerEstimate::new(errors, cfg.eval_shots),
            trigger_rate: second as f64 / cfg.eval_shots as f64,
            trace_trials: if arm.needs_trace() { trials } else { 0 },
        })
        .collect();
    let uses_tau = arms
        .arms
        .iter()
        .any(|a| matches!(a, Arm::AlignedHeuristic | Arm::AlignedNn));
    Ok(MetricsReport {
        rows,
        tau: uses_tau.then_some(arms.tau),
        environment: Environment {
            seed: cfg.seed,
            config_hash: cfg.hash(),
        },
        loss_curve: arms.loss_curve,
        trace: arms.trace,
    })
}

/// Swept configuration axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    P,
    Distance,
    Strength,
    TraceShots,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::P => "p",
            SweepAxis::Distance => "d",
            SweepAxis::Strength => "n",
            SweepAxis::TraceShots => "t_trace",
        }
    }

    /// Copy of `template` with this axis set to `value`.
    pub fn apply(
        self,
        template: &ExperimentConfig,
        value: f64,
    ) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = template.clone();
        let bad = |m: &str| {
            HarnessError::Config(super::ConfigError {
                line: 0,
                message: m.into(),
            })
        };
        match self {
            SweepAxis::P | SweepAxis::Distance => {
                let CodeSource::Surface(spec) = &mut cfg.code else {
                    return Err(bad("p and d sweeps need a generated surface code"));
                };
                if self == SweepAxis::P {
                    spec.p = value;
                    spec.p_meas = value;
                } else {
                    let d = value as usize;
                    if d as f64 != value {
                        return Err(bad("distance must be an integer"));
                    }
                    spec.distance = d;
                    spec.rounds = d;
                }
                spec.validate()?;
            }
            SweepAxis::Strength => {
                let m = cfg
                    .mismatch
                    .as_mut()
                    .ok_or_else(|| bad("strength sweep needs a [mismatch] section"))?;
                if value.is_nan() || value < 1.0 {
                    return Err(bad("mismatch strength must be >= 1"));
                }
                m.strength = value;
            }
            SweepAxis::TraceShots => cfg.trace_shots = value as u64,
        }
        Ok(cfg)
    }
}

impl FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "p" => Ok(SweepAxis::P),
            "d" | "distance" => Ok(SweepAxis::Distance),
            "n" | "N" | "strength" => Ok(SweepAxis::Strength),
            "t_trace" | "trace" => Ok(SweepAxis::TraceShots),
            _ => Err(format!("unknown sweep axis '{s}'")),
        }
    }
}

/// One report per axis value.
pub fn sweep(
    template: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<(f64, MetricsReport)>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config(super::ConfigError {
            line: 0,
            message: "sweep needs at least one value".into(),
        }));
    }
    values
        .iter()
        .map(|&v| Ok((v, run_experiment(&axis.apply(template, v)?)?)))
        .collect()
}

pub fn write_sweep_csv(
    axis: SweepAxis,
    points: &[(f64, MetricsReport)],
    mut w: impl Write,
) -> io::Result<()> {
    writeln!(w, "{},{}", axis.name(), MetricsReport::CSV_HEADER)?;
    for (v, report) in points {
        for r in &report.rows {
            writeln!(w, "{v},{}", csv_row(r))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub arm: Arm,
    pub crossing: Option<f64>,
    /// `(d, p, ler)` grid the crossing was read from.
    pub grid: Vec<(usize, f64, f64)>,
}

/// Per-arm crossing of the two smallest distances' LER curves over `ps`.
pub fn estimate_threshold(
    template: &ExperimentConfig,
    distances: &[usize],
    ps: &[f64],
) -> Result<Vec<ThresholdEstimate>, HarnessError> {
    if distances.len() < 2 {
        return Err(HarnessError::Config(super::ConfigError {
            line: 0,
            message: "threshold needs at least two distances".into(),
        }));
    }
    let mut grid: Vec<(usize, f64, MetricsReport)> = Vec::new();
    for &d in distances {
        let at_d = SweepAxis::Distance.apply(template, d as f64)?;
        for (p, report) in sweep(&at_d, SweepAxis::P, ps)? {
            grid.push((d, p, report));
        }
    }
    let mut sorted = distances.to_vec();
    sorted.sort_unstable();
    let (small, large) = (sorted[0], sorted[1]);
    template
        .arms
        .iter()
        .map(|&arm| {
            let curve = |d: usize| -> Vec<f64> {
                grid.iter()
                    .filter(|g| g.0 == d)
                    .map(|g| g.2.row(arm).map_or(f64::NAN, |r| r.estimate.ler))
                    .collect()
            };
            let crossing = match threshold_crossing(ps, &curve(small), &curve(large)) {
                Ok(x) => Some(x),
                Err(super::ThresholdError::NoCrossing) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(ThresholdEstimate {
                arm,
                crossing,
                grid: grid
                    .iter()
                    .filter_map(|g| g.2.row(arm).map(|r| (g.0, g.1, r.estimate.ler)))
                    .collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfgen::{MismatchSpec, SurfaceCodeSpec};

    fn small(arms: &[Arm]) -> ExperimentConfig {
        ExperimentConfig {
            code: CodeSource::Surface(SurfaceCodeSpec::new(3, 0.02)),
            mismatch: Some(MismatchSpec::random(10.0, 4)),
            trace_shots: 20_000,
            eval_shots: 20_000,
            calibration_shots: 10_000,
            arms: arms.to_vec(),
            seed: 9,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn arm_names_round_trip() {
        for a in Arm::ALL {
            assert_eq!(a.name().parse::<Arm>().unwrap(), a);
        }
        assert!("bogus".parse::<Arm>().is_err());
    }

    #[test]
    fn unit_mismatch_agrees_shot_by_shot() {
        let mut cfg = small(&[Arm::Oracle, Arm::Mismatched]);
        cfg.mismatch = Some(MismatchSpec::random(1.0, 4));
        let (arms, truth) = PreparedArms::prepare(&cfg).unwrap();
        let sampler = Sampler::new(&truth, 3);
        for i in 0..5000 {
            let p = arms.predict(&sampler.sample(i).detectors).unwrap();
            assert_eq!(p[0], p[1]);
        }
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.rows[0].estimate, r.rows[1].estimate);
    }

    #[test]
    fn report_is_deterministic_and_serializes() {
        let cfg = small(&[
            Arm::Oracle,
            Arm::Mismatched,
            Arm::Aligned,
            Arm::AlignedHeuristic,
        ]);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with(MetricsReport::CSV_HEADER));
        assert_eq!(text.lines().count(), 5);
        let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(json["rows"][3]["arm"], "aligned+heuristic");
        assert_eq!(json["environment"]["seed"], 9);
        for r in &a.rows {
            assert!(r.estimate.ci_low <= r.estimate.ler && r.estimate.ler <= r.estimate.ci_high);
        }
        assert_eq!(a.row(Arm::Aligned).unwrap().trace_trials, 20_000);
        assert_eq!(a.row(Arm::Oracle).unwrap().trace_trials, 0);
        assert!(a.row(Arm::AlignedHeuristic).unwrap().trigger_rate > 0.0);
    }

    #[test]
    fn single_point_sweep_matches_run() {
        let cfg = small(&[Arm::Oracle, Arm::Aligned]);
        let points = sweep(&cfg, SweepAxis::P, &[0.02]).unwrap();
        assert_eq!(points[0].1.rows, run_experiment(&cfg).unwrap().rows);
        let mut out = Vec::new();
        write_sweep_csv(SweepAxis::P, &points, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 3);
        assert!(sweep(&cfg, SweepAxis::P, &[]).is_err());
    }

    #[test]
    fn windowed_trace_keeps_last_shots() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.02)).unwrap();
        let dec = Decoder::new(DecodingGraph::build(&m).unwrap());
        let pairs = PairSet::local(dec.graph());
        let w = trace_shots(&m, &dec, pairs.clone(), 3000, Some(1000), 5).unwrap();
        // Reference: stream every shot through a windowed store.
        let mut reference = TraceStore::with_pairs(dec.graph(), pairs).windowed(1000);
        let s = Sampler::new(&m, 5);
        for i in 0..3000 {
            reference.record(&dec.decode(&s.sample(i).detectors).unwrap());
        }
        assert_eq!(w.trials(), 1000);
        assert_eq!(w.edge_counts(), reference.edge_counts());
        assert_eq!(w.pair_counts(), reference.pair_counts());
    }
}
