//! Line-oriented experiment config.
//!
//! ```text
//! # comment
//! seed = 7
//! [code]
//! distance = 5
//! p = 0.01
//! [mismatch]
//! kind = random
//! strength = 10
//! ```
//!
//! Blank lines and `#` comments are ignored. `[name]` opens a section; keys
//! before the first section belong to the top level. Unknown sections or
//! keys are errors, so typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::Arm;
use crate::nnrw::TrainConfig;
use crate::reweight::{CorrelationMode, ReweightPolicy};
use crate::surfgen::{MismatchKind, MismatchSpec, SurfaceCodeSpec};

#[derive(Debug, Error, PartialEq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

/// Where the true noise model comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum CodeSource {
    Surface(SurfaceCodeSpec),
    Dem(PathBuf),
}

/// Which pair statistics feed the correlation re-weighters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairSource {
    Traced,
    Truth,
}

/// Trigger threshold: fixed, or calibrated to a target trigger rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauSetting {
    Fixed(usize),
    Calibrated { target: f64, lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NnSettings {
    pub train: TrainConfig,
    /// Pre-trained params; training is skipped when set.
    pub params: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub code: CodeSource,
    pub mismatch: Option<MismatchSpec>,
    pub trace_shots: u64,
    pub eval_shots: u64,
    /// Shots used to calibrate `tau`.
    pub calibration_shots: u64,
    pub policy: ReweightPolicy,
    pub tau: TauSetting,
    /// Trace with true weights instead of mismatched ones.
    pub oracle_trace: bool,
    pub pairs: PairSource,
    pub nn: NnSettings,
    pub arms: Vec<Arm>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            code: CodeSource::Surface(SurfaceCodeSpec::new(3, 0.01)),
            mismatch: None,
            trace_shots: 1_000_000,
            eval_shots: 1_000_000,
            calibration_shots: 100_000,
            policy: ReweightPolicy::default(),
            tau: TauSetting::Calibrated {
                target: 0.10,
                lo: 0.05,
                hi: 0.15,
            },
            oracle_trace: false,
            pairs: PairSource::Traced,
            nn: NnSettings {
                train: TrainConfig::default(),
                params: None,
            },
            arms: Arm::ALL.to_vec(),
            seed: 0,
            out_dir: None,
        }
    }
}

/// Sections of raw `key = value` entries with their line numbers.
type Raw = BTreeMap<String, BTreeMap<String, (usize, String)>>;

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut raw: Raw = BTreeMap::new();
    let mut section = String::new();
    raw.insert(section.clone(), BTreeMap::new());
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(n, "unterminated section header"))?;
            section = name.trim().to_string();
            if raw.insert(section.clone(), BTreeMap::new()).is_some() {
                return Err(ConfigError::new(
                    n,
                    format!("duplicate section [{section}]"),
                ));
            }
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(n, format!("expected 'key = value', got '{line}'")))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() {
            return Err(ConfigError::new(n, "empty key"));
        }
        let sec = raw.get_mut(&section).expect("section inserted");
        if sec.insert(k.clone(), (n, v)).is_some() {
            return Err(ConfigError::new(n, format!("duplicate key '{k}'")));
        }
    }
    Ok(raw)
}

/// Typed access to one section; tracks which keys were consumed.
struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, (usize, String)>,
}

impl Section<'_> {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| {
                ConfigError::new(
                    line,
                    format!("invalid value '{v}' for {}{key}", self.prefix()),
                )
            }),
        }
    }

    fn take_with<T>(
        &mut self,
        key: &str,
        f: impl FnOnce(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => f(&v).map(Some).ok_or_else(|| {
                ConfigError::new(
                    line,
                    format!("invalid value '{v}' for {}{key}", self.prefix()),
                )
            }),
        }
    }

    fn prefix(&self) -> String {
        if self.name.is_empty() {
            String::new()
        } else {
            format!("{}.", self.name)
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(ConfigError::new(
                line,
                format!(
                    "unknown key '{k}'{}",
                    if self.name.is_empty() {
                        String::new()
                    } else {
                        format!(" in [{}]", self.name)
                    }
                ),
            )),
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Parses a comma-separated arm list.
pub fn parse_arms(v: &str) -> Option<Vec<Arm>> {
    let arms: Option<Vec<Arm>> = v.split(',').map(|s| s.trim().parse().ok()).collect();
    arms.filter(|a| !a.is_empty())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw = tokenize(text)?;
        let mut cfg = Self::default();
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        for (name, entries) in raw {
            const KNOWN: [&str; 8] = [
                "", "code", "mismatch", "shots", "reweight", "nn", "output", "tau",
            ];
            if !KNOWN.contains(&name.as_str()) {
                let line = entries.values().map(|e| e.0).min().unwrap_or(0);
                return Err(ConfigError::new(line, format!("unknown section [{name}]")));
            }
            sections.insert(name, Section { name: "", entries });
        }
        let mut get = |name: &'static str| {
            let mut s = sections.remove(name).unwrap_or(Section {
                name: "",
                entries: BTreeMap::new(),
            });
            s.name = name;
            s
        };

        let mut top = get("");
        if let Some(seed) = top.take("seed")? {
            cfg.seed = seed;
        }
        top.finish()?;

        let mut code = get("code");
        let dem: Option<PathBuf> = code.take("dem")?;
        let mut spec = SurfaceCodeSpec::new(3, 0.01);
        if let Some(d) = code.take("distance")? {
            spec = SurfaceCodeSpec::new(d, spec.p);
        }
        if let Some(p) = code.take::<f64>("p")? {
            spec.p = p;
            spec.p_meas = p;
        }
        if let Some(r) = code.take("rounds")? {
            spec.rounds = r;
        }
        if let Some(pm) = code.take("p_meas")? {
            spec.p_meas = pm;
        }
        if let Some(b) = code.take("y_bias")? {
            spec.y_bias = b;
        }
        let code_line = code.entries.values().map(|e| e.0).min().unwrap_or(0);
        code.finish()?;
        cfg.code = match dem {
            Some(path) => CodeSource::Dem(path),
            None => {
                spec.validate()
                    .map_err(|e| ConfigError::new(code_line, e.to_string()))?;
                CodeSource::Surface(spec)
            }
        };

        let mut mm = get("mismatch");
        if !mm.entries.is_empty() {
            let first_line = mm.entries.values().map(|e| e.0).min().unwrap_or(0);
            let kind = mm
                .take_with("kind", |v| match v {
                    "random" => Some(MismatchKind::Random),
                    "worst-case" | "worstcase" | "worst_case" => Some(MismatchKind::WorstCase),
                    _ => None,
                })?
                .unwrap_or(MismatchKind::Random);
            let strength: f64 = mm
                .take("strength")?
                .ok_or_else(|| ConfigError::new(first_line, "[mismatch] needs 'strength'"))?;
            if !(strength >= 1.0 && strength.is_finite()) {
                return Err(ConfigError::new(
                    first_line,
                    format!("mismatch strength must be >= 1, got {strength}"),
                ));
            }
            let seed = mm
                .take("seed")?
                .unwrap_or(cfg.seed.wrapping_add(0x6d69_736d));
            let data_only = mm
                .take_with("data_only", parse_bool)?
                .unwrap_or(kind == MismatchKind::WorstCase);
            cfg.mismatch = Some(MismatchSpec {
                kind,
                strength,
                seed,
                data_only,
            });
        }
        mm.finish()?;

        let mut shots = get("shots");
        if let Some(t) = shots.take("trace")? {
            cfg.trace_shots = t;
        }
        if let Some(t) = shots.take::<u64>("eval")? {
            if t == 0 {
                return Err(ConfigError::new(0, "shots.eval must be at least 1"));
            }
            cfg.eval_shots = t;
        }
        if let Some(t) = shots.take("calibration")? {
            cfg.calibration_shots = t;
        }
        shots.finish()?;

        let mut rw = get("reweight");
        let rw_line = rw.entries.values().map(|e| e.0).min().unwrap_or(0);
        if let Some(w) = rw.take("window")? {
            cfg.policy.window = Some(w);
        }
        if let Some(m) = rw.take("min_trials")? {
            cfg.policy.min_trials = m;
        }
        if let Some(r) = rw.take("rounds")? {
            cfg.policy.rounds = r;
        }
        if let Some(mode) = rw.take_with("mode", |v| match v {
            "off" => Some(CorrelationMode::Off),
            "heuristic" => Some(CorrelationMode::Heuristic),
            "nn" => Some(CorrelationMode::Nn),
            _ => None,
        })? {
            cfg.policy.mode = mode;
        }
        if let Some(e) = rw.take("epsilon")? {
            cfg.policy.epsilon = Some(e);
        }
        if let Some(s) = rw.take("scale")? {
            cfg.policy.scale = s;
        }
        if let Some(b) = rw.take_with("oracle_trace", parse_bool)? {
            cfg.oracle_trace = b;
        }
        if let Some(p) = rw.take_with("pairs", |v| match v {
            "traced" => Some(PairSource::Traced),
            "truth" => Some(PairSource::Truth),
            _ => None,
        })? {
            cfg.pairs = p;
        }
        rw.finish()?;
        cfg.policy
            .validate()
            .map_err(|e| ConfigError::new(rw_line, e.to_string()))?;

        let mut tau = get("tau");
        let fixed: Option<usize> = tau.take("fixed")?;
        let target: Option<f64> = tau.take("target")?;
        let lo: Option<f64> = tau.take("lo")?;
        let hi: Option<f64> = tau.take("hi")?;
        tau.finish()?;
        cfg.tau = match fixed {
            Some(t) => TauSetting::Fixed(t),
            None => TauSetting::Calibrated {
                target: target.unwrap_or(0.10),
                lo: lo.unwrap_or(0.05),
                hi: hi.unwrap_or(0.15),
            },
        };
        if let TauSetting::Fixed(t) = cfg.tau {
            cfg.policy.tau = t;
        }

        let mut nn = get("nn");
        let nn_line = nn.entries.values().map(|e| e.0).min().unwrap_or(0);
        let t = &mut cfg.nn.train;
        macro_rules! field {
            ($key:literal, $slot:expr) => {
                if let Some(v) = nn.take($key)? {
                    $slot = v;
                }
            };
        }
        field!("learning_rate", t.learning_rate);
        field!("weight_decay", t.weight_decay);
        field!("batch_size", t.batch_size);
        field!("epochs", t.epochs);
        field!("dataset_size", t.dataset_size);
        field!("q", t.q);
        field!("sigma", t.sigma);
        field!("hidden", t.hidden);
        cfg.nn.params = nn.take("params")?;
        nn.finish()?;
        cfg.nn
            .train
            .validate()
            .map_err(|e| ConfigError::new(nn_line, e.to_string()))?;

        let mut out = get("output");
        cfg.out_dir = out.take("dir")?;
        if let Some(arms) = out.take_with("arms", parse_arms)? {
            cfg.arms = arms;
        }
        out.finish()?;
        Ok(cfg)
    }

    /// Parses a file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(0, format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let CodeSource::Dem(p) = &mut cfg.code {
            resolve(p);
        }
        if let Some(p) = &mut cfg.nn.params {
            resolve(p);
        }
        cfg.check_files()?;
        Ok(cfg)
    }

    /// Referenced input files must exist.
    pub fn check_files(&self) -> Result<(), ConfigError> {
        let mut files = Vec::new();
        if let CodeSource::Dem(p) = &self.code {
            files.push(p);
        }
        if let Some(p) = &self.nn.params {
            files.push(p);
        }
        for f in files {
            if !f.is_file() {
                return Err(ConfigError::new(
                    0,
                    format!("file not found: {}", f.display()),
                ));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical config text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Canonical text form; parses back to the same config.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "[code]")?;
        match &self.code {
            CodeSource::Dem(p) => writeln!(f, "dem = {}", p.display())?,
            CodeSource::Surface(s) => {
                writeln!(f, "distance = {}", s.distance)?;
                writeln!(f, "rounds = {}", s.rounds)?;
                writeln!(f, "p = {}", s.p)?;
                writeln!(f, "p_meas = {}", s.p_meas)?;
                writeln!(f, "y_bias = {}", s.y_bias)?;
            }
        }
        if let Some(m) = &self.mismatch {
            writeln!(f, "[mismatch]")?;
            let kind = match m.kind {
                MismatchKind::Random => "random",
                MismatchKind::WorstCase => "worst-case",
            };
            writeln!(f, "kind = {kind}")?;
            writeln!(f, "strength = {}", m.strength)?;
            writeln!(f, "seed = {}", m.seed)?;
            writeln!(f, "data_only = {}", m.data_only)?;
        }
        writeln!(f, "[shots]")?;
        writeln!(f, "trace = {}", self.trace_shots)?;
        writeln!(f, "eval = {}", self.eval_shots)?;
        writeln!(f, "calibration = {}", self.calibration_shots)?;
        writeln!(f, "[reweight]")?;
        if let Some(w) = self.policy.window {
            writeln!(f, "window = {w}")?;
        }
        writeln!(f, "min_trials = {}", self.policy.min_trials)?;
        writeln!(f, "rounds = {}", self.policy.rounds)?;
        let mode = match self.policy.mode {
            CorrelationMode::Off => "off",
            CorrelationMode::Heuristic => "heuristic",
            CorrelationMode::Nn => "nn",
        };
        writeln!(f, "mode = {mode}")?;
        if let Some(e) = self.policy.epsilon {
            writeln!(f, "epsilon = {e}")?;
        }
        writeln!(f, "scale = {}", self.policy.scale)?;
        writeln!(f, "oracle_trace = {}", self.oracle_trace)?;
        let pairs = match self.pairs {
            PairSource::Traced => "traced",
            PairSource::Truth => "truth",
        };
        writeln!(f, "pairs = {pairs}")?;
        writeln!(f, "[tau]")?;
        match self.tau {
            TauSetting::Fixed(t) => writeln!(f, "fixed = {t}")?,
            TauSetting::Calibrated { target, lo, hi } => {
                writeln!(f, "target = {target}")?;
                writeln!(f, "lo = {lo}")?;
                writeln!(f, "hi = {hi}")?;
            }
        }
        let t = &self.nn.train;
        writeln!(f, "[nn]")?;
        writeln!(f, "learning_rate = {}", t.learning_rate)?;
        writeln!(f, "weight_decay = {}", t.weight_decay)?;
        writeln!(f, "batch_size = {}", t.batch_size)?;
        writeln!(f, "epochs = {}", t.epochs)?;
        writeln!(f, "dataset_size = {}", t.dataset_size)?;
        writeln!(f, "q = {}", t.q)?;
        writeln!(f, "sigma = {}", t.sigma)?;
        writeln!(f, "hidden = {}", t.hidden)?;
        if let Some(p) = &self.nn.params {
            writeln!(f, "params = {}", p.display())?;
        }
        writeln!(f, "[output]")?;
        if let Some(d) = &self.out_dir {
            writeln!(f, "dir = {}", d.display())?;
        }
        let arms: Vec<&str> = self.arms.iter().map(|a| a.name()).collect();
        writeln!(f, "arms = {}", arms.join(","))
    }
}

/// Echo of the settings that identify a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Environment {
    pub seed: u64,
    pub config_hash: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# worst-case run
seed = 11
[code]
distance = 5
p = 0.003
[mismatch]
kind = worst-case
strength = 10
[shots]
trace = 1000
eval = 2000
[reweight]
mode = heuristic
[tau]
fixed = 4
[output]
arms = oracle, mismatched,aligned
";

    #[test]
    fn parses_sample() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.seed, 11);
        let CodeSource::Surface(s) = &c.code else {
            panic!()
        };
        assert_eq!((s.distance, s.rounds, s.p, s.p_meas), (5, 5, 0.003, 0.003));
        let m = c.mismatch.unwrap();
        assert_eq!(m.kind, MismatchKind::WorstCase);
        assert!(m.data_only);
        assert_eq!((c.trace_shots, c.eval_shots), (1000, 2000));
        assert_eq!(c.tau, TauSetting::Fixed(4));
        assert_eq!(c.policy.tau, 4);
        assert_eq!(c.arms, vec![Arm::Oracle, Arm::Mismatched, Arm::Aligned]);
    }

    #[test]
    fn display_round_trips() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        let back = ExperimentConfig::parse(&c.to_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_string()).unwrap(), d);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = ExperimentConfig::parse("seed = 1\n[code]\ndistanse = 5\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("distanse"));
        let e = ExperimentConfig::parse("[code]\ndistance = four\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = ExperimentConfig::parse("[bogus]\nx = 1\n").unwrap_err();
        assert!(e.message.contains("bogus"));
        let e = ExperimentConfig::parse("[code]\ndistance = 4\n").unwrap_err();
        assert!(e.message.contains("distance"), "{e}");
        assert!(ExperimentConfig::parse("just words\n").is_err());
        assert!(ExperimentConfig::parse("[shots]\neval = 0\n").is_err());
        assert!(ExperimentConfig::parse("[nn]\nq = 0\n").is_err());
        assert!(ExperimentConfig::parse("[reweight]\nrounds = 0\n").is_err());
        assert!(ExperimentConfig::parse("[mismatch]\nkind = random\n").is_err());
    }

    #[test]
    fn missing_dem_file_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, "[code]\ndem = nowhere.dem\n").unwrap();
        let e = ExperimentConfig::load(&path).unwrap_err();
        assert!(e.message.contains("nowhere.dem"));
        std::fs::write(
            dir.path().join("nowhere.dem"),
            "dem v1 detectors 0 observables 0\n",
        )
        .unwrap();
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!(c.code, CodeSource::Dem(dir.path().join("nowhere.dem")));
    }
}
