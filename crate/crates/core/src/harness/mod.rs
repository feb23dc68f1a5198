//! Experiment runner: config, paired multi-arm evaluation, sweeps and
//! threshold estimates.
//!
//! Every arm decodes the same evaluation shots, so arm differences are not
//! blurred by sampling noise between arms. Tracing, trigger calibration and
//! NN dataset generation draw from separate seed streams.

mod config;
mod experiment;
mod stats;

use thiserror::Error;

pub use config::{
    parse_arms, CodeSource, ConfigError, Environment, ExperimentConfig, NnSettings, PairSource,
    TauSetting,
};
pub use experiment::{
    detector_counts, estimate_threshold, load_model, run_experiment, sweep, trace_shots,
    write_sweep_csv, Arm, ArmRow, MetricsReport, PreparedArms, SweepAxis, ThresholdEstimate,
};
pub use stats::{
    estimate_ler, estimate_ler_by_faults, estimate_ler_tilted, threshold_crossing, wilson_interval,
    LerEstimate, Predictor, StratifiedLer, ThresholdError, TiltedEstimate, Z95,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Parse(#[from] crate::dem::ParseError),
    #[error(transparent)]
    Graph(#[from] crate::dem::GraphError),
    #[error(transparent)]
    Surfgen(#[from] crate::surfgen::SurfgenError),
    #[error(transparent)]
    Match(#[from] crate::matcher::MatchError),
    #[error(transparent)]
    Trace(#[from] crate::tracer::TraceError),
    #[error(transparent)]
    Reweight(#[from] crate::reweight::ReweightError),
    #[error(transparent)]
    Nn(#[from] crate::nnrw::NnError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// True for problems with the user's input rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_) | HarnessError::Surfgen(_) | HarnessError::Parse(_)
        )
    }
}
