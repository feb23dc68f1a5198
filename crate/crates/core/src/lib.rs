//! Decoding-graph re-weighting for minimum-weight perfect matching decoders.
//!
//! The pipeline: build a noise model ([`dem`], [`surfgen`]), sample shots
//! ([`sampler`]), decode them ([`matcher`]), accumulate matching statistics
//! ([`tracer`]) and feed them back into the edge weights ([`reweight`],
//! [`nnrw`]). [`harness`] wires the stages into experiments.

pub mod dem;
pub mod harness;
pub mod matcher;
pub mod nnrw;
pub mod reweight;
pub mod sampler;
pub mod surfgen;
pub mod tracer;
