//! Shared fixtures for the pipeline benchmarks.

use reweigh_core::dem::{DecodingGraph, DetectorErrorModel};
use reweigh_core::sampler::Sampler;
use reweigh_core::surfgen::{generate_surface_pheno, SurfaceCodeSpec};

/// Surface-code model and graph at distance `d` with `d` rounds.
pub fn surface(d: usize, p: f64) -> (DetectorErrorModel, DecodingGraph) {
    let model = generate_surface_pheno(&SurfaceCodeSpec::new(d, p)).expect("valid spec");
    let graph = DecodingGraph::build(&model).expect("graph builds");
    (model, graph)
}

/// The first `n` nonempty syndromes under `seed`.
pub fn syndromes(model: &DetectorErrorModel, n: usize, seed: u64) -> Vec<Vec<u32>> {
    let sampler = Sampler::new(model, seed);
    (0..)
        .map(|i| sampler.sample(i).detectors)
        .filter(|d| !d.is_empty())
        .take(n)
        .collect()
}
