//! Rotated surface code memory experiments under phenomenological noise, and
//! noise-model mismatch injection.
//!
//! Layout (distance `d`): data qubit `(x, y)` for `x, y in 0..d`, drawn at
//! doubled coordinates `(2x, 2y)`. Plaquette `(i, j)` for `i, j in 0..=d`
//! touches the data qubits `(i-1..=i, j-1..=j)` that exist and sits at
//! `(2i-1, 2j-1)`. Bulk plaquettes alternate X (`i + j` even) and Z
//! (`i + j` odd) type. Weight-two X plaquettes sit on the top and bottom
//! edges and weight-two Z plaquettes on the left and right edges, so X
//! errors form chains running from top to bottom.
//!
//! The experiment prepares `|0>`, runs `rounds` noisy syndrome rounds and a
//! noiseless final data readout in the Z basis. Before each round every data
//! qubit suffers a (possibly Y-biased) depolarizing channel, and every check
//! measurement flips with probability `p_meas`. Z checks yield `rounds + 1`
//! detector layers; X checks, being random in the first round, yield
//! `rounds - 1`. The observable `L0` is logical Z along data row 0, flipped
//! by X errors on that row.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dem::{Component, DetectorErrorModel, ExclusiveChannel, Mechanism};

/// Upper clamp for mismatched probabilities; keeps every weight nonnegative.
pub const MAX_MISMATCHED_PROB: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SurfgenError {
    #[error("distance must be an odd integer >= 3, got {0}")]
    Distance(usize),
    #[error("rounds must be >= 1")]
    Rounds,
    #[error("{name} = {value} must lie in (0, 1)")]
    Rate { name: &'static str, value: f64 },
    #[error("y_bias must be positive and finite, got {0}")]
    Bias(f64),
    #[error("mismatch strength must be >= 1, got {0}")]
    Strength(f64),
    #[error("model carries no data-qubit row metadata; worst-case mismatch needs a generated surface code")]
    MissingRows,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceCodeSpec {
    pub distance: usize,
    pub rounds: usize,
    pub p: f64,
    pub p_meas: f64,
    /// Ratio of the Y arm to each of the X and Z arms; 1 is uniform depolarizing.
    pub y_bias: f64,
}

impl SurfaceCodeSpec {
    /// `distance` rounds, `p_meas = p`, unbiased.
    pub fn new(distance: usize, p: f64) -> Self {
        Self {
            distance,
            rounds: distance,
            p,
            p_meas: p,
            y_bias: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SurfgenError> {
        if self.distance < 3 || self.distance.is_multiple_of(2) {
            return Err(SurfgenError::Distance(self.distance));
        }
        if self.rounds == 0 {
            return Err(SurfgenError::Rounds);
        }
        for (name, value) in [("p", self.p), ("p_meas", self.p_meas)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(SurfgenError::Rate { name, value });
            }
        }
        if !(self.y_bias > 0.0 && self.y_bias.is_finite()) {
            return Err(SurfgenError::Bias(self.y_bias));
        }
        Ok(())
    }

    /// `(pX, pY, pZ)` with `pX = pZ = p/(2+η)` and `pY = ηp/(2+η)`.
    pub fn arm_probabilities(&self) -> (f64, f64, f64) {
        let px = self.p / (2.0 + self.y_bias);
        let py = self.y_bias * self.p / (2.0 + self.y_bias);
        (px, py, px)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Basis {
    X,
    Z,
}

#[derive(Clone, Copy, Debug)]
struct Check {
    i: i64,
    j: i64,
    basis: Basis,
}

struct Lattice {
    d: i64,
    checks: Vec<Check>,
    /// Plaquette position -> check index.
    at: HashMap<(i64, i64), usize>,
}

impl Lattice {
    fn new(d: usize) -> Self {
        let d = d as i64;
        let mut checks = Vec::new();
        let mut at = HashMap::new();
        for j in 0..=d {
            for i in 0..=d {
                let even = (i + j) % 2 == 0;
                let bulk = (1..d).contains(&i) && (1..d).contains(&j);
                let top_bottom = (j == 0 || j == d) && (1..d).contains(&i) && even;
                let sides = (i == 0 || i == d) && (1..d).contains(&j) && !even;
                if bulk || top_bottom || sides {
                    at.insert((i, j), checks.len());
                    checks.push(Check {
                        i,
                        j,
                        basis: if even { Basis::X } else { Basis::Z },
                    });
                }
            }
        }
        Self { d, checks, at }
    }

    /// Checks of `basis` touching data qubit `(x, y)`.
    fn adjacent(&self, x: i64, y: i64, basis: Basis) -> Vec<usize> {
        let mut out = Vec::with_capacity(2);
        for (i, j) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
            if let Some(&c) = self.at.get(&(i, j)) {
                if self.checks[c].basis == basis {
                    out.push(c);
                }
            }
        }
        out
    }
}

struct Detectors {
    index: HashMap<(usize, usize), u32>,
    count: u32,
}

impl Detectors {
    fn get(&self, check: usize, layer: usize) -> Option<u32> {
        self.index.get(&(check, layer)).copied()
    }
}

/// Generates the detector error model of a rotated surface code memory-Z
/// experiment under phenomenological noise.
pub fn generate_surface_pheno(spec: &SurfaceCodeSpec) -> Result<DetectorErrorModel, SurfgenError> {
    spec.validate()?;
    let lat = Lattice::new(spec.distance);
    let r = spec.rounds;
    let mut model = DetectorErrorModel::default();

    let mut dets = Detectors {
        index: HashMap::new(),
        count: 0,
    };
    for t in 0..=r {
        for (ci, c) in lat.checks.iter().enumerate() {
            let present = match c.basis {
                Basis::Z => true,
                Basis::X => t >= 1 && t < r,
            };
            if present {
                dets.index.insert((ci, t), dets.count);
                model.layout.coords.insert(
                    dets.count,
                    [(2 * c.i - 1) as f64, (2 * c.j - 1) as f64, t as f64],
                );
                dets.count += 1;
            }
        }
    }
    model.num_detectors = dets.count as usize;
    model.num_observables = 1;

    // Signature fragments per edge, used to derive translation-invariant types.
    let mut fragments: BTreeMap<(u32, Option<u32>), BTreeSet<String>> = BTreeMap::new();
    let mut note = |comp: &Component, frag: String| {
        let key = match comp.detectors.as_slice() {
            [a] => (*a, None),
            [a, b] => (*a, Some(*b)),
            _ => return,
        };
        fragments.entry(key).or_default().insert(frag);
    };

    let (px, py, pz) = spec.arm_probabilities();
    for t in 0..r {
        for y in 0..lat.d {
            for x in 0..lat.d {
                let obs = u64::from(y == 0);
                let xpart = data_component(&lat, &dets, x, y, t, Basis::Z, obs, &mut note);
                let zpart = data_component(&lat, &dets, x, y, t, Basis::X, 0, &mut note);
                let row = y as u32;
                let arms = [
                    (px, xpart.iter().cloned().collect::<Vec<_>>()),
                    (py, xpart.iter().chain(zpart.iter()).cloned().collect()),
                    (pz, zpart.iter().cloned().collect()),
                ];
                model.channels.push(ExclusiveChannel {
                    mechanisms: arms
                        .into_iter()
                        .map(|(p, comps)| Mechanism::new(p, comps).with_row(row))
                        .collect(),
                });
            }
        }
        for (ci, c) in lat.checks.iter().enumerate() {
            let before = dets.get(ci, t);
            let after = dets.get(ci, t + 1);
            let detectors: Vec<u32> = before.into_iter().chain(after).collect();
            let tag = match c.basis {
                Basis::X => "X",
                Basis::Z => "Z",
            };
            let comps = if detectors.is_empty() {
                vec![]
            } else {
                let comp = Component::new(detectors, 0);
                let frag = match (before, after) {
                    (Some(_), Some(_)) => format!("{tag}t"),
                    (None, _) => format!("{tag}t-"),
                    (_, None) => format!("{tag}t+"),
                };
                note(&comp, frag);
                vec![comp]
            };
            model
                .channels
                .push(ExclusiveChannel::single(Mechanism::new(spec.p_meas, comps)));
        }
    }

    let signatures: BTreeSet<String> = fragments
        .values()
        .map(|f| f.iter().cloned().collect::<Vec<_>>().join("|"))
        .collect();
    let ids: HashMap<String, u32> = signatures
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i as u32))
        .collect();
    for (key, frag) in fragments {
        let sig = frag.into_iter().collect::<Vec<_>>().join("|");
        model.layout.edge_types.insert(key, ids[&sig]);
    }
    Ok(model)
}

/// Component flipping the `basis` checks around data qubit `(x, y)` at layer `t`.
#[allow(clippy::too_many_arguments)]
fn data_component(
    lat: &Lattice,
    dets: &Detectors,
    x: i64,
    y: i64,
    t: usize,
    basis: Basis,
    obs: u64,
    note: &mut impl FnMut(&Component, String),
) -> Option<Component> {
    let checks = lat.adjacent(x, y, basis);
    let ids: Vec<u32> = checks.iter().filter_map(|&c| dets.get(c, t)).collect();
    if ids.is_empty() {
        return None;
    }
    let tag = match basis {
        Basis::X => "X",
        Basis::Z => "Z",
    };
    let frag = match checks.as_slice() {
        [a, b] => {
            let (ca, cb) = (lat.checks[*a], lat.checks[*b]);
            format!("{tag}s{},{}", cb.i - ca.i, cb.j - ca.j)
        }
        [a] => {
            let c = lat.checks[*a];
            format!("{tag}b{},{}", 2 * x - (2 * c.i - 1), 2 * y - (2 * c.j - 1))
        }
        _ => unreachable!("a data qubit touches at most two checks of one basis"),
    };
    let comp = Component::new(ids, obs);
    note(&comp, frag);
    Some(comp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MismatchKind {
    Random,
    WorstCase,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MismatchSpec {
    pub kind: MismatchKind,
    pub strength: f64,
    pub seed: u64,
    /// Leave mechanisms without a data-qubit row (measurement errors) untouched.
    pub data_only: bool,
}

impl MismatchSpec {
    pub fn random(strength: f64, seed: u64) -> Self {
        Self {
            kind: MismatchKind::Random,
            strength,
            seed,
            data_only: false,
        }
    }

    pub fn worst_case(strength: f64) -> Self {
        Self {
            kind: MismatchKind::WorstCase,
            strength,
            seed: 0,
            data_only: true,
        }
    }
}

pub fn apply_mismatch(
    model: &DetectorErrorModel,
    spec: &MismatchSpec,
) -> Result<DetectorErrorModel, SurfgenError> {
    match spec.kind {
        MismatchKind::Random => {
            apply_random_mismatch_with(model, spec.strength, spec.seed, spec.data_only)
        }
        MismatchKind::WorstCase => apply_worstcase_mismatch(model, spec.strength),
    }
}

/// Multiplies every mechanism probability by an independent log-uniform
/// factor in `[1/strength, strength]`.
pub fn apply_random_mismatch(
    model: &DetectorErrorModel,
    strength: f64,
    seed: u64,
) -> Result<DetectorErrorModel, SurfgenError> {
    apply_random_mismatch_with(model, strength, seed, false)
}

pub fn apply_random_mismatch_with(
    model: &DetectorErrorModel,
    strength: f64,
    seed: u64,
    data_only: bool,
) -> Result<DetectorErrorModel, SurfgenError> {
    check_strength(strength)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ln_n = strength.ln();
    let out = model.map_probabilities(|m| {
        // One draw per mechanism regardless of `data_only` keeps factors aligned.
        let u: f64 = rng.random_range(-1.0..=1.0);
        if data_only && m.row.is_none() {
            m.probability
        } else {
            m.probability * (u * ln_n).exp()
        }
    });
    Ok(finish(out))
}

/// Scales data mechanisms in the first `(d-1)/2` rows up by `strength` and the
/// remaining `(d+1)/2` rows down by `strength`. Measurement errors are untouched.
pub fn apply_worstcase_mismatch(
    model: &DetectorErrorModel,
    strength: f64,
) -> Result<DetectorErrorModel, SurfgenError> {
    check_strength(strength)?;
    let rows = model
        .mechanisms()
        .filter_map(|(_, _, m)| m.row)
        .max()
        .map(|r| r + 1)
        .ok_or(SurfgenError::MissingRows)?;
    let upper = (rows.saturating_sub(1)) / 2;
    let out = model.map_probabilities(|m| match m.row {
        Some(r) if r < upper => m.probability * strength,
        Some(_) => m.probability / strength,
        None => m.probability,
    });
    Ok(finish(out))
}

fn check_strength(strength: f64) -> Result<(), SurfgenError> {
    if strength >= 1.0 && strength.is_finite() {
        Ok(())
    } else {
        Err(SurfgenError::Strength(strength))
    }
}

/// Clamps to `(0, 0.5]` and rescales any channel whose arms now sum past one.
fn finish(mut model: DetectorErrorModel) -> DetectorErrorModel {
    for ch in &mut model.channels {
        for m in &mut ch.mechanisms {
            m.probability = m.probability.clamp(f64::MIN_POSITIVE, MAX_MISMATCHED_PROB);
        }
        let total = ch.total_probability();
        if total >= 1.0 {
            let s = (1.0 - 1e-9) / total;
            for m in &mut ch.mechanisms {
                m.probability *= s;
            }
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::DecodingGraph;

    fn components_of(g: &DecodingGraph) -> usize {
        // Union-find over detector nodes, ignoring the boundary.
        let n = g.num_detectors();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut x = x;
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in g.edges() {
            if let Some(b) = e.b {
                let (ra, rb) = (
                    find(&mut parent, e.a as usize),
                    find(&mut parent, b as usize),
                );
                parent[ra] = rb;
            }
        }
        (0..n).filter(|&x| find(&mut parent, x) == x).count()
    }

    #[test]
    fn lattice_has_d2_minus_1_checks() {
        for d in [3, 5, 7] {
            let lat = Lattice::new(d);
            assert_eq!(lat.checks.len(), d * d - 1);
            let x = lat.checks.iter().filter(|c| c.basis == Basis::X).count();
            assert_eq!(x, (d * d - 1) / 2);
        }
    }

    #[test]
    fn detector_counts() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        // Z: 4 checks x 4 layers, X: 4 checks x 2 layers.
        assert_eq!(m.num_detectors, 24);
        assert_eq!(m.channels.len(), 3 * (9 + 8));
    }

    #[test]
    fn uniform_depolarizing_arms() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        for ch in m.channels.iter().filter(|c| c.mechanisms.len() == 3) {
            for mech in &ch.mechanisms {
                assert!((mech.probability - 0.01 / 3.0).abs() < 1e-15);
            }
            assert!((ch.total_probability() - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn biased_arms_sum_to_p() {
        let spec = SurfaceCodeSpec {
            y_bias: 10.0,
            ..SurfaceCodeSpec::new(3, 0.01)
        };
        let (px, py, pz) = spec.arm_probabilities();
        assert!((px + py + pz - 0.01).abs() < 1e-12);
        assert!((py / px - 10.0).abs() < 1e-12);
    }

    #[test]
    fn two_subgraphs_each_touching_boundary() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        let g = DecodingGraph::build(&m).unwrap();
        assert_eq!(components_of(&g), 2);
        let boundary_touch: BTreeSet<bool> = g
            .edges()
            .iter()
            .filter(|e| e.is_boundary())
            .map(|e| m.layout.coords[&e.a][0] >= 0.0)
            .collect();
        assert!(!boundary_touch.is_empty());
        // Both bases own at least one boundary edge.
        let lat = Lattice::new(3);
        let mut bases = BTreeSet::new();
        for e in g.edges().iter().filter(|e| e.is_boundary()) {
            let c = m.layout.coords[&e.a];
            let (i, j) = ((c[0] as i64 + 1) / 2, (c[1] as i64 + 1) / 2);
            bases.insert(lat.checks[lat.at[&(i, j)]].basis == Basis::X);
        }
        assert_eq!(bases.len(), 2);
    }

    #[test]
    fn edges_stay_within_basis_and_layer_rules() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(5, 0.01)).unwrap();
        let g = DecodingGraph::build(&m).unwrap();
        for e in g.edges() {
            let Some(b) = e.b else { continue };
            let (ca, cb) = (m.layout.coords[&e.a], m.layout.coords[&b]);
            if ca[2] == cb[2] {
                // Space-like: diagonal neighbours in the checkerboard.
                assert_eq!((ca[0] - cb[0]).abs(), 2.0);
                assert_eq!((ca[1] - cb[1]).abs(), 2.0);
            } else {
                assert_eq!((ca[2] - cb[2]).abs(), 1.0);
                assert_eq!((ca[0], ca[1]), (cb[0], cb[1]));
            }
        }
    }

    #[test]
    fn observable_on_row_zero_x_errors_only() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(5, 0.01)).unwrap();
        for (_, _, mech) in m.mechanisms() {
            for c in &mech.components {
                if c.observables != 0 {
                    assert_eq!(mech.row, Some(0));
                }
            }
        }
        let g = DecodingGraph::build(&m).unwrap();
        let flagged = g.edges().iter().filter(|e| e.observables != 0).count();
        // One boundary edge per top-row Z check per Z layer.
        assert!(flagged > 0);
    }

    #[test]
    fn translated_edges_share_types() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(5, 0.01)).unwrap();
        let g = DecodingGraph::build(&m).unwrap();
        let pos = |d: u32, dt: f64| {
            let c = m.layout.coords[&d];
            [c[0] as i64, c[1] as i64, (c[2] + dt) as i64]
        };
        let key = |e: &crate::dem::Edge, dt: f64| (pos(e.a, dt), e.b.map(|b| pos(b, dt)));
        let by_pos: HashMap<_, u32> = g.edges().iter().map(|e| (key(e, 0.0), e.type_id)).collect();
        // Interior edges shifted by one time step keep their type; first and last
        // X layers also absorb time-boundary measurement errors.
        let mut checked = 0;
        for e in g.edges() {
            if m.layout.coords[&e.a][2] != 2.0 {
                continue;
            }
            if let Some(&t) = by_pos.get(&key(e, 1.0)) {
                assert_eq!(t, e.type_id, "edge {e:?}");
                checked += 1;
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn random_mismatch_identity_limit() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        let mm = apply_random_mismatch(&m, 1.0 + 1e-12, 3).unwrap();
        for ((_, _, a), (_, _, b)) in m.mechanisms().zip(mm.mechanisms()) {
            assert!((a.probability - b.probability).abs() <= 1e-9 * a.probability);
        }
    }

    #[test]
    fn random_mismatch_factor_range_and_determinism() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        let a = apply_random_mismatch(&m, 10.0, 42).unwrap();
        let b = apply_random_mismatch(&m, 10.0, 42).unwrap();
        assert_eq!(a, b);
        for ((_, _, x), (_, _, y)) in m.mechanisms().zip(a.mechanisms()) {
            let f = y.probability / x.probability;
            assert!((0.1 - 1e-12..=10.0 + 1e-12).contains(&f), "{f}");
        }
        assert_ne!(a, apply_random_mismatch(&m, 10.0, 43).unwrap());
    }

    #[test]
    fn mismatch_preserves_topology() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        let a = apply_random_mismatch(&m, 100.0, 1).unwrap();
        let (g0, g1) = (
            DecodingGraph::build(&m).unwrap(),
            DecodingGraph::build(&a).unwrap(),
        );
        assert_eq!(g0.edges(), g1.edges());
    }

    #[test]
    fn data_only_leaves_measurements() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        let a = apply_random_mismatch_with(&m, 10.0, 5, true).unwrap();
        for ((_, _, x), (_, _, y)) in m.mechanisms().zip(a.mechanisms()) {
            if x.row.is_none() {
                assert_eq!(x.probability, y.probability);
            }
        }
    }

    #[test]
    fn worst_case_rows() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        let w = apply_worstcase_mismatch(&m, 10.0).unwrap();
        for ((_, _, x), (_, _, y)) in m.mechanisms().zip(w.mechanisms()) {
            let f = y.probability / x.probability;
            match x.row {
                Some(0) => assert!((f - 10.0).abs() < 1e-12),
                Some(_) => assert!((f - 0.1).abs() < 1e-12),
                None => assert_eq!(f, 1.0),
            }
        }
        assert_eq!(apply_worstcase_mismatch(&m, 1.0).unwrap(), m);
    }

    #[test]
    fn worst_case_d5_row_split() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(5, 0.001)).unwrap();
        let w = apply_worstcase_mismatch(&m, 10.0).unwrap();
        let mut up = BTreeSet::new();
        let mut down = BTreeSet::new();
        for ((_, _, x), (_, _, y)) in m.mechanisms().zip(w.mechanisms()) {
            if let Some(r) = x.row {
                if y.probability > x.probability {
                    up.insert(r);
                } else {
                    down.insert(r);
                }
            }
        }
        assert_eq!(up.len(), 2);
        assert_eq!(down.len(), 3);
    }

    #[test]
    fn worst_case_requires_rows() {
        let m = crate::dem::parse_dem("error(0.1) D0").unwrap();
        assert_eq!(
            apply_worstcase_mismatch(&m, 10.0).unwrap_err(),
            SurfgenError::MissingRows
        );
    }

    #[test]
    fn mismatch_clamps_at_half() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.3)).unwrap();
        let w = apply_worstcase_mismatch(&m, 10.0).unwrap();
        assert!(w.mechanisms().all(|(_, _, m)| m.probability <= 0.5));
        w.validate().unwrap();
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_surface_pheno(&SurfaceCodeSpec::new(4, 0.01)).is_err());
        assert!(generate_surface_pheno(&SurfaceCodeSpec::new(1, 0.01)).is_err());
        assert!(generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.0)).is_err());
        let bad_rounds = SurfaceCodeSpec {
            rounds: 0,
            ..SurfaceCodeSpec::new(3, 0.01)
        };
        assert!(generate_surface_pheno(&bad_rounds).is_err());
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        assert!(apply_random_mismatch(&m, 0.5, 0).is_err());
    }

    #[test]
    fn generated_model_round_trips() {
        let m = generate_surface_pheno(&SurfaceCodeSpec::new(3, 0.01)).unwrap();
        let text = crate::dem::serialize_dem(&m);
        assert_eq!(crate::dem::parse_dem(&text).unwrap(), m);
    }
}
