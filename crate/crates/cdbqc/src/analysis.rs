//! Exact information-theoretic analysis of single protocol runs: the full
//! joint distribution over (returned bits, sent angles, secret angles, secret
//! flow), Shannon entropies and mutual information, the leakage bounds, and
//! transcript ambiguity (every flow stays consistent with any transcript).
//!
//! Tables are built by exhaustive enumeration over the prior support, the
//! pad, and the server's response branches, so all quantities are exact up
//! to floating-point accumulation. No sampling is involved.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    decode_flow_index, dependency_functions, enumerate_grid_flows, schedulable_flow_indices,
    DependencyTables,
};
use crate::graph::GridSpec;
use crate::protocol::{AliceState, BobModel, MeasurementPattern, ProtocolTranscript};
use crate::sim::{prepare_graph_state, Angle8, AngleSet, StateVector};

/// Probability-sum tolerance for prior validation.
pub const PRIOR_TOLERANCE: f64 = 1e-12;
/// Tolerance for distribution-level checks on built tables.
pub const TABLE_TOLERANCE: f64 = 1e-9;
/// Ceiling on enumerated paths: support cells times 2^N pad values times
/// up to 2^N response branches.
const ANALYSIS_PATH_CAP: u128 = 1 << 26;

fn analysis_paths(cells: u128, n: usize) -> u128 {
    cells.saturating_mul(1u128 << n).saturating_mul(1u128 << n)
}

/// A joint prior over (angle vector, flow index), known to the server.
#[derive(Clone, Debug)]
pub struct Prior {
    spec: GridSpec,
    angle_set: AngleSet,
    support: Vec<PriorCell>,
}

#[derive(Clone, Debug)]
pub struct PriorCell {
    pub alpha: Vec<Angle8>,
    pub flow: u64,
    pub probability: f64,
}

impl Prior {
    /// Uniform over every angle vector and every schedulable flow.
    pub fn uniform(spec: GridSpec) -> Result<Self> {
        Self::uniform_with_set(spec, AngleSet::standard())
    }

    pub fn uniform_with_set(spec: GridSpec, angle_set: AngleSet) -> Result<Self> {
        let n = spec.vertex_count();
        let flows = schedulable_flow_indices(&spec)?;
        let angle_vectors = (angle_set.len() as u128).pow(n as u32);
        let cells = angle_vectors * flows.len() as u128;
        if analysis_paths(cells, n) > ANALYSIS_PATH_CAP {
            return Err(Error::AnalysisTooLarge {
                cells,
                pads: 1 << n,
            });
        }
        let weight = 1.0 / cells as f64;
        let mut support = Vec::with_capacity(cells as usize);
        let mut alpha = vec![0usize; n];
        loop {
            let angles: Vec<Angle8> = alpha.iter().map(|&i| angle_set.members()[i]).collect();
            for &flow in &flows {
                support.push(PriorCell {
                    alpha: angles.clone(),
                    flow,
                    probability: weight,
                });
            }
            // Odometer over angle-set indices.
            let mut pos = 0;
            loop {
                if pos == n {
                    return Ok(Prior {
                        spec,
                        angle_set,
                        support,
                    });
                }
                alpha[pos] += 1;
                if alpha[pos] < angle_set.len() {
                    break;
                }
                alpha[pos] = 0;
                pos += 1;
            }
        }
    }

    /// All mass on a single (angle vector, flow) pair.
    pub fn point(spec: GridSpec, alpha: Vec<Angle8>, flow: u64) -> Result<Self> {
        Self::from_support(
            spec,
            AngleSet::standard(),
            vec![PriorCell {
                alpha,
                flow,
                probability: 1.0,
            }],
        )
    }

    pub fn from_support(
        spec: GridSpec,
        angle_set: AngleSet,
        support: Vec<PriorCell>,
    ) -> Result<Self> {
        let n = spec.vertex_count();
        let flow_count = enumerate_grid_flows(&spec)?.len() as u64;
        let mut total = 0.0;
        for cell in &support {
            if cell.alpha.len() != n {
                return Err(Error::AngleCount {
                    got: cell.alpha.len(),
                    expected: n,
                });
            }
            for &a in &cell.alpha {
                if !angle_set.contains(a) {
                    return Err(Error::AngleOutsideSet { angle: a.value() });
                }
            }
            if cell.flow >= flow_count {
                return Err(Error::FlowIndexRange {
                    index: cell.flow,
                    count: flow_count,
                });
            }
            total += cell.probability;
        }
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(Error::BadDistribution(total));
        }
        Ok(Prior {
            spec,
            angle_set,
            support,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn angle_set(&self) -> &AngleSet {
        &self.angle_set
    }

    pub fn support(&self) -> &[PriorCell] {
        &self.support
    }

    /// H(A, F) of the prior itself.
    pub fn entropy(&self) -> f64 {
        entropy_of(self.support.iter().map(|c| c.probability))
    }

    /// True only for the full uniform prior: every (angle vector, schedulable
    /// flow) pair present with equal weight. The flow-bit floor on hidden
    /// entropy is proved for exactly this case.
    pub fn is_uniform(&self) -> bool {
        let n = self.spec.vertex_count() as u32;
        let full_cells = match schedulable_flow_indices(&self.spec) {
            Ok(flows) => (self.angle_set.len() as u128).pow(n) * flows.len() as u128,
            Err(_) => return false,
        };
        if self.support.len() as u128 != full_cells {
            return false;
        }
        let weight = 1.0 / self.support.len() as f64;
        self.support
            .iter()
            .all(|c| (c.probability - weight).abs() <= PRIOR_TOLERANCE * 10.0)
    }
}

/// Pack an angle vector into 3 bits per entry (round 1 in the low bits).
pub fn pack_angles(angles: &[Angle8]) -> u64 {
    angles
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &a)| acc | (u64::from(a.value()) << (3 * i)))
}

pub fn unpack_angles(packed: u64, n: usize) -> Vec<Angle8> {
    (0..n)
        .map(|i| Angle8::new((packed >> (3 * i) & 7) as u8))
        .collect()
}

/// One cell index of the joint table Pr(b', a', a, f).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct JointKey {
    pub b_prime: u32,
    pub alpha_prime: u64,
    pub alpha: u64,
    pub flow: u64,
}

/// The exact joint distribution Pr(b', a', a, f) with the pad and decoded
/// bits marginalized out, stored sparsely.
#[derive(Clone, Debug)]
pub struct JointDistribution {
    spec: GridSpec,
    n: usize,
    angle_set: AngleSet,
    bob: String,
    table: BTreeMap<JointKey, f64>,
}

fn entropy_of(probabilities: impl Iterator<Item = f64>) -> f64 {
    probabilities
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        + 0.0
}

impl JointDistribution {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn qubit_count(&self) -> usize {
        self.n
    }

    pub fn angle_set(&self) -> &AngleSet {
        &self.angle_set
    }

    pub fn bob_kind(&self) -> &str {
        &self.bob
    }

    pub fn cells(&self) -> impl Iterator<Item = (&JointKey, &f64)> {
        self.table.iter()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.table.values().sum()
    }

    /// Largest cell of the conditional table Pr(b', a' | a, f) over the
    /// given prior.
    pub fn max_conditional_cell(&self, prior: &Prior) -> f64 {
        let mut secret_mass: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for cell in prior.support() {
            *secret_mass
                .entry((pack_angles(&cell.alpha), cell.flow))
                .or_insert(0.0) += cell.probability;
        }
        self.table
            .iter()
            .map(|(key, &p)| {
                let denom = secret_mass
                    .get(&(key.alpha, key.flow))
                    .copied()
                    .unwrap_or(0.0);
                if denom > 0.0 {
                    p / denom
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn entropy_joint(&self) -> f64 {
        entropy_of(self.table.values().copied())
    }

    fn marginal_entropy<K: Ord>(&self, project: impl Fn(&JointKey) -> K) -> f64 {
        let mut marginal: BTreeMap<K, f64> = BTreeMap::new();
        for (key, &p) in &self.table {
            *marginal.entry(project(key)).or_insert(0.0) += p;
        }
        entropy_of(marginal.into_values())
    }

    /// H(A'): entropy of the angles the server receives.
    pub fn entropy_alpha_prime(&self) -> f64 {
        self.marginal_entropy(|k| k.alpha_prime)
    }

    /// H(B'): entropy of the bits the server returns.
    pub fn entropy_b_prime(&self) -> f64 {
        self.marginal_entropy(|k| k.b_prime)
    }

    /// H(B', A'): entropy of the full transcript.
    pub fn entropy_transcript(&self) -> f64 {
        self.marginal_entropy(|k| (k.b_prime, k.alpha_prime))
    }

    /// H(A, F): entropy of the secret.
    pub fn entropy_secret(&self) -> f64 {
        self.marginal_entropy(|k| (k.alpha, k.flow))
    }
}

/// Build the exact joint table for a prior and a server model by enumerating
/// every (secret, pad, response-branch) path. Honest responses thread a
/// statevector; every other model is a conditional probability table.
pub fn build_joint(spec: &GridSpec, prior: &Prior, bob: &BobModel) -> Result<JointDistribution> {
    let n = spec.vertex_count();
    if analysis_paths(prior.support().len() as u128, n) > ANALYSIS_PATH_CAP {
        return Err(Error::AnalysisTooLarge {
            cells: prior.support().len() as u128,
            pads: 1 << n,
        });
    }
    let graph = crate::graph::build_cluster_grid(spec);
    let root = match bob {
        BobModel::Honest => Some(prepare_graph_state(&graph)?),
        _ => None,
    };
    // Dependency tables per flow index, resolved once.
    let mut deps_cache: BTreeMap<u64, DependencyTables> = BTreeMap::new();
    for cell in prior.support() {
        if let std::collections::btree_map::Entry::Vacant(slot) = deps_cache.entry(cell.flow) {
            let flow = decode_flow_index(spec, cell.flow)?;
            slot.insert(dependency_functions(&flow.to_gflow()?)?);
        }
    }
    let mut table: BTreeMap<JointKey, f64> = BTreeMap::new();
    let pad_weight = 0.5f64.powi(n as i32);

    struct Walk<'a> {
        n: usize,
        bob: &'a BobModel,
        angle_set: &'a AngleSet,
    }

    impl Walk<'_> {
        #[allow(clippy::too_many_arguments)]
        fn descend(
            &self,
            deps: &DependencyTables,
            alpha: &[Angle8],
            pad: &[u8],
            round: usize,
            state: Option<&StateVector>,
            b_history: &mut Vec<u8>,
            a_history: &mut Vec<Angle8>,
            weight: f64,
            sink: &mut dyn FnMut(u32, &[Angle8], f64),
        ) -> Result<()> {
            if round > self.n {
                let b_bits = b_history
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << i));
                sink(b_bits, a_history, weight);
                return Ok(());
            }
            // Decoded history b = b' ^ r determines the dependency parities.
            let decoded: Vec<u8> = b_history
                .iter()
                .zip(pad)
                .map(|(&bp, &r)| bp ^ r)
                .collect();
            let sx = deps.x_parity(round, &decoded);
            let sz = deps.z_parity(round, &decoded);
            let alpha_prime = crate::protocol::padded_angle(
                self.angle_set,
                alpha[round - 1],
                sx,
                sz,
                pad[round - 1],
            )?;
            a_history.push(alpha_prime);
            let weights: [f64; 2] = match self
                .bob
                .table_one_probability(round, b_history, a_history)
            {
                Some(p1) => [1.0 - p1, p1],
                None => {
                    let state = state.expect("honest model threads a state");
                    [
                        state.outcome_probability(round, alpha_prime, 0),
                        state.outcome_probability(round, alpha_prime, 1),
                    ]
                }
            };
            for outcome in [0u8, 1u8] {
                let p = weights[outcome as usize];
                if p <= 0.0 {
                    continue;
                }
                let next_state =
                    state.map(|s| s.project_xy(round, alpha_prime, outcome, 0.0).1);
                b_history.push(outcome);
                self.descend(
                    deps,
                    alpha,
                    pad,
                    round + 1,
                    next_state.as_ref(),
                    b_history,
                    a_history,
                    weight * p,
                    sink,
                )?;
                b_history.pop();
            }
            a_history.pop();
            Ok(())
        }
    }

    let walk = Walk {
        n,
        bob,
        angle_set: prior.angle_set(),
    };
    for cell in prior.support() {
        let deps = &deps_cache[&cell.flow];
        let alpha_packed = pack_angles(&cell.alpha);
        for pad_bits in 0u32..1 << n {
            let pad: Vec<u8> = (0..n).map(|i| (pad_bits >> i & 1) as u8).collect();
            let base = cell.probability * pad_weight;
            let mut b_history = Vec::with_capacity(n);
            let mut a_history = Vec::with_capacity(n);
            walk.descend(
                deps,
                &cell.alpha,
                &pad,
                1,
                root.as_ref(),
                &mut b_history,
                &mut a_history,
                base,
                &mut |b_bits, a_hist, w| {
                    if w <= 0.0 {
                        return;
                    }
                    let key = JointKey {
                        b_prime: b_bits,
                        alpha_prime: pack_angles(a_hist),
                        alpha: alpha_packed,
                        flow: cell.flow,
                    };
                    *table.entry(key).or_insert(0.0) += w;
                },
            )?;
        }
    }
    Ok(JointDistribution {
        spec: *spec,
        n,
        angle_set: prior.angle_set().clone(),
        bob: bob.kind(),
        table,
    })
}

/// Exact Shannon quantities of one joint table, in bits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyReport {
    /// Number of measured qubits.
    pub n: usize,
    /// Bits needed for the angle secret, N * log2(angle-set size).
    pub n_a: f64,
    /// Bits needed for the flow secret, log2(flow count).
    pub n_f: f64,
    pub uniform_prior: bool,
    pub bob: String,
    pub angle_set: Vec<u8>,
    pub h_alpha_prime: f64,
    pub h_b_prime: f64,
    pub h_transcript: f64,
    pub h_secret: f64,
    pub h_transcript_given_secret: f64,
    pub h_secret_given_transcript: f64,
    pub mutual_information: f64,
}

/// Reduce a joint table to its entropy report. The flow-bit budget counts
/// the flows a client could have chosen, the schedulable ones.
pub fn entropy_report(joint: &JointDistribution, prior: &Prior) -> EntropyReport {
    let h_joint = joint.entropy_joint();
    let h_secret = joint.entropy_secret();
    let h_transcript = joint.entropy_transcript();
    let flow_count = schedulable_flow_indices(joint.spec())
        .map(|indices| indices.len() as u64)
        .unwrap_or(u64::MAX);
    EntropyReport {
        n: joint.qubit_count(),
        n_a: joint.qubit_count() as f64 * joint.angle_set().bits_per_angle(),
        n_f: (flow_count as f64).log2(),
        uniform_prior: prior.is_uniform(),
        bob: joint.bob_kind().to_string(),
        angle_set: joint.angle_set().members().iter().map(|a| a.value()).collect(),
        h_alpha_prime: joint.entropy_alpha_prime(),
        h_b_prime: joint.entropy_b_prime(),
        h_transcript,
        h_secret,
        h_transcript_given_secret: h_joint - h_secret,
        h_secret_given_transcript: h_joint - h_transcript,
        mutual_information: h_transcript + h_secret - h_joint,
    }
}

/// One verified inequality with its slack (negative slack = violated).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub holds: bool,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundsVerdict {
    pub all_hold: bool,
    pub checks: Vec<BoundCheck>,
}

/// Entropy tolerance for the proved inequalities.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Check the proved leakage inequalities on a report:
/// the transcript keeps at least N bits of entropy given the secret, the
/// leaked information is at most H(A'), H(A') is at most the angle-name
/// length, and under a uniform prior at least the flow bits stay hidden.
pub fn verify_bounds(report: &EntropyReport) -> BoundsVerdict {
    let mut checks = Vec::new();
    let mut push = |name: &str, margin: f64| {
        checks.push(BoundCheck {
            name: name.to_string(),
            holds: margin >= -BOUND_TOLERANCE,
            margin,
        });
    };
    push(
        "transcript_entropy_given_secret_at_least_n",
        report.h_transcript_given_secret - report.n as f64,
    );
    push(
        "mutual_information_at_most_h_alpha_prime",
        report.h_alpha_prime - report.mutual_information,
    );
    push(
        "h_alpha_prime_at_most_angle_bits",
        report.n_a - report.h_alpha_prime,
    );
    if report.uniform_prior {
        push(
            "hidden_secret_at_least_flow_bits",
            report.h_secret_given_transcript - report.n_f,
        );
    }
    BoundsVerdict {
        all_hold: checks.iter().all(|c| c.holds),
        checks,
    }
}

/// A (secret angles, pad) pair consistent with a transcript under some flow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub alpha: Vec<Angle8>,
    pub pad: Vec<u8>,
}

/// All (angle vector, pad) witnesses that make the transcript consistent
/// with the given flow: for each pad value, decode the outcomes, evaluate
/// the dependency parities, invert the angle padding, and keep the result
/// when every recovered angle lies in the transcript's angle set.
pub fn transcript_ambiguity(
    transcript: &ProtocolTranscript,
    flow_index: u64,
) -> Result<Vec<Witness>> {
    transcript.validate()?;
    let spec = transcript.spec()?;
    let n = spec.vertex_count();
    let flow = decode_flow_index(&spec, flow_index)?;
    let deps = dependency_functions(&flow.to_gflow()?)?;
    let alpha_primes = transcript.alpha_primes();
    let b_primes = transcript.b_primes();
    let set = &transcript.angle_set;
    let mut witnesses = Vec::new();
    for pad_bits in 0u32..1 << n {
        let pad: Vec<u8> = (0..n).map(|i| (pad_bits >> i & 1) as u8).collect();
        let decoded: Vec<u8> = b_primes.iter().zip(&pad).map(|(&b, &r)| b ^ r).collect();
        let mut alpha = Vec::with_capacity(n);
        let mut in_set = true;
        for j in 1..=n {
            let sx = deps.x_parity(j, &decoded);
            let sz = deps.z_parity(j, &decoded);
            // Invert a' = (-1)^sx a + (sz + r) pi.
            let shifted = alpha_primes[j - 1].padded(false, (sz ^ pad[j - 1]) & 1);
            let a = shifted.padded(sx == 1, 0);
            if !set.contains(a) {
                in_set = false;
                break;
            }
            alpha.push(a);
        }
        if in_set {
            witnesses.push(Witness { alpha, pad });
        }
    }
    Ok(witnesses)
}

/// Re-run the client's deterministic angle computation for a proposed
/// witness against the transcript's returned bits; true only when the
/// regenerated angle sequence matches the transcript bit-exactly.
pub fn replay_check(
    transcript: &ProtocolTranscript,
    flow_index: u64,
    witness: &Witness,
) -> Result<bool> {
    transcript.validate()?;
    let spec = transcript.spec()?;
    let n = spec.vertex_count();
    if witness.alpha.len() != n || witness.pad.len() != n {
        return Err(Error::MalformedTranscript(
            "witness length does not match the transcript".into(),
        ));
    }
    // An out-of-set angle cannot be a pattern; it can never replay.
    if witness
        .alpha
        .iter()
        .any(|&a| !transcript.angle_set.contains(a))
    {
        return Ok(false);
    }
    let pattern = MeasurementPattern::with_angle_set(
        spec,
        witness.alpha.clone(),
        flow_index,
        transcript.angle_set.clone(),
    )?;
    let mut alice = AliceState::new(&pattern, witness.pad.clone())?;
    for round in &transcript.rounds {
        let regenerated = alice.next_angle(round.i)?;
        if regenerated != round.alpha_prime {
            return Ok(false);
        }
        alice.receive(round.i, round.b_prime)?;
    }
    Ok(true)
}

/// Sparse CSV of a joint table: columns b', a', a, f, probability. Bit and
/// angle strings are round-ordered (round 1 first).
pub fn joint_to_csv(joint: &JointDistribution) -> String {
    let n = joint.qubit_count();
    let bits = |b: u32| -> String {
        (0..n)
            .map(|i| char::from(b'0' + ((b >> i) & 1) as u8))
            .collect()
    };
    let angles = |packed: u64| -> String {
        unpack_angles(packed, n)
            .iter()
            .map(|a| char::from(b'0' + a.value()))
            .collect()
    };
    let mut out = String::from("b_prime,alpha_prime,alpha,flow,probability\n");
    for (key, &p) in joint.cells() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            bits(key.b_prime),
            angles(key.alpha_prime),
            angles(key.alpha),
            key.flow,
            p
        ));
    }
    out
}
