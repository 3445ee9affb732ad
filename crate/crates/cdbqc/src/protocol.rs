//! The interactive delegation protocol: the client's classical state machine
//! (secret pattern, dependency tracking, angle padding, outcome decoding and
//! post-processing), server strategies, the alternating round loop, and the
//! transcript of everything the server sees.
//!
//! One round per vertex, in measurement order: the client sends the padded
//! angle `a' = (-1)^sx * a + (sz + r) * pi`, the server returns a bit, the
//! client decodes it as `b = b' ^ r` and updates its dependency parities.
//! After the last round the recorded output bits are corrected by the late-Z
//! parities, `p = pC ^ szO`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    decode_flow_index, dependency_functions, flow_bits_length, schedulable_flow_indices,
    DependencyTables, FlowBits, GridFlow,
};
use crate::graph::{build_cluster_grid, Graph, GridSpec, OpenGraph};
use crate::sim::{
    positive_branch_distribution_capped, prepare_graph_state, Angle8, AngleSet, OutcomeChoice,
    OutputDistribution, StateVector, DEFAULT_EXHAUSTIVE_CAP,
};

/// The client's secret: grid dimensions, one angle per vertex, and the flow
/// index. Angles must come from the configured closed angle set.
#[derive(Clone, Debug)]
pub struct MeasurementPattern {
    spec: GridSpec,
    angles: Vec<Angle8>,
    flow_bits: FlowBits,
    angle_set: AngleSet,
    grid_flow: GridFlow,
    open_graph: OpenGraph,
    deps: DependencyTables,
}

impl MeasurementPattern {
    pub fn new(spec: GridSpec, angles: Vec<Angle8>, flow_index: u64) -> Result<Self> {
        Self::with_angle_set(spec, angles, flow_index, AngleSet::standard())
    }

    pub fn with_angle_set(
        spec: GridSpec,
        angles: Vec<Angle8>,
        flow_index: u64,
        angle_set: AngleSet,
    ) -> Result<Self> {
        if angles.len() != spec.vertex_count() {
            return Err(Error::AngleCount {
                got: angles.len(),
                expected: spec.vertex_count(),
            });
        }
        for &angle in &angles {
            if !angle_set.contains(angle) {
                return Err(Error::AngleOutsideSet {
                    angle: angle.value(),
                });
            }
        }
        let grid_flow = decode_flow_index(&spec, flow_index)?;
        let gflow = grid_flow.to_gflow()?;
        let deps = dependency_functions(&gflow)?;
        let open_graph = gflow.open_graph().clone();
        Ok(MeasurementPattern {
            spec,
            angles,
            flow_bits: FlowBits {
                value: flow_index,
                length: flow_bits_length(&spec),
            },
            angle_set,
            grid_flow,
            open_graph,
            deps,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn angles(&self) -> &[Angle8] {
        &self.angles
    }

    pub fn flow_bits(&self) -> FlowBits {
        self.flow_bits
    }

    pub fn angle_set(&self) -> &AngleSet {
        &self.angle_set
    }

    pub fn grid_flow(&self) -> &GridFlow {
        &self.grid_flow
    }

    pub fn open_graph(&self) -> &OpenGraph {
        &self.open_graph
    }

    pub fn dependency_tables(&self) -> &DependencyTables {
        &self.deps
    }

    pub fn graph(&self) -> Graph {
        build_cluster_grid(&self.spec)
    }

    /// The reference output distribution this pattern is meant to sample.
    pub fn positive_branch_distribution(&self) -> Result<OutputDistribution> {
        positive_branch_distribution_capped(&self.open_graph, &self.angles, DEFAULT_EXHAUSTIVE_CAP)
    }
}

/// Draw a uniformly random schedulable flow index for the grid.
pub fn random_flow_index(spec: &GridSpec, rng: &mut dyn RngCore) -> Result<u64> {
    let indices = schedulable_flow_indices(spec)?;
    let mut wide = [0u8; 8];
    rng.fill_bytes(&mut wide);
    Ok(indices[(u64::from_le_bytes(wide) % indices.len() as u64) as usize])
}

/// Draw one uniformly random angle per vertex from the set.
pub fn random_angles(spec: &GridSpec, set: &AngleSet, rng: &mut dyn RngCore) -> Vec<Angle8> {
    (0..spec.vertex_count())
        .map(|_| set.members()[(rng.next_u32() as usize) % set.len()])
        .collect()
}

/// The padded angle `(-1)^sx * alpha + (sz + r) * pi`, checked against the
/// angle set (closure keeps the result inside it).
pub fn padded_angle(set: &AngleSet, alpha: Angle8, sx: u8, sz: u8, r: u8) -> Result<Angle8> {
    if !set.contains(alpha) {
        return Err(Error::AngleOutsideSet {
            angle: alpha.value(),
        });
    }
    Ok(alpha.padded(sx & 1 == 1, (sz & 1) ^ (r & 1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Send,
    Receive,
    Done,
}

/// The client's per-run state: the pad, decoded outcomes, the output
/// register, and the accumulated late-Z parities. Dependency parities for
/// round 1 are structurally zero (no earlier outcomes exist).
#[derive(Clone, Debug)]
pub struct AliceState<'p> {
    pattern: &'p MeasurementPattern,
    pad: Vec<u8>,
    round: usize,
    phase: Phase,
    decoded: Vec<u8>,
    sent: Vec<Angle8>,
    received: Vec<u8>,
    output_register: Vec<u8>,
    late_z: Vec<u8>,
}

impl<'p> AliceState<'p> {
    /// Start a run with a fixed pad (one bit per round, drawn up front).
    pub fn new(pattern: &'p MeasurementPattern, pad: Vec<u8>) -> Result<Self> {
        let n = pattern.spec().vertex_count();
        if pad.len() != n {
            return Err(Error::PadLength {
                got: pad.len(),
                expected: n,
            });
        }
        let outputs = pattern.dependency_tables().outputs().len();
        Ok(AliceState {
            pattern,
            pad: pad.iter().map(|b| b & 1).collect(),
            round: 1,
            phase: Phase::Send,
            decoded: Vec::with_capacity(n),
            sent: Vec::with_capacity(n),
            received: Vec::with_capacity(n),
            output_register: Vec::with_capacity(outputs),
            late_z: vec![0; outputs],
        })
    }

    /// Start a run with a pad sampled from the rng.
    pub fn with_rng(pattern: &'p MeasurementPattern, rng: &mut dyn RngCore) -> Result<Self> {
        let pad = (0..pattern.spec().vertex_count())
            .map(|_| (rng.next_u32() & 1) as u8)
            .collect();
        Self::new(pattern, pad)
    }

    pub fn pad(&self) -> &[u8] {
        &self.pad
    }

    pub fn decoded(&self) -> &[u8] {
        &self.decoded
    }

    pub fn sent(&self) -> &[Angle8] {
        &self.sent
    }

    pub fn received(&self) -> &[u8] {
        &self.received
    }

    fn expect(&self, round: usize, phase: Phase) -> Result<()> {
        if self.phase != phase {
            return Err(Error::OutOfSequence(match self.phase {
                Phase::Send => "expected next_angle",
                Phase::Receive => "expected receive",
                Phase::Done => "run already complete",
            }));
        }
        if round != self.round {
            return Err(Error::RoundMismatch {
                expected: self.round,
                got: round,
            });
        }
        Ok(())
    }

    /// Compute the padded angle for this round from the dependency parities
    /// of the decoded outcomes so far.
    pub fn next_angle(&mut self, round: usize) -> Result<Angle8> {
        self.expect(round, Phase::Send)?;
        let deps = self.pattern.dependency_tables();
        let sx = deps.x_parity(round, &self.decoded);
        let sz = deps.z_parity(round, &self.decoded);
        let alpha = self.pattern.angles()[round - 1];
        let sent = padded_angle(
            self.pattern.angle_set(),
            alpha,
            sx,
            sz,
            self.pad[round - 1],
        )?;
        self.sent.push(sent);
        self.phase = Phase::Receive;
        Ok(sent)
    }

    /// Decode the returned bit, record it (into the output register when this
    /// round's vertex is an output), and fold the decoded bit into the late-Z
    /// parities of outputs measured earlier.
    pub fn receive(&mut self, round: usize, b_prime: u8) -> Result<()> {
        self.expect(round, Phase::Receive)?;
        let b = (b_prime & 1) ^ self.pad[round - 1];
        self.received.push(b_prime & 1);
        self.decoded.push(b);
        let deps = self.pattern.dependency_tables();
        if deps.outputs().contains(&round) {
            self.output_register.push(b);
        }
        if b == 1 {
            for (slot, &out) in deps.outputs().iter().enumerate() {
                if out < round
                    && deps
                        .late_z(out)
                        .map(|sources| sources.contains(&round))
                        .unwrap_or(false)
                {
                    self.late_z[slot] ^= 1;
                }
            }
        }
        self.round += 1;
        self.phase = if self.decoded.len() == self.pattern.spec().vertex_count() {
            Phase::Done
        } else {
            Phase::Send
        };
        Ok(())
    }

    /// Final output: recorded output bits xor the late-Z corrections, ordered
    /// by output-vertex label.
    pub fn finalize(&self) -> Result<Vec<u8>> {
        if self.phase != Phase::Done {
            return Err(Error::OutOfSequence("run is not complete"));
        }
        Ok(self
            .output_register
            .iter()
            .zip(&self.late_z)
            .map(|(&p, &z)| p ^ z)
            .collect())
    }
}

/// One exchanged round as the server sees it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRound {
    pub i: usize,
    pub alpha_prime: Angle8,
    pub b_prime: u8,
}

/// Bookkeeping stored alongside a transcript. Not part of the data the
/// server receives, and excluded from any leakage analysis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub seed: u64,
    pub bob: String,
}

/// Exactly the classical data the server sees in one run: the padded angles
/// sent and the bits returned, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub rows: usize,
    pub cols: usize,
    pub angle_unit: String,
    pub rounds: Vec<TranscriptRound>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub meta: Option<TranscriptMeta>,
    #[serde(skip, default)]
    pub angle_set: AngleSet,
}

impl ProtocolTranscript {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.rows, self.cols)
    }

    /// Check the round list covers 1..=N in order.
    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        let n = spec.vertex_count();
        if self.rounds.len() != n {
            return Err(Error::MalformedTranscript(format!(
                "expected {n} rounds, found {}",
                self.rounds.len()
            )));
        }
        for (idx, round) in self.rounds.iter().enumerate() {
            if round.i != idx + 1 {
                return Err(Error::MalformedTranscript(format!(
                    "round {} out of order at position {}",
                    round.i,
                    idx + 1
                )));
            }
            if round.b_prime > 1 {
                return Err(Error::MalformedTranscript(format!(
                    "round {} carries non-bit outcome {}",
                    round.i, round.b_prime
                )));
            }
        }
        Ok(())
    }

    pub fn alpha_primes(&self) -> Vec<Angle8> {
        self.rounds.iter().map(|r| r.alpha_prime).collect()
    }

    pub fn b_primes(&self) -> Vec<u8> {
        self.rounds.iter().map(|r| r.b_prime).collect()
    }
}

/// A server for sampled runs: prepares the resource state (or pretends to)
/// and answers one measurement request per round.
pub trait BobServer {
    fn kind(&self) -> String;
    fn prepare(&mut self, graph: &Graph) -> Result<()>;
    fn respond(&mut self, round: usize, alpha_prime: Angle8) -> Result<u8>;
}

/// Follows the protocol: prepares |G> and honestly measures each qubit at the
/// requested angle, sampling outcomes from the Born rule.
pub struct HonestBob {
    rng: rand_chacha::ChaCha8Rng,
    state: Option<StateVector>,
}

impl HonestBob {
    pub fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        HonestBob {
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
            state: None,
        }
    }
}

impl BobServer for HonestBob {
    fn kind(&self) -> String {
        "honest".into()
    }

    fn prepare(&mut self, graph: &Graph) -> Result<()> {
        self.state = Some(prepare_graph_state(graph)?);
        Ok(())
    }

    fn respond(&mut self, round: usize, alpha_prime: Angle8) -> Result<u8> {
        let state = self
            .state
            .as_ref()
            .ok_or(Error::OutOfSequence("server state not prepared"))?;
        let (record, next) =
            state.measure_xy(round, alpha_prime, OutcomeChoice::Sample(&mut self.rng))?;
        self.state = Some(next);
        Ok(record.outcome)
    }
}

/// Ignores the quantum side entirely and always returns the same bit.
pub struct ConstantBob(pub u8);

impl BobServer for ConstantBob {
    fn kind(&self) -> String {
        format!("constant-{}", self.0 & 1)
    }

    fn prepare(&mut self, _graph: &Graph) -> Result<()> {
        Ok(())
    }

    fn respond(&mut self, _round: usize, _alpha_prime: Angle8) -> Result<u8> {
        Ok(self.0 & 1)
    }
}

/// Returns fair coin flips.
pub struct RandomBob {
    rng: rand_chacha::ChaCha8Rng,
}

impl RandomBob {
    pub fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        RandomBob {
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl BobServer for RandomBob {
    fn kind(&self) -> String {
        "uniform-random".into()
    }

    fn prepare(&mut self, _graph: &Graph) -> Result<()> {
        Ok(())
    }

    fn respond(&mut self, _round: usize, _alpha_prime: Angle8) -> Result<u8> {
        Ok((self.rng.next_u32() & 1) as u8)
    }
}

/// An arbitrary stateful strategy driven by a callback over the full visible
/// history (earlier returned bits, angles received so far).
pub struct CallbackBob<F>
where
    F: FnMut(&[u8], &[Angle8]) -> u8,
{
    name: String,
    callback: F,
    b_history: Vec<u8>,
    a_history: Vec<Angle8>,
}

impl<F> CallbackBob<F>
where
    F: FnMut(&[u8], &[Angle8]) -> u8,
{
    pub fn new(name: impl Into<String>, callback: F) -> Self {
        CallbackBob {
            name: name.into(),
            callback,
            b_history: Vec::new(),
            a_history: Vec::new(),
        }
    }
}

impl<F> BobServer for CallbackBob<F>
where
    F: FnMut(&[u8], &[Angle8]) -> u8,
{
    fn kind(&self) -> String {
        self.name.clone()
    }

    fn prepare(&mut self, _graph: &Graph) -> Result<()> {
        self.b_history.clear();
        self.a_history.clear();
        Ok(())
    }

    fn respond(&mut self, _round: usize, alpha_prime: Angle8) -> Result<u8> {
        self.a_history.push(alpha_prime);
        let bit = (self.callback)(&self.b_history, &self.a_history) & 1;
        self.b_history.push(bit);
        Ok(bit)
    }
}

/// A conditional response table: round, returned bits so far, angles
/// received so far, to the probability of answering 1.
pub type ResponseTable = std::sync::Arc<dyn Fn(usize, &[u8], &[Angle8]) -> f64 + Send + Sync>;

/// A server strategy as a conditional probability table
/// `Pr(b'_j = 1 | b'_{<j}, a'_{<=j})`, the form every strategy reduces to in
/// exhaustive analysis. `Honest` means the table induced by faithful
/// measurement of |G>, which enumerators realize by threading a statevector.
#[derive(Clone)]
pub enum BobModel {
    Honest,
    Constant(u8),
    UniformRandom,
    Table(ResponseTable),
}

impl BobModel {
    pub fn kind(&self) -> String {
        match self {
            BobModel::Honest => "honest".into(),
            BobModel::Constant(c) => format!("constant-{}", c & 1),
            BobModel::UniformRandom => "uniform-random".into(),
            BobModel::Table(_) => "table".into(),
        }
    }

    /// `Pr(b' = 1)` for the classical strategies; `None` for `Honest`,
    /// where the caller must consult the simulated state.
    pub fn table_one_probability(
        &self,
        round: usize,
        b_history: &[u8],
        a_history: &[Angle8],
    ) -> Option<f64> {
        match self {
            BobModel::Honest => None,
            BobModel::Constant(c) => Some(f64::from(c & 1)),
            BobModel::UniformRandom => Some(0.5),
            BobModel::Table(f) => Some(f(round, b_history, a_history).clamp(0.0, 1.0)),
        }
    }
}

impl std::fmt::Debug for BobModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BobModel::{}", self.kind())
    }
}

/// A table-driven server for sampled runs, reusing an analysis-side model.
pub struct ModelBob {
    model: BobModel,
    rng: rand_chacha::ChaCha8Rng,
    state: Option<StateVector>,
    b_history: Vec<u8>,
    a_history: Vec<Angle8>,
}

impl ModelBob {
    pub fn new(model: BobModel, seed: u64) -> Self {
        use rand::SeedableRng;
        ModelBob {
            model,
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
            state: None,
            b_history: Vec::new(),
            a_history: Vec::new(),
        }
    }
}

impl BobServer for ModelBob {
    fn kind(&self) -> String {
        self.model.kind()
    }

    fn prepare(&mut self, graph: &Graph) -> Result<()> {
        self.b_history.clear();
        self.a_history.clear();
        if matches!(self.model, BobModel::Honest) {
            self.state = Some(prepare_graph_state(graph)?);
        }
        Ok(())
    }

    fn respond(&mut self, round: usize, alpha_prime: Angle8) -> Result<u8> {
        self.a_history.push(alpha_prime);
        let bit = match self
            .model
            .table_one_probability(round, &self.b_history, &self.a_history)
        {
            Some(p1) => u8::from(self.rng.gen::<f64>() < p1),
            None => {
                let state = self
                    .state
                    .as_ref()
                    .ok_or(Error::OutOfSequence("server state not prepared"))?;
                let (record, next) =
                    state.measure_xy(round, alpha_prime, OutcomeChoice::Sample(&mut self.rng))?;
                self.state = Some(next);
                record.outcome
            }
        };
        self.b_history.push(bit);
        Ok(bit)
    }
}

/// Run the protocol once. The seed drives the client's pad; the server owns
/// its own randomness. Returns the post-processed output and the transcript.
pub fn run_protocol(
    pattern: &MeasurementPattern,
    bob: &mut dyn BobServer,
    seed: u64,
) -> Result<(Vec<u8>, ProtocolTranscript)> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut alice = AliceState::with_rng(pattern, &mut rng)?;
    let graph = pattern.graph();
    bob.prepare(&graph)?;
    let n = pattern.spec().vertex_count();
    let mut rounds = Vec::with_capacity(n);
    for i in 1..=n {
        let alpha_prime = alice.next_angle(i)?;
        let b_prime = bob.respond(i, alpha_prime)? & 1;
        alice.receive(i, b_prime)?;
        rounds.push(TranscriptRound {
            i,
            alpha_prime,
            b_prime,
        });
    }
    let output = alice.finalize()?;
    let transcript = ProtocolTranscript {
        rows: pattern.spec().rows(),
        cols: pattern.spec().cols(),
        angle_unit: "pi/4".into(),
        rounds,
        meta: Some(TranscriptMeta {
            seed,
            bob: bob.kind(),
        }),
        angle_set: pattern.angle_set().clone(),
    };
    Ok((output, transcript))
}

/// One weighted leaf of an exhaustive run: the transcript the server saw and
/// the client's post-processed output.
#[derive(Clone, Debug, PartialEq)]
pub struct LawEntry {
    pub probability: f64,
    pub alpha_prime: Vec<Angle8>,
    pub b_prime: u32,
    pub output: Vec<u8>,
}

/// The exact joint law of (output, transcript) for an honest server.
#[derive(Clone, Debug)]
pub struct ProtocolLaw {
    pub outputs: Vec<usize>,
    pub entries: Vec<LawEntry>,
    pub pruned_mass: f64,
}

impl ProtocolLaw {
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    /// Marginal distribution of the output bits, comparable with the
    /// positive-branch reference.
    pub fn output_marginal(&self) -> OutputDistribution {
        let mut probabilities = vec![0.0; 1 << self.outputs.len()];
        for entry in &self.entries {
            let key = entry
                .output
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &b)| acc | (usize::from(b) << i));
            probabilities[key] += entry.probability;
        }
        OutputDistribution {
            outputs: self.outputs.clone(),
            probabilities,
        }
    }
}

const PATH_PRUNE_FLOOR: f64 = 1e-15;

/// Exhaustive honest run: average over every pad value (weight 2^-N each)
/// and every Born branch. Paths below 1e-15 are pruned and reported in
/// `pruned_mass`.
pub fn run_protocol_exhaustive(pattern: &MeasurementPattern) -> Result<ProtocolLaw> {
    run_exhaustive_inner(pattern, None)
}

/// Exhaustive honest run with one fixed pad instead of the average.
pub fn run_protocol_exhaustive_fixed_pad(
    pattern: &MeasurementPattern,
    pad: &[u8],
) -> Result<ProtocolLaw> {
    run_exhaustive_inner(pattern, Some(pad))
}

fn run_exhaustive_inner(
    pattern: &MeasurementPattern,
    fixed_pad: Option<&[u8]>,
) -> Result<ProtocolLaw> {
    let n = pattern.spec().vertex_count();
    if n > DEFAULT_EXHAUSTIVE_CAP {
        return Err(Error::ExhaustiveCap {
            qubits: n,
            cap: DEFAULT_EXHAUSTIVE_CAP,
        });
    }
    let graph = pattern.graph();
    let root = prepare_graph_state(&graph)?;
    let outputs: Vec<usize> = pattern
        .dependency_tables()
        .outputs()
        .iter()
        .copied()
        .collect();
    let mut law = ProtocolLaw {
        outputs,
        entries: Vec::new(),
        pruned_mass: 0.0,
    };
    let pads: Vec<Vec<u8>> = match fixed_pad {
        Some(pad) => vec![pad.to_vec()],
        None => (0u32..1 << n)
            .map(|bits| (0..n).map(|i| (bits >> i & 1) as u8).collect())
            .collect(),
    };
    let pad_weight = 1.0 / pads.len() as f64;

    fn descend(
        alice: &mut AliceState<'_>,
        state: &StateVector,
        round: usize,
        n: usize,
        prob: f64,
        law: &mut ProtocolLaw,
    ) -> Result<()> {
        if round > n {
            let entry = LawEntry {
                probability: prob,
                alpha_prime: alice.sent().to_vec(),
                b_prime: alice
                    .received()
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << i)),
                output: alice.finalize()?,
            };
            law.entries.push(entry);
            return Ok(());
        }
        let mut branch = alice.clone();
        let alpha_prime = branch.next_angle(round)?;
        for outcome in [0u8, 1u8] {
            let (p, collapsed) = state.project_xy(round, alpha_prime, outcome, 0.0);
            let weight = prob * p;
            if weight < PATH_PRUNE_FLOOR {
                law.pruned_mass += weight;
                continue;
            }
            let mut next = branch.clone();
            next.receive(round, outcome)?;
            descend(&mut next, &collapsed, round + 1, n, weight, law)?;
        }
        Ok(())
    }

    for pad in pads {
        let mut alice = AliceState::new(pattern, pad)?;
        descend(&mut alice, &root, 1, n, pad_weight, &mut law)?;
    }
    Ok(law)
}
