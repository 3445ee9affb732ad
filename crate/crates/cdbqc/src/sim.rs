//! Dense statevector backend: graph-state preparation, XY-plane projective
//! measurement with Born probabilities, exhaustive branch enumeration, and
//! the positive-branch reference distribution.
//!
//! Angles are exact eighth-turn integers everywhere outside complex
//! amplitudes, so transcript arithmetic stays bit-exact. Measured qubits are
//! projected in place (the register keeps its dimension) so vertex labels
//! remain stable across a protocol run.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, OpenGraph};

/// Default ceiling on dense statevector width.
pub const DEFAULT_QUBIT_CAP: usize = 20;
/// Default ceiling for exhaustive branch enumeration.
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 12;
/// Amplitude-level tolerance for invariants.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Tolerance for probability-distribution sums.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

const FORCED_OUTCOME_FLOOR: f64 = 1e-12;

/// A measurement angle as an integer multiple of pi/4.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(try_from = "u8", into = "u8")]
pub struct Angle8(u8);

impl Angle8 {
    /// Wrap any integer number of eighth turns.
    pub fn new(eighth_turns: u8) -> Self {
        Angle8(eighth_turns % 8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0) * FRAC_PI_4
    }

    /// e^(i * angle).
    pub fn phase(self) -> Complex64 {
        Complex64::from_polar(1.0, self.radians())
    }

    /// The pad map `(-1)^sign * angle + half_turns * pi`, still in eighth
    /// turns. This is the whole group that acts on angles during a run.
    pub fn padded(self, sign_flip: bool, half_turns: u8) -> Angle8 {
        let negated = if sign_flip { (8 - self.0) % 8 } else { self.0 };
        Angle8((negated + 4 * (half_turns % 2)) % 8)
    }

    pub fn opposite(self) -> Angle8 {
        self.padded(false, 1)
    }
}

impl TryFrom<u8> for Angle8 {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        if value >= 8 {
            return Err(Error::BadAngleValue(value));
        }
        Ok(Angle8(value))
    }
}

impl From<Angle8> for u8 {
    fn from(angle: Angle8) -> u8 {
        angle.0
    }
}

/// A set of admissible measurement angles, closed under sign flip and
/// half-turn shift so padded angles stay inside the set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AngleSet {
    members: Vec<Angle8>,
}

impl AngleSet {
    /// The minimal non-Clifford set: odd multiples of pi/4.
    pub fn standard() -> Self {
        AngleSet {
            members: vec![Angle8(1), Angle8(3), Angle8(5), Angle8(7)],
        }
    }

    pub fn new(members: &[Angle8]) -> Result<Self> {
        let mut sorted: Vec<Angle8> = members.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() {
            return Err(Error::AngleSetNotClosed);
        }
        for &angle in &sorted {
            for sign in [false, true] {
                for half in 0..2 {
                    if !sorted.contains(&angle.padded(sign, half)) {
                        return Err(Error::AngleSetNotClosed);
                    }
                }
            }
        }
        Ok(AngleSet { members: sorted })
    }

    pub fn contains(&self, angle: Angle8) -> bool {
        self.members.contains(&angle)
    }

    pub fn members(&self) -> &[Angle8] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Bits needed to name one member.
    pub fn bits_per_angle(&self) -> f64 {
        (self.members.len() as f64).log2()
    }
}

impl Default for AngleSet {
    fn default() -> Self {
        AngleSet::standard()
    }
}

/// Outcome and Born probability of one projective measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub qubit: usize,
    pub angle: Angle8,
    pub outcome: u8,
    pub probability: f64,
}

/// How to resolve a measurement outcome.
pub enum OutcomeChoice<'a> {
    Forced(u8),
    Sample(&'a mut dyn RngCore),
}

/// A pure state of `qubit_count` qubits. Qubit v occupies bit v-1 of the
/// amplitude index (vertex 1 is the least significant bit).
#[derive(Clone, Debug)]
pub struct StateVector {
    qubit_count: usize,
    measured: u32,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |+>^N.
    pub fn plus_state(qubit_count: usize) -> Result<Self> {
        Self::plus_state_capped(qubit_count, DEFAULT_QUBIT_CAP)
    }

    pub fn plus_state_capped(qubit_count: usize, cap: usize) -> Result<Self> {
        if qubit_count == 0 {
            return Err(Error::EmptyGraph);
        }
        if qubit_count > cap {
            return Err(Error::QubitCap {
                qubits: qubit_count,
                cap,
            });
        }
        let dim = 1usize << qubit_count;
        let amp = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(StateVector {
            qubit_count,
            measured: 0,
            amps: vec![amp; dim],
        })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::BadStateLength(dim));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(StateVector {
            qubit_count: dim.trailing_zeros() as usize,
            measured: 0,
            amps,
        })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_measured(&self, qubit: usize) -> bool {
        self.measured >> (qubit - 1) & 1 == 1
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit == 0 || qubit > self.qubit_count {
            return Err(Error::VertexOutOfRange {
                vertex: qubit,
                vertex_count: self.qubit_count,
            });
        }
        Ok(())
    }

    pub fn apply_pauli_x(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let bit = 1usize << (qubit - 1);
        for idx in 0..self.amps.len() {
            if idx & bit == 0 {
                self.amps.swap(idx, idx | bit);
            }
        }
        Ok(())
    }

    pub fn apply_pauli_z(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let bit = 1usize << (qubit - 1);
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            if idx & bit != 0 {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        let mask = (1usize << (a - 1)) | (1usize << (b - 1));
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            if idx & mask == mask {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    /// Apply the graph-state stabilizer of vertex v: X on v, Z on each
    /// neighbor. Graph states are fixed points of every such operator.
    pub fn apply_stabilizer(&mut self, graph: &Graph, v: usize) -> Result<()> {
        self.apply_pauli_x(v)?;
        for &w in graph.neighborhood(v)? {
            self.apply_pauli_z(w)?;
        }
        Ok(())
    }

    /// Born probability of `outcome` when measuring `qubit` in the XY basis
    /// at `angle`.
    pub fn outcome_probability(&self, qubit: usize, angle: Angle8, outcome: u8) -> f64 {
        let bit = 1usize << (qubit - 1);
        let sign = if outcome & 1 == 0 { 1.0 } else { -1.0 };
        let bra1 = angle.phase().conj() * sign;
        let mut total = 0.0;
        for idx in 0..self.amps.len() {
            if idx & bit == 0 {
                let c = (self.amps[idx] + bra1 * self.amps[idx | bit]) / 2f64.sqrt();
                total += c.norm_sqr();
            }
        }
        total
    }

    /// Project-and-keep collapse. Returns the outcome probability and the
    /// renormalized state with `qubit` left in the projected basis state.
    /// Probabilities at or below `floor` yield a zeroed state instead of a
    /// division by (nearly) zero. Exhaustive walkers use this directly so
    /// vanishing branches carry weight zero rather than erroring.
    pub(crate) fn project_xy(
        &self,
        qubit: usize,
        angle: Angle8,
        outcome: u8,
        floor: f64,
    ) -> (f64, StateVector) {
        let bit = 1usize << (qubit - 1);
        let sign = if outcome & 1 == 0 { 1.0 } else { -1.0 };
        let bra1 = angle.phase().conj() * sign;
        let ket1 = angle.phase() * sign;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        let mut total = 0.0;
        for idx in 0..self.amps.len() {
            if idx & bit == 0 {
                let c = (self.amps[idx] + bra1 * self.amps[idx | bit]) / 2f64.sqrt();
                total += c.norm_sqr();
                amps[idx] = c / 2f64.sqrt();
                amps[idx | bit] = c * ket1 / 2f64.sqrt();
            }
        }
        if total <= floor {
            for amp in &mut amps {
                *amp = Complex64::new(0.0, 0.0);
            }
        } else {
            let scale = 1.0 / total.sqrt();
            for amp in &mut amps {
                *amp *= scale;
            }
        }
        let state = StateVector {
            qubit_count: self.qubit_count,
            measured: self.measured | (bit as u32),
            amps,
        };
        (total, state)
    }

    /// Measure `qubit` in the XY basis at `angle`, either forcing an outcome
    /// or sampling it from the Born rule. Forcing an outcome of probability
    /// below 1e-12 is an error.
    pub fn measure_xy(
        &self,
        qubit: usize,
        angle: Angle8,
        choice: OutcomeChoice<'_>,
    ) -> Result<(MeasurementRecord, StateVector)> {
        self.check_qubit(qubit)?;
        if self.is_measured(qubit) {
            return Err(Error::AlreadyMeasured { qubit });
        }
        let p0 = self.outcome_probability(qubit, angle, 0);
        let outcome = match choice {
            OutcomeChoice::Forced(b) => b & 1,
            OutcomeChoice::Sample(rng) => {
                let draw = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                u8::from(draw >= p0)
            }
        };
        let (probability, state) = self.project_xy(qubit, angle, outcome, 0.0);
        if probability < FORCED_OUTCOME_FLOOR {
            return Err(Error::ZeroProbabilityOutcome { qubit, outcome });
        }
        Ok((
            MeasurementRecord {
                qubit,
                angle,
                outcome,
                probability,
            },
            state,
        ))
    }
}

/// Prepare |G> for a graph: |+> on every vertex, a controlled-Z along every
/// edge.
pub fn prepare_graph_state(graph: &Graph) -> Result<StateVector> {
    prepare_graph_state_capped(graph, DEFAULT_QUBIT_CAP)
}

pub fn prepare_graph_state_capped(graph: &Graph, cap: usize) -> Result<StateVector> {
    let mut state = StateVector::plus_state_capped(graph.vertex_count(), cap)?;
    for (a, b) in graph.edges() {
        state.apply_cz(a, b)?;
    }
    Ok(state)
}

/// Enumerate every outcome path of measuring all qubits of |G> in vertex
/// order. The policy supplies the angle for each round from the previous
/// outcomes. All 2^N paths are returned, including zero-probability ones;
/// outcome bit j-1 of the key is round j's result.
pub fn branch_tree(
    graph: &Graph,
    policy: &mut dyn FnMut(usize, &[u8]) -> Angle8,
) -> Result<Vec<(u32, f64)>> {
    branch_tree_capped(graph, policy, DEFAULT_EXHAUSTIVE_CAP)
}

pub fn branch_tree_capped(
    graph: &Graph,
    policy: &mut dyn FnMut(usize, &[u8]) -> Angle8,
    cap: usize,
) -> Result<Vec<(u32, f64)>> {
    let n = graph.vertex_count();
    if n > cap {
        return Err(Error::ExhaustiveCap { qubits: n, cap });
    }
    let root = prepare_graph_state_capped(graph, cap.max(DEFAULT_QUBIT_CAP))?;
    let mut paths = Vec::with_capacity(1 << n);
    let mut outcomes = Vec::with_capacity(n);
    fn descend(
        state: &StateVector,
        round: usize,
        n: usize,
        prob: f64,
        outcomes: &mut Vec<u8>,
        policy: &mut dyn FnMut(usize, &[u8]) -> Angle8,
        paths: &mut Vec<(u32, f64)>,
    ) {
        if round > n {
            let key = outcomes
                .iter()
                .enumerate()
                .fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << i));
            paths.push((key, prob));
            return;
        }
        let angle = policy(round, outcomes);
        for outcome in [0u8, 1u8] {
            let (p, next) = state.project_xy(round, angle, outcome, NORM_TOLERANCE * 1e-3);
            outcomes.push(outcome);
            descend(&next, round + 1, n, prob * p, outcomes, policy, paths);
            outcomes.pop();
        }
    }
    descend(&root, 1, n, 1.0, &mut outcomes, policy, &mut paths);
    Ok(paths)
}

/// Joint distribution of the output-qubit measurements, indexed by output
/// bits: entry k has bit j set when the j-th smallest output vertex came
/// out 1.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputDistribution {
    pub outputs: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl OutputDistribution {
    pub fn total_mass(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Total-variation distance to another distribution over the same
    /// outputs.
    pub fn total_variation(&self, other: &OutputDistribution) -> f64 {
        assert_eq!(self.outputs, other.outputs, "incomparable distributions");
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
            / 2.0
    }
}

/// The reference distribution of a pattern: project every non-output vertex
/// onto outcome 0 at its angle (in measurement order, renormalizing), then
/// measure the outputs at their angles. By convention this branch implements
/// the target computation.
pub fn positive_branch_distribution(
    open_graph: &OpenGraph,
    angles: &[Angle8],
) -> Result<OutputDistribution> {
    positive_branch_distribution_capped(open_graph, angles, DEFAULT_EXHAUSTIVE_CAP)
}

pub fn positive_branch_distribution_capped(
    open_graph: &OpenGraph,
    angles: &[Angle8],
    cap: usize,
) -> Result<OutputDistribution> {
    let graph = open_graph.graph();
    let n = graph.vertex_count();
    if n > cap {
        return Err(Error::ExhaustiveCap { qubits: n, cap });
    }
    if angles.len() != n {
        return Err(Error::AngleCount {
            got: angles.len(),
            expected: n,
        });
    }
    let mut state = prepare_graph_state_capped(graph, cap.max(DEFAULT_QUBIT_CAP))?;
    for v in open_graph.non_outputs() {
        let (p, next) = state.project_xy(v, angles[v - 1], 0, 0.0);
        if p < FORCED_OUTCOME_FLOOR {
            return Err(Error::EmptyPositiveBranch);
        }
        state = next;
    }
    let outputs: Vec<usize> = open_graph.outputs().iter().copied().collect();
    let mut probabilities = vec![0.0; 1 << outputs.len()];
    fn walk(
        state: &StateVector,
        outputs: &[usize],
        angles: &[Angle8],
        pos: usize,
        key: usize,
        prob: f64,
        table: &mut [f64],
    ) {
        if pos == outputs.len() {
            table[key] = prob;
            return;
        }
        let v = outputs[pos];
        for outcome in [0u8, 1u8] {
            let (p, next) = state.project_xy(v, angles[v - 1], outcome, NORM_TOLERANCE * 1e-3);
            walk(
                &next,
                outputs,
                angles,
                pos + 1,
                key | ((outcome as usize) << pos),
                prob * p,
                table,
            );
        }
    }
    walk(&state, &outputs, angles, 0, 0, 1.0, &mut probabilities);
    Ok(OutputDistribution {
        outputs,
        probabilities,
    })
}
