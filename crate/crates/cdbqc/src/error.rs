//! Crate-wide error type.

use thiserror::Error;

use crate::flow::FlowCondition;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph must have at least one vertex")]
    EmptyGraph,

    #[error("grid dimensions must be positive, got {rows}x{cols}")]
    InvalidGridDimensions { rows: usize, cols: usize },

    #[error("vertex {vertex} out of range 1..={vertex_count}")]
    VertexOutOfRange { vertex: usize, vertex_count: usize },

    #[error("invalid edge ({a}, {b}): self-loops and duplicate edges are not allowed")]
    InvalidEdge { a: usize, b: usize },

    #[error("input and output sets must have equal size: |I| = {inputs}, |O| = {outputs}")]
    InputOutputSizeMismatch { inputs: usize, outputs: usize },

    #[error("correcting-set domain must be exactly the non-output vertices")]
    CorrectingSetDomain,

    #[error("correcting set of vertex {vertex} must be a nonempty subset of the non-input vertices")]
    CorrectingSetRange { vertex: usize },

    #[error("invalid arrow ({src}, {dst}): target must be the right or down grid neighbor")]
    InvalidArrow { src: usize, dst: usize },

    #[error("enumeration cap exceeded: {vertices} vertices over cap {cap}")]
    EnumerationCap { vertices: usize, cap: usize },

    #[error("flow index {index} out of range for {count} flows")]
    FlowIndexRange { index: u64, count: u64 },

    #[error("flow violates condition {condition}")]
    InvalidFlow { condition: FlowCondition },

    #[error("recursion depth must be at least 1")]
    ZeroCutDepth,

    #[error("qubit count {qubits} over cap {cap}")]
    QubitCap { qubits: usize, cap: usize },

    #[error("exhaustive enumeration cap exceeded: {qubits} qubits over cap {cap}")]
    ExhaustiveCap { qubits: usize, cap: usize },

    #[error("state vector length {0} is not a power of two")]
    BadStateLength(usize),

    #[error("state vector norm-squared {0} is not 1")]
    NotNormalized(f64),

    #[error("angle value {0} is not a residue modulo 8")]
    BadAngleValue(u8),

    #[error("angle {angle}*pi/4 outside the configured angle set")]
    AngleOutsideSet { angle: u8 },

    #[error("angle set is empty or not closed under sign flip and half-turn shift")]
    AngleSetNotClosed,

    #[error("angle vector has length {got}, expected {expected}")]
    AngleCount { got: usize, expected: usize },

    #[error("successor choices have length {got}, expected {expected}")]
    ChoiceCount { got: usize, expected: usize },

    #[error("qubit {qubit} was already measured")]
    AlreadyMeasured { qubit: usize },

    #[error("forced outcome {outcome} on qubit {qubit} has probability below 1e-12")]
    ZeroProbabilityOutcome { qubit: usize, outcome: u8 },

    #[error("positive branch has zero probability")]
    EmptyPositiveBranch,

    #[error("protocol round mismatch: expected {expected}, got {got}")]
    RoundMismatch { expected: usize, got: usize },

    #[error("protocol sequence error: {0}")]
    OutOfSequence(&'static str),

    #[error("pad has length {got}, expected {expected}")]
    PadLength { got: usize, expected: usize },

    #[error("probabilities sum to {0}, expected 1")]
    BadDistribution(f64),

    #[error("prior support of {cells} cells over {pads} pad values exceeds the analysis cap")]
    AnalysisTooLarge { cells: u128, pads: u128 },

    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),

    #[error("server strategy failure: {0}")]
    Strategy(String),
}
