//! A desk-scale laboratory for classically driven blind delegated computation
//! on cluster states.
//!
//! The pieces, bottom up:
//!
//! * [`graph`]: simple graphs with a total measurement order, cluster grids,
//!   odd neighborhoods.
//! * [`flow`]: g-flow checking on any open graph; enumeration, canonical
//!   indexing, and exact Fibonacci-product counting of the non-crossing flows
//!   a grid admits under its fixed measurement order.
//! * [`sim`]: a dense statevector backend with XY-plane projective
//!   measurements, exhaustive branch trees, and the positive-branch reference
//!   distribution.
//! * [`protocol`]: the interactive client/server protocol, where a classical
//!   client drives the measurement of a graph state one padded angle at a
//!   time and decodes the returned bits.
//! * [`analysis`]: exact joint distributions over everything the server
//!   sees, Shannon entropies, the leakage bounds, and transcript ambiguity.

pub mod analysis;
pub mod error;
pub mod flow;
pub mod graph;
pub mod protocol;
pub mod sim;

pub use error::{Error, Result};
pub use flow::{
    check_gflow, count_flows_closed_form, count_flows_product_form, enumerate_grid_flows,
    schedulable_flow_indices, FlowBits, FlowVerdict, GFlow, GridFlow,
};
pub use graph::{build_cluster_grid, Graph, GridSpec, OpenGraph};
pub use protocol::{
    run_protocol, run_protocol_exhaustive, BobModel, BobServer, MeasurementPattern,
    ProtocolTranscript,
};
pub use sim::{Angle8, AngleSet, StateVector};
