//! Browser bindings for the cdbqc laboratory. Three operations, each
//! returning a JSON string for the demo page to render:
//!
//! * [`flow_catalog`]: every counted flow of a grid with arrows, derived
//!   input/output sets, and whether the fixed measurement order can drive it.
//! * [`count_flows`]: exact and asymptotic counts plus the bits-per-qubit
//!   curve over square grids.
//! * [`protocol_demo`]: one seeded protocol run with its transcript, the
//!   reference output distribution, and the per-flow witness table showing
//!   that every flow stays consistent with the transcript.
//!
//! The `*_json` functions carry the logic and are exercised by host-side
//! tests; the `#[wasm_bindgen]` wrappers only translate errors.

use wasm_bindgen::prelude::*;

use cdbqc::analysis::{replay_check, transcript_ambiguity};
use cdbqc::error::Result;
use cdbqc::flow::{
    approx_count_log2, asymptotic_bits_per_qubit, check_gflow, count_flows_closed_form,
    enumerate_grid_flows, log2_biguint, schedulable_flow_indices,
};
use cdbqc::graph::GridSpec;
use cdbqc::protocol::{
    random_angles, random_flow_index, run_protocol, BobServer, ConstantBob, HonestBob,
    MeasurementPattern, RandomBob,
};
use cdbqc::sim::AngleSet;
use rand::SeedableRng;

pub fn flow_catalog_json(rows: usize, cols: usize) -> Result<String> {
    let spec = GridSpec::new(rows, cols)?;
    let flows = enumerate_grid_flows(&spec)?;
    let entries: Vec<serde_json::Value> = flows
        .iter()
        .enumerate()
        .map(|(index, flow)| {
            let schedulable = flow
                .to_gflow()
                .map(|g| check_gflow(&g).is_valid())
                .unwrap_or(false);
            serde_json::json!({
                "index": index,
                "arrows": flow.arrows(),
                "inputs": flow.inputs().into_iter().collect::<Vec<_>>(),
                "outputs": flow.outputs().into_iter().collect::<Vec<_>>(),
                "schedulable": schedulable,
            })
        })
        .collect();
    Ok(serde_json::json!({
        "rows": rows,
        "cols": cols,
        "count": flows.len(),
        "flows": entries,
    })
    .to_string())
}

pub fn count_flows_json(rows: usize, cols: usize) -> Result<String> {
    let spec = GridSpec::new(rows, cols)?;
    let count = count_flows_closed_form(&spec);
    let log2_count = log2_biguint(&count);
    let qubits = spec.vertex_count() as f64;
    let curve: Vec<serde_json::Value> = (1..=10usize)
        .map(|n| {
            let square = GridSpec::new(n, n).expect("positive dims");
            let bits = log2_biguint(&count_flows_closed_form(&square)) / (n * n) as f64;
            serde_json::json!({ "n": n, "bits_per_qubit": bits })
        })
        .collect();
    Ok(serde_json::json!({
        "rows": rows,
        "cols": cols,
        "count": count.to_string(),
        "log2_count": log2_count,
        "bits_per_qubit": log2_count / qubits,
        "approx_log2_count": approx_count_log2(&spec),
        "asymptote_bits_per_qubit": asymptotic_bits_per_qubit(),
        "square_grid_curve": curve,
    })
    .to_string())
}

pub fn protocol_demo_json(
    rows: usize,
    cols: usize,
    flow: i64,
    seed: u64,
    bob: &str,
) -> Result<String> {
    let spec = GridSpec::new(rows, cols)?;
    let mut select_rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let flow_index = if flow < 0 {
        random_flow_index(&spec, &mut select_rng)?
    } else {
        flow as u64
    };
    let angles = random_angles(&spec, &AngleSet::standard(), &mut select_rng);
    let pattern = MeasurementPattern::new(spec, angles.clone(), flow_index)?;
    let mut server: Box<dyn BobServer> = match bob {
        "constant-0" => Box::new(ConstantBob(0)),
        "constant-1" => Box::new(ConstantBob(1)),
        "random" => Box::new(RandomBob::new(seed.wrapping_add(2))),
        _ => Box::new(HonestBob::new(seed.wrapping_add(2))),
    };
    let (output, transcript) = run_protocol(&pattern, server.as_mut(), seed.wrapping_add(1))?;
    let reference = pattern.positive_branch_distribution()?;
    let mut ambiguity = Vec::new();
    for candidate in schedulable_flow_indices(&spec)? {
        let witnesses = transcript_ambiguity(&transcript, candidate)?;
        let mut all_replay = true;
        for witness in &witnesses {
            all_replay &= replay_check(&transcript, candidate, witness)?;
        }
        ambiguity.push(serde_json::json!({
            "index": candidate,
            "witnesses": witnesses.len(),
            "all_replay": all_replay,
        }));
    }
    Ok(serde_json::json!({
        "flow": flow_index,
        "angles": angles.iter().map(|a| a.value()).collect::<Vec<_>>(),
        "arrows": pattern.grid_flow().arrows(),
        "inputs": pattern.grid_flow().inputs().into_iter().collect::<Vec<_>>(),
        "outputs": pattern.grid_flow().outputs().into_iter().collect::<Vec<_>>(),
        "bob": server.kind(),
        "output": output,
        "output_vertices": reference.outputs,
        "reference_distribution": reference.probabilities,
        "transcript": serde_json::to_value(&transcript).expect("transcript serializes"),
        "ambiguity": ambiguity,
    })
    .to_string())
}

fn to_js<T>(result: Result<T>) -> std::result::Result<T, JsError> {
    result.map_err(|e| JsError::new(&e.to_string()))
}

/// Catalog of every counted flow on an n x m grid, as JSON.
#[wasm_bindgen]
pub fn flow_catalog(rows: usize, cols: usize) -> std::result::Result<String, JsError> {
    to_js(flow_catalog_json(rows, cols))
}

/// Exact count, approximation, and the bits-per-qubit curve, as JSON.
#[wasm_bindgen]
pub fn count_flows(rows: usize, cols: usize) -> std::result::Result<String, JsError> {
    to_js(count_flows_json(rows, cols))
}

/// One seeded protocol run with transcript and ambiguity table, as JSON.
/// A negative flow picks one at random from the schedulable flows.
#[wasm_bindgen]
pub fn protocol_demo(
    rows: usize,
    cols: usize,
    flow: i64,
    seed: u64,
    bob: &str,
) -> std::result::Result<String, JsError> {
    to_js(protocol_demo_json(rows, cols, flow, seed, bob))
}
