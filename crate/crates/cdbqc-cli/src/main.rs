//! Command-line surface for the cdbqc laboratory.
//!
//! JSON goes to standard output (or `--out`), human summaries to standard
//! error. Exit codes: 0 success, 2 invalid configuration or parse failure,
//! 3 backend failure, 4 leakage-bound violation (which would indicate an
//! implementation bug, not a property of the server).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cdbqc::analysis::{
    build_joint, entropy_report, joint_to_csv, transcript_ambiguity, replay_check, verify_bounds,
    Prior,
};
use cdbqc::error::Error;
use cdbqc::flow::{
    approx_count_log2, asymptotic_bits_per_qubit, count_flows_closed_form,
    count_flows_product_form, enumerate_grid_flows_capped, flow_catalog_capped, log2_biguint,
    schedulable_flow_indices, DEFAULT_ENUM_CAP,
};
use cdbqc::graph::GridSpec;
use cdbqc::protocol::{
    random_angles, random_flow_index, run_protocol, BobModel, BobServer, ConstantBob, HonestBob,
    MeasurementPattern, ProtocolTranscript, RandomBob,
};
use cdbqc::sim::{Angle8, AngleSet};

const EXIT_CONFIG: u8 = 2;
const EXIT_BACKEND: u8 = 3;
const EXIT_BOUNDS: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cdbqc",
    version,
    about = "Blind delegated measurement-based computation on cluster grids: \
             flow census, protocol runs, exact leakage reports, ambiguity checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count the flows an n x m grid admits under its fixed measurement order
    CountFlows {
        #[command(flatten)]
        grid: GridArgs,
        /// formula: simplified Fibonacci product; product: three-factor cut
        /// product; enumerate: explicit census; asymptotic: golden-ratio
        /// approximation (log2 only)
        #[arg(long, value_enum, default_value_t = CountMethod::Formula)]
        method: CountMethod,
    },
    /// Write the full flow catalog (arrows, inputs, outputs per flow) as JSON
    EnumerateFlows {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the interactive protocol once against a chosen server
    Run {
        #[command(flatten)]
        grid: GridArgs,
        /// Flow index in canonical order, or "random"
        #[arg(long, default_value = "random")]
        flow: String,
        /// Comma-separated angles in eighth turns (e.g. 1,3,5,7), or "random"
        #[arg(long, default_value = "random")]
        angles: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = BobKind::Honest)]
        bob: BobKind,
        /// Write the transcript JSON here instead of embedding it in stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the exact joint distribution for a prior and server model,
    /// report entropies, and verify the leakage bounds
    Analyze {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value_t = BobKind::Honest)]
        bob: BobKind,
        #[arg(long, value_enum, default_value_t = PriorKind::Uniform)]
        prior: PriorKind,
        /// Flow index for a point prior
        #[arg(long)]
        flow: Option<u64>,
        /// Angles for a point prior, comma-separated eighth turns
        #[arg(long)]
        angles: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also export the sparse joint table as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// For each schedulable flow, count the (angles, pad) witnesses
    /// consistent with a recorded transcript
    CheckAmbiguity {
        /// Path to a transcript JSON file
        transcript: PathBuf,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CountMethod {
    Formula,
    Product,
    Enumerate,
    Asymptotic,
}

#[derive(Clone, Copy, ValueEnum)]
enum BobKind {
    Honest,
    #[value(name = "constant-0")]
    Constant0,
    #[value(name = "constant-1")]
    Constant1,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorKind {
    Uniform,
    Point,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::QubitCap { .. }
            | Error::ExhaustiveCap { .. }
            | Error::ZeroProbabilityOutcome { .. }
            | Error::EmptyPositiveBranch
            | Error::AlreadyMeasured { .. }
            | Error::Strategy(_)
            | Error::OutOfSequence(_)
            | Error::RoundMismatch { .. } => EXIT_BACKEND,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::CountFlows { grid, method } => count_flows(grid, method),
        Command::EnumerateFlows { grid, out } => enumerate_flows(grid, out),
        Command::Run {
            grid,
            flow,
            angles,
            seed,
            bob,
            out,
        } => run(grid, &flow, &angles, seed, bob, out),
        Command::Analyze {
            grid,
            bob,
            prior,
            flow,
            angles,
            out,
            csv,
        } => analyze(grid, bob, prior, flow, angles, out, csv),
        Command::CheckAmbiguity { transcript } => check_ambiguity(&transcript),
    }
}

fn grid_spec(grid: &GridArgs) -> Result<GridSpec, Failure> {
    Ok(GridSpec::new(grid.rows, grid.cols)?)
}

fn enum_cap() -> usize {
    std::env::var("CDBQC_ENUM_CAP")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
}

fn emit(out: Option<&PathBuf>, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    match out {
        Some(path) => fs::write(path, text.as_bytes())
            .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn count_flows(grid: GridArgs, method: CountMethod) -> Result<(), Failure> {
    let spec = grid_spec(&grid)?;
    let qubits = spec.vertex_count() as f64;
    let asymptote = asymptotic_bits_per_qubit();
    let mut payload = serde_json::json!({
        "rows": spec.rows(),
        "cols": spec.cols(),
        "asymptote_bits_per_qubit": asymptote,
    });
    let log2_count = match method {
        CountMethod::Formula | CountMethod::Product => {
            let count = match method {
                CountMethod::Formula => count_flows_closed_form(&spec),
                _ => count_flows_product_form(&spec),
            };
            let log2 = log2_biguint(&count);
            payload["method"] = serde_json::json!(match method {
                CountMethod::Formula => "formula",
                _ => "product",
            });
            payload["count"] = serde_json::json!(count.to_string());
            log2
        }
        CountMethod::Enumerate => {
            let flows = enumerate_grid_flows_capped(&spec, enum_cap())?;
            let schedulable = schedulable_flow_indices(&spec)?.len();
            payload["method"] = serde_json::json!("enumerate");
            payload["count"] = serde_json::json!(flows.len().to_string());
            payload["schedulable_count"] = serde_json::json!(schedulable);
            (flows.len() as f64).log2()
        }
        CountMethod::Asymptotic => {
            payload["method"] = serde_json::json!("asymptotic");
            approx_count_log2(&spec)
        }
    };
    payload["log2_count"] = serde_json::json!(log2_count);
    payload["bits_per_qubit"] = serde_json::json!(log2_count / qubits);
    eprintln!(
        "{}x{} flows: log2(count) = {log2_count:.4}, {:.4} bits per qubit \
         (asymptote {asymptote:.4})",
        spec.rows(),
        spec.cols(),
        log2_count / qubits
    );
    emit(None, &payload)
}

fn enumerate_flows(grid: GridArgs, out: Option<PathBuf>) -> Result<(), Failure> {
    let spec = grid_spec(&grid)?;
    let catalog = flow_catalog_capped(&spec, enum_cap())?;
    eprintln!(
        "{}x{}: {} flows cataloged",
        spec.rows(),
        spec.cols(),
        catalog.count
    );
    let value = serde_json::to_value(&catalog).expect("catalog serializes");
    emit(out.as_ref(), &value)
}

fn parse_angles(text: &str, spec: &GridSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Angle8>, Failure> {
    if text == "random" {
        return Ok(random_angles(spec, &AngleSet::standard(), rng));
    }
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u8>()
                .map_err(|_| Failure::config(format!("bad angle {part:?}")))
                .and_then(|k| Angle8::try_from(k).map_err(Failure::from))
        })
        .collect()
}

fn make_server(kind: BobKind, seed: u64) -> Box<dyn BobServer> {
    match kind {
        BobKind::Honest => Box::new(HonestBob::new(seed)),
        BobKind::Constant0 => Box::new(ConstantBob(0)),
        BobKind::Constant1 => Box::new(ConstantBob(1)),
        BobKind::Random => Box::new(RandomBob::new(seed)),
    }
}

fn model_of(kind: BobKind) -> BobModel {
    match kind {
        BobKind::Honest => BobModel::Honest,
        BobKind::Constant0 => BobModel::Constant(0),
        BobKind::Constant1 => BobModel::Constant(1),
        BobKind::Random => BobModel::UniformRandom,
    }
}

fn run(
    grid: GridArgs,
    flow: &str,
    angles: &str,
    seed: u64,
    bob: BobKind,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let spec = grid_spec(&grid)?;
    // Distinct streams: selection, client pad, server randomness.
    let mut select_rng = ChaCha8Rng::seed_from_u64(seed);
    let flow_index = if flow == "random" {
        random_flow_index(&spec, &mut select_rng)?
    } else {
        flow.parse::<u64>()
            .map_err(|_| Failure::config(format!("bad flow index {flow:?}")))?
    };
    let angle_vec = parse_angles(angles, &spec, &mut select_rng)?;
    let pattern = MeasurementPattern::new(spec, angle_vec, flow_index)?;
    let mut server = make_server(bob, seed.wrapping_add(2));
    let (output, transcript) = run_protocol(&pattern, server.as_mut(), seed.wrapping_add(1))
        .map_err(Failure::from)?;
    let output_vertices: Vec<usize> = pattern
        .dependency_tables()
        .outputs()
        .iter()
        .copied()
        .collect();
    eprintln!(
        "{}x{} flow {flow_index}: output {:?} on vertices {:?}",
        spec.rows(),
        spec.cols(),
        output,
        output_vertices
    );
    let transcript_value = serde_json::to_value(&transcript).expect("transcript serializes");
    match out {
        Some(path) => {
            fs::write(
                &path,
                serde_json::to_string_pretty(&transcript_value)
                    .expect("serializable value")
                    .as_bytes(),
            )
            .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
            emit(
                None,
                &serde_json::json!({
                    "flow": flow_index,
                    "output": output,
                    "output_vertices": output_vertices,
                    "transcript_path": path.display().to_string(),
                }),
            )
        }
        None => emit(
            None,
            &serde_json::json!({
                "flow": flow_index,
                "output": output,
                "output_vertices": output_vertices,
                "transcript": transcript_value,
            }),
        ),
    }
}

fn analyze(
    grid: GridArgs,
    bob: BobKind,
    prior_kind: PriorKind,
    flow: Option<u64>,
    angles: Option<String>,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> Result<(), Failure> {
    let spec = grid_spec(&grid)?;
    let prior = match prior_kind {
        PriorKind::Uniform => Prior::uniform(spec)?,
        PriorKind::Point => {
            let flow = flow.ok_or_else(|| Failure::config("--flow required for a point prior"))?;
            let angle_text = angles
                .ok_or_else(|| Failure::config("--angles required for a point prior"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let angle_vec = parse_angles(&angle_text, &spec, &mut rng)?;
            Prior::point(spec, angle_vec, flow)?
        }
    };
    let model = model_of(bob);
    let joint = build_joint(&spec, &prior, &model)?;
    let report = entropy_report(&joint, &prior);
    let bounds = verify_bounds(&report);
    if let Some(path) = csv {
        fs::write(&path, joint_to_csv(&joint).as_bytes())
            .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
    }
    eprintln!(
        "{}x{} {}: H(secret) = {:.4}, I = {:.4}, H(A') = {:.4}, bounds {}",
        spec.rows(),
        spec.cols(),
        report.bob,
        report.h_secret,
        report.mutual_information,
        report.h_alpha_prime,
        if bounds.all_hold { "hold" } else { "VIOLATED" }
    );
    let payload = serde_json::json!({
        "report": serde_json::to_value(&report).expect("report serializes"),
        "bounds": serde_json::to_value(&bounds).expect("verdict serializes"),
        "cells": joint.len(),
    });
    emit(out.as_ref(), &payload)?;
    if !bounds.all_hold {
        return Err(Failure {
            code: EXIT_BOUNDS,
            message: "a proved leakage bound failed, which indicates an implementation bug".into(),
        });
    }
    Ok(())
}

fn check_ambiguity(path: &PathBuf) -> Result<(), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let transcript: ProtocolTranscript = serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("transcript parse failure: {e}")))?;
    transcript.validate()?;
    let spec = transcript.spec()?;
    let flows = schedulable_flow_indices(&spec)?;
    let mut rows = Vec::new();
    let mut any_empty = false;
    for &flow in &flows {
        let witnesses = transcript_ambiguity(&transcript, flow)?;
        let mut all_replay = true;
        for witness in &witnesses {
            all_replay &= replay_check(&transcript, flow, witness)?;
        }
        any_empty |= witnesses.is_empty();
        rows.push(serde_json::json!({
            "index": flow,
            "witnesses": witnesses.len(),
            "all_replay": all_replay,
        }));
    }
    eprintln!(
        "{}x{}: {} flows checked against the transcript",
        spec.rows(),
        spec.cols(),
        flows.len()
    );
    emit(
        None,
        &serde_json::json!({
            "rows": spec.rows(),
            "cols": spec.cols(),
            "flows": rows,
        }),
    )?;
    if any_empty {
        return Err(Failure {
            code: 1,
            message: "a flow admits no witnesses for this transcript".into(),
        });
    }
    Ok(())
}
