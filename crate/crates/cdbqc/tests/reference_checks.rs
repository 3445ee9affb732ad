//! Cross-checks of the positive-branch reference distribution against a
//! self-contained dense-projection oracle written with bare (f64, f64)
//! complex arithmetic, sharing no code with the library's backend.

use cdbqc::flow::decode_flow_index;
use cdbqc::graph::{build_cluster_grid, GridSpec};
use cdbqc::sim::{branch_tree, positive_branch_distribution, Angle8};

#[derive(Clone, Copy)]
struct C(f64, f64);

impl C {
    fn add(self, o: C) -> C {
        C(self.0 + o.0, self.1 + o.1)
    }
    fn mul(self, o: C) -> C {
        C(
            self.0 * o.0 - self.1 * o.1,
            self.0 * o.1 + self.1 * o.0,
        )
    }
    fn scale(self, s: f64) -> C {
        C(self.0 * s, self.1 * s)
    }
    fn norm_sqr(self) -> f64 {
        self.0 * self.0 + self.1 * self.1
    }
}

fn oracle_graph_state(qubits: usize, edges: &[(usize, usize)]) -> Vec<C> {
    let dim = 1usize << qubits;
    let amp = 1.0 / (dim as f64).sqrt();
    let mut state = vec![C(amp, 0.0); dim];
    for &(a, b) in edges {
        let mask = (1usize << (a - 1)) | (1usize << (b - 1));
        for (idx, c) in state.iter_mut().enumerate() {
            if idx & mask == mask {
                *c = c.scale(-1.0);
            }
        }
    }
    state
}

/// Project qubit onto outcome b at angle (radians), renormalize, return
/// (probability, state).
fn oracle_project(state: &[C], qubit: usize, angle: f64, outcome: u8) -> (f64, Vec<C>) {
    let bit = 1usize << (qubit - 1);
    let sign = if outcome == 0 { 1.0 } else { -1.0 };
    let bra1 = C(angle.cos() * sign, -angle.sin() * sign);
    let ket1 = C(angle.cos() * sign, angle.sin() * sign);
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    let mut next = vec![C(0.0, 0.0); state.len()];
    let mut total = 0.0;
    for idx in 0..state.len() {
        if idx & bit != 0 {
            continue;
        }
        let c = state[idx].add(bra1.mul(state[idx | bit])).scale(inv_sqrt2);
        total += c.norm_sqr();
        next[idx] = c.scale(inv_sqrt2);
        next[idx | bit] = c.mul(ket1).scale(inv_sqrt2);
    }
    if total > 0.0 {
        let s = 1.0 / total.sqrt();
        for c in &mut next {
            *c = c.scale(s);
        }
    }
    (total, next)
}

#[test]
fn positive_branch_matches_the_independent_oracle_and_frozen_values() {
    // 2x2 grid, arrows {1->2, 3->4} (canonical index 4), all angles pi/4.
    let spec = GridSpec::new(2, 2).unwrap();
    let flow = decode_flow_index(&spec, 4).unwrap();
    assert_eq!(flow.arrows(), vec![(1, 2), (3, 4)]);
    let open = flow.to_gflow().unwrap().open_graph().clone();
    let angles = vec![Angle8::new(1); 4];
    let got = positive_branch_distribution(&open, &angles).unwrap();
    assert_eq!(got.outputs, vec![2, 4]);

    // Independent projection oracle.
    let quarter = std::f64::consts::FRAC_PI_4;
    let state = oracle_graph_state(4, &[(1, 2), (1, 3), (2, 4), (3, 4)]);
    let (_, state) = oracle_project(&state, 1, quarter, 0);
    let (_, state) = oracle_project(&state, 3, quarter, 0);
    let mut expected = [0.0f64; 4];
    for b2 in 0..2u8 {
        for b4 in 0..2u8 {
            let (p2, s2) = oracle_project(&state, 2, quarter, b2);
            let (p4, _) = oracle_project(&s2, 4, quarter, b4);
            expected[(b2 as usize) | ((b4 as usize) << 1)] = p2 * p4;
        }
    }
    for (key, &e) in expected.iter().enumerate() {
        assert!(
            (got.probabilities[key] - e).abs() < 1e-12,
            "cell {key}: {} vs oracle {e}",
            got.probabilities[key]
        );
    }

    // Values computed once with the oracle above and frozen.
    let frozen = [
        0.208946609406726,
        0.364276695296636,
        0.364276695296636,
        0.062500000000000,
    ];
    for (key, &f) in frozen.iter().enumerate() {
        assert!(
            (got.probabilities[key] - f).abs() < 1e-12,
            "cell {key}: {} vs frozen {f}",
            got.probabilities[key]
        );
    }
}

#[test]
fn closed_open_graph_reference_equals_the_raw_measurement_tree() {
    // With every vertex both input and output (the empty flow) there are no
    // projections: the reference distribution is just the joint XY
    // measurement law of the raw graph state.
    let spec = GridSpec::new(2, 2).unwrap();
    let flow = decode_flow_index(&spec, 0).unwrap();
    assert!(flow.arrows().is_empty());
    let open = flow.to_gflow().unwrap().open_graph().clone();
    let angles = vec![Angle8::new(1); 4];
    let reference = positive_branch_distribution(&open, &angles).unwrap();
    assert_eq!(reference.outputs, vec![1, 2, 3, 4]);

    let graph = build_cluster_grid(&spec);
    let tree = branch_tree(&graph, &mut |_, _| Angle8::new(1)).unwrap();
    for (key, prob) in tree {
        assert!(
            (reference.probabilities[key as usize] - prob).abs() < 1e-12,
            "branch {key:04b}"
        );
    }
}

#[test]
fn analysis_walk_agrees_with_the_protocol_walk() {
    // Two independent routes to the same law: the protocol module runs the
    // client state machine against a simulated server over every pad and
    // branch; the analysis module enumerates the factored joint directly
    // from the dependency tables. For a point prior they must agree cell by
    // cell.
    use cdbqc::analysis::{build_joint, pack_angles, Prior};
    use cdbqc::protocol::{run_protocol_exhaustive, BobModel, MeasurementPattern};
    use std::collections::BTreeMap;

    for (rows, cols, flow) in [(1, 3, 2), (2, 2, 4), (2, 2, 7)] {
        let spec = GridSpec::new(rows, cols).unwrap();
        let angles: Vec<Angle8> = [1u8, 3, 5, 7]
            .iter()
            .cycle()
            .take(spec.vertex_count())
            .map(|&k| Angle8::new(k))
            .collect();
        let pattern = MeasurementPattern::new(spec, angles.clone(), flow).unwrap();
        let law = run_protocol_exhaustive(&pattern).unwrap();
        let mut from_protocol: BTreeMap<(u32, u64), f64> = BTreeMap::new();
        for entry in &law.entries {
            *from_protocol
                .entry((entry.b_prime, pack_angles(&entry.alpha_prime)))
                .or_insert(0.0) += entry.probability;
        }

        let prior = Prior::point(spec, angles, flow).unwrap();
        let joint = build_joint(&spec, &prior, &BobModel::Honest).unwrap();
        let mut from_analysis: BTreeMap<(u32, u64), f64> = BTreeMap::new();
        for (key, &p) in joint.cells() {
            if p > 1e-15 {
                *from_analysis
                    .entry((key.b_prime, key.alpha_prime))
                    .or_insert(0.0) += p;
            }
        }

        assert_eq!(
            from_protocol.keys().collect::<Vec<_>>(),
            from_analysis.keys().collect::<Vec<_>>(),
            "cell supports differ on {rows}x{cols} flow {flow}"
        );
        for (key, p) in &from_protocol {
            let q = from_analysis[key];
            assert!(
                (p - q).abs() < 1e-12,
                "cell {key:?} differs on {rows}x{cols} flow {flow}: {p} vs {q}"
            );
        }
    }
}

#[test]
fn out_of_set_angles_cannot_form_a_pattern() {
    use cdbqc::error::Error;
    use cdbqc::protocol::MeasurementPattern;
    let spec = GridSpec::new(1, 2).unwrap();
    let result = MeasurementPattern::new(spec, vec![Angle8::new(0), Angle8::new(1)], 1);
    assert!(matches!(result, Err(Error::AngleOutsideSet { angle: 0 })));
}
