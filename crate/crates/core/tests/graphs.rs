use std::collections::{BTreeMap, BTreeSet};

use dpp_core::engine::{plan, race_check, run_chunks, split_into_chunks, Chunk, StreamOptions};
use dpp_core::fixtures::{random_pointwise_program, FAN_ROT_ADDER};
use dpp_core::program::{Arrow, Endpoint, Instance, Node, Violation};
use dpp_core::types::PointSpec;
use dpp_core::{apps, parse_program, program_id, serialize_program, DataType, Program, StreamData};
use proptest::prelude::*;

fn two_by_two() -> Node {
    let f = DataType::FLOAT;
    Node::new(
        "int i = get_global_id(0);\ny[i] = a[i] + b[i];\nz[i] = a[i] - b[i];",
        [
            ("a".to_string(), PointSpec::input(f)),
            ("b".to_string(), PointSpec::input(f)),
            ("y".to_string(), PointSpec::output(f)),
            ("z".to_string(), PointSpec::output(f)),
        ],
    )
}

/// Instances `0..n` of one kernel wired by the given (from, out, to, in)
/// picks, skipping self-arrows and endpoints already used.
fn graph(n: u64, picks: &[(u64, bool, u64, bool)]) -> Program {
    let mut used = BTreeSet::new();
    let mut arrows = Vec::new();
    for &(from, out_y, to, in_a) in picks {
        let (from, to) = (from % n, to % n);
        let out = Endpoint::new(from, if out_y { "y" } else { "z" });
        let inp = Endpoint::new(to, if in_a { "a" } else { "b" });
        if from == to || used.contains(&out) || used.contains(&inp) {
            continue;
        }
        used.insert(out.clone());
        used.insert(inp.clone());
        arrows.push(Arrow::new(out, inp));
    }
    Program {
        arrows,
        kernels: [("k".to_string(), two_by_two())].into(),
        nodes: (0..n).map(|id| Instance { id, kernel: "k".into() }).collect(),
    }
}

proptest! {
    #[test]
    fn validate_agrees_with_ordering(n in 1u64..6, picks in prop::collection::vec((0u64..6, any::<bool>(), 0u64..6, any::<bool>()), 0..10)) {
        let p = graph(n, &picks);
        let report = p.validate();
        let has_cycle = report.violations.iter().any(|v| matches!(v, Violation::Cycle { .. }));
        match p.topological_order() {
            Ok(order) => {
                prop_assert!(!has_cycle);
                let pos: BTreeMap<u64, usize> = order.iter().enumerate().map(|(i, &id)| (id, i)).collect();
                prop_assert_eq!(pos.len() as u64, n);
                for a in &p.arrows {
                    prop_assert!(pos[&a.output.instance] < pos[&a.input.instance]);
                }
                let free = p.free_points();
                let ok = free.iter().any(|f| f.point == "a" || f.point == "b") && free.iter().any(|f| f.point == "y" || f.point == "z");
                prop_assert_eq!(report.is_ok(), ok, "{}", report);
            }
            Err(_) => {
                prop_assert!(has_cycle);
                prop_assert!(!report.is_ok());
            }
        }
    }

    #[test]
    fn canonical_form_is_a_fixed_point(seed in 0u64..500) {
        let p = random_pointwise_program(seed, 1).program;
        let once = serialize_program(&p);
        let back = parse_program(&once).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(serialize_program(&back), once);
        prop_assert_eq!(program_id(&back), program_id(&p));
    }
}

#[test]
fn ids_are_distinct_across_generated_programs() {
    let mut ids = BTreeSet::new();
    let mut docs = BTreeSet::new();
    for seed in 0..300 {
        let p = random_pointwise_program(seed, 1).program;
        docs.insert(serialize_program(&p));
        ids.insert(p.id());
    }
    assert_eq!(ids.len(), docs.len());
}

#[test]
fn key_order_and_whitespace_do_not_change_the_bytes() {
    let reordered = r#"
    {
      "arrows": [
        {"input": [2, "x"], "output": [0, "x"]},
        {"input": [2, "y"], "output": [1, "y"]},
        {"output": [0, "y"], "input": [1, "x"]}
      ],
      "nodes": [[0, {"kernel": "fan"}], [1, {"kernel": "rot"}], [2, {"kernel": "adder"}]],
      "kernels": {
        "rot": {"io": {"y": {"type": "OutputPoint", "data": "float"}, "x": {"type": "InputPoint", "data": "float"}},
                "body": "int i=get_global_id(0);\ny[i]=x[i]*65536.0f;"},
        "fan": {"io": {"z": {"data": "float2", "type": "InputPoint"}, "y": {"data": "float", "type": "OutputPoint"},
                       "x": {"data": "float", "type": "OutputPoint"}},
                "body": "int i=get_global_id(0);\nx[i]=z[i].x;\ny[i]=z[i].y;"},
        "adder": {"body": "int i=get_global_id(0);\nz[i]=x[i]+y[i];",
                  "io": {"z": {"data": "float", "type": "OutputPoint"}, "x": {"data": "float", "type": "InputPoint"},
                         "y": {"data": "float", "type": "InputPoint"}}}
      }
    }"#;
    let a = serialize_program(&Program::from_json(FAN_ROT_ADDER).unwrap());
    let b = serialize_program(&Program::from_json(reordered).unwrap());
    assert_eq!(a, b);
}

#[test]
fn fan_rot_adder_streams_through_many_chunks() {
    let p = Program::from_json(FAN_ROT_ADDER).unwrap();
    let values: Vec<f32> = (0..2 * 1000).map(|v| (v % 97) as f32 - 40.0).collect();
    let inputs: BTreeMap<String, StreamData> = [("0.z".to_string(), StreamData::from_f32("float2".parse().unwrap(), values.clone()))].into();
    let plan = plan(&p, 64).unwrap();
    let chunks = split_into_chunks(&plan, &inputs).unwrap();
    assert_eq!(chunks.len(), 16);
    assert_eq!(chunks.last().unwrap().element_count(), Some(1000 - 15 * 64));
    let result = run_chunks(&plan, StreamOptions::new(3), chunks).unwrap();
    assert_eq!(result.outputs.iter().map(|c| c.index).collect::<Vec<_>>(), (0..16).collect::<Vec<_>>());
    assert_eq!(result.stats.work_items, 1000);
    let out: Vec<f32> = result.outputs.iter().flat_map(|c| c.streams["2.z"].buffer.as_f32().unwrap().to_vec()).collect();
    // scalar transcription of fan -> rot -> adder
    let want: Vec<f32> = values.chunks(2).map(|z| z[0] + z[1] * 65536.0).collect();
    assert_eq!(out, want);
}

#[test]
fn dft8_leaf_is_race_free() {
    let p = apps::fft::leaf_program(3).unwrap();
    let plan = plan(&p, 16).unwrap();
    let x: Vec<f32> = (0..16 * 16).map(|v| v as f32).collect();
    let chunk = Chunk::new(0, [("0.x".to_string(), StreamData::from_f32("float16".parse().unwrap(), x))].into());
    assert!(race_check(&plan, &chunk).is_clean());
}
