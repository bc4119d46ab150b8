//! Program documents: kernels, instances and arrows.
//!
//! Struct fields are declared in ascending key order and maps are
//! `BTreeMap`s, so the derived serializer already produces the canonical
//! document (sorted keys, no whitespace).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kernel;
use crate::types::{DataType, Direction, PointSpec};

pub type InstanceId = u64;

/// A kernel definition: body source plus its point signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub body: String,
    pub io: BTreeMap<String, PointSpec>,
}

impl Node {
    pub fn new(body: impl Into<String>, io: impl IntoIterator<Item = (String, PointSpec)>) -> Node {
        Node { body: body.into(), io: io.into_iter().collect() }
    }
}

/// A vertex: one placement of a kernel. Serialized as `[id, {"kernel": name}]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: InstanceId,
    pub kernel: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceBody {
    kernel: String,
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.id, InstanceBody { kernel: self.kernel.clone() }).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (id, body) = <(InstanceId, InstanceBody)>::deserialize(d)?;
        Ok(Instance { id, kernel: body.kernel })
    }
}

/// One end of an arrow: `[instance id, point name]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub instance: InstanceId,
    pub point: String,
}

impl Endpoint {
    pub fn new(instance: InstanceId, point: impl Into<String>) -> Endpoint {
        Endpoint { instance, point: point.into() }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.instance, self.point)
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.instance, &self.point).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (instance, point) = <(InstanceId, String)>::deserialize(d)?;
        Ok(Endpoint { instance, point })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrow {
    pub input: Endpoint,
    pub output: Endpoint,
}

impl Arrow {
    pub fn new(output: Endpoint, input: Endpoint) -> Arrow {
        Arrow { input, output }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Program {
    pub arrows: Vec<Arrow>,
    pub kernels: BTreeMap<String, Node>,
    pub nodes: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("invalid document: {0}")]
    Structure(String),
    #[error("instance {instance} references unknown kernel '{kernel}'")]
    UnknownKernel { instance: InstanceId, kernel: String },
    #[error("duplicate instance id {0}")]
    DuplicateInstance(InstanceId),
    #[error("unknown instance {0}")]
    UnknownInstance(InstanceId),
    #[error("instance {instance} has no point '{point}'")]
    UnknownPoint { instance: InstanceId, point: String },
}

/// Parses a program document and checks its references.
pub fn parse_program(bytes: &[u8]) -> Result<Program, ProgramError> {
    let program: Program = serde_json::from_slice(bytes).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ProgramError::Structure(e.to_string()),
        _ => ProgramError::Malformed(e.to_string()),
    })?;
    program.check_references()?;
    Ok(program)
}

/// Canonical document bytes.
pub fn serialize_program(program: &Program) -> Vec<u8> {
    serde_json::to_vec(program).expect("program serialization cannot fail")
}

/// Lowercase hex SHA-256 of the canonical document.
pub fn program_id(program: &Program) -> String {
    hex::encode(Sha256::digest(serialize_program(program)))
}

/// A point with no arrow attached; the attachment site of a stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FreePoint {
    pub instance: InstanceId,
    pub point: String,
    pub direction: Direction,
    pub data: DataType,
}

impl FreePoint {
    /// `"<instance id>.<point name>"`.
    pub fn stream_name(&self) -> String {
        format!("{}.{}", self.instance, self.point)
    }
}

impl Program {
    pub fn from_json(text: &str) -> Result<Program, ProgramError> {
        parse_program(text.as_bytes())
    }

    pub fn to_json(&self) -> String {
        String::from_utf8(serialize_program(self)).expect("serde_json emits UTF-8")
    }

    pub fn id(&self) -> String {
        program_id(self)
    }

    pub fn instance(&self, id: InstanceId) -> Option<&Instance> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn kernel_of(&self, id: InstanceId) -> Option<&Node> {
        self.instance(id).and_then(|n| self.kernels.get(&n.kernel))
    }

    pub fn point(&self, e: &Endpoint) -> Option<&PointSpec> {
        self.kernel_of(e.instance).and_then(|k| k.io.get(&e.point))
    }

    fn check_references(&self) -> Result<(), ProgramError> {
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                return Err(ProgramError::DuplicateInstance(n.id));
            }
            if !self.kernels.contains_key(&n.kernel) {
                return Err(ProgramError::UnknownKernel { instance: n.id, kernel: n.kernel.clone() });
            }
        }
        for a in &self.arrows {
            for e in [&a.output, &a.input] {
                if !seen.contains(&e.instance) {
                    return Err(ProgramError::UnknownInstance(e.instance));
                }
                if self.point(e).is_none() {
                    return Err(ProgramError::UnknownPoint { instance: e.instance, point: e.point.clone() });
                }
            }
        }
        Ok(())
    }

    /// Unconnected points sorted by (instance id, point name).
    pub fn free_points(&self) -> Vec<FreePoint> {
        let connected: BTreeSet<&Endpoint> = self.arrows.iter().flat_map(|a| [&a.output, &a.input]).collect();
        let mut out = Vec::new();
        for n in &self.nodes {
            let Some(k) = self.kernels.get(&n.kernel) else { continue };
            for (name, spec) in &k.io {
                let e = Endpoint::new(n.id, name.clone());
                if !connected.contains(&e) {
                    out.push(FreePoint { instance: n.id, point: name.clone(), direction: spec.direction, data: spec.data });
                }
            }
        }
        out.sort_by(|a, b| (a.instance, &a.point).cmp(&(b.instance, &b.point)));
        out
    }

    pub fn free_inputs(&self) -> Vec<FreePoint> {
        self.free_points().into_iter().filter(|p| p.direction == Direction::Input).collect()
    }

    pub fn free_outputs(&self) -> Vec<FreePoint> {
        self.free_points().into_iter().filter(|p| p.direction == Direction::Output).collect()
    }

    /// Instance ids such that every arrow goes forward; ties go to the
    /// smallest id.
    pub fn topological_order(&self) -> Result<Vec<InstanceId>, CycleError> {
        let mut indegree: BTreeMap<InstanceId, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        let mut succ: BTreeMap<InstanceId, Vec<InstanceId>> = BTreeMap::new();
        for a in &self.arrows {
            if let Some(d) = indegree.get_mut(&a.input.instance) {
                *d += 1;
            }
            succ.entry(a.output.instance).or_default().push(a.input.instance);
        }
        let mut ready: BinaryHeap<Reverse<InstanceId>> =
            indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| Reverse(id)).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(id)) = ready.pop() {
            order.push(id);
            for s in succ.get(&id).into_iter().flatten() {
                let d = indegree.get_mut(s).expect("arrow to known instance");
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(*s));
                }
            }
        }
        if order.len() == self.nodes.len() {
            return Ok(order);
        }
        let done: BTreeSet<InstanceId> = order.into_iter().collect();
        Err(CycleError { instances: find_cycle(&succ, &done) })
    }

    /// Every rule violation; empty means executable.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();

        for (name, node) in &self.kernels {
            for point in node.io.keys() {
                if !kernel::is_valid_identifier(point) {
                    v.push(Violation::InvalidPointName { kernel: name.clone(), point: point.clone() });
                }
            }
            let has = |d| node.io.values().any(|p| p.direction == d);
            if !has(Direction::Input) {
                v.push(Violation::NoInputPoint { kernel: name.clone() });
            }
            if !has(Direction::Output) {
                v.push(Violation::NoOutputPoint { kernel: name.clone() });
            }
            if let Err(e) = kernel::compile(&node.body, &node.io) {
                v.push(Violation::KernelError { kernel: name.clone(), message: e.to_string() });
            }
        }

        let mut used: BTreeMap<&Endpoint, usize> = BTreeMap::new();
        for (i, a) in self.arrows.iter().enumerate() {
            for e in [&a.output, &a.input] {
                if let Some(&first) = used.get(e) {
                    v.push(Violation::DuplicateEndpoint { endpoint: e.to_string(), arrows: (first, i) });
                } else {
                    used.insert(e, i);
                }
            }
            if a.output.instance == a.input.instance {
                v.push(Violation::SelfArrow { arrow: i, instance: a.output.instance });
            }
            let (Some(out), Some(inp)) = (self.point(&a.output), self.point(&a.input)) else {
                v.push(Violation::UnknownEndpoint { arrow: i });
                continue;
            };
            if out.direction != Direction::Output {
                v.push(Violation::WrongDirection { arrow: i, endpoint: a.output.to_string(), expected: Direction::Output });
            }
            if inp.direction != Direction::Input {
                v.push(Violation::WrongDirection { arrow: i, endpoint: a.input.to_string(), expected: Direction::Input });
            }
            if out.data.base != inp.data.base {
                v.push(Violation::TypeMismatch { arrow: i, output: out.data, input: inp.data });
            }
        }

        if let Err(c) = self.topological_order() {
            v.push(Violation::Cycle { instances: c.instances });
        }

        let free = self.free_points();
        if !free.iter().any(|p| p.direction == Direction::Input) {
            v.push(Violation::NoFreeInput);
        }
        if !free.iter().any(|p| p.direction == Direction::Output) {
            v.push(Violation::NoFreeOutput);
        }
        ValidationReport { violations: v }
    }
}

fn find_cycle(succ: &BTreeMap<InstanceId, Vec<InstanceId>>, done: &BTreeSet<InstanceId>) -> Vec<InstanceId> {
    // Every remaining vertex has a remaining predecessor, so walking
    // predecessors backwards must revisit a vertex.
    let mut pred: BTreeMap<InstanceId, InstanceId> = BTreeMap::new();
    for (&from, tos) in succ {
        if done.contains(&from) {
            continue;
        }
        for &to in tos {
            if !done.contains(&to) {
                pred.entry(to).or_insert(from);
            }
        }
    }
    let Some(&start) = pred.keys().next() else { return Vec::new() };
    let mut path = vec![start];
    let mut at = start;
    loop {
        at = pred[&at];
        if let Some(pos) = path.iter().position(|&p| p == at) {
            let mut cycle: Vec<InstanceId> = path[pos..].to_vec();
            cycle.reverse();
            let min = cycle.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i).unwrap_or(0);
            cycle.rotate_left(min);
            return cycle;
        }
        path.push(at);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cycle through instances {}", fmt_cycle(.instances))]
pub struct CycleError {
    pub instances: Vec<InstanceId>,
}

fn fmt_cycle(ids: &[InstanceId]) -> String {
    let mut s: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
    if let Some(first) = ids.first() {
        s.push(first.to_string());
    }
    s.join(" -> ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Cycle { instances: Vec<InstanceId> },
    TypeMismatch { arrow: usize, output: DataType, input: DataType },
    DuplicateEndpoint { endpoint: String, arrows: (usize, usize) },
    SelfArrow { arrow: usize, instance: InstanceId },
    WrongDirection { arrow: usize, endpoint: String, expected: Direction },
    UnknownEndpoint { arrow: usize },
    InvalidPointName { kernel: String, point: String },
    NoInputPoint { kernel: String },
    NoOutputPoint { kernel: String },
    KernelError { kernel: String, message: String },
    NoFreeInput,
    NoFreeOutput,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { instances } => write!(f, "cycle through instances {}", fmt_cycle(instances)),
            Violation::TypeMismatch { arrow, output, input } => {
                write!(f, "arrow {arrow}: base scalar type mismatch ({output} -> {input})")
            }
            Violation::DuplicateEndpoint { endpoint, arrows } => {
                write!(f, "point {endpoint} is used by arrows {} and {}", arrows.0, arrows.1)
            }
            Violation::SelfArrow { arrow, instance } => write!(f, "arrow {arrow} connects instance {instance} to itself"),
            Violation::WrongDirection { arrow, endpoint, expected } => {
                write!(f, "arrow {arrow}: {endpoint} is not an {expected}")
            }
            Violation::UnknownEndpoint { arrow } => write!(f, "arrow {arrow} references an unknown point"),
            Violation::InvalidPointName { kernel, point } => {
                write!(f, "kernel '{kernel}': '{point}' is not a valid point name")
            }
            Violation::NoInputPoint { kernel } => write!(f, "kernel '{kernel}' has no InputPoint"),
            Violation::NoOutputPoint { kernel } => write!(f, "kernel '{kernel}' has no OutputPoint"),
            Violation::KernelError { kernel, message } => write!(f, "kernel '{kernel}': {message}"),
            Violation::NoFreeInput => f.write_str("program has no free input point"),
            Violation::NoFreeOutput => f.write_str("program has no free output point"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fan_rot_adder() -> Program {
        Program::from_json(fixtures::FAN_ROT_ADDER).unwrap()
    }

    fn io(points: &[(&str, &str, Direction)]) -> BTreeMap<String, PointSpec> {
        points
            .iter()
            .map(|(n, t, d)| (n.to_string(), PointSpec { data: t.parse().unwrap(), direction: *d }))
            .collect()
    }

    #[test]
    fn fan_rot_adder_structure() {
        let p = fan_rot_adder();
        assert_eq!(p.kernels.keys().collect::<Vec<_>>(), ["adder", "fan", "rot"]);
        assert_eq!(p.nodes.len(), 3);
        assert_eq!(p.arrows.len(), 3);
        assert!(p.validate().is_ok(), "{}", p.validate());
        assert_eq!(p.topological_order().unwrap(), [0, 1, 2]);
        let names: Vec<_> = p.free_points().iter().map(|f| (f.stream_name(), f.direction)).collect();
        assert_eq!(names, [("0.z".to_string(), Direction::Input), ("2.z".to_string(), Direction::Output)]);
    }

    #[test]
    fn canonical_bytes_and_id() {
        let p = fan_rot_adder();
        let bytes = serialize_program(&p);
        let again = parse_program(&bytes).unwrap();
        assert_eq!(again, p);
        assert_eq!(serialize_program(&again), bytes);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with(r#"{"arrows":[{"input":[2,"x"],"output":[0,"x"]}"#), "{text}");
        // a generic JSON value re-serializes with sorted keys and no whitespace
        let generic: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&generic).unwrap(), text);
        let id = p.id();
        assert_eq!(id.len(), 64);
        assert!(id.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        let mut q = p.clone();
        q.kernels.get_mut("adder").unwrap().body.push(' ');
        assert_ne!(q.id(), id);
    }

    #[test]
    fn parse_errors() {
        let mutated = fixtures::FAN_ROT_ADDER.replace(r#""input":[2,"x"]"#, r#""input":[9,"x"]"#);
        assert_eq!(Program::from_json(&mutated).unwrap_err().to_string(), "unknown instance 9");
        assert!(matches!(Program::from_json("{"), Err(ProgramError::Malformed(_))));
        assert!(matches!(
            Program::from_json(r#"{"kernels":{},"nodes":[]}"#),
            Err(ProgramError::Structure(m)) if m.contains("missing field `arrows`")
        ));
        assert!(matches!(
            Program::from_json(r#"{"kernels":{},"nodes":[],"arrows":[],"extra":1}"#),
            Err(ProgramError::Structure(m)) if m.contains("unknown field `extra`")
        ));
        assert!(matches!(
            Program::from_json(r#"{"kernels":{},"nodes":[[0,{"kernel":"k"}]],"arrows":[]}"#),
            Err(ProgramError::UnknownKernel { instance: 0, .. })
        ));
        let dup = r#"{"kernels":{"k":{"body":"","io":{}}},"nodes":[[1,{"kernel":"k"}],[1,{"kernel":"k"}]],"arrows":[]}"#;
        assert_eq!(Program::from_json(dup), Err(ProgramError::DuplicateInstance(1)));
        let bad_type = r#"{"kernels":{"k":{"body":"","io":{"x":{"data":"double","type":"InputPoint"}}}},"nodes":[],"arrows":[]}"#;
        assert!(matches!(Program::from_json(bad_type), Err(ProgramError::Structure(m)) if m.contains("double")));
    }

    #[test]
    fn empty_graph_parses_but_does_not_validate() {
        let p = Program::from_json(
            r#"{"kernels":{"id":{"body":"int i=get_global_id(0);y[i]=x[i];","io":{"x":{"data":"float","type":"InputPoint"},"y":{"data":"float","type":"OutputPoint"}}}},"nodes":[],"arrows":[]}"#,
        )
        .unwrap();
        assert!(p.free_points().is_empty());
        let r = p.validate();
        assert_eq!(r.violations, [Violation::NoFreeInput, Violation::NoFreeOutput]);
    }

    fn pass_kernel() -> Node {
        Node { body: "int i=get_global_id(0);y[i]=x[i];".into(), io: io(&[("x", "float", Direction::Input), ("y", "float", Direction::Output)]) }
    }

    #[test]
    fn two_node_cycle() {
        let p = Program {
            kernels: [("k".to_string(), pass_kernel())].into(),
            nodes: vec![Instance { id: 0, kernel: "k".into() }, Instance { id: 1, kernel: "k".into() }],
            arrows: vec![
                Arrow::new(Endpoint::new(0, "y"), Endpoint::new(1, "x")),
                Arrow::new(Endpoint::new(1, "y"), Endpoint::new(0, "x")),
            ],
        };
        assert_eq!(p.topological_order().unwrap_err().instances, [0, 1]);
        let r = p.validate();
        assert!(r.violations.contains(&Violation::Cycle { instances: vec![0, 1] }), "{r}");
        assert!(r.to_string().contains("cycle through instances 0 -> 1 -> 0"));
    }

    #[test]
    fn base_type_mismatch() {
        let f = Node { body: "int i=get_global_id(0);y[i]=x[i];".into(), io: io(&[("x", "float", Direction::Input), ("y", "float", Direction::Output)]) };
        let g = Node { body: "int i=get_global_id(0);y[i]=x[i];".into(), io: io(&[("x", "int", Direction::Input), ("y", "int", Direction::Output)]) };
        let p = Program {
            kernels: [("f".to_string(), f), ("g".to_string(), g)].into(),
            nodes: vec![Instance { id: 0, kernel: "f".into() }, Instance { id: 1, kernel: "g".into() }],
            arrows: vec![Arrow::new(Endpoint::new(0, "y"), Endpoint::new(1, "x"))],
        };
        let r = p.validate();
        assert_eq!(r.violations.len(), 1, "{r}");
        assert!(r.to_string().contains("base scalar type mismatch"));
    }

    #[test]
    fn endpoint_rules() {
        let p = Program {
            kernels: [("k".to_string(), pass_kernel())].into(),
            nodes: (0..3).map(|id| Instance { id, kernel: "k".into() }).collect(),
            arrows: vec![
                Arrow::new(Endpoint::new(0, "y"), Endpoint::new(1, "x")),
                Arrow::new(Endpoint::new(0, "y"), Endpoint::new(2, "x")),
                Arrow::new(Endpoint::new(1, "x"), Endpoint::new(2, "y")),
                Arrow::new(Endpoint::new(2, "y"), Endpoint::new(2, "x")),
            ],
        };
        let r = p.validate();
        let kinds: Vec<String> = r.violations.iter().map(|v| serde_json::to_value(v).unwrap()["kind"].as_str().unwrap().to_string()).collect();
        assert!(kinds.contains(&"duplicate_endpoint".to_string()), "{r}");
        assert!(kinds.contains(&"wrong_direction".to_string()), "{r}");
        assert!(kinds.contains(&"self_arrow".to_string()), "{r}");
    }

    #[test]
    fn node_without_points_and_bad_body() {
        let mut lonely = pass_kernel();
        lonely.io.remove("x");
        lonely.body = "y[get_global_id(0)] = q;".into();
        let p = Program {
            kernels: [("k".to_string(), lonely)].into(),
            nodes: vec![Instance { id: 0, kernel: "k".into() }],
            arrows: vec![],
        };
        let r = p.validate();
        assert!(r.violations.contains(&Violation::NoInputPoint { kernel: "k".into() }), "{r}");
        assert!(r.violations.iter().any(|v| matches!(v, Violation::KernelError { .. })), "{r}");
        assert!(r.violations.contains(&Violation::NoFreeInput));
    }

    #[test]
    fn tie_break_by_id() {
        let p = Program {
            kernels: [("k".to_string(), pass_kernel())].into(),
            nodes: vec![Instance { id: 7, kernel: "k".into() }, Instance { id: 3, kernel: "k".into() }],
            arrows: vec![],
        };
        assert_eq!(p.topological_order().unwrap(), [3, 7]);
        let single = Program { nodes: vec![Instance { id: 5, kernel: "k".into() }], ..p };
        assert_eq!(single.topological_order().unwrap(), [5]);
    }

    #[test]
    fn chain_exposes_head_and_tail_only() {
        let p = Program {
            kernels: [("k".to_string(), pass_kernel())].into(),
            nodes: (0..3).map(|id| Instance { id, kernel: "k".into() }).collect(),
            arrows: vec![
                Arrow::new(Endpoint::new(1, "y"), Endpoint::new(2, "x")),
                Arrow::new(Endpoint::new(0, "y"), Endpoint::new(1, "x")),
            ],
        };
        let names: Vec<_> = p.free_points().iter().map(FreePoint::stream_name).collect();
        assert_eq!(names, ["0.x", "2.y"]);
    }

    #[test]
    fn kernel_map_order_does_not_matter() {
        let a = fan_rot_adder();
        let mut kernels: Vec<_> = a.kernels.clone().into_iter().collect();
        kernels.reverse();
        let b = Program { kernels: kernels.into_iter().collect(), ..a.clone() };
        assert_eq!(serialize_program(&a), serialize_program(&b));
        // whitespace and key order in the source document are irrelevant
        let pretty = serde_json::to_string_pretty(&serde_json::from_str::<serde_json::Value>(fixtures::FAN_ROT_ADDER).unwrap()).unwrap();
        assert_eq!(Program::from_json(&pretty).unwrap().id(), a.id());
    }
}
