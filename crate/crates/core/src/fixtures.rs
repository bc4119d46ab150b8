//! Bundled programs and seeded generators used by tests, the CLI and the
//! browser demo.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel::{compile, Stage};
use crate::program::{Arrow, Endpoint, Instance, Node, Program};
use crate::types::{Buffer, DataType, PointSpec, ScalarType, StreamData};

/// The three-instance fan/rot/adder program, with `rot` written as a float
/// multiply so that it type-checks.
pub const FAN_ROT_ADDER: &str = include_str!("../fixtures/fan_rot_adder.json");

/// The same program with `rot` shifting a float, which is ill-typed.
pub const FAN_ROT_ADDER_FLOAT_SHIFT: &str = include_str!("../fixtures/fan_rot_adder_float_shift.json");

/// Kernel sources with their io signatures and expected verdicts.
pub const KERNEL_CORPUS: &str = include_str!("../fixtures/kernels.txt");

/// A generated program whose kernels are all pointwise, plus inputs for it.
#[derive(Debug, Clone)]
pub struct RandomProgram {
    pub program: Program,
    pub inputs: BTreeMap<String, StreamData>,
}

/// Builds a random DAG of 2 to 5 pointwise instances over one element type
/// and random input streams of `len` elements. Integer programs avoid
/// division so that no input can fault.
pub fn random_pointwise_program(seed: u64, len: usize) -> RandomProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = if rng.random_bool(0.5) { ScalarType::Float } else { ScalarType::Int };
    let width = [1u8, 2, 4][rng.random_range(0..3)];
    let ty = DataType::vector(base, width).expect("valid width");
    let instances = rng.random_range(2..=5u64);

    let mut kernels = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut arrows = Vec::new();
    // outputs of earlier instances not yet consumed
    let mut open: Vec<Endpoint> = Vec::new();
    for id in 0..instances {
        let n_in = rng.random_range(1..=2);
        let n_out = rng.random_range(1..=2);
        let ins: Vec<String> = ["a", "b"][..n_in].iter().map(|s| s.to_string()).collect();
        let outs: Vec<String> = ["y", "z"][..n_out].iter().map(|s| s.to_string()).collect();
        let mut body = String::from("int i = get_global_id(0);\n");
        for o in &outs {
            let e = random_expr(&mut rng, &ins, base, 3);
            body.push_str(&format!("{o}[i] = {e};\n"));
        }
        let io = ins
            .iter()
            .map(|n| (n.clone(), PointSpec::input(ty)))
            .chain(outs.iter().map(|n| (n.clone(), PointSpec::output(ty))));
        let name = format!("k{id}");
        kernels.insert(name.clone(), Node::new(body, io));
        nodes.push(Instance { id, kernel: name });
        for p in &ins {
            if id > 0 && !open.is_empty() && rng.random_bool(0.7) {
                let from = open.swap_remove(rng.random_range(0..open.len()));
                arrows.push(Arrow::new(from, Endpoint::new(id, p.clone())));
            }
        }
        open.extend(outs.iter().map(|o| Endpoint::new(id, o.clone())));
    }
    let program = Program { arrows, kernels, nodes };
    let inputs = program
        .free_inputs()
        .into_iter()
        .map(|p| {
            let n = len * width as usize;
            let buffer = match base {
                ScalarType::Float => Buffer::Float((0..n).map(|_| rng.random_range(-8.0f32..8.0)).collect()),
                _ => Buffer::Int((0..n).map(|_| rng.random::<i32>()).collect()),
            };
            (p.stream_name(), StreamData::new(ty, buffer))
        })
        .collect();
    RandomProgram { program, inputs }
}

fn random_expr(rng: &mut ChaCha8Rng, ins: &[String], base: ScalarType, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.3) {
        return match rng.random_range(0..3) {
            0 if base == ScalarType::Float => format!("{:.3}f", rng.random_range(-4.0f32..4.0)),
            0 => rng.random_range(-9..10).to_string(),
            _ => format!("{}[i]", ins[rng.random_range(0..ins.len())]),
        };
    }
    let a = random_expr(rng, ins, base, depth - 1);
    let b = random_expr(rng, ins, base, depth - 1);
    if base == ScalarType::Float {
        match rng.random_range(0..6) {
            0 => format!("({a} + {b})"),
            1 => format!("({a} - {b})"),
            2 => format!("({a} * {b})"),
            3 => format!("sin({a})"),
            4 => format!("fabs({a})"),
            _ => format!("(({a}) * 0.5f)"),
        }
    } else {
        match rng.random_range(0..6) {
            0 => format!("({a} + {b})"),
            1 => format!("({a} - {b})"),
            2 => format!("({a} * {b})"),
            3 => format!("({a} ^ {b})"),
            4 => format!("({a} & {b})"),
            _ => format!("({a} >> 3)"),
        }
    }
}

/// Verdict expected for one corpus kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expect {
    Ok,
    Error { stage: Stage, fragment: String },
}

#[derive(Debug, Clone)]
pub struct CorpusKernel {
    pub name: String,
    pub io: BTreeMap<String, PointSpec>,
    pub expect: Expect,
    pub body: String,
}

impl CorpusKernel {
    /// Compiles the body and compares the outcome with the expectation;
    /// `Err` describes the disagreement.
    pub fn check(&self) -> Result<(), String> {
        match (compile(&self.body, &self.io), &self.expect) {
            (Ok(_), Expect::Ok) => Ok(()),
            (Ok(_), Expect::Error { fragment, .. }) => Err(format!("accepted, expected an error containing '{fragment}'")),
            (Err(e), Expect::Ok) => Err(format!("rejected: {e}")),
            (Err(e), Expect::Error { stage, fragment }) => {
                if e.stage == *stage && e.message.contains(fragment.as_str()) {
                    Ok(())
                } else {
                    Err(format!("got '{e}', expected {stage} containing '{fragment}'"))
                }
            }
        }
    }
}

/// Parses the corpus format of `fixtures/kernels.txt`.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusKernel>, String> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((n, line)) = lines.next() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let name = line.strip_prefix("=== ").ok_or_else(|| format!("line {}: expected '=== name'", n + 1))?.trim().to_string();
        let mut io = BTreeMap::new();
        let mut expect = None;
        loop {
            let (n, line) = lines.next().ok_or_else(|| format!("kernel '{name}': missing '---'"))?;
            let line = line.trim();
            if line == "---" {
                break;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["in" | "out", point, ty] => {
                    let ty: DataType = ty.parse().map_err(|e| format!("line {}: {e}", n + 1))?;
                    let spec = if words[0] == "in" { PointSpec::input(ty) } else { PointSpec::output(ty) };
                    io.insert(point.to_string(), spec);
                }
                ["expect", "ok"] => expect = Some(Expect::Ok),
                ["expect", stage, "error:", ..] => {
                    let stage = match *stage {
                        "lex" => Stage::Lex,
                        "syntax" => Stage::Syntax,
                        "type" => Stage::Type,
                        other => return Err(format!("line {}: unknown stage '{other}'", n + 1)),
                    };
                    let fragment = line.split_once("error:").expect("matched above").1.trim().to_string();
                    expect = Some(Expect::Error { stage, fragment });
                }
                _ => return Err(format!("line {}: cannot parse '{line}'", n + 1)),
            }
        }
        let mut body = String::new();
        while let Some((_, line)) = lines.peek() {
            if line.starts_with("=== ") {
                break;
            }
            body.push_str(line);
            body.push('\n');
            lines.next();
        }
        let expect = expect.ok_or_else(|| format!("kernel '{name}': missing 'expect' line"))?;
        out.push(CorpusKernel { name, io, expect, body: body.trim_end().to_string() + "\n" });
    }
    Ok(out)
}
