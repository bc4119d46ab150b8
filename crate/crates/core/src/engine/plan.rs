use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::kernel::{self, TypedKernel};
use crate::program::{Endpoint, FreePoint, InstanceId, Program, ValidationReport};
use crate::types::Direction;

pub const DEFAULT_CHUNK_SIZE: usize = 4096;

/// Positive rational `num/den` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Ratio {
        let g = gcd(num, den).max(1);
        Ratio { num: num / g, den: den / g }
    }

    fn scale(self, num: u64, den: u64) -> Ratio {
        Ratio::new(self.num * num, self.den * den)
    }

    /// `n * self` if integral.
    pub fn apply(self, n: usize) -> Option<usize> {
        let scaled = n as u128 * self.num as u128;
        (scaled % self.den as u128 == 0).then(|| (scaled / self.den as u128) as usize)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("program is not executable:\n{0}")]
    Invalid(ValidationReport),
    #[error("chunk size must be at least 1")]
    ZeroChunk,
    #[error("work-item count mismatch at instance {instance}")]
    Mismatch { instance: InstanceId },
    #[error("non-integral width conversion at instance {instance}: {work_items} x {multiplier} work-items")]
    NonIntegral { instance: InstanceId, work_items: usize, multiplier: Ratio },
}

/// Where an input slot of a step reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Source {
    Stream(usize),
    Step { step: usize, slot: usize },
}

#[derive(Debug, Clone)]
pub struct Step {
    pub instance: InstanceId,
    pub kernel_name: String,
    pub kernel: Arc<TypedKernel>,
    /// Work-items of this instance per work-item at the free inputs.
    pub multiplier: Ratio,
    pub(crate) sources: Vec<Source>,
}

/// A validated program compiled for chunked execution.
#[derive(Debug, Clone)]
pub struct ExecutionPlan {
    program: Program,
    steps: Vec<Step>,
    inputs: Vec<FreePoint>,
    /// Free outputs with the (step, output slot) that produces them.
    outputs: Vec<(FreePoint, usize, usize)>,
    chunk_size: usize,
}

impl ExecutionPlan {
    pub fn new(program: &Program, chunk_size: usize) -> Result<ExecutionPlan, PlanError> {
        plan(program, chunk_size)
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn order(&self) -> Vec<InstanceId> {
        self.steps.iter().map(|s| s.instance).collect()
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    pub fn input_streams(&self) -> &[FreePoint] {
        &self.inputs
    }

    pub fn output_streams(&self) -> impl Iterator<Item = &FreePoint> {
        self.outputs.iter().map(|(p, _, _)| p)
    }

    pub(crate) fn output_sources(&self) -> &[(FreePoint, usize, usize)] {
        &self.outputs
    }

    /// Sets the per-work-item step budget of every kernel.
    pub fn with_step_budget(mut self, budget: u64) -> ExecutionPlan {
        for s in &mut self.steps {
            s.kernel = Arc::new((*s.kernel).clone().with_step_budget(budget));
        }
        self
    }

    /// Work-items of every step, in step order, for a chunk carrying `n`
    /// work-items at the free inputs.
    pub fn work_items(&self, n: usize) -> Result<Vec<usize>, PlanError> {
        self.steps
            .iter()
            .map(|s| {
                s.multiplier.apply(n).ok_or(PlanError::NonIntegral {
                    instance: s.instance,
                    work_items: n,
                    multiplier: s.multiplier,
                })
            })
            .collect()
    }

    /// Work-items per instance id at the plan's chunk size.
    pub fn work_items_by_instance(&self) -> BTreeMap<InstanceId, usize> {
        let counts = self.work_items(self.chunk_size).expect("checked when planning");
        self.steps.iter().map(|s| s.instance).zip(counts).collect()
    }
}

/// Compiles every instance and derives work-item multipliers from the
/// arrows' width conversions. A producer of `n` work-items on a width-`a`
/// output feeds `n * a / b` work-items through a width-`b` input.
pub fn plan(program: &Program, chunk_size: usize) -> Result<ExecutionPlan, PlanError> {
    if chunk_size == 0 {
        return Err(PlanError::ZeroChunk);
    }
    let report = program.validate();
    if !report.is_ok() {
        return Err(PlanError::Invalid(report));
    }
    let order = program.topological_order().expect("validated program is acyclic");
    let free = program.free_points();
    let inputs: Vec<FreePoint> = free.iter().filter(|p| p.direction == Direction::Input).cloned().collect();

    let mut compiled: BTreeMap<&str, Arc<TypedKernel>> = BTreeMap::new();
    for (name, node) in &program.kernels {
        let k = kernel::compile(&node.body, &node.io).expect("validated kernel compiles");
        compiled.insert(name, Arc::new(k));
    }

    let feeding: BTreeMap<&Endpoint, &Endpoint> = program.arrows.iter().map(|a| (&a.input, &a.output)).collect();
    let position: BTreeMap<InstanceId, usize> = order.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut steps: Vec<Step> = Vec::with_capacity(order.len());
    for &id in &order {
        let inst = program.instance(id).expect("ordered ids exist");
        let k = compiled[inst.kernel.as_str()].clone();
        let mut multiplier: Option<Ratio> = None;
        let mut sources = Vec::with_capacity(k.inputs.len());
        for (point, ty) in &k.inputs {
            let here = Endpoint::new(id, point.clone());
            let (source, m) = match feeding.get(&here) {
                Some(from) => {
                    let step = position[&from.instance];
                    let producer: &Step = &steps[step];
                    let slot = producer.kernel.output_index(&from.point).expect("arrow endpoint exists");
                    let a = producer.kernel.outputs[slot].1.width as u64;
                    (Source::Step { step, slot }, producer.multiplier.scale(a, ty.width as u64))
                }
                None => {
                    let idx = inputs.iter().position(|p| p.instance == id && &p.point == point).expect("free input listed");
                    (Source::Stream(idx), Ratio::ONE)
                }
            };
            match multiplier {
                None => multiplier = Some(m),
                Some(prev) if prev != m => return Err(PlanError::Mismatch { instance: id }),
                _ => {}
            }
            sources.push(source);
        }
        steps.push(Step {
            instance: id,
            kernel_name: inst.kernel.clone(),
            kernel: k,
            multiplier: multiplier.expect("validated node has an input point"),
            sources,
        });
    }

    let outputs = free
        .into_iter()
        .filter(|p| p.direction == Direction::Output)
        .map(|p| {
            let step = position[&p.instance];
            let slot = steps[step].kernel.output_index(&p.point).expect("free output exists");
            (p, step, slot)
        })
        .collect();

    let plan = ExecutionPlan { program: program.clone(), steps, inputs, outputs, chunk_size };
    plan.work_items(chunk_size)?;
    Ok(plan)
}
