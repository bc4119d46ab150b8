//! Chunked execution of validated programs.
//!
//! Input streams are cut into chunks of `W` work-items. Each chunk runs every
//! instance in topological order; intermediate buffers are handed to
//! consumers by reference and reinterpreted as flat scalars when the widths
//! of the two ends of an arrow differ.

mod plan;
mod race;
mod stream;

use std::collections::BTreeMap;
use std::ops::Range;
use std::thread;

use thiserror::Error;

pub use plan::{plan, ExecutionPlan, PlanError, Ratio, Step, DEFAULT_CHUNK_SIZE};
pub use race::{race_check, Race, RaceReport};
pub use stream::{join_chunks, run_chunks, run_stream, split_into_chunks, ChunkTiming, RunResult, RunStats, StreamOptions};

use crate::kernel::{Evaluator, OutputView, RuntimeError, TypedKernel};
use crate::program::InstanceId;
use crate::types::{Buffer, StreamData};

use plan::Source;

/// One block of work-items: a buffer per free stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub index: u64,
    pub streams: BTreeMap<String, StreamData>,
}

impl Chunk {
    pub fn new(index: u64, streams: BTreeMap<String, StreamData>) -> Chunk {
        Chunk { index, streams }
    }

    /// Element count shared by all streams, or `None` if they disagree or
    /// there are none.
    pub fn element_count(&self) -> Option<usize> {
        let mut counts = self.streams.values().map(StreamData::count);
        let first = counts.next()?;
        counts.all(|c| c == first).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{0}")]
    Input(String),
    #[error("chunk {chunk}: {error}")]
    Chunk { chunk: u64, error: PlanError },
    #[error("chunk {chunk}, instance {instance}, work-item {work_item}: {error}")]
    Kernel { chunk: u64, instance: InstanceId, work_item: usize, error: RuntimeError },
    #[error("{message}")]
    Transport { message: String, retriable: bool },
}

impl ExecError {
    pub fn input(msg: impl Into<String>) -> ExecError {
        ExecError::Input(msg.into())
    }
}

/// Checks that `chunk` carries exactly the plan's free inputs with their
/// types and a common element count, which is returned.
pub fn check_chunk(plan: &ExecutionPlan, chunk: &Chunk) -> Result<usize, ExecError> {
    let mut count = None;
    for p in plan.input_streams() {
        let name = p.stream_name();
        let s = chunk
            .streams
            .get(&name)
            .ok_or_else(|| ExecError::input(format!("chunk {}: missing input stream '{name}'", chunk.index)))?;
        if s.data != p.data {
            return Err(ExecError::input(format!(
                "chunk {}: stream '{name}' has type {}, expected {}",
                chunk.index, s.data, p.data
            )));
        }
        if s.buffer.scalar_type() != p.data.base || s.buffer.len() % p.data.width as usize != 0 {
            return Err(ExecError::input(format!("chunk {}: stream '{name}' buffer does not match {}", chunk.index, p.data)));
        }
        match count {
            None => count = Some(s.count()),
            Some(c) if c != s.count() => {
                return Err(ExecError::input(format!(
                    "chunk {}: stream '{name}' carries {} elements, other inputs {c}",
                    chunk.index,
                    s.count()
                )))
            }
            _ => {}
        }
    }
    if let Some(extra) = chunk.streams.keys().find(|k| !plan.input_streams().iter().any(|p| &p.stream_name() == *k)) {
        return Err(ExecError::input(format!("chunk {}: '{extra}' is not a free input of the program", chunk.index)));
    }
    Ok(count.unwrap_or(0))
}

/// Runs every instance over one chunk. Kernels whose stores all target their
/// own work-item are spread over up to `parallelism` threads; the result is
/// identical to sequential evaluation.
pub fn run_chunk(plan: &ExecutionPlan, chunk: &Chunk, parallelism: usize) -> Result<Chunk, ExecError> {
    let n = check_chunk(plan, chunk)?;
    let counts = plan.work_items(n).map_err(|error| ExecError::Chunk { chunk: chunk.index, error })?;
    let streams: Vec<&Buffer> = plan.input_streams().iter().map(|p| &chunk.streams[&p.stream_name()].buffer).collect();

    let mut produced: Vec<Vec<Option<Buffer>>> = Vec::with_capacity(plan.steps().len());
    for (step, &count) in plan.steps().iter().zip(&counts) {
        let outs = {
            let ins: Vec<&Buffer> = step
                .sources
                .iter()
                .map(|s| match *s {
                    Source::Stream(i) => streams[i],
                    Source::Step { step, slot } => produced[step][slot].as_ref().expect("consumed before release"),
                })
                .collect();
            run_kernel(&step.kernel, &ins, count, parallelism).map_err(|(work_item, error)| ExecError::Kernel {
                chunk: chunk.index,
                instance: step.instance,
                work_item,
                error,
            })?
        };
        produced.push(outs.into_iter().map(Some).collect());
    }

    let mut out = BTreeMap::new();
    for (p, step, slot) in plan.output_sources() {
        let buffer = produced[*step][*slot].take().expect("free output produced once");
        out.insert(p.stream_name(), StreamData::new(p.data, buffer));
    }
    Ok(Chunk { index: chunk.index, streams: out })
}

/// Evaluates `count` work-items, returning fresh output buffers in slot order.
pub(crate) fn run_kernel(
    kernel: &TypedKernel,
    inputs: &[&Buffer],
    count: usize,
    parallelism: usize,
) -> Result<Vec<Buffer>, (usize, RuntimeError)> {
    let mut outs: Vec<Buffer> =
        kernel.outputs.iter().map(|(_, ty)| Buffer::zeros(ty.base, count * ty.width as usize)).collect();
    let views: Vec<OutputView<'_>> =
        outs.iter_mut().zip(&kernel.outputs).map(|(b, (_, ty))| OutputView::whole(b, ty.width as usize)).collect();
    let threads = parallelism.min(count);
    if threads <= 1 || !kernel.pointwise_writes {
        let mut views = views;
        Evaluator::new(kernel).run_range(0..count, count, inputs, &mut views)?;
    } else {
        let ranges = split_range(count, threads);
        let sizes: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
        let mut parts: Vec<Vec<OutputView<'_>>> = (0..threads).map(|_| Vec::with_capacity(views.len())).collect();
        for v in views {
            for (t, piece) in v.split(&sizes).into_iter().enumerate() {
                parts[t].push(piece);
            }
        }
        let results: Vec<Result<(), (usize, RuntimeError)>> = thread::scope(|s| {
            let handles: Vec<_> = ranges
                .into_iter()
                .zip(parts)
                .map(|(range, mut views)| {
                    s.spawn(move || Evaluator::new(kernel).run_range(range, count, inputs, &mut views))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        // ranges are ascending, so the first failure is the lowest work-item
        if let Some(err) = results.into_iter().find_map(Result::err) {
            return Err(err);
        }
    }
    Ok(outs)
}

fn split_range(n: usize, parts: usize) -> Vec<Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}
