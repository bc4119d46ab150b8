use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::{check_chunk, run_chunk, Chunk, ExecError, ExecutionPlan};
use crate::clock::Instant;
use crate::types::{Buffer, StreamData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamOptions {
    /// Worker threads; 1 never spawns.
    pub parallelism: usize,
    /// Chunks read ahead and executed concurrently.
    pub max_in_flight: usize,
}

impl StreamOptions {
    pub fn new(parallelism: usize) -> StreamOptions {
        let parallelism = parallelism.max(1);
        StreamOptions { parallelism, max_in_flight: 2 * parallelism }
    }
}

impl Default for StreamOptions {
    fn default() -> Self {
        StreamOptions::new(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkTiming {
    pub index: u64,
    pub work_items: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub chunks: Vec<ChunkTiming>,
    /// Work-items at the free inputs, summed over chunks.
    pub work_items: u64,
    pub wall: Duration,
}

/// Output chunks in input order plus timing.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outputs: Vec<Chunk>,
    pub stats: RunStats,
}

/// Pulls chunks from `input`, executes up to `max_in_flight` of them at a
/// time and hands results to `output` strictly in chunk order. Chunk indices
/// must count up from 0 and only the last chunk may be shorter than the
/// plan's chunk size.
pub fn run_stream<I, F>(plan: &ExecutionPlan, options: StreamOptions, input: I, mut output: F) -> Result<RunStats, ExecError>
where
    I: IntoIterator<Item = Result<Chunk, ExecError>>,
    F: FnMut(Chunk) -> Result<(), ExecError>,
{
    let start = Instant::now();
    let mut stats = RunStats::default();
    let mut input = input.into_iter();
    let mut expected = 0u64;
    let mut short_seen = false;
    let batch_size = options.max_in_flight.max(1);
    loop {
        let mut batch = Vec::with_capacity(batch_size);
        while batch.len() < batch_size {
            let Some(chunk) = input.next() else { break };
            let chunk = chunk?;
            if chunk.index != expected {
                return Err(ExecError::input(format!("expected chunk {expected}, got chunk {}", chunk.index)));
            }
            let n = check_chunk(plan, &chunk)?;
            if n > plan.chunk_size() {
                return Err(ExecError::input(format!(
                    "chunk {} carries {n} work-items, more than the chunk size {}",
                    chunk.index,
                    plan.chunk_size()
                )));
            }
            if short_seen {
                return Err(ExecError::input(format!("chunk {} follows a short chunk; only the final chunk may be short", chunk.index)));
            }
            short_seen = n < plan.chunk_size();
            expected += 1;
            stats.work_items += n as u64;
            batch.push((chunk, n));
        }
        if batch.is_empty() {
            break;
        }
        for (result, timing) in run_batch(plan, options.parallelism, batch) {
            stats.chunks.push(timing);
            output(result?)?;
        }
    }
    stats.wall = start.elapsed();
    Ok(stats)
}

type Done = (Result<Chunk, ExecError>, ChunkTiming);

fn run_one(plan: &ExecutionPlan, chunk: &Chunk, n: usize, parallelism: usize) -> Done {
    let t = Instant::now();
    let r = run_chunk(plan, chunk, parallelism);
    (r, ChunkTiming { index: chunk.index, work_items: n, elapsed: t.elapsed() })
}

/// Runs a batch and returns results in batch order. A single chunk gets all
/// workers; several chunks share the workers one chunk each.
fn run_batch(plan: &ExecutionPlan, parallelism: usize, batch: Vec<(Chunk, usize)>) -> Vec<Done> {
    let workers = parallelism.min(batch.len());
    if workers <= 1 {
        let inner = if batch.len() == 1 { parallelism } else { 1 };
        return batch.iter().map(|(c, n)| run_one(plan, c, *n, inner)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Done>>> = batch.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((chunk, n)) = batch.get(i) else { break };
                let done = run_one(plan, chunk, *n, 1);
                *slots[i].lock().expect("slot lock") = Some(done);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every chunk ran")).collect()
}

/// Convenience wrapper collecting every output chunk.
pub fn run_chunks(plan: &ExecutionPlan, options: StreamOptions, chunks: Vec<Chunk>) -> Result<RunResult, ExecError> {
    let mut outputs = Vec::with_capacity(chunks.len());
    let stats = run_stream(plan, options, chunks.into_iter().map(Ok), |c| {
        outputs.push(c);
        Ok(())
    })?;
    Ok(RunResult { outputs, stats })
}

/// Cuts whole input streams into chunks of the plan's size. The streams must
/// be exactly the plan's free inputs and carry equal element counts.
pub fn split_into_chunks(plan: &ExecutionPlan, inputs: &BTreeMap<String, StreamData>) -> Result<Vec<Chunk>, ExecError> {
    let whole = Chunk::new(0, inputs.clone());
    let total = check_chunk(plan, &whole)?;
    let w = plan.chunk_size();
    Ok((0..total.div_ceil(w))
        .map(|i| {
            let (a, b) = (i * w, ((i + 1) * w).min(total));
            Chunk::new(i as u64, inputs.iter().map(|(k, v)| (k.clone(), v.slice(a, b))).collect())
        })
        .collect())
}

/// Concatenates output chunks per stream. With no chunks every output
/// stream is empty.
pub fn join_chunks(plan: &ExecutionPlan, chunks: &[Chunk]) -> BTreeMap<String, StreamData> {
    plan.output_streams()
        .map(|p| {
            let name = p.stream_name();
            let mut buf = Buffer::zeros(p.data.base, 0);
            for c in chunks {
                buf.extend_from(&c.streams[&name].buffer);
            }
            (name, StreamData::new(p.data, buf))
        })
        .collect()
}
