//! Whole-stream execution behind one interface, so applications can run on
//! the in-process engine or on a remote server alike.

use std::collections::BTreeMap;

use crate::engine::{self, ExecError, StreamOptions, DEFAULT_CHUNK_SIZE};
use crate::kernel::typecheck::DEFAULT_STEP_BUDGET;
use crate::program::Program;
use crate::types::StreamData;

pub type Streams = BTreeMap<String, StreamData>;

pub trait Executor: Send + Sync {
    /// Runs `program` over complete input streams keyed by stream name and
    /// returns every free output stream. `chunk_size` overrides the
    /// executor's default.
    fn execute(&self, program: &Program, inputs: Streams, chunk_size: Option<usize>) -> Result<Streams, ExecError>;
}

/// Runs programs on the in-process engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalExecutor {
    pub parallelism: usize,
    pub chunk_size: usize,
    pub step_budget: u64,
}

impl LocalExecutor {
    pub fn new(parallelism: usize) -> LocalExecutor {
        LocalExecutor { parallelism: parallelism.max(1), chunk_size: DEFAULT_CHUNK_SIZE, step_budget: DEFAULT_STEP_BUDGET }
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> LocalExecutor {
        self.chunk_size = chunk_size;
        self
    }
}

impl Default for LocalExecutor {
    fn default() -> Self {
        LocalExecutor::new(1)
    }
}

impl Executor for LocalExecutor {
    fn execute(&self, program: &Program, inputs: Streams, chunk_size: Option<usize>) -> Result<Streams, ExecError> {
        let plan = engine::plan(program, chunk_size.unwrap_or(self.chunk_size))?.with_step_budget(self.step_budget);
        let chunks = engine::split_into_chunks(&plan, &inputs)?;
        let result = engine::run_chunks(&plan, StreamOptions::new(self.parallelism), chunks)?;
        Ok(engine::join_chunks(&plan, &result.outputs))
    }
}
