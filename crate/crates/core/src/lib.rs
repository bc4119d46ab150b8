//! Data-parallel dataflow programs: typed DAGs of kernels written in a small
//! OpenCL C subset, executed over chunked streams.

pub mod apps;
pub mod clock;
pub mod engine;
pub mod executor;
pub mod fixtures;
pub mod kernel;
pub mod program;
pub mod types;
pub mod wire;

pub use engine::{ExecError, ExecutionPlan};
pub use executor::{Executor, LocalExecutor, Streams};
pub use program::{parse_program, program_id, serialize_program, Program};
pub use types::{Buffer, DataType, ScalarType, StreamData};
