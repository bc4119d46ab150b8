//! Client library: run programs in-process or on a server through one
//! [`Backend`] interface, with streams stored as [`StreamFile`]s.

pub mod remote;
pub mod stream_file;

use std::collections::BTreeMap;

use dpp_core::apps::codec::CodecError;
use dpp_core::apps::fft::FftError;
use dpp_core::apps::image::PpmError;
use dpp_core::program::{ProgramError, ValidationReport};
use dpp_core::{ExecError, Executor, LocalExecutor, Program, Streams};
use thiserror::Error;

pub use remote::RemoteExecutor;
pub use stream_file::{StreamFile, StreamFileError};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{0}")]
    Program(#[from] ProgramError),
    #[error("invalid program:\n{0}")]
    Invalid(ValidationReport),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    StreamFile(#[from] StreamFileError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("{0}")]
    Usage(String),
}

impl ClientError {
    /// 0 success, 1 invalid program, 2 I/O, 3 protocol or runtime failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ClientError::Program(_) | ClientError::Invalid(_) => 1,
            ClientError::Io(_) | ClientError::StreamFile(_) => 2,
            ClientError::Exec(ExecError::Transport { retriable: true, .. }) => 2,
            ClientError::Exec(_) | ClientError::Usage(_) => 3,
        }
    }
}

impl From<FftError> for ClientError {
    fn from(e: FftError) -> Self {
        match e {
            FftError::Exec(e) => ClientError::Exec(e),
            other => ClientError::Usage(other.to_string()),
        }
    }
}

impl From<CodecError> for ClientError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::Exec(e) => ClientError::Exec(e),
            CodecError::Format(m) => ClientError::Io(format!("malformed compressed image: {m}")),
            other => ClientError::Usage(other.to_string()),
        }
    }
}

impl From<PpmError> for ClientError {
    fn from(e: PpmError) -> Self {
        ClientError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Local { parallelism: usize, chunk_size: usize },
    Remote { url: String, chunk_size: usize },
}

impl Backend {
    pub fn executor(&self) -> Result<Box<dyn Executor>, ClientError> {
        Ok(match self {
            Backend::Local { parallelism, chunk_size } => Box::new(LocalExecutor::new(*parallelism).with_chunk_size(*chunk_size)),
            Backend::Remote { url, chunk_size } => Box::new(RemoteExecutor::new(url)?.with_chunk_size(*chunk_size)),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Local { .. } => "local",
            Backend::Remote { .. } => "remote",
        }
    }

    /// Validates `program`, checks that `inputs` are exactly its free input
    /// streams with matching types, runs it and returns every free output.
    pub fn run(&self, program: &Program, inputs: BTreeMap<String, StreamFile>) -> Result<BTreeMap<String, StreamFile>, ClientError> {
        let report = program.validate();
        if !report.is_ok() {
            return Err(ClientError::Invalid(report));
        }
        let free = program.free_inputs();
        for p in &free {
            let name = p.stream_name();
            match inputs.get(&name) {
                None => return Err(ExecError::input(format!("missing input stream '{name}'")).into()),
                Some(f) if f.data_type() != p.data => {
                    return Err(ExecError::input(format!("input stream '{name}' has type {}, expected {}", f.data_type(), p.data)).into())
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = inputs.keys().find(|k| !free.iter().any(|p| &p.stream_name() == *k)) {
            return Err(ExecError::input(format!("'{extra}' is not a free input stream")).into());
        }
        let streams: Streams = inputs.into_iter().map(|(k, f)| (k, f.data)).collect();
        let out = self.executor()?.execute(program, streams, None)?;
        Ok(out.into_iter().map(|(k, d)| (k, StreamFile::new(d))).collect())
    }
}
