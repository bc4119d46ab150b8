//! Executor that runs programs on a server: upload unless already stored,
//! create a run, then stream chunks over the run's data port.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::thread;
use std::time::Duration;

use dpp_core::engine::{self, Chunk, ExecutionPlan, DEFAULT_CHUNK_SIZE};
use dpp_core::wire::{self, ChunkAssembler, Frame, Reply, WireError};
use dpp_core::{serialize_program, ExecError, Executor, Program, Streams};
use serde_json::Value;

const CONNECT_TIMEOUT: Duration = Duration::from_secs(10);

fn transport(message: impl Into<String>, retriable: bool) -> ExecError {
    ExecError::Transport { message: message.into(), retriable }
}

fn wire_error(e: WireError) -> ExecError {
    let retriable = e.is_io();
    transport(format!("data plane: {e}"), retriable)
}

#[derive(Debug, Clone)]
pub struct RemoteExecutor {
    base: String,
    host: String,
    pub chunk_size: usize,
    agent: ureq::Agent,
}

impl RemoteExecutor {
    /// `base` is the server's control URL, e.g. `http://127.0.0.1:8470`.
    pub fn new(base: &str) -> Result<RemoteExecutor, ExecError> {
        let base = base.trim_end_matches('/').to_string();
        let uri: ureq::http::Uri = base.parse().map_err(|e| transport(format!("bad server URL '{base}': {e}"), false))?;
        if uri.scheme_str() != Some("http") {
            return Err(transport(format!("bad server URL '{base}': only http:// is supported"), false));
        }
        let host = uri.host().ok_or_else(|| transport(format!("bad server URL '{base}': no host"), false))?;
        let host = host.trim_start_matches('[').trim_end_matches(']').to_string();
        let agent = ureq::Agent::config_builder().http_status_as_error(false).timeout_connect(Some(CONNECT_TIMEOUT)).build().into();
        Ok(RemoteExecutor { base, host, chunk_size: DEFAULT_CHUNK_SIZE, agent })
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> RemoteExecutor {
        self.chunk_size = chunk_size;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn request(&self, method: &str, path: &str, body: Option<&[u8]>) -> Result<(u16, Vec<u8>), ExecError> {
        let url = format!("{}{path}", self.base);
        let resp = match (method, body) {
            ("GET", _) => self.agent.get(&url).call(),
            ("POST", Some(b)) => self.agent.post(&url).send(b),
            ("POST", None) => self.agent.post(&url).send_empty(),
            _ => unreachable!("unused method {method}"),
        };
        let mut resp = resp.map_err(|e| {
            let retriable = matches!(
                e,
                ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound | ureq::Error::Timeout(_)
            );
            transport(format!("{method} {url}: {e}"), retriable)
        })?;
        let code = resp.status().as_u16();
        let mut bytes = Vec::new();
        resp.body_mut().as_reader().read_to_end(&mut bytes).map_err(|e| transport(format!("{method} {url}: {e}"), true))?;
        Ok((code, bytes))
    }

    fn failure(what: &str, code: u16, body: &[u8]) -> ExecError {
        let detail = serde_json::from_slice::<Value>(body)
            .ok()
            .and_then(|v| v.get("error").and_then(Value::as_str).map(str::to_string))
            .unwrap_or_else(|| String::from_utf8_lossy(body).into_owned());
        // busy or failing servers may recover; a rejected request will not
        let retriable = code == 409 || code >= 500;
        transport(format!("{what}: HTTP {code}: {detail}"), retriable)
    }

    /// `GET /v1/status`.
    pub fn status(&self) -> Result<Value, ExecError> {
        let (code, body) = self.request("GET", "/v1/status", None)?;
        if code != 200 {
            return Err(Self::failure("status", code, &body));
        }
        serde_json::from_slice(&body).map_err(|e| transport(format!("status: {e}"), false))
    }

    /// Uploads `program` unless the server already stores its id. Returns
    /// the id and whether an upload happened.
    pub fn ensure_uploaded(&self, program: &Program) -> Result<(String, bool), ExecError> {
        let id = program.id();
        let (code, _) = self.request("GET", &format!("/v1/programs/{id}"), None)?;
        if code == 200 {
            return Ok((id, false));
        }
        let (code, body) = self.request("POST", "/v1/programs", Some(&serialize_program(program)))?;
        if code != 200 && code != 201 {
            return Err(Self::failure("upload", code, &body));
        }
        let stored = serde_json::from_slice::<Value>(&body).ok().and_then(|v| v["program_id"].as_str().map(str::to_string));
        match stored {
            Some(s) if s == id => Ok((id, true)),
            other => Err(transport(format!("upload: server stored the program as {other:?}, expected {id}"), false)),
        }
    }

    fn create_run(&self, id: &str, chunk_size: usize) -> Result<(String, u16), ExecError> {
        let body = format!("{{\"chunk_size\":{chunk_size}}}");
        let (code, body) = self.request("POST", &format!("/v1/programs/{id}/runs"), Some(body.as_bytes()))?;
        if code != 201 {
            return Err(Self::failure("create run", code, &body));
        }
        let v: Value = serde_json::from_slice(&body).map_err(|e| transport(format!("create run: {e}"), false))?;
        match (v["run_id"].as_str(), v["data_port"].as_u64()) {
            (Some(run), Some(port)) if port > 0 && port <= u16::MAX as u64 => Ok((run.to_string(), port as u16)),
            _ => Err(transport(format!("create run: unexpected reply {v}"), false)),
        }
    }

    /// `GET /v1/runs/{id}`.
    pub fn run_status(&self, run: &str) -> Result<Value, ExecError> {
        let (code, body) = self.request("GET", &format!("/v1/runs/{run}"), None)?;
        if code != 200 {
            return Err(Self::failure("run status", code, &body));
        }
        serde_json::from_slice(&body).map_err(|e| transport(format!("run status: {e}"), false))
    }

    fn stream(&self, plan: &ExecutionPlan, run: &str, port: u16, chunks: Vec<Chunk>) -> Result<Vec<Chunk>, ExecError> {
        let socket = TcpStream::connect((self.host.as_str(), port)).map_err(|e| transport(format!("data port {port}: {e}"), true))?;
        let _ = socket.set_nodelay(true);
        let mut hs = &socket;
        wire::write_handshake(&mut hs, run).map_err(wire_error)?;
        match wire::read_reply(&mut hs).map_err(wire_error)? {
            Reply::Ok(_) => {}
            Reply::Err(m) => return Err(transport(format!("server refused the data connection: {m}"), false)),
        }
        let inputs: Vec<String> = plan.input_streams().iter().map(|p| p.stream_name()).collect();
        let write_half = socket.try_clone().map_err(|e| transport(e.to_string(), true))?;
        let output_types = plan.output_streams().map(|p| (p.stream_name(), p.data)).collect();

        thread::scope(|s| {
            let writer = s.spawn(move || -> Result<(), WireError> {
                let mut w = BufWriter::with_capacity(1 << 16, &write_half);
                for c in &chunks {
                    wire::write_chunk(&mut w, c)?;
                }
                for name in &inputs {
                    wire::write_frame(&mut w, &Frame::End { stream: name.clone() })?;
                }
                w.flush()?;
                Ok(())
            });
            let mut r = BufReader::with_capacity(1 << 16, &socket);
            let mut assembler = ChunkAssembler::new(output_types);
            let mut out = Vec::new();
            let read = loop {
                if assembler.finished() {
                    break Ok(());
                }
                match wire::read_frame(&mut r) {
                    Ok(Some(Frame::Error { message })) => break Err(transport(format!("server: {message}"), false)),
                    Ok(Some(frame)) => match assembler.push(frame) {
                        Ok(Some(chunk)) => out.push(chunk),
                        Ok(None) => {}
                        Err(m) => break Err(transport(format!("data plane: {m}"), false)),
                    },
                    Ok(None) => break Err(transport("server closed the data connection early", true)),
                    Err(e) => break Err(wire_error(e)),
                }
            };
            if read.is_err() {
                // unblock the writer if the server stopped reading
                let _ = socket.shutdown(std::net::Shutdown::Both);
            }
            let written = writer.join().map_err(|_| transport("writer thread panicked", false))?;
            read?;
            written.map_err(wire_error)?;
            Ok(out)
        })
    }
}

impl Executor for RemoteExecutor {
    fn execute(&self, program: &Program, inputs: Streams, chunk_size: Option<usize>) -> Result<Streams, ExecError> {
        let w = chunk_size.unwrap_or(self.chunk_size);
        let plan = engine::plan(program, w)?;
        let chunks = engine::split_into_chunks(&plan, &inputs)?;
        let (id, _) = self.ensure_uploaded(program)?;
        let (run, port) = self.create_run(&id, w)?;
        let out = self.stream(&plan, &run, port, chunks)?;
        Ok(engine::join_chunks(&plan, &out))
    }
}
