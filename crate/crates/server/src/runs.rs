//! Run sessions and the per-run TCP data plane.

use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::io::{self, BufReader, BufWriter, ErrorKind, Write};
use std::net::{IpAddr, Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use dpp_core::engine::{run_stream, ExecutionPlan, StreamOptions};
use dpp_core::wire::{self, ChunkAssembler, Frame, Reply};
use dpp_core::ExecError;
use serde::Serialize;

/// Finished sessions kept for status queries before the oldest are dropped.
const RETAINED_FINISHED: usize = 256;
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);
const ACCEPT_POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    Waiting,
    Running,
    Done,
    Failed,
}

impl RunState {
    pub fn is_active(self) -> bool {
        matches!(self, RunState::Waiting | RunState::Running)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunStatus {
    pub state: RunState,
    pub chunks_in: u64,
    pub chunks_out: u64,
    pub work_items: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct RunSession {
    pub id: String,
    pub program_id: String,
    pub chunk_size: usize,
    pub data_port: u16,
    seq: u64,
    status: Mutex<RunStatus>,
    cancelled: AtomicBool,
    socket: Mutex<Option<TcpStream>>,
}

/// Snapshot returned by the status endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct RunSnapshot {
    pub run_id: String,
    pub program_id: String,
    pub chunk_size: usize,
    pub data_port: u16,
    #[serde(flatten)]
    pub status: RunStatus,
}

impl RunSession {
    pub fn status(&self) -> RunStatus {
        self.status.lock().expect("status lock").clone()
    }

    pub fn snapshot(&self) -> RunSnapshot {
        RunSnapshot {
            run_id: self.id.clone(),
            program_id: self.program_id.clone(),
            chunk_size: self.chunk_size,
            data_port: self.data_port,
            status: self.status(),
        }
    }

    fn update(&self, f: impl FnOnce(&mut RunStatus)) {
        f(&mut self.status.lock().expect("status lock"));
    }

    /// Moves to a terminal state unless one was reached already.
    fn finish(&self, state: RunState, error: Option<String>) {
        self.update(|s| {
            if s.state.is_active() {
                s.state = state;
                s.error = error;
            }
        });
    }

    /// Stops the session: a waiting run stops listening, a running one has
    /// its socket shut down.
    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
        self.finish(RunState::Failed, Some("cancelled".into()));
        if let Some(s) = self.socket.lock().expect("socket lock").as_ref() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

#[derive(Debug)]
pub enum CreateError {
    TooManyRuns(usize),
    Bind(io::Error),
}

#[derive(Debug)]
pub struct Registry {
    max_active: usize,
    host: IpAddr,
    ports: Option<(u16, u16)>,
    seq: AtomicU64,
    runs: Mutex<HashMap<String, Arc<RunSession>>>,
}

impl Registry {
    pub fn new(max_active: usize, host: IpAddr, ports: Option<(u16, u16)>) -> Registry {
        Registry { max_active, host, ports, seq: AtomicU64::new(0), runs: Mutex::new(HashMap::new()) }
    }

    pub fn get(&self, id: &str) -> Option<Arc<RunSession>> {
        self.runs.lock().expect("registry lock").get(id).cloned()
    }

    pub fn active(&self) -> usize {
        self.runs.lock().expect("registry lock").values().filter(|r| r.status().state.is_active()).count()
    }

    pub fn remove(&self, id: &str) -> Option<Arc<RunSession>> {
        self.runs.lock().expect("registry lock").remove(id)
    }

    fn bind(&self) -> io::Result<TcpListener> {
        match self.ports {
            None => TcpListener::bind(SocketAddr::new(self.host, 0)),
            Some((lo, hi)) => {
                for port in lo..=hi {
                    match TcpListener::bind(SocketAddr::new(self.host, port)) {
                        Ok(l) => return Ok(l),
                        Err(e) if e.kind() == ErrorKind::AddrInUse => continue,
                        Err(e) => return Err(e),
                    }
                }
                Err(io::Error::new(ErrorKind::AddrInUse, format!("no free data port in {lo}-{hi}")))
            }
        }
    }

    /// Registers a waiting run and starts listening for its data-plane
    /// connection on a fresh port.
    pub fn create(&self, program_id: &str, plan: ExecutionPlan, workers: usize) -> Result<Arc<RunSession>, CreateError> {
        let mut runs = self.runs.lock().expect("registry lock");
        if runs.values().filter(|r| r.status().state.is_active()).count() >= self.max_active {
            return Err(CreateError::TooManyRuns(self.max_active));
        }
        let listener = self.bind().map_err(CreateError::Bind)?;
        let port = listener.local_addr().map_err(CreateError::Bind)?.port();
        let session = Arc::new(RunSession {
            id: uuid::Uuid::new_v4().to_string(),
            program_id: program_id.to_string(),
            chunk_size: plan.chunk_size(),
            data_port: port,
            seq: self.seq.fetch_add(1, Ordering::Relaxed),
            status: Mutex::new(RunStatus { state: RunState::Waiting, chunks_in: 0, chunks_out: 0, work_items: 0, error: None }),
            cancelled: AtomicBool::new(false),
            socket: Mutex::new(None),
        });
        runs.insert(session.id.clone(), session.clone());
        prune(&mut runs);
        let s = session.clone();
        thread::Builder::new()
            .name(format!("run-{port}"))
            .spawn(move || listen(listener, s, plan, workers))
            .map_err(CreateError::Bind)?;
        Ok(session)
    }
}

fn prune(runs: &mut HashMap<String, Arc<RunSession>>) {
    let mut finished: Vec<(u64, String)> =
        runs.values().filter(|r| !r.status().state.is_active()).map(|r| (r.seq, r.id.clone())).collect();
    if finished.len() > RETAINED_FINISHED {
        finished.sort();
        for (_, id) in &finished[..finished.len() - RETAINED_FINISHED] {
            runs.remove(id);
        }
    }
}

fn listen(listener: TcpListener, session: Arc<RunSession>, plan: ExecutionPlan, workers: usize) {
    if let Err(e) = listener.set_nonblocking(true) {
        session.finish(RunState::Failed, Some(format!("data port: {e}")));
        return;
    }
    loop {
        if session.cancelled.load(Ordering::SeqCst) {
            return;
        }
        let stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                thread::sleep(ACCEPT_POLL);
                continue;
            }
            Err(e) => {
                session.finish(RunState::Failed, Some(format!("data port: {e}")));
                return;
            }
        };
        match handshake(&stream, &session) {
            Ok(true) => {
                run_session(stream, &session, &plan, workers);
                return;
            }
            // a stray or mistaken connection does not consume the run
            Ok(false) | Err(_) => continue,
        }
    }
}

/// Reads the handshake and replies. `Ok(true)` when the connection belongs
/// to this run and the run can start.
fn handshake(stream: &TcpStream, session: &RunSession) -> Result<bool, wire::WireError> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    let mut r = stream;
    let id = wire::read_handshake(&mut r)?;
    let mut w = stream;
    if id != session.id {
        wire::write_reply(&mut w, &Reply::Err(format!("unknown run id '{id}'")))?;
        return Ok(false);
    }
    let ok = {
        let mut s = session.status.lock().expect("status lock");
        if s.state == RunState::Waiting {
            s.state = RunState::Running;
            true
        } else {
            false
        }
    };
    if !ok {
        wire::write_reply(&mut w, &Reply::Err(format!("run {id} is not waiting")))?;
        return Ok(false);
    }
    stream.set_read_timeout(None)?;
    wire::write_reply(&mut w, &Reply::Ok(session.id.clone()))?;
    Ok(true)
}

fn run_session(stream: TcpStream, session: &RunSession, plan: &ExecutionPlan, workers: usize) {
    let _ = stream.set_nodelay(true);
    if let Ok(s) = stream.try_clone() {
        *session.socket.lock().expect("socket lock") = Some(s);
    }
    // a cancel may have raced the handshake
    if session.cancelled.load(Ordering::SeqCst) {
        let _ = stream.shutdown(Shutdown::Both);
        return;
    }
    let writer = match stream.try_clone() {
        Ok(s) => s,
        Err(e) => {
            session.finish(RunState::Failed, Some(e.to_string()));
            return;
        }
    };
    let mut reader = BufReader::with_capacity(1 << 16, stream);
    let mut out = BufWriter::with_capacity(1 << 16, writer);
    let result = drive(&mut reader, &mut out, session, plan, workers);
    match result {
        Ok(()) => session.finish(RunState::Done, None),
        Err(e) => {
            let message = e.to_string();
            let _ = wire::write_frame(&mut out, &Frame::Error { message: message.clone() });
            let _ = out.flush();
            session.finish(RunState::Failed, Some(message));
        }
    }
    let _ = out.get_ref().shutdown(Shutdown::Write);
}

fn transport(e: impl ToString) -> ExecError {
    ExecError::Transport { message: e.to_string(), retriable: false }
}

fn drive(
    reader: &mut BufReader<TcpStream>,
    out: &mut BufWriter<TcpStream>,
    session: &RunSession,
    plan: &ExecutionPlan,
    workers: usize,
) -> Result<(), ExecError> {
    let types = plan.input_streams().iter().map(|p| (p.stream_name(), p.data)).collect();
    let mut assembler = ChunkAssembler::new(types);
    // work-item counts of chunks read but not yet written back
    let pending: RefCell<VecDeque<u64>> = RefCell::new(VecDeque::new());
    let input = std::iter::from_fn(|| loop {
        if assembler.finished() {
            return None;
        }
        let frame = match wire::read_frame(reader) {
            Ok(Some(f)) => f,
            Ok(None) => return Some(Err(transport("connection closed before END on every input stream"))),
            Err(e) => return Some(Err(transport(e))),
        };
        match assembler.push(frame) {
            Ok(Some(chunk)) => {
                pending.borrow_mut().push_back(chunk.element_count().unwrap_or(0) as u64);
                session.update(|s| s.chunks_in += 1);
                return Some(Ok(chunk));
            }
            Ok(None) => continue,
            Err(msg) => return Some(Err(ExecError::input(format!("protocol error: {msg}")))),
        }
    });
    run_stream(plan, StreamOptions::new(workers), input, |chunk| {
        wire::write_chunk(out, &chunk).and_then(|_| out.flush().map_err(Into::into)).map_err(transport)?;
        let n = pending.borrow_mut().pop_front().unwrap_or(0);
        session.update(|s| {
            s.chunks_out += 1;
            s.work_items += n;
        });
        Ok(())
    })?;
    for p in plan.output_streams() {
        wire::write_frame(out, &Frame::End { stream: p.stream_name() }).map_err(transport)?;
    }
    out.flush().map_err(transport)?;
    Ok(())
}
