//! The platform server: programs are uploaded and runs created over HTTP,
//! and each run streams its data over its own TCP port.
//!
//! ```text
//! GET    /v1/status
//! POST   /v1/programs
//! GET    /v1/programs/{id}
//! POST   /v1/programs/{id}/runs
//! POST   /v1/programs/{id}/runs:inline
//! GET    /v1/runs/{id}
//! DELETE /v1/runs/{id}
//! ```

mod api;
pub mod runs;
pub mod store;

use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use clap::Args;
use tokio::sync::oneshot;

pub use api::router;
use runs::Registry;
use store::Store;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_PORT: u16 = 8470;
pub const DEFAULT_MAX_RUNS: usize = 16;
/// Largest total decoded input accepted by the inline run endpoint.
pub const INLINE_LIMIT: usize = 4 << 20;

#[derive(Debug, Clone, Args)]
pub struct Config {
    /// Address to bind the control and data ports on.
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub host: IpAddr,
    /// Control port; 0 picks a free one.
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    /// Data ports as LO-HI; ephemeral ports when absent.
    #[arg(long, value_parser = parse_range)]
    pub data_port_range: Option<(u16, u16)>,
    /// Directory for stored programs; in memory when absent.
    #[arg(long)]
    pub store_dir: Option<PathBuf>,
    /// Engine workers per run; defaults to the number of hardware threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Waiting or running sessions allowed at once.
    #[arg(long, default_value_t = DEFAULT_MAX_RUNS)]
    pub max_runs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            data_port_range: None,
            store_dir: None,
            workers: None,
            max_runs: DEFAULT_MAX_RUNS,
        }
    }
}

impl Config {
    /// Loopback, any free port, in-memory store.
    pub fn ephemeral() -> Config {
        Config { port: 0, ..Config::default() }
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get())).max(1)
    }
}

fn parse_range(s: &str) -> Result<(u16, u16), String> {
    let (lo, hi) = s.split_once('-').ok_or("expected LO-HI")?;
    let lo: u16 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: u16 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("bad port range {lo}-{hi}"));
    }
    Ok((lo, hi))
}

pub struct AppState {
    pub store: Store,
    pub runs: Registry,
    pub workers: usize,
}

impl AppState {
    pub fn new(config: &Config) -> io::Result<AppState> {
        let store = match &config.store_dir {
            Some(dir) => Store::open(dir)?,
            None => Store::in_memory(),
        };
        Ok(AppState { store, runs: Registry::new(config.max_runs, config.host, config.data_port_range), workers: config.workers() })
    }
}

/// A server running on a background thread with its own runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) -> io::Result<()> {
        self.thread.take().map_or(Ok(()), |t| t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))))
    }

    pub fn stop(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_inner();
    }
}

/// Binds the control port and serves on a background thread.
pub fn spawn(config: Config) -> io::Result<ServerHandle> {
    let state = Arc::new(AppState::new(&config)?);
    let listener = std::net::TcpListener::bind(SocketAddr::new(config.host, config.port))?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_io().build()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = thread::Builder::new().name("dpp-server".into()).spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)?;
            axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        })
    })?;
    Ok(ServerHandle { addr, shutdown: Some(tx), thread: Some(thread) })
}
