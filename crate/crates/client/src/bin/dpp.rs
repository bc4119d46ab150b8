use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpp_client::{Backend, ClientError, RemoteExecutor, StreamFile};
use dpp_core::apps::{codec, fft, image::Image};
use dpp_core::engine::DEFAULT_CHUNK_SIZE;
use dpp_core::{parse_program, DataType, Program, ScalarType, StreamData};
use num_complex::Complex32;

/// Run data-parallel dataflow programs locally or on a server.
#[derive(Parser)]
#[command(name = "dpp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// Server URL; runs in-process when absent.
    #[arg(long, env = "DPP_SERVER")]
    server: Option<String>,
    /// Work-items per chunk.
    #[arg(long = "chunk", default_value_t = DEFAULT_CHUNK_SIZE)]
    chunk: usize,
    /// Worker threads for local runs; defaults to the hardware threads.
    #[arg(long = "par")]
    par: Option<usize>,
}

impl BackendArgs {
    fn backend(&self) -> Backend {
        match &self.server {
            Some(url) => Backend::Remote { url: url.clone(), chunk_size: self.chunk },
            None => Backend::Local {
                parallelism: self.par.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
                chunk_size: self.chunk,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the validation report; exit 1 if the program is not executable.
    Validate { program: PathBuf },
    /// Print the program id (SHA-256 of the canonical document).
    Id { program: PathBuf },
    /// Run a program over stream files.
    Run {
        program: PathBuf,
        /// Input as STREAM=FILE, e.g. 0.z=in.dps
        #[arg(long = "in", value_parser = assignment)]
        inputs: Vec<(String, PathBuf)>,
        /// Output as STREAM=FILE; unlisted outputs are discarded.
        #[arg(long = "out", value_parser = assignment)]
        outputs: Vec<(String, PathBuf)>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Start a server.
    Serve {
        #[command(flatten)]
        config: dpp_server::Config,
    },
    /// Print a server's status.
    Info {
        #[arg(long, env = "DPP_SERVER")]
        server: String,
    },
    /// FFT of a float2 stream file holding one or more N-point signals.
    Fft {
        #[arg(long)]
        n: usize,
        /// Leaf DFT order: leaves of 2^k points run on the platform.
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Block vector-quantization image codec.
    Imgc {
        #[command(subcommand)]
        op: ImgcOp,
    },
    /// Time FFT streams of growing size; prints CSV bytes,k,seconds,backend.
    FftBench {
        /// Size range as MIN..MAX with K/M suffixes (powers of 1000).
        #[arg(long, default_value = "20K..10M", value_parser = size_range)]
        sizes: (usize, usize),
        /// Number of sizes, spaced evenly in log scale.
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        k: Vec<u32>,
        /// Points per transform.
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Subcommand)]
enum ImgcOp {
    /// PPM (P6) to compressed container.
    Compress {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 256)]
        codebook: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Compressed container to PPM (P6).
    Decompress {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
}

fn assignment(s: &str) -> Result<(String, PathBuf), String> {
    let (k, v) = s.split_once('=').ok_or("expected STREAM=FILE")?;
    Ok((k.to_string(), PathBuf::from(v)))
}

fn size(s: &str) -> Result<usize, String> {
    let s = s.trim();
    let (digits, scale) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 1_000.0),
        Some('M' | 'm') => (&s[..s.len() - 1], 1_000_000.0),
        _ => (s, 1.0),
    };
    let v: f64 = digits.parse().map_err(|_| format!("bad size '{s}'"))?;
    Ok((v * scale) as usize)
}

fn size_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or("expected MIN..MAX")?;
    let (a, b) = (size(a)?, size(b)?);
    if a == 0 || a > b {
        return Err(format!("bad range {a}..{b}"));
    }
    Ok((a, b))
}

fn read(path: &Path) -> Result<Vec<u8>, ClientError> {
    fs::read(path).map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ClientError> {
    fs::write(path, bytes).map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, ClientError> {
    Ok(parse_program(&read(path)?)?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<u8, ClientError> {
    match cli.command {
        Command::Validate { program } => {
            let report = load_program(&program)?.validate();
            println!("{report}");
            Ok(if report.is_ok() { 0 } else { 1 })
        }
        Command::Id { program } => {
            println!("{}", load_program(&program)?.id());
            Ok(0)
        }
        Command::Run { program, inputs, outputs, backend } => {
            let program = load_program(&program)?;
            let mut streams = BTreeMap::new();
            for (name, path) in inputs {
                streams.insert(name, StreamFile::read(&path)?);
            }
            let produced = backend.backend().run(&program, streams)?;
            for (name, path) in &outputs {
                let f = produced.get(name).ok_or_else(|| ClientError::Usage(format!("'{name}' is not a free output stream")))?;
                f.write(path)?;
            }
            for (name, f) in &produced {
                eprintln!("{name}: {} x {}", f.count(), f.data_type());
            }
            Ok(0)
        }
        Command::Serve { config } => {
            let server = dpp_server::spawn(config).map_err(|e| ClientError::Io(format!("cannot start server: {e}")))?;
            println!("listening on {}", server.url());
            server.wait().map_err(|e| ClientError::Io(e.to_string()))?;
            Ok(0)
        }
        Command::Info { server } => {
            let status = RemoteExecutor::new(&server)?.status()?;
            println!("{}", serde_json::to_string_pretty(&status).expect("JSON value"));
            Ok(0)
        }
        Command::Fft { n, k, input, output, backend } => {
            let f = StreamFile::read(&input)?;
            let Some(values) = f.data.buffer.as_f32().filter(|_| f.data_type() == DataType::vector(ScalarType::Float, 2).expect("float2")) else {
                return Err(ClientError::Usage(format!("FFT input must be float2, found {}", f.data_type())));
            };
            let x: Vec<Complex32> = values.chunks(2).map(|c| Complex32::new(c[0], c[1])).collect();
            let exec = backend.backend().executor()?;
            let y = fft::fft_batch(&x, n, k, exec.as_ref())?;
            let flat: Vec<f32> = y.iter().flat_map(|c| [c.re, c.im]).collect();
            StreamFile::new(StreamData::from_f32(f.data_type(), flat)).write(&output)?;
            Ok(0)
        }
        Command::Imgc { op: ImgcOp::Compress { input, output, codebook, seed, backend } } => {
            let img = Image::from_ppm(&read(&input)?)?;
            let exec = backend.backend().executor()?;
            let c = codec::compress(&img, codebook, seed, exec.as_ref())?;
            let bytes = c.to_bytes();
            write(&output, &bytes)?;
            let raw = img.width * img.height * 3;
            eprintln!("{raw} -> {} bytes (ratio {:.4}), {} codewords", bytes.len(), bytes.len() as f64 / raw as f64, c.codebook.len());
            Ok(0)
        }
        Command::Imgc { op: ImgcOp::Decompress { input, output } } => {
            let c = codec::Compressed::from_bytes(&read(&input)?)?;
            write(&output, &codec::decompress(&c).to_ppm())?;
            Ok(0)
        }
        Command::FftBench { sizes, steps, k, n, repeats, backend } => {
            let (lo, hi) = sizes;
            let steps = steps.max(2);
            let points: Vec<usize> = (0..steps)
                .map(|i| (lo as f64 * (hi as f64 / lo as f64).powf(i as f64 / (steps - 1) as f64)).round() as usize)
                .collect();
            let b = backend.backend();
            let exec = b.executor()?;
            let rows = fft::bench(&points, &k, n, repeats, b.name(), exec.as_ref())?;
            println!("bytes,k,seconds,backend");
            for r in rows {
                println!("{},{},{:.6},{}", r.bytes, r.k, r.seconds, r.backend);
            }
            Ok(0)
        }
    }
}
