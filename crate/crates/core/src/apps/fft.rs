//! Radix-2 Cooley-Tukey FFT whose first `k` decimation stages run on the
//! platform as dense `2^k`-point DFTs, one work-item per leaf.

use std::f64::consts::PI;
use std::time::Duration;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clock::Instant;
use crate::engine::ExecError;
use crate::executor::{Executor, Streams};
use crate::program::{Instance, Node, Program};
use crate::types::{Buffer, DataType, PointSpec, ScalarType, StreamData};

pub const LEAF_STREAM_IN: &str = "0.x";
pub const LEAF_STREAM_OUT: &str = "0.y";

#[derive(Debug, Error)]
pub enum FftError {
    #[error("leaf order k must be 1, 2 or 3, got {0}")]
    LeafOrder(u32),
    #[error("transform size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("transform size {n} is smaller than the leaf size {leaf}")]
    TooSmall { n: usize, leaf: usize },
    #[error("signal of {len} samples is not a whole number of {n}-point transforms")]
    Ragged { len: usize, n: usize },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("backend returned {0}")]
    BadOutput(String),
}

/// Direct O(N²) DFT, accumulated in binary64.
pub fn naive_dft(x: &[Complex32]) -> Vec<Complex32> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, v) in x.iter().enumerate() {
                // reduce k*m mod n first so the angle stays small and exact
                let t = -2.0 * PI * ((k * m) % n) as f64 / n as f64;
                acc += Complex64::new(v.re as f64, v.im as f64) * Complex64::new(t.cos(), t.sin());
            }
            Complex32::new(acc.re as f32, acc.im as f32)
        })
        .collect()
}

fn leaf_type(k: u32) -> DataType {
    DataType::vector(ScalarType::Float, 2 << k).expect("width 4, 8 or 16")
}

fn lane(i: usize) -> String {
    format!("v.s{}", char::from_digit(i as u32, 16).expect("lane below 16").to_ascii_uppercase())
}

/// One real or imaginary output term: sum of coefficient * lane products,
/// dropping zero coefficients and writing ±1 without a multiply.
fn term(parts: &[(f32, usize)]) -> String {
    let mut s = String::new();
    for &(c, l) in parts {
        if c == 0.0 {
            continue;
        }
        let mag = c.abs();
        let product = if mag == 1.0 { lane(l) } else { format!("{mag:?}f*{}", lane(l)) };
        if s.is_empty() {
            if c < 0.0 {
                s.push('-');
            }
        } else {
            s.push_str(if c < 0.0 { " - " } else { " + " });
        }
        s.push_str(&product);
    }
    if s.is_empty() {
        s.push_str("0.0f");
    }
    s
}

/// Exact twiddle `e^{-2πi·r/n}` where the angle is a multiple of π/2.
fn twiddle32(r: usize, n: usize) -> (f32, f32) {
    let r = r % n;
    if r == 0 {
        (1.0, 0.0)
    } else if 2 * r == n {
        (-1.0, 0.0)
    } else if 4 * r == n {
        (0.0, -1.0)
    } else if 4 * r == 3 * n {
        (0.0, 1.0)
    } else {
        let t = -2.0 * PI * r as f64 / n as f64;
        (t.cos() as f32, t.sin() as f32)
    }
}

/// Kernel source for a dense `2^k`-point DFT over one complex-interleaved
/// vector per work-item.
pub fn leaf_source(k: u32) -> String {
    let n = 1usize << k;
    let ty = leaf_type(k);
    let mut comps = Vec::with_capacity(2 * n);
    for j in 0..n {
        let mut re = Vec::new();
        let mut im = Vec::new();
        for m in 0..n {
            let (c, s) = twiddle32(j * m, n);
            // (a + ib)(c + is) = (ac - bs) + i(as + bc)
            re.push((c, 2 * m));
            re.push((-s, 2 * m + 1));
            im.push((s, 2 * m));
            im.push((c, 2 * m + 1));
        }
        comps.push(term(&re));
        comps.push(term(&im));
    }
    format!("int i = get_global_id(0);\n{ty} v = x[i];\ny[i] = ({ty})({});\n", comps.join(",\n    "))
}

pub fn leaf_kernel(k: u32) -> Result<Node, FftError> {
    if !(1..=3).contains(&k) {
        return Err(FftError::LeafOrder(k));
    }
    let ty = leaf_type(k);
    Ok(Node::new(leaf_source(k), [("x".to_string(), PointSpec::input(ty)), ("y".to_string(), PointSpec::output(ty))]))
}

/// Single-instance program running the leaf DFT over stream `0.x`.
pub fn leaf_program(k: u32) -> Result<Program, FftError> {
    let name = format!("dft{}", 1 << k);
    Ok(Program {
        arrows: vec![],
        kernels: [(name.clone(), leaf_kernel(k)?)].into(),
        nodes: vec![Instance { id: 0, kernel: name }],
    })
}

fn bit_reverse(i: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS - bits)
    }
}

fn check(n: usize, k: u32) -> Result<(), FftError> {
    if !(1..=3).contains(&k) {
        return Err(FftError::LeafOrder(k));
    }
    if !n.is_power_of_two() {
        return Err(FftError::NotPowerOfTwo(n));
    }
    if n < 1 << k {
        return Err(FftError::TooSmall { n, leaf: 1 << k });
    }
    Ok(())
}

/// FFT of one signal whose length is a power of two.
pub fn fft(x: &[Complex32], k: u32, exec: &dyn Executor) -> Result<Vec<Complex32>, FftError> {
    fft_batch(x, x.len(), k, exec)
}

/// Independent `n`-point FFTs of consecutive slices of `x`, with all leaf
/// DFTs of the batch sent to the platform as one stream.
pub fn fft_batch(x: &[Complex32], n: usize, k: u32, exec: &dyn Executor) -> Result<Vec<Complex32>, FftError> {
    check(n, k)?;
    if x.len() % n != 0 {
        return Err(FftError::Ragged { len: x.len(), n });
    }
    // Leaf b is the dense DFT of the decimated subsequence starting at the
    // bit-reversed block index with stride n / leaf, in natural order.
    let leaf = 1usize << k;
    let stride = n / leaf;
    let block_bits = (n / leaf).trailing_zeros();
    let mut flat = Vec::with_capacity(2 * x.len());
    for signal in x.chunks(n) {
        for b in 0..stride {
            let start = bit_reverse(b, block_bits);
            for j in 0..leaf {
                let v = signal[start + j * stride];
                flat.push(v.re);
                flat.push(v.im);
            }
        }
    }
    let program = leaf_program(k)?;
    let inputs: Streams = [(LEAF_STREAM_IN.to_string(), StreamData::from_f32(leaf_type(k), flat))].into();
    let mut out = exec.execute(&program, inputs, None)?;
    let leaves = out.remove(LEAF_STREAM_OUT).ok_or_else(|| FftError::BadOutput("no output stream".into()))?;
    let Buffer::Float(values) = leaves.buffer else {
        return Err(FftError::BadOutput(format!("stream of type {}", leaves.data)));
    };
    if values.len() != 2 * x.len() {
        return Err(FftError::BadOutput(format!("{} scalars for {} samples", values.len(), x.len())));
    }

    let mut result = Vec::with_capacity(x.len());
    let mut work: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    for block in values.chunks(2 * n) {
        for (w, pair) in work.iter_mut().zip(block.chunks(2)) {
            *w = Complex64::new(pair[0] as f64, pair[1] as f64);
        }
        butterflies(&mut work, 1 << k);
        result.extend(work.iter().map(|c| Complex32::new(c.re as f32, c.im as f32)));
    }
    Ok(result)
}

/// Remaining radix-2 stages over consecutive DFTs of size `from`.
fn butterflies(a: &mut [Complex64], from: usize) {
    let n = a.len();
    let mut m = from * 2;
    while m <= n {
        let half = m / 2;
        for j in 0..half {
            let t = -2.0 * PI * j as f64 / m as f64;
            let w = Complex64::new(t.cos(), t.sin());
            for start in (0..n).step_by(m) {
                let u = a[start + j];
                let v = a[start + j + half] * w;
                a[start + j] = u + v;
                a[start + j + half] = u - v;
            }
        }
        m *= 2;
    }
}

/// Seeded signal with components uniform in [-1, 1).
pub fn random_signal(n: usize, seed: u64) -> Vec<Complex32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// `max |a - b| / max |b|`.
pub fn max_relative_error(a: &[Complex32], b: &[Complex32]) -> f64 {
    let scale = b.iter().map(|v| v.norm() as f64).fold(0.0, f64::max);
    let err = a.iter().zip(b).map(|(x, y)| (x - y).norm() as f64).fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub bytes: usize,
    pub k: u32,
    pub seconds: f64,
    pub backend: String,
}

/// Times `n`-point FFTs over streams of `bytes` bytes of complex binary32
/// data (best of `repeats`).
pub fn bench(
    sizes: &[usize],
    ks: &[u32],
    n: usize,
    repeats: usize,
    backend: &str,
    exec: &dyn Executor,
) -> Result<Vec<BenchRow>, FftError> {
    let mut rows = Vec::new();
    for &bytes in sizes {
        let samples = (bytes / 8).div_ceil(n).max(1) * n;
        let signal = random_signal(samples, bytes as u64);
        for &k in ks {
            let mut best = Duration::MAX;
            for _ in 0..repeats.max(1) {
                let t = Instant::now();
                fft_batch(&signal, n, k, exec)?;
                best = best.min(t.elapsed());
            }
            rows.push(BenchRow { bytes, k, seconds: best.as_secs_f64(), backend: backend.to_string() });
        }
    }
    Ok(rows)
}

/// Least-squares fit of `log t = a + b log bytes`; returns (slope, R²).
pub fn loglog_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}
