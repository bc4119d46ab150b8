//! Block vector-quantization image codec.
//!
//! Colour conversion, chroma downscaling and the luminance gradient run as
//! one platform program over the whole frame; the codebook is trained on the
//! host; nearest-codeword search runs as a second platform program with the
//! codebook inlined as constants.
//!
//! Pixels travel in block-raster order: the 16 pixels of each 4×4 block are
//! consecutive (row-major inside the block) and blocks are row-major. That
//! makes a block one `float16` element, so the chroma box filter is a plain
//! width conversion on an arrow.

use std::fmt::Write as _;

use thiserror::Error;

use super::image::Image;
use super::kmeans::{kmeans, Block, KmeansError};
use crate::engine::ExecError;
use crate::executor::{Executor, Streams};
use crate::program::{Arrow, Endpoint, Instance, Node, Program};
use crate::types::{Buffer, DataType, PointSpec, ScalarType, StreamData};

pub const MAGIC: [u8; 4] = *b"DPVQ";
/// σ is quantized uniformly over [0, 64] into 256 levels.
pub const SIGMA_STEP: f32 = 64.0 / 255.0;
/// Blocks whose mean gradient magnitude is below this are not used to train
/// the codebook.
pub const G_MIN: f32 = 1.0;
pub const MAX_ITER: usize = 20;
const HEADER_LEN: usize = 4 + 4 + 4 + 2 + 4;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("image dimensions {0}x{1} are not positive multiples of 4")]
    Dimensions(usize, usize),
    #[error("codebook size must be between 1 and 256, got {0}")]
    CodebookSize(usize),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Kmeans(#[from] KmeansError),
    #[error("malformed compressed image: {0}")]
    Format(String),
    #[error("backend returned {0}")]
    BadOutput(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compressed {
    pub width: u32,
    pub height: u32,
    pub sigma_step: f32,
    pub codebook: Vec<Block>,
    /// (mean, σ index, codebook index) per block, row-major.
    pub records: Vec<[u8; 3]>,
    pub cb: Vec<u8>,
    pub cr: Vec<u8>,
}

impl Compressed {
    pub fn blocks(&self) -> usize {
        (self.width as usize).div_ceil(4) * (self.height as usize).div_ceil(4)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.codebook.len() * 64 + self.records.len() * 3 + 2 * self.cb.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&(self.codebook.len() as u16).to_le_bytes());
        out.extend_from_slice(&self.sigma_step.to_le_bytes());
        for c in &self.codebook {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for r in &self.records {
            out.extend_from_slice(r);
        }
        out.extend_from_slice(&self.cb);
        out.extend_from_slice(&self.cr);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Compressed, CodecError> {
        let bad = |m: &str| CodecError::Format(m.to_string());
        if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
            return Err(bad("missing DPVQ header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let width = u32_at(4);
        let height = u32_at(8);
        let n_cb = u16::from_le_bytes([bytes[12], bytes[13]]) as usize;
        let sigma_step = f32::from_le_bytes(bytes[14..18].try_into().expect("4 bytes"));
        if n_cb > 256 {
            return Err(bad("codebook larger than 256 entries"));
        }
        if width % 4 != 0 || height % 4 != 0 {
            return Err(bad("dimensions are not multiples of 4"));
        }
        let blocks = (width as usize / 4) * (height as usize / 4);
        let want = HEADER_LEN + n_cb * 64 + blocks * 3 + 2 * blocks;
        if bytes.len() != want {
            return Err(CodecError::Format(format!("expected {want} bytes, got {}", bytes.len())));
        }
        let floats = &bytes[HEADER_LEN..HEADER_LEN + n_cb * 64];
        let codebook: Vec<Block> = floats
            .chunks(64)
            .map(|c| std::array::from_fn(|j| f32::from_le_bytes(c[4 * j..4 * j + 4].try_into().expect("4 bytes"))))
            .collect();
        let mut at = HEADER_LEN + n_cb * 64;
        let records: Vec<[u8; 3]> = bytes[at..at + 3 * blocks].chunks(3).map(|r| [r[0], r[1], r[2]]).collect();
        at += 3 * blocks;
        let cb = bytes[at..at + blocks].to_vec();
        let cr = bytes[at + blocks..].to_vec();
        if records.iter().any(|r| n_cb > 0 && r[2] as usize >= n_cb) {
            return Err(bad("codebook index out of range"));
        }
        Ok(Compressed { width, height, sigma_step, codebook, records, cb, cr })
    }
}

fn float(t: &str) -> DataType {
    t.parse().expect("valid type name")
}

fn point_in(name: &str, ty: &str) -> (String, PointSpec) {
    (name.to_string(), PointSpec::input(float(ty)))
}

fn point_out(name: &str, ty: &str) -> (String, PointSpec) {
    (name.to_string(), PointSpec::output(float(ty)))
}

const YCC: &str = "int i = get_global_id(0);
float r = rgb[i].x;
float g = rgb[i].y;
float b = rgb[i].z;
y[i] = 0.299f*r + 0.587f*g + 0.114f*b;
cb[i] = 128.0f - 0.168736f*r - 0.331264f*g + 0.5f*b;
cr[i] = 128.0f + 0.5f*r - 0.418688f*g - 0.081312f*b;
";

const DOWN: &str = "int i = get_global_id(0);
float16 v = c[i];
float s = v.s0 + v.s1 + v.s2 + v.s3 + v.s4 + v.s5 + v.s6 + v.s7
        + v.s8 + v.s9 + v.sA + v.sB + v.sC + v.sD + v.sE + v.sF;
m[i] = s * 0.0625f;
";

/// Forward differences in x and y with the far border clamped, for a frame
/// of `width`×`height` pixels in block-raster order.
fn grad_source(width: usize, height: usize) -> String {
    let bw = width / 4;
    format!(
        "int i = get_global_id(0);
int blk = i / 16;
int o = i % 16;
int x = (blk % {bw})*4 + o % 4;
int y = (blk / {bw})*4 + o / 4;
int xr = min(x + 1, {xmax});
int yd = min(y + 1, {ymax});
int ir = ((y / 4)*{bw} + xr / 4)*16 + (y % 4)*4 + xr % 4;
int id = ((yd / 4)*{bw} + x / 4)*16 + (yd % 4)*4 + x % 4;
float c = v[i];
l[i] = c;
g[i] = (float2)(v[ir] - c, v[id] - c);
",
        xmax = width - 1,
        ymax = height - 1,
    )
}

/// Steps 1 to 3: colour conversion, chroma downscale and luminance gradient.
pub fn analysis_program(width: usize, height: usize) -> Program {
    let ycc = Node::new(
        YCC,
        [
            (String::from("rgb"), PointSpec::input(DataType::vector(ScalarType::UChar, 4).expect("uchar4"))),
            point_out("y", "float"),
            point_out("cb", "float"),
            point_out("cr", "float"),
        ],
    );
    let down = Node::new(DOWN, [point_in("c", "float16"), point_out("m", "float")]);
    let grad = Node::new(grad_source(width, height), [point_in("v", "float"), point_out("l", "float"), point_out("g", "float2")]);
    Program {
        arrows: vec![
            Arrow::new(Endpoint::new(0, "cb"), Endpoint::new(1, "c")),
            Arrow::new(Endpoint::new(0, "cr"), Endpoint::new(2, "c")),
            Arrow::new(Endpoint::new(0, "y"), Endpoint::new(3, "v")),
        ],
        kernels: [("ycc".to_string(), ycc), ("down".to_string(), down), ("grad".to_string(), grad)].into(),
        nodes: vec![
            Instance { id: 0, kernel: "ycc".into() },
            Instance { id: 1, kernel: "down".into() },
            Instance { id: 2, kernel: "down".into() },
            Instance { id: 3, kernel: "grad".into() },
        ],
    }
}

fn float16_literal(c: &Block) -> String {
    let parts: Vec<String> = c.iter().map(|v| format!("{v:?}f")).collect();
    format!("(float16)({})", parts.join(", "))
}

/// Step 5 kernel: index of the nearest codeword to each normalized block.
pub fn encode_source(codebook: &[Block]) -> String {
    let mut s = String::from("int i = get_global_id(0);\nfloat16 v = n[i];\n");
    let _ = writeln!(s, "float16 d = v - {};", float16_literal(&codebook[0]));
    s.push_str("float best = dot(d, d);\nint k = 0;\nfloat e;\n");
    for (j, c) in codebook.iter().enumerate().skip(1) {
        let _ = writeln!(s, "d = v - {};\ne = dot(d, d);\nif (e < best) {{ best = e; k = {j}; }}", float16_literal(c));
    }
    s.push_str("idx[i] = k;\n");
    s
}

pub fn encode_program(codebook: &[Block]) -> Program {
    let node = Node::new(
        encode_source(codebook),
        [point_in("n", "float16"), (String::from("idx"), PointSpec::output(DataType::scalar(ScalarType::UChar)))],
    );
    Program { arrows: vec![], kernels: [("encode".to_string(), node)].into(), nodes: vec![Instance { id: 0, kernel: "encode".into() }] }
}

/// RGB(0) quadruples in block-raster order.
pub fn block_raster(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.width * img.height * 4);
    for by in 0..img.height / 4 {
        for bx in 0..img.width / 4 {
            for oy in 0..4 {
                for ox in 0..4 {
                    let p = img.pixel(bx * 4 + ox, by * 4 + oy);
                    out.extend_from_slice(&[p[0], p[1], p[2], 0]);
                }
            }
        }
    }
    out
}

fn take_f32(out: &mut Streams, name: &str) -> Result<Vec<f32>, CodecError> {
    match out.remove(name).map(|s| s.buffer) {
        Some(Buffer::Float(v)) => Ok(v),
        _ => Err(CodecError::BadOutput(format!("missing float stream '{name}'"))),
    }
}

fn quantize(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Per-block statistics from the analysis program.
struct BlockStats {
    mean: f64,
    sigma: f64,
    grad: f64,
}

pub fn compress(img: &Image, n_cb: usize, seed: u64, exec: &dyn Executor) -> Result<Compressed, CodecError> {
    let (w, h) = (img.width, img.height);
    if w == 0 || h == 0 || w % 4 != 0 || h % 4 != 0 {
        return Err(CodecError::Dimensions(w, h));
    }
    if !(1..=256).contains(&n_cb) {
        return Err(CodecError::CodebookSize(n_cb));
    }
    let blocks = w * h / 16;
    let pixels = StreamData::new(DataType::vector(ScalarType::UChar, 4).expect("uchar4"), Buffer::UChar(block_raster(img)));
    let mut out = exec.execute(&analysis_program(w, h), [("0.rgb".to_string(), pixels)].into(), Some(w * h))?;
    let cb = take_f32(&mut out, "1.m")?;
    let cr = take_f32(&mut out, "2.m")?;
    let luma = take_f32(&mut out, "3.l")?;
    let grad = take_f32(&mut out, "3.g")?;
    if cb.len() != blocks || cr.len() != blocks || luma.len() != w * h || grad.len() != 2 * w * h {
        return Err(CodecError::BadOutput("analysis streams have the wrong length".into()));
    }

    let stats: Vec<BlockStats> = (0..blocks)
        .map(|b| {
            let px = &luma[16 * b..16 * b + 16];
            let mean = px.iter().map(|&v| v as f64).sum::<f64>() / 16.0;
            let var = px.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / 16.0;
            let g = grad[32 * b..32 * b + 32].chunks(2).map(|d| ((d[0] as f64).powi(2) + (d[1] as f64).powi(2)).sqrt()).sum::<f64>() / 16.0;
            BlockStats { mean, sigma: var.sqrt(), grad: g }
        })
        .collect();
    let sigma_index = |s: f64| (s / SIGMA_STEP as f64).round().clamp(0.0, 255.0) as u8;
    let normalized: Vec<Block> = (0..blocks)
        .map(|b| {
            let s = &stats[b];
            if sigma_index(s.sigma) == 0 {
                return [0.0; 16];
            }
            std::array::from_fn(|j| ((luma[16 * b + j] as f64 - s.mean) / s.sigma) as f32)
        })
        .collect();
    let training: Vec<Block> = (0..blocks)
        .filter(|&b| sigma_index(stats[b].sigma) > 0 && stats[b].grad >= G_MIN as f64)
        .map(|b| normalized[b])
        .collect();
    let codebook = kmeans(&training, n_cb.min(training.len()), seed, MAX_ITER)?.centroids;

    let indices: Vec<u8> = if codebook.is_empty() {
        vec![0; blocks]
    } else {
        let flat: Vec<f32> = normalized.iter().flatten().copied().collect();
        let mut enc = exec.execute(&encode_program(&codebook), [("0.n".to_string(), StreamData::from_f32(float("float16"), flat))].into(), None)?;
        match enc.remove("0.idx").map(|s| s.buffer) {
            Some(Buffer::UChar(v)) if v.len() == blocks => v,
            _ => return Err(CodecError::BadOutput("encode stream".into())),
        }
    };

    let records = (0..blocks).map(|b| [quantize(stats[b].mean as f32), sigma_index(stats[b].sigma), indices[b]]).collect();
    Ok(Compressed {
        width: w as u32,
        height: h as u32,
        sigma_step: SIGMA_STEP,
        codebook,
        records,
        cb: cb.iter().map(|&v| quantize(v)).collect(),
        cr: cr.iter().map(|&v| quantize(v)).collect(),
    })
}

pub fn decompress(c: &Compressed) -> Image {
    let (w, h) = (c.width as usize, c.height as usize);
    let bw = w / 4;
    let mut rgb = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let b = (y / 4) * bw + x / 4;
            let [mu, si, ci] = c.records[b];
            let offset = (y % 4) * 4 + x % 4;
            let mut luma = mu as f32;
            if si > 0 {
                if let Some(cw) = c.codebook.get(ci as usize) {
                    luma += si as f32 * c.sigma_step * cw[offset];
                }
            }
            let cb = c.cb[b] as f32 - 128.0;
            let cr = c.cr[b] as f32 - 128.0;
            let px = [luma + 1.402 * cr, luma - 0.344136 * cb - 0.714136 * cr, luma + 1.772 * cb];
            let i = 3 * (y * w + x);
            for k in 0..3 {
                rgb[i + k] = quantize(px[k]);
            }
        }
    }
    Image::new(w, h, rgb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::image::{procedural, psnr};
    use crate::engine::{plan, race_check, Chunk};
    use crate::executor::LocalExecutor;

    fn exec() -> LocalExecutor {
        LocalExecutor::default()
    }

    #[test]
    fn programs_validate_with_expected_streams() {
        let p = analysis_program(16, 8);
        assert!(p.validate().is_ok(), "{}", p.validate());
        let names: Vec<String> = p.free_points().iter().map(|f| f.stream_name()).collect();
        assert_eq!(names, ["0.rgb", "1.m", "2.m", "3.g", "3.l"]);
        let plan = plan(&p, 128).unwrap();
        assert_eq!(plan.work_items_by_instance(), [(0, 128), (1, 8), (2, 8), (3, 128)].into());
        let e = encode_program(&[[0.5; 16], [-0.5; 16]]);
        assert!(e.validate().is_ok(), "{}", e.validate());
    }

    #[test]
    fn analysis_matches_host_formulas() {
        let img = procedural(8, 8, 3);
        let mut out = exec()
            .execute(
                &analysis_program(8, 8),
                [("0.rgb".into(), StreamData::new(DataType::vector(ScalarType::UChar, 4).unwrap(), Buffer::UChar(block_raster(&img))))].into(),
                Some(64),
            )
            .unwrap();
        let luma = take_f32(&mut out, "3.l").unwrap();
        let grad = take_f32(&mut out, "3.g").unwrap();
        let cb = take_f32(&mut out, "1.m").unwrap();
        let y_at = |x: usize, y: usize| {
            let [r, g, b] = img.pixel(x, y).map(|v| v as f64);
            0.299 * r + 0.587 * g + 0.114 * b
        };
        // pixel (5, 6) lives in block (1, 1), offset 2*4+1
        let i = 3 * 16 + 2 * 4 + 1;
        assert!((luma[i] as f64 - y_at(5, 6)).abs() < 1e-3);
        assert!((grad[2 * i] as f64 - (y_at(6, 6) - y_at(5, 6))).abs() < 1e-3);
        assert!((grad[2 * i + 1] as f64 - (y_at(5, 7) - y_at(5, 6))).abs() < 1e-3);
        // right and bottom borders are clamped: zero difference
        let corner = 3 * 16 + 15;
        assert_eq!(grad[2 * corner], 0.0);
        assert_eq!(grad[2 * corner + 1], 0.0);
        let cb_host: f64 = (0..4)
            .flat_map(|y| (4..8).map(move |x| (x, y)))
            .map(|(x, y)| {
                let [r, g, b] = img.pixel(x, y).map(|v| v as f64);
                128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
            })
            .sum::<f64>()
            / 16.0;
        assert!((cb[1] as f64 - cb_host).abs() < 1e-3);
    }

    #[test]
    fn encode_kernel_picks_nearest_codeword() {
        let codebook: Vec<Block> = (0..5).map(|k| std::array::from_fn(|j| ((k * 7 + j * 3) % 11) as f32 / 5.0 - 1.0)).collect();
        let blocks: Vec<Block> = (0..40).map(|k| std::array::from_fn(|j| ((k * 13 + j * 5) % 17) as f32 / 8.0 - 1.0)).collect();
        let flat: Vec<f32> = blocks.iter().flatten().copied().collect();
        let out = exec().execute(&encode_program(&codebook), [("0.n".into(), StreamData::from_f32(float("float16"), flat))].into(), None).unwrap();
        let Buffer::UChar(idx) = &out["0.idx"].buffer else { panic!() };
        for (b, &i) in blocks.iter().zip(idx) {
            assert_eq!(i as usize, super::super::kmeans::nearest(b, &codebook).0);
        }
        let plan = plan(&encode_program(&codebook), 40).unwrap();
        let chunk = Chunk::new(0, [("0.n".to_string(), StreamData::from_f32(float("float16"), vec![0.0; 640]))].into());
        assert!(race_check(&plan, &chunk).is_clean());
    }

    #[test]
    fn gray_image_is_lossless() {
        let img = Image::filled(16, 8, [77, 77, 77]);
        let c = compress(&img, 4, 1, &exec()).unwrap();
        assert!(c.codebook.is_empty());
        assert!(c.records.iter().all(|r| r[1] == 0 && r[0] == 77));
        assert_eq!(decompress(&c), img);
    }

    #[test]
    fn single_block() {
        let img = Image::new(4, 4, (0..48).map(|v| (v * 5) as u8).collect());
        let c = compress(&img, 1, 0, &exec()).unwrap();
        assert_eq!(c.records.len(), 1);
        let mean_y: f64 = (0..16)
            .map(|p| {
                let [r, g, b] = img.pixel(p % 4, p / 4).map(|v| v as f64);
                0.299 * r + 0.587 * g + 0.114 * b
            })
            .sum::<f64>()
            / 16.0;
        assert!((c.records[0][0] as f64 - mean_y).abs() <= 0.5 + 1e-6);
    }

    #[test]
    fn container_round_trip_and_size() {
        let img = procedural(64, 32, 5);
        let c = compress(&img, 16, 2, &exec()).unwrap();
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), 18 + c.codebook.len() * 64 + 128 * 3 + 2 * 128);
        assert_eq!(Compressed::from_bytes(&bytes).unwrap(), c);
        assert!(Compressed::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Compressed::from_bytes(b"nope").is_err());
        assert!(psnr(&img, &decompress(&c)) > 25.0);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(compress(&Image::filled(6, 4, [0; 3]), 4, 0, &exec()), Err(CodecError::Dimensions(6, 4))));
        assert!(matches!(compress(&Image::filled(4, 4, [0; 3]), 0, 0, &exec()), Err(CodecError::CodebookSize(0))));
    }
}
