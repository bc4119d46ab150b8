//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Everything runs on the in-process executor with one thread; browsers
//! without shared memory cannot spawn the scoped workers.

use dpp_core::apps::{codec, fft, image};
use dpp_core::{parse_program, LocalExecutor};
use num_complex::Complex32;
use wasm_bindgen::prelude::*;

fn exec() -> LocalExecutor {
    LocalExecutor::new(1)
}

/// Validation verdict and id of a program document, as JSON text:
/// `{"ok":bool,"id":hex,"canonical":text,"violations":[text]}`.
pub fn inspect(doc: &str) -> Result<String, String> {
    let p = parse_program(doc.as_bytes()).map_err(|e| e.to_string())?;
    let report = p.validate();
    let v = serde_json::json!({
        "ok": report.is_ok(),
        "id": p.id(),
        "canonical": String::from_utf8_lossy(&dpp_core::serialize_program(&p)),
        "violations": report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
    });
    Ok(v.to_string())
}

/// Magnitude spectrum of `re + i·im`, computed with leaf DFTs of 2^k points.
pub fn spectrum(re: &[f32], im: &[f32], k: u32) -> Result<Vec<f32>, String> {
    if re.len() != im.len() {
        return Err(format!("re has {} samples, im has {}", re.len(), im.len()));
    }
    let x: Vec<Complex32> = re.iter().zip(im).map(|(&a, &b)| Complex32::new(a, b)).collect();
    let y = fft::fft(&x, k, &exec()).map_err(|e| e.to_string())?;
    Ok(y.iter().map(|c| c.norm()).collect())
}

/// Outcome of compressing and decoding one image.
#[wasm_bindgen]
pub struct CodecResult {
    raw_bytes: usize,
    compressed_bytes: usize,
    codewords: usize,
    psnr: f64,
    decoded: Vec<u8>,
}

#[wasm_bindgen]
impl CodecResult {
    #[wasm_bindgen(getter)]
    pub fn raw_bytes(&self) -> usize {
        self.raw_bytes
    }

    #[wasm_bindgen(getter)]
    pub fn compressed_bytes(&self) -> usize {
        self.compressed_bytes
    }

    #[wasm_bindgen(getter)]
    pub fn codewords(&self) -> usize {
        self.codewords
    }

    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.psnr
    }

    /// Decoded image as RGBA, ready for `ImageData`.
    pub fn decoded_rgba(&self) -> Vec<u8> {
        rgb_to_rgba(&self.decoded)
    }
}

pub fn round_trip(width: usize, height: usize, rgba: &[u8], codebook: usize, seed: u64) -> Result<CodecResult, String> {
    if rgba.len() != width * height * 4 {
        return Err(format!("{} bytes for a {width}x{height} RGBA image", rgba.len()));
    }
    let rgb: Vec<u8> = rgba.chunks(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
    let img = image::Image::new(width, height, rgb);
    let c = codec::compress(&img, codebook, seed, &exec()).map_err(|e| e.to_string())?;
    let bytes = c.to_bytes();
    // decode from the container bytes, as a receiver would
    let back = codec::decompress(&codec::Compressed::from_bytes(&bytes).map_err(|e| e.to_string())?);
    Ok(CodecResult {
        raw_bytes: width * height * 3,
        compressed_bytes: bytes.len(),
        codewords: c.codebook.len(),
        psnr: image::psnr(&img, &back),
        decoded: back.rgb,
    })
}

fn rgb_to_rgba(rgb: &[u8]) -> Vec<u8> {
    rgb.chunks(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect()
}

#[wasm_bindgen(js_name = inspectProgram)]
pub fn inspect_program(doc: &str) -> Result<String, JsError> {
    inspect(doc).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fftSpectrum)]
pub fn fft_spectrum(re: &[f32], im: &[f32], k: u32) -> Result<Vec<f32>, JsError> {
    spectrum(re, im, k).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = codecRoundTrip)]
pub fn codec_round_trip(width: usize, height: usize, rgba: &[u8], codebook: usize, seed: u64) -> Result<CodecResult, JsError> {
    round_trip(width, height, rgba, codebook, seed).map_err(|e| JsError::new(&e))
}

/// Seeded synthetic scene as RGBA.
#[wasm_bindgen(js_name = demoImage)]
pub fn demo_image(width: usize, height: usize, seed: u64) -> Vec<u8> {
    rgb_to_rgba(&image::procedural(width, height, seed).rgb)
}

/// The fan-rot-adder program from the fixtures, pretty-printed for editing.
#[wasm_bindgen(js_name = sampleProgram)]
pub fn sample_program() -> String {
    let v: serde_json::Value = serde_json::from_str(dpp_core::fixtures::FAN_ROT_ADDER).expect("fixture is JSON");
    serde_json::to_string_pretty(&v).expect("JSON value")
}

#[cfg(test)]
mod tests {
    use super::*;
    use dpp_core::fixtures::{FAN_ROT_ADDER, FAN_ROT_ADDER_FLOAT_SHIFT};
    use dpp_core::Program;

    #[test]
    fn inspect_reports_id_and_violations() {
        let v: serde_json::Value = serde_json::from_str(&inspect(FAN_ROT_ADDER).unwrap()).unwrap();
        assert_eq!(v["ok"], true);
        assert_eq!(v["id"], Program::from_json(FAN_ROT_ADDER).unwrap().id());
        let v: serde_json::Value = serde_json::from_str(&inspect(FAN_ROT_ADDER_FLOAT_SHIFT).unwrap()).unwrap();
        assert_eq!(v["ok"], false);
        assert!(v["violations"][0].as_str().unwrap().contains("shift requires integer operands"));
        assert!(inspect("{").is_err());
        assert_eq!(inspect(&sample_program()).unwrap(), inspect(FAN_ROT_ADDER).unwrap());
    }

    #[test]
    fn spectrum_of_a_pure_tone() {
        let n = 64;
        let (re, im): (Vec<f32>, Vec<f32>) = (0..n)
            .map(|t| {
                let a = 2.0 * std::f32::consts::PI * 5.0 * t as f32 / n as f32;
                (a.cos(), a.sin())
            })
            .unzip();
        let s = spectrum(&re, &im, 3).unwrap();
        assert!((s[5] - n as f32).abs() < 1e-3, "{}", s[5]);
        assert!(s.iter().enumerate().all(|(i, &m)| i == 5 || m < 1e-3));
        assert!(spectrum(&re, &im[1..], 3).is_err());
        assert!(spectrum(&re[..48], &im[..48], 3).is_err());
    }

    #[test]
    fn codec_round_trip_matches_library() {
        let rgba = demo_image(32, 32, 2);
        let r = round_trip(32, 32, &rgba, 16, 1).unwrap();
        let img = image::procedural(32, 32, 2);
        let c = codec::compress(&img, 16, 1, &exec()).unwrap();
        assert_eq!(r.compressed_bytes, c.to_bytes().len());
        assert_eq!(r.decoded, codec::decompress(&c).rgb);
        assert_eq!(r.decoded_rgba().len(), rgba.len());
        assert!(r.psnr > 20.0);
        assert!(round_trip(32, 32, &rgba[4..], 16, 1).is_err());
    }
}
