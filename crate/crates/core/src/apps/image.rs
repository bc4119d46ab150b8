//! 8-bit RGB images, binary PPM and PSNR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major interleaved RGB.
    pub rgb: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PpmError {
    #[error("not a binary PPM (P6) file")]
    Magic,
    #[error("malformed PPM header: {0}")]
    Header(String),
    #[error("only maxval 255 is supported, got {0}")]
    Maxval(u32),
    #[error("pixel data has {got} bytes, expected {want}")]
    Truncated { got: usize, want: usize },
}

impl Image {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Image {
        assert_eq!(rgb.len(), width * height * 3, "RGB buffer size");
        Image { width, height, rgb }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Image {
        Image::new(width, height, rgb.iter().copied().cycle().take(width * height * 3).collect())
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Image, PpmError> {
        if !bytes.starts_with(b"P6") {
            return Err(PpmError::Magic);
        }
        let mut pos = 2;
        let mut fields = [0u32; 3];
        for f in &mut fields {
            // skip whitespace and comments
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    _ => break,
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            let text = std::str::from_utf8(&bytes[start..pos]).expect("ASCII digits");
            *f = text.parse().map_err(|_| PpmError::Header(format!("expected a number at byte {start}")))?;
        }
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(PpmError::Header("missing whitespace after maxval".into()));
        }
        pos += 1;
        let [w, h, maxval] = fields;
        if maxval != 255 {
            return Err(PpmError::Maxval(maxval));
        }
        let want = w as usize * h as usize * 3;
        let data = &bytes[pos..];
        if data.len() < want {
            return Err(PpmError::Truncated { got: data.len(), want });
        }
        Ok(Image::new(w as usize, h as usize, data[..want].to_vec()))
    }
}

/// Peak signal-to-noise ratio over all RGB samples in dB; infinite for
/// identical images.
pub fn psnr(a: &Image, b: &Image) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height), "image dimensions differ");
    let se: f64 = a.rgb.iter().zip(&b.rgb).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    if se == 0.0 {
        return f64::INFINITY;
    }
    let mse = se / a.rgb.len() as f64;
    10.0 * (255.0f64 * 255.0 / mse).log10()
}

/// Seeded synthetic photograph-like scene: a sky-to-ground gradient, soft
/// discs, a few rectangles, a ripple texture and mild noise.
pub fn procedural(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = [rng.random_range(60.0..140.0), rng.random_range(100.0..180.0), rng.random_range(170.0..240.0)];
    let bottom = [rng.random_range(60.0..140.0), rng.random_range(80.0..140.0), rng.random_range(20.0..80.0)];
    let discs: Vec<([f32; 2], f32, [f32; 3])> = (0..9)
        .map(|_| {
            (
                [rng.random_range(0.0..width as f32), rng.random_range(0.0..height as f32)],
                rng.random_range(0.04..0.18) * width.min(height) as f32,
                [rng.random_range(0.0..255.0), rng.random_range(0.0..255.0), rng.random_range(0.0..255.0)],
            )
        })
        .collect();
    let rects: Vec<([f32; 4], [f32; 3])> = (0..5)
        .map(|_| {
            let x0 = rng.random_range(0.0..width as f32 * 0.8);
            let y0 = rng.random_range(0.0..height as f32 * 0.8);
            (
                [x0, y0, x0 + rng.random_range(20.0..120.0), y0 + rng.random_range(20.0..120.0)],
                [rng.random_range(0.0..255.0), rng.random_range(0.0..255.0), rng.random_range(0.0..255.0)],
            )
        })
        .collect();
    let freq = rng.random_range(0.05..0.12);
    let mut rgb = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let t = y as f32 / height.max(1) as f32;
            let mut c: [f32; 3] = std::array::from_fn(|i| top[i] * (1.0 - t) + bottom[i] * t);
            let ripple = 10.0 * ((x as f32 * freq).sin() * (y as f32 * freq * 0.7).cos());
            for v in &mut c {
                *v += ripple;
            }
            for (centre, r, col) in &discs {
                let d = ((x as f32 - centre[0]).powi(2) + (y as f32 - centre[1]).powi(2)).sqrt();
                // smooth edge two pixels wide
                let a = ((r - d) / 2.0).clamp(0.0, 1.0) * 0.85;
                for i in 0..3 {
                    c[i] = c[i] * (1.0 - a) + col[i] * a;
                }
            }
            for (b, col) in &rects {
                if (x as f32) >= b[0] && (x as f32) < b[2] && (y as f32) >= b[1] && (y as f32) < b[3] {
                    for i in 0..3 {
                        c[i] = c[i] * 0.3 + col[i] * 0.7;
                    }
                }
            }
            let noise = rng.random_range(-3.0f32..3.0);
            rgb.extend(c.iter().map(|v| (v + noise).round().clamp(0.0, 255.0) as u8));
        }
    }
    Image::new(width, height, rgb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_with_comments() {
        let img = procedural(8, 4, 1);
        assert_eq!(Image::from_ppm(&img.to_ppm()).unwrap(), img);
        let mut commented = b"P6\n# made by hand\n8 4\n# depth\n255\n".to_vec();
        commented.extend_from_slice(&img.rgb);
        assert_eq!(Image::from_ppm(&commented).unwrap(), img);
        assert_eq!(Image::from_ppm(b"P3\n1 1\n255\n"), Err(PpmError::Magic));
        assert_eq!(Image::from_ppm(b"P6\n1 1\n65535\n"), Err(PpmError::Maxval(65535)));
        assert_eq!(Image::from_ppm(b"P6\n2 1\n255\nabc"), Err(PpmError::Truncated { got: 3, want: 6 }));
    }

    #[test]
    fn psnr_examples() {
        let a = procedural(16, 16, 2);
        assert_eq!(psnr(&a, &a), f64::INFINITY);
        assert_eq!(psnr(&Image::filled(4, 4, [0; 3]), &Image::filled(4, 4, [255; 3])), 0.0);
        // a single sample off by 1 in a 1x1 image: MSE 1/3
        let b = Image::new(1, 1, vec![10, 10, 10]);
        let c = Image::new(1, 1, vec![10, 11, 10]);
        assert!((psnr(&b, &c) - 10.0 * (3.0f64 * 65025.0).log10()).abs() < 1e-12);
    }

    #[test]
    fn procedural_is_seeded() {
        assert_eq!(procedural(32, 32, 7), procedural(32, 32, 7));
        assert_ne!(procedural(32, 32, 7), procedural(32, 32, 8));
    }
}
