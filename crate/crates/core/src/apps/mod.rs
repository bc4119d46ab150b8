//! The two bundled applications: a platform-offloaded FFT and a block
//! vector-quantization image codec.

pub mod codec;
pub mod fft;
pub mod image;
pub mod kmeans;
