//! Headered binary stream files.
//!
//! ```text
//! "DPS1"  u16 type-name length, type name, u64 element count, body
//! ```
//!
//! The body is the stream's flat little-endian scalars.

use std::fs;
use std::io;
use std::path::Path;

use dpp_core::{Buffer, DataType, StreamData};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"DPS1";

#[derive(Debug, Error)]
pub enum StreamFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("not a stream file (missing DPS1 header)")]
    Magic,
    #[error("truncated stream file header")]
    Header,
    #[error("unknown element type '{0}'")]
    Type(String),
    #[error("body holds {got} bytes, header promises {want}")]
    Length { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFile {
    pub data: StreamData,
}

impl StreamFile {
    pub fn new(data: StreamData) -> StreamFile {
        StreamFile { data }
    }

    pub fn data_type(&self) -> DataType {
        self.data.data
    }

    pub fn count(&self) -> usize {
        self.data.count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let name = self.data.data.to_string();
        let mut out = Vec::with_capacity(14 + name.len() + self.count() * self.data.data.byte_size());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        self.data.buffer.write_le(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<StreamFile, StreamFileError> {
        if bytes.len() < 6 || bytes[..4] != MAGIC {
            return Err(StreamFileError::Magic);
        }
        let name_len = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
        let head = 6 + name_len + 8;
        if bytes.len() < head {
            return Err(StreamFileError::Header);
        }
        let name = std::str::from_utf8(&bytes[6..6 + name_len]).map_err(|_| StreamFileError::Header)?;
        let ty: DataType = name.parse().map_err(|_| StreamFileError::Type(name.to_string()))?;
        let count = u64::from_le_bytes(bytes[6 + name_len..head].try_into().expect("8 bytes"));
        let body = &bytes[head..];
        let want = usize::try_from(count).ok().and_then(|c| c.checked_mul(ty.byte_size())).unwrap_or(usize::MAX);
        if body.len() != want {
            return Err(StreamFileError::Length { got: body.len(), want });
        }
        let buffer = Buffer::from_le_bytes(ty.base, body).map_err(|_| StreamFileError::Header)?;
        Ok(StreamFile { data: StreamData::new(ty, buffer) })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<StreamFile, StreamFileError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| StreamFileError::Io { path: path.display().to_string(), source })?;
        StreamFile::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), StreamFileError> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|source| StreamFileError::Io { path: path.display().to_string(), source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_round_trip() {
        let f = StreamFile::new(StreamData::from_f32("float2".parse().unwrap(), vec![1.0, 2.0]));
        let bytes = f.to_bytes();
        let mut want = b"DPS1\x06\x00float2".to_vec();
        want.extend_from_slice(&1u64.to_le_bytes());
        want.extend_from_slice(&1.0f32.to_le_bytes());
        want.extend_from_slice(&2.0f32.to_le_bytes());
        assert_eq!(bytes, want);
        assert_eq!(StreamFile::from_bytes(&bytes).unwrap(), f);
    }

    #[test]
    fn rejects_damaged_files() {
        let f = StreamFile::new(StreamData::new("short".parse().unwrap(), Buffer::Short(vec![1, -2, 3])));
        let bytes = f.to_bytes();
        assert!(matches!(StreamFile::from_bytes(&bytes[..bytes.len() - 1]), Err(StreamFileError::Length { got: 5, want: 6 })));
        assert!(matches!(StreamFile::from_bytes(b"DPS2"), Err(StreamFileError::Magic)));
        assert!(matches!(StreamFile::from_bytes(b"DPS1\x03\x00dbl\0\0\0\0\0\0\0\0"), Err(StreamFileError::Type(_))));
        assert!(matches!(StreamFile::from_bytes(b"DPS1\x05\x00float\0\0"), Err(StreamFileError::Header)));
    }
}
