//! Binary data-plane protocol. All integers little-endian.
//!
//! ```text
//! handshake  "DPP1" u16 len, run id
//! reply      "DPOK" | "DPER" u16 len, message
//! DATA  (0)  u16 len, stream name, u64 chunk index, u32 element count, u32 payload len, payload
//! END   (1)  u16 len, stream name
//! ERROR (2)  u16 len, message
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::engine::Chunk;
use crate::types::{Buffer, DataType, StreamData};

pub const HANDSHAKE: [u8; 4] = *b"DPP1";
pub const REPLY_OK: [u8; 4] = *b"DPOK";
pub const REPLY_ERR: [u8; 4] = *b"DPER";

const DATA: u8 = 0;
const END: u8 = 1;
const ERROR: u8 = 2;

/// Largest DATA payload accepted.
pub const MAX_PAYLOAD: usize = 1 << 28;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unknown frame type {0}")]
    UnknownFrame(u8),
    #[error("payload of {0} bytes exceeds the frame limit")]
    TooLarge(usize),
    #[error("string is not UTF-8")]
    Utf8,
    #[error("string of {0} bytes does not fit a u16 length")]
    LongString(usize),
    #[error("connection closed inside a frame")]
    Truncated,
}

impl WireError {
    /// Whether the failure came from the transport rather than the peer's
    /// bytes.
    pub fn is_io(&self) -> bool {
        matches!(self, WireError::Io(_) | WireError::Truncated)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Data { stream: String, chunk: u64, count: u32, payload: Vec<u8> },
    End { stream: String },
    Error { message: String },
}

impl Frame {
    pub fn data(stream: &str, chunk: u64, data: &StreamData) -> Frame {
        Frame::Data { stream: stream.to_string(), chunk, count: data.count() as u32, payload: data.buffer.to_le_bytes() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Ok(String),
    Err(String),
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<(), WireError> {
    let len = u16::try_from(s.len()).map_err(|_| WireError::LongString(s.len()))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<(), WireError> {
    r.read_exact(buf).map_err(|e| if e.kind() == io::ErrorKind::UnexpectedEof { WireError::Truncated } else { e.into() })
}

fn get_str(r: &mut impl Read) -> Result<String, WireError> {
    let mut len = [0u8; 2];
    read_exact_or_truncated(r, &mut len)?;
    let mut buf = vec![0u8; u16::from_le_bytes(len) as usize];
    read_exact_or_truncated(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| WireError::Utf8)
}

fn get_magic(r: &mut impl Read) -> Result<[u8; 4], WireError> {
    let mut m = [0u8; 4];
    read_exact_or_truncated(r, &mut m)?;
    Ok(m)
}

pub fn write_handshake(w: &mut impl Write, run_id: &str) -> Result<(), WireError> {
    let mut out = HANDSHAKE.to_vec();
    put_str(&mut out, run_id)?;
    w.write_all(&out)?;
    w.flush()?;
    Ok(())
}

pub fn read_handshake(r: &mut impl Read) -> Result<String, WireError> {
    let m = get_magic(r)?;
    if m != HANDSHAKE {
        return Err(WireError::BadMagic(m));
    }
    get_str(r)
}

pub fn write_reply(w: &mut impl Write, reply: &Reply) -> Result<(), WireError> {
    let (magic, msg) = match reply {
        Reply::Ok(m) => (REPLY_OK, m),
        Reply::Err(m) => (REPLY_ERR, m),
    };
    let mut out = magic.to_vec();
    put_str(&mut out, msg)?;
    w.write_all(&out)?;
    w.flush()?;
    Ok(())
}

pub fn read_reply(r: &mut impl Read) -> Result<Reply, WireError> {
    let m = get_magic(r)?;
    let msg = get_str(r)?;
    match m {
        REPLY_OK => Ok(Reply::Ok(msg)),
        REPLY_ERR => Ok(Reply::Err(msg)),
        other => Err(WireError::BadMagic(other)),
    }
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    match frame {
        Frame::Data { stream, chunk, count, payload } => {
            if payload.len() > MAX_PAYLOAD {
                return Err(WireError::TooLarge(payload.len()));
            }
            out.reserve(19 + stream.len() + payload.len());
            out.push(DATA);
            put_str(&mut out, stream)?;
            out.extend_from_slice(&chunk.to_le_bytes());
            out.extend_from_slice(&count.to_le_bytes());
            out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
            out.extend_from_slice(payload);
        }
        Frame::End { stream } => {
            out.push(END);
            put_str(&mut out, stream)?;
        }
        Frame::Error { message } => {
            out.push(ERROR);
            // messages are truncated on a character boundary to fit
            let mut end = message.len().min(u16::MAX as usize);
            while !message.is_char_boundary(end) {
                end -= 1;
            }
            put_str(&mut out, &message[..end])?;
        }
    }
    Ok(out)
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<(), WireError> {
    w.write_all(&encode_frame(frame)?)?;
    Ok(())
}

/// Reads one frame; `None` on a clean end of input between frames.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>, WireError> {
    let mut ty = [0u8; 1];
    loop {
        match r.read(&mut ty) {
            Ok(0) => return Ok(None),
            Ok(_) => break,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    match ty[0] {
        DATA => {
            let stream = get_str(r)?;
            let mut head = [0u8; 16];
            read_exact_or_truncated(r, &mut head)?;
            let chunk = u64::from_le_bytes(head[0..8].try_into().expect("8 bytes"));
            let count = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes"));
            let len = u32::from_le_bytes(head[12..16].try_into().expect("4 bytes")) as usize;
            if len > MAX_PAYLOAD {
                return Err(WireError::TooLarge(len));
            }
            let mut payload = vec![0u8; len];
            read_exact_or_truncated(r, &mut payload)?;
            Ok(Some(Frame::Data { stream, chunk, count, payload }))
        }
        END => Ok(Some(Frame::End { stream: get_str(r)? })),
        ERROR => Ok(Some(Frame::Error { message: get_str(r)? })),
        other => Err(WireError::UnknownFrame(other)),
    }
}

/// Writes every stream of `chunk` as DATA frames in stream-name order.
pub fn write_chunk(w: &mut impl Write, chunk: &Chunk) -> Result<(), WireError> {
    for (name, data) in &chunk.streams {
        write_frame(w, &Frame::data(name, chunk.index, data))?;
    }
    Ok(())
}

/// Reassembles chunks from DATA/END frames of a fixed set of typed streams.
///
/// All streams' frames for chunk `i` must arrive before any frame of chunk
/// `i + 1`, chunk indices count up from 0, and END is only accepted between
/// chunks.
#[derive(Debug)]
pub struct ChunkAssembler {
    types: BTreeMap<String, DataType>,
    next: u64,
    pending: BTreeMap<String, StreamData>,
    ended: BTreeSet<String>,
}

impl ChunkAssembler {
    pub fn new(types: BTreeMap<String, DataType>) -> ChunkAssembler {
        ChunkAssembler { types, next: 0, pending: BTreeMap::new(), ended: BTreeSet::new() }
    }

    /// Chunks completed so far.
    pub fn chunks(&self) -> u64 {
        self.next
    }

    pub fn finished(&self) -> bool {
        self.ended.len() == self.types.len()
    }

    /// Feeds a DATA or END frame; returns a chunk once every stream has
    /// delivered its part.
    pub fn push(&mut self, frame: Frame) -> Result<Option<Chunk>, String> {
        match frame {
            Frame::Data { stream, chunk, count, payload } => {
                let ty = *self.types.get(&stream).ok_or_else(|| format!("unknown stream '{stream}'"))?;
                if self.ended.contains(&stream) {
                    return Err(format!("DATA on stream '{stream}' after its END"));
                }
                if chunk != self.next {
                    return Err(format!("stream '{stream}': expected chunk {}, got chunk {chunk}", self.next));
                }
                if self.pending.contains_key(&stream) {
                    return Err(format!("stream '{stream}' sent chunk {chunk} twice"));
                }
                let expect = count as usize * ty.byte_size();
                if payload.len() != expect {
                    return Err(format!(
                        "stream '{stream}' chunk {chunk}: {count} elements of {ty} need {expect} bytes, got {}",
                        payload.len()
                    ));
                }
                let buffer = Buffer::from_le_bytes(ty.base, &payload).map_err(|e| e.to_string())?;
                self.pending.insert(stream, StreamData::new(ty, buffer));
                if self.pending.len() < self.types.len() {
                    return Ok(None);
                }
                let streams = std::mem::take(&mut self.pending);
                let c = Chunk::new(self.next, streams);
                self.next += 1;
                Ok(Some(c))
            }
            Frame::End { stream } => {
                if !self.types.contains_key(&stream) {
                    return Err(format!("END for unknown stream '{stream}'"));
                }
                if !self.pending.is_empty() {
                    return Err(format!("END on stream '{stream}' inside chunk {}", self.next));
                }
                if !self.ended.insert(stream.clone()) {
                    return Err(format!("stream '{stream}' ended twice"));
                }
                Ok(None)
            }
            Frame::Error { message } => Err(message),
        }
    }
}
