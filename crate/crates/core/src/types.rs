//! Scalar and vector data types shared by programs, kernels and streams, plus
//! the flat typed buffers that carry stream data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Base scalar types available to kernels and points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarType {
    Char,
    UChar,
    Short,
    UShort,
    Int,
    UInt,
    Long,
    ULong,
    Float,
}

impl ScalarType {
    pub const ALL: [ScalarType; 9] = [
        ScalarType::Char,
        ScalarType::UChar,
        ScalarType::Short,
        ScalarType::UShort,
        ScalarType::Int,
        ScalarType::UInt,
        ScalarType::Long,
        ScalarType::ULong,
        ScalarType::Float,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::Char => "char",
            ScalarType::UChar => "uchar",
            ScalarType::Short => "short",
            ScalarType::UShort => "ushort",
            ScalarType::Int => "int",
            ScalarType::UInt => "uint",
            ScalarType::Long => "long",
            ScalarType::ULong => "ulong",
            ScalarType::Float => "float",
        }
    }

    pub fn from_name(name: &str) -> Option<ScalarType> {
        ScalarType::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn byte_size(self) -> usize {
        match self {
            ScalarType::Char | ScalarType::UChar => 1,
            ScalarType::Short | ScalarType::UShort => 2,
            ScalarType::Int | ScalarType::UInt | ScalarType::Float => 4,
            ScalarType::Long | ScalarType::ULong => 8,
        }
    }

    pub fn bits(self) -> u32 {
        self.byte_size() as u32 * 8
    }

    pub fn is_float(self) -> bool {
        self == ScalarType::Float
    }

    pub fn is_integer(self) -> bool {
        !self.is_float()
    }

    pub fn is_signed(self) -> bool {
        matches!(
            self,
            ScalarType::Char | ScalarType::Short | ScalarType::Int | ScalarType::Long | ScalarType::Float
        )
    }

    /// Integer conversion rank; float ranks above every integer.
    pub(crate) fn rank(self) -> u8 {
        match self {
            ScalarType::Char | ScalarType::UChar => 1,
            ScalarType::Short | ScalarType::UShort => 2,
            ScalarType::Int | ScalarType::UInt => 3,
            ScalarType::Long | ScalarType::ULong => 4,
            ScalarType::Float => 5,
        }
    }

    /// Wraps an integer held in an `i64` to this type's width, two's complement.
    /// Unsigned 64-bit values are stored as their bit pattern.
    #[inline]
    pub fn wrap(self, v: i64) -> i64 {
        match self {
            ScalarType::Char => v as i8 as i64,
            ScalarType::UChar => v as u8 as i64,
            ScalarType::Short => v as i16 as i64,
            ScalarType::UShort => v as u16 as i64,
            ScalarType::Int => v as i32 as i64,
            ScalarType::UInt => v as u32 as i64,
            ScalarType::Long | ScalarType::ULong => v,
            ScalarType::Float => v,
        }
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A scalar or vector type: `base` repeated `width` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataType {
    pub base: ScalarType,
    pub width: u8,
}

pub const VALID_WIDTHS: [u8; 5] = [1, 2, 4, 8, 16];

impl DataType {
    pub const FLOAT: DataType = DataType::scalar(ScalarType::Float);
    pub const INT: DataType = DataType::scalar(ScalarType::Int);

    pub const fn scalar(base: ScalarType) -> DataType {
        DataType { base, width: 1 }
    }

    pub fn vector(base: ScalarType, width: u8) -> Result<DataType, TypeNameError> {
        if VALID_WIDTHS.contains(&width) {
            Ok(DataType { base, width })
        } else {
            Err(TypeNameError(format!("{}{}", base.name(), width)))
        }
    }

    pub fn is_scalar(self) -> bool {
        self.width == 1
    }

    pub fn is_vector(self) -> bool {
        self.width > 1
    }

    pub fn byte_size(self) -> usize {
        self.base.byte_size() * self.width as usize
    }

    pub fn with_base(self, base: ScalarType) -> DataType {
        DataType { base, width: self.width }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown data type '{0}'")]
pub struct TypeNameError(pub String);

impl FromStr for DataType {
    type Err = TypeNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (base, digits) = s.split_at(split);
        let base = ScalarType::from_name(base).ok_or_else(|| TypeNameError(s.to_string()))?;
        if digits.is_empty() {
            return Ok(DataType::scalar(base));
        }
        // "float1" and "float02" are not type names
        if digits.starts_with('0') || digits == "1" {
            return Err(TypeNameError(s.to_string()));
        }
        let width: u8 = digits.parse().map_err(|_| TypeNameError(s.to_string()))?;
        DataType::vector(base, width).map_err(|_| TypeNameError(s.to_string()))
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width == 1 {
            f.write_str(self.base.name())
        } else {
            write!(f, "{}{}", self.base.name(), self.width)
        }
    }
}

impl Serialize for DataType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DataType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Direction of an input/output point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "InputPoint")]
    Input,
    #[serde(rename = "OutputPoint")]
    Output,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Input => "InputPoint",
            Direction::Output => "OutputPoint",
        })
    }
}

/// Type and direction of one named point of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub data: DataType,
    #[serde(rename = "type")]
    pub direction: Direction,
}

impl PointSpec {
    pub fn input(data: DataType) -> PointSpec {
        PointSpec { data, direction: Direction::Input }
    }

    pub fn output(data: DataType) -> PointSpec {
        PointSpec { data, direction: Direction::Output }
    }
}

/// A flat buffer of little-endian scalars. Vectors occupy `width` consecutive
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub enum Buffer {
    Char(Vec<i8>),
    UChar(Vec<u8>),
    Short(Vec<i16>),
    UShort(Vec<u16>),
    Int(Vec<i32>),
    UInt(Vec<u32>),
    Long(Vec<i64>),
    ULong(Vec<u64>),
    Float(Vec<f32>),
}

macro_rules! each_buffer {
    ($value:expr, $v:ident => $body:expr) => {
        match $value {
            Buffer::Char($v) => $body,
            Buffer::UChar($v) => $body,
            Buffer::Short($v) => $body,
            Buffer::UShort($v) => $body,
            Buffer::Int($v) => $body,
            Buffer::UInt($v) => $body,
            Buffer::Long($v) => $body,
            Buffer::ULong($v) => $body,
            Buffer::Float($v) => $body,
        }
    };
}

macro_rules! each_buf_mut {
    ($value:expr, $v:ident => $body:expr) => {
        match $value {
            BufMut::Char($v) => $body,
            BufMut::UChar($v) => $body,
            BufMut::Short($v) => $body,
            BufMut::UShort($v) => $body,
            BufMut::Int($v) => $body,
            BufMut::UInt($v) => $body,
            BufMut::Long($v) => $body,
            BufMut::ULong($v) => $body,
            BufMut::Float($v) => $body,
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("payload of {len} bytes is not a whole number of {ty} scalars")]
pub struct PayloadError {
    pub len: usize,
    pub ty: ScalarType,
}

impl Buffer {
    pub fn zeros(ty: ScalarType, len: usize) -> Buffer {
        match ty {
            ScalarType::Char => Buffer::Char(vec![0; len]),
            ScalarType::UChar => Buffer::UChar(vec![0; len]),
            ScalarType::Short => Buffer::Short(vec![0; len]),
            ScalarType::UShort => Buffer::UShort(vec![0; len]),
            ScalarType::Int => Buffer::Int(vec![0; len]),
            ScalarType::UInt => Buffer::UInt(vec![0; len]),
            ScalarType::Long => Buffer::Long(vec![0; len]),
            ScalarType::ULong => Buffer::ULong(vec![0; len]),
            ScalarType::Float => Buffer::Float(vec![0.0; len]),
        }
    }

    pub fn scalar_type(&self) -> ScalarType {
        match self {
            Buffer::Char(_) => ScalarType::Char,
            Buffer::UChar(_) => ScalarType::UChar,
            Buffer::Short(_) => ScalarType::Short,
            Buffer::UShort(_) => ScalarType::UShort,
            Buffer::Int(_) => ScalarType::Int,
            Buffer::UInt(_) => ScalarType::UInt,
            Buffer::Long(_) => ScalarType::Long,
            Buffer::ULong(_) => ScalarType::ULong,
            Buffer::Float(_) => ScalarType::Float,
        }
    }

    /// Number of scalars.
    pub fn len(&self) -> usize {
        each_buffer!(self, v => v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get_int(&self, i: usize) -> i64 {
        match self {
            Buffer::Char(v) => v[i] as i64,
            Buffer::UChar(v) => v[i] as i64,
            Buffer::Short(v) => v[i] as i64,
            Buffer::UShort(v) => v[i] as i64,
            Buffer::Int(v) => v[i] as i64,
            Buffer::UInt(v) => v[i] as i64,
            Buffer::Long(v) => v[i],
            Buffer::ULong(v) => v[i] as i64,
            Buffer::Float(v) => v[i] as i64,
        }
    }

    #[inline]
    pub fn get_float(&self, i: usize) -> f32 {
        match self {
            Buffer::Float(v) => v[i],
            other => other.get_int(i) as f32,
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match self {
            Buffer::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_mut(&mut self) -> BufMut<'_> {
        match self {
            Buffer::Char(v) => BufMut::Char(v),
            Buffer::UChar(v) => BufMut::UChar(v),
            Buffer::Short(v) => BufMut::Short(v),
            Buffer::UShort(v) => BufMut::UShort(v),
            Buffer::Int(v) => BufMut::Int(v),
            Buffer::UInt(v) => BufMut::UInt(v),
            Buffer::Long(v) => BufMut::Long(v),
            Buffer::ULong(v) => BufMut::ULong(v),
            Buffer::Float(v) => BufMut::Float(v),
        }
    }

    /// Scalars `[start, end)` as a new buffer of the same type.
    pub fn slice(&self, start: usize, end: usize) -> Buffer {
        match self {
            Buffer::Char(v) => Buffer::Char(v[start..end].to_vec()),
            Buffer::UChar(v) => Buffer::UChar(v[start..end].to_vec()),
            Buffer::Short(v) => Buffer::Short(v[start..end].to_vec()),
            Buffer::UShort(v) => Buffer::UShort(v[start..end].to_vec()),
            Buffer::Int(v) => Buffer::Int(v[start..end].to_vec()),
            Buffer::UInt(v) => Buffer::UInt(v[start..end].to_vec()),
            Buffer::Long(v) => Buffer::Long(v[start..end].to_vec()),
            Buffer::ULong(v) => Buffer::ULong(v[start..end].to_vec()),
            Buffer::Float(v) => Buffer::Float(v[start..end].to_vec()),
        }
    }

    /// Appends `other`, which must hold the same scalar type.
    pub fn extend_from(&mut self, other: &Buffer) {
        match (self, other) {
            (Buffer::Char(a), Buffer::Char(b)) => a.extend_from_slice(b),
            (Buffer::UChar(a), Buffer::UChar(b)) => a.extend_from_slice(b),
            (Buffer::Short(a), Buffer::Short(b)) => a.extend_from_slice(b),
            (Buffer::UShort(a), Buffer::UShort(b)) => a.extend_from_slice(b),
            (Buffer::Int(a), Buffer::Int(b)) => a.extend_from_slice(b),
            (Buffer::UInt(a), Buffer::UInt(b)) => a.extend_from_slice(b),
            (Buffer::Long(a), Buffer::Long(b)) => a.extend_from_slice(b),
            (Buffer::ULong(a), Buffer::ULong(b)) => a.extend_from_slice(b),
            (Buffer::Float(a), Buffer::Float(b)) => a.extend_from_slice(b),
            (a, b) => panic!("buffer type mismatch: {} vs {}", a.scalar_type(), b.scalar_type()),
        }
    }

    pub fn write_le(&self, out: &mut Vec<u8>) {
        out.reserve(self.len() * self.scalar_type().byte_size());
        each_buffer!(self, v => for x in v.iter() { out.extend_from_slice(&x.to_le_bytes()) })
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_le(&mut out);
        out
    }

    pub fn from_le_bytes(ty: ScalarType, bytes: &[u8]) -> Result<Buffer, PayloadError> {
        let size = ty.byte_size();
        if bytes.len() % size != 0 {
            return Err(PayloadError { len: bytes.len(), ty });
        }
        macro_rules! decode {
            ($t:ty, $variant:ident) => {
                Buffer::$variant(
                    bytes
                        .chunks_exact(size)
                        .map(|c| <$t>::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                )
            };
        }
        Ok(match ty {
            ScalarType::Char => decode!(i8, Char),
            ScalarType::UChar => Buffer::UChar(bytes.to_vec()),
            ScalarType::Short => decode!(i16, Short),
            ScalarType::UShort => decode!(u16, UShort),
            ScalarType::Int => decode!(i32, Int),
            ScalarType::UInt => decode!(u32, UInt),
            ScalarType::Long => decode!(i64, Long),
            ScalarType::ULong => decode!(u64, ULong),
            ScalarType::Float => decode!(f32, Float),
        })
    }
}

/// Mutable view over (part of) a buffer.
#[derive(Debug)]
pub enum BufMut<'a> {
    Char(&'a mut [i8]),
    UChar(&'a mut [u8]),
    Short(&'a mut [i16]),
    UShort(&'a mut [u16]),
    Int(&'a mut [i32]),
    UInt(&'a mut [u32]),
    Long(&'a mut [i64]),
    ULong(&'a mut [u64]),
    Float(&'a mut [f32]),
}

impl<'a> BufMut<'a> {
    pub fn len(&self) -> usize {
        each_buf_mut!(self, v => v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn set_int(&mut self, i: usize, x: i64) {
        match self {
            BufMut::Char(v) => v[i] = x as i8,
            BufMut::UChar(v) => v[i] = x as u8,
            BufMut::Short(v) => v[i] = x as i16,
            BufMut::UShort(v) => v[i] = x as u16,
            BufMut::Int(v) => v[i] = x as i32,
            BufMut::UInt(v) => v[i] = x as u32,
            BufMut::Long(v) => v[i] = x,
            BufMut::ULong(v) => v[i] = x as u64,
            BufMut::Float(v) => v[i] = x as f32,
        }
    }

    #[inline]
    pub fn set_float(&mut self, i: usize, x: f32) {
        match self {
            BufMut::Float(v) => v[i] = x,
            other => other.set_int(i, x as i64),
        }
    }

    /// Splits at scalar offset `mid`.
    pub fn split_at(self, mid: usize) -> (BufMut<'a>, BufMut<'a>) {
        macro_rules! split {
            ($v:ident, $variant:ident) => {{
                let (a, b) = $v.split_at_mut(mid);
                (BufMut::$variant(a), BufMut::$variant(b))
            }};
        }
        match self {
            BufMut::Char(v) => split!(v, Char),
            BufMut::UChar(v) => split!(v, UChar),
            BufMut::Short(v) => split!(v, Short),
            BufMut::UShort(v) => split!(v, UShort),
            BufMut::Int(v) => split!(v, Int),
            BufMut::UInt(v) => split!(v, UInt),
            BufMut::Long(v) => split!(v, Long),
            BufMut::ULong(v) => split!(v, ULong),
            BufMut::Float(v) => split!(v, Float),
        }
    }
}

/// A typed flat buffer: one stream's worth of elements.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamData {
    pub data: DataType,
    pub buffer: Buffer,
}

impl StreamData {
    pub fn new(data: DataType, buffer: Buffer) -> StreamData {
        debug_assert_eq!(data.base, buffer.scalar_type());
        StreamData { data, buffer }
    }

    pub fn empty(data: DataType) -> StreamData {
        StreamData { data, buffer: Buffer::zeros(data.base, 0) }
    }

    pub fn from_f32(data: DataType, values: Vec<f32>) -> StreamData {
        assert_eq!(data.base, ScalarType::Float);
        StreamData { data, buffer: Buffer::Float(values) }
    }

    /// Element count (scalars / width).
    pub fn count(&self) -> usize {
        self.buffer.len() / self.data.width as usize
    }

    /// Elements `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> StreamData {
        let w = self.data.width as usize;
        StreamData { data: self.data, buffer: self.buffer.slice(start * w, end * w) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_names_round_trip() {
        for base in ScalarType::ALL {
            for width in VALID_WIDTHS {
                let ty = DataType::vector(base, width).unwrap();
                let name = ty.to_string();
                assert_eq!(name.parse::<DataType>().unwrap(), ty);
            }
        }
        assert_eq!("float2".parse::<DataType>().unwrap().byte_size(), 8);
        assert_eq!("uchar16".parse::<DataType>().unwrap().byte_size(), 16);
    }

    #[test]
    fn rejects_bad_type_names() {
        for bad in ["double", "half", "float3", "float1", "float02", "int32", "", "float*"] {
            assert!(bad.parse::<DataType>().is_err(), "{bad}");
        }
    }

    #[test]
    fn wrap_is_twos_complement() {
        assert_eq!(ScalarType::UChar.wrap(300), 44);
        assert_eq!(ScalarType::Char.wrap(200), -56);
        assert_eq!(ScalarType::Int.wrap(i32::MAX as i64 + 1), i32::MIN as i64);
        assert_eq!(ScalarType::UInt.wrap(-1), u32::MAX as i64);
    }

    #[test]
    fn le_bytes() {
        let b = Buffer::Float(vec![1.0, -2.5]);
        let bytes = b.to_le_bytes();
        assert_eq!(&bytes[..4], &1.0f32.to_le_bytes());
        assert_eq!(Buffer::from_le_bytes(ScalarType::Float, &bytes).unwrap(), b);
        assert!(Buffer::from_le_bytes(ScalarType::Int, &bytes[..3]).is_err());
    }
}
