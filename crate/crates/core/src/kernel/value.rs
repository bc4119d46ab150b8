use crate::types::{DataType, ScalarType};

use super::ast::{BinaryOp, UnaryOp};
use super::RuntimeError;

/// Fixed-capacity vector lanes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lanes<T: Copy> {
    pub len: u8,
    pub v: [T; 16],
}

impl<T: Copy + Default> Lanes<T> {
    pub fn splat(len: u8, x: T) -> Self {
        Lanes { len, v: [x; 16] }
    }

    pub fn from_fn(len: u8, mut f: impl FnMut(usize) -> T) -> Self {
        let mut v = [T::default(); 16];
        for (i, slot) in v.iter_mut().enumerate().take(len as usize) {
            *slot = f(i);
        }
        Lanes { len, v }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.v[..self.len as usize]
    }
}

/// A runtime value. Integers are held in `i64`, already wrapped to their
/// static type (64-bit unsigned values as their bit pattern).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f32),
    IntVec(Lanes<i64>),
    FloatVec(Lanes<f32>),
}

impl Value {
    pub fn zero(ty: DataType) -> Value {
        match (ty.base.is_float(), ty.is_scalar()) {
            (true, true) => Value::Float(0.0),
            (false, true) => Value::Int(0),
            (true, false) => Value::FloatVec(Lanes::splat(ty.width, 0.0)),
            (false, false) => Value::IntVec(Lanes::splat(ty.width, 0)),
        }
    }

    pub fn as_int(&self) -> i64 {
        match *self {
            Value::Int(i) => i,
            Value::Float(f) => f as i64,
            _ => panic!("vector used as scalar"),
        }
    }

    pub fn as_f32(&self) -> f32 {
        match *self {
            Value::Float(f) => f,
            Value::Int(i) => i as f32,
            _ => panic!("vector used as scalar"),
        }
    }

    pub fn truthy(&self) -> bool {
        match *self {
            Value::Int(i) => i != 0,
            Value::Float(f) => f != 0.0,
            _ => panic!("vector used as condition"),
        }
    }

    /// Scalar lane `i` of a vector (or the scalar itself for lane 0).
    #[inline]
    pub fn lane(&self, i: usize) -> Value {
        match self {
            Value::IntVec(l) => Value::Int(l.v[i]),
            Value::FloatVec(l) => Value::Float(l.v[i]),
            scalar => *scalar,
        }
    }

    pub fn set_lane(&mut self, i: usize, x: Value) {
        match (self, x) {
            (Value::IntVec(l), Value::Int(x)) => l.v[i] = x,
            (Value::FloatVec(l), Value::Float(x)) => l.v[i] = x,
            (me, x) => panic!("lane store type mismatch: {me:?} <- {x:?}"),
        }
    }
}

/// Converts a scalar value of type `from` to scalar type `to`.
#[inline]
pub fn convert_scalar(x: Value, from: ScalarType, to: ScalarType) -> Value {
    match (x, to) {
        (Value::Float(f), ScalarType::Float) => Value::Float(f),
        (Value::Float(f), ScalarType::ULong) => Value::Int(f as u64 as i64),
        (Value::Float(f), t) => Value::Int(t.wrap(f as i64)),
        (Value::Int(i), ScalarType::Float) => {
            if from == ScalarType::ULong {
                Value::Float(i as u64 as f32)
            } else {
                Value::Float(i as f32)
            }
        }
        (Value::Int(i), t) => Value::Int(t.wrap(i)),
        (v, _) => panic!("convert_scalar on vector {v:?}"),
    }
}

/// Converts `x` of type `from` to `to`. Supports scalar→scalar,
/// scalar→vector (broadcast) and identical-width vector→vector.
pub fn convert(x: Value, from: DataType, to: DataType) -> Value {
    if from == to {
        return x;
    }
    if to.is_scalar() {
        return convert_scalar(x, from.base, to.base);
    }
    if from.is_scalar() {
        let s = convert_scalar(x, from.base, to.base);
        return match s {
            Value::Int(i) => Value::IntVec(Lanes::splat(to.width, i)),
            Value::Float(f) => Value::FloatVec(Lanes::splat(to.width, f)),
            _ => unreachable!(),
        };
    }
    let lanes = |i: usize| convert_scalar(x.lane(i), from.base, to.base);
    if to.base.is_float() {
        Value::FloatVec(Lanes::from_fn(to.width, |i| lanes(i).as_f32()))
    } else {
        Value::IntVec(Lanes::from_fn(to.width, |i| lanes(i).as_int()))
    }
}

#[inline]
fn int_binop(op: BinaryOp, a: i64, b: i64, ty: ScalarType) -> Result<i64, RuntimeError> {
    let unsigned64 = ty == ScalarType::ULong;
    let r = match op {
        BinaryOp::Add => a.wrapping_add(b),
        BinaryOp::Sub => a.wrapping_sub(b),
        BinaryOp::Mul => a.wrapping_mul(b),
        BinaryOp::Div | BinaryOp::Rem => {
            if b == 0 {
                return Err(RuntimeError::DivisionByZero);
            }
            match (op, unsigned64) {
                (BinaryOp::Div, true) => ((a as u64) / (b as u64)) as i64,
                (BinaryOp::Div, false) => a.wrapping_div(b),
                (_, true) => ((a as u64) % (b as u64)) as i64,
                (_, false) => a.wrapping_rem(b),
            }
        }
        BinaryOp::Shl => a.wrapping_shl((b as u32) & (ty.bits() - 1)),
        BinaryOp::Shr => {
            let amount = (b as u32) & (ty.bits() - 1);
            if unsigned64 {
                ((a as u64) >> amount) as i64
            } else {
                // narrower unsigned values are held zero-extended, so an
                // arithmetic shift is logical for them
                a >> amount
            }
        }
        BinaryOp::BitAnd => a & b,
        BinaryOp::BitOr => a | b,
        BinaryOp::BitXor => a ^ b,
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne => {
            let ord = if unsigned64 { (a as u64).cmp(&(b as u64)) } else { a.cmp(&b) };
            return Ok(compare(op, ord) as i64);
        }
        BinaryOp::And | BinaryOp::Or => unreachable!("logical ops are short-circuited"),
    };
    Ok(ty.wrap(r))
}

#[inline]
fn compare(op: BinaryOp, ord: std::cmp::Ordering) -> bool {
    use std::cmp::Ordering::*;
    match op {
        BinaryOp::Lt => ord == Less,
        BinaryOp::Le => ord != Greater,
        BinaryOp::Gt => ord == Greater,
        BinaryOp::Ge => ord != Less,
        BinaryOp::Eq => ord == Equal,
        BinaryOp::Ne => ord != Equal,
        _ => unreachable!(),
    }
}

#[inline]
fn float_cmp(op: BinaryOp, a: f32, b: f32) -> bool {
    match op {
        BinaryOp::Lt => a < b,
        BinaryOp::Le => a <= b,
        BinaryOp::Gt => a > b,
        BinaryOp::Ge => a >= b,
        BinaryOp::Eq => a == b,
        BinaryOp::Ne => a != b,
        _ => unreachable!(),
    }
}

#[inline]
fn float_arith(op: BinaryOp, a: f32, b: f32) -> f32 {
    match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => a / b,
        _ => unreachable!("integer-only operator on float"),
    }
}

/// Applies `op` to two operands of type `ty`. Comparisons yield `int`
/// (scalar, 0/1) or an int vector (lanes -1/0).
#[inline]
pub fn binary(op: BinaryOp, a: Value, b: Value, ty: DataType) -> Result<Value, RuntimeError> {
    Ok(match (a, b) {
        (Value::Float(x), Value::Float(y)) => {
            if op.is_comparison() {
                Value::Int(float_cmp(op, x, y) as i64)
            } else {
                Value::Float(float_arith(op, x, y))
            }
        }
        (Value::Int(x), Value::Int(y)) => Value::Int(int_binop(op, x, y, ty.base)?),
        (Value::FloatVec(x), Value::FloatVec(y)) => {
            if op.is_comparison() {
                Value::IntVec(Lanes::from_fn(x.len, |i| -(float_cmp(op, x.v[i], y.v[i]) as i64)))
            } else {
                Value::FloatVec(Lanes::from_fn(x.len, |i| float_arith(op, x.v[i], y.v[i])))
            }
        }
        (Value::IntVec(x), Value::IntVec(y)) => {
            let mut out = Lanes::splat(x.len, 0i64);
            for i in 0..x.len as usize {
                let r = int_binop(op, x.v[i], y.v[i], ty.base)?;
                out.v[i] = if op.is_comparison() { -r } else { r };
            }
            Value::IntVec(out)
        }
        (a, b) => panic!("binary operand mismatch {a:?} {op:?} {b:?}"),
    })
}

pub fn unary(op: UnaryOp, x: Value, ty: DataType) -> Value {
    match (op, x) {
        (UnaryOp::Neg, Value::Float(f)) => Value::Float(-f),
        (UnaryOp::Neg, Value::Int(i)) => Value::Int(ty.base.wrap(i.wrapping_neg())),
        (UnaryOp::Neg, Value::FloatVec(l)) => Value::FloatVec(Lanes::from_fn(l.len, |i| -l.v[i])),
        (UnaryOp::Neg, Value::IntVec(l)) => {
            Value::IntVec(Lanes::from_fn(l.len, |i| ty.base.wrap(l.v[i].wrapping_neg())))
        }
        (UnaryOp::BitNot, Value::Int(i)) => Value::Int(ty.base.wrap(!i)),
        (UnaryOp::BitNot, Value::IntVec(l)) => Value::IntVec(Lanes::from_fn(l.len, |i| ty.base.wrap(!l.v[i]))),
        (UnaryOp::Not, v) => Value::Int(!v.truthy() as i64),
        (op, v) => panic!("bad unary {op:?} on {v:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_semantics() {
        let int = DataType::INT;
        assert_eq!(binary(BinaryOp::Add, Value::Int(i32::MAX as i64), Value::Int(1), int).unwrap(), Value::Int(i32::MIN as i64));
        assert_eq!(binary(BinaryOp::Shl, Value::Int(1), Value::Int(16), int).unwrap(), Value::Int(65536));
        assert_eq!(binary(BinaryOp::Shl, Value::Int(1), Value::Int(33), int).unwrap(), Value::Int(2));
        assert_eq!(binary(BinaryOp::Div, Value::Int(-7), Value::Int(2), int).unwrap(), Value::Int(-3));
        assert_eq!(binary(BinaryOp::Rem, Value::Int(-7), Value::Int(2), int).unwrap(), Value::Int(-1));
        assert_eq!(
            binary(BinaryOp::Div, Value::Int(i32::MIN as i64), Value::Int(-1), int).unwrap(),
            Value::Int(i32::MIN as i64)
        );
        assert!(matches!(binary(BinaryOp::Rem, Value::Int(1), Value::Int(0), int), Err(RuntimeError::DivisionByZero)));
        let uint = DataType::scalar(ScalarType::UInt);
        assert_eq!(binary(BinaryOp::Sub, Value::Int(0), Value::Int(1), uint).unwrap(), Value::Int(u32::MAX as i64));
        assert_eq!(binary(BinaryOp::Shr, Value::Int(u32::MAX as i64), Value::Int(31), uint).unwrap(), Value::Int(1));
        let ulong = DataType::scalar(ScalarType::ULong);
        assert_eq!(binary(BinaryOp::Gt, Value::Int(-1), Value::Int(1), ulong).unwrap(), Value::Int(1));
        assert_eq!(binary(BinaryOp::Shr, Value::Int(-1), Value::Int(63), ulong).unwrap(), Value::Int(1));
    }

    #[test]
    fn float_division_by_zero_is_ieee() {
        let f = DataType::FLOAT;
        assert_eq!(binary(BinaryOp::Div, Value::Float(1.0), Value::Float(0.0), f).unwrap(), Value::Float(f32::INFINITY));
        match binary(BinaryOp::Div, Value::Float(0.0), Value::Float(0.0), f).unwrap() {
            Value::Float(x) => assert!(x.is_nan()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conversions() {
        assert_eq!(convert_scalar(Value::Float(-2.7), ScalarType::Float, ScalarType::Int), Value::Int(-2));
        assert_eq!(convert_scalar(Value::Int(300), ScalarType::Int, ScalarType::UChar), Value::Int(44));
        assert_eq!(convert_scalar(Value::Int(-1), ScalarType::ULong, ScalarType::Float), Value::Float(u64::MAX as f32));
        let v = convert(Value::Int(3), DataType::INT, DataType::vector(ScalarType::Float, 4).unwrap());
        assert_eq!(v, Value::FloatVec(Lanes::splat(4, 3.0)));
    }

    #[test]
    fn vector_comparison_lanes() {
        let ty = DataType::vector(ScalarType::Float, 2).unwrap();
        let a = Value::FloatVec(Lanes::from_fn(2, |i| i as f32));
        let b = Value::FloatVec(Lanes::splat(2, 0.5));
        let r = binary(BinaryOp::Lt, a, b, ty).unwrap();
        match r {
            Value::IntVec(l) => assert_eq!(l.as_slice(), &[-1, 0]),
            other => panic!("{other:?}"),
        }
    }
}
