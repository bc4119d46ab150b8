//! Per-work-item evaluation of a [`TypedKernel`].

use std::collections::BTreeMap;
use std::ops::Range;

use crate::types::{BufMut, Buffer, ScalarType};

use super::typecheck::{Builtin, TExpr, TExprKind, TStmt, TypedKernel};
use super::value::{binary, convert, unary, Lanes, Value};
use super::RuntimeError;

/// Writable window onto one output point's buffer. `first` is the element the
/// window starts at; `bound` is the element count of the whole buffer.
#[derive(Debug)]
pub struct OutputView<'a> {
    pub buf: BufMut<'a>,
    pub first: usize,
    pub bound: usize,
    pub width: usize,
}

impl<'a> OutputView<'a> {
    /// View over a whole buffer of elements `width` scalars wide.
    pub fn whole(buffer: &'a mut Buffer, width: usize) -> OutputView<'a> {
        let bound = buffer.len() / width;
        OutputView { buf: buffer.as_mut(), first: 0, bound, width }
    }

    /// Splits into views of `sizes` consecutive elements each.
    pub fn split(self, sizes: &[usize]) -> Vec<OutputView<'a>> {
        let mut out = Vec::with_capacity(sizes.len());
        let mut rest = self.buf;
        let mut first = self.first;
        for &n in sizes {
            let (head, tail) = rest.split_at(n * self.width);
            out.push(OutputView { buf: head, first, bound: self.bound, width: self.width });
            first += n;
            rest = tail;
        }
        out
    }
}

/// Everything one work-item can see: its id, the work-item count, and the
/// buffers of its node's points in slot order.
pub struct WorkItemContext<'r, 'a> {
    pub global_id: usize,
    pub global_size: usize,
    pub inputs: &'r [&'a Buffer],
    pub outputs: &'r mut [OutputView<'a>],
}

/// Reusable evaluation state (locals, step counter, optional write log).
pub struct Evaluator<'k> {
    kernel: &'k TypedKernel,
    locals: Vec<Value>,
    /// When set, every scalar write is recorded as (output slot, scalar index).
    pub write_log: Option<Vec<(usize, usize)>>,
}

impl<'k> Evaluator<'k> {
    pub fn new(kernel: &'k TypedKernel) -> Evaluator<'k> {
        let locals = kernel.locals.iter().map(|l| Value::zero(l.ty)).collect();
        Evaluator { kernel, locals, write_log: None }
    }

    pub fn with_write_log(mut self) -> Self {
        self.write_log = Some(Vec::new());
        self
    }

    /// Runs the body once for `ctx.global_id`.
    pub fn run(&mut self, ctx: &mut WorkItemContext<'_, '_>) -> Result<(), RuntimeError> {
        let mut m = Machine {
            kernel: self.kernel,
            locals: &mut self.locals,
            inputs: ctx.inputs,
            outputs: ctx.outputs,
            gid: ctx.global_id as i64,
            size: ctx.global_size as i64,
            steps: 0,
            log: self.write_log.as_mut(),
        };
        m.exec(&self.kernel.body)
    }

    /// Runs work-items `range` in ascending order, stopping at the first
    /// failure, which is returned with the failing work-item id.
    pub fn run_range<'a>(
        &mut self,
        range: Range<usize>,
        global_size: usize,
        inputs: &[&'a Buffer],
        outputs: &mut [OutputView<'a>],
    ) -> Result<(), (usize, RuntimeError)> {
        for gid in range {
            let mut ctx = WorkItemContext { global_id: gid, global_size, inputs, outputs };
            self.run(&mut ctx).map_err(|e| (gid, e))?;
        }
        Ok(())
    }
}

/// Evaluates one work-item.
pub fn evaluate(kernel: &TypedKernel, ctx: &mut WorkItemContext<'_, '_>) -> Result<(), RuntimeError> {
    Evaluator::new(kernel).run(ctx)
}

/// Runs all `count` work-items sequentially over named input buffers and
/// returns freshly allocated output buffers by point name.
pub fn run_all(
    kernel: &TypedKernel,
    inputs: &BTreeMap<String, Buffer>,
    count: usize,
) -> Result<BTreeMap<String, Buffer>, (usize, RuntimeError)> {
    let ins: Vec<&Buffer> = kernel
        .inputs
        .iter()
        .map(|(name, _)| inputs.get(name).unwrap_or_else(|| panic!("missing input buffer '{name}'")))
        .collect();
    let mut outs: Vec<Buffer> =
        kernel.outputs.iter().map(|(_, ty)| Buffer::zeros(ty.base, count * ty.width as usize)).collect();
    {
        let mut views: Vec<OutputView<'_>> = outs
            .iter_mut()
            .zip(&kernel.outputs)
            .map(|(b, (_, ty))| OutputView { bound: count, first: 0, width: ty.width as usize, buf: b.as_mut() })
            .collect();
        Evaluator::new(kernel).run_range(0..count, count, &ins, &mut views)?;
    }
    Ok(kernel.outputs.iter().map(|(n, _)| n.clone()).zip(outs).collect())
}

/// Folds an expression whose operands are all constants.
pub(crate) fn eval_const(e: &TExpr) -> Option<Value> {
    let dummy = TypedKernel {
        inputs: Vec::new(),
        outputs: Vec::new(),
        locals: Vec::new(),
        body: Vec::new(),
        pointwise_writes: true,
        pointwise: true,
        step_budget: 0,
    };
    let mut m = Machine {
        kernel: &dummy,
        locals: &mut [],
        inputs: &[],
        outputs: &mut [],
        gid: 0,
        size: 0,
        steps: 0,
        log: None,
    };
    m.eval(e).ok()
}

struct Machine<'r, 'a> {
    kernel: &'r TypedKernel,
    locals: &'r mut [Value],
    inputs: &'r [&'a Buffer],
    outputs: &'r mut [OutputView<'a>],
    gid: i64,
    size: i64,
    steps: u64,
    log: Option<&'r mut Vec<(usize, usize)>>,
}

impl Machine<'_, '_> {
    #[inline]
    fn tick(&mut self) -> Result<(), RuntimeError> {
        self.steps += 1;
        if self.steps > self.kernel.step_budget {
            return Err(RuntimeError::StepBudgetExceeded { budget: self.kernel.step_budget });
        }
        Ok(())
    }

    fn exec(&mut self, stmts: &[TStmt]) -> Result<(), RuntimeError> {
        for s in stmts {
            self.tick()?;
            match s {
                TStmt::SetLocal { slot, value } => {
                    let v = self.eval(value)?;
                    self.locals[*slot] = v;
                }
                TStmt::SetLocalLane { slot, lane, value } => {
                    let v = self.eval(value)?;
                    self.locals[*slot].set_lane(*lane as usize, v);
                }
                TStmt::Store { output, index, value } => {
                    let idx = self.eval(index)?.as_int();
                    let v = self.eval(value)?;
                    self.store(*output, idx, None, v)?;
                }
                TStmt::StoreLane { output, index, lane, value } => {
                    let idx = self.eval(index)?.as_int();
                    let v = self.eval(value)?;
                    self.store(*output, idx, Some(*lane as usize), v)?;
                }
                TStmt::If { cond, then, otherwise } => {
                    if self.eval(cond)?.truthy() {
                        self.exec(then)?;
                    } else {
                        self.exec(otherwise)?;
                    }
                }
                TStmt::For { init, cond, step, body } => {
                    self.exec(init)?;
                    loop {
                        self.tick()?;
                        if !self.eval(cond)?.truthy() {
                            break;
                        }
                        self.exec(body)?;
                        self.exec(step)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn store(&mut self, output: usize, idx: i64, lane: Option<usize>, v: Value) -> Result<(), RuntimeError> {
        let view = &mut self.outputs[output];
        if idx < 0 || idx as usize >= view.bound {
            return Err(RuntimeError::OutOfRange {
                point: self.kernel.outputs[output].0.clone(),
                index: idx,
                bound: view.bound,
            });
        }
        let idx = idx as usize;
        let w = view.width;
        let Some(local) = idx.checked_sub(view.first).filter(|l| l * w < view.buf.len()) else {
            return Err(RuntimeError::PartitionViolation { point: self.kernel.outputs[output].0.clone(), index: idx });
        };
        let base = local * w;
        match (lane, v) {
            (Some(l), Value::Int(x)) => view.buf.set_int(base + l, x),
            (Some(l), Value::Float(x)) => view.buf.set_float(base + l, x),
            (None, Value::Int(x)) => view.buf.set_int(base, x),
            (None, Value::Float(x)) => view.buf.set_float(base, x),
            (None, Value::IntVec(l)) => {
                for (k, x) in l.as_slice().iter().enumerate() {
                    view.buf.set_int(base + k, *x);
                }
            }
            (None, Value::FloatVec(l)) => {
                if let BufMut::Float(dst) = &mut view.buf {
                    dst[base..base + w].copy_from_slice(l.as_slice());
                } else {
                    for (k, x) in l.as_slice().iter().enumerate() {
                        view.buf.set_float(base + k, *x);
                    }
                }
            }
            (Some(_), v) => panic!("lane store of vector {v:?}"),
        }
        if let Some(log) = self.log.as_mut() {
            match lane {
                Some(l) => log.push((output, idx * w + l)),
                None => log.extend((0..w).map(|k| (output, idx * w + k))),
            }
        }
        Ok(())
    }

    #[inline]
    fn element_index(&mut self, input: usize, index: &TExpr) -> Result<usize, RuntimeError> {
        let idx = self.eval(index)?.as_int();
        let w = self.kernel.inputs[input].1.width as usize;
        let bound = self.inputs[input].len() / w;
        if idx < 0 || idx as usize >= bound {
            return Err(RuntimeError::OutOfRange { point: self.kernel.inputs[input].0.clone(), index: idx, bound });
        }
        Ok(idx as usize * w)
    }

    fn eval(&mut self, e: &TExpr) -> Result<Value, RuntimeError> {
        Ok(match &e.kind {
            TExprKind::Const(v) => *v,
            TExprKind::Local(slot) => self.locals[*slot],
            TExprKind::LocalLane { slot, lane } => self.locals[*slot].lane(*lane as usize),
            TExprKind::Load { input, index } => {
                let base = self.element_index(*input, index)?;
                let buf = self.inputs[*input];
                let w = e.ty.width as usize;
                match (buf, w) {
                    (Buffer::Float(v), 1) => Value::Float(v[base]),
                    (Buffer::Float(v), _) => Value::FloatVec(Lanes::from_fn(w as u8, |k| v[base + k])),
                    (b, 1) => Value::Int(b.get_int(base)),
                    (b, _) => Value::IntVec(Lanes::from_fn(w as u8, |k| b.get_int(base + k))),
                }
            }
            TExprKind::LoadLane { input, index, lane } => {
                let base = self.element_index(*input, index)?;
                let buf = self.inputs[*input];
                let i = base + *lane as usize;
                match buf {
                    Buffer::Float(v) => Value::Float(v[i]),
                    b => Value::Int(b.get_int(i)),
                }
            }
            TExprKind::Lane { base, lane } => self.eval(base)?.lane(*lane as usize),
            TExprKind::Unary { op, operand } => unary(*op, self.eval(operand)?, e.ty),
            TExprKind::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                binary(*op, a, b, lhs.ty)?
            }
            TExprKind::Logical { and, lhs, rhs } => {
                let a = self.eval(lhs)?.truthy();
                let r = if *and { a && self.eval(rhs)?.truthy() } else { a || self.eval(rhs)?.truthy() };
                Value::Int(r as i64)
            }
            TExprKind::Ternary { cond, then, otherwise } => {
                if self.eval(cond)?.truthy() {
                    self.eval(then)?
                } else {
                    self.eval(otherwise)?
                }
            }
            TExprKind::Convert(x) => convert(self.eval(x)?, x.ty, e.ty),
            TExprKind::Call { builtin, args } => self.call(*builtin, args, e)?,
            TExprKind::Construct(parts) => {
                let mut out = Value::zero(e.ty);
                let mut k = 0;
                for p in parts {
                    let v = self.eval(p)?;
                    for l in 0..p.ty.width as usize {
                        out.set_lane(k, v.lane(l));
                        k += 1;
                    }
                }
                out
            }
            TExprKind::GlobalId => Value::Int(self.gid),
            TExprKind::GlobalSize => Value::Int(self.size),
        })
    }

    fn call(&mut self, builtin: Builtin, args: &[TExpr], e: &TExpr) -> Result<Value, RuntimeError> {
        let a = self.eval(&args[0])?;
        let b = match args.get(1) {
            Some(x) => Some(self.eval(x)?),
            None => None,
        };
        let f1 = |f: fn(f32) -> f32| map_float(a, f);
        Ok(match builtin {
            Builtin::Sin => f1(f32::sin),
            Builtin::Cos => f1(f32::cos),
            Builtin::Sqrt => f1(f32::sqrt),
            Builtin::Fabs => f1(f32::abs),
            Builtin::Floor => f1(f32::floor),
            Builtin::Exp => f1(f32::exp),
            Builtin::Log => f1(f32::ln),
            Builtin::Pow => zip_float(a, b.unwrap(), f32::powf),
            Builtin::Fmin => zip_float(a, b.unwrap(), f32::min),
            Builtin::Fmax => zip_float(a, b.unwrap(), f32::max),
            Builtin::Min | Builtin::Max => {
                let want_max = builtin == Builtin::Max;
                if e.ty.base.is_float() {
                    zip_float(a, b.unwrap(), if want_max { f32::max } else { f32::min })
                } else {
                    let unsigned64 = e.ty.base == ScalarType::ULong;
                    let pick = move |x: i64, y: i64| {
                        let x_less = if unsigned64 { (x as u64) < (y as u64) } else { x < y };
                        if x_less == want_max {
                            y
                        } else {
                            x
                        }
                    };
                    zip_int(a, b.unwrap(), pick)
                }
            }
            Builtin::Abs => {
                let ty = e.ty.base;
                let f = move |x: i64| if ty.is_signed() { ty.wrap(x.wrapping_abs()) } else { x };
                match a {
                    Value::Int(x) => Value::Int(f(x)),
                    Value::IntVec(l) => Value::IntVec(Lanes::from_fn(l.len, |i| f(l.v[i]))),
                    v => panic!("abs on {v:?}"),
                }
            }
            Builtin::Dot => {
                let b = b.unwrap();
                match (a, b) {
                    (Value::Float(x), Value::Float(y)) => Value::Float(x * y),
                    (Value::FloatVec(x), Value::FloatVec(y)) => {
                        let mut acc = 0.0f32;
                        for i in 0..x.len as usize {
                            acc += x.v[i] * y.v[i];
                        }
                        Value::Float(acc)
                    }
                    (x, y) => panic!("dot on {x:?}, {y:?}"),
                }
            }
        })
    }
}

fn map_float(a: Value, f: fn(f32) -> f32) -> Value {
    match a {
        Value::Float(x) => Value::Float(f(x)),
        Value::FloatVec(l) => Value::FloatVec(Lanes::from_fn(l.len, |i| f(l.v[i]))),
        v => panic!("float builtin on {v:?}"),
    }
}

fn zip_float(a: Value, b: Value, f: fn(f32, f32) -> f32) -> Value {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => Value::Float(f(x, y)),
        (Value::FloatVec(x), Value::FloatVec(y)) => Value::FloatVec(Lanes::from_fn(x.len, |i| f(x.v[i], y.v[i]))),
        (x, y) => panic!("float builtin on {x:?}, {y:?}"),
    }
}

fn zip_int(a: Value, b: Value, f: impl Fn(i64, i64) -> i64) -> Value {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Value::Int(f(x, y)),
        (Value::IntVec(x), Value::IntVec(y)) => Value::IntVec(Lanes::from_fn(x.len, |i| f(x.v[i], y.v[i]))),
        (x, y) => panic!("integer builtin on {x:?}, {y:?}"),
    }
}
