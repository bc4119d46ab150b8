//! Type checking: resolves names to io slots and locals, annotates every
//! expression with its [`DataType`], inserts explicit conversions, and folds
//! constant subtrees.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::types::{DataType, Direction, PointSpec, ScalarType};

use super::ast::*;
use super::eval;
use super::lexer::Pos;
use super::value::Value;
use super::KernelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sin,
    Cos,
    Sqrt,
    Fabs,
    Floor,
    Exp,
    Log,
    Pow,
    Fmin,
    Fmax,
    Min,
    Max,
    Abs,
    Dot,
}

impl Builtin {
    fn lookup(name: &str) -> Option<Builtin> {
        Some(match name {
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "sqrt" => Builtin::Sqrt,
            "fabs" => Builtin::Fabs,
            "floor" => Builtin::Floor,
            "exp" => Builtin::Exp,
            "log" => Builtin::Log,
            "pow" => Builtin::Pow,
            "fmin" => Builtin::Fmin,
            "fmax" => Builtin::Fmax,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            "abs" => Builtin::Abs,
            "dot" => Builtin::Dot,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Builtin::Pow | Builtin::Fmin | Builtin::Fmax | Builtin::Min | Builtin::Max | Builtin::Dot => 2,
            _ => 1,
        }
    }
}

/// Names that cannot be used for points or locals.
pub fn is_reserved(name: &str) -> bool {
    matches!(name, "if" | "else" | "for" | "get_global_id" | "get_global_size" | "M_PI_F")
        || Builtin::lookup(name).is_some()
        || name.parse::<DataType>().is_ok()
}

/// Whether `name` is usable as a point or local name.
pub fn is_valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_reserved(name)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TExprKind {
    Const(Value),
    Local(usize),
    /// One lane of a local vector.
    LocalLane { slot: usize, lane: u8 },
    /// Whole element `index` of input point `input`.
    Load { input: usize, index: Box<TExpr> },
    /// One lane of element `index` of input point `input`.
    LoadLane { input: usize, index: Box<TExpr>, lane: u8 },
    Lane { base: Box<TExpr>, lane: u8 },
    Unary { op: UnaryOp, operand: Box<TExpr> },
    /// Both operands have the same type (the operand type).
    Binary { op: BinaryOp, lhs: Box<TExpr>, rhs: Box<TExpr> },
    Logical { and: bool, lhs: Box<TExpr>, rhs: Box<TExpr> },
    Ternary { cond: Box<TExpr>, then: Box<TExpr>, otherwise: Box<TExpr> },
    /// Converts the operand to this node's type.
    Convert(Box<TExpr>),
    Call { builtin: Builtin, args: Vec<TExpr> },
    /// Parts are scalars or vectors of this node's base type whose widths sum
    /// to this node's width.
    Construct(Vec<TExpr>),
    GlobalId,
    GlobalSize,
}

/// Expression annotated with its static type.
#[derive(Debug, Clone, PartialEq)]
pub struct TExpr {
    pub kind: TExprKind,
    pub ty: DataType,
    pub pos: Pos,
}

impl TExpr {
    fn new(kind: TExprKind, ty: DataType, pos: Pos) -> TExpr {
        TExpr { kind, ty, pos }
    }

    pub fn is_const(&self) -> bool {
        matches!(self.kind, TExprKind::Const(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TStmt {
    SetLocal { slot: usize, value: TExpr },
    SetLocalLane { slot: usize, lane: u8, value: TExpr },
    Store { output: usize, index: TExpr, value: TExpr },
    StoreLane { output: usize, index: TExpr, lane: u8, value: TExpr },
    If { cond: TExpr, then: Vec<TStmt>, otherwise: Vec<TStmt> },
    For { init: Vec<TStmt>, cond: TExpr, step: Vec<TStmt>, body: Vec<TStmt> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Local {
    pub name: String,
    pub ty: DataType,
}

/// Default per-work-item step budget.
pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;

/// A type-checked node body, ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedKernel {
    /// Input points in name order; indices are input slots.
    pub inputs: Vec<(String, DataType)>,
    /// Output points in name order; indices are output slots.
    pub outputs: Vec<(String, DataType)>,
    pub locals: Vec<Local>,
    pub body: Vec<TStmt>,
    /// Every store targets the work-item's own element (`get_global_id(0)`).
    pub pointwise_writes: bool,
    /// Every load reads the work-item's own element as well.
    pub pointwise: bool,
    pub step_budget: u64,
}

impl TypedKernel {
    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|(n, _)| n == name)
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|(n, _)| n == name)
    }

    pub fn with_step_budget(mut self, budget: u64) -> TypedKernel {
        self.step_budget = budget;
        self
    }
}

#[derive(Clone, Copy)]
enum Point {
    Input(usize, DataType),
    Output(usize, DataType),
}

struct Checker {
    points: HashMap<String, Point>,
    scopes: Vec<HashMap<String, usize>>,
    locals: Vec<Local>,
    /// Locals initialised from `get_global_id(0)` at declaration.
    gid_locals: HashSet<usize>,
    /// Locals assigned anywhere other than their declaration.
    reassigned: HashSet<usize>,
    store_indices: Vec<TExpr>,
    load_indices: Vec<TExpr>,
}

fn err(pos: Pos, msg: impl Into<String>) -> KernelError {
    KernelError::typing(pos, msg)
}

/// Type-checks a parsed body against its io signature.
pub fn typecheck(ast: &KernelAst, io: &BTreeMap<String, PointSpec>) -> Result<TypedKernel, KernelError> {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut points = HashMap::new();
    for (name, spec) in io {
        if !is_valid_identifier(name) {
            return Err(err(Pos::default(), format!("'{name}' is not a valid point name")));
        }
        match spec.direction {
            Direction::Input => {
                points.insert(name.clone(), Point::Input(inputs.len(), spec.data));
                inputs.push((name.clone(), spec.data));
            }
            Direction::Output => {
                points.insert(name.clone(), Point::Output(outputs.len(), spec.data));
                outputs.push((name.clone(), spec.data));
            }
        }
    }
    let mut c = Checker::new(points);
    let body = c.stmts(&ast.statements)?;
    let own = |e: &TExpr, c: &Checker| match e.kind {
        TExprKind::GlobalId => true,
        TExprKind::Local(slot) => c.gid_locals.contains(&slot) && !c.reassigned.contains(&slot),
        _ => false,
    };
    let pointwise_writes = c.store_indices.iter().all(|e| own(e, &c));
    let pointwise = pointwise_writes && c.load_indices.iter().all(|e| own(e, &c));
    Ok(TypedKernel {
        inputs,
        outputs,
        locals: c.locals,
        body,
        pointwise_writes,
        pointwise,
        step_budget: DEFAULT_STEP_BUDGET,
    })
}

/// Parses and type-checks in one step.
pub fn compile(src: &str, io: &BTreeMap<String, PointSpec>) -> Result<TypedKernel, KernelError> {
    let ast = super::parser::parse_kernel(src)?;
    typecheck(&ast, io)
}

fn int_scalar(t: DataType) -> bool {
    t.is_scalar() && t.base.is_integer()
}

/// Usual arithmetic conversions on two scalar types.
fn common_scalar(a: ScalarType, b: ScalarType) -> ScalarType {
    if a.is_float() || b.is_float() {
        return ScalarType::Float;
    }
    let promote = |t: ScalarType| if t.rank() < 3 { ScalarType::Int } else { t };
    let (a, b) = (promote(a), promote(b));
    if a == b {
        a
    } else if a.rank() != b.rank() {
        if a.rank() > b.rank() {
            a
        } else {
            b
        }
    } else if a.is_signed() {
        b
    } else {
        a
    }
}

/// Implicit conversion allowed for assignment, initialisation and operands.
fn implicitly_convertible(from: DataType, to: DataType) -> bool {
    if from == to {
        return true;
    }
    if from.is_vector() {
        return false;
    }
    !(from.base.is_float() && to.base.is_integer())
}

fn component_lane(component: &str, ty: DataType, pos: Pos) -> Result<u8, KernelError> {
    if ty.is_scalar() {
        return Err(err(pos, format!("component access requires a vector, found {ty}")));
    }
    let lane = match component {
        "x" => Some(0),
        "y" => Some(1),
        "z" => Some(2),
        "w" => Some(3),
        _ => None,
    };
    let lane = match lane {
        Some(l) if ty.width > 4 => {
            return Err(err(pos, format!("component '{component}' (lane {l}) is only valid on vectors of width <= 4; use .s{l:X} on {ty}")));
        }
        Some(l) => l,
        None => {
            let rest = component.strip_prefix('s').or_else(|| component.strip_prefix('S'));
            match rest.filter(|r| r.len() == 1).and_then(|r| u8::from_str_radix(r, 16).ok()) {
                Some(l) => l,
                None => return Err(err(pos, format!("unknown component '{component}'"))),
            }
        }
    };
    if lane >= ty.width {
        return Err(err(pos, format!("component '{component}' out of range for {ty}")));
    }
    Ok(lane)
}

fn coerce(e: TExpr, to: DataType) -> TExpr {
    if e.ty == to {
        return e;
    }
    let pos = e.pos;
    fold(TExpr::new(TExprKind::Convert(Box::new(e)), to, pos))
}

/// Evaluates constant subtrees. Anything that would fault at runtime is left
/// unfolded so that the error surfaces on execution.
fn fold(e: TExpr) -> TExpr {
    let foldable = match &e.kind {
        TExprKind::Unary { operand, .. } | TExprKind::Convert(operand) | TExprKind::Lane { base: operand, .. } => {
            operand.is_const()
        }
        TExprKind::Binary { lhs, rhs, .. } | TExprKind::Logical { lhs, rhs, .. } => lhs.is_const() && rhs.is_const(),
        TExprKind::Ternary { cond, then, otherwise } => cond.is_const() && then.is_const() && otherwise.is_const(),
        TExprKind::Call { args, .. } | TExprKind::Construct(args) => args.iter().all(TExpr::is_const),
        _ => false,
    };
    if !foldable {
        return e;
    }
    match eval::eval_const(&e) {
        Some(v) => TExpr::new(TExprKind::Const(v), e.ty, e.pos),
        None => e,
    }
}

impl Checker {
    fn new(points: HashMap<String, Point>) -> Checker {
        Checker {
            points,
            scopes: vec![HashMap::new()],
            locals: Vec::new(),
            gid_locals: HashSet::new(),
            reassigned: HashSet::new(),
            store_indices: Vec::new(),
            load_indices: Vec::new(),
        }
    }

    fn lookup_local(&self, name: &str) -> Option<usize> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, name: &str, ty: DataType, pos: Pos) -> Result<usize, KernelError> {
        if is_reserved(name) {
            return Err(err(pos, format!("'{name}' is a reserved name")));
        }
        if self.points.contains_key(name) {
            return Err(err(pos, format!("'{name}' conflicts with an io point")));
        }
        let scope = self.scopes.last_mut().unwrap();
        if scope.contains_key(name) {
            return Err(err(pos, format!("'{name}' is already declared in this scope")));
        }
        let slot = self.locals.len();
        self.locals.push(Local { name: name.to_string(), ty });
        scope.insert(name.to_string(), slot);
        Ok(slot)
    }

    fn scoped<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, KernelError>) -> Result<T, KernelError> {
        self.scopes.push(HashMap::new());
        let out = f(self);
        self.scopes.pop();
        out
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<Vec<TStmt>, KernelError> {
        let mut out = Vec::new();
        for s in stmts {
            self.stmt(s, &mut out)?;
        }
        Ok(out)
    }

    /// A nested statement gets its own scope.
    fn branch(&mut self, s: &Stmt) -> Result<Vec<TStmt>, KernelError> {
        self.scoped(|c| {
            let mut out = Vec::new();
            c.stmt(s, &mut out)?;
            Ok(out)
        })
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<TStmt>) -> Result<(), KernelError> {
        match &s.kind {
            StmtKind::Empty => {}
            StmtKind::Block(body) => {
                let inner = self.scoped(|c| c.stmts(body))?;
                out.extend(inner);
            }
            StmtKind::Decl { ty, name, init } => {
                let value = match init {
                    Some(e) => {
                        let v = self.expr(e)?;
                        self.assignable(v, *ty, e.pos)?
                    }
                    None => TExpr::new(TExprKind::Const(Value::zero(*ty)), *ty, s.pos),
                };
                let is_gid = matches!(&value.kind, TExprKind::GlobalId)
                    || matches!(&value.kind, TExprKind::Convert(inner) if inner.kind == TExprKind::GlobalId && ty.base.rank() >= 3 && ty.base.is_integer());
                // declare after checking the initialiser: `int i = i;` is an error
                let slot = self.declare(name, *ty, s.pos)?;
                if is_gid {
                    self.gid_locals.insert(slot);
                }
                out.push(TStmt::SetLocal { slot, value });
            }
            StmtKind::Assign { target, value } => {
                let stmt = self.assign(target, value)?;
                out.push(stmt);
            }
            StmtKind::If { cond, then, otherwise } => {
                let cond = self.condition(cond)?;
                let then = self.branch(then)?;
                let otherwise = match otherwise {
                    Some(o) => self.branch(o)?,
                    None => Vec::new(),
                };
                out.push(TStmt::If { cond, then, otherwise });
            }
            StmtKind::For { init, cond, step, body } => {
                let stmt = self.scoped(|c| {
                    let mut init_out = Vec::new();
                    if let Some(i) = init {
                        c.stmt(i, &mut init_out)?;
                    }
                    let cond = c.condition(cond)?;
                    let mut step_out = Vec::new();
                    c.stmt(step, &mut step_out)?;
                    let body = c.branch(body)?;
                    Ok(TStmt::For { init: init_out, cond, step: step_out, body })
                })?;
                out.push(stmt);
            }
        }
        Ok(())
    }

    fn condition(&mut self, e: &Expr) -> Result<TExpr, KernelError> {
        let c = self.expr(e)?;
        if c.ty.is_vector() {
            return Err(err(e.pos, format!("condition must be a scalar, found {}", c.ty)));
        }
        Ok(c)
    }

    fn assignable(&self, v: TExpr, to: DataType, pos: Pos) -> Result<TExpr, KernelError> {
        if !implicitly_convertible(v.ty, to) {
            return Err(err(pos, format!("type mismatch in assignment: cannot convert {} to {to}", v.ty)));
        }
        Ok(coerce(v, to))
    }

    fn assign(&mut self, target: &LValue, value: &Expr) -> Result<TStmt, KernelError> {
        let pos = target.pos;
        let v = self.expr(value)?;
        if let Some(point) = self.points.get(&target.name).copied() {
            let (output, ty) = match point {
                Point::Input(..) => return Err(err(pos, format!("cannot write to input point '{}'", target.name))),
                Point::Output(i, ty) => (i, ty),
            };
            let Some(index) = &target.index else {
                return Err(err(pos, format!("point '{}' must be indexed", target.name)));
            };
            let index = self.index_expr(index)?;
            self.store_indices.push(index.clone());
            return Ok(match &target.component {
                None => TStmt::Store { output, index, value: self.assignable(v, ty, value.pos)? },
                Some(c) => {
                    let lane = component_lane(c, ty, pos)?;
                    let lane_ty = DataType::scalar(ty.base);
                    TStmt::StoreLane { output, index, lane, value: self.assignable(v, lane_ty, value.pos)? }
                }
            });
        }
        let Some(slot) = self.lookup_local(&target.name) else {
            return Err(err(pos, format!("unknown identifier '{}'", target.name)));
        };
        if target.index.is_some() {
            return Err(err(pos, format!("'{}' is not indexable", target.name)));
        }
        self.reassigned.insert(slot);
        let ty = self.locals[slot].ty;
        Ok(match &target.component {
            None => TStmt::SetLocal { slot, value: self.assignable(v, ty, value.pos)? },
            Some(c) => {
                let lane = component_lane(c, ty, pos)?;
                TStmt::SetLocalLane { slot, lane, value: self.assignable(v, DataType::scalar(ty.base), value.pos)? }
            }
        })
    }

    fn index_expr(&mut self, e: &Expr) -> Result<TExpr, KernelError> {
        let idx = self.expr(e)?;
        if !int_scalar(idx.ty) {
            return Err(err(e.pos, format!("buffer index must be an integer, found {}", idx.ty)));
        }
        Ok(idx)
    }

    /// Brings two operands to a common type for arithmetic.
    fn unify(&self, a: TExpr, b: TExpr, pos: Pos, what: &str) -> Result<(TExpr, TExpr), KernelError> {
        let (ta, tb) = (a.ty, b.ty);
        let target = match (ta.is_vector(), tb.is_vector()) {
            (false, false) => DataType::scalar(common_scalar(ta.base, tb.base)),
            (true, false) | (false, true) => {
                let (vec, sc) = if ta.is_vector() { (ta, tb) } else { (tb, ta) };
                if !implicitly_convertible(sc, DataType::scalar(vec.base)) {
                    return Err(err(pos, format!("cannot convert {sc} to {vec} implicitly in {what}")));
                }
                vec
            }
            (true, true) => {
                if ta != tb {
                    return Err(err(pos, format!("vector operands of {what} must have identical types ({ta} vs {tb})")));
                }
                ta
            }
        };
        Ok((coerce(a, target), coerce(b, target)))
    }

    fn expr(&mut self, e: &Expr) -> Result<TExpr, KernelError> {
        let pos = e.pos;
        let out = match &e.kind {
            ExprKind::Int { value, unsigned, long } => {
                let v = *value;
                let base = match (unsigned, long) {
                    (false, false) if v <= i32::MAX as u64 => ScalarType::Int,
                    (true, false) if v <= u32::MAX as u64 => ScalarType::UInt,
                    (false, _) if v <= i64::MAX as u64 => ScalarType::Long,
                    _ => ScalarType::ULong,
                };
                TExpr::new(TExprKind::Const(Value::Int(v as i64)), DataType::scalar(base), pos)
            }
            ExprKind::Float(f) => TExpr::new(TExprKind::Const(Value::Float(*f)), DataType::FLOAT, pos),
            ExprKind::Ident(name) => {
                if name == "M_PI_F" {
                    return Ok(TExpr::new(TExprKind::Const(Value::Float(std::f32::consts::PI)), DataType::FLOAT, pos));
                }
                if self.points.contains_key(name) {
                    return Err(err(pos, format!("point '{name}' must be indexed")));
                }
                let slot = self.lookup_local(name).ok_or_else(|| err(pos, format!("unknown identifier '{name}'")))?;
                TExpr::new(TExprKind::Local(slot), self.locals[slot].ty, pos)
            }
            ExprKind::Index { base, index } => {
                let point = match self.points.get(base) {
                    Some(p) => *p,
                    None if self.lookup_local(base).is_some() => {
                        return Err(err(pos, format!("'{base}' is not indexable")));
                    }
                    None => return Err(err(pos, format!("unknown identifier '{base}'"))),
                };
                let (input, ty) = match point {
                    Point::Input(i, ty) => (i, ty),
                    Point::Output(..) => return Err(err(pos, format!("cannot read output point '{base}'"))),
                };
                let index = self.index_expr(index)?;
                self.load_indices.push(index.clone());
                TExpr::new(TExprKind::Load { input, index: Box::new(index) }, ty, pos)
            }
            ExprKind::Component { base, component } => {
                let b = self.expr(base)?;
                let lane = component_lane(component, b.ty, pos)?;
                let ty = DataType::scalar(b.ty.base);
                let kind = match b.kind {
                    TExprKind::Local(slot) => TExprKind::LocalLane { slot, lane },
                    TExprKind::Load { input, index } => TExprKind::LoadLane { input, index, lane },
                    _ => TExprKind::Lane { base: Box::new(b), lane },
                };
                fold(TExpr::new(kind, ty, pos))
            }
            ExprKind::Unary { op, operand } => {
                let x = self.expr(operand)?;
                let ty = match op {
                    UnaryOp::Neg => x.ty,
                    UnaryOp::BitNot => {
                        if x.ty.base.is_float() {
                            return Err(err(pos, "'~' requires an integer operand"));
                        }
                        x.ty
                    }
                    UnaryOp::Not => {
                        if x.ty.is_vector() {
                            return Err(err(pos, "'!' requires a scalar operand"));
                        }
                        DataType::INT
                    }
                };
                // small integer types promote before arithmetic
                let x = if *op != UnaryOp::Not && int_scalar(x.ty) && x.ty.base.rank() < 3 {
                    coerce(x, DataType::INT)
                } else {
                    x
                };
                let ty = if *op == UnaryOp::Not { ty } else { x.ty };
                fold(TExpr::new(TExprKind::Unary { op: *op, operand: Box::new(x) }, ty, pos))
            }
            ExprKind::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, pos)?,
            ExprKind::Ternary { cond, then, otherwise } => {
                let c = self.condition(cond)?;
                let a = self.expr(then)?;
                let b = self.expr(otherwise)?;
                let (a, b) = self.unify(a, b, pos, "'?:'")?;
                let ty = a.ty;
                fold(TExpr::new(
                    TExprKind::Ternary { cond: Box::new(c), then: Box::new(a), otherwise: Box::new(b) },
                    ty,
                    pos,
                ))
            }
            ExprKind::Call { name, args } => self.call(name, args, pos)?,
            ExprKind::Cast { ty, operand } => {
                let x = self.expr(operand)?;
                if x.ty.is_vector() && x.ty != *ty {
                    return Err(err(pos, format!("cannot cast {} to {ty}", x.ty)));
                }
                coerce(x, *ty)
            }
            ExprKind::Construct { ty, args } => {
                let mut parts = Vec::new();
                let mut total = 0usize;
                for a in args {
                    let x = self.expr(a)?;
                    total += x.ty.width as usize;
                    let target = x.ty.with_base(ty.base);
                    parts.push(coerce(x, target));
                }
                if ty.is_scalar() {
                    return Err(err(pos, format!("cannot construct scalar {ty} from {} values", args.len())));
                }
                if parts.len() == 1 && total == 1 {
                    // broadcast
                    let p = parts.pop().unwrap();
                    coerce(p, *ty)
                } else if total != ty.width as usize {
                    return Err(err(pos, format!("{ty} constructor needs {} components, found {total}", ty.width)));
                } else {
                    fold(TExpr::new(TExprKind::Construct(parts), *ty, pos))
                }
            }
        };
        Ok(out)
    }

    fn binary(&mut self, op: BinaryOp, lhs: &Expr, rhs: &Expr, pos: Pos) -> Result<TExpr, KernelError> {
        let a = self.expr(lhs)?;
        let b = self.expr(rhs)?;
        if matches!(op, BinaryOp::And | BinaryOp::Or) {
            if a.ty.is_vector() || b.ty.is_vector() {
                return Err(err(pos, format!("'{}' requires scalar operands", op.symbol())));
            }
            let kind = TExprKind::Logical { and: op == BinaryOp::And, lhs: Box::new(a), rhs: Box::new(b) };
            return Ok(fold(TExpr::new(kind, DataType::INT, pos)));
        }
        let integer_only = matches!(
            op,
            BinaryOp::Rem | BinaryOp::Shl | BinaryOp::Shr | BinaryOp::BitAnd | BinaryOp::BitOr | BinaryOp::BitXor
        );
        if integer_only && (a.ty.base.is_float() || b.ty.base.is_float()) {
            let msg = match op {
                BinaryOp::Shl | BinaryOp::Shr => "shift requires integer operands".to_string(),
                BinaryOp::Rem => "'%' requires integer operands".to_string(),
                _ => format!("bitwise operator '{}' requires integer operands", op.symbol()),
            };
            return Err(err(pos, msg));
        }
        let (a, b) = if matches!(op, BinaryOp::Shl | BinaryOp::Shr) {
            // result has the (promoted) type of the left operand
            let left = if a.ty.is_scalar() { DataType::scalar(common_scalar(a.ty.base, a.ty.base)) } else { a.ty };
            if b.ty.is_vector() && b.ty.width != left.width {
                return Err(err(pos, format!("shift operands have mismatched widths ({} vs {})", a.ty, b.ty)));
            }
            let right = if b.ty.is_vector() { b.ty.with_base(left.base) } else { left };
            (coerce(a, left), coerce(b, right))
        } else {
            self.unify(a, b, pos, &format!("'{}'", op.symbol()))?
        };
        let (a, b) = if a.ty != b.ty {
            // scalar shift amount against a vector
            let t = a.ty;
            (a, coerce(b, t))
        } else {
            (a, b)
        };
        let ty = if op.is_comparison() {
            if a.ty.is_vector() {
                DataType { base: ScalarType::Int, width: a.ty.width }
            } else {
                DataType::INT
            }
        } else {
            a.ty
        };
        Ok(fold(TExpr::new(TExprKind::Binary { op, lhs: Box::new(a), rhs: Box::new(b) }, ty, pos)))
    }

    fn call(&mut self, name: &str, args: &[Expr], pos: Pos) -> Result<TExpr, KernelError> {
        if name == "get_global_id" || name == "get_global_size" {
            if args.len() != 1 {
                return Err(err(pos, format!("'{name}' expects 1 argument, found {}", args.len())));
            }
            let dim = self.expr(&args[0])?;
            if dim.kind != TExprKind::Const(Value::Int(0)) || !int_scalar(dim.ty) {
                return Err(err(args[0].pos, format!("'{name}' supports only dimension 0")));
            }
            let kind = if name == "get_global_id" { TExprKind::GlobalId } else { TExprKind::GlobalSize };
            return Ok(TExpr::new(kind, DataType::INT, pos));
        }
        let builtin = Builtin::lookup(name).ok_or_else(|| err(pos, format!("unknown function '{name}'")))?;
        if args.len() != builtin.arity() {
            return Err(err(pos, format!("'{name}' expects {} argument(s), found {}", builtin.arity(), args.len())));
        }
        let mut targs = Vec::with_capacity(args.len());
        for a in args {
            targs.push(self.expr(a)?);
        }
        let floatify = |e: TExpr| -> Result<TExpr, KernelError> {
            if e.ty.base.is_float() {
                Ok(e)
            } else if e.ty.is_scalar() {
                Ok(coerce(e, DataType::FLOAT))
            } else {
                Err(err(e.pos, format!("'{name}' requires float arguments, found {}", e.ty)))
            }
        };
        let (args, ty) = match builtin {
            Builtin::Sin | Builtin::Cos | Builtin::Sqrt | Builtin::Fabs | Builtin::Floor | Builtin::Exp | Builtin::Log => {
                let x = floatify(targs.pop().unwrap())?;
                let ty = x.ty;
                (vec![x], ty)
            }
            Builtin::Pow | Builtin::Fmin | Builtin::Fmax => {
                let b = floatify(targs.pop().unwrap())?;
                let a = floatify(targs.pop().unwrap())?;
                let (a, b) = self.unify(a, b, pos, &format!("'{name}'"))?;
                let ty = a.ty;
                (vec![a, b], ty)
            }
            Builtin::Min | Builtin::Max => {
                let b = targs.pop().unwrap();
                let a = targs.pop().unwrap();
                let (a, b) = self.unify(a, b, pos, &format!("'{name}'"))?;
                let ty = a.ty;
                (vec![a, b], ty)
            }
            Builtin::Abs => {
                let x = targs.pop().unwrap();
                if x.ty.base.is_float() {
                    return Err(err(pos, "'abs' requires an integer argument; use 'fabs' for float"));
                }
                let x = if int_scalar(x.ty) && x.ty.base.rank() < 3 { coerce(x, DataType::INT) } else { x };
                let ty = x.ty;
                (vec![x], ty)
            }
            Builtin::Dot => {
                let b = floatify(targs.pop().unwrap())?;
                let a = floatify(targs.pop().unwrap())?;
                if a.ty != b.ty {
                    return Err(err(pos, format!("'dot' operands must have identical types ({} vs {})", a.ty, b.ty)));
                }
                (vec![a, b], DataType::FLOAT)
            }
        };
        Ok(fold(TExpr::new(TExprKind::Call { builtin, args }, ty, pos)))
    }
}

/// Checks a standalone expression with the given io signature and no locals.
pub fn typecheck_expr(src: &str, io: &BTreeMap<String, PointSpec>) -> Result<TExpr, KernelError> {
    let e = super::parser::parse_expr(src)?;
    let mut points = HashMap::new();
    let (mut ni, mut no) = (0, 0);
    for (name, spec) in io {
        let p = match spec.direction {
            Direction::Input => {
                ni += 1;
                Point::Input(ni - 1, spec.data)
            }
            Direction::Output => {
                no += 1;
                Point::Output(no - 1, spec.data)
            }
        };
        points.insert(name.clone(), p);
    }
    let mut c = Checker::new(points);
    c.expr(&e)
}
