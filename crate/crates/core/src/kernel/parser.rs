//! Recursive-descent parser with C operator precedence.

use crate::types::DataType;

use super::ast::*;
use super::lexer::{tokenize, Pos, Token, TokenKind};
use super::KernelError;

pub fn parse_kernel(src: &str) -> Result<KernelAst, KernelError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, i: 0, end: end_pos(src) };
    let mut statements = Vec::new();
    while !p.at_end() {
        statements.push(p.stmt()?);
    }
    Ok(KernelAst { statements })
}

fn end_pos(src: &str) -> Pos {
    let line = src.matches('\n').count() as u32 + 1;
    let col = src.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
    Pos { line, col }
}

struct Parser {
    tokens: Vec<Token>,
    i: usize,
    end: Pos,
}

fn describe(tok: Option<&Token>) -> String {
    match tok {
        Some(t) => format!("'{}'", t.lexeme),
        None => "end of input".to_string(),
    }
}

impl Parser {
    fn at_end(&self) -> bool {
        self.i >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.i)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.tokens.get(self.i + k)
    }

    fn pos(&self) -> Pos {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Punct(q), .. }) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Keyword(q), .. }) if *q == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &[&str]) -> KernelError {
        let expected: Vec<String> = expected.iter().map(|e| format!("'{e}'")).collect();
        let what = if expected.len() == 1 {
            format!("expected {}", expected[0])
        } else {
            format!("expected one of {}", expected.join(", "))
        };
        KernelError::syntax(self.pos(), format!("{what}, found {}", describe(self.peek())))
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), KernelError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&[p]))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), KernelError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident, lexeme, pos, .. }) => {
                let out = (lexeme.clone(), *pos);
                self.i += 1;
                Ok(out)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    /// Type name at token offset `k`, if any.
    fn type_at(&self, k: usize) -> Option<DataType> {
        match self.peek_at(k) {
            Some(Token { kind: TokenKind::Ident, lexeme, .. }) => lexeme.parse().ok(),
            _ => None,
        }
    }

    fn stmt(&mut self) -> Result<Stmt, KernelError> {
        let pos = self.pos();
        if self.eat_punct(";") {
            return Ok(Stmt { kind: StmtKind::Empty, pos });
        }
        if self.eat_punct("{") {
            let mut body = Vec::new();
            while !self.is_punct("}") {
                if self.at_end() {
                    return Err(self.error(&["}"]));
                }
                body.push(self.stmt()?);
            }
            self.i += 1;
            return Ok(Stmt { kind: StmtKind::Block(body), pos });
        }
        if self.is_keyword("if") {
            self.i += 1;
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then = Box::new(self.stmt()?);
            let otherwise = if self.is_keyword("else") {
                self.i += 1;
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Ok(Stmt { kind: StmtKind::If { cond, then, otherwise }, pos });
        }
        if self.is_keyword("for") {
            self.i += 1;
            self.expect_punct("(")?;
            let init = if self.eat_punct(";") {
                None
            } else if self.type_at(0).is_some() {
                Some(Box::new(self.decl()?))
            } else {
                let s = self.assign()?;
                self.expect_punct(";")?;
                Some(Box::new(s))
            };
            let cond = self.expr()?;
            self.expect_punct(";")?;
            let step = Box::new(self.assign()?);
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt { kind: StmtKind::For { init, cond, step, body }, pos });
        }
        if self.type_at(0).is_some() {
            return self.decl();
        }
        let s = self.assign()?;
        self.expect_punct(";")?;
        Ok(s)
    }

    fn decl(&mut self) -> Result<Stmt, KernelError> {
        let pos = self.pos();
        let ty = self.type_at(0).ok_or_else(|| self.error(&["type name"]))?;
        self.i += 1;
        let (name, _) = self.ident()?;
        let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
        if !self.is_punct(";") {
            return Err(if init.is_some() { self.error(&[";"]) } else { self.error(&["=", ";"]) });
        }
        self.i += 1;
        Ok(Stmt { kind: StmtKind::Decl { ty, name, init }, pos })
    }

    /// Assignment without the trailing semicolon. Compound forms (`+=`, `++`)
    /// are desugared to plain assignment.
    fn assign(&mut self) -> Result<Stmt, KernelError> {
        let pos = self.pos();
        let target = self.lvalue()?;
        let compound = |op: BinaryOp, rhs: Expr, target: &LValue| Expr {
            pos: rhs.pos,
            kind: ExprKind::Binary { op, lhs: Box::new(lvalue_expr(target)), rhs: Box::new(rhs) },
        };
        let op_pos = self.pos();
        let tok = self.peek().map(|t| t.kind.clone());
        let value = match tok {
            Some(TokenKind::Punct("=")) => {
                self.i += 1;
                self.expr()?
            }
            Some(TokenKind::Punct(p @ ("++" | "--"))) => {
                self.i += 1;
                let one = Expr { kind: ExprKind::Int { value: 1, unsigned: false, long: false }, pos: op_pos };
                compound(if p == "++" { BinaryOp::Add } else { BinaryOp::Sub }, one, &target)
            }
            Some(TokenKind::Punct(p)) if compound_op(p).is_some() => {
                self.i += 1;
                let rhs = self.expr()?;
                compound(compound_op(p).unwrap(), rhs, &target)
            }
            _ => {
                let mut expected = vec!["="];
                if target.index.is_none() && target.component.is_none() {
                    expected.extend(["[", "."]);
                } else if target.component.is_none() {
                    expected.push(".");
                }
                expected.extend(["+=", "-=", "*=", "/=", "++", "--"]);
                return Err(self.error(&expected));
            }
        };
        Ok(Stmt { kind: StmtKind::Assign { target, value }, pos })
    }

    fn lvalue(&mut self) -> Result<LValue, KernelError> {
        let (name, pos) = self.ident()?;
        let index = if self.eat_punct("[") {
            let e = self.expr()?;
            self.expect_punct("]")?;
            Some(e)
        } else {
            None
        };
        let component = if self.eat_punct(".") { Some(self.ident()?.0) } else { None };
        Ok(LValue { name, index, component, pos })
    }

    pub fn expr(&mut self) -> Result<Expr, KernelError> {
        self.ternary()
    }

    fn ternary(&mut self) -> Result<Expr, KernelError> {
        let cond = self.binary(0)?;
        if self.is_punct("?") {
            let pos = self.pos();
            self.i += 1;
            let then = self.expr()?;
            self.expect_punct(":")?;
            // right-associative: the else arm is itself a full conditional
            let otherwise = self.ternary()?;
            return Ok(Expr {
                kind: ExprKind::Ternary { cond: Box::new(cond), then: Box::new(then), otherwise: Box::new(otherwise) },
                pos,
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, KernelError> {
        let mut lhs = self.unary()?;
        loop {
            let Some((op, prec)) = self.peek().and_then(binary_op) else { break };
            if prec < min_prec {
                break;
            }
            let pos = self.pos();
            self.i += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr { kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, pos };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, KernelError> {
        let pos = self.pos();
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Punct("-")) => Some(UnaryOp::Neg),
            Some(TokenKind::Punct("!")) => Some(UnaryOp::Not),
            Some(TokenKind::Punct("~")) => Some(UnaryOp::BitNot),
            Some(TokenKind::Punct("+")) => {
                self.i += 1;
                return self.unary();
            }
            _ => None,
        };
        if let Some(op) = op {
            self.i += 1;
            let operand = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary { op, operand: Box::new(operand) }, pos });
        }
        // `(type)` introduces a cast or a vector constructor
        if self.is_punct("(") && self.type_at(1).is_some() && matches!(self.peek_at(2).map(|t| &t.kind), Some(TokenKind::Punct(")"))) {
            let ty = self.type_at(1).unwrap();
            self.i += 3;
            if self.is_punct("(") {
                self.i += 1;
                let mut args = vec![self.expr()?];
                while self.eat_punct(",") {
                    args.push(self.expr()?);
                }
                self.expect_punct(")")?;
                let base = if ty.is_scalar() && args.len() == 1 {
                    let operand = Box::new(args.pop().unwrap());
                    Expr { kind: ExprKind::Cast { ty, operand }, pos }
                } else {
                    Expr { kind: ExprKind::Construct { ty, args }, pos }
                };
                return self.postfix(base);
            }
            let operand = self.unary()?;
            return Ok(Expr { kind: ExprKind::Cast { ty, operand: Box::new(operand) }, pos });
        }
        let primary = self.primary()?;
        self.postfix(primary)
    }

    fn postfix(&mut self, mut e: Expr) -> Result<Expr, KernelError> {
        while self.is_punct(".") {
            let pos = self.pos();
            self.i += 1;
            let (component, _) = self.ident()?;
            e = Expr { kind: ExprKind::Component { base: Box::new(e), component }, pos };
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, KernelError> {
        let pos = self.pos();
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error(&["expression"]));
        };
        match tok.kind {
            TokenKind::Int { value, unsigned, long } => {
                self.i += 1;
                Ok(Expr { kind: ExprKind::Int { value, unsigned, long }, pos })
            }
            TokenKind::Float(v) => {
                self.i += 1;
                Ok(Expr { kind: ExprKind::Float(v), pos })
            }
            TokenKind::Punct("(") => {
                self.i += 1;
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            TokenKind::Ident => {
                self.i += 1;
                let name = tok.lexeme;
                if self.eat_punct("(") {
                    let mut args = Vec::new();
                    if !self.eat_punct(")") {
                        args.push(self.expr()?);
                        while self.eat_punct(",") {
                            args.push(self.expr()?);
                        }
                        self.expect_punct(")")?;
                    }
                    return Ok(Expr { kind: ExprKind::Call { name, args }, pos });
                }
                if self.eat_punct("[") {
                    let index = self.expr()?;
                    self.expect_punct("]")?;
                    return Ok(Expr { kind: ExprKind::Index { base: name, index: Box::new(index) }, pos });
                }
                Ok(Expr { kind: ExprKind::Ident(name), pos })
            }
            _ => Err(self.error(&["expression"])),
        }
    }
}

fn lvalue_expr(target: &LValue) -> Expr {
    let pos = target.pos;
    let mut e = match &target.index {
        Some(index) => Expr { kind: ExprKind::Index { base: target.name.clone(), index: Box::new(index.clone()) }, pos },
        None => Expr { kind: ExprKind::Ident(target.name.clone()), pos },
    };
    if let Some(c) = &target.component {
        e = Expr { kind: ExprKind::Component { base: Box::new(e), component: c.clone() }, pos };
    }
    e
}

fn compound_op(p: &str) -> Option<BinaryOp> {
    Some(match p {
        "+=" => BinaryOp::Add,
        "-=" => BinaryOp::Sub,
        "*=" => BinaryOp::Mul,
        "/=" => BinaryOp::Div,
        "%=" => BinaryOp::Rem,
        "&=" => BinaryOp::BitAnd,
        "|=" => BinaryOp::BitOr,
        "^=" => BinaryOp::BitXor,
        "<<=" => BinaryOp::Shl,
        ">>=" => BinaryOp::Shr,
        _ => return None,
    })
}

/// C precedence levels, higher binds tighter.
fn binary_op(tok: &Token) -> Option<(BinaryOp, u8)> {
    let TokenKind::Punct(p) = tok.kind else { return None };
    Some(match p {
        "||" => (BinaryOp::Or, 1),
        "&&" => (BinaryOp::And, 2),
        "|" => (BinaryOp::BitOr, 3),
        "^" => (BinaryOp::BitXor, 4),
        "&" => (BinaryOp::BitAnd, 5),
        "==" => (BinaryOp::Eq, 6),
        "!=" => (BinaryOp::Ne, 6),
        "<" => (BinaryOp::Lt, 7),
        "<=" => (BinaryOp::Le, 7),
        ">" => (BinaryOp::Gt, 7),
        ">=" => (BinaryOp::Ge, 7),
        "<<" => (BinaryOp::Shl, 8),
        ">>" => (BinaryOp::Shr, 8),
        "+" => (BinaryOp::Add, 9),
        "-" => (BinaryOp::Sub, 9),
        "*" => (BinaryOp::Mul, 10),
        "/" => (BinaryOp::Div, 10),
        "%" => (BinaryOp::Rem, 10),
        _ => return None,
    })
}

/// Parses a standalone expression; used by tests and tooling.
pub fn parse_expr(src: &str) -> Result<Expr, KernelError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, i: 0, end: end_pos(src) };
    let e = p.expr()?;
    if !p.at_end() {
        return Err(p.error(&["end of input"]));
    }
    Ok(e)
}
