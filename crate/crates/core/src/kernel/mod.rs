//! The node-body language: a small subset of OpenCL C.
//!
//! A body is a statement list executed once per work-item. Node points are
//! reached as `name[index]`; the signature comes from the node's io set, so
//! there is no `__kernel` header.

pub mod ast;
pub mod eval;
pub mod lexer;
pub mod parser;
pub mod typecheck;
pub mod value;

use std::fmt;

use thiserror::Error;

pub use eval::{evaluate, run_all, Evaluator, OutputView, WorkItemContext};
pub use lexer::{lex, tokenize, Pos, Token, TokenKind};
pub use parser::{parse_expr, parse_kernel};
pub use typecheck::{compile, is_valid_identifier, typecheck, typecheck_expr, TExpr, TExprKind, TStmt, TypedKernel};
pub use value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Lex,
    Syntax,
    Type,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Lex => "lexical error",
            Stage::Syntax => "syntax error",
            Stage::Type => "type error",
        })
    }
}

/// A compile-time diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{stage} at {pos}: {message}")]
pub struct KernelError {
    pub stage: Stage,
    pub pos: Pos,
    pub message: String,
}

impl KernelError {
    pub(crate) fn lex(pos: Pos, message: impl Into<String>) -> Self {
        KernelError { stage: Stage::Lex, pos, message: message.into() }
    }

    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        KernelError { stage: Stage::Syntax, pos, message: message.into() }
    }

    pub(crate) fn typing(pos: Pos, message: impl Into<String>) -> Self {
        KernelError { stage: Stage::Type, pos, message: message.into() }
    }
}

/// A fault raised while evaluating a work-item.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("index {index} out of range for point '{point}' (bound {bound})")]
    OutOfRange { point: String, index: i64, bound: usize },
    #[error("integer division or modulo by zero")]
    DivisionByZero,
    #[error("step budget of {budget} exceeded")]
    StepBudgetExceeded { budget: u64 },
    /// A write outside the slice of the output handed to a parallel worker;
    /// only possible if a kernel with scattered writes is run in parallel.
    #[error("write to element {index} of '{point}' outside this worker's partition")]
    PartitionViolation { point: String, index: usize },
}
