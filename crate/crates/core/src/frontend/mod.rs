// SPDX-License-Identifier: Apache-2.0

//! Verilog subset frontend: lexer, parser with parameter elaboration,
//! structural checks and width queries.

pub mod ast;
pub mod lexer;
mod parser;
mod validate;
pub mod width;

use thiserror::Error;

pub use parser::{parse, parse_with_top};
pub use width::width_of;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: syntax error, expected {expected}")]
    Syntax { line: u32, col: u32, expected: String },
    #[error("line {line}: unsupported construct: {name}")]
    Unsupported { name: String, line: u32 },
    #[error("line {line}: parameter `{name}` is not a compile-time constant")]
    ParameterUnresolvable { name: String, line: u32 },
    #[error("{line}:{col}: {msg}")]
    Invalid { line: u32, col: u32, msg: String },
}

impl FrontendError {
    pub(crate) fn invalid(span: ast::Span, msg: impl Into<String>) -> Self {
        FrontendError::Invalid { line: span.line, col: span.col, msg: msg.into() }
    }
}
