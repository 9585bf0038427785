//! MiniJ: syntax tree, parser, printer and type checker.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod typeck;

use thiserror::Error;

pub use ast::*;
pub use printer::{print_expr, print_program};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into() }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub struct TypeError {
    pub message: String,
    /// Qualified function name, or `global <name>`.
    pub function: Option<String>,
    pub expr: Option<String>,
}

impl TypeError {
    pub(crate) fn in_function(mut self, name: &str) -> Self {
        self.function.get_or_insert_with(|| name.to_string());
        self
    }

    pub(crate) fn in_global(mut self, name: &str) -> Self {
        self.function.get_or_insert_with(|| format!("global {name}"));
        self
    }
}

impl std::fmt::Display for TypeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(func) = &self.function {
            write!(f, "in {func}: ")?;
        }
        write!(f, "{}", self.message)?;
        if let Some(e) = &self.expr {
            write!(f, " (at `{e}`)")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LangError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("type error: {0}")]
    Type(#[from] TypeError),
}

/// Parses and type-checks a program or template.
pub fn parse(src: &str) -> Result<Program, LangError> {
    let p = parser::parse_program(src)?;
    typeck::check_program(&p)?;
    Ok(p)
}
