//! SQL frontend: lexing, parsing, name resolution and typing.

pub mod ast;
mod features;
pub(crate) mod lexer;
mod lower;
mod parser;
pub mod printer;
pub mod syntax;

use thiserror::Error;

use crate::schema::DatabaseSchema;

pub use ast::Query;
pub use features::{feature_scan, SupportReport};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported construct at offset {pos}: {feature}")]
    Unsupported { feature: String, pos: usize },
    #[error("unresolved name `{name}` at offset {pos}")]
    UnresolvedName { name: String, pos: usize },
}

impl ParseError {
    pub(crate) fn syntax(pos: usize, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            pos,
            msg: msg.into(),
        }
    }

    pub fn pos(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::Unsupported { pos, .. }
            | ParseError::UnresolvedName { pos, .. } => *pos,
        }
    }
}

/// Parses one SELECT statement and resolves it against `schema`.
pub fn parse_sql(text: &str, schema: &DatabaseSchema) -> Result<Query, ParseError> {
    let surface = parser::parse_statement(text)?;
    lower::lower_query(&surface, schema)
}

/// Support classification straight from SQL text. Constructs the parser
/// rejects as outside the subset are reported like `feature_scan` findings;
/// malformed text and unknown names are still errors.
pub fn scan_sql(text: &str, schema: &DatabaseSchema) -> Result<SupportReport, ParseError> {
    match parse_sql(text, schema) {
        Ok(q) => Ok(feature_scan(&q)),
        Err(ParseError::Unsupported { feature, .. }) => Ok(SupportReport::Unsupported(vec![feature])),
        Err(e) => Err(e),
    }
}
