//! The object notation models answer in, e.g.
//! `Person(first_name="Marie", likes=["Research"])`.
//!
//! Parsing is purely syntactic: nothing in the input is evaluated.

mod extract;
mod lexer;
mod parser;
mod print;

use std::fmt;

use num_bigint::BigInt;
use serde::Serialize;

pub use extract::{extract_block, extract_candidate_output, fenced_blocks, Candidate, FencedBlock, NotFound, Provenance};
pub use parser::{parse_value, MAX_DEPTH};
pub use print::{escape_str, render_value};

/// A parsed value tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(BigInt),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Tuple(Vec<Value>),
    /// Ordered key/value pairs; keys are `Str` or `Int` and unique.
    Map(Vec<(Value, Value)>),
    EnumRef { enum_name: String, member: String },
    /// A constructor call. Arguments are a positional prefix followed by
    /// named arguments.
    Object { type_name: String, args: Vec<(Option<String>, Value)> },
}

impl Value {
    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    pub fn int(i: impl Into<BigInt>) -> Self {
        Value::Int(i.into())
    }

    pub fn enum_ref(enum_name: impl Into<String>, member: impl Into<String>) -> Self {
        Value::EnumRef { enum_name: enum_name.into(), member: member.into() }
    }

    /// An object with all-named arguments.
    pub fn object<N, I>(type_name: impl Into<String>, args: I) -> Self
    where
        N: Into<String>,
        I: IntoIterator<Item = (N, Value)>,
    {
        Value::Object {
            type_name: type_name.into(),
            args: args.into_iter().map(|(n, v)| (Some(n.into()), v)).collect(),
        }
    }

    /// Short kind name used in diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Null => "None",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Map(_) => "dict",
            Value::EnumRef { .. } => "enum member",
            Value::Object { .. } => "object",
        }
    }

    /// Named argument lookup on an `Object`.
    pub fn arg(&self, name: &str) -> Option<&Value> {
        match self {
            Value::Object { args, .. } => args
                .iter()
                .find(|(n, _)| n.as_deref() == Some(name))
                .map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_value(self))
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&render_value(self))
    }
}

/// A located syntax error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct SourceError {
    pub message: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, counted in characters.
    pub column: usize,
    /// The offending source line.
    pub excerpt: String,
}

impl SourceError {
    /// An error at byte `offset` of `text`.
    pub fn at(text: &str, offset: usize, message: impl Into<String>) -> Self {
        let offset = offset.min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = text[line_start..offset].chars().count() + 1;
        let line_end = text[line_start..].find('\n').map_or(text.len(), |i| line_start + i);
        let excerpt: String = text[line_start..line_end].chars().take(160).collect();
        SourceError { message: message.into(), line, column, excerpt }
    }

    /// Multi-line rendering with a caret under the column.
    pub fn display_with_excerpt(&self) -> String {
        let caret_pad: String = self
            .excerpt
            .chars()
            .take(self.column.saturating_sub(1))
            .map(|c| if c == '\t' { '\t' } else { ' ' })
            .collect();
        format!("{self}\n  {}\n  {caret_pad}^", self.excerpt)
    }
}
