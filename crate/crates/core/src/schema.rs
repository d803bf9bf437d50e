//! Type schemas: primitives, containers, optionals, enums and record types,
//! plus the meaning annotations that are rendered into prompts.
//!
//! A [`TypeRegistry`] is built once and then only read. Named references are
//! resolved lazily, so definitions may be registered in any order; cycles are
//! reported when dependencies are collected.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    Int,
    Float,
    Str,
    Bool,
}

impl Primitive {
    pub fn name(self) -> &'static str {
        match self {
            Primitive::Int => "int",
            Primitive::Float => "float",
            Primitive::Str => "str",
            Primitive::Bool => "bool",
        }
    }
}

/// A type expression as written in a field, binding or output position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Primitive(Primitive),
    List(Box<TypeExpr>),
    Tuple(Vec<TypeExpr>),
    Mapping(Box<TypeExpr>, Box<TypeExpr>),
    Optional(Box<TypeExpr>),
    /// Reference to a [`RecordDef`] or [`EnumDef`] by name.
    Named(String),
    /// A type with a natural-language meaning attached.
    Semantic(Box<TypeExpr>, String),
}

impl TypeExpr {
    pub fn int() -> Self {
        TypeExpr::Primitive(Primitive::Int)
    }

    pub fn float() -> Self {
        TypeExpr::Primitive(Primitive::Float)
    }

    pub fn str() -> Self {
        TypeExpr::Primitive(Primitive::Str)
    }

    pub fn bool() -> Self {
        TypeExpr::Primitive(Primitive::Bool)
    }

    pub fn list(elem: TypeExpr) -> Self {
        TypeExpr::List(Box::new(elem))
    }

    pub fn tuple(elems: Vec<TypeExpr>) -> Self {
        TypeExpr::Tuple(elems)
    }

    pub fn mapping(key: TypeExpr, value: TypeExpr) -> Self {
        TypeExpr::Mapping(Box::new(key), Box::new(value))
    }

    pub fn optional(inner: TypeExpr) -> Self {
        TypeExpr::Optional(Box::new(inner))
    }

    pub fn named(name: impl Into<String>) -> Self {
        TypeExpr::Named(name.into())
    }

    pub fn semantic(inner: TypeExpr, meaning: impl Into<String>) -> Self {
        TypeExpr::Semantic(Box::new(inner), meaning.into())
    }

    /// Strips any meaning annotation.
    pub fn without_meaning(&self) -> &TypeExpr {
        match self {
            TypeExpr::Semantic(inner, _) => inner,
            other => other,
        }
    }

    /// True for `Optional(_)` and `Semantic(Optional(_), _)`.
    pub fn is_optional(&self) -> bool {
        matches!(self.without_meaning(), TypeExpr::Optional(_))
    }

    /// Checks the structural invariants that do not need a registry.
    pub fn check(&self) -> Result<(), SchemaError> {
        match self {
            TypeExpr::Primitive(_) | TypeExpr::Named(_) => Ok(()),
            TypeExpr::List(elem) => elem.check(),
            TypeExpr::Tuple(elems) => elems.iter().try_for_each(TypeExpr::check),
            TypeExpr::Mapping(key, value) => {
                match key.without_meaning() {
                    TypeExpr::Primitive(Primitive::Str) | TypeExpr::Primitive(Primitive::Int) => {}
                    _ => {
                        return Err(SchemaError::InvalidType(
                            "mapping keys must be str or int".to_string(),
                        ))
                    }
                }
                key.check()?;
                value.check()
            }
            TypeExpr::Optional(inner) => {
                if matches!(**inner, TypeExpr::Optional(_)) {
                    return Err(SchemaError::InvalidType(
                        "optional cannot directly wrap optional".to_string(),
                    ));
                }
                inner.check()
            }
            TypeExpr::Semantic(inner, meaning) => {
                if matches!(**inner, TypeExpr::Semantic(..)) {
                    return Err(SchemaError::InvalidType(
                        "meaning annotations do not nest".to_string(),
                    ));
                }
                if meaning.trim().is_empty() {
                    return Err(SchemaError::InvalidType("meaning must not be empty".to_string()));
                }
                inner.check()
            }
        }
    }

    fn named_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            TypeExpr::Primitive(_) => {}
            TypeExpr::Named(name) => out.push(name),
            TypeExpr::List(elem) | TypeExpr::Optional(elem) | TypeExpr::Semantic(elem, _) => {
                elem.named_refs(out)
            }
            TypeExpr::Tuple(elems) => elems.iter().for_each(|e| e.named_refs(out)),
            TypeExpr::Mapping(key, value) => {
                key.named_refs(out);
                value.named_refs(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub ty: TypeExpr,
}

impl Field {
    pub fn new(name: impl Into<String>, ty: TypeExpr) -> Self {
        Field { name: name.into(), ty }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDef {
    pub name: String,
    pub meaning: Option<String>,
    pub fields: Vec<Field>,
}

impl RecordDef {
    pub fn new(name: impl Into<String>, fields: Vec<Field>) -> Self {
        RecordDef { name: name.into(), meaning: None, fields }
    }

    pub fn with_meaning(mut self, meaning: impl Into<String>) -> Self {
        self.meaning = Some(meaning.into());
        self
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumDef {
    pub name: String,
    pub meaning: Option<String>,
    pub members: Vec<String>,
}

impl EnumDef {
    pub fn new<I, S>(name: impl Into<String>, members: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        EnumDef {
            name: name.into(),
            meaning: None,
            members: members.into_iter().map(Into::into).collect(),
        }
    }

    pub fn with_meaning(mut self, meaning: impl Into<String>) -> Self {
        self.meaning = Some(meaning.into());
        self
    }

    pub fn has_member(&self, member: &str) -> bool {
        self.members.iter().any(|m| m == member)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeDef {
    Record(RecordDef),
    Enum(EnumDef),
}

impl TypeDef {
    pub fn name(&self) -> &str {
        match self {
            TypeDef::Record(r) => &r.name,
            TypeDef::Enum(e) => &e.name,
        }
    }

    fn validate(&self) -> Result<(), SchemaError> {
        let invalid = |msg: String| Err(SchemaError::InvalidDefinition(msg));
        if !is_identifier(self.name()) {
            return invalid(format!("`{}` is not a valid identifier", self.name()));
        }
        match self {
            TypeDef::Record(record) => {
                if record.fields.is_empty() {
                    return invalid(format!("record `{}` has no fields", record.name));
                }
                let mut seen = HashSet::new();
                for field in &record.fields {
                    if !is_identifier(&field.name) {
                        return invalid(format!(
                            "field `{}` of `{}` is not a valid identifier",
                            field.name, record.name
                        ));
                    }
                    if !seen.insert(field.name.as_str()) {
                        return invalid(format!(
                            "duplicate field `{}` in record `{}`",
                            field.name, record.name
                        ));
                    }
                    field.ty.check()?;
                }
            }
            TypeDef::Enum(def) => {
                if def.members.is_empty() {
                    return invalid(format!("enum `{}` has no members", def.name));
                }
                let mut seen = HashSet::new();
                for member in &def.members {
                    if !is_identifier(member) {
                        return invalid(format!(
                            "member `{member}` of `{}` is not a valid identifier",
                            def.name
                        ));
                    }
                    if !seen.insert(member.as_str()) {
                        return invalid(format!("duplicate member `{member}` in enum `{}`", def.name));
                    }
                }
            }
        }
        Ok(())
    }
}

impl From<RecordDef> for TypeDef {
    fn from(def: RecordDef) -> Self {
        TypeDef::Record(def)
    }
}

impl From<EnumDef> for TypeDef {
    fn from(def: EnumDef) -> Self {
        TypeDef::Enum(def)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("a type named `{0}` is already registered")]
    DuplicateName(String),
    #[error("invalid definition: {0}")]
    InvalidDefinition(String),
    #[error("invalid type: {0}")]
    InvalidType(String),
    #[error("unresolved type names: {}", .0.join(", "))]
    Unresolved(Vec<String>),
    #[error("cyclic type dependency: {}", .0.join(" -> "))]
    CyclicDependency(Vec<String>),
}

/// Name-indexed store of record and enum definitions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeRegistry {
    defs: BTreeMap<String, TypeDef>,
}

impl TypeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, def: impl Into<TypeDef>) -> Result<&mut Self, SchemaError> {
        let def = def.into();
        def.validate()?;
        if self.defs.contains_key(def.name()) {
            return Err(SchemaError::DuplicateName(def.name().to_string()));
        }
        self.defs.insert(def.name().to_string(), def);
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&TypeDef> {
        self.defs.get(name)
    }

    pub fn record(&self, name: &str) -> Option<&RecordDef> {
        match self.defs.get(name) {
            Some(TypeDef::Record(r)) => Some(r),
            _ => None,
        }
    }

    pub fn enumeration(&self, name: &str) -> Option<&EnumDef> {
        match self.defs.get(name) {
            Some(TypeDef::Enum(e)) => Some(e),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TypeDef> {
        self.defs.values()
    }

    /// Returns every name referenced (transitively) from `expr` that is not
    /// registered, in first-encounter order without duplicates.
    pub fn resolve(&self, expr: &TypeExpr) -> Vec<String> {
        let mut missing = Vec::new();
        let mut visited = HashSet::new();
        self.resolve_into(expr, &mut visited, &mut missing);
        missing
    }

    fn resolve_into(&self, expr: &TypeExpr, visited: &mut HashSet<String>, missing: &mut Vec<String>) {
        let mut refs = Vec::new();
        expr.named_refs(&mut refs);
        for name in refs {
            if !visited.insert(name.to_string()) {
                continue;
            }
            match self.defs.get(name) {
                None => missing.push(name.to_string()),
                Some(TypeDef::Record(record)) => {
                    for field in &record.fields {
                        self.resolve_into(&field.ty, visited, missing);
                    }
                }
                Some(TypeDef::Enum(_)) => {}
            }
        }
    }

    /// Definitions reachable from `expr`, dependencies first.
    pub fn collect_dependencies(&self, expr: &TypeExpr) -> Result<Vec<&TypeDef>, SchemaError> {
        self.collect_dependencies_all(std::iter::once(expr))
    }

    /// Like [`collect_dependencies`](Self::collect_dependencies) over several
    /// roots sharing one visited set, so each definition appears once.
    pub fn collect_dependencies_all<'e>(
        &self,
        exprs: impl IntoIterator<Item = &'e TypeExpr>,
    ) -> Result<Vec<&TypeDef>, SchemaError> {
        let mut walk = DependencyWalk { registry: self, done: HashSet::new(), stack: Vec::new(), out: Vec::new() };
        for expr in exprs {
            walk.visit_expr(expr)?;
        }
        Ok(walk.out)
    }

    /// Checks that every reference resolves and that no cycles exist.
    pub fn verify(&self) -> Result<(), SchemaError> {
        let mut missing = Vec::new();
        for def in self.defs.values() {
            for name in self.resolve(&TypeExpr::Named(def.name().to_string())) {
                if !missing.contains(&name) {
                    missing.push(name);
                }
            }
        }
        if !missing.is_empty() {
            return Err(SchemaError::Unresolved(missing));
        }
        let roots: Vec<TypeExpr> = self.defs.keys().map(|n| TypeExpr::Named(n.clone())).collect();
        self.collect_dependencies_all(roots.iter()).map(|_| ())
    }
}

struct DependencyWalk<'r> {
    registry: &'r TypeRegistry,
    done: HashSet<&'r str>,
    stack: Vec<&'r str>,
    out: Vec<&'r TypeDef>,
}

impl<'r> DependencyWalk<'r> {
    fn visit_expr(&mut self, expr: &TypeExpr) -> Result<(), SchemaError> {
        let mut refs = Vec::new();
        expr.named_refs(&mut refs);
        for name in refs {
            self.visit_name(name)?;
        }
        Ok(())
    }

    fn visit_name(&mut self, name: &str) -> Result<(), SchemaError> {
        let Some((key, def)) = self.registry.defs.get_key_value(name) else {
            return Err(SchemaError::Unresolved(vec![name.to_string()]));
        };
        if self.done.contains(key.as_str()) {
            return Ok(());
        }
        if let Some(pos) = self.stack.iter().position(|n| *n == key.as_str()) {
            let mut cycle: Vec<String> = self.stack[pos..].iter().map(|s| s.to_string()).collect();
            cycle.push(key.clone());
            return Err(SchemaError::CyclicDependency(cycle));
        }
        self.stack.push(key);
        if let TypeDef::Record(record) = def {
            for field in &record.fields {
                self.visit_expr(&field.ty)?;
            }
        }
        self.stack.pop();
        self.done.insert(key);
        self.out.push(def);
        Ok(())
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::render::render_type_expr(self))
    }
}
