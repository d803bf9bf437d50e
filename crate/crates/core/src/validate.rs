//! Conformance of parsed values to type expressions.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::Serialize;

use crate::notation::{render_value, Value};
use crate::render::render_type_expr;
use crate::schema::{EnumDef, Primitive, RecordDef, TypeDef, TypeExpr, TypeRegistry};

/// Enum hints list at most this many members.
pub const HINT_MEMBERS: usize = 10;

/// A value that conforms to `ty` as is.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypedValue {
    pub value: Value,
    #[serde(serialize_with = "serialize_type")]
    pub ty: TypeExpr,
}

fn serialize_type<S: serde::Serializer>(ty: &TypeExpr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&render_type_expr(ty))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathSegment {
    Field(String),
    Index(usize),
    /// A mapping key, canonically rendered.
    Key(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FieldPath(pub Vec<PathSegment>);

impl FieldPath {
    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// True if `self` equals `prefix` or lies beneath it.
    pub fn starts_with(&self, prefix: &FieldPath) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("(root)");
        }
        for (i, seg) in self.0.iter().enumerate() {
            match seg {
                PathSegment::Field(name) if i == 0 => f.write_str(name)?,
                PathSegment::Field(name) => write!(f, ".{name}")?,
                PathSegment::Index(idx) => write!(f, "[{idx}]")?,
                PathSegment::Key(key) => write!(f, "[{key}]")?,
            }
        }
        Ok(())
    }
}

impl Serialize for FieldPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationError {
    pub path: FieldPath,
    pub expected: String,
    pub found: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: expected {}, found {}", self.path, self.expected, self.found)?;
        if let Some(hint) = &self.hint {
            write!(f, " ({hint})")?;
        }
        Ok(())
    }
}

/// One bullet per error, in the order given.
pub fn describe_errors(errors: &[ValidationError]) -> String {
    errors.iter().map(|e| format!("- {e}")).collect::<Vec<_>>().join("\n")
}

/// Checks `value` against `expr`, applying the tolerated coercions, and
/// returns the canonical form or every error found.
pub fn conform(value: &Value, expr: &TypeExpr, registry: &TypeRegistry) -> Result<TypedValue, Vec<ValidationError>> {
    let mut walker = Walker { registry, path: Vec::new(), errors: Vec::new() };
    let out = walker.walk(value, expr);
    match out {
        Some(value) if walker.errors.is_empty() => Ok(TypedValue { value, ty: expr.clone() }),
        _ => Err(walker.errors),
    }
}

fn describe_found(value: &Value) -> String {
    const LIMIT: usize = 60;
    let text = render_value(value);
    let shown = if text.chars().count() > LIMIT {
        let cut: String = text.chars().take(LIMIT).collect();
        format!("{cut}...")
    } else {
        text
    };
    match value {
        Value::Null => "None".to_string(),
        _ => format!("{} `{shown}`", value.kind()),
    }
}

struct Walker<'r> {
    registry: &'r TypeRegistry,
    path: Vec<PathSegment>,
    errors: Vec<ValidationError>,
}

impl Walker<'_> {
    fn error(&mut self, expected: String, found: String, hint: Option<String>) {
        self.errors.push(ValidationError { path: FieldPath(self.path.clone()), expected, found, hint });
    }

    fn mismatch(&mut self, expr: &TypeExpr, value: &Value) -> Option<Value> {
        self.error(render_type_expr(expr), describe_found(value), None);
        None
    }

    fn nested<T>(&mut self, seg: PathSegment, f: impl FnOnce(&mut Self) -> T) -> T {
        self.path.push(seg);
        let out = f(self);
        self.path.pop();
        out
    }

    fn walk(&mut self, value: &Value, expr: &TypeExpr) -> Option<Value> {
        self.walk_shown(value, expr, expr)
    }

    /// `shown` is the type named in errors: wrappers are peeled off for
    /// checking but kept for display.
    fn walk_shown(&mut self, value: &Value, expr: &TypeExpr, shown: &TypeExpr) -> Option<Value> {
        match expr {
            TypeExpr::Semantic(inner, _) => self.walk_shown(value, inner, shown),
            TypeExpr::Optional(inner) => match value {
                Value::Null => Some(Value::Null),
                _ => self.walk_shown(value, inner, shown),
            },
            TypeExpr::Primitive(p) => self.primitive(value, *p, shown),
            TypeExpr::List(elem) => match value {
                Value::List(items) => self.items(items, std::slice::from_ref(elem.as_ref()), true).map(Value::List),
                _ => self.mismatch(shown, value),
            },
            TypeExpr::Tuple(elems) => match value {
                Value::Tuple(items) if items.len() == elems.len() => self.items(items, elems, false).map(Value::Tuple),
                Value::Tuple(items) => {
                    self.error(
                        render_type_expr(shown),
                        format!("tuple of {} elements", items.len()),
                        Some(format!("expected exactly {} elements", elems.len())),
                    );
                    None
                }
                _ => self.mismatch(shown, value),
            },
            TypeExpr::Mapping(key_ty, value_ty) => match value {
                Value::Map(pairs) => {
                    let mut out = Vec::with_capacity(pairs.len());
                    let mut ok = true;
                    for (k, v) in pairs {
                        let seg = PathSegment::Key(render_value(k));
                        let pair = self.nested(seg, |w| (w.walk(k, key_ty), w.walk(v, value_ty)));
                        match pair {
                            (Some(k), Some(v)) => out.push((k, v)),
                            _ => ok = false,
                        }
                    }
                    ok.then_some(Value::Map(out))
                }
                _ => self.mismatch(shown, value),
            },
            TypeExpr::Named(name) => match self.registry.get(name) {
                Some(TypeDef::Record(record)) => self.record(value, record),
                Some(TypeDef::Enum(def)) => self.enumeration(value, def),
                None => {
                    self.error(name.clone(), describe_found(value), Some(format!("type `{name}` is not defined")));
                    None
                }
            },
        }
    }

    fn primitive(&mut self, value: &Value, p: Primitive, expr: &TypeExpr) -> Option<Value> {
        match (p, value) {
            (Primitive::Int, Value::Int(_))
            | (Primitive::Float, Value::Float(_))
            | (Primitive::Str, Value::Str(_))
            | (Primitive::Bool, Value::Bool(_)) => Some(value.clone()),
            (Primitive::Float, Value::Int(i)) => match i.to_f64().filter(|f| f.is_finite()) {
                Some(f) => Some(Value::Float(f)),
                None => self.mismatch(expr, value),
            },
            (Primitive::Int, Value::Float(f)) if f.is_finite() && f.fract() == 0.0 => {
                BigInt::from_f64(*f).map(Value::Int).or_else(|| self.mismatch(expr, value))
            }
            _ => self.mismatch(expr, value),
        }
    }

    /// Elements of a list (one type, `repeat`) or a tuple (one type each).
    fn items(&mut self, items: &[Value], types: &[TypeExpr], repeat: bool) -> Option<Vec<Value>> {
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            let ty = if repeat { &types[0] } else { &types[i] };
            match self.nested(PathSegment::Index(i), |w| w.walk(item, ty)) {
                Some(v) => out.push(v),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn record(&mut self, value: &Value, record: &RecordDef) -> Option<Value> {
        let expected = || TypeExpr::named(record.name.clone());
        let Value::Object { type_name, args } = value else {
            return self.mismatch(&expected(), value);
        };
        if type_name != &record.name {
            self.error(
                record.name.clone(),
                format!("object of type `{type_name}`"),
                Some(format!("construct it as {}(...)", record.name)),
            );
            return None;
        }

        // Slot each argument into its field; positional args take fields in
        // declaration order.
        let mut slots: Vec<Option<&Value>> = vec![None; record.fields.len()];
        let mut extras: Vec<(PathSegment, &Value, String)> = Vec::new();
        let mut positional = 0;
        for (name, arg) in args {
            match name {
                None => {
                    if positional < record.fields.len() {
                        slots[positional] = Some(arg);
                    } else {
                        let hint = format!("{} takes {} fields", record.name, record.fields.len());
                        extras.push((PathSegment::Index(positional), arg, hint));
                    }
                    positional += 1;
                }
                Some(name) => match record.fields.iter().position(|f| &f.name == name) {
                    Some(i) if slots[i].is_some() => {
                        extras.push((PathSegment::Field(name.clone()), arg, "field given more than once".into()))
                    }
                    Some(i) => slots[i] = Some(arg),
                    None => {
                        let names: Vec<&str> = record.fields.iter().map(|f| f.name.as_str()).collect();
                        let hint = format!("unknown field; {} has fields {}", record.name, names.join(", "));
                        extras.push((PathSegment::Field(name.clone()), arg, hint));
                    }
                },
            }
        }

        let mut out = Vec::with_capacity(record.fields.len());
        let mut ok = true;
        for (field, slot) in record.fields.iter().zip(slots) {
            let seg = PathSegment::Field(field.name.clone());
            let conformed = match slot {
                Some(arg) => self.nested(seg, |w| w.walk(arg, &field.ty)),
                None if field.ty.is_optional() => Some(Value::Null),
                None => {
                    self.nested(seg, |w| {
                        w.error(render_type_expr(&field.ty), "missing field".into(), Some(format!("add {}=...", field.name)))
                    });
                    None
                }
            };
            match conformed {
                Some(v) => out.push((Some(field.name.clone()), v)),
                None => ok = false,
            }
        }
        for (seg, arg, hint) in extras {
            self.nested(seg, |w| w.error("no such argument".into(), describe_found(arg), Some(hint)));
            ok = false;
        }
        ok.then(|| Value::Object { type_name: record.name.clone(), args: out })
    }

    fn enumeration(&mut self, value: &Value, def: &EnumDef) -> Option<Value> {
        let member = match value {
            Value::EnumRef { enum_name, member } if enum_name == &def.name => member,
            Value::Str(s) => s,
            Value::EnumRef { enum_name, .. } => {
                self.error(def.name.clone(), format!("member of enum `{enum_name}`"), Some(member_hint(def)));
                return None;
            }
            _ => {
                self.error(def.name.clone(), describe_found(value), Some(member_hint(def)));
                return None;
            }
        };
        if def.has_member(member) {
            Some(Value::enum_ref(def.name.clone(), member.clone()))
        } else {
            self.error(def.name.clone(), describe_found(value), Some(member_hint(def)));
            None
        }
    }
}

fn member_hint(def: &EnumDef) -> String {
    let shown: Vec<String> =
        def.members.iter().take(HINT_MEMBERS).map(|m| format!("{}.{}", def.name, m)).collect();
    let mut hint = format!("valid members: {}", shown.join(", "));
    if def.members.len() > HINT_MEMBERS {
        hint.push_str(&format!(", ... ({} total)", def.members.len()));
    }
    hint
}
