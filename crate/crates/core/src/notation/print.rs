use std::fmt::Write;

use super::Value;

/// Deterministic single-line rendering that [`parse_value`](super::parse_value)
/// reads back to an equal value.
pub fn render_value(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("None"),
        Value::Bool(true) => out.push_str("True"),
        Value::Bool(false) => out.push_str("False"),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(f) => write_float(out, *f),
        Value::Str(s) => {
            out.push('"');
            out.push_str(&escape_str(s));
            out.push('"');
        }
        Value::List(items) => {
            out.push('[');
            write_items(out, items);
            out.push(']');
        }
        Value::Tuple(items) => {
            out.push('(');
            write_items(out, items);
            if items.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        Value::Map(pairs) => {
            out.push('{');
            for (i, (key, value)) in pairs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, key);
                out.push_str(": ");
                write_value(out, value);
            }
            out.push('}');
        }
        Value::EnumRef { enum_name, member } => {
            out.push_str(enum_name);
            out.push('.');
            out.push_str(member);
        }
        Value::Object { type_name, args } => {
            out.push_str(type_name);
            out.push('(');
            for (i, (name, value)) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                if let Some(name) = name {
                    out.push_str(name);
                    out.push('=');
                }
                write_value(out, value);
            }
            out.push(')');
        }
    }
}

fn write_items(out: &mut String, items: &[Value]) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_value(out, item);
    }
}

fn write_float(out: &mut String, f: f64) {
    // `{:?}` is the shortest representation that round-trips and always
    // carries a `.` or an exponent, so floats never read back as ints.
    debug_assert!(f.is_finite());
    let _ = write!(out, "{f:?}");
}

/// Escapes for a double-quoted literal: quote, backslash, and control
/// characters. Everything else is kept verbatim.
pub fn escape_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c.is_control() && (c as u32) <= 0xFFFF => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}
