//! Parses the surface syntax printed by `render_type_expr` back into a
//! [`TypeExpr`]: `int - Year of Birth`, `list[str]`, `str | None`,
//! `dict[str, list[Person]]`, `tuple[int, float]`.
//!
//! A meaning runs from the first top-level ` - ` to the end, except that a
//! trailing ` | None` makes the annotated type optional. Parentheses group.

use typed_prompt::notation::SourceError;
use typed_prompt::schema::{is_identifier, TypeExpr};

const NONE_SUFFIX: &str = " | None";

pub fn parse_type_text(text: &str) -> Result<TypeExpr, SourceError> {
    let expr = Parser { text }.parse(0, text.len())?;
    expr.check().map_err(|e| SourceError::at(text, 0, e.to_string()))?;
    Ok(expr)
}

struct Parser<'a> {
    text: &'a str,
}

impl Parser<'_> {
    fn err(&self, at: usize, message: impl Into<String>) -> SourceError {
        SourceError::at(self.text, at, message)
    }

    /// Parses `text[start..end]`, trimmed.
    fn parse(&self, start: usize, end: usize) -> Result<TypeExpr, SourceError> {
        let slice = &self.text[start..end];
        let lead = slice.len() - slice.trim_start().len();
        let (start, end) = (start + lead, start + lead + slice.trim().len());
        let s = &self.text[start..end];
        if s.is_empty() {
            return Err(self.err(start, "expected a type"));
        }

        if let Some(i) = top_level_find(s, " - ") {
            let inner = self.parse(start, start + i)?;
            let meaning = s[i + 3..].trim();
            let (meaning, optional) = match meaning.strip_suffix(NONE_SUFFIX) {
                Some(m) => (m.trim_end(), true),
                None => (meaning, false),
            };
            if meaning.is_empty() {
                return Err(self.err(start + i + 3, "expected a meaning after ` - `"));
            }
            let annotated = TypeExpr::semantic(inner, meaning);
            return Ok(if optional { TypeExpr::optional(annotated) } else { annotated });
        }

        if let Some(i) = top_level_rfind(s, "|") {
            let rest = s[i + 1..].trim();
            if rest != "None" {
                return Err(self.err(start + i, "only `| None` unions are supported"));
            }
            return Ok(TypeExpr::optional(self.parse(start, start + i)?));
        }

        if s.starts_with('(') {
            if matching_close(s, 0) != Some(s.len() - 1) {
                return Err(self.err(start, "unbalanced `(`"));
            }
            return self.parse(start + 1, end - 1);
        }

        if let Some(open) = s.find('[') {
            let head = &s[..open];
            if matching_close(s, open) != Some(s.len() - 1) {
                return Err(self.err(start + open, "unbalanced `[`"));
            }
            let args = self.split_args(start + open + 1, end - 1)?;
            let arity = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(self.err(start, format!("`{head}` takes {n} type argument(s), found {}", args.len())))
                }
            };
            return match head {
                "list" => {
                    arity(1)?;
                    Ok(TypeExpr::list(self.parse(args[0].0, args[0].1)?))
                }
                "dict" => {
                    arity(2)?;
                    Ok(TypeExpr::mapping(self.parse(args[0].0, args[0].1)?, self.parse(args[1].0, args[1].1)?))
                }
                "tuple" => Ok(TypeExpr::tuple(
                    args.iter().map(|(a, b)| self.parse(*a, *b)).collect::<Result<_, _>>()?,
                )),
                _ => Err(self.err(start, format!("unknown type constructor `{head}`"))),
            };
        }

        match s {
            "int" => Ok(TypeExpr::int()),
            "float" => Ok(TypeExpr::float()),
            "str" => Ok(TypeExpr::str()),
            "bool" => Ok(TypeExpr::bool()),
            name if is_identifier(name) => Ok(TypeExpr::named(name)),
            _ => Err(self.err(start, format!("`{s}` is not a type"))),
        }
    }

    /// Splits a bracket interior on top-level commas. An empty interior
    /// has no arguments.
    fn split_args(&self, start: usize, end: usize) -> Result<Vec<(usize, usize)>, SourceError> {
        let s = &self.text[start..end];
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut from = 0;
        for (i, c) in s.char_indices() {
            match c {
                '[' | '(' => depth += 1,
                ']' | ')' => depth -= 1,
                ',' if depth == 0 => {
                    out.push((start + from, start + i));
                    from = i + 1;
                }
                _ => {}
            }
        }
        out.push((start + from, end));
        Ok(out)
    }
}

fn top_level_positions(s: &str, needle: &str) -> Vec<usize> {
    let mut depth = 0i32;
    let mut out = Vec::new();
    for (i, c) in s.char_indices() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            _ if depth == 0 && s[i..].starts_with(needle) => out.push(i),
            _ => {}
        }
    }
    out
}

fn top_level_find(s: &str, needle: &str) -> Option<usize> {
    top_level_positions(s, needle).first().copied()
}

fn top_level_rfind(s: &str, needle: &str) -> Option<usize> {
    top_level_positions(s, needle).last().copied()
}

fn matching_close(s: &str, open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, c) in s[open..].char_indices() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use typed_prompt::render::render_type_expr;

    fn round(text: &str) {
        let ty = parse_type_text(text).unwrap();
        assert_eq!(render_type_expr(&ty), text);
    }

    #[test]
    fn surface_forms() {
        for text in [
            "int",
            "int - Year of Birth",
            "list[str]",
            "str | None",
            "dict[str, list[Person]]",
            "tuple[int, float - Celsius, bool]",
            "tuple[]",
            "list[int] | None - Scores if known",
            "int - Year of Birth | None",
            "dict[int, Label | None]",
        ] {
            round(text);
        }
    }

    #[test]
    fn meaning_keeps_dashes_and_brackets() {
        let ty = parse_type_text("str - Name - as printed [sic]").unwrap();
        assert_eq!(ty, TypeExpr::semantic(TypeExpr::str(), "Name - as printed [sic]"));
    }

    #[test]
    fn optional_suffix_wraps_the_annotation() {
        assert_eq!(
            parse_type_text("int - Year | None").unwrap(),
            TypeExpr::optional(TypeExpr::semantic(TypeExpr::int(), "Year"))
        );
        assert_eq!(
            parse_type_text("(int | None) - Year").unwrap(),
            TypeExpr::semantic(TypeExpr::optional(TypeExpr::int()), "Year")
        );
    }

    #[test]
    fn errors_carry_columns() {
        let e = parse_type_text("list[int").unwrap_err();
        assert_eq!(e.column, 5);
        let e = parse_type_text("dict[str]").unwrap_err();
        assert!(e.message.contains("takes 2"));
        let e = parse_type_text("int | str").unwrap_err();
        assert_eq!((e.column, e.message.as_str()), (5, "only `| None` unions are supported"));
        assert!(parse_type_text("dict[float, int]").unwrap_err().message.contains("mapping keys"));
        assert!(parse_type_text("str | None | None").is_err());
        assert!(parse_type_text("int - ").is_err());
        assert!(parse_type_text("9lives").is_err());
        assert!(parse_type_text("").is_err());
    }
}
