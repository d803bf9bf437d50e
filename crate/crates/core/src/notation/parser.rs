use std::collections::HashSet;

use super::lexer::{Lexer, Token, TokenKind};
use super::{SourceError, Value};

/// Deepest container nesting accepted before the parser gives up.
pub const MAX_DEPTH: usize = 128;

/// Parses exactly one value; anything but whitespace after it is an error.
pub fn parse_value(text: &str) -> Result<Value, SourceError> {
    let mut parser = Parser::new(text)?;
    let value = parser.value(0)?;
    if parser.current.kind != TokenKind::Eof {
        return Err(parser.error_here(format!(
            "unexpected {} after the value",
            parser.current.kind.describe()
        )));
    }
    Ok(value)
}

struct Parser<'a> {
    src: &'a str,
    lexer: Lexer<'a>,
    current: Token,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, SourceError> {
        let mut lexer = Lexer::new(src);
        let current = lexer.next_token()?;
        Ok(Parser { src, lexer, current })
    }

    fn advance(&mut self) -> Result<Token, SourceError> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn error_here(&self, message: impl Into<String>) -> SourceError {
        SourceError::at(self.src, self.current.offset, message)
    }

    fn expected(&self, what: &str) -> SourceError {
        self.error_here(format!("expected {what}, found {}", self.current.kind.describe()))
    }

    fn eat(&mut self, kind: &TokenKind) -> Result<bool, SourceError> {
        if &self.current.kind == kind {
            self.advance()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn value(&mut self, depth: usize) -> Result<Value, SourceError> {
        if depth > MAX_DEPTH {
            return Err(self.error_here(format!("nesting deeper than {MAX_DEPTH} levels")));
        }
        let token = self.advance()?;
        match token.kind {
            TokenKind::Int(i) => Ok(Value::Int(i)),
            TokenKind::Float(f) => Ok(Value::Float(f)),
            TokenKind::Str(s) => Ok(Value::Str(s)),
            TokenKind::LBracket => {
                let items = self.sequence(depth, &TokenKind::RBracket, "']'")?;
                Ok(Value::List(items))
            }
            TokenKind::LParen => self.paren(depth),
            TokenKind::LBrace => self.map(depth),
            TokenKind::Ident(name) => self.identifier(name, token.offset, depth),
            other => Err(SourceError::at(
                self.src,
                token.offset,
                format!("expected a value, found {}", other.describe()),
            )),
        }
    }

    /// Comma-separated values up to `close`, trailing comma allowed.
    fn sequence(&mut self, depth: usize, close: &TokenKind, close_name: &str) -> Result<Vec<Value>, SourceError> {
        let mut items = Vec::new();
        loop {
            if self.eat(close)? {
                return Ok(items);
            }
            items.push(self.value(depth + 1)?);
            if !self.eat(&TokenKind::Comma)? {
                if self.eat(close)? {
                    return Ok(items);
                }
                return Err(self.expected(&format!("',' or {close_name}")));
            }
        }
    }

    fn paren(&mut self, depth: usize) -> Result<Value, SourceError> {
        if self.eat(&TokenKind::RParen)? {
            return Ok(Value::Tuple(Vec::new()));
        }
        let first = self.value(depth + 1)?;
        if self.eat(&TokenKind::RParen)? {
            // `(x)` is grouping, not a tuple.
            return Ok(first);
        }
        if !self.eat(&TokenKind::Comma)? {
            return Err(self.expected("',' or ')'"));
        }
        let mut items = vec![first];
        items.extend(self.sequence(depth, &TokenKind::RParen, "')'")?);
        Ok(Value::Tuple(items))
    }

    fn map(&mut self, depth: usize) -> Result<Value, SourceError> {
        let mut pairs: Vec<(Value, Value)> = Vec::new();
        loop {
            if self.eat(&TokenKind::RBrace)? {
                return Ok(Value::Map(pairs));
            }
            let key_offset = self.current.offset;
            let key = self.value(depth + 1)?;
            if !matches!(key, Value::Str(_) | Value::Int(_)) {
                return Err(SourceError::at(
                    self.src,
                    key_offset,
                    format!("dict keys must be strings or integers, found {}", key.kind()),
                ));
            }
            if pairs.iter().any(|(k, _)| k == &key) {
                return Err(SourceError::at(self.src, key_offset, format!("duplicate dict key {key}")));
            }
            if !self.eat(&TokenKind::Colon)? {
                return Err(self.expected("':'"));
            }
            let value = self.value(depth + 1)?;
            pairs.push((key, value));
            if !self.eat(&TokenKind::Comma)? {
                if self.eat(&TokenKind::RBrace)? {
                    return Ok(Value::Map(pairs));
                }
                return Err(self.expected("',' or '}'"));
            }
        }
    }

    fn identifier(&mut self, name: String, offset: usize, depth: usize) -> Result<Value, SourceError> {
        match name.as_str() {
            "None" => return Ok(Value::Null),
            "True" => return Ok(Value::Bool(true)),
            "False" => return Ok(Value::Bool(false)),
            _ => {}
        }
        match self.current.kind {
            TokenKind::Dot => {
                self.advance()?;
                let member = self.advance()?;
                match member.kind {
                    TokenKind::Ident(member) => Ok(Value::EnumRef { enum_name: name, member }),
                    other => Err(SourceError::at(
                        self.src,
                        member.offset,
                        format!("expected enum member name after `{name}.`, found {}", other.describe()),
                    )),
                }
            }
            TokenKind::LParen => {
                self.advance()?;
                self.object_args(name, depth)
            }
            _ => Err(SourceError::at(
                self.src,
                offset,
                format!("bare identifier `{name}` is not a value; use a string, `Enum.member` or `Type(...)`"),
            )),
        }
    }

    fn object_args(&mut self, type_name: String, depth: usize) -> Result<Value, SourceError> {
        let mut args: Vec<(Option<String>, Value)> = Vec::new();
        let mut seen = HashSet::new();
        loop {
            if self.eat(&TokenKind::RParen)? {
                return Ok(Value::Object { type_name, args });
            }
            let arg_offset = self.current.offset;
            let name = self.keyword_name()?;
            match name {
                Some(name) => {
                    if !seen.insert(name.clone()) {
                        return Err(SourceError::at(
                            self.src,
                            arg_offset,
                            format!("duplicate keyword argument `{name}`"),
                        ));
                    }
                    let value = self.value(depth + 1)?;
                    args.push((Some(name), value));
                }
                None => {
                    if !seen.is_empty() {
                        return Err(SourceError::at(
                            self.src,
                            arg_offset,
                            "positional argument follows keyword argument",
                        ));
                    }
                    let value = self.value(depth + 1)?;
                    args.push((None, value));
                }
            }
            if !self.eat(&TokenKind::Comma)? {
                if self.eat(&TokenKind::RParen)? {
                    return Ok(Value::Object { type_name, args });
                }
                return Err(self.expected("',' or ')'"));
            }
        }
    }

    /// Consumes `name =` when present, using a cloned lexer for the second
    /// token of lookahead.
    fn keyword_name(&mut self) -> Result<Option<String>, SourceError> {
        let TokenKind::Ident(name) = &self.current.kind else {
            return Ok(None);
        };
        match self.lexer.clone().next_token() {
            Ok(Token { kind: TokenKind::Equals, .. }) => {
                let name = name.clone();
                self.advance()?;
                self.advance()?;
                Ok(Some(name))
            }
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn ok(text: &str) -> Value {
        parse_value(text).unwrap_or_else(|e| panic!("{text:?}: {e}"))
    }

    fn err(text: &str) -> SourceError {
        parse_value(text).expect_err(text)
    }

    #[test]
    fn person_object() {
        let v = ok(r#"Person(first_name="Marie", last_name="Curie", yob=1901, likes=["Research"])"#);
        let Value::Object { type_name, args } = &v else { panic!() };
        assert_eq!(type_name, "Person");
        assert_eq!(args.len(), 4);
        assert!(args.iter().all(|(n, _)| n.is_some()));
        assert_eq!(v.arg("yob"), Some(&Value::int(1901)));
        assert_eq!(v.arg("likes"), Some(&Value::List(vec![Value::str("Research")])));
    }

    #[test]
    fn nutrition_object() {
        let v = ok("NutritionInformation(calories=600, protein=35, carbohydrates=75, fats=20, fiber=3, sodium=1500)");
        let Value::Object { args, .. } = v else { panic!() };
        assert_eq!(args.len(), 6);
        assert!(args.iter().all(|(_, v)| matches!(v, Value::Int(_))));
    }

    #[test]
    fn spaces_around_equals() {
        let v = ok("FoodAnalysis(nutrition_info = NutritionInformation(calories=600), health_rating='Moderately Healthy')");
        assert_eq!(v.arg("health_rating"), Some(&Value::str("Moderately Healthy")));
    }

    #[test]
    fn keywords_and_scalars() {
        assert_eq!(ok("None"), Value::Null);
        assert_eq!(ok("True"), Value::Bool(true));
        assert_eq!(ok(" False \n"), Value::Bool(false));
        assert_eq!(ok("-12"), Value::int(-12));
        assert_eq!(ok("+7"), Value::int(7));
        assert_eq!(ok("1_000_000"), Value::int(1_000_000));
        assert_eq!(ok("2.5"), Value::Float(2.5));
        assert_eq!(ok("1e3"), Value::Float(1000.0));
        assert_eq!(ok("-1.5E-2"), Value::Float(-0.015));
        assert_eq!(ok("3."), Value::Float(3.0));
        let big = "123456789012345678901234567890";
        assert_eq!(ok(big), Value::Int(big.parse::<BigInt>().unwrap()));
    }

    #[test]
    fn strings_and_escapes() {
        assert_eq!(ok(r#""a\"b""#), Value::str("a\"b"));
        assert_eq!(ok(r#"'it\'s'"#), Value::str("it's"));
        assert_eq!(ok(r#""tab\there\nnl\r\\""#), Value::str("tab\there\nnl\r\\"));
        assert_eq!(ok(r#""é中""#), Value::str("é中"));
        assert_eq!(ok("'double \" inside'"), Value::str("double \" inside"));
        let e = err(r#""bad \q""#);
        assert!(e.message.contains("invalid escape"), "{e}");
        assert_eq!(e.column, 6);
        assert!(err(r#""\ud800""#).message.contains("not a valid character"));
        assert!(err(r#""\u12""#).message.contains("four hex digits"));
        assert!(err(r#""open"#).message.contains("unterminated"));
    }

    #[test]
    fn containers() {
        assert_eq!(ok("[]"), Value::List(vec![]));
        assert_eq!(ok("[1, 2,]"), Value::List(vec![Value::int(1), Value::int(2)]));
        assert_eq!(ok("()"), Value::Tuple(vec![]));
        assert_eq!(ok("(5,)"), Value::Tuple(vec![Value::int(5)]));
        assert_eq!(ok("(5)"), Value::int(5));
        assert_eq!(ok("(1, 'a')"), Value::Tuple(vec![Value::int(1), Value::str("a")]));
        assert_eq!(
            ok("{'a': 1, 2: None,}"),
            Value::Map(vec![(Value::str("a"), Value::int(1)), (Value::int(2), Value::Null)])
        );
        assert_eq!(ok("Empty()"), Value::Object { type_name: "Empty".into(), args: vec![] });
        assert_eq!(
            ok("[\n  Label.play_music,\n  Label.alarm_set\n]"),
            Value::List(vec![Value::enum_ref("Label", "play_music"), Value::enum_ref("Label", "alarm_set")])
        );
    }

    #[test]
    fn positional_then_named() {
        let v = ok("Point(1, 2, label='p')");
        let Value::Object { args, .. } = v else { panic!() };
        assert_eq!(args[0].0, None);
        assert_eq!(args[1].0, None);
        assert_eq!(args[2].0.as_deref(), Some("label"));
        assert!(err("Point(x=1, 2)").message.contains("positional argument follows"));
    }

    #[test]
    fn unbalanced_bracket_points_at_end() {
        let text = r#"Person(first_name="A""#;
        let e = err(text);
        assert_eq!(e.line, 1);
        assert_eq!(e.column, text.chars().count() + 1);
        assert!(e.message.contains("end of input"), "{e}");
    }

    #[test]
    fn multi_line_positions() {
        let e = err("[\n  1,\n  2 3\n]");
        assert_eq!((e.line, e.column), (3, 5));
        assert_eq!(e.excerpt, "  2 3");
        assert!(e.display_with_excerpt().ends_with("    ^"));
    }

    #[test]
    fn rejected_inputs() {
        for text in [
            "", "inf", "nan", "-inf", "1+2", "1 2", "[1,,2]", "[,]", "{1: 2", "{[1]: 2}", "{'a': 1, 'a': 2}",
            "P(a=1, a=2)", "play_music", "Label.", "Label.1", "1e999", "1__0", "1_", "12abc", ")", "P(=1)",
            "(1 2)", "{'a' 1}", "@",
        ] {
            assert!(parse_value(text).is_err(), "{text:?} should fail");
        }
        assert!(err("P(a=1, a=2)").message.contains("duplicate keyword"));
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let deep = "[".repeat(100_000);
        assert!(err(&deep).message.contains("nesting"));
        let ok_depth = format!("{}{}", "[".repeat(MAX_DEPTH), "]".repeat(MAX_DEPTH));
        assert!(parse_value(&ok_depth).is_ok());
    }

    #[test]
    fn never_evaluates() {
        // Calls are just data.
        let v = ok("__import__('os')");
        assert!(matches!(v, Value::Object { ref type_name, .. } if type_name == "__import__"));
    }
}
