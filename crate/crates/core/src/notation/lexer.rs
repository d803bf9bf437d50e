use std::str::FromStr;

use num_bigint::BigInt;

use super::SourceError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum TokenKind {
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Equals,
    Dot,
    Ident(String),
    Int(BigInt),
    Float(f64),
    Str(String),
    Eof,
}

impl TokenKind {
    pub(super) fn describe(&self) -> String {
        match self {
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::LBracket => "'['".into(),
            TokenKind::RBracket => "']'".into(),
            TokenKind::LBrace => "'{'".into(),
            TokenKind::RBrace => "'}'".into(),
            TokenKind::Comma => "','".into(),
            TokenKind::Colon => "':'".into(),
            TokenKind::Equals => "'='".into(),
            TokenKind::Dot => "'.'".into(),
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Int(_) => "integer".into(),
            TokenKind::Float(_) => "float".into(),
            TokenKind::Str(_) => "string".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character.
    pub offset: usize,
}

#[derive(Clone)]
pub(super) struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub(super) fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> SourceError {
        SourceError::at(self.src, offset, message)
    }

    pub(super) fn next_token(&mut self) -> Result<Token, SourceError> {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok(Token { kind: TokenKind::Eof, offset: start });
        };
        let single = match c {
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            '[' => Some(TokenKind::LBracket),
            ']' => Some(TokenKind::RBracket),
            '{' => Some(TokenKind::LBrace),
            '}' => Some(TokenKind::RBrace),
            ',' => Some(TokenKind::Comma),
            ':' => Some(TokenKind::Colon),
            '=' => Some(TokenKind::Equals),
            '.' => Some(TokenKind::Dot),
            _ => None,
        };
        if let Some(kind) = single {
            self.bump();
            return Ok(Token { kind, offset: start });
        }
        let kind = match c {
            '"' | '\'' => self.string(c)?,
            '0'..='9' => self.number()?,
            '+' | '-' if matches!(self.peek_at(1), Some('0'..='9')) => self.number()?,
            c if c.is_ascii_alphabetic() || c == '_' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.bump();
                }
                TokenKind::Ident(self.src[start..self.pos].to_string())
            }
            other => return Err(self.error(start, format!("unexpected character {other:?}"))),
        };
        Ok(Token { kind, offset: start })
    }

    fn string(&mut self, quote: char) -> Result<TokenKind, SourceError> {
        let start = self.pos;
        self.bump();
        let mut out = String::new();
        loop {
            let here = self.pos;
            match self.bump() {
                None => return Err(self.error(self.pos, "unterminated string literal")),
                Some(c) if c == quote => return Ok(TokenKind::Str(out)),
                Some('\\') => {
                    let escaped = match self.bump() {
                        Some('\\') => '\\',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some('u') => self.unicode_escape(here)?,
                        Some(other) => {
                            return Err(self.error(here, format!("invalid escape sequence \\{other}")))
                        }
                        None => return Err(self.error(self.pos, "unterminated string literal")),
                    };
                    out.push(escaped);
                }
                Some(c) => out.push(c),
            }
            debug_assert!(self.pos > start);
        }
    }

    fn unicode_escape(&mut self, escape_start: usize) -> Result<char, SourceError> {
        let mut code = 0u32;
        for _ in 0..4 {
            let digit = self.peek().and_then(|c| c.to_digit(16));
            match digit {
                Some(d) => {
                    self.bump();
                    code = code * 16 + d;
                }
                None => {
                    return Err(self.error(escape_start, "\\u escape needs exactly four hex digits"))
                }
            }
        }
        char::from_u32(code)
            .ok_or_else(|| self.error(escape_start, format!("\\u{code:04x} is not a valid character")))
    }

    fn digits(&mut self) -> Result<(), SourceError> {
        // At least one digit; underscores only between digits.
        if !matches!(self.peek(), Some('0'..='9')) {
            return Err(self.error(self.pos, "expected digit"));
        }
        loop {
            match self.peek() {
                Some('0'..='9') => {
                    self.bump();
                }
                Some('_') if matches!(self.peek_at(1), Some('0'..='9')) => {
                    self.bump();
                }
                Some('_') => return Err(self.error(self.pos, "misplaced '_' in number")),
                _ => return Ok(()),
            }
        }
    }

    fn number(&mut self) -> Result<TokenKind, SourceError> {
        let start = self.pos;
        if matches!(self.peek(), Some('+' | '-')) {
            self.bump();
        }
        self.digits()?;
        let mut is_float = false;
        if self.peek() == Some('.') {
            is_float = true;
            self.bump();
            if matches!(self.peek(), Some('0'..='9')) {
                self.digits()?;
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            is_float = true;
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            self.digits()?;
        }
        if matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            return Err(self.error(self.pos, "unexpected character in number literal"));
        }
        let text: String = self.src[start..self.pos].chars().filter(|&c| c != '_').collect();
        if is_float {
            let f = f64::from_str(&text).map_err(|_| self.error(start, "invalid float literal"))?;
            if !f.is_finite() {
                return Err(self.error(start, "float literal out of range"));
            }
            Ok(TokenKind::Float(f))
        } else {
            let i = BigInt::from_str(&text).map_err(|_| self.error(start, "invalid integer literal"))?;
            Ok(TokenKind::Int(i))
        }
    }
}
