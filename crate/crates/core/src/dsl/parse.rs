use std::fmt;

use thiserror::Error;

use super::{Expr, MAX_EXPONENT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: found {found}, expected {}", expected.join(" | "))]
    Syntax {
        offset: usize,
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("exponent at byte {offset} must be an integer literal")]
    NonIntegerExponent { offset: usize },
    #[error("exponent {value} at byte {offset} is outside -64..=64")]
    ExponentOutOfRange { offset: usize, value: i64 },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("number at byte {offset} is not representable")]
    NumberOutOfRange { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match *self {
            ParseError::Syntax { offset, .. }
            | ParseError::NonIntegerExponent { offset }
            | ParseError::ExponentOutOfRange { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::NumberOutOfRange { offset } => offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, imag: bool, integral: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num { .. } => f.write_str("number"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    fn peek_byte(&self, at: usize) -> Option<u8> {
        self.bytes().get(at).copied()
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        while let Some(b) = self.peek_byte(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
        let start = self.pos;
        let Some(b) = self.peek_byte(start) else {
            return Ok((start, Tok::End));
        };
        let single = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((start, t));
        }
        if b.is_ascii_digit() || (b == b'.' && self.peek_byte(start + 1).is_some_and(|c| c.is_ascii_digit())) {
            return self.number(start);
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let mut end = start;
            while self.peek_byte(end).is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((start, Tok::Ident(self.src[start..end].to_string())));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError::Syntax {
            offset: start,
            found: format!("`{ch}`"),
            expected: vec!["number", "`z`", "`i`", "`exp`", "`(`", "`-`"],
        })
    }

    fn number(&mut self, start: usize) -> Result<(usize, Tok), ParseError> {
        let digits = |lx: &Self, mut at: usize| {
            while lx.peek_byte(at).is_some_and(|c| c.is_ascii_digit()) {
                at += 1;
            }
            at
        };
        let mut end = digits(self, start);
        let mut integral = true;
        if self.peek_byte(end) == Some(b'.') {
            integral = false;
            end = digits(self, end + 1);
        }
        if matches!(self.peek_byte(end), Some(b'e' | b'E')) {
            let mut at = end + 1;
            if matches!(self.peek_byte(at), Some(b'+' | b'-')) {
                at += 1;
            }
            if self.peek_byte(at).is_some_and(|c| c.is_ascii_digit()) {
                integral = false;
                end = digits(self, at);
            }
        }
        let value: f64 = self.src[start..end]
            .parse()
            .map_err(|_| ParseError::NumberOutOfRange { offset: start })?;
        if !value.is_finite() {
            return Err(ParseError::NumberOutOfRange { offset: start });
        }
        let imag = self.peek_byte(end) == Some(b'i')
            && !self
                .peek_byte(end + 1)
                .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_');
        if imag {
            end += 1;
        }
        self.pos = end;
        Ok((start, Tok::Num { value, imag, integral }))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
}

/// Parses a map expression.
///
/// Precedence, tightest first: `^` (exponent must be an integer literal),
/// unary `-`, then left-associative `* /`, then left-associative `+ -`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut lexer = Lexer { src: text, pos: 0 };
    let (offset, tok) = lexer.next()?;
    let mut p = Parser { lexer, tok, offset };
    let e = p.additive()?;
    if p.tok != Tok::End {
        return Err(p.unexpected(vec!["`+`", "`-`", "`*`", "`/`", "`^`", "end of input"]));
    }
    Ok(e)
}

impl Parser<'_> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (offset, tok) = self.lexer.next()?;
        self.offset = offset;
        self.tok = tok;
        Ok(())
    }

    fn unexpected(&self, expected: Vec<&'static str>) -> ParseError {
        ParseError::Syntax { offset: self.offset, found: self.tok.to_string(), expected }
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if self.tok == tok {
            self.bump()
        } else {
            Err(self.unexpected(vec![name]))
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let ctor: fn(Expr, Expr) -> Expr = match self.tok {
                Tok::Plus => Expr::add,
                Tok::Minus => Expr::sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.multiplicative()?;
            lhs = ctor(lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let ctor: fn(Expr, Expr) -> Expr = match self.tok {
                Tok::Star => Expr::mul,
                Tok::Slash => Expr::div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = ctor(lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Minus {
            self.bump()?;
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.bump()?;
        let k = self.exponent()?;
        if self.tok == Tok::Caret {
            // a^k^m would need the non-literal exponent k^m
            return Err(ParseError::NonIntegerExponent { offset: self.offset });
        }
        Ok(Expr::pow(base, k))
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let start = self.offset;
        let parens = self.tok == Tok::LParen;
        if parens {
            self.bump()?;
        }
        let negative = match self.tok {
            Tok::Minus => {
                self.bump()?;
                true
            }
            Tok::Plus => {
                self.bump()?;
                false
            }
            _ => false,
        };
        let value = match self.tok {
            Tok::Num { value, imag: false, integral: true } => value,
            Tok::Num { .. } | Tok::Ident(_) | Tok::LParen => {
                return Err(ParseError::NonIntegerExponent { offset: self.offset })
            }
            _ => return Err(self.unexpected(vec!["integer exponent"])),
        };
        self.bump()?;
        if parens {
            if self.tok != Tok::RParen {
                return Err(ParseError::NonIntegerExponent { offset: start });
            }
            self.bump()?;
        }
        let signed = if negative { -value } else { value };
        if signed.abs() > MAX_EXPONENT as f64 {
            return Err(ParseError::ExponentOutOfRange {
                offset: start,
                value: signed.clamp(i64::MIN as f64, i64::MAX as f64) as i64,
            });
        }
        Ok(signed as i32)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num { value, imag, .. } => {
                self.bump()?;
                Ok(if imag { Expr::Imag(value) } else { Expr::Real(value) })
            }
            Tok::Ident(name) => {
                let offset = self.offset;
                match name.as_str() {
                    "z" => {
                        self.bump()?;
                        Ok(Expr::Var)
                    }
                    "i" => {
                        self.bump()?;
                        Ok(Expr::Imag(1.0))
                    }
                    "exp" => {
                        self.bump()?;
                        self.expect(Tok::LParen, "`(`")?;
                        let arg = self.additive()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::exp(arg))
                    }
                    _ => Err(ParseError::UnknownIdentifier { offset, name }),
                }
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.additive()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.unexpected(vec!["number", "`z`", "`i`", "`exp`", "`(`", "`-`"])),
        }
    }
}
