// SPDX-License-Identifier: Apache-2.0

//! Tokenizer for the Verilog subset.

use super::ast::{mask, Base, Span, MAX_VALUE_WIDTH};
use super::FrontendError;

/// A numeric literal as written. `care` has a 0 for every `?`/`z` digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumTok {
    pub width: u32,
    pub value: u128,
    pub care: u128,
    pub signed: bool,
    pub sized: bool,
    pub base: Base,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(NumTok),
    Sym(&'static str),
    /// `(* assure_skip *)` or `// assure: skip`
    SkipPragma,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest first.
const SYMBOLS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "~^", "^~", "~&", "~|", "**", "+:",
    "-:", "(", ")", "[", "]", "{", "}", ";", ",", ":", ".", "#", "@", "=", "+", "-", "*", "/", "%", "&", "|", "^", "~",
    "!", "<", ">", "?",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }

    fn rest_starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s.as_bytes())
    }

    fn err(&self, span: Span, msg: impl Into<String>) -> FrontendError {
        FrontendError::Syntax { line: span.line, col: span.col, expected: msg.into() }
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, FrontendError> {
    let mut lx = Lexer { src: text.as_bytes(), pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        // whitespace and comments
        match lx.peek() {
            None => {
                out.push(Token { tok: Tok::Eof, span: lx.span() });
                return Ok(out);
            }
            Some(c) if c.is_ascii_whitespace() => {
                lx.bump();
                continue;
            }
            Some(b'/') if lx.peek_at(1) == Some(b'/') => {
                let span = lx.span();
                let start = lx.pos;
                while !matches!(lx.peek(), None | Some(b'\n')) {
                    lx.bump();
                }
                let body = &text[start + 2..lx.pos];
                if is_skip_comment(body) {
                    out.push(Token { tok: Tok::SkipPragma, span });
                }
                continue;
            }
            Some(b'/') if lx.peek_at(1) == Some(b'*') => {
                let span = lx.span();
                lx.bump();
                lx.bump();
                loop {
                    match lx.peek() {
                        None => return Err(lx.err(span, "end of block comment")),
                        Some(b'*') if lx.peek_at(1) == Some(b'/') => {
                            lx.bump();
                            lx.bump();
                            break;
                        }
                        _ => {
                            lx.bump();
                        }
                    }
                }
                continue;
            }
            Some(b'(') if lx.peek_at(1) == Some(b'*') && lx.peek_at(2) != Some(b')') => {
                let span = lx.span();
                lx.bump();
                lx.bump();
                let start = lx.pos;
                loop {
                    match lx.peek() {
                        None => return Err(lx.err(span, "end of attribute `*)`")),
                        Some(b'*') if lx.peek_at(1) == Some(b')') => break,
                        _ => {
                            lx.bump();
                        }
                    }
                }
                let body = text[start..lx.pos].trim().to_string();
                lx.bump();
                lx.bump();
                if body.split(',').any(|a| a.trim() == "assure_skip") {
                    out.push(Token { tok: Tok::SkipPragma, span });
                }
                continue;
            }
            Some(b'`') => {
                let span = lx.span();
                if lx.rest_starts_with("`timescale") {
                    while !matches!(lx.peek(), None | Some(b'\n')) {
                        lx.bump();
                    }
                    continue;
                }
                return Err(FrontendError::Unsupported { name: "compiler directive".into(), line: span.line });
            }
            _ => {}
        }

        let span = lx.span();
        let c = lx.peek().unwrap();
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let start = lx.pos;
            while matches!(lx.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_' || c == b'$') {
                lx.bump();
            }
            let word = &text[start..lx.pos];
            if word.starts_with('$') {
                return Err(FrontendError::Unsupported { name: format!("system task {word}"), line: span.line });
            }
            out.push(Token { tok: Tok::Ident(word.to_string()), span });
        } else if c.is_ascii_digit() || c == b'\'' {
            let n = lex_number(&mut lx, span)?;
            out.push(Token { tok: Tok::Number(n), span });
        } else if c == b'\\' {
            return Err(FrontendError::Unsupported { name: "escaped identifier".into(), line: span.line });
        } else {
            let sym = SYMBOLS
                .iter()
                .find(|s| lx.rest_starts_with(s))
                .ok_or_else(|| lx.err(span, format!("valid character, found `{}`", c as char)))?;
            for _ in 0..sym.len() {
                lx.bump();
            }
            out.push(Token { tok: Tok::Sym(sym), span });
        }
    }
}

fn is_skip_comment(body: &str) -> bool {
    let body = body.trim();
    match body.strip_prefix("assure:") {
        Some(rest) => rest.trim() == "skip",
        None => false,
    }
}

fn lex_number(lx: &mut Lexer<'_>, span: Span) -> Result<NumTok, FrontendError> {
    let digits = |lx: &mut Lexer<'_>| {
        let mut s = String::new();
        while let Some(c) = lx.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'?' {
                lx.bump();
                if c != b'_' {
                    s.push(c as char);
                }
            } else {
                break;
            }
        }
        s
    };

    let mut size = None;
    if lx.peek() != Some(b'\'') {
        let mut s = String::new();
        while let Some(c) = lx.peek() {
            if c.is_ascii_digit() || c == b'_' {
                lx.bump();
                if c != b'_' {
                    s.push(c as char);
                }
            } else {
                break;
            }
        }
        // skip whitespace between size and base is not allowed in the subset
        if lx.peek() != Some(b'\'') {
            let value: u128 = s.parse().map_err(|_| lx.err(span, "decimal number"))?;
            if value > u32::MAX as u128 {
                return Err(lx.err(span, "integer literal that fits in 32 bits"));
            }
            return Ok(NumTok { width: 32, value, care: mask(32), signed: true, sized: false, base: Base::Dec });
        }
        size = Some(s.parse::<u32>().map_err(|_| lx.err(span, "literal size"))?);
    }
    lx.bump(); // '
    let mut signed = false;
    if matches!(lx.peek(), Some(b's') | Some(b'S')) {
        lx.bump();
        signed = true;
    }
    let base = match lx.bump().map(|c| c.to_ascii_lowercase()) {
        Some(b'b') => Base::Bin,
        Some(b'o') => Base::Oct,
        Some(b'd') => Base::Dec,
        Some(b'h') => Base::Hex,
        _ => return Err(lx.err(span, "base specifier b, o, d or h")),
    };
    let body = digits(lx);
    if body.is_empty() {
        return Err(lx.err(span, "digits after base"));
    }
    let width = size.unwrap_or(32);
    if width == 0 {
        return Err(lx.err(span, "nonzero literal width"));
    }
    if width > MAX_VALUE_WIDTH {
        return Err(FrontendError::Unsupported {
            name: format!("literal wider than {MAX_VALUE_WIDTH} bits"),
            line: span.line,
        });
    }
    let (value, care) = parse_digits(&body, base).ok_or_else(|| {
        if body.chars().any(|c| matches!(c, 'x' | 'X')) {
            FrontendError::Unsupported { name: "x value (two-state only)".into(), line: span.line }
        } else {
            lx.err(span, format!("valid digits for base, found `{body}`"))
        }
    })?;
    // Unknown high digits (? / z) extend to the full width.
    let written_bits = match base {
        Base::Bin => body.len() as u32,
        Base::Oct => 3 * body.len() as u32,
        Base::Hex => 4 * body.len() as u32,
        Base::Dec => width,
    };
    let care = if written_bits < width && care & (1u128 << (written_bits - 1).min(127)) == 0 {
        care & mask(written_bits)
    } else {
        care | (mask(width) & !mask(written_bits.min(128)))
    };
    Ok(NumTok { width, value: value & mask(width), care: care & mask(width), signed, sized: size.is_some(), base })
}

fn parse_digits(body: &str, base: Base) -> Option<(u128, u128)> {
    let radix_bits = match base {
        Base::Bin => 1,
        Base::Oct => 3,
        Base::Hex => 4,
        Base::Dec => {
            if body.chars().all(|c| matches!(c, '?' | 'z' | 'Z')) {
                return Some((0, 0));
            }
            let v: u128 = body.parse().ok()?;
            return Some((v, u128::MAX));
        }
    };
    let mut value: u128 = 0;
    let mut care: u128 = 0;
    for ch in body.chars() {
        let (d, c) = match ch {
            '?' | 'z' | 'Z' => (0, 0),
            _ => (ch.to_digit(1 << radix_bits)? as u128, (1u128 << radix_bits) - 1),
        };
        value = value.checked_shl(radix_bits)? | d;
        care = (care << radix_bits) | c;
    }
    Some((value, care))
}
