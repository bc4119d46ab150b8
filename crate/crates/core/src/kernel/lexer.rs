use std::fmt;

use super::KernelError;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident,
    /// Value plus suffix flags.
    Int { value: u64, unsigned: bool, long: bool },
    Float(f32),
    Punct(&'static str),
    Keyword(&'static str),
    /// Character the lexer could not classify.
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub pos: Pos,
    /// Byte offset of the lexeme in the source.
    pub offset: usize,
}

const KEYWORDS: &[&str] = &["if", "else", "for"];

// Longest first so that maximal munch works by prefix test.
const PUNCTS: &[&str] = &[
    "<<=", ">>=", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~", "&", "|", "^", "?",
    ":", ";", ",", ".", "(", ")", "[", "]", "{", "}",
];

/// Lexes the whole source. Never fails: unknown characters become
/// [`TokenKind::Error`] tokens.
pub fn lex(src: &str) -> Vec<Token> {
    Lexer::new(src).run()
}

/// Lexes the source, failing on the first illegal character or malformed
/// literal.
pub fn tokenize(src: &str) -> Result<Vec<Token>, KernelError> {
    let tokens = lex(src);
    if let Some(bad) = tokens.iter().find(|t| t.kind == TokenKind::Error) {
        return Err(KernelError::lex(bad.pos, format!("illegal character '{}'", bad.lexeme.escape_debug())));
    }
    Ok(tokens)
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    i: usize,
    line: u32,
    col: u32,
    out: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, bytes: src.as_bytes(), i: 0, line: 1, col: 1, out: Vec::new() }
    }

    fn peek(&self, k: usize) -> u8 {
        self.bytes.get(self.i + k).copied().unwrap_or(0)
    }

    fn advance_to(&mut self, end: usize) {
        for ch in self.src[self.i..end].chars() {
            if ch == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.i = end;
    }

    fn push(&mut self, kind: TokenKind, end: usize) {
        let tok = Token {
            kind,
            lexeme: self.src[self.i..end].to_string(),
            pos: Pos { line: self.line, col: self.col },
            offset: self.i,
        };
        self.out.push(tok);
        self.advance_to(end);
    }

    fn run(mut self) -> Vec<Token> {
        while self.i < self.bytes.len() {
            let c = self.peek(0);
            if c.is_ascii_whitespace() {
                self.advance_to(self.i + 1);
            } else if c == b'/' && self.peek(1) == b'/' {
                let end = self.src[self.i..].find('\n').map_or(self.bytes.len(), |n| self.i + n);
                self.advance_to(end);
            } else if c == b'/' && self.peek(1) == b'*' {
                match self.src[self.i + 2..].find("*/") {
                    Some(n) => self.advance_to(self.i + 2 + n + 2),
                    None => {
                        // unterminated comment
                        let end = self.i + 2;
                        self.push(TokenKind::Error, end);
                    }
                }
            } else if c.is_ascii_alphabetic() || c == b'_' {
                let end = self.scan_while(self.i, |b| b.is_ascii_alphanumeric() || b == b'_');
                let word = &self.src[self.i..end];
                let kind = match KEYWORDS.iter().find(|k| **k == word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident,
                };
                self.push(kind, end);
            } else if c.is_ascii_digit() || (c == b'.' && self.peek(1).is_ascii_digit()) {
                self.number();
            } else if let Some(p) = PUNCTS.iter().find(|p| self.src[self.i..].starts_with(**p)) {
                let end = self.i + p.len();
                self.push(TokenKind::Punct(p), end);
            } else {
                let ch_len = self.src[self.i..].chars().next().map_or(1, char::len_utf8);
                let end = self.i + ch_len;
                self.push(TokenKind::Error, end);
            }
        }
        self.out
    }

    fn scan_while(&self, mut j: usize, f: impl Fn(u8) -> bool) -> usize {
        while j < self.bytes.len() && f(self.bytes[j]) {
            j += 1;
        }
        j
    }

    fn number(&mut self) {
        let start = self.i;
        // hex integer
        if self.peek(0) == b'0' && matches!(self.peek(1), b'x' | b'X') {
            let digits_end = self.scan_while(start + 2, |b| b.is_ascii_hexdigit());
            let (unsigned, long, end) = self.int_suffix(digits_end);
            let kind = match u64::from_str_radix(&self.src[start + 2..digits_end], 16) {
                Ok(value) if digits_end > start + 2 => TokenKind::Int { value, unsigned, long },
                _ => TokenKind::Error,
            };
            self.finish_literal(kind, end);
            return;
        }
        let int_end = self.scan_while(start, |b| b.is_ascii_digit());
        let mut end = int_end;
        let mut is_float = false;
        if self.bytes.get(end) == Some(&b'.') {
            is_float = true;
            end = self.scan_while(end + 1, |b| b.is_ascii_digit());
        }
        if matches!(self.bytes.get(end), Some(b'e' | b'E')) {
            let mut j = end + 1;
            if matches!(self.bytes.get(j), Some(b'+' | b'-')) {
                j += 1;
            }
            let exp_end = self.scan_while(j, |b| b.is_ascii_digit());
            if exp_end > j {
                is_float = true;
                end = exp_end;
            }
        }
        let has_f = matches!(self.bytes.get(end), Some(b'f' | b'F'));
        if is_float || has_f {
            let text = &self.src[start..end];
            let kind = match text.parse::<f32>() {
                Ok(v) => TokenKind::Float(v),
                Err(_) => TokenKind::Error,
            };
            let end = if has_f { end + 1 } else { end };
            self.finish_literal(kind, end);
            return;
        }
        let (unsigned, long, end) = self.int_suffix(int_end);
        let kind = match self.src[start..int_end].parse::<u64>() {
            Ok(value) => TokenKind::Int { value, unsigned, long },
            Err(_) => TokenKind::Error,
        };
        self.finish_literal(kind, end);
    }

    fn int_suffix(&self, mut j: usize) -> (bool, bool, usize) {
        let mut unsigned = false;
        let mut long = false;
        for _ in 0..2 {
            match self.bytes.get(j) {
                Some(b'u' | b'U') if !unsigned => unsigned = true,
                Some(b'l' | b'L') if !long => long = true,
                _ => break,
            }
            j += 1;
        }
        (unsigned, long, j)
    }

    /// A literal immediately followed by identifier characters (`12ab`) is
    /// malformed; the whole run becomes one error token.
    fn finish_literal(&mut self, kind: TokenKind, end: usize) {
        let tail = self.scan_while(end, |b| b.is_ascii_alphanumeric() || b == b'_');
        if tail > end {
            self.push(TokenKind::Error, tail);
        } else {
            self.push(kind, end);
        }
    }
}
