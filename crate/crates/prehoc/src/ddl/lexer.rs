use super::ast::Pos;
use super::DdlError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Real(v) => format!("`{v}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

const SYMBOLS: &[&str] = &["...", "<=", ">=", "<>", "!=", "(", ")", ",", ";", ".", "=", "<", ">"];

/// On-demand tokenizer. The parser pulls tokens one at a time so that it can
/// switch to raw regex scanning right after `matches`.
pub struct Lexer {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

impl Lexer {
    pub fn new(src: &str) -> Self {
        Self { chars: src.chars().collect(), i: 0, line: 1, col: 1 }
    }

    fn peek_char(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.i + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char(0)?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    pub fn pos(&self) -> Pos {
        Pos { line: self.line, column: self.col }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek_char(0) {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('-') if self.peek_char(1) == Some('-') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn err(pos: Pos, message: impl Into<String>) -> DdlError {
        DdlError::Syntax { pos, message: message.into() }
    }

    pub fn next_token(&mut self) -> Result<(Tok, Pos), DdlError> {
        self.skip_trivia();
        let pos = self.pos();
        let Some(c) = self.peek_char(0) else {
            return Ok((Tok::Eof, pos));
        };
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(c) = self.peek_char(0).filter(|c| c.is_alphanumeric() || *c == '_') {
                s.push(c);
                self.bump();
            }
            return Ok((Tok::Ident(s), pos));
        }
        if c.is_ascii_digit() || (c == '-' && self.peek_char(1).is_some_and(|d| d.is_ascii_digit())) {
            return self.number(pos);
        }
        if c == '\'' || c == '"' {
            return Ok((Tok::Str(self.quoted(pos)?), pos));
        }
        for sym in SYMBOLS {
            if sym.chars().enumerate().all(|(k, s)| self.peek_char(k) == Some(s)) {
                for _ in 0..sym.len() {
                    self.bump();
                }
                return Ok((Tok::Sym(sym), pos));
            }
        }
        Err(Self::err(pos, format!("unexpected character {c:?}")))
    }

    fn number(&mut self, pos: Pos) -> Result<(Tok, Pos), DdlError> {
        let mut s = String::new();
        if self.peek_char(0) == Some('-') {
            s.push('-');
            self.bump();
        }
        while let Some(c) = self.peek_char(0).filter(char::is_ascii_digit) {
            s.push(c);
            self.bump();
        }
        let fractional = self.peek_char(0) == Some('.') && self.peek_char(1).is_some_and(|d| d.is_ascii_digit());
        if !fractional {
            return s.parse().map(|v| (Tok::Int(v), pos)).map_err(|_| Self::err(pos, format!("integer {s} out of range")));
        }
        s.push('.');
        self.bump();
        while let Some(c) = self.peek_char(0).filter(char::is_ascii_digit) {
            s.push(c);
            self.bump();
        }
        s.parse().map(|v| (Tok::Real(v), pos)).map_err(|_| Self::err(pos, format!("bad number {s}")))
    }

    /// A quoted string; the quote character is doubled to escape it.
    fn quoted(&mut self, pos: Pos) -> Result<String, DdlError> {
        let q = self.bump().expect("caller saw a quote");
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(Self::err(pos, "unterminated string")),
                Some(c) if c == q => {
                    if self.peek_char(0) == Some(q) {
                        self.bump();
                        s.push(q);
                    } else {
                        return Ok(s);
                    }
                }
                Some(c) => s.push(c),
            }
        }
    }

    /// The operand of `matches`: a quoted string, or a bare run that ends at
    /// whitespace or at an unbalanced `)`, `,` or `;`.
    pub fn regex(&mut self) -> Result<(String, Pos), DdlError> {
        self.skip_trivia();
        let pos = self.pos();
        match self.peek_char(0) {
            None => Err(Self::err(pos, "expected a pattern after `matches`, found end of input")),
            Some('\'') | Some('"') => Ok((self.quoted(pos)?, pos)),
            Some(_) => {
                let n = bare_regex_len(&self.chars[self.i..]);
                if n == 0 {
                    return Err(Self::err(pos, "expected a pattern after `matches`"));
                }
                let s: String = self.chars[self.i..self.i + n].iter().collect();
                for _ in 0..n {
                    self.bump();
                }
                Ok((s, pos))
            }
        }
    }
}

/// Length in chars of the bare pattern at the start of `chars`.
pub fn bare_regex_len(chars: &[char]) -> usize {
    let mut depth = 0usize;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            break;
        }
        match c {
            '\\' => {
                i += 1;
            }
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => {
                if depth == 0 {
                    break;
                }
                depth -= 1;
            }
            ',' | ';' if depth == 0 => break,
            _ => {}
        }
        i += 1;
    }
    i.min(chars.len())
}
