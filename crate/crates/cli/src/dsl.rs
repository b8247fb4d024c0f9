//! The check-script language.
//!
//! ```text
//! stmt  := "check" IDENT "{" (key "=" value)* "}"
//! value := integer | monomial | range | list | ident | call
//! ```
//!
//! Monomials are signed powers of `q` with integer or half-integer
//! exponents (`q`, `-q^-2`, `q^1/2`), ranges are `a..b`, lists are
//! `[v, v, ...]`, calls are `basis(deg<=N, lattice<=R)`. `#` starts a comment.

use std::fmt;

use qtoroidal::Monomial;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl Pos {
    pub fn error(self, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Monomial(Monomial),
    Range(i64, i64),
    List(Vec<Value>),
    Ident(String),
    /// `name(key<=value, ...)`
    Call(String, Vec<(String, i64)>),
}

#[derive(Debug, Clone)]
pub struct Binding {
    pub key: String,
    pub value: Value,
    pub pos: Pos,
}

impl PartialEq for Binding {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.value == other.value
    }
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub name: String,
    pub bindings: Vec<Binding>,
    pub pos: Pos,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.bindings == other.bindings
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Eq,
    Le,
    DotDot,
    Comma,
    Minus,
    Caret,
    Slash,
    Newline,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Int(n) => write!(f, "'{n}'"),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Eq => f.write_str("'='"),
            Tok::Le => f.write_str("'<='"),
            Tok::DotDot => f.write_str("'..'"),
            Tok::Comma => f.write_str("','"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Caret => f.write_str("'^'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::Newline => f.write_str("end of line"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    for (ln, line) in src.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let pos = Pos {
                line: ln + 1,
                col: i + 1,
            };
            let c = chars[i];
            let next = chars.get(i + 1).copied();
            let (tok, len) = match c {
                '#' => break,
                c if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '=' => (Tok::Eq, 1),
                ',' => (Tok::Comma, 1),
                '-' => (Tok::Minus, 1),
                '^' => (Tok::Caret, 1),
                '/' => (Tok::Slash, 1),
                '<' if next == Some('=') => (Tok::Le, 2),
                '.' if next == Some('.') => (Tok::DotDot, 2),
                c if c.is_ascii_digit() => {
                    let end = (i..chars.len())
                        .find(|&k| !chars[k].is_ascii_digit())
                        .unwrap_or(chars.len());
                    let text: String = chars[i..end].iter().collect();
                    let n = text
                        .parse::<i64>()
                        .map_err(|_| pos.error(format!("integer '{text}' out of range")))?;
                    (Tok::Int(n), end - i)
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let end = (i..chars.len())
                        .find(|&k| !(chars[k].is_ascii_alphanumeric() || chars[k] == '_'))
                        .unwrap_or(chars.len());
                    (Tok::Ident(chars[i..end].iter().collect()), end - i)
                }
                c => return Err(pos.error(format!("unexpected character '{c}'"))),
            };
            out.push((tok, pos));
            i += len;
        }
        out.push((
            Tok::Newline,
            Pos {
                line: ln + 1,
                col: chars.len() + 1,
            },
        ));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|t| t.1).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|t| t.0.clone());
        self.at += 1;
        t
    }

    fn skip_newlines(&mut self) {
        while self.peek() == Some(&Tok::Newline) {
            self.at += 1;
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(pos.error(format!("expected {want}, found {t}"))),
            None => Err(pos.error(format!("expected {want}, found end of input"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            Some(t) => Err(pos.error(format!("expected {what}, found {t}"))),
            None => Err(pos.error(format!("expected {what}, found end of input"))),
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.pos();
        let kw = self.ident("'check'")?;
        if kw != "check" {
            return Err(pos.error(format!("expected 'check', found '{kw}'")));
        }
        let name = self.ident("check name")?;
        self.expect(Tok::LBrace)?;
        let mut bindings = Vec::new();
        loop {
            self.skip_newlines();
            if self.peek() == Some(&Tok::RBrace) {
                self.at += 1;
                break;
            }
            let bpos = self.pos();
            let key = self.ident("parameter name or '}'")?;
            self.expect(Tok::Eq)?;
            let value = self.value()?;
            bindings.push(Binding { key, value, pos: bpos });
        }
        let pos_after = self.pos();
        match self.peek() {
            None | Some(Tok::Newline) => Ok(Stmt { name, bindings, pos }),
            Some(t) => Err(pos_after.error(format!("expected end of line after statement, found {t}"))),
        }
    }

    fn signed_int(&mut self) -> Result<i64, ParseError> {
        let pos = self.pos();
        let neg = self.peek() == Some(&Tok::Minus);
        if neg {
            self.at += 1;
        }
        match self.bump() {
            Some(Tok::Int(n)) => Ok(if neg { -n } else { n }),
            Some(t) => Err(pos.error(format!("expected integer, found {t}"))),
            None => Err(pos.error("expected integer, found end of input")),
        }
    }

    /// After `q`: optional `^e` or `^e/2`; returns the `v` exponent.
    fn q_exponent(&mut self) -> Result<i64, ParseError> {
        if self.peek() != Some(&Tok::Caret) {
            return Ok(2);
        }
        self.at += 1;
        let e = self.signed_int()?;
        if self.peek() == Some(&Tok::Slash) {
            self.at += 1;
            let pos = self.pos();
            match self.bump() {
                Some(Tok::Int(2)) => Ok(e),
                _ => Err(pos.error("exponent denominator must be 2")),
            }
        } else {
            Ok(2 * e)
        }
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::LBracket) => {
                self.at += 1;
                let mut items = Vec::new();
                self.skip_newlines();
                if self.peek() == Some(&Tok::RBracket) {
                    self.at += 1;
                    return Ok(Value::List(items));
                }
                loop {
                    self.skip_newlines();
                    items.push(self.value()?);
                    self.skip_newlines();
                    let p = self.pos();
                    match self.bump() {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RBracket) => break,
                        Some(t) => return Err(p.error(format!("expected ',' or ']', found {t}"))),
                        None => return Err(p.error("unterminated list")),
                    }
                }
                Ok(Value::List(items))
            }
            Some(Tok::Minus) => {
                self.at += 1;
                match self.peek().cloned() {
                    Some(Tok::Ident(s)) if s == "q" => {
                        self.at += 1;
                        Ok(Value::Monomial(Monomial::new(true, self.q_exponent()?)))
                    }
                    Some(Tok::Int(_)) => {
                        self.at -= 1;
                        self.int_or_range()
                    }
                    _ => Err(pos.error("expected integer or q-monomial after '-'")),
                }
            }
            Some(Tok::Int(_)) => self.int_or_range(),
            Some(Tok::Ident(s)) => {
                self.at += 1;
                if s == "q" {
                    return Ok(Value::Monomial(Monomial::new(false, self.q_exponent()?)));
                }
                if self.peek() == Some(&Tok::LParen) {
                    self.at += 1;
                    let mut args = Vec::new();
                    if self.peek() == Some(&Tok::RParen) {
                        self.at += 1;
                        return Ok(Value::Call(s, args));
                    }
                    loop {
                        let key = self.ident("argument name")?;
                        self.expect(Tok::Le)?;
                        args.push((key, self.signed_int()?));
                        let p = self.pos();
                        match self.bump() {
                            Some(Tok::Comma) => continue,
                            Some(Tok::RParen) => break,
                            Some(t) => return Err(p.error(format!("expected ',' or ')', found {t}"))),
                            None => return Err(p.error("unterminated argument list")),
                        }
                    }
                    return Ok(Value::Call(s, args));
                }
                Ok(Value::Ident(s))
            }
            Some(t) => Err(pos.error(format!("expected value, found {t}"))),
            None => Err(pos.error("expected value, found end of input")),
        }
    }

    fn int_or_range(&mut self) -> Result<Value, ParseError> {
        let a = self.signed_int()?;
        if self.peek() == Some(&Tok::DotDot) {
            self.at += 1;
            let b = self.signed_int()?;
            return Ok(Value::Range(a, b));
        }
        Ok(Value::Int(a))
    }
}

pub fn parse(src: &str) -> Result<Script, ParseError> {
    let toks = lex(src)?;
    let end = toks.last().map(|t| t.1).unwrap_or(Pos { line: 1, col: 1 });
    let mut p = Parser { toks, at: 0, end };
    let mut stmts = Vec::new();
    loop {
        p.skip_newlines();
        if p.peek().is_none() {
            break;
        }
        stmts.push(p.stmt()?);
    }
    Ok(Script { stmts })
}

fn write_monomial(f: &mut fmt::Formatter<'_>, m: Monomial) -> fmt::Result {
    if m.negative {
        f.write_str("-")?;
    }
    f.write_str("q")?;
    match m.vexp {
        2 => Ok(()),
        e if e % 2 == 0 => write!(f, "^{}", e / 2),
        e => write!(f, "^{e}/2"),
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Monomial(m) => write_monomial(f, *m),
            Value::Range(a, b) => write!(f, "{a}..{b}"),
            Value::List(items) => {
                f.write_str("[")?;
                for (k, v) in items.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Ident(s) => f.write_str(s),
            Value::Call(name, args) => {
                let args: Vec<String> = args.iter().map(|(k, v)| format!("{k}<={v}")).collect();
                write!(f, "{name}({})", args.join(", "))
            }
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "check {} {{", self.name)?;
        for b in &self.bindings {
            write!(f, " {}={}", b.key, b.value)?;
        }
        if self.bindings.is_empty() {
            f.write_str("}")
        } else {
            f.write_str(" }")
        }
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stmts {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_mode_range_and_state_set() {
        let s = parse("check R1 { i=1 m=1..5 states=basis(deg<=6) }").unwrap();
        assert_eq!(s.stmts.len(), 1);
        let st = &s.stmts[0];
        assert_eq!(st.name, "R1");
        assert_eq!(st.bindings[0].value, Value::Int(1));
        assert_eq!(st.bindings[1].value, Value::Range(1, 5));
        assert_eq!(
            st.bindings[2].value,
            Value::Call("basis".into(), vec![("deg".into(), 6)])
        );
    }

    #[test]
    fn parses_empty_bodies_and_comments() {
        let s = parse("# header\ncheck serre_polynomial {}  # trailing\n\n").unwrap();
        assert_eq!(s.stmts.len(), 1);
        assert!(s.stmts[0].bindings.is_empty());
        assert_eq!(parse("").unwrap(), Script::default());
        assert_eq!(parse("# only a comment").unwrap(), Script::default());
    }

    #[test]
    fn monomials() {
        let s = parse("check x { a=q b=-q^1/2 c=q^-2 d=-q^-3/2 e=q^0 f=-3 g=-2..4 }").unwrap();
        let vals: Vec<Value> = s.stmts[0].bindings.iter().map(|b| b.value.clone()).collect();
        assert_eq!(
            vals,
            vec![
                Value::Monomial(Monomial::new(false, 2)),
                Value::Monomial(Monomial::new(true, 1)),
                Value::Monomial(Monomial::new(false, -4)),
                Value::Monomial(Monomial::new(true, -3)),
                Value::Monomial(Monomial::new(false, 0)),
                Value::Int(-3),
                Value::Range(-2, 4),
            ]
        );
    }

    #[test]
    fn multi_line_bodies_and_lists() {
        let src = "check partial_fractions {\n  order=40\n  pairs=[[2, 3], [q, q^-1]]\n}\n";
        let s = parse(src).unwrap();
        assert_eq!(
            s.stmts[0].bindings[1].value,
            Value::List(vec![
                Value::List(vec![Value::Int(2), Value::Int(3)]),
                Value::List(vec![
                    Value::Monomial(Monomial::q_pow(1)),
                    Value::Monomial(Monomial::q_pow(-1))
                ]),
            ])
        );
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("check R1 { i=1\n  m = @ }").unwrap_err();
        assert_eq!((e.line, e.col), (2, 7));
        let e = parse("chek R1 {}").unwrap_err();
        assert_eq!((e.line, e.col), (1, 1));
        let e = parse("check R1 { i=1 ").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse("check R1 { a=q^1/3 }").unwrap_err();
        assert!(e.msg.contains("denominator"));
        let e = parse("check R1 {} check R2 {}").unwrap_err();
        assert_eq!((e.line, e.col), (1, 13));
    }

    #[test]
    fn print_round_trips() {
        let src = "check R1 { i=1 m=1..5 states=basis(deg<=6, lattice<=1) uv=negated }\ncheck S4 {}\ncheck p { x=[q^1/2, -q, 3] r=-2..-1 }\n";
        let s = parse(src).unwrap();
        assert_eq!(parse(&s.to_string()).unwrap(), s);
        assert_eq!(s.to_string(), src);
    }
}
