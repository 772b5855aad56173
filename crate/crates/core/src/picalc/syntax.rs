//! Text form of processes.
//!
//! ```text
//! P ::= 0 | P | P | !P | (P)
//!     | in(M, x); P | out(M, N); P | new a; P | event F(M, ...); P
//!     | if M = N then P else P | let x = g(M, ...) in P else P
//! ```
//! A missing `; P` or `else P` means `0`. Unbound identifiers are public
//! names; `"..."` quotes public names that are not identifiers and `~n`
//! writes a restricted name literally.

use std::fmt::{self, Write as _};

use thiserror::Error;

use super::process::Process;
use super::term::{name, write_atom, Name, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

const KEYWORDS: [&str; 11] = [
    "in", "out", "new", "if", "then", "else", "let", "event", "template", "end", "process",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Zero,
    Sym(char),
    Eof,
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Lexer {
    fn new(src: &str) -> Result<Self, ParseError> {
        let chars: Vec<char> = src.chars().collect();
        let mut toks = Vec::new();
        let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
        let err = |line, col, msg: &str| ParseError {
            line,
            col,
            msg: msg.to_string(),
        };
        while i < chars.len() {
            let c = chars[i];
            if c == '\n' {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            if c.is_whitespace() {
                i += 1;
                col += 1;
                continue;
            }
            if c == '(' && chars.get(i + 1) == Some(&'*') {
                let (sl, sc) = (line, col);
                i += 2;
                col += 2;
                loop {
                    match chars.get(i) {
                        None => return Err(err(sl, sc, "unterminated comment")),
                        Some('*') if chars.get(i + 1) == Some(&')') => {
                            i += 2;
                            col += 2;
                            break;
                        }
                        Some('\n') => {
                            line += 1;
                            col = 1;
                            i += 1;
                        }
                        Some(_) => {
                            i += 1;
                            col += 1;
                        }
                    }
                }
                continue;
            }
            let (sl, sc) = (line, col);
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                {
                    i += 1;
                }
                col += i - start;
                toks.push((Tok::Ident(chars[start..i].iter().collect()), sl, sc));
            } else if c == '"' {
                let mut s = String::new();
                i += 1;
                col += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return Err(err(sl, sc, "unterminated string")),
                        Some('"') => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            let Some(&n) = chars.get(i + 1) else {
                                return Err(err(sl, sc, "unterminated string"));
                            };
                            s.push(n);
                            i += 2;
                            col += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                toks.push((Tok::Quoted(s), sl, sc));
            } else if c == '0' {
                i += 1;
                col += 1;
                toks.push((Tok::Zero, sl, sc));
            } else if "(),;|!=~".contains(c) {
                i += 1;
                col += 1;
                toks.push((Tok::Sym(c), sl, sc));
            } else {
                return Err(err(sl, sc, &format!("unexpected character `{c}`")));
            }
        }
        toks.push((Tok::Eof, line, col));
        Ok(Lexer { toks, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let (_, line, col) = self.toks[self.pos];
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`, found {:?}", self.peek())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`, found {:?}", self.peek())))
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Tok::Ident(s) if !is_keyword(&s) => Ok(s),
            other => {
                self.pos -= 1;
                Err(self.error(format!("expected identifier, found {other:?}")))
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Var,
    Fresh,
}

struct Parser {
    lx: Lexer,
    scope: Vec<(String, Kind)>,
}

impl Parser {
    fn lookup(&self, s: &str) -> Option<Kind> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == s)
            .map(|(_, k)| *k)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.lx.next() {
            Tok::Quoted(s) => Ok(Term::Pub(name(&s))),
            Tok::Sym('~') => match self.lx.next() {
                Tok::Ident(s) | Tok::Quoted(s) => Ok(Term::Fresh(name(&s))),
                _ => Err(self.lx.error("expected name after `~`")),
            },
            Tok::Ident(s) if !is_keyword(&s) => {
                if *self.lx.peek() == Tok::Sym('(') {
                    self.lx.next();
                    let args = self.term_list()?;
                    Ok(Term::app(&s, args))
                } else {
                    Ok(match self.lookup(&s) {
                        Some(Kind::Var) => Term::var(&s),
                        Some(Kind::Fresh) => Term::fresh(&s),
                        None => Term::public(&s),
                    })
                }
            }
            other => {
                self.lx.pos = self.lx.pos.saturating_sub(1);
                Err(self.lx.error(format!("expected term, found {other:?}")))
            }
        }
    }

    /// Arguments after an opening parenthesis, through the closing one.
    fn term_list(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut args = Vec::new();
        if *self.lx.peek() == Tok::Sym(')') {
            self.lx.next();
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            match self.lx.next() {
                Tok::Sym(',') => continue,
                Tok::Sym(')') => return Ok(args),
                _ => {
                    self.lx.pos -= 1;
                    return Err(self.lx.error("expected `,` or `)`"));
                }
            }
        }
    }

    fn par(&mut self) -> Result<Process, ParseError> {
        let mut parts = vec![self.seq()?];
        while *self.lx.peek() == Tok::Sym('|') {
            self.lx.next();
            parts.push(self.seq()?);
        }
        Ok(Process::par_all(parts))
    }

    fn cont(&mut self) -> Result<Process, ParseError> {
        if *self.lx.peek() == Tok::Sym(';') {
            self.lx.next();
            self.seq()
        } else {
            Ok(Process::Nil)
        }
    }

    fn bound<T>(&mut self, n: &str, k: Kind, f: impl FnOnce(&mut Self) -> T) -> T {
        self.scope.push((n.to_string(), k));
        let r = f(self);
        self.scope.pop();
        r
    }

    fn else_branch(&mut self) -> Result<Process, ParseError> {
        if self.lx.at_kw("else") {
            self.lx.next();
            self.seq()
        } else {
            Ok(Process::Nil)
        }
    }

    fn seq(&mut self) -> Result<Process, ParseError> {
        match self.lx.peek().clone() {
            Tok::Zero => {
                self.lx.next();
                Ok(Process::Nil)
            }
            Tok::Sym('!') => {
                self.lx.next();
                Ok(Process::repl(self.seq()?))
            }
            Tok::Sym('(') => {
                self.lx.next();
                let p = self.par()?;
                self.lx.expect_sym(')')?;
                Ok(p)
            }
            Tok::Ident(kw) => match kw.as_str() {
                "in" => {
                    self.lx.next();
                    self.lx.expect_sym('(')?;
                    let ch = self.term()?;
                    self.lx.expect_sym(',')?;
                    let x = self.lx.ident()?;
                    self.lx.expect_sym(')')?;
                    let body = self.bound(&x, Kind::Var, |p| p.cont())?;
                    Ok(Process::input(ch, &x, body))
                }
                "out" => {
                    self.lx.next();
                    self.lx.expect_sym('(')?;
                    let ch = self.term()?;
                    self.lx.expect_sym(',')?;
                    let m = self.term()?;
                    self.lx.expect_sym(')')?;
                    Ok(Process::output(ch, m, self.cont()?))
                }
                "new" => {
                    self.lx.next();
                    let n = self.lx.ident()?;
                    let body = self.bound(&n, Kind::Fresh, |p| p.cont())?;
                    Ok(Process::new_name(&n, body))
                }
                "event" => {
                    self.lx.next();
                    let f = self.term()?;
                    if !matches!(f, Term::App(..)) {
                        return Err(self.lx.error("event needs a fact `F(...)`"));
                    }
                    Ok(Process::event(f, self.cont()?))
                }
                "if" => {
                    self.lx.next();
                    let m = self.term()?;
                    self.lx.expect_sym('=')?;
                    let n = self.term()?;
                    self.lx.expect_kw("then")?;
                    let p = self.seq()?;
                    let q = self.else_branch()?;
                    Ok(Process::if_eq(m, n, p, q))
                }
                "let" => {
                    self.lx.next();
                    let x = self.lx.ident()?;
                    self.lx.expect_sym('=')?;
                    let g = self.lx.ident()?;
                    self.lx.expect_sym('(')?;
                    let args = self.term_list()?;
                    self.lx.expect_kw("in")?;
                    let p = self.bound(&x, Kind::Var, |s| s.seq())?;
                    let q = self.else_branch()?;
                    Ok(Process::let_des(&x, &g, args, p, q))
                }
                _ => Err(self.lx.error(format!("expected process, found `{kw}`"))),
            },
            other => Err(self.lx.error(format!("expected process, found {other:?}"))),
        }
    }
}

pub fn parse_process(src: &str) -> Result<Process, ParseError> {
    let mut p = Parser {
        lx: Lexer::new(src)?,
        scope: Vec::new(),
    };
    let proc = p.par()?;
    if *p.lx.peek() != Tok::Eof {
        return Err(p.lx.error(format!("trailing input {:?}", p.lx.peek())));
    }
    Ok(proc)
}

/// A named process with parameter variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: Name,
    pub params: Vec<Name>,
    pub body: Process,
}

/// Parses `template name(x, y) = P end` blocks.
pub fn parse_templates(src: &str) -> Result<Vec<Template>, ParseError> {
    let mut p = Parser {
        lx: Lexer::new(src)?,
        scope: Vec::new(),
    };
    let mut out = Vec::new();
    while *p.lx.peek() != Tok::Eof {
        p.lx.expect_kw("template")?;
        let n = p.lx.ident()?;
        p.lx.expect_sym('(')?;
        let mut params = Vec::new();
        if *p.lx.peek() != Tok::Sym(')') {
            loop {
                params.push(p.lx.ident()?);
                if *p.lx.peek() == Tok::Sym(',') {
                    p.lx.next();
                } else {
                    break;
                }
            }
        }
        p.lx.expect_sym(')')?;
        p.lx.expect_sym('=')?;
        for x in &params {
            p.scope.push((x.clone(), Kind::Var));
        }
        let body = p.par()?;
        p.scope.clear();
        p.lx.expect_kw("end")?;
        out.push(Template {
            name: name(&n),
            params: params.iter().map(|s| name(s)).collect(),
            body,
        });
    }
    Ok(out)
}

pub fn print_process(p: &Process) -> String {
    let mut s = String::new();
    write_par(&mut s, p, 0).expect("writing to a string");
    s
}

struct Atom<'a>(&'a str);

impl fmt::Display for Atom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_atom(f, self.0)
    }
}

fn indent(s: &mut String, level: usize) {
    for _ in 0..level {
        s.push_str("  ");
    }
}

fn write_par(s: &mut String, p: &Process, level: usize) -> fmt::Result {
    let parts = p.par_components();
    for (i, c) in parts.iter().enumerate() {
        if i > 0 {
            s.push('\n');
            indent(s, level);
            s.push_str("| ");
        }
        write_seq(s, c, level)?;
    }
    Ok(())
}

fn write_nested(s: &mut String, p: &Process, level: usize) -> fmt::Result {
    match p {
        Process::Par(..) => {
            s.push('(');
            s.push('\n');
            indent(s, level + 1);
            write_par(s, p, level + 1)?;
            s.push(')');
            Ok(())
        }
        _ => write_seq(s, p, level),
    }
}

fn write_cont(s: &mut String, p: &Process, level: usize) -> fmt::Result {
    if p.is_nil() {
        return Ok(());
    }
    s.push_str(";\n");
    indent(s, level);
    write_nested(s, p, level)
}

fn write_branch(s: &mut String, p: &Process, level: usize) -> fmt::Result {
    if matches!(p, Process::If(..) | Process::Let(..)) {
        s.push('(');
        write_seq(s, p, level + 1)?;
        s.push(')');
        Ok(())
    } else {
        write_nested(s, p, level + 1)
    }
}

fn write_seq(s: &mut String, p: &Process, level: usize) -> fmt::Result {
    match p {
        Process::Nil => s.write_str("0"),
        Process::Par(..) => write_nested(s, p, level),
        Process::Repl(q) => {
            s.push('!');
            write_nested(s, q, level)
        }
        Process::In(ch, x, q) => {
            write!(s, "in({ch}, {x})")?;
            write_cont(s, q, level)
        }
        Process::Out(ch, m, q) => {
            write!(s, "out({ch}, {m})")?;
            write_cont(s, q, level)
        }
        Process::New(n, q) => {
            write!(s, "new {}", Atom(n))?;
            write_cont(s, q, level)
        }
        Process::Event(f, q) => {
            write!(s, "event {f}")?;
            write_cont(s, q, level)
        }
        Process::If(m, n, a, b) => {
            write!(s, "if {m} = {n} then ")?;
            write_branch(s, a, level)?;
            if !b.is_nil() {
                s.push('\n');
                indent(s, level);
                s.push_str("else ");
                write_branch(s, b, level)?;
            }
            Ok(())
        }
        Process::Let(x, g, args, a, b) => {
            write!(s, "let {x} = {g}(")?;
            for (i, t) in args.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                write!(s, "{t}")?;
            }
            s.push_str(") in ");
            write_branch(s, a, level)?;
            if !b.is_nil() {
                s.push('\n');
                indent(s, level);
                s.push_str("else ");
                write_branch(s, b, level)?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_process(self))
    }
}

pub fn print_templates(ts: &[Template]) -> String {
    let mut s = String::new();
    for t in ts {
        let params: Vec<&str> = t.params.iter().map(|p| &**p).collect();
        s.push_str(&format!("template {}({}) =\n  ", t.name, params.join(", ")));
        write_par(&mut s, &t.body, 1).expect("writing to a string");
        s.push_str("\nend\n\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_prefixes_and_scoping() {
        let p = parse_process(
            "new k; out(c, senc(m, k)); in(c, x); let y = sdec(x, k) in event Got(y) else 0",
        )
        .unwrap();
        let text = print_process(&p);
        let q = parse_process(&text).unwrap();
        assert_eq!(p, q);
        match &p {
            Process::New(n, body) => {
                assert_eq!(&**n, "k");
                match &**body {
                    Process::Out(_, m, _) => assert_eq!(m.to_string(), "senc(m, ~k)"),
                    other => panic!("{other:?}"),
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parallel_and_replication() {
        let p = parse_process("!event A(a) | in(c, x); (event B(x) | out(c, b))").unwrap();
        assert_eq!(p.par_components().len(), 2);
        let round = parse_process(&print_process(&p)).unwrap();
        assert_eq!(round, p);
    }

    #[test]
    fn nested_if_round_trip() {
        let p = parse_process("if a = b then (if c = d then event X(a)) else event Y(b)").unwrap();
        let round = parse_process(&print_process(&p)).unwrap();
        assert_eq!(round, p);
        match &p {
            Process::If(_, _, _, q) => assert!(!q.is_nil()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quoted_names() {
        let p = parse_process(r#"event C_ip("64.233.167.26")"#).unwrap();
        assert_eq!(print_process(&p), r#"event C_ip("64.233.167.26")"#);
    }

    #[test]
    fn templates_bind_params() {
        let ts = parse_templates("template t(v) = event F(v); out(c, w) end").unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].body.free_vars().len(), 1);
        let again = parse_templates(&print_templates(&ts)).unwrap();
        assert_eq!(again, ts);
    }

    #[test]
    fn reports_position() {
        let e = parse_process("in(c x)").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.col > 1);
    }
}
