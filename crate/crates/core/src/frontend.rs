//! Concrete syntax: lexer, recursive-descent parser and printer.
//!
//! ```text
//! term  := "\(" var ":" type ")" "=>" term | app
//! app   := head atom*
//! head  := "cons" atom atom | "match" term "{" "nil" "=>" term ";" "cons" var var "=>" term "}" | atom
//! atom  := prim ("." ("1"|"2"|"3"))*
//! prim  := var | "nil" | "choose[" base "]" | "unpack[" base "](" term ")"
//!        | "fix[" nat "](" var ":" type "=>" term "," term ")" | "(" term ")"
//! type  := "Pi(" var ":" type ")" "=>" type | "exists(" var ":" type ")" "=>" type
//!        | "Cons" tatom tatom | "Match" term "{" "nil" "=>" type ";" "cons" var var "=>" type "}" | tatom
//! tatom := "Top" | "List" | "Trail" | "{" term ":" type "}" | "(" type ")"
//! ```

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::syntax::{check_dialect, Base, Context, Dialect, Name, Term, Type};
use crate::trail::Trail;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{line}:{col}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Nat(u64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(n) => write!(f, "`{n}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "nil", "cons", "match", "fix", "choose", "unpack", "Top", "List", "Trail", "Pi", "exists",
    "Cons", "Match", "def", "check", "eval",
];

const SYMBOLS: &[&str] = &[
    "=>", "\\", "(", ")", ":", "{", "}", ";", ",", ".", "[", "]", "=",
];

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Spanned {
                tok: Tok::Ident(s),
                line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let n = s.parse().map_err(|_| ParseError {
                line,
                col: start_col,
                expected: vec!["a natural number below 2^64".into()],
                found: s.clone(),
            })?;
            out.push(Spanned {
                tok: Tok::Nat(n),
                line,
                col: start_col,
            });
            continue;
        }
        let sym = SYMBOLS.iter().find(|s| {
            let n = s.chars().count();
            i + n <= chars.len() && chars[i..i + n].iter().copied().eq(s.chars())
        });
        match sym {
            Some(s) => {
                let n = s.chars().count();
                i += n;
                col += n;
                out.push(Spanned {
                    tok: Tok::Sym(s),
                    line,
                    col: start_col,
                });
            }
            None => {
                return Err(ParseError {
                    line,
                    col,
                    expected: vec!["a token".into()],
                    found: format!("`{c}`"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let s = &self.toks[self.pos];
        Err(ParseError {
            line: s.line,
            col: s.col,
            expected: expected.iter().map(|e| e.to_string()).collect(),
            found: s.tok.to_string(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn sym(&mut self, s: &'static str) -> PResult<()> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.error(&[&format!("`{s}`")])
        }
    }

    fn kw(&mut self, k: &str) -> PResult<()> {
        if self.is_kw(k) {
            self.bump();
            Ok(())
        } else {
            self.error(&[&format!("`{k}`")])
        }
    }

    fn var(&mut self) -> PResult<Name> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let n = Name::from(s.as_str());
                self.bump();
                Ok(n)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn nat(&mut self) -> PResult<u64> {
        match self.peek() {
            Tok::Nat(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            _ => self.error(&["natural number"]),
        }
    }

    fn base(&mut self) -> PResult<Base> {
        if self.is_kw("Top") {
            self.bump();
            Ok(Base::Top)
        } else if self.is_kw("List") {
            self.bump();
            Ok(Base::List)
        } else {
            self.error(&["`Top`", "`List`"])
        }
    }

    fn eof(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.error(&["end of input"])
        }
    }

    fn term(&mut self) -> PResult<Arc<Term>> {
        if self.is_sym("\\") {
            return self.lambda();
        }
        self.app()
    }

    fn lambda(&mut self) -> PResult<Arc<Term>> {
        self.sym("\\")?;
        self.sym("(")?;
        let x = self.var()?;
        self.sym(":")?;
        let ty = self.ty()?;
        self.sym(")")?;
        self.sym("=>")?;
        let body = self.term()?;
        Ok(Term::abs(x, ty, body))
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => {
                !KEYWORDS.contains(&s.as_str())
                    || matches!(s.as_str(), "nil" | "choose" | "unpack" | "fix")
            }
            Tok::Sym(s) => *s == "(" || *s == "\\",
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<Arc<Term>> {
        let mut head = if self.is_kw("cons") {
            self.bump();
            let h = self.atom()?;
            let t = self.atom()?;
            Term::cons(h, t)
        } else if self.is_kw("match") {
            self.matcher()?
        } else {
            self.atom()?
        };
        while self.starts_atom() {
            let arg = if self.is_sym("\\") {
                self.lambda()?
            } else {
                self.atom()?
            };
            head = Term::app(head, arg);
        }
        Ok(head)
    }

    fn matcher(&mut self) -> PResult<Arc<Term>> {
        self.kw("match")?;
        let scrutinee = self.term()?;
        self.sym("{")?;
        self.kw("nil")?;
        self.sym("=>")?;
        let nil_case = self.term()?;
        self.sym(";")?;
        self.kw("cons")?;
        let head = self.var()?;
        let tail = self.var()?;
        self.sym("=>")?;
        let cons_case = self.term()?;
        self.sym("}")?;
        Ok(Arc::new(Term::Match {
            scrutinee,
            nil_case,
            head,
            tail,
            cons_case,
        }))
    }

    fn atom(&mut self) -> PResult<Arc<Term>> {
        let mut t = self.primary()?;
        while self.is_sym(".") {
            self.bump();
            match self.peek() {
                Tok::Nat(k @ 1..=3) => {
                    let k = *k as u8;
                    self.bump();
                    t = Term::sel(t, k);
                }
                _ => return self.error(&["`1`", "`2`", "`3`"]),
            }
        }
        Ok(t)
    }

    fn primary(&mut self) -> PResult<Arc<Term>> {
        match self.peek().clone() {
            Tok::Ident(s) => match s.as_str() {
                "nil" => {
                    self.bump();
                    Ok(Term::nil())
                }
                "choose" => {
                    self.bump();
                    self.sym("[")?;
                    let b = self.base()?;
                    self.sym("]")?;
                    Ok(Term::choose(b))
                }
                "unpack" => {
                    self.bump();
                    self.sym("[")?;
                    let b = self.base()?;
                    self.sym("]")?;
                    self.sym("(")?;
                    let t = self.term()?;
                    self.sym(")")?;
                    Ok(Term::unpack(b, t))
                }
                "fix" => {
                    self.bump();
                    self.sym("[")?;
                    let bound = self.nat()?;
                    self.sym("]")?;
                    self.sym("(")?;
                    let binder = self.var()?;
                    self.sym(":")?;
                    let annot = self.ty()?;
                    self.sym("=>")?;
                    let body = self.term()?;
                    self.sym(",")?;
                    let default = self.term()?;
                    self.sym(")")?;
                    Ok(Arc::new(Term::Fix {
                        bound,
                        binder,
                        annot,
                        body,
                        default,
                    }))
                }
                _ => Ok(Term::var(self.var()?)),
            },
            Tok::Sym("(") => {
                self.bump();
                let t = self.term()?;
                self.sym(")")?;
                Ok(t)
            }
            _ => self.error(&["term"]),
        }
    }

    fn ty(&mut self) -> PResult<Arc<Type>> {
        if self.is_kw("Pi") || self.is_kw("exists") {
            let is_pi = self.is_kw("Pi");
            self.bump();
            self.sym("(")?;
            let x = self.var()?;
            self.sym(":")?;
            let dom = self.ty()?;
            self.sym(")")?;
            self.sym("=>")?;
            let body = self.ty()?;
            return Ok(if is_pi {
                Type::pi(x, dom, body)
            } else {
                Type::exists(x, dom, body)
            });
        }
        if self.is_kw("Cons") {
            self.bump();
            let h = self.tatom()?;
            let t = self.tatom()?;
            return Ok(Type::cons(h, t));
        }
        if self.is_kw("Match") {
            self.bump();
            let scrutinee = self.term()?;
            self.sym("{")?;
            self.kw("nil")?;
            self.sym("=>")?;
            let nil_type = self.ty()?;
            self.sym(";")?;
            self.kw("cons")?;
            let head = self.var()?;
            let tail = self.var()?;
            self.sym("=>")?;
            let cons_type = self.ty()?;
            self.sym("}")?;
            return Ok(Arc::new(Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            }));
        }
        self.tatom()
    }

    fn tatom(&mut self) -> PResult<Arc<Type>> {
        for (kw, b) in [
            ("Top", Base::Top),
            ("List", Base::List),
            ("Trail", Base::Trail),
        ] {
            if self.is_kw(kw) {
                self.bump();
                return Ok(Type::base(b));
            }
        }
        if self.is_sym("{") {
            self.bump();
            let t = self.term()?;
            self.sym(":")?;
            let u = self.ty()?;
            self.sym("}")?;
            return Ok(Type::singleton(t, u));
        }
        if self.is_sym("(") {
            self.bump();
            let t = self.ty()?;
            self.sym(")")?;
            return Ok(t);
        }
        self.error(&["type"])
    }
}

pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.term()?;
    p.eof()?;
    Ok(Arc::unwrap_or_clone(t))
}

pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.ty()?;
    p.eof()?;
    Ok(Arc::unwrap_or_clone(t))
}

/// Parses a term and rejects constructs foreign to `dialect`.
pub fn parse_term_in(text: &str, dialect: Dialect) -> Result<Term, ParseError> {
    let t = parse_term(text)?;
    if check_dialect(&t, dialect) {
        Ok(t)
    } else {
        Err(dialect_error(dialect))
    }
}

pub fn parse_type_in(text: &str, dialect: Dialect) -> Result<Type, ParseError> {
    let t = parse_type(text)?;
    let probe = Term::Abs(Name::from("_"), Arc::new(t.clone()), Term::nil());
    if check_dialect(&probe, dialect) {
        Ok(t)
    } else {
        Err(dialect_error(dialect))
    }
}

fn dialect_error(dialect: Dialect) -> ParseError {
    let d = match dialect {
        Dialect::Surface => "surface",
        Dialect::Core => "core",
    };
    ParseError {
        line: 1,
        col: 1,
        expected: vec![format!("a {d} term")],
        found: "a construct of the other calculus".into(),
    }
}

/// Parses `x: T, y: U, ...` (possibly empty).
pub fn parse_context(text: &str) -> Result<Context, ParseError> {
    let mut p = Parser::new(text)?;
    let mut bindings: Vec<(Name, Arc<Type>)> = Vec::new();
    if *p.peek() != Tok::Eof {
        loop {
            let x = p.var()?;
            p.sym(":")?;
            let t = p.ty()?;
            if bindings.iter().any(|(n, _)| *n == x) {
                let s = &p.toks[p.pos];
                return Err(ParseError {
                    line: s.line,
                    col: s.col,
                    expected: vec!["distinct context names".into()],
                    found: format!("second binding of `{x}`"),
                });
            }
            bindings.push((x, t));
            if p.is_sym(",") {
                p.bump();
            } else {
                break;
            }
        }
    }
    p.eof()?;
    Ok(bindings.into_iter().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemKind {
    Def,
    Check,
    Eval,
}

#[derive(Clone, Debug)]
pub struct Item {
    pub kind: ItemKind,
    pub name: Option<Name>,
    pub term: Arc<Term>,
    pub annot: Option<Arc<Type>>,
    pub line: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SourceFile {
    pub items: Vec<Item>,
}

/// Parses an `.elam` file: `def x = t`, `check t : T` and `eval t` items.
pub fn parse_file(text: &str) -> Result<SourceFile, ParseError> {
    let mut p = Parser::new(text)?;
    let mut items = Vec::new();
    while *p.peek() != Tok::Eof {
        let line = p.toks[p.pos].line;
        if p.is_kw("def") {
            p.bump();
            let name = p.var()?;
            p.sym("=")?;
            let term = p.term()?;
            items.push(Item {
                kind: ItemKind::Def,
                name: Some(name),
                term,
                annot: None,
                line,
            });
        } else if p.is_kw("check") {
            p.bump();
            let term = p.term()?;
            p.sym(":")?;
            let annot = p.ty()?;
            items.push(Item {
                kind: ItemKind::Check,
                name: None,
                term,
                annot: Some(annot),
                line,
            });
        } else if p.is_kw("eval") {
            p.bump();
            let term = p.term()?;
            items.push(Item {
                kind: ItemKind::Eval,
                name: None,
                term,
                annot: None,
                line,
            });
        } else {
            return p.error(&["`def`", "`check`", "`eval`"]);
        }
    }
    Ok(SourceFile { items })
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Term,
    Head,
    Atom,
}

fn write_term(out: &mut String, t: &Term, prec: Prec) {
    use std::fmt::Write;
    let paren = |out: &mut String, need: bool, f: &dyn Fn(&mut String)| {
        if need {
            out.push('(');
        }
        f(out);
        if need {
            out.push(')');
        }
    };
    match t {
        Term::Var(x) => out.push_str(x.as_str()),
        Term::Nil => out.push_str("nil"),
        Term::Choose(b) => {
            let _ = write!(out, "choose[{b}]");
        }
        Term::Unpack(b, t) => paren(out, prec == Prec::Atom, &|out| {
            let _ = write!(out, "unpack[{b}](");
            write_term(out, t, Prec::Term);
            out.push(')');
        }),
        Term::Sel(t, k) => {
            write_term(out, t, Prec::Atom);
            let _ = write!(out, ".{k}");
        }
        Term::Fix {
            bound,
            binder,
            annot,
            body,
            default,
        } => {
            let _ = write!(out, "fix[{bound}]({binder}: ");
            write_type(out, annot, false);
            out.push_str(" => ");
            write_term(out, body, Prec::Term);
            out.push_str(", ");
            write_term(out, default, Prec::Term);
            out.push(')');
        }
        Term::TrailLit(tr) => write_trail(out, tr),
        Term::Abs(x, a, b) => paren(out, prec > Prec::Term, &|out| {
            let _ = write!(out, "\\({x}: ");
            write_type(out, a, false);
            out.push_str(") => ");
            write_term(out, b, Prec::Term);
        }),
        Term::App(f, a) => paren(out, prec == Prec::Atom, &|out| {
            write_term(out, f, Prec::Head);
            out.push(' ');
            write_term(out, a, Prec::Atom);
        }),
        Term::Cons(h, tl) => paren(out, prec == Prec::Atom, &|out| {
            out.push_str("cons ");
            write_term(out, h, Prec::Atom);
            out.push(' ');
            write_term(out, tl, Prec::Atom);
        }),
        Term::Match {
            scrutinee,
            nil_case,
            head,
            tail,
            cons_case,
        } => paren(out, prec == Prec::Atom, &|out| {
            out.push_str("match ");
            write_term(out, scrutinee, Prec::Term);
            out.push_str(" { nil => ");
            write_term(out, nil_case, Prec::Term);
            let _ = write!(out, "; cons {head} {tail} => ");
            write_term(out, cons_case, Prec::Term);
            out.push_str(" }");
        }),
    }
}

fn write_trail(out: &mut String, t: &Trail) {
    match t {
        Trail::Empty => out.push_str("<empty>"),
        Trail::Leaf(b, v) => {
            out.push('<');
            out.push_str(&b.to_string());
            out.push(' ');
            write_term(out, v, Prec::Term);
            out.push('>');
        }
        Trail::Node(a, b, c) => {
            out.push_str("<node ");
            write_trail(out, a);
            out.push(' ');
            write_trail(out, b);
            out.push(' ');
            write_trail(out, c);
            out.push('>');
        }
    }
}

fn write_type(out: &mut String, t: &Type, atom: bool) {
    use std::fmt::Write;
    let open = |out: &mut String| {
        if atom {
            out.push('(')
        }
    };
    let close = |out: &mut String| {
        if atom {
            out.push(')')
        }
    };
    match t {
        Type::Base(b) => {
            let _ = write!(out, "{b}");
        }
        Type::Singleton(t, u) => {
            out.push_str("{ ");
            write_term(out, t, Prec::Term);
            out.push_str(" : ");
            write_type(out, u, false);
            out.push_str(" }");
        }
        Type::Pi(x, s, b) | Type::Exists(x, s, b) => {
            open(out);
            let kw = if matches!(t, Type::Pi(..)) {
                "Pi"
            } else {
                "exists"
            };
            let _ = write!(out, "{kw}({x}: ");
            write_type(out, s, false);
            out.push_str(") => ");
            write_type(out, b, false);
            close(out);
        }
        Type::Cons(h, tl) => {
            open(out);
            out.push_str("Cons ");
            write_type(out, h, true);
            out.push(' ');
            write_type(out, tl, true);
            close(out);
        }
        Type::Match {
            scrutinee,
            nil_type,
            head,
            tail,
            cons_type,
        } => {
            open(out);
            out.push_str("Match ");
            write_term(out, scrutinee, Prec::Head);
            out.push_str(" { nil => ");
            write_type(out, nil_type, false);
            let _ = write!(out, "; cons {head} {tail} => ");
            write_type(out, cons_type, false);
            out.push_str(" }");
            close(out);
        }
    }
}

pub fn print_term(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t, Prec::Term);
    s
}

pub fn print_type(t: &Type) -> String {
    let mut s = String::new();
    write_type(&mut s, t, false);
    s
}

pub fn print_context(ctx: &Context) -> String {
    ctx.iter()
        .map(|(x, t)| format!("{x}: {}", print_type(t)))
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_term(self))
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_type(self))
    }
}
