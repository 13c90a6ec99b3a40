//! Recursive-descent parser for formulas and predicate expressions.
//!
//! Precedence, loosest first: `->` (right-associative), `|`, `&`,
//! `U[a,b]` (left-associative), then the prefix operators `!`, `G[a,b]`,
//! `F[a,b]`. Comparisons are desugared into the canonical `g >= 0` form:
//! `e1 >= e2` becomes `e1 - e2 >= 0` and `e1 <= e2` becomes `e2 - e1 >= 0`,
//! dropping a literal zero side. Strict comparisons are accepted and treated
//! as their non-strict counterparts.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::{Expr, Formula, Interval};

/// Names visible to the parser.
#[derive(Debug, Clone, Default)]
pub struct ParseContext {
    pub channels: BTreeSet<String>,
    /// Named numeric constants substituted at parse time.
    pub constants: HashMap<String, f64>,
    /// Named subformulas substituted at parse time.
    pub macros: HashMap<String, Formula>,
}

impl ParseContext {
    pub fn new<I, S>(channels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            channels: channels.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn with_constant(mut self, name: impl Into<String>, value: f64) -> Self {
        self.constants.insert(name.into(), value);
        self
    }

    pub fn with_macro(mut self, name: impl Into<String>, f: Formula) -> Self {
        self.macros.insert(name.into(), f);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownChannel(String),
    InvalidInterval,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

/// Parses `text` into a formula. Channel names must be declared in `ctx`.
pub fn parse_formula(text: &str, ctx: &ParseContext) -> Result<Formula, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, ctx };
    let f = p.implies()?;
    p.expect(&Tok::Eof, "end of input")?;
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    /// Value and, for plain digit strings, the integer reading.
    Num(f64, Option<u32>),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Caret,
    Ge,
    Le,
    Bang,
    Amp,
    Pipe,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v, _) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Caret => "^",
            Tok::Ge => ">=",
            Tok::Le => "<=",
            Tok::Bang => "!",
            Tok::Amp => "&",
            Tok::Pipe => "|",
            Tok::Arrow => "->",
            _ => "",
        }
    }

    fn continues_expression(&self) -> bool {
        matches!(
            self,
            Tok::Plus | Tok::Minus | Tok::Star | Tok::Caret | Tok::Ge | Tok::Le
        )
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
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
        let next = chars.get(i + 1).copied();
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            ',' => (Tok::Comma, 1),
            '+' => (Tok::Plus, 1),
            '*' => (Tok::Star, 1),
            '^' => (Tok::Caret, 1),
            '!' => (Tok::Bang, 1),
            '&' if next == Some('&') => (Tok::Amp, 2),
            '&' => (Tok::Amp, 1),
            '|' if next == Some('|') => (Tok::Pipe, 2),
            '|' => (Tok::Pipe, 1),
            '-' if next == Some('>') => (Tok::Arrow, 2),
            '-' => (Tok::Minus, 1),
            '>' if next == Some('=') => (Tok::Ge, 2),
            '>' => (Tok::Ge, 1),
            '<' if next == Some('=') => (Tok::Le, 2),
            '<' => (Tok::Le, 1),
            c if c.is_ascii_digit() || (c == '.' && next.is_some_and(|n| n.is_ascii_digit())) => {
                let len = scan_number(&chars[i..]);
                let s: String = chars[i..i + len].iter().collect();
                let v: f64 = s.parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::Syntax,
                    line,
                    column: col,
                    message: format!("malformed number `{s}`"),
                })?;
                let int = if s.bytes().all(|b| b.is_ascii_digit()) {
                    s.parse::<u32>().ok()
                } else {
                    None
                };
                (Tok::Num(v, int), len)
            }
            c if c.is_alphabetic() || c == '_' => {
                let len = chars[i..]
                    .iter()
                    .take_while(|c| c.is_alphanumeric() || **c == '_')
                    .count();
                (Tok::Ident(chars[i..i + len].iter().collect()), len)
            }
            other => {
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax,
                    line,
                    column: col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
        i += len;
        col += len;
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

fn scan_number(s: &[char]) -> usize {
    let digits = |from: usize| s[from..].iter().take_while(|c| c.is_ascii_digit()).count();
    let mut n = digits(0);
    if s.get(n) == Some(&'.') {
        n += 1 + digits(n + 1);
    }
    if matches!(s.get(n), Some('e') | Some('E')) {
        let mut m = n + 1;
        if matches!(s.get(m), Some('+') | Some('-')) {
            m += 1;
        }
        let d = digits(m);
        if d > 0 {
            n = m + d;
        }
    }
    n
}

struct Parser<'a> {
    tokens: Vec<Spanned>,
    pos: usize,
    ctx: &'a ParseContext,
}

type PResult<T> = Result<T, ParseError>;

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, kind: ParseErrorKind, message: String) -> ParseError {
        let s = &self.tokens[self.pos];
        ParseError {
            kind,
            line: s.line,
            column: s.column,
            message,
        }
    }

    fn syntax(&self, expected: &str) -> ParseError {
        self.error_here(
            ParseErrorKind::Syntax,
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> PResult<()> {
        if self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(what))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw) && *self.peek_at(1) == Tok::LBracket
    }

    fn implies(&mut self) -> PResult<Formula> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> PResult<Formula> {
        let mut args = vec![self.and()?];
        while *self.peek() == Tok::Pipe {
            self.bump();
            args.push(self.and()?);
        }
        Ok(if args.len() == 1 {
            args.pop().unwrap()
        } else {
            Formula::Or(args)
        })
    }

    fn and(&mut self) -> PResult<Formula> {
        let mut args = vec![self.until()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            args.push(self.until()?);
        }
        Ok(if args.len() == 1 {
            args.pop().unwrap()
        } else {
            Formula::And(args)
        })
    }

    fn until(&mut self) -> PResult<Formula> {
        let mut lhs = self.unary()?;
        while self.at_keyword("U") {
            self.bump();
            let iv = self.interval()?;
            let rhs = self.unary()?;
            lhs = Formula::until(iv, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Formula> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        if self.at_keyword("G") {
            self.bump();
            let iv = self.interval()?;
            return Ok(Formula::always(iv, self.unary()?));
        }
        if self.at_keyword("F") {
            self.bump();
            let iv = self.interval()?;
            return Ok(Formula::eventually(iv, self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Formula> {
        if *self.peek() == Tok::LParen {
            let save = self.pos;
            let grouped = self.grouped_formula();
            match grouped {
                Ok(f) if !self.peek().continues_expression() => return Ok(f),
                Ok(_) => {
                    self.pos = save;
                    return self.predicate();
                }
                Err(e1) => {
                    self.pos = save;
                    return self.predicate().map_err(|e2| furthest(e1, e2));
                }
            }
        }
        if let Tok::Ident(name) = self.peek() {
            if let Some(f) = self.ctx.macros.get(name) {
                if !self.peek_at(1).continues_expression() {
                    let f = f.clone();
                    self.bump();
                    return Ok(f);
                }
            }
        }
        self.predicate()
    }

    fn grouped_formula(&mut self) -> PResult<Formula> {
        self.expect(&Tok::LParen, "`(`")?;
        let f = self.implies()?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok(f)
    }

    fn predicate(&mut self) -> PResult<Formula> {
        let lhs = self.expr()?;
        let op = self.peek().clone();
        if !matches!(op, Tok::Ge | Tok::Le) {
            return Err(self.syntax("comparison `>=` or `<=`"));
        }
        self.bump();
        let rhs = self.expr()?;
        let is_zero = |e: &Expr| matches!(e, Expr::Const(v) if *v == 0.0);
        let g = match op {
            Tok::Ge if is_zero(&rhs) => lhs,
            Tok::Ge => Expr::sub(lhs, rhs),
            _ if is_zero(&lhs) => rhs,
            _ => Expr::sub(rhs, lhs),
        };
        Ok(Formula::Predicate(g))
    }

    fn interval(&mut self) -> PResult<Interval> {
        let (line, column) = (self.tokens[self.pos].line, self.tokens[self.pos].column);
        self.expect(&Tok::LBracket, "`[`")?;
        let lo = self.interval_endpoint()?;
        self.expect(&Tok::Comma, "`,`")?;
        let hi = self.interval_endpoint()?;
        self.expect(&Tok::RBracket, "`]`")?;
        Interval::new(lo, hi).map_err(|e| ParseError {
            kind: ParseErrorKind::InvalidInterval,
            line,
            column,
            message: e.to_string(),
        })
    }

    fn interval_endpoint(&mut self) -> PResult<f64> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let v = match self.peek().clone() {
            Tok::Num(v, _) => v,
            Tok::Ident(name) => match self.ctx.constants.get(&name) {
                Some(v) => *v,
                None => {
                    return Err(self.error_here(
                        ParseErrorKind::Syntax,
                        format!("`{name}` is not a named constant"),
                    ))
                }
            },
            _ => return Err(self.syntax("interval endpoint")),
        };
        self.bump();
        Ok(if negative { -v } else { v })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.signed()?;
        while *self.peek() == Tok::Star {
            self.bump();
            lhs = Expr::mul(lhs, self.signed()?);
        }
        Ok(lhs)
    }

    fn signed(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            // `-3` is a negative literal; `-3^2` is `-(3^2)`.
            if let Tok::Num(v, _) = *self.peek_at(1) {
                if *self.peek_at(2) != Tok::Caret {
                    self.bump();
                    self.bump();
                    return Ok(Expr::Const(-v));
                }
            }
            self.bump();
            return Ok(Expr::neg(self.signed()?));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            return match *self.peek() {
                Tok::Num(_, Some(k)) if k >= 1 => {
                    self.bump();
                    Ok(Expr::pow(base, k))
                }
                _ => Err(self.syntax("integer exponent >= 1")),
            };
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(v, _) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Ident(name) => {
                if let Some(v) = self.ctx.constants.get(&name) {
                    self.bump();
                    Ok(Expr::Const(*v))
                } else if self.ctx.channels.contains(&name) {
                    self.bump();
                    Ok(Expr::Channel(name))
                } else {
                    Err(self.error_here(
                        ParseErrorKind::UnknownChannel(name.clone()),
                        format!("unknown channel `{name}`"),
                    ))
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.syntax("expression")),
        }
    }
}

fn furthest(a: ParseError, b: ParseError) -> ParseError {
    if (b.line, b.column) > (a.line, a.column) {
        b
    } else {
        a
    }
}
