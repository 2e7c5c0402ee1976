//! Recursive-descent parser for the formula language.
//!
//! ```text
//! formula  := disj ('->' formula)?
//! disj     := conj ('or' conj)*
//! conj     := until ('and' until)*
//! until    := unary ('U' '[' int ',' int ']' unary)?
//! unary    := 'not' unary | ('G' | 'F') '[' int ',' int ']' unary | primary
//! primary  := 'true' | 'false' | '(' formula ')' | side cmp side
//! side     := 'abs' '(' expr ')' | expr
//! cmp      := '>' | '>=' | '<' | '<='
//! expr     := linear arithmetic over numbers, y1..yn and schedule names
//! ```
//!
//! `>=` and `<=` mean the same as `>` and `<`; the encoder's margin makes
//! the difference unobservable. `#` starts a comment.

use std::fmt;

use super::{Predicate, Schedules, StlFormula};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "spec parse error at line {}, column {}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Gt,
    Ge,
    Lt,
    Le,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Num(v) => return write!(f, "number `{v}`"),
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrack => "`[`",
            Tok::RBrack => "`]`",
            Tok::Comma => "`,`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Arrow => "`->`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

const KEYWORDS: &[&str] = &["G", "F", "U", "and", "or", "not", "true", "false", "abs"];

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, column, message: String| ParseError { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
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
        let two = chars.get(i + 1).copied();
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBrack, 1),
            ']' => (Tok::RBrack, 1),
            ',' => (Tok::Comma, 1),
            '+' => (Tok::Plus, 1),
            '*' => (Tok::Star, 1),
            '/' => (Tok::Slash, 1),
            '-' if two == Some('>') => (Tok::Arrow, 2),
            '-' => (Tok::Minus, 1),
            '>' if two == Some('=') => (Tok::Ge, 2),
            '>' => (Tok::Gt, 1),
            '<' if two == Some('=') => (Tok::Le, 2),
            '<' => (Tok::Lt, 1),
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text: String = chars[start..j].iter().collect();
                let v = text.parse::<f64>().map_err(|_| err(l0, c0, format!("malformed number `{text}`")))?;
                (Tok::Num(v), j - start)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                (Tok::Ident(chars[start..j].iter().collect()), j - start)
            }
            other => return Err(err(l0, c0, format!("unexpected character `{other}`"))),
        };
        out.push(Spanned { tok, line: l0, column: c0 });
        i += len;
        col += len;
    }
    out.push(Spanned { tok: Tok::Eof, line, column: col });
    Ok(out)
}

/// Affine expression `y · coeffs + Σ w · schedule + constant`.
#[derive(Debug, Clone)]
struct Lin {
    y: Vec<f64>,
    sched: Vec<(String, f64)>,
    c: f64,
}

impl Lin {
    fn constant(n_y: usize, c: f64) -> Self {
        Lin { y: vec![0.0; n_y], sched: Vec::new(), c }
    }

    fn is_constant(&self) -> bool {
        self.y.iter().all(|&a| a == 0.0) && self.sched.iter().all(|(_, w)| *w == 0.0)
    }

    fn scale(mut self, k: f64) -> Self {
        self.y.iter_mut().for_each(|a| *a *= k);
        self.sched.iter_mut().for_each(|(_, w)| *w *= k);
        self.c *= k;
        self
    }

    fn add(mut self, other: Lin, sign: f64) -> Self {
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a += sign * b;
        }
        for (name, w) in other.sched {
            match self.sched.iter_mut().find(|(n, _)| *n == name) {
                Some((_, v)) => *v += sign * w,
                None => self.sched.push((name, sign * w)),
            }
        }
        self.c += sign * other.c;
        self
    }
}

enum Side {
    Lin(Lin),
    Abs(Lin),
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    n_y: usize,
    schedules: &'a Schedules,
}

type PResult<T> = Result<T, ParseError>;

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError { line: s.line, column: s.column, message: message.into() }
    }

    fn expected(&self, what: &str) -> ParseError {
        self.error_here(format!("expected {what}, found {}", self.peek()))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.expected(&tok.to_string()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn formula(&mut self) -> PResult<StlFormula> {
        let lhs = self.disj()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            return Ok(StlFormula::Or(vec![StlFormula::not(lhs), rhs]));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> PResult<StlFormula> {
        let mut parts = vec![self.conj()?];
        while self.is_kw("or") {
            self.bump();
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { StlFormula::Or(parts) })
    }

    fn conj(&mut self) -> PResult<StlFormula> {
        let mut parts = vec![self.until()?];
        while self.is_kw("and") {
            self.bump();
            parts.push(self.until()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { StlFormula::And(parts) })
    }

    fn until(&mut self) -> PResult<StlFormula> {
        let lhs = self.unary()?;
        if self.is_kw("U") {
            self.bump();
            let (a, b) = self.interval()?;
            let rhs = self.unary()?;
            return Ok(StlFormula::until(a, b, lhs, rhs));
        }
        Ok(lhs)
    }

    fn interval(&mut self) -> PResult<(usize, usize)> {
        self.expect(Tok::LBrack)?;
        let a = self.integer()?;
        self.expect(Tok::Comma)?;
        let b = self.integer()?;
        if a > b {
            return Err(self.error_here(format!("interval [{a},{b}] has lower bound above upper bound")));
        }
        self.expect(Tok::RBrack)?;
        Ok((a, b))
    }

    fn integer(&mut self) -> PResult<usize> {
        match *self.peek() {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e9 => {
                self.bump();
                Ok(v as usize)
            }
            _ => Err(self.expected("a non-negative integer time bound")),
        }
    }

    fn unary(&mut self) -> PResult<StlFormula> {
        if self.is_kw("not") {
            self.bump();
            return Ok(StlFormula::not(self.unary()?));
        }
        for (kw, always) in [("G", true), ("F", false)] {
            if self.is_kw(kw) {
                self.bump();
                let (a, b) = self.interval()?;
                let f = self.unary()?;
                return Ok(if always { StlFormula::always(a, b, f) } else { StlFormula::eventually(a, b, f) });
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<StlFormula> {
        if self.is_kw("true") {
            self.bump();
            return Ok(StlFormula::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(StlFormula::False);
        }
        if *self.peek() == Tok::LParen {
            // Either a parenthesized formula or a comparison whose left side
            // starts with a parenthesized expression.
            let start = self.pos;
            self.bump();
            let as_formula = self.formula().and_then(|f| self.expect(Tok::RParen).map(|_| f));
            match as_formula {
                Ok(f) => return Ok(f),
                Err(e1) => {
                    let far1 = self.pos;
                    self.pos = start;
                    return self.comparison().map_err(|e2| if far1 > self.pos { e1 } else { e2 });
                }
            }
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<StlFormula> {
        let lhs = self.side()?;
        let greater = match self.peek() {
            Tok::Gt | Tok::Ge => true,
            Tok::Lt | Tok::Le => false,
            _ => return Err(self.expected("a comparison operator (`>`, `>=`, `<`, `<=`)")),
        };
        self.bump();
        let rhs = self.side()?;
        let pred = |l: Lin| -> PResult<StlFormula> { self.predicate(l) };
        match (lhs, rhs) {
            (Side::Lin(l), Side::Lin(r)) => {
                if greater {
                    pred(l.add(r, -1.0))
                } else {
                    pred(r.add(l, -1.0))
                }
            }
            (Side::Abs(e), Side::Lin(r)) => abs_compare(e, r, greater, pred),
            (Side::Lin(r), Side::Abs(e)) => abs_compare(e, r, !greater, pred),
            (Side::Abs(_), Side::Abs(_)) => Err(self.error_here("`abs` may appear on only one side of a comparison")),
        }
    }

    fn predicate(&self, l: Lin) -> PResult<StlFormula> {
        let mut schedules = Vec::new();
        for (name, w) in l.sched {
            if w != 0.0 {
                schedules.push((w, self.schedules[&name].clone()));
            }
        }
        Ok(StlFormula::Predicate(Predicate { coeffs: l.y, offset: l.c, schedules }))
    }

    fn side(&mut self) -> PResult<Side> {
        if self.is_kw("abs") {
            self.bump();
            self.expect(Tok::LParen)?;
            let e = self.expr()?;
            self.expect(Tok::RParen)?;
            return Ok(Side::Abs(e));
        }
        Ok(Side::Lin(self.expr()?))
    }

    fn expr(&mut self) -> PResult<Lin> {
        let mut acc = self.term()?;
        loop {
            let sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => return Ok(acc),
            };
            self.bump();
            let rhs = self.term()?;
            acc = acc.add(rhs, sign);
        }
    }

    fn term(&mut self) -> PResult<Lin> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.factor()?;
                    acc = if acc.is_constant() {
                        rhs.scale(acc.c)
                    } else if rhs.is_constant() {
                        acc.scale(rhs.c)
                    } else {
                        return Err(self.error_here("product of two signal terms is not affine"));
                    };
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.factor()?;
                    if !rhs.is_constant() || rhs.c == 0.0 {
                        return Err(self.error_here("division is only allowed by a nonzero constant"));
                    }
                    acc = acc.scale(1.0 / rhs.c);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> PResult<Lin> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                Ok(self.factor()?.scale(-1.0))
            }
            Tok::Num(v) => {
                self.bump();
                Ok(Lin::constant(self.n_y, v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "abs" {
                    return Err(self.error_here("`abs(...)` must form a whole side of a comparison"));
                }
                if KEYWORDS.contains(&name.as_str()) {
                    return Err(self.expected("an expression"));
                }
                if let Some(k) = output_index(&name) {
                    if k == 0 || k > self.n_y {
                        return Err(
                            self.error_here(format!("`{name}` is out of range: the system has {} output(s)", self.n_y))
                        );
                    }
                    self.bump();
                    let mut l = Lin::constant(self.n_y, 0.0);
                    l.y[k - 1] = 1.0;
                    return Ok(l);
                }
                if self.schedules.contains_key(&name) {
                    self.bump();
                    let mut l = Lin::constant(self.n_y, 0.0);
                    l.sched.push((name, 1.0));
                    return Ok(l);
                }
                Err(self.error_here(format!("unknown identifier `{name}` (outputs are y1..y{})", self.n_y)))
            }
            _ => Err(self.expected("an expression")),
        }
    }
}

fn output_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('y')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// `|e| > r` is `e > r or -e > r`; `|e| < r` is `e < r and -e < r`.
fn abs_compare(e: Lin, r: Lin, greater: bool, pred: impl Fn(Lin) -> PResult<StlFormula>) -> PResult<StlFormula> {
    if greater {
        let pos = pred(e.clone().add(r.clone(), -1.0))?;
        let neg = pred(e.scale(-1.0).add(r, -1.0))?;
        Ok(StlFormula::Or(vec![pos, neg]))
    } else {
        let upper = pred(r.clone().add(e.clone(), -1.0))?;
        let lower = pred(e.add(r, 1.0))?;
        Ok(StlFormula::And(vec![upper, lower]))
    }
}

/// Parses a formula over outputs `y1..y{n_y}`.
pub fn parse(src: &str, n_y: usize) -> Result<StlFormula, ParseError> {
    parse_with_schedules(src, n_y, &Schedules::new())
}

/// Parses a formula whose predicates may also reference named schedules.
pub fn parse_with_schedules(src: &str, n_y: usize, schedules: &Schedules) -> Result<StlFormula, ParseError> {
    for name in schedules.keys() {
        if KEYWORDS.contains(&name.as_str()) || output_index(name).is_some() {
            return Err(ParseError { line: 0, column: 0, message: format!("schedule name `{name}` is reserved") });
        }
    }
    let mut p = Parser { toks: lex(src)?, pos: 0, n_y, schedules };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(p.expected("end of input or a binary operator"));
    }
    Ok(f)
}
