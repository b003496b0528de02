//! Coefficient-field expressions over the base point `z`.
//!
//! Grammar, lowest precedence first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' exponent)?
//! exponent:= '-'? INT ('^' exponent)? | '(' exponent ')'
//! atom    := NUMBER | NUMBER 'i' | 'z'K | 'z_'K | conj '(' sum ')' | exp '(' sum ')' | '(' sum ')'
//! ```
//!
//! `^` binds tighter than unary minus and chains to the right; exponents are
//! integer constants folded at parse time with `|p| ≤ 16`. Fields depend on
//! `z` only: there is no way to name the fibre coordinate.
//!
//! Two foldings keep complex literals atomic: a negated literal becomes a
//! literal, and `real ± imaginary` between two literals becomes one
//! literal, so `(1+2i)` parses to `Lit(1+2i)`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, C64};

pub const MAX_EXPONENT: i32 = 16;
const MAX_DEPTH: usize = 200;
/// Divisors with smaller modulus are rejected by [`Expr::eval`].
pub const DIVISION_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(C64),
    /// 1-based coordinate index.
    Var(usize),
    Conj(Box<Expr>),
    Exp(Box<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Lit(C64::zero())
    }

    pub fn constant(v: C64) -> Self {
        Expr::Lit(v)
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Lit(v) if v.is_zero())
    }

    /// Largest variable index referenced (0 when constant).
    pub fn max_index(&self) -> usize {
        match self {
            Expr::Lit(_) => 0,
            Expr::Var(k) => *k,
            Expr::Conj(e) | Expr::Exp(e) | Expr::Neg(e) | Expr::Pow(e, _) => e.max_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_index().max(b.max_index())
            }
        }
    }

    /// Checks every variable against the dimension `n`.
    pub fn bind(&self, n: usize) -> Result<()> {
        let k = self.max_index();
        if k > n {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
        Ok(())
    }

    pub fn eval(&self, z: &[C64]) -> Result<C64> {
        Ok(match self {
            Expr::Lit(v) => *v,
            Expr::Var(k) => *z
                .get(k.wrapping_sub(1))
                .ok_or(Error::IndexOutOfRange { index: *k, n: z.len() })?,
            Expr::Conj(e) => e.eval(z)?.conj(),
            Expr::Exp(e) => e.eval(z)?.exp(),
            Expr::Neg(e) => -e.eval(z)?,
            Expr::Add(a, b) => a.eval(z)? + b.eval(z)?,
            Expr::Sub(a, b) => a.eval(z)? - b.eval(z)?,
            Expr::Mul(a, b) => a.eval(z)? * b.eval(z)?,
            Expr::Div(a, b) => {
                let num = a.eval(z)?;
                let den = b.eval(z)?;
                if den.norm() < DIVISION_FLOOR {
                    return Err(Error::DivisionNearZero { modulus: den.norm() });
                }
                num / den
            }
            Expr::Pow(e, p) => {
                let base = e.eval(z)?;
                if *p < 0 && base.norm() < DIVISION_FLOOR {
                    return Err(Error::DivisionNearZero { modulus: base.norm() });
                }
                base.powi(*p)
            }
        })
    }
}

fn fmt_real(x: f64) -> String {
    // Display for f64 is the shortest string that round-trips.
    format!("{}", x)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => {
                let neg_zero = |x: f64| x == 0.0 && x.is_sign_negative();
                if v.im == 0.0 && !neg_zero(v.im) {
                    if v.re >= 0.0 && !neg_zero(v.re) {
                        write!(f, "{}", fmt_real(v.re))
                    } else {
                        write!(f, "(-{})", fmt_real(-v.re))
                    }
                } else if v.re == 0.0 && !neg_zero(v.re) {
                    if v.im >= 0.0 {
                        write!(f, "{}i", fmt_real(v.im))
                    } else {
                        write!(f, "(-{}i)", fmt_real(-v.im))
                    }
                } else {
                    let head = if v.re >= 0.0 && !neg_zero(v.re) {
                        fmt_real(v.re)
                    } else {
                        format!("-{}", fmt_real(-v.re))
                    };
                    if v.im >= 0.0 && !neg_zero(v.im) {
                        write!(f, "({}+{}i)", head, fmt_real(v.im))
                    } else {
                        write!(f, "({}-{}i)", head, fmt_real(-v.im))
                    }
                }
            }
            Expr::Var(k) if *k < 10 => write!(f, "z{}", k),
            Expr::Var(k) => write!(f, "z_{}", k),
            Expr::Conj(e) => write!(f, "conj({})", e),
            Expr::Exp(e) => write!(f, "exp({})", e),
            Expr::Neg(e) => write!(f, "(-{})", e),
            Expr::Add(a, b) => write!(f, "({} + {})", a, b),
            Expr::Sub(a, b) => write!(f, "({} - {})", a, b),
            Expr::Mul(a, b) => write!(f, "({} * {})", a, b),
            Expr::Div(a, b) => write!(f, "({} / {})", a, b),
            Expr::Pow(e, p) => {
                let base = match **e {
                    Expr::Var(_) => e.to_string(),
                    Expr::Lit(v) if v.im == 0.0 && v.re >= 0.0 && !v.re.is_sign_negative() => e.to_string(),
                    _ => format!("({})", e),
                };
                if *p < 0 {
                    write!(f, "{}^({})", base, p)
                } else {
                    write!(f, "{}^{}", base, p)
                }
            }
        }
    }
}

pub fn parse(source: &str) -> Result<Expr> {
    let mut p = Parser {
        src: source,
        bytes: source.as_bytes(),
        pos: 0,
        depth: 0,
    };
    p.skip_ws();
    let e = p.sum()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.error("operator or end of input"));
    }
    Ok(e)
}

/// Parses and checks indices against dimension `n`.
pub fn parse_bound(source: &str, n: usize) -> Result<Expr> {
    let e = parse(source)?;
    e.bind(n)?;
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, expected: &str) -> Error {
        let before = &self.src[..self.char_boundary(self.pos)];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Error::SyntaxError {
            line,
            column,
            expected: expected.to_string(),
        }
    }

    fn char_boundary(&self, mut i: usize) -> usize {
        i = i.min(self.src.len());
        while !self.src.is_char_boundary(i) {
            i -= 1;
        }
        i
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, ch: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: u8, what: &str) -> Result<()> {
        if self.eat(ch) {
            Ok(())
        } else {
            Err(self.error(what))
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("shallower nesting"));
        }
        Ok(())
    }

    fn sum(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.product()?;
                lhs = fold_complex(lhs, rhs, 1.0);
            } else if self.eat(b'-') {
                let rhs = self.product()?;
                lhs = fold_complex(lhs, rhs, -1.0);
            } else {
                break;
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(match inner {
                Expr::Lit(v) => Expr::Lit(-v),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let p = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), p));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32> {
        self.enter()?;
        let value = if self.eat(b'(') {
            let v = self.exponent()?;
            self.expect(b')', "')'")?;
            v
        } else {
            let neg = self.eat(b'-');
            self.skip_ws();
            let start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("integer exponent"));
            }
            let digits = &self.src[start..self.pos];
            let mut v: i64 = digits.parse().map_err(|_| self.error("integer exponent with |p| <= 16"))?;
            if neg {
                v = -v;
            }
            if self.eat(b'^') {
                let e = self.exponent()?;
                // constant folding of the right-associative chain
                v = checked_ipow(v, e).ok_or_else(|| self.error("integer exponent with |p| <= 16"))?;
            }
            if v.abs() > MAX_EXPONENT as i64 {
                return Err(self.error("integer exponent with |p| <= 16"));
            }
            v as i32
        };
        if value.abs() > MAX_EXPONENT {
            return Err(self.error("integer exponent with |p| <= 16"));
        }
        self.depth -= 1;
        Ok(value)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(b')', "')'")?;
                Ok(e)
            }
            Some(b'0'..=b'9' | b'.') => self.number(),
            Some(b'a'..=b'z' | b'A'..=b'Z' | b'_') => self.ident(),
            _ => Err(self.error("number, variable, function or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(b'0'..=b'9')) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.error("digits"));
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        let value: f64 = text.parse().map_err(|_| self.error("number"))?;
        if !value.is_finite() {
            self.pos = start;
            return Err(self.error("finite number"));
        }
        if self.peek() == Some(b'i') && !self.ident_continues(self.pos + 1) {
            self.pos += 1;
            return Ok(Expr::Lit(c(0.0, value)));
        }
        Ok(Expr::Lit(c(value, 0.0)))
    }

    fn ident_continues(&self, at: usize) -> bool {
        matches!(self.bytes.get(at), Some(b'a'..=b'z' | b'A'..=b'Z' | b'_' | b'0'..=b'9'))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.ident_continues(self.pos) {
            self.pos += 1;
        }
        let word = &self.src[start..self.pos];
        match word {
            "conj" | "exp" => {
                self.expect(b'(', "'(' after function name")?;
                let arg = self.sum()?;
                self.expect(b')', "')'")?;
                Ok(if word == "conj" {
                    Expr::Conj(Box::new(arg))
                } else {
                    Expr::Exp(Box::new(arg))
                })
            }
            _ => {
                let digits = word
                    .strip_prefix("z_")
                    .or_else(|| word.strip_prefix('z'))
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
                match digits.and_then(|d| d.parse::<usize>().ok()) {
                    Some(k) if k >= 1 => Ok(Expr::Var(k)),
                    _ => {
                        self.pos = start;
                        Err(self.error("variable z1, z2, ... or function conj/exp"))
                    }
                }
            }
        }
    }
}

fn checked_ipow(base: i64, exp: i32) -> Option<i64> {
    if exp < 0 {
        return match base {
            1 => Some(1),
            -1 => Some(if exp % 2 == 0 { 1 } else { -1 }),
            _ => None,
        };
    }
    let mut acc: i64 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
        if acc.abs() > 1 << 20 {
            return None;
        }
    }
    Some(acc)
}

fn fold_complex(lhs: Expr, rhs: Expr, sign: f64) -> Expr {
    match (&lhs, &rhs) {
        (Expr::Lit(a), Expr::Lit(b)) if a.im == 0.0 && b.re == 0.0 && !b.re.is_sign_negative() => {
            Expr::Lit(c(a.re, sign * b.im))
        }
        _ if sign > 0.0 => Expr::Add(Box::new(lhs), Box::new(rhs)),
        _ => Expr::Sub(Box::new(lhs), Box::new(rhs)),
    }
}

/// Symmetric slot storage: `a_sym[i][j]` and `a_sym[j][i]` share one AST.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    n: usize,
    /// Upper triangle, row-major, `i <= j`.
    a_sym: Vec<Expr>,
    a_mixed: Vec<Expr>,
    b: Vec<Expr>,
}

/// Field values at one base point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValues {
    /// `a_ij(z)`, exactly symmetric.
    pub a: CMatrix,
    /// `a_ij̄(z)`, Hermitian part of the raw field.
    pub a_mixed: CMatrix,
    pub b: CVector,
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl FieldTable {
    /// Builds a table from raw slots. `None` means the entry was absent.
    ///
    /// For the symmetric block a missing partner defers to the present one;
    /// two different ASTs for `(i, j)` and `(j, i)` are replaced by their
    /// average so that storage stays symmetric.
    pub fn new(
        n: usize,
        a_sym: &[Vec<Option<Expr>>],
        a_mixed: &[Vec<Option<Expr>>],
        b: &[Option<Expr>],
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        let at = |m: &[Vec<Option<Expr>>], i: usize, j: usize| m.get(i).and_then(|r| r.get(j)).cloned().flatten();
        let check_shape = |m: &[Vec<Option<Expr>>]| -> Result<()> {
            if m.len() > n || m.iter().any(|r| r.len() > n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.iter().map(|r| r.len()).max().unwrap_or(0).max(m.len()),
                });
            }
            Ok(())
        };
        check_shape(a_sym)?;
        check_shape(a_mixed)?;
        if b.len() > n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        let mut sym = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let e = match (at(a_sym, i, j), at(a_sym, j, i)) {
                    (Some(x), Some(y)) if x == y => x,
                    (Some(x), Some(y)) => Expr::Mul(
                        Box::new(Expr::Lit(c(0.5, 0.0))),
                        Box::new(Expr::Add(Box::new(x), Box::new(y))),
                    ),
                    (Some(x), None) | (None, Some(x)) => x,
                    (None, None) => Expr::zero(),
                };
                sym.push(e);
            }
        }
        let mut mixed = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                mixed.push(at(a_mixed, i, j).unwrap_or_else(Expr::zero));
            }
        }
        let b: Vec<Expr> = (0..n).map(|i| b.get(i).cloned().flatten().unwrap_or_else(Expr::zero)).collect();
        let table = FieldTable {
            n,
            a_sym: sym,
            a_mixed: mixed,
            b,
        };
        for e in table.a_sym.iter().chain(&table.a_mixed).chain(&table.b) {
            e.bind(n)?;
        }
        Ok(table)
    }

    /// Parses string slots; empty strings count as absent.
    pub fn from_strings(n: usize, a_sym: &[Vec<String>], a_mixed: &[Vec<String>], b: &[String]) -> Result<Self> {
        let conv = |s: &String| -> Result<Option<Expr>> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                parse(s).map(Some)
            }
        };
        let conv_m = |m: &[Vec<String>]| -> Result<Vec<Vec<Option<Expr>>>> {
            m.iter().map(|r| r.iter().map(conv).collect()).collect()
        };
        let b: Vec<Option<Expr>> = b.iter().map(conv).collect::<Result<_>>()?;
        Self::new(n, &conv_m(a_sym)?, &conv_m(a_mixed)?, &b)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn a_sym(&self, i: usize, j: usize) -> &Expr {
        &self.a_sym[upper_index(self.n, i, j)]
    }

    pub fn a_mixed(&self, i: usize, j: usize) -> &Expr {
        &self.a_mixed[i * self.n + j]
    }

    pub fn b(&self, i: usize) -> &Expr {
        &self.b[i]
    }

    /// True when every `a_ij̄` slot is the literal zero.
    pub fn mixed_is_zero(&self) -> bool {
        self.a_mixed.iter().all(Expr::is_zero_literal)
    }

    pub fn eval(&self, z: &[C64]) -> Result<FieldValues> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: z.len(),
            });
        }
        let n = self.n;
        let mut sym = Vec::with_capacity(self.a_sym.len());
        for e in &self.a_sym {
            sym.push(e.eval(z)?);
        }
        let a = CMatrix::from_fn(n, |i, j| sym[upper_index(n, i, j)]).into_symmetric();
        let mut raw = Vec::with_capacity(n * n);
        for e in &self.a_mixed {
            raw.push(e.eval(z)?);
        }
        let a_mixed = CMatrix::hermitianized(&CMatrix::general(n, raw)?);
        let b = self.b.iter().map(|e| e.eval(z)).collect::<Result<Vec<_>>>()?;
        Ok(FieldValues {
            a,
            a_mixed,
            b: CVector(b),
        })
    }

    /// Full-matrix string form, suitable for a definition file.
    pub fn to_strings(&self) -> (Vec<Vec<String>>, Vec<Vec<String>>, Vec<String>) {
        let n = self.n;
        let a_sym = (0..n).map(|i| (0..n).map(|j| self.a_sym(i, j).to_string()).collect()).collect();
        let a_mixed = (0..n).map(|i| (0..n).map(|j| self.a_mixed(i, j).to_string()).collect()).collect();
        let b = self.b.iter().map(|e| e.to_string()).collect();
        (a_sym, a_mixed, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn var(k: usize) -> Box<Expr> {
        Box::new(Expr::Var(k))
    }

    #[test]
    fn parses_fixture_coefficient() {
        let e = parse("exp(z2 + conj(z2))").unwrap();
        assert_eq!(e, Expr::Exp(Box::new(Expr::Add(var(2), Box::new(Expr::Conj(var(2)))))));
    }

    #[test]
    fn parses_zero_and_complex_literal() {
        assert_eq!(parse("0").unwrap(), Expr::Lit(c(0.0, 0.0)));
        let e = parse("(1+2i)*z1^2").unwrap();
        assert_eq!(e, Expr::Mul(Box::new(Expr::Lit(c(1.0, 2.0))), Box::new(Expr::Pow(var(1), 2))));
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("-z1^2").unwrap(), Expr::Neg(Box::new(Expr::Pow(var(1), 2))));
        assert_eq!(parse("z1^2^3").unwrap(), Expr::Pow(var(1), 8));
        assert_eq!(parse("z1^-2").unwrap(), Expr::Pow(var(1), -2));
        assert_eq!(
            parse("z1 - z2 - z3").unwrap(),
            Expr::Sub(Box::new(Expr::Sub(var(1), var(2))), var(3))
        );
        assert_eq!(
            parse("z1 + z2 * z3").unwrap(),
            Expr::Add(var(1), Box::new(Expr::Mul(var(2), var(3))))
        );
        assert_eq!(parse("z_12").unwrap(), Expr::Var(12));
    }

    #[test]
    fn rejects_bad_input_with_position() {
        match parse("z1 +\n  * 2") {
            Err(Error::SyntaxError { line, column, .. }) => {
                assert_eq!((line, column), (2, 3));
            }
            other => panic!("unexpected {:?}", other),
        }
        assert!(parse("z1^17").is_err());
        assert!(parse("z1^2.5").is_err());
        assert!(parse("w1").is_err());
        assert!(parse("z0").is_err());
        assert!(parse("exp z1").is_err());
        assert!(parse("").is_err());
        assert!(parse("1e999").is_err());
        let deep = "(".repeat(10_000);
        assert!(parse(&deep).is_err());
    }

    #[test]
    fn bind_detects_out_of_range() {
        assert!(matches!(parse_bound("z4", 3), Err(Error::IndexOutOfRange { index: 4, n: 3 })));
        assert!(parse_bound("z3", 3).is_ok());
    }

    #[test]
    fn eval_examples() {
        let z0 = [c(0.0, 0.0); 3];
        let one = parse("exp(z1+conj(z1))").unwrap().eval(&z0).unwrap();
        assert!((one - c(1.0, 0.0)).norm() < 1e-15);
        let e = parse("conj(z1)").unwrap().eval(&[c(2.0, 3.0)]).unwrap();
        assert_eq!(e, c(2.0, -3.0));
        let z = [c(0.0, 0.0), c(0.5, 0.0)];
        let v = parse("exp(z2+conj(z2))").unwrap().eval(&z).unwrap();
        assert!((v.re - core::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn division_near_zero() {
        let e = parse("1/z1").unwrap();
        assert!(matches!(e.eval(&[c(0.0, 0.0)]), Err(Error::DivisionNearZero { .. })));
        let p = parse("z1^-1").unwrap();
        assert!(matches!(p.eval(&[c(0.0, 0.0)]), Err(Error::DivisionNearZero { .. })));
    }

    #[test]
    fn negative_literals_round_trip() {
        for s in ["-1", "(-1+2i)", "1-2i", "-2i", "-0", "0.1+0.2i", "2^3", "(-2)^3", "1e-7"] {
            let e = parse(s).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{s} -> {e}");
        }
    }

    #[test]
    fn field_table_shares_symmetric_slots() {
        let some = |s: &str| Some(parse(s).unwrap());
        let t = FieldTable::new(
            2,
            &[vec![some("1"), some("z1")], vec![None, some("2")]],
            &[],
            &[some("3")],
        )
        .unwrap();
        assert_eq!(t.a_sym(0, 1), t.a_sym(1, 0));
        assert_eq!(t.a_sym(1, 0), &Expr::Var(1));
        assert!(t.b(1).is_zero_literal());
        assert!(t.mixed_is_zero());
        let v = t.eval(&[c(0.5, 1.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(v.a[(0, 1)], c(0.5, 1.0));
        assert!(v.a.is_exactly_symmetric());
    }

    #[test]
    fn field_table_averages_conflicting_slots() {
        let some = |s: &str| Some(parse(s).unwrap());
        let t = FieldTable::new(2, &[vec![None, some("2")], vec![some("4"), None]], &[], &[]).unwrap();
        let v = t.eval(&[c(0.0, 0.0); 2]).unwrap();
        assert_eq!(v.a[(0, 1)], c(3.0, 0.0));
        assert_eq!(v.a[(1, 0)], c(3.0, 0.0));
    }

    #[test]
    fn field_table_rejects_out_of_range_and_bad_shape() {
        let some = |s: &str| Some(parse(s).unwrap());
        assert!(FieldTable::new(2, &[], &[], &[some("z3")]).is_err());
        assert!(FieldTable::new(1, &[vec![None, None]], &[], &[]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn leaf() -> impl Strategy<Value = Expr> {
            prop_oneof![
                (-5.0f64..5.0, -5.0f64..5.0, 0u8..3).prop_map(|(a, b, kind)| match kind {
                    0 => Expr::Lit(c(a, 0.0)),
                    1 => Expr::Lit(c(0.0, b)),
                    _ => Expr::Lit(c(a, b)),
                }),
                (1usize..=3).prop_map(Expr::Var),
            ]
        }

        fn expr() -> impl Strategy<Value = Expr> {
            leaf().prop_recursive(5, 48, 2, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|e| Expr::Conj(Box::new(e))),
                    inner.clone().prop_map(|e| Expr::Exp(Box::new(Expr::Mul(
                        Box::new(Expr::Lit(c(0.1, 0.0))),
                        Box::new(e)
                    )))),
                    inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                    (inner, -3i32..=3).prop_map(|(e, p)| Expr::Pow(Box::new(e), p)),
                ]
            })
        }

        /// `conj(e)` rewritten with the conjugation pushed to the leaves.
        fn push_conj(e: &Expr) -> Expr {
            let b = |x: &Expr| Box::new(push_conj(x));
            match e {
                Expr::Lit(v) => Expr::Lit(v.conj()),
                Expr::Var(_) => Expr::Conj(Box::new(e.clone())),
                Expr::Conj(inner) => (**inner).clone(),
                Expr::Exp(x) => Expr::Exp(b(x)),
                Expr::Neg(x) => Expr::Neg(b(x)),
                Expr::Add(x, y) => Expr::Add(b(x), b(y)),
                Expr::Sub(x, y) => Expr::Sub(b(x), b(y)),
                Expr::Mul(x, y) => Expr::Mul(b(x), b(y)),
                Expr::Div(x, y) => Expr::Div(b(x), b(y)),
                Expr::Pow(x, p) => Expr::Pow(b(x), *p),
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn print_parse_round_trip(e in expr()) {
                let s = e.to_string();
                let once = parse(&s).unwrap();
                let twice = parse(&once.to_string()).unwrap();
                prop_assert_eq!(once, twice);
            }

            #[test]
            fn conj_commutes_with_eval(e in expr(), z in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3)) {
                let z: Vec<C64> = z.into_iter().map(|(a, b)| c(a, b)).collect();
                let direct = e.eval(&z);
                let conj = push_conj(&e).eval(&z);
                if let (Ok(d), Ok(k)) = (direct, conj) {
                    if d.is_finite() {
                        prop_assert!((d.conj() - k).norm() <= 1e-12 * d.norm().max(1.0));
                    }
                }
            }

            #[test]
            fn parser_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
                let s = alloc::string::String::from_utf8_lossy(&bytes);
                let _ = parse(&s);
            }

            #[test]
            fn parser_never_panics_on_grammar_soup(s in "[z0-9_+*/^().i ce-]{0,40}") {
                let _ = parse(&s);
            }
        }
    }
}
