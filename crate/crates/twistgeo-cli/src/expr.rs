//! Expression grammar for algebra elements, and a printer whose output
//! parses back to the same element.
//!
//! ```text
//! expr   := ['-'] term (('+' | '-') term)*
//! term   := factor (['*'] factor)*
//! factor := atom ('^' nat)?
//! atom   := rational | 'i' | 'h' | 'x' nat | 'U[' int {',' int} ']'
//!         | '(' expr ')' | 'star(' expr ',' expr ')'
//! ```
//!
//! `*`, `^` and juxtaposition are the classical (commutative) product;
//! `star` is the deformed product.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use twistgeo::algebra::{Algebra, AlgebraElement, AlgebraKind, BasisMonomial};
use twistgeo::scalars::{GaussianRational, Series};

/// 1-based source position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownGenerator(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax(m) => write!(f, "{}: syntax error: {m}", self.pos),
            ParseErrorKind::UnknownGenerator(m) => write!(f, "{}: unknown generator: {m}", self.pos),
        }
    }
}

impl std::error::Error for ParseError {}

/// Non-fatal diagnostic, e.g. a power of `h` beyond the truncation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Warning {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: warning: {}", self.pos, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    X(usize),
    H,
    I,
    U,
    Star,
    Plus,
    Minus,
    Times,
    Caret,
    Slash,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(n) => format!("`{n}`"),
            Tok::X(n) => format!("`x{n}`"),
            Tok::H => "`h`".into(),
            Tok::I => "`i`".into(),
            Tok::U => "`U`".into(),
            Tok::Star => "`star`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Times => "`*`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::End => "end of input".into(),
        }
    }

    fn starts_factor(&self) -> bool {
        matches!(self, Tok::Int(_) | Tok::X(_) | Tok::H | Tok::I | Tok::U | Tok::Star | Tok::LParen)
    }
}

fn syntax(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError { pos, kind: ParseErrorKind::Syntax(msg.into()) }
}

fn lex(src: &str, start: Pos) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut pos = start;
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let here = pos;
        if c == '\n' {
            pos.line += 1;
            pos.col = 1;
            k += 1;
            continue;
        }
        if c.is_whitespace() {
            pos.col += 1;
            k += 1;
            continue;
        }
        let digits = |from: usize| chars[from..].iter().take_while(|d| d.is_ascii_digit()).count();
        let (tok, width) = match c {
            '0'..='9' => {
                let n = digits(k);
                let text: String = chars[k..k + n].iter().collect();
                (Tok::Int(text.parse().expect("digit run")), n)
            }
            'x' => {
                let n = digits(k + 1);
                if n == 0 {
                    return Err(syntax(here, "expected a generator index after `x`"));
                }
                let text: String = chars[k + 1..k + 1 + n].iter().collect();
                let index = text.parse().map_err(|_| syntax(here, "generator index too large"))?;
                (Tok::X(index), n + 1)
            }
            's' if chars[k..].starts_with(&['s', 't', 'a', 'r']) => (Tok::Star, 4),
            'h' => (Tok::H, 1),
            'i' => (Tok::I, 1),
            'U' => (Tok::U, 1),
            '+' => (Tok::Plus, 1),
            '-' => (Tok::Minus, 1),
            '*' => (Tok::Times, 1),
            '^' => (Tok::Caret, 1),
            '/' => (Tok::Slash, 1),
            ',' => (Tok::Comma, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            other => return Err(syntax(here, format!("unexpected character `{other}`"))),
        };
        out.push((tok, here));
        pos.col += width;
        k += width;
    }
    out.push((Tok::End, pos));
    Ok(out)
}

struct Parser<'a> {
    alg: &'a Algebra,
    toks: Vec<(Tok, Pos)>,
    at: usize,
    warnings: Vec<Warning>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected {}, found {}", want.describe(), self.peek().describe())))
        }
    }

    fn expr(&mut self) -> Result<AlgebraElement, ParseError> {
        let negate = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let mut acc = self.term()?;
        if negate {
            acc = acc.neg();
        }
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc.add_assign(&self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc.sub_assign(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<AlgebraElement, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if *self.peek() == Tok::Times {
                self.bump();
            } else if !self.peek().starts_factor() {
                return Ok(acc);
            }
            acc = acc.classical_mul(&self.factor()?);
        }
    }

    fn factor(&mut self) -> Result<AlgebraElement, ParseError> {
        let is_h = *self.peek() == Tok::H;
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        let (_, caret) = self.bump();
        let (tok, pos) = self.bump();
        let Tok::Int(k) = tok else {
            return Err(syntax(pos, format!("expected a natural exponent after `^`, found {}", tok.describe())));
        };
        let k: u32 = k.try_into().map_err(|_| syntax(pos, "exponent too large"))?;
        if is_h && k as usize > self.alg.order() {
            self.warnings.push(Warning {
                pos: caret,
                message: format!("h^{k} exceeds the truncation order {} and is truncated to zero", self.alg.order()),
            });
            return Ok(self.alg.zero());
        }
        let mut out = self.alg.one();
        for _ in 0..k {
            out = out.classical_mul(&base);
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<AlgebraElement, ParseError> {
        let (tok, pos) = self.bump();
        let alg = self.alg;
        match tok {
            Tok::Int(p) => {
                let value = if *self.peek() == Tok::Slash {
                    self.bump();
                    let (den, dpos) = self.bump();
                    match den {
                        Tok::Int(q) if !q.is_zero() => BigRational::new(p, q),
                        Tok::Int(_) => return Err(syntax(dpos, "zero denominator")),
                        other => return Err(syntax(dpos, format!("expected a denominator, found {}", other.describe()))),
                    }
                } else {
                    BigRational::from_integer(p)
                };
                Ok(alg.constant(GaussianRational::real(value)))
            }
            Tok::I => Ok(alg.constant(GaussianRational::i())),
            Tok::H => {
                if alg.order() == 0 {
                    self.warnings.push(Warning { pos, message: "h exceeds the truncation order 0 and is truncated to zero".into() });
                }
                Ok(alg.h())
            }
            Tok::X(j) => {
                if alg.kind() != AlgebraKind::Polynomial {
                    return Err(ParseError {
                        pos,
                        kind: ParseErrorKind::UnknownGenerator(format!("x{j} on a torus algebra (use U[...] modes)")),
                    });
                }
                if j == 0 || j > alg.dim() {
                    return Err(ParseError {
                        pos,
                        kind: ParseErrorKind::UnknownGenerator(format!("x{j} (generators are x1..x{})", alg.dim())),
                    });
                }
                Ok(alg.x(j - 1))
            }
            Tok::U => {
                self.expect(Tok::LBracket)?;
                let mut modes = vec![self.int()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    modes.push(self.int()?);
                }
                self.expect(Tok::RBracket)?;
                if alg.kind() != AlgebraKind::Torus {
                    return Err(ParseError { pos, kind: ParseErrorKind::UnknownGenerator("U[...] on a polynomial algebra".into()) });
                }
                if modes.len() != alg.dim() {
                    return Err(ParseError {
                        pos,
                        kind: ParseErrorKind::UnknownGenerator(format!("U[...] with {} indices (expected {})", modes.len(), alg.dim())),
                    });
                }
                Ok(alg.monomial(modes))
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Star => {
                self.expect(Tok::LParen)?;
                let a = self.expr()?;
                self.expect(Tok::Comma)?;
                let b = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(alg.star(&a, &b))
            }
            other => Err(syntax(pos, format!("expected an expression, found {}", other.describe()))),
        }
    }

    fn int(&mut self) -> Result<i32, ParseError> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let (tok, pos) = self.bump();
        let Tok::Int(n) = tok else {
            return Err(syntax(pos, format!("expected an integer, found {}", tok.describe())));
        };
        let n: i32 = n.try_into().map_err(|_| syntax(pos, "mode index too large"))?;
        Ok(if negative { -n } else { n })
    }
}

/// Parses `src` (starting at `start`) into an element of `alg`, with warnings.
pub fn parse_expression_at(src: &str, alg: &Algebra, start: Pos) -> Result<(AlgebraElement, Vec<Warning>), ParseError> {
    let toks = lex(src, start)?;
    let mut p = Parser { alg, toks, at: 0, warnings: Vec::new() };
    let value = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.pos(), format!("unexpected {}", p.peek().describe())));
    }
    Ok((value, p.warnings))
}

/// Parses a standalone expression.
pub fn parse_expression(src: &str, alg: &Algebra) -> Result<(AlgebraElement, Vec<Warning>), ParseError> {
    parse_expression_at(src, alg, Pos { line: 1, col: 1 })
}

fn rational_text(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Sign and magnitude text of a coefficient; `None` magnitude means `1`.
fn coefficient_text(c: &GaussianRational) -> (bool, Option<String>) {
    let (re, im) = (c.re(), c.im());
    if im.is_zero() {
        let body = (!re.abs().is_one()).then(|| rational_text(&re.abs()));
        return (re.is_negative(), body);
    }
    if re.is_zero() {
        let body = if im.abs().is_one() { "i".to_string() } else { format!("{}*i", rational_text(&im.abs())) };
        return (im.is_negative(), Some(body));
    }
    let sign = if im.is_negative() { '-' } else { '+' };
    let imag = if im.abs().is_one() { "i".to_string() } else { format!("{}*i", rational_text(&im.abs())) };
    (false, Some(format!("({} {sign} {imag})", rational_text(re))))
}

fn monomial_factors(kind: AlgebraKind, m: &BasisMonomial) -> Vec<String> {
    match kind {
        AlgebraKind::Polynomial => {
            m.0.iter()
                .enumerate()
                .filter(|(_, &e)| e != 0)
                .map(|(j, &e)| if e == 1 { format!("x{}", j + 1) } else { format!("x{}^{e}", j + 1) })
                .collect()
        }
        AlgebraKind::Torus if m.is_one() => Vec::new(),
        AlgebraKind::Torus => {
            let idx: Vec<String> = m.0.iter().map(i32::to_string).collect();
            vec![format!("U[{}]", idx.join(","))]
        }
    }
}

/// Canonical text of an element: terms by ascending power of `h`, then by
/// descending degree and exponents of the monomial.
pub fn print_element(kind: AlgebraKind, a: &AlgebraElement) -> String {
    let mut terms: Vec<(usize, &BasisMonomial, &GaussianRational)> = Vec::new();
    for (m, c) in a.terms() {
        for (k, ck) in c.coeffs().iter().enumerate() {
            if !ck.is_zero() {
                terms.push((k, m, ck));
            }
        }
    }
    if terms.is_empty() {
        return "0".to_string();
    }
    terms.sort_by(|x, y| x.0.cmp(&y.0).then(y.1.degree().cmp(&x.1.degree())).then(y.1 .0.cmp(&x.1 .0)));
    let mut out = String::new();
    for (n, (k, m, c)) in terms.into_iter().enumerate() {
        let (negative, body) = coefficient_text(c);
        let mut factors: Vec<String> = body.into_iter().collect();
        match k {
            0 => {}
            1 => factors.push("h".into()),
            _ => factors.push(format!("h^{k}")),
        }
        factors.extend(monomial_factors(kind, m));
        if factors.is_empty() {
            factors.push("1".into());
        }
        let sep = match (n, negative) {
            (0, false) => "",
            (0, true) => "-",
            (_, false) => " + ",
            (_, true) => " - ",
        };
        out.push_str(sep);
        out.push_str(&factors.join("*"));
    }
    out
}

/// Canonical text of a constant series, e.g. `1/2*h - h^2`.
pub fn print_series(s: &Series, dim: usize) -> String {
    print_element(AlgebraKind::Polynomial, &AlgebraElement::constant(s.clone(), dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use twistgeo::sampling::{moyal_algebra, torus_algebra};

    fn q(p: i64, d: i64) -> GaussianRational {
        GaussianRational::from_ratio(p, d)
    }

    fn parse(src: &str, alg: &Algebra) -> AlgebraElement {
        parse_expression(src, alg).unwrap().0
    }

    #[test]
    fn spec_examples() {
        let alg = moyal_algebra(2);
        let mut want = alg.one();
        want.add_assign(&alg.h().classical_mul(&alg.x(0)));
        assert_eq!(parse("1 + h*x1", &alg), want);
        let star = parse("star(x1, x2)", &alg);
        assert_eq!(star, alg.x(0).classical_mul(&alg.x(1)).add(&alg.h()));
        assert_eq!(print_element(alg.kind(), &star), "x1*x2 + h");
        let sq = parse("x1^2 - 2/3", &alg);
        assert_eq!(sq, alg.monomial(vec![2, 0]).sub(&alg.constant(q(2, 3))));
        assert_eq!(print_element(alg.kind(), &sq), "x1^2 - 2/3");
    }

    #[test]
    fn juxtaposition_and_unary_minus() {
        let alg = moyal_algebra(2);
        assert_eq!(parse("2 x1 x2", &alg), parse("2*x1*x2", &alg));
        assert_eq!(parse("x1x2", &alg), parse("x1*x2", &alg));
        assert_eq!(parse("-x1 + x2", &alg), alg.x(1).sub(&alg.x(0)));
        assert_eq!(parse("(1 + i)^2", &alg), alg.constant(q(2, 1) * GaussianRational::i()));
    }

    #[test]
    fn h_overflow_warns() {
        let alg = moyal_algebra(1);
        let (value, warnings) = parse_expression("1 + h^2", &alg).unwrap();
        assert_eq!(value, alg.one());
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].pos, Pos { line: 1, col: 6 });
    }

    #[test]
    fn errors_carry_positions() {
        let alg = moyal_algebra(1);
        let err = parse_expression("1 +\n  x3", &alg).unwrap_err();
        assert_eq!(err.pos, Pos { line: 2, col: 3 });
        assert!(matches!(err.kind, ParseErrorKind::UnknownGenerator(_)));
        let err = parse_expression("(x1 + 2", &alg).unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 8 });
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
        assert!(parse_expression("U[1,0]", &alg).is_err());
        assert!(parse_expression("1/0", &alg).is_err());
        assert!(parse_expression("x1 $", &alg).is_err());
    }

    #[test]
    fn torus_modes() {
        let alg = torus_algebra(1, q(1, 2));
        let a = parse("U[1,0] U[0,-1] + 1/2*i*U[0,0]", &alg);
        assert_eq!(print_element(alg.kind(), &a), "U[1,-1] + 1/2*i");
        assert_eq!(parse(&print_element(alg.kind(), &a), &alg), a);
        assert!(parse_expression("x1", &alg).is_err());
        assert!(parse_expression("U[1]", &alg).is_err());
    }

    #[test]
    fn complex_coefficients_print() {
        let alg = moyal_algebra(2);
        let a = parse("(1/2 - 3 i) x1 - i h^2 + (-1 + i) h x2", &alg);
        let text = print_element(alg.kind(), &a);
        assert_eq!(text, "(1/2 - 3*i)*x1 + (-1 + i)*h*x2 - i*h^2");
        assert_eq!(parse(&text, &alg), a);
        assert_eq!(print_element(alg.kind(), &alg.zero()), "0");
    }
}
