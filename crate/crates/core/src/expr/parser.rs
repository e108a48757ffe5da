use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::ast::{Expr, ExprAst};
use super::ExprError;
use crate::algebra::{Poly2, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Prime,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Semi,
    Eq,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'.' || bytes[i] == b'e' || bytes[i] == b'E') {
                    return Err(ExprError::Syntax {
                        pos: i,
                        msg: "floating-point literals are not accepted; use p/q".into(),
                    });
                }
                out.push(Token {
                    tok: Tok::Num(text[start..i].parse().expect("digits")),
                    pos: start,
                });
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    pos: start,
                });
                continue;
            }
            b'.' => {
                return Err(ExprError::Syntax {
                    pos: i,
                    msg: "floating-point literals are not accepted; use p/q".into(),
                })
            }
            b'\'' => Tok::Prime,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b';' => Tok::Semi,
            b'=' => Tok::Eq,
            _ => {
                return Err(ExprError::Syntax {
                    pos: i,
                    msg: format!("unexpected character {:?}", c as char),
                })
            }
        };
        i += 1;
        out.push(Token { tok, pos: start });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    at: usize,
    end: usize,
    exp_depth: usize,
    nonneg_hint: bool,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, nonneg_hint: bool) -> Result<Self, ExprError> {
        Ok(Self {
            toks: lex(text)?,
            at: 0,
            end: text.len(),
            exp_depth: 0,
            nonneg_hint,
            _src: text,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.pos)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ExprError> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = Vec::new();
        let first_neg = if self.eat(&Tok::Minus) {
            true
        } else {
            self.eat(&Tok::Plus);
            false
        };
        let t = self.term()?;
        terms.push(if first_neg { t.negate() } else { t });
        loop {
            if self.eat(&Tok::Plus) {
                terms.push(self.term()?);
            } else if self.eat(&Tok::Minus) {
                terms.push(self.term()?.negate());
            } else {
                break;
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut factors = vec![self.factor()?];
        loop {
            if self.eat(&Tok::Star) {
                factors.push(self.factor()?);
            } else if self.peek() == Some(&Tok::Slash) {
                let slash_pos = self.pos();
                self.at += 1;
                let d = self.factor()?;
                match d {
                    Expr::Const(c) => {
                        if c.is_zero() {
                            return Err(ExprError::Syntax {
                                pos: slash_pos,
                                msg: "division by zero".into(),
                            });
                        }
                        factors.push(Expr::Const(c.recip()));
                    }
                    other if self.exp_depth > 0 => {
                        let nonneg = self.nonneg_hint || provably_nonneg(&other);
                        factors.push(make_pow(other, minus_one(), nonneg))
                    }
                    _ => {
                        return Err(ExprError::Syntax {
                            pos: slash_pos,
                            msg: "division by a non-constant expression is only allowed inside exp()".into(),
                        })
                    }
                }
            } else {
                break;
            }
        }
        Ok(Expr::product(factors))
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if self.eat(&Tok::Minus) {
            return Ok(self.factor()?.negate());
        }
        let base = self.base()?;
        if self.eat(&Tok::Caret) {
            // right-associative: a^b^c is a^(b^c), which only makes sense
            // when the tower folds to a rational exponent
            let e = self.exponent()?;
            let nonneg = self.nonneg_hint || provably_nonneg(&base);
            return Ok(match base {
                Expr::Const(c) if e.is_integer() => {
                    Expr::Const(pow_const(&c, &e).ok_or(ExprError::MalformedExponent {
                        pos: self.pos(),
                        msg: "zero to a negative power".into(),
                    })?)
                }
                b => make_pow(b, e, nonneg),
            });
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Rational, ExprError> {
        let start = self.pos();
        let malformed = |msg: &str| ExprError::MalformedExponent {
            pos: start,
            msg: msg.into(),
        };
        let value = if self.eat(&Tok::LParen) {
            let neg = self.eat(&Tok::Minus);
            let p = self.integer().map_err(|_| malformed("expected integer numerator"))?;
            let q = if self.eat(&Tok::Slash) {
                self.integer().map_err(|_| malformed("expected integer denominator"))?
            } else {
                BigInt::from(1)
            };
            if q.is_zero() {
                return Err(malformed("zero denominator"));
            }
            if !self.eat(&Tok::RParen) {
                return Err(malformed("expected ')' closing the exponent"));
            }
            let r = Rational::new(p, q);
            if neg {
                -r
            } else {
                r
            }
        } else {
            let neg = self.eat(&Tok::Minus);
            let p = self.integer().map_err(|_| malformed("expected integer exponent"))?;
            let r = Rational::from_integer(p);
            if neg {
                -r
            } else {
                r
            }
        };
        if self.eat(&Tok::Caret) {
            let e = self.exponent()?;
            if !e.is_integer() {
                return Err(malformed("fractional power of an exponent"));
            }
            return pow_const(&value, &e).ok_or_else(|| malformed("zero to a negative power"));
        }
        Ok(value)
    }

    fn integer(&mut self) -> Result<BigInt, ExprError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = n.clone();
                self.at += 1;
                Ok(n)
            }
            _ => self.err("expected integer"),
        }
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.at += 1;
                Ok(Expr::Const(Rational::from_integer(n)))
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "y" => Ok(Expr::Y),
                    "exp" => {
                        self.expect(&Tok::LParen, "'(' after exp")?;
                        self.exp_depth += 1;
                        let arg = self.expr()?;
                        self.exp_depth -= 1;
                        self.expect(&Tok::RParen, "')'")?;
                        Ok(Expr::Exp(Box::new(arg)))
                    }
                    _ => Ok(Expr::Param(name)),
                }
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(_) => self.err("expected a number, identifier or '('"),
            None => self.err("unexpected end of input"),
        }
    }
}

fn minus_one() -> Rational {
    Rational::from_integer((-1).into())
}

fn pow_const(c: &Rational, e: &Rational) -> Option<Rational> {
    let k: i32 = e.to_integer().try_into().ok()?;
    if c.is_zero() && k < 0 {
        return None;
    }
    Some(num_traits::pow::Pow::pow(c, k))
}

fn make_pow(base: Expr, exponent: Rational, nonneg_base: bool) -> Expr {
    if exponent == Rational::from_integer(1.into()) {
        return base;
    }
    Expr::Pow {
        base: Box::new(base),
        exponent,
        nonneg_base,
    }
}

/// Nonnegativity that can be read off the form: an exponential, or a
/// parameter-free polynomial whose monomials are all even powers with
/// positive coefficients.
fn provably_nonneg(e: &Expr) -> bool {
    match e {
        Expr::Exp(_) => true,
        Expr::Const(c) => !c.is_negative(),
        _ => e
            .to_poly(&Default::default())
            .is_some_and(|p: Poly2| !p.is_zero() && p.is_even_power_sum()),
    }
}

fn finish(p: &Parser<'_>) -> Result<(), ExprError> {
    if p.at < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(())
}

/// Parses a single scalar expression.
pub fn parse_expression(text: &str) -> Result<ExprAst, ExprError> {
    parse_expression_with(text, false)
}

/// Like [`parse_expression`], with the caller asserting that every power base
/// is nonnegative on the region of interest.
pub fn parse_expression_with(text: &str, assume_nonneg_bases: bool) -> Result<ExprAst, ExprError> {
    let mut p = Parser::new(text, assume_nonneg_bases)?;
    let e = p.expr()?;
    finish(&p)?;
    Ok(ExprAst::new(e))
}

/// Raw statement pair `(x' rhs, y' rhs)` with byte spans of each statement.
pub(super) struct RawSystem {
    pub x_rhs: ExprAst,
    pub y_rhs: ExprAst,
    pub x_span: (usize, usize),
    pub y_span: (usize, usize),
}

pub(super) fn parse_raw_system(text: &str) -> Result<RawSystem, ExprError> {
    let mut p = Parser::new(text, false)?;
    let mut x = None;
    let mut y = None;
    for k in 0..2 {
        if k == 1 {
            p.expect(&Tok::Semi, "';' between the two equations")?;
        }
        let start = p.pos();
        let var = match p.peek() {
            Some(Tok::Ident(v)) if v == "x" || v == "y" => v.clone(),
            _ => return p.err("expected x' or y'"),
        };
        p.at += 1;
        p.expect(&Tok::Prime, "'")?;
        p.expect(&Tok::Eq, "'='")?;
        let rhs = p.expr()?;
        let end = p.toks.get(p.at).map_or(p.end, |t| t.pos);
        let slot = if var == "x" { &mut x } else { &mut y };
        if slot.is_some() {
            return Err(ExprError::Syntax {
                pos: start,
                msg: format!("equation for {var}' given twice"),
            });
        }
        *slot = Some((ExprAst::new(rhs), (start, end)));
    }
    p.eat(&Tok::Semi);
    finish(&p)?;
    let (x_rhs, x_span) = x.expect("two distinct equations");
    let (y_rhs, y_span) = y.expect("two distinct equations");
    Ok(RawSystem {
        x_rhs,
        y_rhs,
        x_span,
        y_span,
    })
}
