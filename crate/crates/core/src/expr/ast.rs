use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::algebra::{Poly2, Rational};

/// Node of a closed-form scalar expression in `x`, `y` and named parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(Rational),
    X,
    Y,
    Param(String),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    /// `base^exponent`. `nonneg_base` records that the base is known to be
    /// nonnegative everywhere, which makes fractional exponents total.
    Pow {
        base: Box<Expr>,
        exponent: Rational,
        nonneg_base: bool,
    },
    Exp(Box<Expr>),
}

/// Where an expression can be evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalDomain {
    /// Every point of the plane.
    Full,
    /// Some power needs a positive (or nonzero) base; checked per point.
    Restricted,
}

/// Parsed expression together with its recorded evaluation domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExprAst {
    pub root: Expr,
    pub domain: EvalDomain,
}

impl ExprAst {
    pub fn new(root: Expr) -> Self {
        let domain = if root.needs_restricted_domain() {
            EvalDomain::Restricted
        } else {
            EvalDomain::Full
        };
        Self { root, domain }
    }

    pub fn free_params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.root.collect_params(&mut out);
        out
    }

    /// Exact polynomial form after substituting parameter values, if the
    /// expression is polynomial.
    pub fn to_poly(&self, params: &BTreeMap<String, Rational>) -> Option<Poly2> {
        self.root.to_poly(params)
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl Expr {
    pub fn constant(c: Rational) -> Expr {
        Expr::Const(c)
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Rational::from_integer(v.into()))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    /// Flattening product constructor; numeric factors are folded into a
    /// single leading constant.
    pub fn product(factors: Vec<Expr>) -> Expr {
        let mut coeff = Rational::one();
        let mut rest = Vec::new();
        for f in factors {
            match f {
                Expr::Const(c) => coeff *= c,
                Expr::Product(inner) => {
                    for g in inner {
                        match g {
                            Expr::Const(c) => coeff *= c,
                            other => rest.push(other),
                        }
                    }
                }
                other => rest.push(other),
            }
        }
        if coeff.is_zero() {
            return Expr::Const(coeff);
        }
        if rest.is_empty() {
            return Expr::Const(coeff);
        }
        if coeff.is_one() && rest.len() == 1 {
            return rest.pop().unwrap();
        }
        let mut factors = Vec::with_capacity(rest.len() + 1);
        if !coeff.is_one() {
            factors.push(Expr::Const(coeff));
        }
        factors.extend(rest);
        Expr::Product(factors)
    }

    /// Flattening sum constructor.
    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut out = Vec::new();
        for t in terms {
            match t {
                Expr::Sum(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Expr::Sum(out)
        }
    }

    pub fn negate(self) -> Expr {
        Expr::product(vec![Expr::int(-1), self])
    }

    fn needs_restricted_domain(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::X | Expr::Y | Expr::Param(_) => false,
            Expr::Sum(v) | Expr::Product(v) => v.iter().any(Expr::needs_restricted_domain),
            Expr::Exp(a) => a.needs_restricted_domain(),
            Expr::Pow {
                base,
                exponent,
                nonneg_base,
            } => {
                let total = exponent.is_integer() && !exponent.is_negative();
                let fractional_ok = *nonneg_base && !exponent.is_negative();
                !(total || fractional_ok) || base.needs_restricted_domain()
            }
        }
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Param(name) => {
                out.insert(name.clone());
            }
            Expr::Sum(v) | Expr::Product(v) => v.iter().for_each(|e| e.collect_params(out)),
            Expr::Pow { base, .. } => base.collect_params(out),
            Expr::Exp(a) => a.collect_params(out),
            Expr::Const(_) | Expr::X | Expr::Y => {}
        }
    }

    pub fn to_poly(&self, params: &BTreeMap<String, Rational>) -> Option<Poly2> {
        match self {
            Expr::Const(c) => Some(Poly2::constant(c.clone())),
            Expr::X => Some(Poly2::x()),
            Expr::Y => Some(Poly2::y()),
            Expr::Param(name) => params.get(name).map(|v| Poly2::constant(v.clone())),
            Expr::Sum(v) => v
                .iter()
                .try_fold(Poly2::zero(), |acc, e| Some(&acc + &e.to_poly(params)?)),
            Expr::Product(v) => v
                .iter()
                .try_fold(Poly2::one(), |acc, e| Some(&acc * &e.to_poly(params)?)),
            Expr::Pow { base, exponent, .. } => {
                if exponent.is_integer() && !exponent.is_negative() {
                    let e: u32 = exponent.to_integer().try_into().ok()?;
                    Some(base.to_poly(params)?.pow(e))
                } else {
                    None
                }
            }
            Expr::Exp(_) => None,
        }
    }

    fn is_atom(&self) -> bool {
        match self {
            Expr::X | Expr::Y | Expr::Param(_) | Expr::Exp(_) => true,
            Expr::Const(c) => c.is_integer() && !c.is_negative(),
            _ => false,
        }
    }

    fn write_factor(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Sum(_) => write!(f, "({self})"),
            Expr::Const(c) if c.is_negative() => write!(f, "({self})"),
            _ => write!(f, "{self}"),
        }
    }
}

fn write_rational(f: &mut fmt::Formatter<'_>, c: &Rational) -> fmt::Result {
    if c.is_integer() {
        write!(f, "{}", c.numer())
    } else {
        write!(f, "{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_rational(f, c),
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Param(name) => write!(f, "{name}"),
            Expr::Sum(terms) => {
                for (k, t) in terms.iter().enumerate() {
                    let (negative, body) = split_sign(t);
                    match (k, negative) {
                        (0, true) => write!(f, "-")?,
                        (0, false) => {}
                        (_, true) => write!(f, " - ")?,
                        (_, false) => write!(f, " + ")?,
                    }
                    match body {
                        Some(b) => write!(f, "{b}")?,
                        None => t.fmt(f)?,
                    }
                }
                Ok(())
            }
            Expr::Product(factors) => {
                let (negative, body) = split_sign(self);
                if negative {
                    write!(f, "-")?;
                    return write!(f, "{}", body.expect("negative product has a body"));
                }
                for (k, g) in factors.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    g.write_factor(f)?;
                }
                Ok(())
            }
            Expr::Pow { base, exponent, .. } => {
                if base.is_atom() {
                    write!(f, "{base}")?;
                } else {
                    write!(f, "({base})")?;
                }
                if exponent.is_integer() {
                    write!(f, "^{}", exponent.numer())
                } else {
                    write!(f, "^({}/{})", exponent.numer(), exponent.denom())
                }
            }
            Expr::Exp(arg) => write!(f, "exp({arg})"),
        }
    }
}

/// Splits a leading negative coefficient off a term for printing:
/// returns `(is_negative, Some(term with the sign removed))`.
fn split_sign(t: &Expr) -> (bool, Option<Expr>) {
    match t {
        Expr::Const(c) if c.is_negative() => (true, Some(Expr::Const(-c.clone()))),
        Expr::Product(factors) => match factors.first() {
            Some(Expr::Const(c)) if c.is_negative() => {
                let mut rest = factors.clone();
                rest[0] = Expr::Const(-c.clone());
                (true, Some(Expr::product(rest)))
            }
            _ => (false, None),
        },
        _ => (false, None),
    }
}
