//! Text front end: planar systems `x' = P; y' = Q` and scalar expressions
//! for inverse integrating factor candidates.

mod ast;
mod eval;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;

pub use ast::{EvalDomain, Expr, ExprAst};
pub use eval::{eval, eval_and_grad};
pub use parser::{parse_expression, parse_expression_with};

use crate::algebra::{Poly2, Rational};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("malformed exponent at offset {pos}: {msg}")]
    MalformedExponent { pos: usize, msg: String },
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("right-hand side of {0}' is not a polynomial")]
    NotPolynomial(char),
    #[error("origin is not a singular point: {which}(0,0) = {value}")]
    OriginNotSingular { which: char, value: Rational },
    #[error("({x}, {y}) is outside the evaluation domain: {msg}")]
    Domain { x: f64, y: f64, msg: String },
    #[error("evaluation overflow at ({x}, {y})")]
    Overflow { x: f64, y: f64 },
}

/// A validated planar system with a singular point at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedSystem {
    pub p: Poly2,
    pub q: Poly2,
    pub params: BTreeMap<String, Rational>,
    /// Byte ranges of the `x'` and `y'` statements in the source.
    pub spans: SpanMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SpanMap {
    pub x_stmt: (usize, usize),
    pub y_stmt: (usize, usize),
}

impl ParsedSystem {
    /// Builds a system directly from polynomials, checking the origin.
    pub fn from_polys(p: Poly2, q: Poly2) -> Result<Self, ExprError> {
        check_origin(&p, 'P')?;
        check_origin(&q, 'Q')?;
        Ok(Self {
            p,
            q,
            params: BTreeMap::new(),
            spans: SpanMap::default(),
        })
    }
}

/// Canonical text form, accepted back by [`parse_system`].
impl fmt::Display for ParsedSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x' = {}; y' = {}", self.p, self.q)
    }
}

fn check_origin(p: &Poly2, which: char) -> Result<(), ExprError> {
    let c = p.coeff(0, 0);
    if c.is_zero() {
        Ok(())
    } else {
        Err(ExprError::OriginNotSingular { which, value: c })
    }
}

/// Parses `x' = P; y' = Q` with polynomial right-hand sides, substituting
/// the given parameter values.
pub fn parse_system(text: &str, params: &BTreeMap<String, Rational>) -> Result<ParsedSystem, ExprError> {
    let raw = parser::parse_raw_system(text)?;
    for ast in [&raw.x_rhs, &raw.y_rhs] {
        if let Some(name) = ast.free_params().into_iter().find(|n| !params.contains_key(n)) {
            return Err(ExprError::UnboundParameter(name));
        }
    }
    let p = raw.x_rhs.to_poly(params).ok_or(ExprError::NotPolynomial('x'))?;
    let q = raw.y_rhs.to_poly(params).ok_or(ExprError::NotPolynomial('y'))?;
    check_origin(&p, 'P')?;
    check_origin(&q, 'Q')?;
    let mut used = raw.x_rhs.free_params();
    used.extend(raw.y_rhs.free_params());
    Ok(ParsedSystem {
        p,
        q,
        params: params
            .iter()
            .filter(|(k, _)| used.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
        spans: SpanMap {
            x_stmt: raw.x_span,
            y_stmt: raw.y_span,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_params() -> BTreeMap<String, Rational> {
        BTreeMap::new()
    }

    fn mu(v: i64) -> BTreeMap<String, Rational> {
        BTreeMap::from([("mu".to_string(), Rational::from_integer(v.into()))])
    }

    #[test]
    fn parses_cubic_focus() {
        let s = parse_system("x' = -y + x*(x^2+y^2); y' = x + y*(x^2+y^2)", &no_params()).unwrap();
        assert_eq!(s.p, Poly2::from_int_terms(&[(0, 1, -1), (3, 0, 1), (1, 2, 1)]));
        assert_eq!(s.q, Poly2::from_int_terms(&[(1, 0, 1), (2, 1, 1), (0, 3, 1)]));
    }

    #[test]
    fn nilpotent_jacobian() {
        let s = parse_system("x' = y; y' = -x^5", &no_params()).unwrap();
        assert_eq!(s.p.homogeneous_part(1), Poly2::y());
        assert!(s.q.homogeneous_part(1).is_zero());
    }

    #[test]
    fn rejects_nonsingular_origin() {
        let err = parse_system("x' = 1 + y; y' = x", &no_params()).unwrap_err();
        assert!(matches!(err, ExprError::OriginNotSingular { which: 'P', .. }));
    }

    #[test]
    fn rejects_unbound_and_floats() {
        assert_eq!(
            parse_system("x' = -y + a*x; y' = x", &no_params()).unwrap_err(),
            ExprError::UnboundParameter("a".into())
        );
        assert!(matches!(
            parse_expression("0.5*x"),
            Err(ExprError::Syntax { pos: 1, .. })
        ));
    }

    #[test]
    fn incomplete_expression_position() {
        assert!(matches!(parse_expression("x +"), Err(ExprError::Syntax { pos: 3, .. })));
    }

    #[test]
    fn division_rules() {
        assert!(parse_expression("x/(x^2+y^2)").is_err());
        let e = parse_expression("x/3 + exp(x/(1+y^2))").unwrap();
        assert_eq!(e.domain, EvalDomain::Restricted);
        let p = parse_expression("x/3").unwrap().to_poly(&no_params()).unwrap();
        assert_eq!(p, Poly2::monomial(1, 0, Rational::new(1.into(), 3.into())));
    }

    #[test]
    fn example_one_factor() {
        let e = parse_expression("exp(-2*mu*x^2/(x^2+y^2))*(x^2+y^2)^3").unwrap();
        assert_eq!(e.free_params().into_iter().collect::<Vec<_>>(), vec!["mu"]);
        let (v, dx, dy) = eval_and_grad(&e, (1.0, 0.0), &mu(0)).unwrap();
        assert_eq!((v, dx, dy), (1.0, 6.0, 0.0));
        assert!(eval_and_grad(&e, (0.0, 0.0), &mu(0)).is_err());
    }

    #[test]
    fn fractional_power_node() {
        let e = parse_expression("(x^4 + 2*y^2)^(5/4)").unwrap();
        match &e.root {
            Expr::Pow {
                exponent, nonneg_base, ..
            } => {
                assert_eq!(*exponent, Rational::new(5.into(), 4.into()));
                assert!(*nonneg_base);
            }
            other => panic!("expected a power node, got {other:?}"),
        }
        assert_eq!(e.domain, EvalDomain::Full);
        assert_eq!(eval_and_grad(&e, (0.0, 0.0), &no_params()).unwrap(), (0.0, 0.0, 0.0));
        // odd base is not provably nonnegative
        let r = parse_expression("(x + y^2)^(1/2)").unwrap();
        assert_eq!(r.domain, EvalDomain::Restricted);
        assert!(eval(&r, (-1.0, 0.0), &no_params()).is_err());
    }

    #[test]
    fn malformed_exponents() {
        assert!(matches!(
            parse_expression("x^(1/0)"),
            Err(ExprError::MalformedExponent { .. })
        ));
        assert!(matches!(
            parse_expression("x^(a/2)"),
            Err(ExprError::MalformedExponent { .. })
        ));
        assert!(matches!(
            parse_expression("x^y"),
            Err(ExprError::MalformedExponent { .. })
        ));
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse_expression("x^2^3").unwrap();
        assert_eq!(
            e.to_poly(&no_params()).unwrap(),
            Poly2::monomial(8, 0, Rational::from_integer(1.into()))
        );
    }

    #[test]
    fn gradient_of_circle() {
        let e = parse_expression("x^2+y^2").unwrap();
        assert_eq!(eval_and_grad(&e, (3.0, 4.0), &no_params()).unwrap(), (25.0, 6.0, 8.0));
    }

    #[test]
    fn expression_print_round_trip() {
        for src in [
            "exp(-2*mu*x^2/(x^2+y^2))*(x^2+y^2)^3",
            "(x^4 + 2*y^2)^(5/4) - 3/7*x*y",
            "-x^2*(1 + y)^-1 + exp(-x)",
        ] {
            let a = parse_expression_with(src, true).unwrap();
            let b = parse_expression_with(&a.to_string(), true).unwrap();
            assert_eq!(a, b, "{src} -> {a}");
        }
    }

    #[test]
    fn system_print_round_trip() {
        let s = parse_system("x' = -y + 1/10*x^3 - x*y; y' = x + y^3", &no_params()).unwrap();
        let t = parse_system(&s.to_string(), &no_params()).unwrap();
        assert_eq!(s.p, t.p);
        assert_eq!(s.q, t.q);
    }

    #[test]
    fn duplicate_equation_rejected() {
        assert!(parse_system("x' = y; x' = x", &no_params()).is_err());
        let s = parse_system("y' = x; x' = -y;", &no_params()).unwrap();
        assert_eq!(s.p, -Poly2::y());
    }
}
