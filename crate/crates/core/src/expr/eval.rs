use std::collections::BTreeMap;

use num_traits::{Signed, ToPrimitive};

use super::ast::{Expr, ExprAst};
use super::ExprError;
use crate::algebra::{rational_to_f64, Rational};

/// Value with its first partial derivatives in `x` and `y`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Dual {
    v: f64,
    dx: f64,
    dy: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, dx: 0.0, dy: 0.0 }
    }
}

/// Evaluates an expression and its gradient at `(x, y)`.
///
/// Derivatives follow the exact differentiation rules of each node, applied
/// to floating-point values (forward mode). Fractional powers of a vanishing
/// base are resolved by their limit when the exponent exceeds one.
pub fn eval_and_grad(
    ast: &ExprAst,
    point: (f64, f64),
    params: &BTreeMap<String, Rational>,
) -> Result<(f64, f64, f64), ExprError> {
    let d = eval_node(&ast.root, point, params)?;
    if !(d.v.is_finite() && d.dx.is_finite() && d.dy.is_finite()) {
        return Err(ExprError::Overflow { x: point.0, y: point.1 });
    }
    Ok((d.v, d.dx, d.dy))
}

/// Value only; same domain rules as [`eval_and_grad`].
pub fn eval(ast: &ExprAst, point: (f64, f64), params: &BTreeMap<String, Rational>) -> Result<f64, ExprError> {
    eval_and_grad(ast, point, params).map(|r| r.0)
}

fn eval_node(e: &Expr, pt: (f64, f64), params: &BTreeMap<String, Rational>) -> Result<Dual, ExprError> {
    Ok(match e {
        Expr::Const(c) => Dual::constant(rational_to_f64(c)),
        Expr::X => Dual {
            v: pt.0,
            dx: 1.0,
            dy: 0.0,
        },
        Expr::Y => Dual {
            v: pt.1,
            dx: 0.0,
            dy: 1.0,
        },
        Expr::Param(name) => Dual::constant(rational_to_f64(
            params
                .get(name)
                .ok_or_else(|| ExprError::UnboundParameter(name.clone()))?,
        )),
        Expr::Sum(terms) => {
            let mut acc = Dual::constant(0.0);
            for t in terms {
                let d = eval_node(t, pt, params)?;
                acc.v += d.v;
                acc.dx += d.dx;
                acc.dy += d.dy;
            }
            acc
        }
        Expr::Product(factors) => {
            let mut acc = Dual::constant(1.0);
            for f in factors {
                let d = eval_node(f, pt, params)?;
                acc = Dual {
                    v: acc.v * d.v,
                    dx: acc.dx * d.v + acc.v * d.dx,
                    dy: acc.dy * d.v + acc.v * d.dy,
                };
            }
            acc
        }
        Expr::Exp(arg) => {
            let d = eval_node(arg, pt, params)?;
            let v = d.v.exp();
            Dual {
                v,
                dx: v * d.dx,
                dy: v * d.dy,
            }
        }
        Expr::Pow { base, exponent, .. } => {
            let b = eval_node(base, pt, params)?;
            pow_dual(b, exponent, pt)?
        }
    })
}

fn pow_dual(b: Dual, exponent: &Rational, pt: (f64, f64)) -> Result<Dual, ExprError> {
    let domain = || ExprError::Domain {
        x: pt.0,
        y: pt.1,
        msg: format!("power {exponent} of base {}", b.v),
    };
    if exponent.is_integer() {
        let k = exponent.to_integer().to_i32().ok_or_else(domain)?;
        if k >= 0 {
            if k == 0 {
                return Ok(Dual::constant(1.0));
            }
            let v = b.v.powi(k);
            let s = f64::from(k) * b.v.powi(k - 1);
            return Ok(Dual {
                v,
                dx: s * b.dx,
                dy: s * b.dy,
            });
        }
        if b.v == 0.0 {
            return Err(domain());
        }
        let v = b.v.powi(k);
        let s = f64::from(k) * v / b.v;
        return Ok(Dual {
            v,
            dx: s * b.dx,
            dy: s * b.dy,
        });
    }
    let p = rational_to_f64(exponent);
    if b.v > 0.0 {
        let v = b.v.powf(p);
        let s = p * v / b.v;
        return Ok(Dual {
            v,
            dx: s * b.dx,
            dy: s * b.dy,
        });
    }
    if b.v == 0.0 && exponent.is_positive() && *exponent > Rational::from_integer(1.into()) {
        return Ok(Dual::constant(0.0));
    }
    Err(domain())
}
