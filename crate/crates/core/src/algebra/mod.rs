//! Exact algebra: bivariate polynomials, truncated power series and
//! univariate root counting.

mod poly2;
mod series;
mod upoly;

pub use poly2::{rational_to_f64, NumPoly2, Poly2};
pub use series::{series_solve_implicit, PowerSeries1};
pub use upoly::UPoly;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlgebraError {
    #[error("series truncation order {0} is below the minimum of 2")]
    OrderTooLow(usize),
    #[error("implicit equation has constant or linear terms in the nonlinear part")]
    LowOrderTerms,
    #[error("series composition requires an inner series with zero constant term")]
    NonzeroConstantInner,
}

/// Parses `"p"` or `"p/q"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let n: num_bigint::BigInt = num.parse().ok()?;
    let d: num_bigint::BigInt = den.parse().ok()?;
    if d == num_bigint::BigInt::from(0) {
        return None;
    }
    Some(Rational::new(n, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("1/10"), Some(Rational::new(1.into(), 10.into())));
        assert_eq!(parse_rational(" -3 "), Some(Rational::from_integer((-3).into())));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("0.5"), None);
    }
}
