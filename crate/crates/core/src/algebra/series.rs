use num_traits::{One, Zero};

use super::poly2::rational_to_f64;
use super::{AlgebraError, Poly2, Rational};

/// Truncated univariate power series `c_0 + c_1 x + ... + c_N x^N` with exact
/// rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerSeries1 {
    coeffs: Vec<Rational>,
}

impl PowerSeries1 {
    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: vec![Rational::zero(); order + 1],
        }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = Rational::one();
        s
    }

    /// Builds a series from leading coefficients; missing ones are zero and
    /// extra ones are dropped.
    pub fn from_coeffs(order: usize, coeffs: &[Rational]) -> Self {
        let mut s = Self::zero(order);
        for (k, c) in coeffs.iter().enumerate().take(order + 1) {
            s.coeffs[k] = c.clone();
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// First nonzero term `(k, c_k)`, if any within the truncation order.
    pub fn leading_term(&self) -> Option<(usize, Rational)> {
        self.coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| !c.is_zero())
            .map(|(k, c)| (k, c.clone()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        Self {
            coeffs: (0..=order).map(|k| &self.coeffs[k] + &other.coeffs[k]).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        Self {
            coeffs: (0..=order).map(|k| &self.coeffs[k] - &other.coeffs[k]).collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        let mut out = Self::zero(order);
        for (i, a) in self.coeffs.iter().enumerate().take(order + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(order + 1 - i) {
                if !b.is_zero() {
                    out.coeffs[i + j] += a * b;
                }
            }
        }
        out
    }

    /// Multiplies by `x^k`, keeping the truncation order.
    pub fn shift(&self, k: usize) -> Self {
        let order = self.order();
        let mut out = Self::zero(order);
        for i in 0..=order {
            if i + k <= order {
                out.coeffs[i + k] = self.coeffs[i].clone();
            }
        }
        out
    }

    pub fn derivative(&self) -> Self {
        let order = self.order();
        let mut out = Self::zero(order);
        for k in 1..=order {
            out.coeffs[k - 1] = &self.coeffs[k] * Rational::from_integer(k.into());
        }
        out
    }

    /// `self(inner(x))`; the inner series must have zero constant term.
    pub fn compose(&self, inner: &Self) -> Result<Self, AlgebraError> {
        if !inner.coeffs[0].is_zero() {
            return Err(AlgebraError::NonzeroConstantInner);
        }
        let order = self.order().min(inner.order());
        let mut out = Self::zero(order);
        let mut power = Self::one(order);
        for k in 0..=order {
            if !self.coeffs[k].is_zero() {
                out = out.add(&power.scale(&self.coeffs[k]));
            }
            power = power.mul(inner);
        }
        Ok(out)
    }

    /// Truncated series as an exact polynomial in `x` alone.
    pub fn to_poly_in_x(&self) -> Poly2 {
        Poly2::from_terms(self.coeffs.iter().enumerate().map(|(k, c)| (k as u32, 0, c.clone())))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + rational_to_f64(c))
    }
}

/// Solves `y + p2(x, y) = 0` for `y = F(x)` through the origin, modulo
/// `x^{order+1}`, by fixed-point iteration `F <- -p2(x, F)`.
///
/// `p2` must have no constant or linear terms; each sweep then fixes at least
/// one more coefficient.
pub fn series_solve_implicit(p2: &Poly2, order: usize) -> Result<PowerSeries1, AlgebraError> {
    if order < 2 {
        return Err(AlgebraError::OrderTooLow(order));
    }
    if p2.terms().any(|(i, j, _)| i + j < 2) {
        return Err(AlgebraError::LowOrderTerms);
    }
    let mut f = PowerSeries1::zero(order);
    for _ in 0..=order {
        let next = p2.eval_on_series(&f).scale(&-Rational::one());
        if next == f {
            break;
        }
        f = next;
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn implicit_zero() {
        let f = series_solve_implicit(&Poly2::zero(), 6).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn implicit_quadratic() {
        let p2 = Poly2::from_int_terms(&[(2, 0, 1)]);
        let f = series_solve_implicit(&p2, 5).unwrap();
        assert_eq!(f, PowerSeries1::from_coeffs(5, &[q(0), q(0), q(-1)]));
    }

    #[test]
    fn implicit_xy_has_trivial_branch() {
        let p2 = Poly2::from_int_terms(&[(1, 1, 1)]);
        let f = series_solve_implicit(&p2, 5).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn implicit_rejects_low_order() {
        assert!(matches!(
            series_solve_implicit(&Poly2::zero(), 1),
            Err(AlgebraError::OrderTooLow(1))
        ));
        assert!(matches!(
            series_solve_implicit(&Poly2::x(), 4),
            Err(AlgebraError::LowOrderTerms)
        ));
    }

    #[test]
    fn composition_and_leading_term() {
        // (1 + x)^2 composed with x + x^2
        let outer = PowerSeries1::from_coeffs(4, &[q(1), q(2), q(1)]);
        let inner = PowerSeries1::from_coeffs(4, &[q(0), q(1), q(1)]);
        let c = outer.compose(&inner).unwrap();
        // 1 + 2(x+x^2) + (x+x^2)^2 = 1 + 2x + 3x^2 + 2x^3 + x^4
        assert_eq!(c, PowerSeries1::from_coeffs(4, &[q(1), q(2), q(3), q(2), q(1)]));
        assert!(outer.compose(&outer).is_err());
        let s = PowerSeries1::from_coeffs(6, &[q(0), q(0), q(0), q(-4)]);
        assert_eq!(s.leading_term(), Some((3, q(-4))));
    }
}
