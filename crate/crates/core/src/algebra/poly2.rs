use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, ToPrimitive, Zero};

use super::series::PowerSeries1;
use super::Rational;

/// Exact bivariate polynomial with rational coefficients.
///
/// Terms are keyed by the exponent pair `(i, j)` of `x^i y^j`. Zero
/// coefficients are never stored, so structural equality is polynomial
/// equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Poly2 {
    terms: BTreeMap<(u32, u32), Rational>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, Rational::one())
    }

    pub fn y() -> Self {
        Self::monomial(0, 1, Rational::one())
    }

    pub fn monomial(i: u32, j: u32, c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(i, j, c);
        p
    }

    /// Builds a polynomial from `(i, j, coefficient)` triples, merging repeats.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (u32, u32, Rational)>,
    {
        let mut p = Self::zero();
        for (i, j, c) in terms {
            p.add_term(i, j, c);
        }
        p
    }

    /// Convenience constructor from small integer coefficients.
    pub fn from_int_terms(terms: &[(u32, u32, i64)]) -> Self {
        Self::from_terms(terms.iter().map(|&(i, j, c)| (i, j, Rational::from_integer(c.into()))))
    }

    pub fn add_term(&mut self, i: u32, j: u32, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry((i, j)).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&(i, j));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, i: u32, j: u32) -> Rational {
        self.terms.get(&(i, j)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &Rational)> {
        self.terms.iter().map(|(&(i, j), c)| (i, j, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest total degree, `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|&(i, j)| i + j).max()
    }

    /// Lowest total degree among the nonzero terms.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|&(i, j)| i + j).min()
    }

    /// Lowest `(1, n)`-weighted degree `i + n j` among the nonzero terms.
    pub fn min_weighted_degree(&self, n: u32) -> Option<u32> {
        self.terms.keys().map(|&(i, j)| i + n * j).min()
    }

    /// Homogeneous part of total degree `d`.
    pub fn homogeneous_part(&self, d: u32) -> Poly2 {
        self.filter(|i, j| i + j == d)
    }

    /// Keeps only the monomials for which `keep(i, j)` holds.
    pub fn filter(&self, keep: impl Fn(u32, u32) -> bool) -> Poly2 {
        Poly2 {
            terms: self
                .terms
                .iter()
                .filter(|(&(i, j), _)| keep(i, j))
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
        }
    }

    /// Drops every monomial of `(1, n)`-weighted degree above `max_weight`.
    pub fn truncate_weighted(&self, n: u32, max_weight: u32) -> Poly2 {
        self.filter(|i, j| i + n * j <= max_weight)
    }

    pub fn scale(&self, c: &Rational) -> Poly2 {
        if c.is_zero() {
            return Poly2::zero();
        }
        Poly2 {
            terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly2 {
        let mut result = Poly2::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn dx(&self) -> Poly2 {
        Poly2::from_terms(
            self.terms
                .iter()
                .filter(|(&(i, _), _)| i > 0)
                .map(|(&(i, j), c)| (i - 1, j, c * Rational::from_integer(i.into()))),
        )
    }

    pub fn dy(&self) -> Poly2 {
        Poly2::from_terms(
            self.terms
                .iter()
                .filter(|(&(_, j), _)| j > 0)
                .map(|(&(i, j), c)| (i, j - 1, c * Rational::from_integer(j.into()))),
        )
    }

    pub fn eval_rational(&self, x: &Rational, y: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for (&(i, j), c) in &self.terms {
            acc += c * pow_rational(x, i) * pow_rational(y, j);
        }
        acc
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| rational_to_f64(c) * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }

    /// Substitutes `x -> px`, `y -> py`.
    pub fn compose(&self, px: &Poly2, py: &Poly2) -> Poly2 {
        let max_i = self.terms.keys().map(|k| k.0).max().unwrap_or(0);
        let max_j = self.terms.keys().map(|k| k.1).max().unwrap_or(0);
        let xs = powers(px, max_i);
        let ys = powers(py, max_j);
        let mut out = Poly2::zero();
        for (&(i, j), c) in &self.terms {
            let t = (&xs[i as usize] * &ys[j as usize]).scale(c);
            out = &out + &t;
        }
        out
    }

    /// Evaluates `p(x, s(x))` as a power series truncated at the order of `s`.
    pub fn eval_on_series(&self, s: &PowerSeries1) -> PowerSeries1 {
        let order = s.order();
        let max_j = self.terms.keys().map(|k| k.1).max().unwrap_or(0);
        let mut spow = Vec::with_capacity(max_j as usize + 1);
        spow.push(PowerSeries1::one(order));
        for k in 1..=max_j as usize {
            let next = spow[k - 1].mul(s);
            spow.push(next);
        }
        let mut out = PowerSeries1::zero(order);
        for (&(i, j), c) in &self.terms {
            if i as usize > order {
                continue;
            }
            let shifted = spow[j as usize].shift(i as usize).scale(c);
            out = out.add(&shifted);
        }
        out
    }

    /// Splits the polynomial into `(1, n)`-quasihomogeneous parts, ordered by
    /// increasing weighted degree `w = i + n j`.
    pub fn quasihomogeneous_decompose(&self, n: u32) -> Vec<(u32, Poly2)> {
        let mut parts: BTreeMap<u32, Poly2> = BTreeMap::new();
        for (&(i, j), c) in &self.terms {
            parts.entry(i + n * j).or_default().add_term(i, j, c.clone());
        }
        parts.into_iter().collect()
    }

    /// Checks the quasihomogeneous Euler identity `x R_x + n y R_y = w R`.
    pub fn euler_check(&self, n: u32, w: u32) -> bool {
        let lhs = &(&Poly2::x() * &self.dx()) + &(&Poly2::y() * &self.dy()).scale(&Rational::from_integer(n.into()));
        lhs == self.scale(&Rational::from_integer(w.into()))
    }

    /// True when every monomial has even exponents and a positive coefficient,
    /// which certifies `p >= 0` on the whole plane.
    pub fn is_even_power_sum(&self) -> bool {
        !self.is_zero()
            && self
                .terms
                .iter()
                .all(|(&(i, j), c)| i % 2 == 0 && j % 2 == 0 && c.is_positive())
    }

    pub fn to_num(&self) -> NumPoly2 {
        NumPoly2 {
            terms: self
                .terms
                .iter()
                .map(|(&(i, j), c)| (i, j, rational_to_f64(c)))
                .collect(),
        }
    }
}

fn powers(p: &Poly2, max: u32) -> Vec<Poly2> {
    let mut out = Vec::with_capacity(max as usize + 1);
    out.push(Poly2::one());
    for k in 1..=max as usize {
        let next = &out[k - 1] * p;
        out.push(next);
    }
    out
}

pub(crate) fn pow_rational(x: &Rational, e: u32) -> Rational {
    num_traits::pow(x.clone(), e as usize)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numer/denom too large for a direct conversion
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (&(i, j), c) in &rhs.terms {
            out.add_term(i, j, c.clone());
        }
        out
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (&(i, j), c) in &rhs.terms {
            out.add_term(i, j, -c.clone());
        }
        out
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for (&(i1, j1), c1) in &self.terms {
            for (&(i2, j2), c2) in &rhs.terms {
                out.add_term(i1 + i2, j1 + j2, c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        Poly2 {
            terms: self.terms.iter().map(|(k, c)| (*k, -c.clone())).collect(),
        }
    }
}

impl Add for Poly2 {
    type Output = Poly2;
    fn add(self, rhs: Poly2) -> Poly2 {
        &self + &rhs
    }
}

impl Sub for Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: Poly2) -> Poly2 {
        &self - &rhs
    }
}

impl Mul for Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: Poly2) -> Poly2 {
        &self * &rhs
    }
}

impl Neg for Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        -&self
    }
}

/// Canonical textual form: terms by increasing total degree, then by
/// decreasing power of `x`. The output is accepted by the expression parser.
impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut keys: Vec<_> = self.terms.keys().copied().collect();
        keys.sort_by(|a, b| (a.0 + a.1).cmp(&(b.0 + b.1)).then(b.0.cmp(&a.0)));
        for (idx, key) in keys.iter().enumerate() {
            let c = &self.terms[key];
            let neg = c.is_negative();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            write_monomial(f, &c.abs(), key.0, key.1)?;
        }
        Ok(())
    }
}

fn write_monomial(f: &mut fmt::Formatter<'_>, c: &Rational, i: u32, j: u32) -> fmt::Result {
    let mut factors: Vec<String> = Vec::new();
    if !c.is_one() || (i == 0 && j == 0) {
        if c.is_integer() {
            factors.push(c.numer().to_string());
        } else {
            factors.push(format!("{}/{}", c.numer(), c.denom()));
        }
    }
    for (name, e) in [("x", i), ("y", j)] {
        match e {
            0 => {}
            1 => factors.push(name.to_string()),
            _ => factors.push(format!("{name}^{e}")),
        }
    }
    write!(f, "{}", factors.join("*"))
}

/// Floating-point polynomial used once exact arithmetic has been left
/// (irrational rescalings in the nilpotent path, numeric lifts).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NumPoly2 {
    pub terms: Vec<(u32, u32, f64)>,
}

impl NumPoly2 {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.2 == 0.0)
    }

    /// Merges repeated exponent pairs and drops exact zeros.
    pub fn normalized(&self) -> NumPoly2 {
        let mut map: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for &(i, j, c) in &self.terms {
            *map.entry((i, j)).or_insert(0.0) += c;
        }
        NumPoly2 {
            terms: map
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|((i, j), c)| (i, j, c))
                .collect(),
        }
    }

    pub fn add(&self, other: &NumPoly2) -> NumPoly2 {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        NumPoly2 { terms }.normalized()
    }

    pub fn mul(&self, other: &NumPoly2) -> NumPoly2 {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(i1, j1, c1) in &self.terms {
            for &(i2, j2, c2) in &other.terms {
                terms.push((i1 + i2, j1 + j2, c1 * c2));
            }
        }
        NumPoly2 { terms }.normalized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn ring_operations_are_exact() {
        let p = Poly2::from_terms([(1, 0, q(1, 3)), (0, 1, q(-2, 7))]);
        let sq = p.pow(2);
        assert_eq!(sq.coeff(2, 0), q(1, 9));
        assert_eq!(sq.coeff(1, 1), q(-4, 21));
        assert_eq!(sq.coeff(0, 2), q(4, 49));
        assert!((&sq - &(&p * &p)).is_zero());
    }

    #[test]
    fn decompose_buckets_by_weight() {
        let p = Poly2::from_int_terms(&[(0, 1, 1), (3, 0, 1)]);
        let parts = p.quasihomogeneous_decompose(2);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0], (2, Poly2::y()));
        assert_eq!(parts[1], (3, Poly2::from_int_terms(&[(3, 0, 1)])));

        let q2 = Poly2::from_int_terms(&[(2, 0, 1), (0, 1, 1)]);
        let parts = q2.quasihomogeneous_decompose(2);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].0, 2);
    }

    #[test]
    fn homogeneous_cubic_is_one_part() {
        let lin = Poly2::from_int_terms(&[(1, 0, 1), (0, 1, -1)]);
        let rho = Poly2::from_int_terms(&[(2, 0, 1), (0, 2, 1)]);
        let p = &lin * &rho;
        let parts = p.quasihomogeneous_decompose(1);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].0, 3);
    }

    #[test]
    fn euler_identity_examples() {
        let r = Poly2::from_int_terms(&[(4, 0, 1), (0, 2, 2)]);
        assert!(r.euler_check(2, 4));
        let circle = Poly2::from_int_terms(&[(2, 0, 1), (0, 2, 1)]);
        assert!(circle.euler_check(1, 2));
        let lin = Poly2::from_int_terms(&[(1, 0, 1), (0, 1, 1)]);
        for w in 0..6 {
            assert!(!lin.euler_check(2, w));
        }
    }

    #[test]
    fn display_is_canonical() {
        let p = Poly2::from_terms([(0, 1, q(-1, 1)), (3, 0, q(1, 10)), (1, 2, q(2, 1))]);
        assert_eq!(p.to_string(), "-y + 1/10*x^3 + 2*x*y^2");
        assert_eq!(Poly2::zero().to_string(), "0");
        assert_eq!(Poly2::constant(q(-3, 1)).to_string(), "-3");
    }

    #[test]
    fn compose_substitutes() {
        // (x + y)^2 with y -> y - x^2
        let p = Poly2::from_int_terms(&[(1, 0, 1), (0, 1, 1)]).pow(2);
        let py = Poly2::from_int_terms(&[(0, 1, 1), (2, 0, -1)]);
        let c = p.compose(&Poly2::x(), &py);
        let expected = Poly2::from_int_terms(&[(1, 0, 1), (0, 1, 1), (2, 0, -1)]).pow(2);
        assert_eq!(c, expected);
    }

    #[test]
    fn derivatives() {
        let p = Poly2::from_int_terms(&[(3, 2, 2), (0, 1, 5)]);
        assert_eq!(p.dx(), Poly2::from_int_terms(&[(2, 2, 6)]));
        assert_eq!(p.dy(), Poly2::from_int_terms(&[(3, 1, 4), (0, 0, 5)]));
    }

    #[test]
    fn even_power_sum_detection() {
        assert!(Poly2::from_int_terms(&[(4, 0, 1), (0, 2, 2)]).is_even_power_sum());
        assert!(!Poly2::from_int_terms(&[(4, 0, 1), (0, 2, -2)]).is_even_power_sum());
        assert!(!Poly2::from_int_terms(&[(1, 1, 1)]).is_even_power_sum());
    }
}
