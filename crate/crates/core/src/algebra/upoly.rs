use num_traits::{One, Signed, Zero};

use super::Rational;

/// Dense univariate polynomial over the rationals, coefficients stored from
/// the constant term upwards with no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UPoly {
    coeffs: Vec<Rational>,
}

impl UPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn leading(&self) -> Option<&Rational> {
        self.coeffs.last()
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> UPoly {
        UPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * Rational::from_integer(k.into()))
                .collect(),
        )
    }

    /// Remainder of Euclidean division by a nonzero divisor.
    pub fn rem(&self, divisor: &UPoly) -> UPoly {
        let dd = divisor.degree().expect("division by zero polynomial");
        let lead = divisor.leading().unwrap().clone();
        let mut r = self.coeffs.clone();
        while r.len() > dd && !r.is_empty() {
            let k = r.len() - 1;
            let factor = &r[k] / &lead;
            if !factor.is_zero() {
                for (i, c) in divisor.coeffs.iter().enumerate() {
                    let idx = k - dd + i;
                    r[idx] -= &factor * c;
                }
            }
            r.pop();
            while r.last().is_some_and(Zero::is_zero) {
                r.pop();
            }
        }
        UPoly::new(r)
    }

    /// Standard Sturm chain `p, p', -rem(p, p'), ...`.
    pub fn sturm_sequence(&self) -> Vec<UPoly> {
        let mut seq = vec![self.clone()];
        if self.is_zero() {
            return seq;
        }
        let d = self.derivative();
        if d.is_zero() {
            return seq;
        }
        seq.push(d);
        loop {
            let n = seq.len();
            let r = seq[n - 2].rem(&seq[n - 1]);
            if r.is_zero() {
                break;
            }
            seq.push(UPoly::new(r.coeffs.into_iter().map(|c| -c).collect()));
        }
        seq
    }

    /// Number of distinct real roots, counted exactly by a Sturm chain.
    pub fn count_real_roots(&self) -> usize {
        if self.degree().unwrap_or(0) == 0 {
            return 0;
        }
        let seq = self.sturm_sequence();
        let at_neg_inf = variations(seq.iter().map(|p| sign_at_infinity(p, false)));
        let at_pos_inf = variations(seq.iter().map(|p| sign_at_infinity(p, true)));
        at_neg_inf - at_pos_inf
    }

    /// Distinct real roots in the half-open interval `(a, b]`.
    pub fn count_roots_in(&self, a: &Rational, b: &Rational) -> usize {
        let seq = self.sturm_sequence();
        let va = variations(seq.iter().map(|p| sign(&p.eval(a))));
        let vb = variations(seq.iter().map(|p| sign(&p.eval(b))));
        va.saturating_sub(vb)
    }

    /// Cauchy bound: every real root lies in `(-B, B)`.
    pub fn root_bound(&self) -> Rational {
        let lead = self.leading().cloned().unwrap_or_else(Rational::one).abs();
        let max = self
            .coeffs
            .iter()
            .take(self.coeffs.len().saturating_sub(1))
            .map(|c| c.abs() / &lead)
            .fold(Rational::zero(), |m, v| if v > m { v } else { m });
        max + Rational::one()
    }

    /// Isolating intervals `(a, b]` with exactly one distinct root each, each of
    /// width at most `width`.
    pub fn isolate_real_roots(&self, width: &Rational) -> Vec<(Rational, Rational)> {
        if self.degree().unwrap_or(0) == 0 {
            return Vec::new();
        }
        let bound = self.root_bound();
        let mut out = Vec::new();
        let mut stack = vec![(-bound.clone(), bound)];
        while let Some((a, b)) = stack.pop() {
            let count = self.count_roots_in(&a, &b);
            if count == 0 {
                continue;
            }
            if count == 1 && &b - &a <= *width {
                out.push((a, b));
                continue;
            }
            let mid = (&a + &b) / Rational::from_integer(2.into());
            stack.push((mid.clone(), b));
            stack.push((a, mid));
        }
        out.sort();
        out
    }
}

fn sign(v: &Rational) -> i8 {
    if v.is_positive() {
        1
    } else if v.is_negative() {
        -1
    } else {
        0
    }
}

fn sign_at_infinity(p: &UPoly, positive: bool) -> i8 {
    match (p.leading(), p.degree()) {
        (Some(lead), Some(d)) => {
            let s = sign(lead);
            if positive || d % 2 == 0 {
                s
            } else {
                -s
            }
        }
        _ => 0,
    }
}

fn variations(signs: impl Iterator<Item = i8>) -> usize {
    let mut last = 0i8;
    let mut count = 0;
    for s in signs.filter(|&s| s != 0) {
        if last != 0 && s != last {
            count += 1;
        }
        last = s;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn up(c: &[i64]) -> UPoly {
        UPoly::new(c.iter().map(|&v| Rational::from_integer(v.into())).collect())
    }

    #[test]
    fn counts_distinct_roots() {
        // (t^2 + 1)^2 has no real roots
        assert_eq!(up(&[1, 0, 2, 0, 1]).count_real_roots(), 0);
        // (t - 1)(t + 2)(t - 3)
        assert_eq!(up(&[6, -5, -2, 1]).count_real_roots(), 3);
        // (t - 1)^2 counted once
        assert_eq!(up(&[1, -2, 1]).count_real_roots(), 1);
        assert_eq!(up(&[5]).count_real_roots(), 0);
    }

    #[test]
    fn isolates_roots() {
        let p = up(&[6, -5, -2, 1]);
        let w = Rational::new(1.into(), 64.into());
        let iv = p.isolate_real_roots(&w);
        assert_eq!(iv.len(), 3);
        let roots = [-2i64, 1, 3];
        for ((a, b), r) in iv.iter().zip(roots) {
            let r = Rational::from_integer(r.into());
            assert!(*a < r && r <= *b);
        }
    }
}
