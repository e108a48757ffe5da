//! Classification of the singular point at the origin and Andreev's
//! monodromy test for nilpotent points.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::algebra::{
    rational_to_f64, series_solve_implicit, AlgebraError, NumPoly2, Poly2, PowerSeries1, Rational, UPoly,
};
use crate::expr::ParsedSystem;
use crate::frame::{Frame, FrameStep};

/// Default series truncation before the Andreev exponent is known.
pub const DEFAULT_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MonodromyError {
    #[error("the vector field is identically zero")]
    IdenticallyZero,
    #[error("polynomials are not homogeneous of a common degree")]
    NotHomogeneous,
    #[error("linear part is not the nilpotent block x' = y, y' = 0")]
    NotNilpotentForm,
    #[error("f vanishes through order {0}; monodromy undecided at this truncation")]
    UndecidedAtOrder(usize),
    #[error("nilpotent point is not monodromic: {0}")]
    NotMonodromic(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Real linear factors of `x q_d - y p_d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CharDirections {
    IdenticallyZero,
    /// No real factor; certified by an exact Sturm count of zero.
    None,
    /// Slopes `y = t x` isolated to intervals `(lo, hi]`, plus the vertical
    /// direction `x = 0` when present.
    Some {
        slopes: Vec<(f64, f64)>,
        vertical: bool,
    },
}

/// Characteristic directions of the homogeneous pair `(p_d, q_d)`.
pub fn characteristic_directions(p_d: &Poly2, q_d: &Poly2) -> Result<CharDirections, MonodromyError> {
    let d = match (p_d.total_degree(), q_d.total_degree()) {
        (None, None) => return Ok(CharDirections::IdenticallyZero),
        (Some(a), None) | (None, Some(a)) => a,
        (Some(a), Some(b)) if a == b => a,
        _ => return Err(MonodromyError::NotHomogeneous),
    };
    if p_d.min_degree().unwrap_or(d) != d || q_d.min_degree().unwrap_or(d) != d {
        return Err(MonodromyError::NotHomogeneous);
    }
    let g = &(&Poly2::x() * q_d) - &(&Poly2::y() * p_d);
    if g.is_zero() {
        return Ok(CharDirections::IdenticallyZero);
    }
    // dehomogenize at x = 1: g(1, t) = sum c_{ij} t^j
    let deg = (d + 1) as usize;
    let mut coeffs = vec![Rational::zero(); deg + 1];
    for (_, j, c) in g.terms() {
        coeffs[j as usize] += c;
    }
    let vertical = coeffs[deg].is_zero();
    let u = UPoly::new(coeffs);
    let roots = u.count_real_roots();
    if roots == 0 && !vertical {
        return Ok(CharDirections::None);
    }
    let width = Rational::new(1.into(), BigInt::from(1u64 << 40));
    let slopes = u
        .isolate_real_roots(&width)
        .iter()
        .map(|(a, b)| (rational_to_f64(a), rational_to_f64(b)))
        .collect();
    Ok(CharDirections::Some { slopes, vertical })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonodromyCase {
    /// `beta > n - 1`
    BetaAbove,
    /// `beta = n - 1` and `b^2 + 4 a n < 0`
    BetaCritical,
    /// `phi` vanishes through the truncation order.
    PhiZero,
}

/// Andreev data of a nilpotent point `x' = y + P_2, y' = Q_2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonodromyReport {
    #[serde(serialize_with = "ser_series")]
    pub big_f: PowerSeries1,
    #[serde(serialize_with = "ser_series")]
    pub f: PowerSeries1,
    #[serde(serialize_with = "ser_series")]
    pub phi: PowerSeries1,
    #[serde(serialize_with = "ser_rational")]
    pub a: Rational,
    pub alpha: usize,
    #[serde(serialize_with = "ser_opt_rational")]
    pub b: Option<Rational>,
    pub beta: Option<usize>,
    /// `Ok(case)` when monodromic, otherwise the failed condition.
    pub case: Result<MonodromyCase, String>,
    /// Andreev number, set when monodromic.
    pub n: Option<u32>,
    /// `(-1/a)^{1/(2-2n)}`, exact when it is rational.
    pub xi: Option<f64>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub xi_exact: Option<Rational>,
    pub order: usize,
}

impl MonodromyReport {
    pub fn is_monodromic(&self) -> bool {
        self.case.is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SingularityClass {
    /// Linear part with eigenvalues `tr/2 +- i w`, `w > 0`.
    NonDegenerateFocusCandidate {
        #[serde(serialize_with = "ser_rational")]
        trace: Rational,
        #[serde(serialize_with = "ser_rational")]
        det: Rational,
    },
    /// Lowest homogeneous part of odd degree `d` without characteristic
    /// directions; `min_abs_fd` is the grid minimum of `|F_d|`.
    DegenerateNoCharDir {
        d: u32,
        min_abs_fd: f64,
    },
    Nilpotent {
        report: Box<MonodromyReport>,
        /// Linear change `old = A new` bringing the linear part to the
        /// block `x' = y`.
        jordan: Box<[[f64; 2]; 2]>,
        #[serde(skip)]
        jordan_system: Box<(Poly2, Poly2)>,
    },
    NotMonodromicOrUnknown {
        reason: String,
    },
}

impl SingularityClass {
    pub fn tag(&self) -> &'static str {
        match self {
            SingularityClass::NonDegenerateFocusCandidate { .. } => "non_degenerate_focus_candidate",
            SingularityClass::DegenerateNoCharDir { .. } => "degenerate_no_char_dir",
            SingularityClass::Nilpotent { .. } => "nilpotent",
            SingularityClass::NotMonodromicOrUnknown { .. } => "not_monodromic_or_unknown",
        }
    }
}

fn linear_part(p: &Poly2, q: &Poly2) -> [[Rational; 2]; 2] {
    [[p.coeff(1, 0), p.coeff(0, 1)], [q.coeff(1, 0), q.coeff(0, 1)]]
}

/// Sorts the origin of `sys` into focus candidate, degenerate, nilpotent or unknown.
pub fn classify_singularity(sys: &ParsedSystem) -> Result<SingularityClass, MonodromyError> {
    let (p, q) = (&sys.p, &sys.q);
    if p.is_zero() && q.is_zero() {
        return Err(MonodromyError::IdenticallyZero);
    }
    let j = linear_part(p, q);
    let nonzero_linear = j.iter().flatten().any(|c| !c.is_zero());
    if nonzero_linear {
        let tr = &j[0][0] + &j[1][1];
        let det = &j[0][0] * &j[1][1] - &j[0][1] * &j[1][0];
        if tr.is_zero() && det.is_zero() {
            let (a, pn, qn) = jordan_nilpotent(p, q);
            let report = andreev_analyze_auto(&pn, &qn)?;
            let jordan = [
                [rational_to_f64(&a[0][0]), rational_to_f64(&a[0][1])],
                [rational_to_f64(&a[1][0]), rational_to_f64(&a[1][1])],
            ];
            return Ok(SingularityClass::Nilpotent {
                report: Box::new(report),
                jordan: Box::new(jordan),
                jordan_system: Box::new((pn, qn)),
            });
        }
        let disc = &tr * &tr - Rational::from_integer(4.into()) * &det;
        if disc.is_negative() {
            return Ok(SingularityClass::NonDegenerateFocusCandidate { trace: tr, det });
        }
        return Ok(SingularityClass::NotMonodromicOrUnknown {
            reason: "linear part has real eigenvalues".into(),
        });
    }
    let d = p
        .min_degree()
        .into_iter()
        .chain(q.min_degree())
        .min()
        .expect("nonzero field");
    if d % 2 == 0 {
        return Ok(SingularityClass::NotMonodromicOrUnknown {
            reason: format!("lowest homogeneous degree d = {d} is even"),
        });
    }
    let (pd, qd) = (p.homogeneous_part(d), q.homogeneous_part(d));
    match characteristic_directions(&pd, &qd)? {
        CharDirections::None => {
            let g = &(&Poly2::x() * &qd) - &(&Poly2::y() * &pd);
            let gn = g.to_num();
            let min_abs_fd = (0..2048)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / 2048.0;
                    gn.eval(t.cos(), t.sin()).abs()
                })
                .fold(f64::INFINITY, f64::min);
            Ok(SingularityClass::DegenerateNoCharDir { d, min_abs_fd })
        }
        CharDirections::IdenticallyZero => Ok(SingularityClass::NotMonodromicOrUnknown {
            reason: format!("x q_{d} - y p_{d} vanishes identically"),
        }),
        CharDirections::Some { .. } => Ok(SingularityClass::NotMonodromicOrUnknown {
            reason: format!("degree-{d} part has characteristic directions"),
        }),
    }
}

/// Linear change `old = A new` taking a nonzero nilpotent linear part to
/// `x' = y, y' = 0`; returns `A` and the transformed system.
pub fn jordan_nilpotent(p: &Poly2, q: &Poly2) -> ([[Rational; 2]; 2], Poly2, Poly2) {
    let j = linear_part(p, q);
    let apply = |v: [Rational; 2]| [&j[0][0] * &v[0] + &j[0][1] * &v[1], &j[1][0] * &v[0] + &j[1][1] * &v[1]];
    let e_y = [Rational::zero(), Rational::one()];
    let e_x = [Rational::one(), Rational::zero()];
    let jy = apply(e_y.clone());
    let (w, jw) = if jy.iter().any(|c| !c.is_zero()) {
        (e_y, jy)
    } else {
        let jx = apply(e_x.clone());
        (e_x, jx)
    };
    // columns: e1 = J w, e2 = w
    let a = [[jw[0].clone(), w[0].clone()], [jw[1].clone(), w[1].clone()]];
    let det = &a[0][0] * &a[1][1] - &a[0][1] * &a[1][0];
    let inv = [[&a[1][1] / &det, -&a[0][1] / &det], [-&a[1][0] / &det, &a[0][0] / &det]];
    let px = &Poly2::x().scale(&a[0][0]) + &Poly2::y().scale(&a[0][1]);
    let py = &Poly2::x().scale(&a[1][0]) + &Poly2::y().scale(&a[1][1]);
    let pc = p.compose(&px, &py);
    let qc = q.compose(&px, &py);
    let pn = &pc.scale(&inv[0][0]) + &qc.scale(&inv[0][1]);
    let qn = &pc.scale(&inv[1][0]) + &qc.scale(&inv[1][1]);
    (a, pn, qn)
}

fn andreev_analyze_auto(p: &Poly2, q: &Poly2) -> Result<MonodromyReport, MonodromyError> {
    match andreev_analyze(p, q, DEFAULT_ORDER) {
        Err(MonodromyError::UndecidedAtOrder(_)) => andreev_analyze(p, q, 2 * DEFAULT_ORDER),
        other => other,
    }
    .and_then(|r| {
        // raise the order so that it covers 2 alpha + 4 as well
        let wanted = (2 * r.alpha + 4).max(DEFAULT_ORDER);
        if wanted > r.order {
            andreev_analyze(p, q, wanted)
        } else {
            Ok(r)
        }
    })
}

/// Andreev's test for `x' = y + P_2(x, y), y' = Q_2(x, y)` using series
/// truncated at `order`.
pub fn andreev_analyze(p: &Poly2, q: &Poly2, order: usize) -> Result<MonodromyReport, MonodromyError> {
    let one = Rational::one();
    let lin_ok = p.coeff(1, 0).is_zero() && p.coeff(0, 1) == one && q.coeff(1, 0).is_zero() && q.coeff(0, 1).is_zero();
    if !lin_ok {
        return Err(MonodromyError::NotNilpotentForm);
    }
    let p2 = p.filter(|i, j| i + j >= 2);
    let q2 = q.filter(|i, j| i + j >= 2);
    let big_f = series_solve_implicit(&p2, order)?;
    let f = q2.eval_on_series(&big_f);
    let div = &p2.dx() + &q2.dy();
    let phi = div.eval_on_series(&big_f);
    let (alpha, a) = f.leading_term().ok_or(MonodromyError::UndecidedAtOrder(order))?;
    let (beta, b) = match phi.leading_term() {
        Some((k, c)) => (Some(k), Some(c)),
        None => (None, None),
    };
    let mut report = MonodromyReport {
        big_f,
        f,
        phi,
        a: a.clone(),
        alpha,
        b: b.clone(),
        beta,
        case: Err(String::new()),
        n: None,
        xi: None,
        xi_exact: None,
        order,
    };
    if !a.is_negative() {
        report.case = Err(format!("a = {a} is not negative"));
        return Ok(report);
    }
    if alpha % 2 == 0 {
        report.case = Err(format!("alpha = {alpha} is even"));
        return Ok(report);
    }
    let n = alpha.div_ceil(2);
    report.case = match (beta, &b) {
        (None, _) => Ok(MonodromyCase::PhiZero),
        (Some(beta), _) if beta > n - 1 => Ok(MonodromyCase::BetaAbove),
        (Some(beta), Some(b)) if beta == n - 1 => {
            let disc = b * b + Rational::from_integer(4.into()) * &a * Rational::from_integer(n.into());
            if disc.is_negative() {
                Ok(MonodromyCase::BetaCritical)
            } else {
                Err(format!("beta = n - 1 but b^2 + 4an = {disc} is not negative"))
            }
        }
        (Some(beta), _) => Err(format!("beta = {beta} is below n - 1 = {}", n - 1)),
    };
    if report.case.is_ok() {
        report.n = Some(n as u32);
        let base = -&a;
        report.xi_exact = exact_root(&base, 2 * n as u32 - 2);
        report.xi = Some(match &report.xi_exact {
            Some(x) => rational_to_f64(x),
            None => rational_to_f64(&base).powf(1.0 / (2.0 * n as f64 - 2.0)),
        });
    }
    Ok(report)
}

/// Exact `k`-th root of a positive rational when it is rational.
fn exact_root(r: &Rational, k: u32) -> Option<Rational> {
    if !r.is_positive() {
        return None;
    }
    let n = r.numer().nth_root(k);
    let d = r.denom().nth_root(k);
    let cand = Rational::new(n, d);
    (num_traits::pow(cand.clone(), k as usize) == *r).then_some(cand)
}

/// A nilpotent system in the normal form `x' = y(-1 + X_1)`,
/// `y' = f(x) + y phi(x) + y^2 Y_0` with `f = x^{2n-1} + ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSystem {
    pub p: NumPoly2,
    pub q: NumPoly2,
    /// Exact form, available when `xi` is rational.
    pub exact: Option<(Poly2, Poly2)>,
    pub n: u32,
    pub xi: f64,
    /// `f` and `phi` before (exact) and after (numeric) normalization.
    pub f_before: PowerSeries1,
    pub phi_before: PowerSeries1,
    pub f_after: Vec<f64>,
    pub phi_after: Vec<f64>,
    /// Change from the normalized frame back to the Andreev-form frame.
    pub frame: Frame,
}

/// Applies `(x, y) -> (x, y - F(x))` and then `(x, y) -> (xi x, -xi y)` to
/// the Andreev-form system `(p, q)`.
pub fn normalize_nilpotent(p: &Poly2, q: &Poly2, report: &MonodromyReport) -> Result<NormalizedSystem, MonodromyError> {
    let n = report
        .n
        .ok_or_else(|| MonodromyError::NotMonodromic(report.case.clone().err().unwrap_or_default()))?;
    let xi = report.xi.expect("monodromic report carries xi");
    let f_poly = report.big_f.to_poly_in_x();
    let shear_y = &Poly2::y() + &f_poly;
    let pc = p.compose(&Poly2::x(), &shear_y);
    let qc_raw = q.compose(&Poly2::x(), &shear_y);
    let f_prime = f_poly.dx();
    let qc = &qc_raw - &(&f_prime * &pc);
    let max_w = report.order as u32;
    let pc = pc.truncate_weighted(n, max_w);
    let qc = qc.truncate_weighted(n, max_w);

    let scale_num = |poly: &Poly2, outer: f64| NumPoly2 {
        terms: poly
            .terms()
            .map(|(i, j, c)| {
                let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
                (i, j, outer * sign * rational_to_f64(c) * xi.powi(-((i + j) as i32)))
            })
            .collect(),
    };
    let pn = scale_num(&pc, xi);
    let qn = scale_num(&qc, -xi);
    let exact = report.xi_exact.as_ref().map(|x| {
        let scale = |poly: &Poly2, outer: Rational| {
            Poly2::from_terms(poly.terms().map(|(i, j, c)| {
                let mut v = c * &outer / num_traits::pow(x.clone(), (i + j) as usize);
                if j % 2 == 1 {
                    v = -v;
                }
                (i, j, v)
            }))
        };
        (scale(&pc, x.clone()), scale(&qc, -x.clone()))
    });
    let series_num = |s: &PowerSeries1| s.coeffs().iter().map(rational_to_f64).collect::<Vec<_>>();
    let f_after = series_num(&report.f)
        .iter()
        .enumerate()
        .map(|(k, c)| -xi * c * xi.powi(-(k as i32)))
        .collect();
    let phi_after = series_num(&report.phi)
        .iter()
        .enumerate()
        .map(|(k, c)| c * xi.powi(-(k as i32)))
        .collect();
    let frame = Frame::identity()
        .then(FrameStep::Shear {
            series: series_num(&report.big_f),
        })
        .then(FrameStep::Linear {
            matrix: [[1.0 / xi, 0.0], [0.0, -1.0 / xi]],
        });
    Ok(NormalizedSystem {
        p: pn,
        q: qn,
        exact,
        n,
        xi,
        f_before: report.f.clone(),
        phi_before: report.phi.clone(),
        f_after,
        phi_after,
        frame,
    })
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ser_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&r.to_string()),
        None => s.serialize_none(),
    }
}

fn ser_series<S: serde::Serializer>(p: &PowerSeries1, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(p.coeffs().iter().map(|c| c.to_string()))
}

/// Numeric value of the Andreev ratio `b^2 + 4 a n`, for diagnostics.
pub fn critical_discriminant(report: &MonodromyReport) -> Option<f64> {
    let b = report.b.as_ref()?;
    let n = report.n? as i64;
    (b * b + Rational::from_integer(4.into()) * &report.a * Rational::from_integer(n.into())).to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::expr::parse_system;

    fn sys(text: &str) -> ParsedSystem {
        parse_system(text, &BTreeMap::new()).unwrap()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn example_one_has_no_characteristic_directions() {
        // p3, q3 of Example 1 with mu = 1/2, lambda = 0
        let p3 = Poly2::from_terms([(2, 1, q(-2, 1)), (0, 3, q(-1, 1))]);
        let q3 = Poly2::from_terms([(3, 0, q(1, 1))]);
        assert_eq!(characteristic_directions(&p3, &q3).unwrap(), CharDirections::None);
        assert_eq!(
            characteristic_directions(&Poly2::x(), &Poly2::y()).unwrap(),
            CharDirections::IdenticallyZero
        );
        let hyper = characteristic_directions(&Poly2::x(), &-Poly2::y()).unwrap();
        assert!(matches!(hyper, CharDirections::Some { vertical: true, .. }));
    }

    #[test]
    fn classification_examples() {
        let ejbh = sys("x' = -y + x*(x^2+y^2); y' = x + y*(x^2+y^2)");
        assert!(matches!(
            classify_singularity(&ejbh).unwrap(),
            SingularityClass::NonDegenerateFocusCandidate { .. }
        ));
        let ejfd = sys("x' = (x-y)*(x^2+y^2); y' = (x+y)*(x^2+y^2)");
        assert!(matches!(
            classify_singularity(&ejfd).unwrap(),
            SingularityClass::DegenerateNoCharDir { d: 3, .. }
        ));
        match classify_singularity(&sys("x' = y; y' = -x^5")).unwrap() {
            SingularityClass::Nilpotent { report, .. } => assert_eq!(report.n, Some(3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            classify_singularity(&sys("x' = x; y' = -y")).unwrap(),
            SingularityClass::NotMonodromicOrUnknown { .. }
        ));
    }

    #[test]
    fn andreev_cases() {
        let r = andreev_analyze(&Poly2::y(), &Poly2::from_int_terms(&[(3, 0, -1)]), 16).unwrap();
        assert!(r.big_f.is_zero());
        assert_eq!(r.case, Ok(MonodromyCase::PhiZero));
        assert_eq!(r.n, Some(2));
        let r = andreev_analyze(&Poly2::y(), &Poly2::from_int_terms(&[(3, 0, 1)]), 16).unwrap();
        assert!(!r.is_monodromic());
    }

    #[test]
    fn xi_scaling() {
        let r = andreev_analyze(&Poly2::y(), &Poly2::from_int_terms(&[(3, 0, -4)]), 16).unwrap();
        assert_eq!(r.xi_exact, Some(q(2, 1)));
        let r = andreev_analyze(&Poly2::y(), &Poly2::from_int_terms(&[(3, 0, -2)]), 16).unwrap();
        assert!(r.xi_exact.is_none());
        assert!((r.xi.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normalizes_simple_center() {
        let (p, qq) = (Poly2::y(), Poly2::from_int_terms(&[(3, 0, -1)]));
        let r = andreev_analyze(&p, &qq, 16).unwrap();
        let ns = normalize_nilpotent(&p, &qq, &r).unwrap();
        let (pe, qe) = ns.exact.unwrap();
        assert_eq!(pe, -Poly2::y());
        assert_eq!(qe, Poly2::from_int_terms(&[(3, 0, 1)]));
        assert!((ns.f_after[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jordan_form_from_lower_block() {
        let (a, p, qq) = jordan_nilpotent(&Poly2::zero(), &Poly2::x().scale(&q(2, 1)));
        assert_eq!(p.coeff(0, 1), q(1, 1));
        assert!(qq.coeff(1, 0).is_zero() && qq.coeff(0, 1).is_zero());
        assert_eq!(a[1][0], q(2, 1));
    }
}
