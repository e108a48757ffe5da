//! Lifting a planar system to `dr/dθ = 𝓕(r, θ)` on the cylinder.
//!
//! With `x = r Cs θ`, `y = r^n Sn θ` (ordinary polar coordinates when
//! `n = 1`):
//!
//! ```text
//! r' = (x^{2n-1} P + y Q) / r^{2n-1},    θ' = (x Q - n y P) / r^{n+1}.
//! ```
//!
//! Both numerators are split into `(1, n)`-quasihomogeneous parts, so every
//! power of `r` is exact and 𝓕 is a ratio of polynomials in `r` whose
//! coefficients are trigonometric polynomials in `(Cs θ, Sn θ)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::algebra::NumPoly2;
use crate::expr::ParsedSystem;
use crate::frame::{Frame, FrameStep};
use crate::gentrig::{self, GenTrigError, GenTrigTable};
use crate::monodromy::{normalize_nilpotent, MonodromyError, SingularityClass};

/// Largest radius ever used as a validity window.
pub const DELTA_CAP: f64 = 1e3;
/// Angular grid used for the validity window and certification.
pub const THETA_GRID: usize = 2048;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CylinderError {
    #[error("angular speed numerator vanishes identically")]
    NoAngularPart,
    #[error("leading angular coefficient changes sign near θ = {theta} (characteristic direction)")]
    LeadingVanishes { theta: f64 },
    #[error("leading angular coefficient could not be certified nonvanishing (grid minimum {min})")]
    NotCertified { min: f64 },
    #[error("lift is not analytic at r = 0: term r^{exponent} in 𝓕")]
    NotRegular { exponent: i32 },
    #[error("expected leading angular weight {expected}, found {found}")]
    WrongDegree { expected: u32, found: u32 },
    #[error("direct chart needs a - 1 = b - n >= 0, got a = {a}, b = {b}, n = {n}")]
    DirectCondition { a: i64, b: i64, n: u32 },
    #[error("system is not monodromic at the origin: {0}")]
    NotMonodromic(String),
    #[error(transparent)]
    GenTrig(#[from] GenTrigError),
    #[error(transparent)]
    Monodromy(#[from] MonodromyError),
}

/// Which coordinates the cylinder equation lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Chart {
    Polar {
        d: u32,
    },
    GenPolar {
        n: u32,
    },
    /// Generalized polar chart of weight `n` applied to the system as given.
    /// `order0` marks `a - 1 = b - n = 0`, where θ' has no factor of `r`.
    Direct {
        n: u32,
        order0: bool,
    },
}

impl Chart {
    /// Weight `n` of the coordinates `x = r Cs θ, y = r^n Sn θ`.
    pub fn weight(&self) -> u32 {
        match *self {
            Chart::Polar { .. } => 1,
            Chart::GenPolar { n } | Chart::Direct { n, .. } => n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Flip `y` when needed so that θ increases with time.
    Forward,
    /// Keep the system as given, whatever the sign of θ'.
    AsGiven,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftOptions {
    pub orientation: Orientation,
    /// Accept terms `r^e` with `e <= 0` in 𝓕 (only sensible for `r > 0`).
    pub allow_irregular: bool,
    pub delta_cap: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            orientation: Orientation::Forward,
            allow_irregular: false,
            delta_cap: DELTA_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct TrigPoly {
    terms: Vec<(u32, u32, f64)>,
}

impl TrigPoly {
    fn eval(&self, cs: &[f64], sn: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * cs[i as usize] * sn[j as usize])
            .sum()
    }

    /// Bound on `|d/dθ|` using `|Cs| <= 1`, `|Sn| <= 1`, `|Cs'|, |Sn'| <= 1`.
    fn lipschitz(&self) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c.abs() * f64::from(i + j)).sum()
    }
}

/// `sum_e r^e A_e(θ)`.
#[derive(Clone, Debug, PartialEq)]
struct RSeries {
    parts: Vec<(i32, TrigPoly)>,
}

impl RSeries {
    fn eval_with_dr(&self, r: f64, cs: &[f64], sn: &[f64]) -> (f64, f64) {
        let mut v = 0.0;
        let mut dv = 0.0;
        for (e, tp) in &self.parts {
            let a = tp.eval(cs, sn);
            v += a * r.powi(*e);
            if *e != 0 {
                dv += a * f64::from(*e) * r.powi(e - 1);
            }
        }
        (v, dv)
    }

    fn coefficient(&self, e: i32, cs: &[f64], sn: &[f64]) -> f64 {
        self.parts
            .iter()
            .filter(|(k, _)| *k == e)
            .map(|(_, tp)| tp.eval(cs, sn))
            .sum()
    }
}

/// `dr/dθ = 𝓕(r, θ) = N(r, θ) / D(r, θ)` together with its chart data.
#[derive(Clone, Debug)]
pub struct CylinderEquation {
    chart: Chart,
    n: u32,
    table: Arc<GenTrigTable>,
    num: RSeries,
    den: RSeries,
    /// Weighted degree of the leading part of `x Q - n y P`.
    w_theta: u32,
    delta: f64,
    regular: bool,
    lead_min_abs: f64,
    lead_sign: f64,
    frame: Frame,
    max_i: usize,
    max_j: usize,
    /// Chart-frame system the lift was built from.
    p: NumPoly2,
    q: NumPoly2,
}

impl CylinderEquation {
    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn weight(&self) -> u32 {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.table.period()
    }

    pub fn table(&self) -> &GenTrigTable {
        &self.table
    }

    /// Radial validity window `|r| < δ`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// False when 𝓕 carries non-positive powers of `r`.
    pub fn is_regular(&self) -> bool {
        self.regular
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn system(&self) -> (&NumPoly2, &NumPoly2) {
        (&self.p, &self.q)
    }

    /// Sign of the leading angular coefficient (`+1` in forward charts).
    pub fn angular_sign(&self) -> f64 {
        self.lead_sign
    }

    /// Certified lower bound basis: grid minimum of `|Θ_lead|`.
    pub fn leading_min_abs(&self) -> f64 {
        self.lead_min_abs
    }

    fn powers(&self, theta: f64) -> (Vec<f64>, Vec<f64>) {
        let (c, s) = self.table.eval(theta);
        (pow_table(c, self.max_i), pow_table(s, self.max_j))
    }

    /// Leading angular coefficient `Θ_lead(θ) = D(0, θ)`; equals `F_d(θ)` in
    /// a polar chart.
    pub fn leading_angular(&self, theta: f64) -> f64 {
        let (cs, sn) = self.powers(theta);
        self.den.coefficient(0, &cs, &sn)
    }

    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        self.eval_with_dr(r, theta).0
    }

    /// `(𝓕, ∂𝓕/∂r)` at `(r, θ)`.
    pub fn eval_with_dr(&self, r: f64, theta: f64) -> (f64, f64) {
        let (cs, sn) = self.powers(theta);
        let (nv, ndv) = self.num.eval_with_dr(r, &cs, &sn);
        let (dv, ddv) = self.den.eval_with_dr(r, &cs, &sn);
        (nv / dv, (ndv * dv - nv * ddv) / (dv * dv))
    }

    /// `F_1(θ) = ∂𝓕/∂r (0, θ)`, exact from the term structure.
    pub fn f1(&self, theta: f64) -> f64 {
        let (cs, sn) = self.powers(theta);
        let n1 = self.num.coefficient(1, &cs, &sn);
        n1 / self.den.coefficient(0, &cs, &sn)
    }

    /// Jacobian-weighted angular speed `r^n θ'`, the denominator of a lifted
    /// inverse integrating factor.
    pub fn jacobian_theta_dot(&self, r: f64, theta: f64) -> f64 {
        let (cs, sn) = self.powers(theta);
        let (dv, _) = self.den.eval_with_dr(r, &cs, &sn);
        r.powi(self.w_theta as i32 - 1) * dv
    }

    /// Exponent `e` with `r^n θ' = r^e D(r, θ)` and `D(0, θ) != 0`: `d` in a
    /// polar chart, `2n - 1` in the generalized polar ones.
    pub fn jacobian_r_power(&self) -> i32 {
        self.w_theta as i32 - 1
    }

    /// Chart-frame cartesian point `(r Cs θ, r^n Sn θ)`.
    pub fn to_chart_xy(&self, r: f64, theta: f64) -> (f64, f64) {
        let (c, s) = self.table.eval(theta);
        (r * c, r.powi(self.n as i32) * s)
    }

    /// Point of the input system's plane corresponding to `(r, θ)`.
    pub fn to_input_xy(&self, r: f64, theta: f64) -> (f64, f64) {
        self.frame.to_input(self.to_chart_xy(r, theta))
    }

    /// Largest deviation from the chart symmetry
    /// `𝓕(-r, θ + T/2) = -𝓕(r, θ)` (polar) or
    /// `𝓕(-r, (-1)^{n+1}(θ + T/2)) = (-1)^n 𝓕(r, θ)` (weight `n`), over the
    /// given sample points.
    pub fn symmetry_residual(&self, samples: &[(f64, f64)]) -> f64 {
        let n = self.n;
        let t2 = self.period() / 2.0;
        samples
            .iter()
            .map(|&(r, th)| {
                let lhs = if n % 2 == 1 {
                    self.eval(-r, th + t2)
                } else {
                    self.eval(-r, -(th + t2))
                };
                let rhs = if n % 2 == 1 {
                    -self.eval(r, th)
                } else {
                    self.eval(r, th)
                };
                (lhs - rhs).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn pow_table(v: f64, max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 1.0;
    for _ in 0..=max {
        out.push(acc);
        acc *= v;
    }
    out
}

/// Groups the terms of `p` by `(1, n)`-weighted degree, dropping numerical
/// noise relative to the largest coefficient.
fn weighted_parts(p: &NumPoly2, n: u32) -> BTreeMap<u32, Vec<(u32, u32, f64)>> {
    let scale = p.terms.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
    let mut out: BTreeMap<u32, Vec<(u32, u32, f64)>> = BTreeMap::new();
    for &(i, j, c) in &p.terms {
        if c.abs() > 1e-14 * scale {
            out.entry(i + n * j).or_default().push((i, j, c));
        }
    }
    out
}

fn xpow(i: u32) -> NumPoly2 {
    NumPoly2 {
        terms: vec![(i, 0, 1.0)],
    }
}

fn ypow(c: f64) -> NumPoly2 {
    NumPoly2 { terms: vec![(0, 1, c)] }
}

/// `P(x, -y)`, `-Q(x, -y)`: the same system seen with `y` reversed.
fn flip_y(p: &NumPoly2, q: &NumPoly2) -> (NumPoly2, NumPoly2) {
    let sgn = |j: u32| if j % 2 == 1 { -1.0 } else { 1.0 };
    (
        NumPoly2 {
            terms: p.terms.iter().map(|&(i, j, c)| (i, j, c * sgn(j))).collect(),
        },
        NumPoly2 {
            terms: q.terms.iter().map(|&(i, j, c)| (i, j, -c * sgn(j))).collect(),
        },
    )
}

/// Core construction shared by every chart.
pub fn lift_numeric(
    p: &NumPoly2,
    q: &NumPoly2,
    chart: Chart,
    frame: Frame,
    opts: LiftOptions,
) -> Result<CylinderEquation, CylinderError> {
    let n = chart.weight();
    let table = gentrig::table(n)?;
    let nr = xpow(2 * n - 1).mul(p).add(&ypow(1.0).mul(q));
    let nth = xpow(1).mul(q).add(&ypow(-f64::from(n)).mul(p));
    let rparts = weighted_parts(&nr, n);
    let tparts = weighted_parts(&nth, n);
    let (&w_theta, _) = tparts.iter().next().ok_or(CylinderError::NoAngularPart)?;
    let lead = TrigPoly {
        terms: tparts[&w_theta].clone(),
    };
    let max_i = nr.terms.iter().chain(&nth.terms).map(|t| t.0).max().unwrap_or(0) as usize;
    let max_j = nr.terms.iter().chain(&nth.terms).map(|t| t.1).max().unwrap_or(0) as usize;

    let (min_abs, sign) = certify_nonvanishing(&lead, &table, max_i, max_j)?;
    if sign < 0.0 && opts.orientation == Orientation::Forward {
        let (pf, qf) = flip_y(p, q);
        return lift_numeric(&pf, &qf, chart, frame.then(FrameStep::flip_y()), opts);
    }

    let shift = 2 - n as i32 - w_theta as i32;
    let mut regular = true;
    let mut num_parts = Vec::new();
    for (w, terms) in rparts {
        let e = w as i32 + shift;
        if e <= 0 {
            if !opts.allow_irregular {
                return Err(CylinderError::NotRegular { exponent: e });
            }
            regular = false;
        }
        num_parts.push((e, TrigPoly { terms }));
    }
    let den_parts = tparts
        .into_iter()
        .map(|(w, terms)| ((w - w_theta) as i32, TrigPoly { terms }))
        .collect();
    let mut cyl = CylinderEquation {
        chart,
        n,
        table,
        num: RSeries { parts: num_parts },
        den: RSeries { parts: den_parts },
        w_theta,
        delta: 0.0,
        regular,
        lead_min_abs: min_abs,
        lead_sign: sign,
        frame,
        max_i,
        max_j,
        p: p.clone(),
        q: q.clone(),
    };
    cyl.delta = validity_window(&cyl, opts.delta_cap);
    Ok(cyl)
}

/// Grid minimum and sign of the trigonometric polynomial, refined until the
/// Lipschitz bound rules out zeros between grid points.
fn certify_nonvanishing(
    lead: &TrigPoly,
    table: &GenTrigTable,
    max_i: usize,
    max_j: usize,
) -> Result<(f64, f64), CylinderError> {
    let period = table.period();
    let lip = lead.lipschitz();
    let mut points = THETA_GRID;
    loop {
        let h = period / points as f64;
        let mut min_abs = f64::INFINITY;
        let mut sign = 0.0;
        for k in 0..points {
            let th = k as f64 * h;
            let (c, s) = table.eval(th);
            let v = lead.eval(&pow_table(c, max_i), &pow_table(s, max_j));
            if v == 0.0 || (sign != 0.0 && v.signum() != sign) {
                return Err(CylinderError::LeadingVanishes { theta: th });
            }
            sign = v.signum();
            min_abs = min_abs.min(v.abs());
        }
        if min_abs > lip * h / 2.0 {
            return Ok((min_abs, sign));
        }
        if points >= 1 << 17 {
            return Err(CylinderError::NotCertified { min: min_abs });
        }
        points *= 4;
    }
}

/// Largest `δ <= cap` with `|D(±r, θ)| >= min|D(0, ·)| / 2` for `|r| <= δ`
/// on the angular grid: a geometric scan followed by bisection.
fn validity_window(cyl: &CylinderEquation, cap: f64) -> f64 {
    let period = cyl.period();
    let grid: Vec<(Vec<f64>, Vec<f64>)> = (0..THETA_GRID)
        .map(|k| cyl.powers(period * k as f64 / THETA_GRID as f64))
        .collect();
    let half = 0.5 * cyl.lead_min_abs;
    let ok = |r: f64| {
        grid.iter().all(|(cs, sn)| {
            [r, -r].iter().all(|&rr| {
                let (d, _) = cyl.den.eval_with_dr(rr, cs, sn);
                d * cyl.lead_sign >= half
            })
        })
    };
    if cyl.den.parts.len() == 1 {
        return cap;
    }
    let mut good = 0.0;
    let mut bad = None;
    for k in (0..=60).rev() {
        let r = cap * 0.5f64.powi(k);
        if ok(r) {
            good = r;
        } else {
            bad = Some(r);
            break;
        }
    }
    let Some(mut bad) = bad else {
        return cap;
    };
    for _ in 0..40 {
        let mid = 0.5 * (good + bad);
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

fn to_num(sys: &ParsedSystem) -> (NumPoly2, NumPoly2) {
    (sys.p.to_num(), sys.q.to_num())
}

/// Polar lift of a system whose lowest homogeneous degree is the odd `d`.
pub fn polar_lift(sys: &ParsedSystem, d: u32) -> Result<CylinderEquation, CylinderError> {
    let (p, q) = to_num(sys);
    let cyl = lift_numeric(&p, &q, Chart::Polar { d }, Frame::identity(), LiftOptions::default())?;
    if cyl.w_theta != d + 1 {
        return Err(CylinderError::WrongDegree {
            expected: d + 1,
            found: cyl.w_theta.saturating_sub(1),
        });
    }
    Ok(cyl)
}

/// Generalized polar lift of weight `n` for a nilpotent system already in
/// Andreev form (`x' = y + ...`) or in the normal form. `frame` maps the
/// given coordinates back to the user's input.
pub fn genpolar_lift(p: &NumPoly2, q: &NumPoly2, n: u32, frame: Frame) -> Result<CylinderEquation, CylinderError> {
    lift_numeric(p, q, Chart::GenPolar { n }, frame, LiftOptions::default())
}

/// Lowest `(1, n)`-weighted degrees `(a, b)` of `P` and `Q`.
pub fn direct_degrees(sys: &ParsedSystem, n: u32) -> (Option<u32>, Option<u32>) {
    (sys.p.min_weighted_degree(n), sys.q.min_weighted_degree(n))
}

/// Weight-`n` generalized polar chart applied to the system as given, under
/// the condition `a - 1 = b - n >= 0` on the lowest weighted degrees.
pub fn direct_lift(sys: &ParsedSystem, n: u32) -> Result<CylinderEquation, CylinderError> {
    let (a, b) = match direct_degrees(sys, n) {
        (Some(a), Some(b)) => (i64::from(a), i64::from(b)),
        (a, b) => {
            return Err(CylinderError::DirectCondition {
                a: a.map_or(-1, i64::from),
                b: b.map_or(-1, i64::from),
                n,
            })
        }
    };
    if a - 1 != b - i64::from(n) || a < 1 {
        return Err(CylinderError::DirectCondition { a, b, n });
    }
    let (p, q) = to_num(sys);
    let opts = LiftOptions {
        orientation: Orientation::AsGiven,
        ..LiftOptions::default()
    };
    lift_numeric(&p, &q, Chart::Direct { n, order0: a == 1 }, Frame::identity(), opts)
}

/// Lift matching a classification: polar for non-degenerate and degenerate
/// points, generalized polar for nilpotent ones. Nilpotent systems are
/// lifted in Andreev form when that chart is already regular, otherwise
/// after normalization.
pub fn lift_auto(sys: &ParsedSystem, class: &SingularityClass) -> Result<CylinderEquation, CylinderError> {
    match class {
        SingularityClass::NonDegenerateFocusCandidate { .. } => polar_lift(sys, 1),
        SingularityClass::DegenerateNoCharDir { d, .. } => polar_lift(sys, *d),
        SingularityClass::Nilpotent {
            report,
            jordan,
            jordan_system,
        } => {
            let n = report
                .n
                .ok_or_else(|| CylinderError::NotMonodromic(report.case.clone().err().unwrap_or_default()))?;
            let base = Frame::identity().then(FrameStep::Linear { matrix: **jordan });
            let (pj, qj) = &**jordan_system;
            match genpolar_lift(&pj.to_num(), &qj.to_num(), n, base.clone()) {
                Ok(c) => Ok(c),
                Err(CylinderError::LeadingVanishes { .. })
                | Err(CylinderError::NotRegular { .. })
                | Err(CylinderError::NotCertified { .. }) => {
                    let ns = normalize_nilpotent(pj, qj, report)?;
                    let mut frame = base;
                    frame.steps.extend(ns.frame.steps.iter().cloned());
                    genpolar_lift(&ns.p, &ns.q, n, frame)
                }
                Err(e) => Err(e),
            }
        }
        SingularityClass::NotMonodromicOrUnknown { reason } => Err(CylinderError::NotMonodromic(reason.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_system;
    use crate::monodromy::classify_singularity;

    fn sys(text: &str) -> ParsedSystem {
        parse_system(text, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn cubic_focus_lifts_to_r_cubed() {
        let c = polar_lift(&sys("x' = -y + x*(x^2+y^2); y' = x + y*(x^2+y^2)"), 1).unwrap();
        for &(r, th) in &[(0.1, 0.3), (-0.2, 2.0), (0.05, 5.0)] {
            assert!((c.eval(r, th) - r * r * r).abs() < 1e-15);
        }
        assert_eq!(c.delta(), DELTA_CAP);
    }

    #[test]
    fn homogeneous_focus_lifts_to_r() {
        let c = polar_lift(&sys("x' = (x-y)*(x^2+y^2); y' = (x+y)*(x^2+y^2)"), 3).unwrap();
        assert!((c.eval(0.3, 1.0) - 0.3).abs() < 1e-14);
        assert!((c.f1(0.7) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn saddle_is_refused() {
        assert!(matches!(
            polar_lift(&sys("x' = x; y' = -y"), 1),
            Err(CylinderError::LeadingVanishes { .. })
        ));
    }

    #[test]
    fn nilpotent_center_chart_is_zero() {
        let s = sys("x' = y; y' = -x^3");
        let class = classify_singularity(&s).unwrap();
        let c = lift_auto(&s, &class).unwrap();
        assert_eq!(c.chart(), Chart::GenPolar { n: 2 });
        assert_eq!(c.eval(0.2, 1.3), 0.0);
        assert!((c.jacobian_theta_dot(0.5, 0.4) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn direct_chart_conditions() {
        let c = direct_lift(&sys("x' = y + x^3; y' = -x^3 + 2*x^2*y"), 2).unwrap();
        for k in 0..20 {
            let th = 0.37 * k as f64;
            assert!((c.leading_angular(th) + 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            direct_lift(&sys("x' = y; y' = -x"), 2),
            Err(CylinderError::DirectCondition { a: 2, b: 1, n: 2 })
        ));
    }

    #[test]
    fn fallback_to_normal_form() {
        // F(x) = -x^2 has weight below n = 3, so the Andreev-form chart has
        // leading angular part -2 x^4, vanishing at Cs = 0
        let s = sys("x' = y + x^2; y' = -2*x*y - 2*x^3 - x^5");
        let class = classify_singularity(&s).unwrap();
        let c = lift_auto(&s, &class).unwrap();
        assert_eq!(c.chart(), Chart::GenPolar { n: 3 });
        assert!(c.frame().steps.len() >= 3);
        // the normal form is x' = -y, y' = x^5, a center
        assert!(c.eval(0.3, 0.4).abs() < 1e-12);
    }
}
