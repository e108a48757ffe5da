//! Inverse integrating factors: PDE checks, lifting to the cylinder,
//! vanishing multiplicity and the resulting cyclicity verdicts.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::algebra::{Poly2, Rational};
use crate::cylinder::{Chart, CylinderEquation};
use crate::dynamics::{self, DynamicsError};
use crate::expr::{self, Expr, ExprAst, ExprError, ParsedSystem};
use crate::frame::FrameStep;
use crate::ode::Tolerances;

/// Number of angles used by the multiplicity regression.
pub const SLOPE_ANGLES: usize = 16;
/// Largest spread allowed between slopes at different angles.
pub const SLOPE_AGREEMENT: f64 = 0.05;
/// Pass threshold of the Poincaré-map identity (relative).
pub const IDENTITY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IifError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("lifted inverse integrating factor vanishes on the sampled annulus")]
    IdenticallyZero,
    #[error("leading exponent depends on θ (slopes {min} .. {max}); no Laurent leading term")]
    ThetaDependentSlopes { min: f64, max: f64, slopes: Vec<f64> },
    #[error("no Laurent leading term: common slope {slope} is not an integer")]
    NonIntegerExponent { slope: f64 },
    #[error("v_m vanishes near θ = {theta}")]
    LeadingCoefficientVanishes { theta: f64 },
    #[error("candidate has free parameters without values: {0:?}")]
    UnboundParameters(Vec<String>),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// A candidate `V0`, polynomial when possible.
#[derive(Clone, Debug, PartialEq)]
pub struct IifCandidate {
    pub expr: ExprAst,
    pub poly: Option<Poly2>,
    pub params: BTreeMap<String, Rational>,
}

impl IifCandidate {
    pub fn new(expr: ExprAst, params: BTreeMap<String, Rational>) -> Result<Self, IifError> {
        let missing: Vec<String> = expr
            .free_params()
            .into_iter()
            .filter(|p| !params.contains_key(p))
            .collect();
        if !missing.is_empty() {
            return Err(IifError::UnboundParameters(missing));
        }
        let poly = expr.to_poly(&params);
        Ok(Self { expr, poly, params })
    }

    pub fn parse(text: &str, params: BTreeMap<String, Rational>) -> Result<Self, IifError> {
        Self::new(expr::parse_expression(text)?, params)
    }

    pub fn from_poly(p: Poly2) -> Self {
        let expr = expr::parse_expression(&p.to_string()).expect("canonical polynomial text parses");
        Self {
            expr,
            poly: Some(p),
            params: BTreeMap::new(),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        self.poly.is_some()
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        expr::eval(&self.expr, (x, y), &self.params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PdeResidual {
    /// Exact residual polynomial `P V_x + Q V_y - (P_x + Q_y) V`.
    Symbolic { residual: String, passed: bool },
    /// `max |residual| / (1 + |V0|)` over an annulus grid.
    Numeric { max_relative: f64, points: usize },
}

/// Exact residual of the inverse-integrating-factor equation.
pub fn pde_residual_symbolic(v0: &Poly2, sys: &ParsedSystem) -> Poly2 {
    let div = &sys.p.dx() + &sys.q.dy();
    let lhs = &(&sys.p * &v0.dx()) + &(&sys.q * &v0.dy());
    &lhs - &(&div * v0)
}

/// Symbolic check when the candidate is polynomial, numeric otherwise (or
/// when `force_numeric`).
pub fn verify_iif_pde(cand: &IifCandidate, sys: &ParsedSystem, force_numeric: bool) -> Result<PdeResidual, IifError> {
    if let (Some(v0), false) = (&cand.poly, force_numeric) {
        let res = pde_residual_symbolic(v0, sys);
        return Ok(PdeResidual::Symbolic {
            passed: res.is_zero(),
            residual: res.to_string(),
        });
    }
    let (p, q) = (sys.p.to_num(), sys.q.to_num());
    let (px, qy) = (sys.p.dx().to_num(), sys.q.dy().to_num());
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for i in 0..8 {
        let r = 0.1 + 0.4 * i as f64 / 7.0;
        for k in 0..32 {
            // offset keeps the grid off the coordinate axes
            let th = 2.0 * PI * (k as f64 + 0.37) / 32.0;
            let (x, y) = (r * th.cos(), r * th.sin());
            let (v, vx, vy) = expr::eval_and_grad(&cand.expr, (x, y), &cand.params)?;
            let res = p.eval(x, y) * vx + q.eval(x, y) * vy - (px.eval(x, y) + qy.eval(x, y)) * v;
            worst = worst.max(res.abs() / (1.0 + v.abs()));
            points += 1;
        }
    }
    Ok(PdeResidual::Numeric {
        max_relative: worst,
        points,
    })
}

/// `V(r, θ) = V0(x, y) / (det · r^n θ')` for the chart of `cyl`, with `V0`
/// written in the coordinates of the input system.
#[derive(Clone, Debug)]
pub struct LiftedIif<'a> {
    cand: &'a IifCandidate,
    cyl: &'a CylinderEquation,
    det: f64,
}

pub fn lift_iif<'a>(cand: &'a IifCandidate, cyl: &'a CylinderEquation) -> LiftedIif<'a> {
    LiftedIif {
        cand,
        cyl,
        det: cyl.frame().det(),
    }
}

impl LiftedIif<'_> {
    pub fn eval(&self, r: f64, theta: f64) -> Result<f64, IifError> {
        let (x, y) = self.cyl.to_input_xy(r, theta);
        let v0 = self.cand.eval(x, y)?;
        Ok(v0 / (self.det * self.cyl.jacobian_theta_dot(r, theta)))
    }

    /// Leading exponent read from the candidate's term structure:
    /// its `(1, n)`-order minus the chart's `r` power (`d` in a polar chart,
    /// `2n - 1` in a generalized polar one). Available when the chart frame
    /// differs from the input only by axis scalings.
    pub fn symbolic_exponent(&self) -> Option<Rational> {
        let diagonal = self.cyl.frame().steps.iter().all(|s| match s {
            FrameStep::Linear { matrix } => matrix[0][1] == 0.0 && matrix[1][0] == 0.0,
            FrameStep::Shear { .. } => false,
        });
        if !diagonal {
            return None;
        }
        let n = self.cyl.weight();
        let ord = match &self.cand.poly {
            Some(p) => Rational::from_integer(p.min_weighted_degree(n)?.into()),
            None => leading_order(&self.cand.expr.root, n)?,
        };
        Some(ord - Rational::from_integer(self.cyl.jacobian_r_power().into()))
    }
}

/// `(1, n)`-order of an expression at the origin: `x` counts 1, `y` counts
/// `n`. Sums take the minimum, which assumes no cancellation; callers verify
/// numerically.
pub fn leading_order(e: &Expr, n: u32) -> Option<Rational> {
    let int = |v: i64| Some(Rational::from_integer(v.into()));
    match e {
        Expr::Const(c) if c.is_zero() => None,
        Expr::Const(_) | Expr::Param(_) | Expr::Exp(_) => int(0),
        Expr::X => int(1),
        Expr::Y => int(i64::from(n)),
        Expr::Product(fs) => fs.iter().map(|f| leading_order(f, n)).sum(),
        Expr::Sum(ts) => ts.iter().filter_map(|t| leading_order(t, n)).min(),
        Expr::Pow { base, exponent, .. } => leading_order(base, n).map(|o| o * exponent),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Symbolic,
    Fitted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VanishingMultiplicity {
    pub m: i32,
    pub provenance: Provenance,
    /// Per-angle slopes of `log|V|` against `log r`.
    pub slopes: Vec<f64>,
    pub thetas: Vec<f64>,
    /// `v_m(θ)` at `thetas`.
    pub v_m: Vec<f64>,
}

/// `m` and `v_m` for `V(r, θ) = v_m(θ) r^m + O(r^{m+1})`, from a log-log
/// regression at [`SLOPE_ANGLES`] angles in `[0, period)` and radii in
/// `(0, r_max]`.
pub fn vanishing_multiplicity<F>(v: F, period: f64, r_max: f64) -> Result<VanishingMultiplicity, IifError>
where
    F: Fn(f64, f64) -> Result<f64, IifError>,
{
    let radii: Vec<f64> = (0..8)
        .map(|k| r_max * 1e-3 * 10f64.powf(k as f64 * 2.0 / 7.0))
        .collect();
    let thetas: Vec<f64> = (0..SLOPE_ANGLES)
        .map(|k| period * (k as f64 + 0.25) / SLOPE_ANGLES as f64)
        .collect();
    let mut slopes = Vec::with_capacity(thetas.len());
    for &th in &thetas {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &r in &radii {
            let val = v(r, th)?;
            if val == 0.0 {
                return Err(IifError::IdenticallyZero);
            }
            xs.push(r.ln());
            ys.push(val.abs().ln());
        }
        slopes.push(ls_slope(&xs, &ys));
    }
    let min = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min > SLOPE_AGREEMENT || !min.is_finite() {
        return Err(IifError::ThetaDependentSlopes { min, max, slopes });
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let m = mean.round();
    if (mean - m).abs() > SLOPE_AGREEMENT {
        return Err(IifError::NonIntegerExponent { slope: mean });
    }
    let m = m as i32;
    let h = r_max * 1e-3;
    let v_m = thetas
        .iter()
        .map(|&th| leading_coefficient(&v, m, th, h))
        .collect::<Result<Vec<_>, _>>()?;
    let scale = v_m.iter().map(|c| c.abs()).fold(0.0, f64::max);
    if let Some((k, _)) = v_m
        .iter()
        .enumerate()
        .find(|(_, c)| c.abs() <= 1e-9 * scale || **c == 0.0)
    {
        return Err(IifError::LeadingCoefficientVanishes { theta: thetas[k] });
    }
    Ok(VanishingMultiplicity {
        m,
        provenance: Provenance::Fitted,
        slopes,
        thetas,
        v_m,
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `v_m(θ) = lim V(r, θ) / r^m`, by Richardson extrapolation over
/// `r = h, h/2, h/4` (error `O(h^3)`).
pub fn leading_coefficient<F>(v: &F, m: i32, theta: f64, h: f64) -> Result<f64, IifError>
where
    F: Fn(f64, f64) -> Result<f64, IifError>,
{
    let g = |r: f64| v(r, theta).map(|val| val / r.powi(m));
    let (g1, g2, g4) = (g(h)?, g(h / 2.0)?, g(h / 4.0)?);
    let a1 = 2.0 * g2 - g1;
    let a2 = 2.0 * g4 - g2;
    Ok((4.0 * a2 - a1) / 3.0)
}

/// Multiplicity of a lifted candidate, symbolic when the term structure
/// gives an integer exponent that the regression confirms.
pub fn lifted_multiplicity(lifted: &LiftedIif) -> Result<VanishingMultiplicity, IifError> {
    let r_max = (lifted.cyl.delta() / 4.0).min(0.1);
    let mut vm = vanishing_multiplicity(|r, th| lifted.eval(r, th), lifted.cyl.period(), r_max)?;
    if let Some(sym) = lifted.symbolic_exponent() {
        if sym.is_integer() && sym.to_integer().to_i32() == Some(vm.m) {
            vm.provenance = Provenance::Symbolic;
        }
    }
    Ok(vm)
}

/// Largest relative residual of `V(Π(r0), T) = V(r0, 0) Π'(r0)` over the
/// radii; `r0 = 0` contributes zero.
pub fn check_poincare_identity(lifted: &LiftedIif, radii: &[f64], tol: Tolerances) -> Result<f64, IifError> {
    let cyl = lifted.cyl;
    let period = cyl.period();
    let mut worst: f64 = 0.0;
    for &r0 in radii {
        if r0 == 0.0 {
            continue;
        }
        let (pi, dpi) = dynamics::poincare_map_with(cyl, r0, tol)?;
        let lhs = lifted.eval(pi, period)?;
        let rhs = lifted.eval(r0, 0.0)? * dpi;
        let scale = lhs.abs().max(rhs.abs());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VmConsistency {
    /// `max |v_m' - (1 - m) F_1 v_m| / max |v_m|`.
    pub ode_residual: f64,
    /// `max |v_m(θ) - v_m(0) exp((1 - m) ∫_0^θ F_1)| / max |v_m|`.
    pub closed_form_residual: f64,
    /// `|v_m(T) - v_m(0)| / max |v_m|`.
    pub periodicity: f64,
}

/// Checks `v_m' = (1 - m) F_1 v_m` and its integrated form on a θ grid.
pub fn v_m_consistency(lifted: &LiftedIif, m: i32) -> Result<VmConsistency, IifError> {
    const NODES: usize = 64;
    let cyl = lifted.cyl;
    let period = cyl.period();
    let h_r = (cyl.delta() / 4.0).min(0.1) * 1e-3;
    let v = |r: f64, th: f64| lifted.eval(r, th);
    let vm = |th: f64| leading_coefficient(&v, m, th, h_r);
    let hd = 1e-3 * period;
    let f1 = |th: f64| dynamics::f1_richardson(cyl, th, 1e-3);
    let one_m = f64::from(1 - m);
    let mut samples = Vec::with_capacity(NODES + 1);
    let mut ode: f64 = 0.0;
    for k in 0..=NODES {
        let th = period * k as f64 / NODES as f64;
        let val = vm(th)?;
        let deriv = (-vm(th + 2.0 * hd)? + 8.0 * vm(th + hd)? - 8.0 * vm(th - hd)? + vm(th - 2.0 * hd)?) / (12.0 * hd);
        ode = ode.max((deriv - one_m * f1(th) * val).abs());
        samples.push((th, val));
    }
    let scale = samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    // cumulative composite Simpson rule for ∫ F_1
    let sub = 16;
    let mut integral = 0.0;
    let mut closed: f64 = 0.0;
    let v0 = samples[0].1;
    for k in 1..=NODES {
        let a = samples[k - 1].0;
        let step = (samples[k].0 - a) / sub as f64;
        for j in 0..sub {
            let t0 = a + j as f64 * step;
            integral += step / 6.0 * (f1(t0) + 4.0 * f1(t0 + 0.5 * step) + f1(t0 + step));
        }
        closed = closed.max((samples[k].1 - v0 * (one_m * integral).exp()).abs());
    }
    Ok(VmConsistency {
        ode_residual: ode / scale,
        closed_form_residual: closed / scale,
        periodicity: (samples[NODES].1 - v0).abs() / scale,
    })
}

/// What is known about the origin being a focus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FocusEvidence {
    /// Multiplicity estimated from the displacement function.
    Numeric {
        m_hat: i32,
    },
    /// Displacement stayed within the noise floor.
    CenterLike,
    /// The user asserts the origin is a focus.
    Asserted,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Center,
    Focus {
        /// Lower bound on the cyclicity under arbitrary analytic perturbations.
        lower_bound: i32,
        /// Exact number of limit cycles under the restricted perturbations.
        restricted_count: i32,
        /// Whether the lower bound is the cyclicity itself.
        bound_is_exact: bool,
    },
    Undecided {
        reason: String,
    },
    Inconsistent {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParityRecord {
    pub law: String,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CyclicityVerdict {
    pub m: i32,
    pub verdict: Verdict,
    pub parity: ParityRecord,
    /// Statement applied, in words.
    pub clause: String,
}

impl CyclicityVerdict {
    /// The theory declined to decide.
    pub fn abstained(&self) -> bool {
        matches!(self.verdict, Verdict::Undecided { .. })
    }
}

/// Center or focus verdict with cyclicity bounds from `m`.
///
/// Polar chart of degree `d`: `m <= 0` or `m` even gives a center;
/// otherwise a focus has cyclicity at least `(m + d)/2 - 1`, exactly that
/// when `d = 1`, and `(m - 1)/2` cycles under perturbations of subdegree at
/// least `d`. Weight-`n` chart: `m <= 0` or `m + n` odd gives a center;
/// otherwise at least `(m + n)/2 - 1` and `⌊(m - 1)/2⌋` under the restricted
/// perturbations. A polynomial candidate together with a focus forces `n`
/// odd.
pub fn classify_and_bound(m: i32, chart: Chart, evidence: FocusEvidence, v0_analytic: bool) -> CyclicityVerdict {
    let (law, ok, d_or_n, polar) = match chart {
        Chart::Polar { d } => ("m odd".to_string(), m.rem_euclid(2) == 1, d as i32, true),
        Chart::GenPolar { n } | Chart::Direct { n, .. } => (
            format!("m + n even (n = {n})"),
            (m + n as i32).rem_euclid(2) == 0,
            n as i32,
            false,
        ),
    };
    let parity = ParityRecord {
        law,
        satisfied: ok && m > 0,
    };
    let verdict = |verdict: Verdict, clause: &str| CyclicityVerdict {
        m,
        verdict,
        parity: parity.clone(),
        clause: clause.to_string(),
    };
    if m <= 0 {
        return verdict(
            Verdict::Center,
            "m <= 0: a neighbourhood of the origin is filled with periodic orbits",
        );
    }
    if !ok {
        let clause = if polar {
            "m even in a polar chart: center"
        } else {
            "m + n odd in a generalized polar chart: center"
        };
        return verdict(Verdict::Center, clause);
    }
    match evidence {
        FocusEvidence::None => {
            return verdict(
                Verdict::Undecided {
                    reason: "no evidence that the origin is a focus".into(),
                },
                "focus bounds need focus evidence",
            )
        }
        FocusEvidence::CenterLike => {
            return verdict(
                Verdict::Undecided {
                    reason: "displacement function is center-like within the noise floor".into(),
                },
                "focus bounds need focus evidence",
            )
        }
        FocusEvidence::Numeric { m_hat } if m_hat != m => {
            return verdict(
                Verdict::Inconsistent {
                    reason: format!("displacement multiplicity {m_hat} differs from vanishing multiplicity {m}"),
                },
                "at a focus the cycle r = 0 has multiplicity m",
            )
        }
        _ => {}
    }
    if !polar && v0_analytic && d_or_n % 2 == 0 {
        return verdict(
            Verdict::Inconsistent {
                reason: format!("analytic inverse integrating factor at a focus requires odd n, got n = {d_or_n}"),
            },
            "analytic inverse integrating factor at a nilpotent focus forces n odd",
        );
    }
    let lower_bound = (m + d_or_n) / 2 - 1;
    let restricted_count = if polar { (m - 1) / 2 } else { (m - 1).div_euclid(2) };
    let clause = if polar {
        "focus in a polar chart: cyclicity >= (m + d)/2 - 1, (m - 1)/2 under subdegree >= d"
    } else {
        "focus in a generalized polar chart: cyclicity >= (m + n)/2 - 1, floor((m - 1)/2) under the restricted perturbations"
    };
    verdict(
        Verdict::Focus {
            lower_bound,
            restricted_count,
            bound_is_exact: polar && d_or_n == 1,
        },
        clause,
    )
}
