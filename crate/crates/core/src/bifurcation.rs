//! Perturbation families and counts of limit cycles bifurcating from the
//! origin.
//!
//! Polynomial families are added in the chart frame of the base lift as
//! `x' = P + x K`, `y' = Q + n y K`, which leaves θ' unchanged and adds
//! `r K` to r'.

use std::collections::BTreeMap;
use std::io::Write;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{NumPoly2, Rational};
use crate::cylinder::{lift_auto, lift_numeric, Chart, CylinderEquation, CylinderError, LiftOptions, Orientation};
use crate::dynamics::{self, DynamicsError, Multiplicity};
use crate::expr::{parse_system, ExprError, ParsedSystem};
use crate::frame::Frame;
use crate::monodromy::{classify_singularity, MonodromyError};
use crate::ode::Tolerances;

/// Smallest `|d'(r*)|` for a cycle to count as hyperbolic.
pub const HYPERBOLIC_THRESHOLD: f64 = 1e-6;
/// Default largest perturbation size.
pub const EPS_MAX: f64 = 1e-2;
/// Points of the geometric scan for sign changes.
pub const SCAN_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BifurcationError {
    #[error("multiplicity m = {m} does not fit the chart {chart:?}: {reason}")]
    Parity { m: i32, chart: Chart, reason: String },
    #[error("family needs m >= 1, got {0}")]
    NegativeOrder(i32),
    #[error("family {family} needs a {need} chart, base lifts to {chart:?}")]
    WrongChart {
        family: String,
        need: &'static str,
        chart: Chart,
    },
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("custom family must use the parameter `eps`")]
    MissingEps,
    #[error("ε = {0} cannot be represented exactly")]
    BadEps(f64),
    #[error("constructive coefficient choice failed: {0}")]
    Construction(String),
    #[error("empty ε grid")]
    EmptyGrid,
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Monodromy(#[from] MonodromyError),
    #[error(transparent)]
    Lift(#[from] CylinderError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FamilyTag {
    /// `K = Σ ε^{k-i} a_i (x²+y²)^{i+(d-1)/2}`, `k = (m-1)/2`.
    DegP1,
    /// `K̄ = Σ ε^{L-i} b_i (x²+y²)^i`, `L = (m+d)/2 - 1`.
    DegP2,
    /// `K = Σ ε^{k-i} a_i x^{n-1+2i}` (n odd) or `x^{n+2i}` (n even),
    /// `k = ⌊(m-1)/2⌋`.
    NilP1,
    /// `K̄ = Σ ε^{L-i} b_i x^{2i}`, `L = (m+n)/2 - 1`.
    NilP2,
    /// A system text with the parameter `eps`.
    Custom { text: String },
}

impl FamilyTag {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyTag::DegP1 => "degp1",
            FamilyTag::DegP2 => "degp2",
            FamilyTag::NilP1 => "nilp1",
            FamilyTag::NilP2 => "nilp2",
            FamilyTag::Custom { .. } => "custom",
        }
    }

    /// Count that cannot be exceeded at small ε, for the families that
    /// respect the subdegree restriction.
    pub fn restricted_bound(&self, m: i32) -> Option<i32> {
        match self {
            FamilyTag::DegP1 => Some((m - 1) / 2),
            FamilyTag::NilP1 => Some((m - 1).div_euclid(2)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficients {
    /// Chosen so that the first-order displacement is proportional to
    /// `Π_{j=1..K} (r² - j ε)`: one hyperbolic cycle near each `√(jε)`.
    Constructive,
    /// `(-1)^i`.
    Alternating,
    Explicit {
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct FamilyParams {
    /// Vanishing multiplicity of the base system.
    pub m: i32,
    pub coefficients: Coefficients,
    pub tol: Tolerances,
}

/// A one-parameter family `X_ε` around a base system with a monodromic
/// point at the origin.
#[derive(Clone, Debug)]
pub struct PerturbationFamily {
    pub tag: FamilyTag,
    pub base: ParsedSystem,
    pub base_chart: Chart,
    pub m: i32,
    /// Number of perturbation terms (`k` or `L`).
    pub terms: usize,
    pub coefficients: Vec<f64>,
    pub coefficient_rule: Coefficients,
    frame: Frame,
    base_p: NumPoly2,
    base_q: NumPoly2,
    /// `K_i` in the chart frame, one per coefficient.
    monomials: Vec<NumPoly2>,
    /// Multiplier of `y K` in y'.
    y_weight: f64,
    custom_params: BTreeMap<String, Rational>,
    tol: Tolerances,
}

fn r2_pow(e: u32) -> NumPoly2 {
    let r2 = NumPoly2 {
        terms: vec![(2, 0, 1.0), (0, 2, 1.0)],
    };
    (0..e).fold(
        NumPoly2 {
            terms: vec![(0, 0, 1.0)],
        },
        |acc, _| acc.mul(&r2),
    )
}

fn x_pow(e: u32) -> NumPoly2 {
    NumPoly2 {
        terms: vec![(e, 0, 1.0)],
    }
}

/// Builds a family. Polynomial families need the base lift's chart: polar
/// for `DegP*`, generalized polar for `NilP*`.
pub fn build_family(
    tag: FamilyTag,
    base: &ParsedSystem,
    params_in: FamilyParams,
) -> Result<PerturbationFamily, BifurcationError> {
    let m = params_in.m;
    let params = params_in.clone();
    if let FamilyTag::Custom { text } = &tag {
        if !text.contains("eps") {
            return Err(BifurcationError::MissingEps);
        }
        let mut params = base.params.clone();
        params.insert("eps".into(), Rational::from_integer(0.into()));
        parse_system(text, &params)?;
        let cyl = lift_auto(base, &classify_singularity(base)?)?;
        let chart = match cyl.chart() {
            Chart::Polar { .. } => Chart::Polar { d: 1 },
            c @ Chart::Direct { .. } => c,
            c => {
                return Err(BifurcationError::WrongChart {
                    family: tag.name().to_string(),
                    need: "polar or direct",
                    chart: c,
                })
            }
        };
        return Ok(PerturbationFamily {
            tag: tag.clone(),
            base: base.clone(),
            base_chart: chart,
            m,
            terms: 0,
            coefficients: Vec::new(),
            coefficient_rule: params_in.coefficients.clone(),
            frame: Frame::identity(),
            base_p: base.p.to_num(),
            base_q: base.q.to_num(),
            monomials: Vec::new(),
            y_weight: 1.0,
            custom_params: base.params.clone(),
            tol: params_in.tol,
        });
    }
    if m < 1 {
        return Err(BifurcationError::NegativeOrder(m));
    }
    let cyl = lift_auto(base, &classify_singularity(base)?)?;
    let chart = cyl.chart();
    let (terms, monomials, y_weight): (usize, Vec<NumPoly2>, f64) = match (&tag, chart) {
        (FamilyTag::DegP1 | FamilyTag::DegP2, Chart::Polar { d }) => {
            if m % 2 == 0 {
                return Err(BifurcationError::Parity {
                    m,
                    chart,
                    reason: "polar charts need m odd".into(),
                });
            }
            let (m, d) = (m as u32, d);
            if tag == FamilyTag::DegP1 {
                let k = (m - 1) / 2;
                (k as usize, (0..k).map(|i| r2_pow(i + (d - 1) / 2)).collect(), 1.0)
            } else {
                let l = (m + d) / 2 - 1;
                (l as usize, (0..l).map(r2_pow).collect(), 1.0)
            }
        }
        (FamilyTag::NilP1 | FamilyTag::NilP2, Chart::GenPolar { n }) => {
            if (m + n as i32) % 2 != 0 {
                return Err(BifurcationError::Parity {
                    m,
                    chart,
                    reason: "a nilpotent focus needs m + n even".into(),
                });
            }
            let m = m as u32;
            if tag == FamilyTag::NilP1 {
                let k = (m - 1) / 2;
                let shift = if n % 2 == 1 { n - 1 } else { n };
                (k as usize, (0..k).map(|i| x_pow(shift + 2 * i)).collect(), f64::from(n))
            } else {
                let l = (m + n) / 2 - 1;
                (l as usize, (0..l).map(|i| x_pow(2 * i)).collect(), f64::from(n))
            }
        }
        (t, c) => {
            return Err(BifurcationError::WrongChart {
                family: t.name().to_string(),
                need: if matches!(t, FamilyTag::DegP1 | FamilyTag::DegP2) {
                    "polar"
                } else {
                    "generalized polar"
                },
                chart: c,
            })
        }
    };
    let (bp, bq) = cyl.system();
    let mut fam = PerturbationFamily {
        tag,
        base: base.clone(),
        base_chart: chart,
        m,
        terms,
        coefficients: vec![0.0; terms],
        coefficient_rule: params.coefficients.clone(),
        frame: cyl.frame().clone(),
        base_p: bp.clone(),
        base_q: bq.clone(),
        monomials,
        y_weight,
        custom_params: BTreeMap::new(),
        tol: params.tol,
    };
    fam.coefficients = match &params.coefficients {
        Coefficients::Alternating => (0..terms).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        Coefficients::Explicit { values } => {
            if values.len() != terms {
                return Err(BifurcationError::CoefficientCount {
                    expected: terms,
                    got: values.len(),
                });
            }
            values.clone()
        }
        Coefficients::Constructive => constructive_coefficients(&fam, &cyl)?,
    };
    Ok(fam)
}

/// Coefficients of `Π_{j=1..k} (s - j)`, lowest degree first.
fn product_coefficients(k: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for j in 1..=k {
        let mut next = vec![0.0; c.len() + 1];
        for (i, v) in c.iter().enumerate() {
            next[i + 1] += v;
            next[i] -= j as f64 * v;
        }
        c = next;
    }
    c
}

/// First-order choice: term `i` adds `ε^{K-i} c_i r^{p_i} φ_i(θ)` to 𝓕 and
/// shifts Π by `ε^{K-i} c_i I_i r0^{p_i}` with
/// `I_i = ∫ exp(λ + (p_i - 1) g(θ)) φ_i(θ) dθ`, `g = ∫_0^θ F_1`, `λ = g(T)`.
/// Matching the displacement to `C r0^{p_0} Π (r0² - jε)` with `C` its
/// unperturbed leading coefficient gives `c_i = C e_i / I_i`.
fn constructive_coefficients(fam: &PerturbationFamily, cyl: &CylinderEquation) -> Result<Vec<f64>, BifurcationError> {
    let k = fam.terms;
    if k == 0 {
        return Ok(Vec::new());
    }
    let n = cyl.weight();
    let w_theta = cyl.jacobian_r_power() + 1;
    let lead_c = if fam.m == 1 {
        dynamics::characteristic_exponent(cyl).exp() - 1.0
    } else {
        match dynamics::estimate_multiplicity(cyl)? {
            Multiplicity::Estimated { m, c, .. } if m == fam.m => c,
            other => {
                return Err(BifurcationError::Construction(format!(
                    "displacement of the base system gives {other:?}, expected multiplicity {}",
                    fam.m
                )))
            }
        }
    };
    // g on a uniform grid by the composite Simpson rule
    const NODES: usize = 2048;
    let period = cyl.period();
    let h = period / NODES as f64;
    let mut g = vec![0.0; NODES + 1];
    for j in 0..NODES {
        let a = j as f64 * h;
        g[j + 1] = g[j] + h / 6.0 * (cyl.f1(a) + 4.0 * cyl.f1(a + 0.5 * h) + cyl.f1(a + h));
    }
    let lambda = g[NODES];
    let e = product_coefficients(k);
    let mut out = Vec::with_capacity(k);
    for (i, mono) in fam.monomials.iter().enumerate() {
        let w = mono.terms.iter().map(|t| t.0 + n * t.1).max().unwrap_or(0) as i32;
        let p = 2 + w + n as i32 - w_theta;
        let integrand = |j: usize| {
            let th = j as f64 * h;
            let (c, s) = cyl.table().eval(th);
            let phi = mono.eval(c, s) / cyl.leading_angular(th);
            (lambda + f64::from(p - 1) * g[j]).exp() * phi
        };
        let integral = (0..NODES).map(integrand).sum::<f64>() * h;
        if integral.abs() < 1e-12 {
            return Err(BifurcationError::Construction(format!(
                "response integral of term {i} vanishes"
            )));
        }
        out.push(lead_c * e[i] / integral);
    }
    Ok(out)
}

impl PerturbationFamily {
    /// Chart-frame (or, for custom families, input-frame) system at `ε`.
    pub fn perturbed(&self, eps: f64) -> Result<(NumPoly2, NumPoly2), BifurcationError> {
        if let FamilyTag::Custom { text } = &self.tag {
            let e = BigRational::from_float(eps).ok_or(BifurcationError::BadEps(eps))?;
            let mut params = self.custom_params.clone();
            params.insert("eps".into(), e);
            let sys = parse_system(text, &params)?;
            return Ok((sys.p.to_num(), sys.q.to_num()));
        }
        let mut kpoly = NumPoly2::default();
        for (i, (mono, c)) in self.monomials.iter().zip(&self.coefficients).enumerate() {
            let scale = c * eps.powi((self.terms - i) as i32);
            kpoly = kpoly.add(&NumPoly2 {
                terms: mono.terms.iter().map(|&(a, b, v)| (a, b, v * scale)).collect(),
            });
        }
        let xk = NumPoly2 {
            terms: vec![(1, 0, 1.0)],
        }
        .mul(&kpoly);
        let yk = NumPoly2 {
            terms: vec![(0, 1, self.y_weight)],
        }
        .mul(&kpoly);
        Ok((self.base_p.add(&xk).normalized(), self.base_q.add(&yk).normalized()))
    }

    /// Lift of `X_ε` in the chart of the base system, allowing terms that
    /// are singular at `r = 0`.
    pub fn lift(&self, eps: f64) -> Result<CylinderEquation, BifurcationError> {
        let (p, q) = self.perturbed(eps)?;
        let orientation = match self.base_chart {
            Chart::Direct { .. } => Orientation::AsGiven,
            _ => Orientation::Forward,
        };
        let opts = LiftOptions {
            orientation,
            allow_irregular: true,
            ..LiftOptions::default()
        };
        Ok(lift_numeric(&p, &q, self.base_chart, self.frame.clone(), opts)?)
    }

    /// `ε^{K-i} c_i K_i` written out, for reports.
    pub fn multiplier_text(&self) -> String {
        if let FamilyTag::Custom { text } = &self.tag {
            return text.clone();
        }
        let var = if matches!(self.tag, FamilyTag::DegP1 | FamilyTag::DegP2) {
            |e: u32| format!("(x^2+y^2)^{}", e / 2)
        } else {
            |e: u32| format!("x^{e}")
        };
        self.monomials
            .iter()
            .zip(&self.coefficients)
            .enumerate()
            .map(|(i, (mono, c))| {
                let deg = mono.terms.iter().map(|t| t.0 + t.1).max().unwrap_or(0);
                format!("{c:.6e}*eps^{}*{}", self.terms - i, var(deg))
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cycle {
    pub radius: f64,
    /// `d'(r*) = Π'(r*) - 1`.
    pub d_prime: f64,
    pub hyperbolic: bool,
    /// Image of the cycle on the section at `r < 0`, `-r(T/2)`.
    pub partner_predicted: Option<f64>,
    /// Zero of `d` found near the predicted partner.
    pub partner_found: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleCount {
    pub eps: f64,
    pub cycles: Vec<Cycle>,
    /// Largest radius actually scanned (trajectories beyond it left the window).
    pub r_scanned: f64,
    pub delta: f64,
    /// Pairs of zeros closer than the scan resolution.
    pub clusters: usize,
}

impl CycleCount {
    pub fn count(&self) -> usize {
        self.cycles.len()
    }

    pub fn partners_ok(&self) -> bool {
        self.cycles.iter().all(|c| c.partner_found.is_some())
    }
}

/// Displacement with the conventions used for scanning: a trajectory that
/// falls into `r = 0` counts as `d = -r0`, one that leaves the window as
/// `+∞` (times the sign of `r0`).
fn scan_displacement(cyl: &CylinderEquation, r0: f64, tol: Tolerances) -> Result<Option<(f64, f64)>, DynamicsError> {
    match dynamics::poincare_map_with(cyl, r0, tol) {
        Ok((pi, dpi)) => Ok(Some((pi - r0, dpi - 1.0))),
        Err(DynamicsError::Collapsed { .. }) => Ok(Some((-r0, f64::NAN))),
        Err(DynamicsError::ExitWindow { .. }) | Err(DynamicsError::OutsideWindow { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Zeros of `d(r0; ε)` on `(0, r_max]`: geometric sign-change scan, then
/// bisection/secant refinement, hyperbolicity from the variational equation
/// and a check of the symmetric partner.
pub fn count_limit_cycles(
    fam: &PerturbationFamily,
    eps: f64,
    r_max: Option<f64>,
) -> Result<CycleCount, BifurcationError> {
    let cyl = fam.lift(eps)?;
    let tol = fam.tol;
    let r_max = r_max.unwrap_or(0.5).min(cyl.delta() / 4.0);
    let r_min = r_max * 1e-4;
    let ratio = (r_max / r_min).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let radii: Vec<f64> = (0..SCAN_POINTS).map(|k| r_min * ratio.powi(k as i32)).collect();
    let values = radii
        .par_iter()
        .map(|&r| scan_displacement(&cyl, r, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let usable = values.iter().take_while(|v| v.is_some()).count();
    let r_scanned = if usable == 0 { 0.0 } else { radii[usable - 1] };
    let mut roots = Vec::new();
    for i in 1..usable {
        let (a, b) = (values[i - 1].unwrap().0, values[i].unwrap().0);
        if a == 0.0 {
            roots.push(radii[i - 1]);
        } else if a.signum() != b.signum() && b != 0.0 {
            roots.push(refine_root(&cyl, radii[i - 1], radii[i], a, tol)?);
        }
    }
    let clusters = roots.windows(2).filter(|w| w[1] / w[0] < ratio).count();
    let cycles = roots
        .into_iter()
        .map(|r| describe_cycle(&cyl, r, tol))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CycleCount {
        eps,
        cycles,
        r_scanned,
        delta: cyl.delta(),
        clusters,
    })
}

/// Root of `d` in `[lo, hi]` with `d(lo)` of sign `d_lo`: Illinois
/// false position, falling back to bisection where `d` is not finite.
fn refine_root(
    cyl: &CylinderEquation,
    mut lo: f64,
    mut hi: f64,
    d_lo: f64,
    tol: Tolerances,
) -> Result<f64, DynamicsError> {
    let d = |r: f64| -> Result<f64, DynamicsError> {
        Ok(match scan_displacement(cyl, r, tol)? {
            Some((v, _)) => v,
            None => f64::INFINITY * r.signum(),
        })
    };
    let mut f_lo = d_lo;
    let mut f_hi = d(hi)?;
    let mut side = 0;
    for _ in 0..200 {
        let mid = if f_lo.is_finite() && f_hi.is_finite() && f_hi != f_lo {
            let c = hi - f_hi * (hi - lo) / (f_hi - f_lo);
            if c > lo && c < hi {
                c
            } else {
                0.5 * (lo + hi)
            }
        } else {
            0.5 * (lo + hi)
        };
        let f_mid = d(mid)?;
        if f_mid == 0.0 || (hi - lo) <= 1e-14 * hi {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            f_hi = f_mid;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn describe_cycle(cyl: &CylinderEquation, r: f64, tol: Tolerances) -> Result<Cycle, DynamicsError> {
    let (_, dpi) = dynamics::poincare_map_with(cyl, r, tol)?;
    let d_prime = dpi - 1.0;
    let predicted = dynamics::flow_to(cyl, r, cyl.period() / 2.0, tol)
        .ok()
        .map(|(rh, _)| -rh);
    let found = predicted.and_then(|p| partner_zero(cyl, p, tol));
    Ok(Cycle {
        radius: r,
        d_prime,
        hyperbolic: d_prime.abs() >= HYPERBOLIC_THRESHOLD,
        partner_predicted: predicted,
        partner_found: found,
    })
}

/// A sign change of `d` within 0.1% of `p`, refined.
fn partner_zero(cyl: &CylinderEquation, p: f64, tol: Tolerances) -> Option<f64> {
    let (a, b) = (p * (1.0 - 1e-3), p * (1.0 + 1e-3));
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let d_lo = scan_displacement(cyl, lo, tol).ok()??.0;
    let d_hi = scan_displacement(cyl, hi, tol).ok()??.0;
    if d_lo.signum() == d_hi.signum() {
        return None;
    }
    refine_root(cyl, lo, hi, d_lo, tol).ok()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub count: usize,
    pub radii: Vec<f64>,
    pub hyperbolic: bool,
    pub partners_ok: bool,
    /// The window holds four times the largest radius.
    pub window_ok: bool,
    pub exceeds_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub family: String,
    pub m: i32,
    pub coefficients: Vec<f64>,
    pub multiplier: String,
    pub restricted_bound: Option<i32>,
    pub rows: Vec<SweepRow>,
    /// Radii shrink with |ε| between rows with equal counts.
    pub continuous: bool,
}

impl SweepTable {
    /// `(eps, cycle_count, radii...)` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let width = self.rows.iter().map(|r| r.count).max().unwrap_or(0);
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let mut header = vec!["eps".to_string(), "cycle_count".to_string()];
        header.extend((1..=width).map(|i| format!("radius_{i}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![format!("{:.16e}", row.eps), row.count.to_string()];
            rec.extend(row.radii.iter().map(|r| format!("{r:.16e}")));
            rec.resize(width + 2, String::new());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cycle counts over an ε grid.
pub fn sweep(fam: &PerturbationFamily, eps_grid: &[f64], r_max: Option<f64>) -> Result<SweepTable, BifurcationError> {
    if eps_grid.is_empty() {
        return Err(BifurcationError::EmptyGrid);
    }
    let bound = fam.tag.restricted_bound(fam.m);
    let rows = eps_grid
        .iter()
        .map(|&eps| {
            let cc = count_limit_cycles(fam, eps, r_max)?;
            let radii: Vec<f64> = cc.cycles.iter().map(|c| c.radius).collect();
            let largest = radii.iter().cloned().fold(0.0, f64::max);
            Ok(SweepRow {
                eps,
                count: cc.count(),
                hyperbolic: cc.cycles.iter().all(|c| c.hyperbolic),
                partners_ok: cc.partners_ok(),
                window_ok: cc.delta >= 4.0 * largest,
                exceeds_bound: bound.is_some_and(|b| cc.count() as i32 > b),
                radii,
            })
        })
        .collect::<Result<Vec<_>, BifurcationError>>()?;
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.eps.abs().total_cmp(&b.eps.abs()));
    let continuous = sorted
        .windows(2)
        .all(|w| w[0].count != w[1].count || w[0].radii.iter().zip(&w[1].radii).all(|(a, b)| a <= b));
    Ok(SweepTable {
        family: fam.tag.name().to_string(),
        m: fam.m,
        coefficients: fam.coefficients.clone(),
        multiplier: fam.multiplier_text(),
        restricted_bound: bound,
        rows,
        continuous,
    })
}

/// Halves `eps_max` until the largest cycle found at that size sits well
/// inside the perturbed lift's validity window (`δ >= 4 r*`).
pub fn admissible_eps_max(fam: &PerturbationFamily, eps_max: f64) -> Result<f64, BifurcationError> {
    let mut eps = eps_max;
    for _ in 0..40 {
        let cc = count_limit_cycles(fam, eps, None)?;
        let largest = cc.cycles.iter().map(|c| c.radius).fold(0.0, f64::max);
        if cc.delta >= 4.0 * largest {
            return Ok(eps);
        }
        eps *= 0.5;
    }
    Ok(eps)
}

/// Tries every sign pattern `±1` for the coefficients at `eps` and keeps
/// the one giving the most cycles (the first such pattern in binary order).
pub fn search_sign_patterns(
    tag: FamilyTag,
    base: &ParsedSystem,
    m: i32,
    eps: f64,
    tol: Tolerances,
) -> Result<(PerturbationFamily, CycleCount), BifurcationError> {
    let probe = build_family(
        tag.clone(),
        base,
        FamilyParams {
            m,
            coefficients: Coefficients::Alternating,
            tol,
        },
    )?;
    let k = probe.terms;
    let mut best: Option<(PerturbationFamily, CycleCount)> = None;
    for pattern in 0u32..(1 << k) {
        let values = (0..k).map(|i| if pattern >> i & 1 == 0 { 1.0 } else { -1.0 }).collect();
        let fam = build_family(
            tag.clone(),
            base,
            FamilyParams {
                m,
                coefficients: Coefficients::Explicit { values },
                tol,
            },
        )?;
        let cc = count_limit_cycles(&fam, eps, None)?;
        if best.as_ref().is_none_or(|(_, b)| cc.count() > b.count()) {
            best = Some((fam, cc));
        }
    }
    Ok(best.expect("at least one pattern"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_polynomial() {
        assert_eq!(product_coefficients(0), vec![1.0]);
        assert_eq!(product_coefficients(2), vec![2.0, -3.0, 1.0]);
    }

    fn ejbh() -> ParsedSystem {
        parse_system("x' = -y + x*(x^2+y^2); y' = x + y*(x^2+y^2)", &BTreeMap::new()).unwrap()
    }

    #[test]
    fn explicit_coefficient_gives_cycle_at_sqrt_eps() {
        // dr/dθ = r^3 - ε r
        let fam = build_family(
            FamilyTag::DegP1,
            &ejbh(),
            FamilyParams {
                m: 3,
                coefficients: Coefficients::Explicit { values: vec![-1.0] },
                tol: Tolerances::default(),
            },
        )
        .unwrap();
        let cc = count_limit_cycles(&fam, 1e-2, None).unwrap();
        assert_eq!(cc.count(), 1);
        assert!((cc.cycles[0].radius - 0.1).abs() < 1e-9);
        assert_eq!(count_limit_cycles(&fam, 0.0, None).unwrap().count(), 0);
    }

    #[test]
    fn parity_and_chart_errors() {
        let params = |m| FamilyParams {
            m,
            coefficients: Coefficients::Alternating,
            tol: Tolerances::default(),
        };
        assert!(matches!(
            build_family(FamilyTag::DegP1, &ejbh(), params(2)),
            Err(BifurcationError::Parity { .. })
        ));
        assert!(matches!(
            build_family(FamilyTag::NilP1, &ejbh(), params(3)),
            Err(BifurcationError::WrongChart { .. })
        ));
        assert!(matches!(
            build_family(FamilyTag::DegP1, &ejbh(), params(0)),
            Err(BifurcationError::NegativeOrder(0))
        ));
    }

    #[test]
    fn sign_search_finds_the_stabilizing_sign() {
        let (fam, cc) = search_sign_patterns(FamilyTag::DegP1, &ejbh(), 3, 1e-2, Tolerances::default()).unwrap();
        assert_eq!(fam.coefficients, vec![-1.0]);
        assert_eq!(cc.count(), 1);
    }
}
