//! Poincaré map, displacement function and multiplicity estimates for a
//! cylinder equation.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cylinder::{Chart, CylinderEquation};
use crate::ode::{integrate, OdeError, Tolerances};

/// Number of small radii used for the log-log fit.
pub const FIT_POINTS: usize = 8;
/// A sample enters the fit when `|d|` exceeds this multiple of the noise floor.
pub const FIT_FLOOR_FACTOR: f64 = 100.0;
/// Below this multiple of the noise floor everywhere, `d` is "center-like".
pub const CENTER_FLOOR_FACTOR: f64 = 10.0;
/// Largest distance between the fitted slope and an admissible integer.
pub const SLOPE_SNAP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("r0 = {r0} is outside the validity window |r| < {delta}")]
    OutsideWindow { r0: f64, delta: f64 },
    #[error("trajectory from r0 = {r0} left the validity window at θ = {theta} (r = {r})")]
    ExitWindow { r0: f64, theta: f64, r: f64 },
    #[error("trajectory from r0 = {r0} reached r = 0 at θ = {theta} in a chart singular there")]
    Collapsed { r0: f64, theta: f64 },
    #[error("integration from r0 = {r0} failed: {source}")]
    Integration { r0: f64, source: OdeError },
    #[error("log-log slope {slope} is not within {SLOPE_SNAP} of an admissible integer")]
    NonIntegerSlope { slope: f64 },
    #[error("not enough samples above the noise floor for a fit ({found} of {FIT_POINTS})")]
    TooFewSamples { found: usize },
    #[error("invalid radius grid: {0}")]
    Grid(String),
}

/// Geometric grid of starting radii.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    /// Also sample the mirrored radii `-r`.
    pub both_signs: bool,
}

impl GridSpec {
    /// `[r_max / 1000, r_max]` with `r_max = min(0.05, δ/4)`.
    pub fn default_for(cyl: &CylinderEquation) -> Self {
        let r_max = (cyl.delta() / 4.0).min(0.05);
        Self {
            r_min: r_max * 1e-3,
            r_max,
            points: 24,
            both_signs: true,
        }
    }

    pub fn radii(&self) -> Result<Vec<f64>, DynamicsError> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.points >= 2) {
            return Err(DynamicsError::Grid(format!(
                "need 0 < r_min < r_max and at least 2 points, got [{}, {}] x {}",
                self.r_min, self.r_max, self.points
            )));
        }
        let ratio = (self.r_max / self.r_min).powf(1.0 / (self.points - 1) as f64);
        let pos: Vec<f64> = (0..self.points).map(|k| self.r_min * ratio.powi(k as i32)).collect();
        let mut out = pos.clone();
        if self.both_signs {
            out.extend(pos.iter().map(|r| -r));
        }
        Ok(out)
    }
}

/// Sign of `d` on one side of `r = 0`: `1`, `-1`, or `0` when mixed or
/// unresolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SignPattern {
    pub positive_side: i8,
    pub negative_side: i8,
}

impl SignPattern {
    /// Same sign on both sides: attracting on one side, repelling on the other.
    pub fn is_semistable(&self) -> bool {
        self.positive_side != 0 && self.positive_side == self.negative_side
    }

    /// Opposite signs on the two sides: `r = 0` attracts or repels from both.
    pub fn is_focus_like(&self) -> bool {
        self.positive_side != 0 && self.positive_side == -self.negative_side
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Multiplicity {
    /// `|d|` stayed within the noise floor: numeric evidence only.
    CenterLike { max_ratio: f64 },
    Estimated {
        m: i32,
        slope: f64,
        c: f64,
        /// Two-standard-error half width of `c` over the fitted samples.
        c_halfwidth: f64,
        samples: usize,
        /// Whether a parity law constrained the snap.
        parity_law: bool,
    },
}

impl Multiplicity {
    pub fn m(&self) -> Option<i32> {
        match self {
            Multiplicity::Estimated { m, .. } => Some(*m),
            Multiplicity::CenterLike { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoincareSample {
    pub r0: f64,
    pub pi: f64,
    pub dpi: f64,
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoincareData {
    pub samples: Vec<PoincareSample>,
    pub tolerances: Tolerances,
    pub sign_pattern: SignPattern,
    pub multiplicity: Result<Multiplicity, String>,
}

impl PoincareData {
    /// `(r0, Π, Π', d)` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.samples {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fraction of `|r0|` below which a trajectory of an irregular lift is
/// taken to have fallen into `r = 0`.
pub const COLLAPSE_RATIO: f64 = 1e-6;

/// `(Π(r0), Π'(r0))` with tolerances from the environment.
pub fn poincare_map(cyl: &CylinderEquation, r0: f64) -> Result<(f64, f64), DynamicsError> {
    poincare_map_with(cyl, r0, Tolerances::from_env())
}

/// Integrates `dr/dθ = 𝓕` and its variational equation over one period.
pub fn poincare_map_with(cyl: &CylinderEquation, r0: f64, tol: Tolerances) -> Result<(f64, f64), DynamicsError> {
    if r0 == 0.0 && cyl.is_regular() {
        return Ok((0.0, characteristic_exponent(cyl).exp()));
    }
    flow_to(cyl, r0, cyl.period(), tol)
}

/// `(r(θ_end), ∂r(θ_end)/∂r0)` for the solution with `r(0) = r0`.
///
/// In charts that are not analytic at `r = 0` a trajectory must keep the
/// sign of `r0`; reaching zero, or `|r| <= COLLAPSE_RATIO |r0|` where the
/// singular terms dominate, is reported as [`DynamicsError::Collapsed`].
pub fn flow_to(cyl: &CylinderEquation, r0: f64, theta_end: f64, tol: Tolerances) -> Result<(f64, f64), DynamicsError> {
    let delta = cyl.delta();
    let regular = cyl.is_regular();
    if r0.abs() >= delta || (!regular && r0 == 0.0) {
        return Err(DynamicsError::OutsideWindow { r0, delta });
    }
    let rhs = |th: f64, s: &[f64], ds: &mut [f64]| {
        let (f, df) = cyl.eval_with_dr(s[0], th);
        ds[0] = f;
        ds[1] = df * s[1];
    };
    let run = integrate(rhs, 0.0, &[r0, 1.0], theta_end, tol, |_, s| {
        s[0].abs() >= delta || (!regular && (s[0] * r0 <= 0.0 || s[0].abs() <= COLLAPSE_RATIO * r0.abs()))
    })
    .map_err(|source| DynamicsError::Integration { r0, source })?;
    if run.stopped {
        let (theta, r) = (run.t, run.y[0]);
        return Err(if r.abs() >= delta {
            DynamicsError::ExitWindow { r0, theta, r }
        } else {
            DynamicsError::Collapsed { r0, theta }
        });
    }
    Ok((run.y[0], run.y[1]))
}

/// Π at the given radii, evaluated concurrently.
pub fn sample_map(
    cyl: &CylinderEquation,
    radii: &[f64],
    tol: Tolerances,
) -> Result<Vec<PoincareSample>, DynamicsError> {
    radii
        .par_iter()
        .map(|&r0| {
            poincare_map_with(cyl, r0, tol).map(|(pi, dpi)| PoincareSample {
                r0,
                pi,
                dpi,
                d: pi - r0,
            })
        })
        .collect()
}

/// Displacement `d(r0) = Π(r0) - r0` over a grid, with the sign pattern and
/// a multiplicity estimate.
pub fn displacement_profile(cyl: &CylinderEquation, grid: &GridSpec) -> Result<PoincareData, DynamicsError> {
    displacement_profile_with(cyl, grid, Tolerances::from_env())
}

pub fn displacement_profile_with(
    cyl: &CylinderEquation,
    grid: &GridSpec,
    tol: Tolerances,
) -> Result<PoincareData, DynamicsError> {
    let samples = sample_map(cyl, &grid.radii()?, tol)?;
    let side = |positive: bool| -> i8 {
        let signs: Vec<f64> = samples
            .iter()
            .filter(|s| (s.r0 > 0.0) == positive && s.d.abs() > CENTER_FLOOR_FACTOR * tol.floor(s.r0))
            .map(|s| s.d.signum())
            .collect();
        if signs.is_empty() || signs.iter().any(|&v| v != signs[0]) {
            0
        } else {
            signs[0] as i8
        }
    };
    let sign_pattern = SignPattern {
        positive_side: side(true),
        negative_side: side(false),
    };
    let multiplicity = fit_multiplicity(&samples, cyl.chart(), tol).map_err(|e| e.to_string());
    Ok(PoincareData {
        samples,
        tolerances: tol,
        sign_pattern,
        multiplicity,
    })
}

/// `(m̂, ĉ)` of `d(r0) = ĉ r0^m̂ + ...` on the default grid.
pub fn estimate_multiplicity(cyl: &CylinderEquation) -> Result<Multiplicity, DynamicsError> {
    let tol = Tolerances::from_env();
    let grid = GridSpec {
        both_signs: false,
        ..GridSpec::default_for(cyl)
    };
    let samples = sample_map(cyl, &grid.radii()?, tol)?;
    fit_multiplicity(&samples, cyl.chart(), tol)
}

/// Parity constraint on the multiplicity for a chart, if one applies:
/// `Some(1)` for odd, `Some(0)` for even.
pub fn parity_law(chart: Chart) -> Option<i32> {
    match chart {
        Chart::Polar { .. } => Some(1),
        Chart::GenPolar { n } => Some((n % 2) as i32),
        Chart::Direct { .. } => None,
    }
}

/// Least-squares slope of `log|d|` against `log r0` over the smallest
/// positive radii above the noise floor, snapped to an admissible integer.
pub fn fit_multiplicity(
    samples: &[PoincareSample],
    chart: Chart,
    tol: Tolerances,
) -> Result<Multiplicity, DynamicsError> {
    let mut pos: Vec<&PoincareSample> = samples.iter().filter(|s| s.r0 > 0.0).collect();
    pos.sort_by(|a, b| a.r0.total_cmp(&b.r0));
    let max_ratio = pos.iter().map(|s| s.d.abs() / tol.floor(s.r0)).fold(0.0, f64::max);
    if max_ratio < CENTER_FLOOR_FACTOR {
        return Ok(Multiplicity::CenterLike { max_ratio });
    }
    let fit: Vec<&PoincareSample> = pos
        .into_iter()
        .filter(|s| s.d.abs() > FIT_FLOOR_FACTOR * tol.floor(s.r0))
        .take(FIT_POINTS)
        .collect();
    if fit.len() < 3 {
        return Err(DynamicsError::TooFewSamples { found: fit.len() });
    }
    let xs: Vec<f64> = fit.iter().map(|s| s.r0.ln()).collect();
    let ys: Vec<f64> = fit.iter().map(|s| s.d.abs().ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let law = parity_law(chart);
    let m = snap(slope, law).ok_or(DynamicsError::NonIntegerSlope { slope })?;
    let cs: Vec<f64> = fit.iter().map(|s| s.d / s.r0.powi(m)).collect();
    let c = cs.iter().sum::<f64>() / k;
    let var = cs.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / (k - 1.0);
    Ok(Multiplicity::Estimated {
        m,
        slope,
        c,
        c_halfwidth: 2.0 * (var / k).sqrt(),
        samples: fit.len(),
        parity_law: law.is_some(),
    })
}

fn snap(slope: f64, parity: Option<i32>) -> Option<i32> {
    let nearest = match parity {
        None => slope.round(),
        Some(p) => {
            // nearest integer congruent to p mod 2
            let shifted = (slope - p as f64) / 2.0;
            2.0 * shifted.round() + p as f64
        }
    };
    ((slope - nearest).abs() <= SLOPE_SNAP).then_some(nearest as i32)
}

/// `∫_0^T F_1(θ) dθ` with `F_1 = ∂𝓕/∂r (0, θ)` from Richardson-extrapolated
/// central differences and the periodic trapezoidal rule.
pub fn characteristic_exponent(cyl: &CylinderEquation) -> f64 {
    const NODES: usize = 1024;
    let period = cyl.period();
    let h = (cyl.delta() * 1e-3).min(1e-3);
    let sum: f64 = (0..NODES)
        .map(|k| f1_richardson(cyl, period * k as f64 / NODES as f64, h))
        .sum();
    sum * period / NODES as f64
}

/// `F_1(θ)` by central differences at `h` and `h/2` combined by Richardson.
pub fn f1_richardson(cyl: &CylinderEquation, theta: f64, h: f64) -> f64 {
    let central = |h: f64| (cyl.eval(h, theta) - cyl.eval(-h, theta)) / (2.0 * h);
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}
