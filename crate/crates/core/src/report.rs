//! The analysis pipeline and its machine-readable report.
//!
//! JSON output is canonical: fields appear in declaration order and every
//! floating-point value is printed with 17 significant digits, so the same
//! input always produces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::algebra::Rational;
use crate::bifurcation::{Coefficients, FamilyTag, SweepTable};
use crate::cylinder::{direct_lift, lift_auto, polar_lift, Chart, CylinderEquation, CylinderError};
use crate::dynamics::{self, GridSpec, Multiplicity, PoincareData};
use crate::expr::{parse_system, ExprError, ParsedSystem};
use crate::iif::{
    check_poincare_identity, classify_and_bound, lift_iif, lifted_multiplicity, v_m_consistency, verify_iif_pde,
    CyclicityVerdict, FocusEvidence, IifCandidate, IifError, ParityRecord, PdeResidual, VanishingMultiplicity, Verdict,
    VmConsistency,
};
use crate::monodromy::{classify_singularity, MonodromyError, SingularityClass};
use crate::ode::Tolerances;

/// Report format version, bumped on any schema change.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "monodromy";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest accepted residual of `V(Π(r0), T) = V(r0, 0) Π'(r0)`.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;
/// Largest accepted relative residual of the numeric PDE check.
pub const PDE_TOLERANCE: f64 = 1e-8;
/// Largest accepted residual of `v_m' = (1 - m) F_1 v_m`.
pub const VM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("parse error: {0}")]
    Parse(#[from] ExprError),
    #[error("classification failed: {0}")]
    Monodromy(#[from] MonodromyError),
    #[error("lift failed: {0}")]
    Lift(#[from] CylinderError),
    #[error("inverse integrating factor: {0}")]
    Iif(#[from] IifError),
    #[error("displacement sampling failed: {0}")]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error("{0}")]
    Usage(String),
}

impl AnalysisError {
    /// Stable machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            AnalysisError::Parse(_) => "parse",
            AnalysisError::Monodromy(_) => "classification",
            AnalysisError::Lift(_) => "lift",
            AnalysisError::Iif(_) => "iif",
            AnalysisError::Dynamics(_) => "dynamics",
            AnalysisError::Usage(_) => "usage",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartChoice {
    Polar,
    GenPolar,
    Direct,
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeOptions {
    pub chart: Option<ChartChoice>,
    pub iif: Option<String>,
    pub params: BTreeMap<String, Rational>,
    pub preset: Option<String>,
    /// Take the origin to be a focus without numeric evidence.
    pub assert_focus: bool,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
    pub schema: u32,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: TOOL_NAME,
            version: TOOL_VERSION,
            schema: SCHEMA_VERSION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputEcho {
    pub preset: Option<String>,
    pub system: String,
    /// The system as parsed, expanded to polynomials.
    pub expanded: String,
    pub params: BTreeMap<String, String>,
    pub iif: Option<String>,
    pub chart_request: Option<ChartChoice>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartReport {
    pub chart: Chart,
    pub period: f64,
    /// Validity window `|r| < δ` of the lift.
    pub delta: f64,
    pub frame_steps: usize,
    /// `∫_0^T F_1`, the logarithm of `Π'(0)`.
    pub characteristic_exponent: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicsReport {
    pub grid: GridSpec,
    pub sign_pattern: dynamics::SignPattern,
    pub m_hat: Option<i32>,
    pub multiplicity: Option<Multiplicity>,
    pub multiplicity_error: Option<String>,
    /// `10 (atol + rtol |r|)` at the largest radius: the center-like threshold.
    pub center_threshold: f64,
    pub max_abs_displacement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Checked<T> {
    pub value: T,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IifReport {
    pub pde: Option<PdeResidual>,
    pub pde_passed: bool,
    pub multiplicity: Option<VanishingMultiplicity>,
    pub identity_residual: Option<Checked<f64>>,
    pub v_m_consistency: Option<Checked<VmConsistency>>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MSource {
    /// Vanishing multiplicity of the lifted inverse integrating factor.
    Iif,
    /// Dynamic estimate from the displacement function.
    Displacement,
    /// Given on the command line.
    User,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    pub tolerances: Tolerances,
    pub input: InputEcho,
    pub classification: SingularityClass,
    pub chart: ChartReport,
    pub dynamics: DynamicsReport,
    pub iif: Option<IifReport>,
    pub m: Option<i32>,
    pub m_source: MSource,
    pub verdict: CyclicityVerdict,
    pub bifurcation: Vec<SweepTable>,
    /// Displacement samples behind `dynamics`, written as CSV on request.
    #[serde(skip)]
    pub profile: PoincareData,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        canonical_json(self)
    }

    /// `0` on a verdict, `2` when the theory abstains or the evidence
    /// disagrees.
    pub fn exit_code(&self) -> i32 {
        match self.verdict.verdict {
            Verdict::Center | Verdict::Focus { .. } => 0,
            Verdict::Undecided { .. } | Verdict::Inconsistent { .. } => 2,
        }
    }
}

fn chart_for(
    sys: &ParsedSystem,
    class: &SingularityClass,
    choice: Option<ChartChoice>,
) -> Result<CylinderEquation, AnalysisError> {
    match choice {
        None => Ok(lift_auto(sys, class)?),
        Some(ChartChoice::Polar) => {
            let d = match class {
                SingularityClass::DegenerateNoCharDir { d, .. } => *d,
                _ => 1,
            };
            Ok(polar_lift(sys, d)?)
        }
        Some(ChartChoice::GenPolar) => match class {
            SingularityClass::Nilpotent { .. } => Ok(lift_auto(sys, class)?),
            _ => Err(AnalysisError::Usage(
                "the generalized polar chart needs a nilpotent point".into(),
            )),
        },
        Some(ChartChoice::Direct) => {
            let n = match class {
                SingularityClass::Nilpotent { report, .. } => report.n.unwrap_or(1),
                _ => 1,
            };
            Ok(direct_lift(sys, n)?)
        }
    }
}

fn abstain(m: i32, reason: String) -> CyclicityVerdict {
    CyclicityVerdict {
        m,
        verdict: Verdict::Undecided { reason },
        parity: ParityRecord {
            law: "not applied".into(),
            satisfied: false,
        },
        clause: "no verdict: the multiplicity of the inverse integrating factor is not available".into(),
    }
}

/// Runs classification, lift, displacement sampling, the optional inverse
/// integrating factor checks and the cyclicity verdict.
pub fn analyze(system_text: &str, opts: &AnalyzeOptions) -> Result<AnalysisReport, AnalysisError> {
    let tol = opts.tolerances;
    let sys = parse_system(system_text, &opts.params)?;
    let class = classify_singularity(&sys)?;
    let cyl = chart_for(&sys, &class, opts.chart)?;

    let mut notes = Vec::new();
    if let Chart::Direct { order0: true, .. } = cyl.chart() {
        notes.push("direct chart, order-0 angular speed".to_string());
    }
    if cyl.angular_sign() < 0.0 {
        notes.push("θ decreases along trajectories: the map follows increasing θ, i.e. backward time".to_string());
    }
    let chart = ChartReport {
        chart: cyl.chart(),
        period: cyl.period(),
        delta: cyl.delta(),
        frame_steps: cyl.frame().steps.len(),
        characteristic_exponent: dynamics::characteristic_exponent(&cyl),
        notes,
    };

    let grid = GridSpec::default_for(&cyl);
    let profile: PoincareData = dynamics::displacement_profile_with(&cyl, &grid, tol)?;
    let (multiplicity, multiplicity_error) = match &profile.multiplicity {
        Ok(m) => (Some(m.clone()), None),
        Err(e) => (None, Some(e.clone())),
    };
    let m_hat = multiplicity.as_ref().and_then(Multiplicity::m);
    let dyn_report = DynamicsReport {
        grid,
        sign_pattern: profile.sign_pattern,
        m_hat,
        multiplicity: multiplicity.clone(),
        multiplicity_error,
        center_threshold: dynamics::CENTER_FLOOR_FACTOR * tol.floor(grid.r_max),
        max_abs_displacement: profile.samples.iter().map(|s| s.d.abs()).fold(0.0, f64::max),
    };

    let evidence = if opts.assert_focus {
        FocusEvidence::Asserted
    } else {
        match &multiplicity {
            Some(Multiplicity::Estimated { m, .. }) => FocusEvidence::Numeric { m_hat: *m },
            Some(Multiplicity::CenterLike { .. }) => FocusEvidence::CenterLike,
            None => FocusEvidence::None,
        }
    };

    let mut iif_report = None;
    let (m, m_source, verdict) = if let Some(text) = &opts.iif {
        let cand = IifCandidate::parse(text, sys.params.clone())?;
        let mut rep = IifReport {
            pde: None,
            pde_passed: false,
            multiplicity: None,
            identity_residual: None,
            v_m_consistency: None,
            error: None,
        };
        match verify_iif_pde(&cand, &sys, false) {
            Ok(pde) => {
                rep.pde_passed = match &pde {
                    PdeResidual::Symbolic { passed, .. } => *passed,
                    PdeResidual::Numeric { max_relative, .. } => *max_relative <= PDE_TOLERANCE,
                };
                rep.pde = Some(pde);
            }
            Err(e) => rep.error = Some(e.to_string()),
        }
        let lifted = lift_iif(&cand, &cyl);
        let outcome = match lifted_multiplicity(&lifted) {
            Ok(vm) => {
                let radii: Vec<f64> = profile.samples.iter().map(|s| s.r0).collect();
                rep.identity_residual = check_poincare_identity(&lifted, &radii, tol).ok().map(|v| Checked {
                    value: v,
                    tolerance: IDENTITY_TOLERANCE,
                    passed: v <= IDENTITY_TOLERANCE,
                });
                rep.v_m_consistency = v_m_consistency(&lifted, vm.m).ok().map(|c| Checked {
                    passed: c.ode_residual <= VM_TOLERANCE,
                    value: c,
                    tolerance: VM_TOLERANCE,
                });
                let m = vm.m;
                rep.multiplicity = Some(vm);
                let v = if rep.pde_passed {
                    classify_and_bound(m, cyl.chart(), evidence, cand.is_polynomial())
                } else {
                    abstain(
                        m,
                        "the candidate does not satisfy the inverse integrating factor equation".into(),
                    )
                };
                (Some(m), MSource::Iif, v)
            }
            Err(e) => {
                rep.error = Some(e.to_string());
                (None, MSource::None, abstain(0, format!("no Laurent leading term: {e}")))
            }
        };
        iif_report = Some(rep);
        outcome
    } else if let Some(m) = m_hat {
        (
            Some(m),
            MSource::Displacement,
            classify_and_bound(m, cyl.chart(), evidence, false),
        )
    } else {
        let reason = match &multiplicity {
            Some(Multiplicity::CenterLike { .. }) => {
                "displacement is center-like and no inverse integrating factor was given"
            }
            _ => "no multiplicity available",
        };
        (None, MSource::None, abstain(0, reason.into()))
    };

    Ok(AnalysisReport {
        tool: ToolInfo::default(),
        tolerances: tol,
        input: InputEcho {
            preset: opts.preset.clone(),
            system: system_text.trim().to_string(),
            expanded: sys.to_string(),
            params: sys.params.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
            iif: opts.iif.clone(),
            chart_request: opts.chart,
        },
        classification: class,
        chart,
        dynamics: dyn_report,
        iif: iif_report,
        m,
        m_source,
        verdict,
        bifurcation: Vec::new(),
        profile,
    })
}

/// Summary of a `bifurcate` run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BifurcationReport {
    pub tool: ToolInfo,
    pub tolerances: Tolerances,
    pub system: String,
    pub family: FamilyTag,
    pub m: i32,
    pub m_source: MSource,
    pub coefficient_rule: Coefficients,
    /// Largest ε whose cycles fit four times inside the validity window.
    pub eps_max_admissible: Option<f64>,
    pub table: SweepTable,
}

impl BifurcationReport {
    pub fn to_json(&self) -> String {
        canonical_json(self)
    }
}

/// Pretty JSON with fields in declaration order and floats as `{:.16e}`.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize to JSON");
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    out
}

/// A float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n("  ", n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, indent + 1);
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&serde_json::to_string(k).expect("keys serialize"));
                out.push_str(": ");
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits_and_order_is_kept() {
        #[derive(Serialize)]
        struct S {
            z: f64,
            a: i32,
            m: Vec<f64>,
        }
        let s = canonical_json(&S {
            z: 0.1,
            a: 3,
            m: vec![1.0, -2.5e-300],
        });
        assert_eq!(
            s,
            "{\n  \"z\": 1.0000000000000001e-1,\n  \"a\": 3,\n  \"m\": [\n    1.0000000000000000e0,\n    -2.5000000000000000e-300\n  ]\n}\n"
        );
    }
}
