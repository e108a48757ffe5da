//! Acceptance checks over the presets, each with pinned tolerances and a
//! runtime budget.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use serde::Serialize;

use crate::algebra::{parse_rational, NumPoly2, Rational};
use crate::bifurcation::{build_family, count_limit_cycles, Coefficients, FamilyParams, FamilyTag};
use crate::cylinder::{lift_auto, Chart, CylinderEquation};
use crate::dynamics::{self, Multiplicity};
use crate::expr::{parse_system, ParsedSystem};
use crate::gentrig::GenTrigTable;
use crate::iif::{
    check_poincare_identity, leading_coefficient, lift_iif, lifted_multiplicity, verify_iif_pde, IifCandidate,
    PdeResidual, Verdict,
};
use crate::monodromy::{classify_singularity, SingularityClass};
use crate::ode::Tolerances;
use crate::presets::{self, Preset, EX3_FAMILY};
use crate::report::{analyze, AnalyzeOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub status: Status,
    pub checks: Vec<Check>,
    pub runtime_s: f64,
    pub budget_s: f64,
}

impl CriterionResult {
    pub fn summary_line(&self) -> String {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        let failed: Vec<&str> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        let mut line = format!(
            "[{status}] criterion {}: {} ({:.3} s of {:.0} s budget)",
            self.id, self.title, self.runtime_s, self.budget_s
        );
        if !failed.is_empty() {
            line.push_str(&format!("; failed: {}", failed.join(", ")));
        }
        line
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SelftestOptions {
    /// Largest generalized trigonometric index exercised; criteria that
    /// need a larger one are skipped.
    pub n_max: u32,
    pub tol: Tolerances,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            n_max: 5,
            tol: Tolerances::from_env(),
        }
    }
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    /// `value <= limit`.
    fn below(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value <= limit, format!("{value:e} <= {limit:e}"));
    }

    fn fail(&mut self, name: &str, err: impl std::fmt::Display) {
        self.push(name, false, err.to_string());
    }
}

fn run(id: u8, title: &'static str, budget_s: f64, body: impl FnOnce(&mut Checks)) -> CriterionResult {
    let start = Instant::now();
    let mut checks = Checks::default();
    body(&mut checks);
    let runtime_s = start.elapsed().as_secs_f64();
    checks.push(
        "runtime",
        runtime_s < budget_s,
        format!("{runtime_s:.3} s < {budget_s} s"),
    );
    let status = if checks.0.iter().all(|c| c.passed) {
        Status::Pass
    } else {
        Status::Fail
    };
    CriterionResult {
        id,
        title,
        status,
        checks: checks.0,
        runtime_s,
        budget_s,
    }
}

fn skipped(id: u8, title: &'static str, budget_s: f64, reason: &str) -> CriterionResult {
    CriterionResult {
        id,
        title,
        status: Status::Skipped,
        checks: vec![Check {
            name: "skipped".into(),
            passed: true,
            detail: reason.into(),
        }],
        runtime_s: 0.0,
        budget_s,
    }
}

fn preset(name: &str) -> &'static Preset {
    presets::find(name).expect("preset exists")
}

struct Lifted {
    sys: ParsedSystem,
    class: SingularityClass,
    cyl: CylinderEquation,
    cand: Option<IifCandidate>,
}

fn lift_preset(p: &Preset, params: BTreeMap<String, Rational>) -> Result<Lifted, String> {
    let sys = parse_system(p.system, &params).map_err(|e| e.to_string())?;
    let class = classify_singularity(&sys).map_err(|e| e.to_string())?;
    let cyl = lift_auto(&sys, &class).map_err(|e| e.to_string())?;
    let cand = match p.iif {
        Some(t) => Some(IifCandidate::parse(t, params).map_err(|e| e.to_string())?),
        None => None,
    };
    Ok(Lifted { sys, class, cyl, cand })
}

/// Runs every criterion in order.
pub fn run_all(opts: &SelftestOptions) -> Vec<CriterionResult> {
    vec![
        criterion_gentrig(opts),
        criterion_ejbh(opts),
        criterion_ejfd(opts),
        criterion_example1(opts),
        criterion_example4(opts),
        criterion_example5(opts),
        criterion_parity(opts),
        criterion_cross_module(opts),
        criterion_determinism(opts),
    ]
}

pub fn all_passed(results: &[CriterionResult]) -> bool {
    results.iter().all(|r| r.status != Status::Fail)
}

/// Quasihomogeneous test polynomials of weights `2n` and `2n + 1`.
fn sign_law_polys(n: u32) -> Vec<(u32, NumPoly2)> {
    vec![
        (
            2 * n,
            NumPoly2 {
                terms: vec![(2 * n, 0, 1.0), (n, 1, -3.0), (0, 2, 0.5)],
            },
        ),
        (
            2 * n + 1,
            NumPoly2 {
                terms: vec![(2 * n + 1, 0, 2.0), (n + 1, 1, 1.5), (1, 2, -1.0)],
            },
        ),
    ]
}

pub fn criterion_gentrig(opts: &SelftestOptions) -> CriterionResult {
    run(1, "generalized trigonometric functions", 2.0, |c| {
        for n in 1..=opts.n_max.min(5) {
            let table = match GenTrigTable::build(n, opts.tol) {
                Ok(t) => t,
                Err(e) => return c.fail(&format!("n={n} table"), e),
            };
            let t = table.period();
            c.below(
                &format!("n={n} period vs return time"),
                (table.return_time() - t).abs(),
                1e-9,
            );
            let (mut fund, mut even, mut odd, mut half_c, mut half_s, mut law) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
            let polys = sign_law_polys(n);
            for k in 0..1000 {
                let th = t * k as f64 / 1000.0;
                let (cs, sn) = table.eval(th);
                let (cm, sm) = table.eval(-th);
                let (ch, sh) = table.eval(th + t / 2.0);
                fund = fund.max((cs.powi(2 * n as i32) + f64::from(n) * sn * sn - 1.0).abs());
                even = even.max((cm - cs).abs());
                odd = odd.max((sm + sn).abs());
                half_c = half_c.max((ch + cs).abs());
                half_s = half_s.max((sh + sn).abs());
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                let (cp, sp) = table.eval(sign * (th + t / 2.0));
                for (w, r) in &polys {
                    let expected = if w % 2 == 0 { 1.0 } else { -1.0 } * r.eval(cs, sn);
                    law = law.max((r.eval(cp, sp) - expected).abs());
                }
            }
            c.below(&format!("n={n} Cs^2n + n Sn^2 = 1"), fund, 1e-10);
            c.below(&format!("n={n} Cs even"), even, 1e-10);
            c.below(&format!("n={n} Sn odd"), odd, 1e-10);
            c.below(&format!("n={n} Cs half-period shift"), half_c, 1e-10);
            c.below(&format!("n={n} Sn half-period shift"), half_s, 1e-10);
            c.below(&format!("n={n} quasihomogeneous sign law"), law, 1e-9);
        }
    })
}

pub fn criterion_ejbh(opts: &SelftestOptions) -> CriterionResult {
    run(2, "ejbh closed-form oracle", 5.0, |c| {
        let l = match lift_preset(preset("ejbh"), BTreeMap::new()) {
            Ok(l) => l,
            Err(e) => return c.fail("lift", e),
        };
        let r0: f64 = 0.1;
        match dynamics::poincare_map_with(&l.cyl, r0, opts.tol) {
            Ok((pi, _)) => {
                let exact = r0 / (1.0 - 4.0 * PI * r0 * r0).sqrt();
                c.below("Π(0.1) vs r0/sqrt(1 - 4π r0²)", (pi - exact).abs(), 1e-7);
            }
            Err(e) => c.fail("Π(0.1)", e),
        }
        match dynamics::estimate_multiplicity(&l.cyl) {
            Ok(Multiplicity::Estimated { m, c: chat, .. }) => {
                c.push("m̂ = 3", m == 3, format!("m̂ = {m}"));
                c.below("ĉ within 1% of 2π", (chat / (2.0 * PI) - 1.0).abs(), 0.01);
            }
            other => c.fail("m̂", format!("{other:?}")),
        }
        let cand = l.cand.as_ref().expect("ejbh has a candidate");
        let lifted = lift_iif(cand, &l.cyl);
        match lifted_multiplicity(&lifted) {
            Ok(vm) => c.push("lifted V has m = 3", vm.m == 3, format!("m = {}", vm.m)),
            Err(e) => c.fail("lifted V", e),
        }
        let grid = dynamics::GridSpec::default_for(&l.cyl);
        match grid
            .radii()
            .map_err(|e| e.to_string())
            .and_then(|radii| check_poincare_identity(&lifted, &radii, opts.tol).map_err(|e| e.to_string()))
        {
            Ok(res) => c.below("V(Π, T) = V(r0, 0) Π' residual", res, 1e-8),
            Err(e) => c.fail("identity", e),
        }
    })
}

fn ex3_cycles(c: &mut Checks, eps_grid: &[f64], tol: Tolerances) {
    let base = match preset("ex3").parse() {
        Ok(b) => b,
        Err(e) => return c.fail("Example 3 base", e),
    };
    let fam = match build_family(
        FamilyTag::Custom {
            text: EX3_FAMILY.to_string(),
        },
        &base,
        FamilyParams {
            m: 1,
            coefficients: Coefficients::Constructive,
            tol,
        },
    ) {
        Ok(f) => f,
        Err(e) => return c.fail("Example 3 family", e),
    };
    for &eps in eps_grid {
        match count_limit_cycles(&fam, eps, None) {
            Ok(cc) => {
                let ok = cc.count() == 1 && cc.cycles[0].hyperbolic;
                c.push(
                    format!("ε={eps:e}: one hyperbolic cycle"),
                    ok,
                    format!("{} cycles", cc.count()),
                );
                if let Some(cy) = cc.cycles.first() {
                    c.below(
                        &format!("ε={eps:e}: radius vs √ε"),
                        (cy.radius / eps.sqrt() - 1.0).abs(),
                        1e-4,
                    );
                }
            }
            Err(e) => c.fail(&format!("ε={eps:e}"), e),
        }
    }
}

pub fn criterion_ejfd(opts: &SelftestOptions) -> CriterionResult {
    run(3, "ejfd and the Example 3 family", 10.0, |c| {
        let p = preset("ejfd");
        let l = match lift_preset(p, BTreeMap::new()) {
            Ok(l) => l,
            Err(e) => return c.fail("lift", e),
        };
        let cand = l.cand.as_ref().expect("ejfd has a candidate");
        match lifted_multiplicity(&lift_iif(cand, &l.cyl)) {
            Ok(vm) => c.push("m = 1 from lifted V0", vm.m == 1, format!("m = {}", vm.m)),
            Err(e) => c.fail("lifted V0", e),
        }
        let chi = dynamics::characteristic_exponent(&l.cyl);
        c.below("characteristic exponent = 2π", (chi - 2.0 * PI).abs(), 1e-6);
        let opts_a = AnalyzeOptions {
            iif: p.iif.map(String::from),
            tolerances: opts.tol,
            ..AnalyzeOptions::default()
        };
        match analyze(p.system, &opts_a) {
            Ok(r) => {
                let ok = matches!(
                    r.verdict.verdict,
                    Verdict::Focus {
                        lower_bound: 1,
                        restricted_count: 0,
                        ..
                    }
                );
                c.push(
                    "verdict focus, bound 1, restricted 0",
                    ok,
                    format!("{:?}", r.verdict.verdict),
                );
            }
            Err(e) => c.fail("analyze", e),
        }
        ex3_cycles(c, &[1e-2, 1e-3], opts.tol);
    })
}

pub fn criterion_example1(opts: &SelftestOptions) -> CriterionResult {
    run(4, "Example 1, non-analytic inverse integrating factor", 10.0, |c| {
        let p = preset("ex1");
        let l = match lift_preset(p, p.param_map()) {
            Ok(l) => l,
            Err(e) => return c.fail("lift", e),
        };
        let cand = l.cand.as_ref().expect("ex1 has a candidate");
        match verify_iif_pde(cand, &l.sys, true) {
            Ok(PdeResidual::Numeric { max_relative, .. }) => c.below("numeric PDE residual", max_relative, 1e-8),
            other => c.fail("numeric PDE residual", format!("{other:?}")),
        }
        let lifted = lift_iif(cand, &l.cyl);
        match lifted_multiplicity(&lifted) {
            Ok(vm) => {
                c.push("m = 3", vm.m == 3, format!("m = {}", vm.m));
                let mu = 0.5;
                let h = (l.cyl.delta() / 4.0).min(0.1) * 1e-3;
                let mut worst: f64 = 0.0;
                for k in 0..64 {
                    let th = l.cyl.period() * (k as f64 + 0.5) / 64.0;
                    match leading_coefficient(&|r, t| lifted.eval(r, t), 3, th, h) {
                        Ok(v) => worst = worst.max((v - (-2.0 * mu * th.cos().powi(2)).exp()).abs()),
                        Err(e) => return c.fail("v_3", e),
                    }
                }
                c.below("v_3(θ) = exp(-2μ cos²θ)", worst, 1e-5);
            }
            Err(e) => c.fail("lifted V", e),
        }
        let opts_a = AnalyzeOptions {
            iif: p.iif.map(String::from),
            params: p.param_map(),
            tolerances: opts.tol,
            ..AnalyzeOptions::default()
        };
        match analyze(p.system, &opts_a) {
            Ok(r) => {
                let ok = matches!(
                    r.verdict.verdict,
                    Verdict::Focus {
                        lower_bound,
                        restricted_count: 1,
                        ..
                    } if lower_bound >= 2
                );
                c.push("bound >= 2, restricted 1", ok, format!("{:?}", r.verdict.verdict));
            }
            Err(e) => c.fail("analyze", e),
        }
    })
}

pub fn criterion_example4(opts: &SelftestOptions) -> CriterionResult {
    let title = "Example 4, nilpotent n = 2 with m = 2";
    if opts.n_max < 2 {
        return skipped(5, title, 10.0, "needs n = 2");
    }
    run(5, title, 10.0, |c| {
        let p = preset("ex4");
        let l = match lift_preset(p, BTreeMap::new()) {
            Ok(l) => l,
            Err(e) => return c.fail("lift", e),
        };
        let n = match &l.class {
            SingularityClass::Nilpotent { report, .. } => report.n,
            _ => None,
        };
        c.push("Andreev number n = 2", n == Some(2), format!("{n:?}"));
        c.push(
            "generalized polar chart",
            l.cyl.chart() == Chart::GenPolar { n: 2 },
            format!("{:?}", l.cyl.chart()),
        );
        let mut worst: f64 = 0.0;
        for i in 1..=10 {
            for k in 0..50 {
                let r = 0.02 * f64::from(i) * if k % 2 == 0 { 1.0 } else { -1.0 };
                let th = l.cyl.period() * k as f64 / 50.0;
                let (cs, _) = l.cyl.table().eval(th);
                worst = worst.max((l.cyl.eval(r, th) - r * r * cs * cs).abs());
            }
        }
        c.below("𝓕 = r² Cs²θ", worst, 1e-9);
        match dynamics::displacement_profile_with(&l.cyl, &dynamics::GridSpec::default_for(&l.cyl), opts.tol) {
            Ok(data) => {
                let m = data.multiplicity.as_ref().ok().and_then(Multiplicity::m);
                c.push("m̂ = 2", m == Some(2), format!("{m:?}"));
                c.push(
                    "semistable sign pattern, d > 0 on both sides",
                    data.sign_pattern.is_semistable() && data.sign_pattern.positive_side == 1,
                    format!("{:?}", data.sign_pattern),
                );
            }
            Err(e) => c.fail("displacement", e),
        }
        let opts_a = AnalyzeOptions {
            iif: p.iif.map(String::from),
            tolerances: opts.tol,
            ..AnalyzeOptions::default()
        };
        match analyze(p.system, &opts_a) {
            Ok(r) => c.push(
                "no center verdict",
                !matches!(r.verdict.verdict, Verdict::Center),
                format!("{:?}", r.verdict.verdict),
            ),
            Err(e) => c.fail("analyze", e),
        }
    })
}

pub fn criterion_example5(opts: &SelftestOptions) -> CriterionResult {
    let title = "Example 5, quasihomogeneous nilpotent n = 3";
    if opts.n_max < 3 {
        return skipped(6, title, 15.0, "needs n = 3");
    }
    run(6, title, 15.0, |c| {
        let p = preset("ex5");
        let l = match lift_preset(p, p.param_map()) {
            Ok(l) => l,
            Err(e) => return c.fail("lift", e),
        };
        match &l.class {
            SingularityClass::Nilpotent { report, .. } => c.push(
                "monodromy inequalities",
                report.is_monodromic() && report.n == Some(3),
                format!("case {:?}, n {:?}, β {:?}", report.case, report.n, report.beta),
            ),
            other => c.fail("monodromy inequalities", format!("{other:?}")),
        }
        let cand = l.cand.as_ref().expect("ex5 has a candidate");
        match verify_iif_pde(cand, &l.sys, false) {
            Ok(PdeResidual::Symbolic { passed, residual }) => c.push("symbolic PDE check", passed, residual),
            other => c.fail("symbolic PDE check", format!("{other:?}")),
        }
        match lifted_multiplicity(&lift_iif(cand, &l.cyl)) {
            Ok(vm) => c.push("lifted V has m = 1", vm.m == 1, format!("m = {}", vm.m)),
            Err(e) => c.fail("lifted V", e),
        }
        match dynamics::displacement_profile_with(&l.cyl, &dynamics::GridSpec::default_for(&l.cyl), opts.tol) {
            Ok(d) => c.push(
                "ν2 ≠ 3ν1: one-signed displacement",
                d.sign_pattern.is_focus_like() && matches!(d.multiplicity, Ok(Multiplicity::Estimated { .. })),
                format!("{:?}", d.sign_pattern),
            ),
            Err(e) => c.fail("focus displacement", e),
        }
        let mut center = p.param_map();
        center.insert("nu2".into(), parse_rational("3/10").expect("rational"));
        match lift_preset(p, center) {
            Ok(lc) => {
                let grid = dynamics::GridSpec::default_for(&lc.cyl);
                match dynamics::displacement_profile_with(&lc.cyl, &grid, opts.tol) {
                    Ok(d) => {
                        let worst = d
                            .samples
                            .iter()
                            .map(|s| s.d.abs() / opts.tol.floor(s.r0))
                            .fold(0.0, f64::max);
                        c.below("ν2 = 3ν1: |d| / floor", worst, dynamics::CENTER_FLOOR_FACTOR);
                    }
                    Err(e) => c.fail("center displacement", e),
                }
            }
            Err(e) => c.fail("center lift", e),
        }
        let fam = build_family(
            FamilyTag::NilP1,
            &l.sys,
            FamilyParams {
                m: 1,
                coefficients: Coefficients::Constructive,
                tol: opts.tol,
            },
        );
        match fam {
            Ok(fam) => {
                for eps in [1e-2, 1e-3, 1e-4] {
                    match count_limit_cycles(&fam, eps, None) {
                        Ok(cc) => c.push(
                            format!("NilP1 ε={eps:e}: no cycles"),
                            cc.count() == 0,
                            format!("{}", cc.count()),
                        ),
                        Err(e) => c.fail(&format!("NilP1 ε={eps:e}"), e),
                    }
                }
            }
            Err(e) => c.fail("NilP1 family", e),
        }
    })
}

pub fn criterion_parity(opts: &SelftestOptions) -> CriterionResult {
    run(7, "parity laws and symmetric partners", 20.0, |c| {
        for p in presets::PRESETS {
            let l = match lift_preset(p, p.param_map()) {
                Ok(l) => l,
                Err(e) => {
                    c.fail(&format!("{} lift", p.name), e);
                    continue;
                }
            };
            if l.cyl.weight() > opts.n_max {
                continue;
            }
            let m_hat = match dynamics::estimate_multiplicity(&l.cyl) {
                Ok(Multiplicity::Estimated { m, .. }) => m,
                other => {
                    c.fail(&format!("{} m̂", p.name), format!("{other:?}"));
                    continue;
                }
            };
            let (law, ok) = match l.cyl.chart() {
                Chart::Polar { .. } => ("odd".to_string(), m_hat % 2 == 1),
                chart => {
                    let n = chart.weight() as i32;
                    (format!("≡ n = {n} mod 2"), (m_hat - n).rem_euclid(2) == 0)
                }
            };
            c.push(format!("{}: m̂ {law}", p.name), ok, format!("m̂ = {m_hat}"));
            let chi = dynamics::characteristic_exponent(&l.cyl);
            c.push(
                format!("{}: m̂ = 1 or |χ| <= 1e-6", p.name),
                m_hat == 1 || chi.abs() <= 1e-6,
                format!("m̂ = {m_hat}, χ = {chi:e}"),
            );
        }
        let runs: &[(&str, FamilyTag, i32, f64)] = &[
            (
                "ex3",
                FamilyTag::Custom {
                    text: EX3_FAMILY.to_string(),
                },
                1,
                1e-2,
            ),
            ("ejbh", FamilyTag::DegP1, 3, 1e-2),
            ("ejfd", FamilyTag::DegP2, 1, 1e-2),
            ("ex1", FamilyTag::DegP2, 3, 1e-2),
            ("ex5", FamilyTag::NilP2, 1, 1e-2),
        ];
        for (name, tag, m, eps) in runs {
            let p = preset(name);
            if matches!(tag, FamilyTag::NilP2) && opts.n_max < 3 {
                continue;
            }
            let res = p.parse().map_err(|e| e.to_string()).and_then(|sys| {
                let fam = build_family(
                    tag.clone(),
                    &sys,
                    FamilyParams {
                        m: *m,
                        coefficients: Coefficients::Constructive,
                        tol: opts.tol,
                    },
                )
                .map_err(|e| e.to_string())?;
                count_limit_cycles(&fam, *eps, None).map_err(|e| e.to_string())
            });
            match res {
                Ok(cc) => c.push(
                    format!("{name} {}: partners of {} cycles", tag.name(), cc.count()),
                    cc.count() > 0 && cc.partners_ok(),
                    format!(
                        "{:?}",
                        cc.cycles
                            .iter()
                            .map(|y| (y.radius, y.partner_found))
                            .collect::<Vec<_>>()
                    ),
                ),
                Err(e) => c.fail(&format!("{name} {}", tag.name()), e),
            }
        }
    })
}

pub fn criterion_cross_module(opts: &SelftestOptions) -> CriterionResult {
    run(8, "vanishing multiplicity agrees with the displacement", 20.0, |c| {
        for p in presets::PRESETS {
            let Some(iif) = p.iif else { continue };
            let opts_a = AnalyzeOptions {
                iif: Some(iif.to_string()),
                params: p.param_map(),
                tolerances: opts.tol,
                ..AnalyzeOptions::default()
            };
            let r = match analyze(p.system, &opts_a) {
                Ok(r) => r,
                Err(e) => {
                    c.fail(&format!("{} analyze", p.name), e);
                    continue;
                }
            };
            if r.chart.chart.weight() > opts.n_max {
                continue;
            }
            let rep = r.iif.as_ref().expect("candidate given");
            if !rep.pde_passed {
                c.fail(&format!("{} candidate verified", p.name), "PDE check failed");
                continue;
            }
            c.push(
                format!("{}: m = m̂", p.name),
                r.m.is_some() && r.m == r.dynamics.m_hat,
                format!("m = {:?}, m̂ = {:?}", r.m, r.dynamics.m_hat),
            );
            match &rep.v_m_consistency {
                Some(vm) => c.below(&format!("{}: v_m ODE residual", p.name), vm.value.ode_residual, 1e-5),
                None => c.fail(&format!("{}: v_m ODE residual", p.name), "not computed"),
            }
        }
    })
}

pub fn criterion_determinism(opts: &SelftestOptions) -> CriterionResult {
    run(9, "parser round trips and report determinism", 20.0, |c| {
        for p in presets::PRESETS {
            let params = p.param_map();
            match parse_system(p.system, &params) {
                Ok(sys) => {
                    let printed = sys.to_string();
                    let again = parse_system(&printed, &BTreeMap::new());
                    let ok = again
                        .as_ref()
                        .is_ok_and(|a| a.p == sys.p && a.q == sys.q && a.to_string() == printed);
                    c.push(format!("{}: parse-print round trip", p.name), ok, printed);
                }
                Err(e) => c.fail(&format!("{} parse", p.name), e),
            }
            let opts_a = AnalyzeOptions {
                iif: p.iif.map(String::from),
                params,
                preset: Some(p.name.to_string()),
                tolerances: opts.tol,
                ..AnalyzeOptions::default()
            };
            let a = analyze(p.system, &opts_a).map(|r| r.to_json());
            let b = analyze(p.system, &opts_a).map(|r| r.to_json());
            match (a, b) {
                (Ok(a), Ok(b)) => c.push(
                    format!("{}: byte-identical report", p.name),
                    a == b,
                    format!("{} bytes", a.len()),
                ),
                (Err(e), _) | (_, Err(e)) => c.fail(&format!("{} report", p.name), e),
            }
        }
    })
}
