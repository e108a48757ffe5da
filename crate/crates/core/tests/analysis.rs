use monodromy::algebra::parse_rational;
use monodromy::cylinder::Chart;
use monodromy::iif::{classify_and_bound, FocusEvidence, Verdict};
use monodromy::presets::{self, PRESETS};
use monodromy::report::{analyze, AnalysisReport, AnalyzeOptions, ChartChoice, MSource};

fn run(name: &str, with_iif: bool) -> AnalysisReport {
    let p = presets::find(name).unwrap();
    let opts = AnalyzeOptions {
        iif: if with_iif { p.iif.map(String::from) } else { None },
        params: p.param_map(),
        preset: Some(name.into()),
        ..Default::default()
    };
    analyze(p.system, &opts).unwrap()
}

fn focus(r: &AnalysisReport) -> (i32, i32, bool) {
    match r.verdict.verdict {
        Verdict::Focus {
            lower_bound,
            restricted_count,
            bound_is_exact,
        } => (lower_bound, restricted_count, bound_is_exact),
        ref v => panic!("expected a focus, got {v:?}"),
    }
}

#[test]
fn preset_verdicts() {
    // (name, m, lower bound, restricted count, exact)
    let expected: &[(&str, i32, i32, i32, bool)] = &[
        ("ex1", 3, 2, 1, false),
        ("ex2", 3, 2, 1, false),
        ("ex3", 1, 1, 0, false),
        ("ex4", 2, 1, 0, false),
        ("ex5", 1, 1, 0, false),
        ("ejbh", 3, 1, 1, true),
        ("ejfd", 1, 1, 0, false),
    ];
    for &(name, m, lb, rc, exact) in expected {
        let r = run(name, true);
        assert_eq!(r.m, Some(m), "{name}");
        assert_eq!(r.m_source, MSource::Iif);
        assert_eq!(focus(&r), (lb, rc, exact), "{name}");
        assert_eq!(r.exit_code(), 0);
        let iif = r.iif.as_ref().unwrap();
        assert!(iif.pde_passed, "{name}");
        assert!(iif.identity_residual.as_ref().unwrap().passed, "{name}");
        assert!(iif.v_m_consistency.as_ref().unwrap().passed, "{name}");
        // the displacement function alone agrees
        let d = run(name, false);
        assert_eq!(d.m, Some(m), "{name}");
        assert_eq!(d.m_source, MSource::Displacement);
        assert_eq!(d.verdict.verdict, r.verdict.verdict, "{name}");
    }
}

#[test]
fn every_preset_reports_a_focus() {
    for p in PRESETS {
        assert_eq!(run(p.name, true).exit_code(), 0, "{}", p.name);
    }
}

#[test]
fn nonpolynomial_leading_term_abstains() {
    // x² + y⁴ lifts to r² (Cs² + r² Sn⁴): the leading power of r depends on θ
    let p = presets::find("ejfd").unwrap();
    let opts = AnalyzeOptions {
        iif: Some("x^2 + y^4".into()),
        ..Default::default()
    };
    let r = analyze(p.system, &opts).unwrap();
    assert!(r.verdict.abstained() || !r.iif.as_ref().unwrap().pde_passed);
    assert_eq!(r.exit_code(), 2);
}

#[test]
fn wrong_candidate_fails_the_pde_and_abstains() {
    let p = presets::find("ejbh").unwrap();
    let opts = AnalyzeOptions {
        iif: Some("(x^2+y^2)^3".into()),
        params: p.param_map(),
        ..Default::default()
    };
    let r = analyze(p.system, &opts).unwrap();
    assert!(!r.iif.as_ref().unwrap().pde_passed);
    assert!(r.verdict.abstained());
    assert_eq!(r.exit_code(), 2);
}

#[test]
fn center_variant_abstains_without_candidate() {
    let p = presets::find("ex5").unwrap();
    let mut params = p.param_map();
    params.insert("nu2".into(), parse_rational("3/10").unwrap());
    let opts = AnalyzeOptions {
        params,
        ..Default::default()
    };
    let r = analyze(p.system, &opts).unwrap();
    assert_eq!(r.m, None);
    assert!(r.verdict.abstained());
    assert_eq!(r.exit_code(), 2);
}

#[test]
fn parity_laws() {
    let polar = Chart::Polar { d: 3 };
    let gen = Chart::GenPolar { n: 2 };
    let num = |m| FocusEvidence::Numeric { m_hat: m };
    assert_eq!(classify_and_bound(2, polar, num(2), false).verdict, Verdict::Center);
    assert_eq!(classify_and_bound(0, polar, num(0), false).verdict, Verdict::Center);
    assert_eq!(classify_and_bound(3, gen, num(3), false).verdict, Verdict::Center);
    assert!(matches!(
        classify_and_bound(4, gen, num(4), false).verdict,
        Verdict::Focus {
            lower_bound: 2,
            restricted_count: 1,
            ..
        }
    ));
    // polynomial candidate at a focus with even n
    assert!(matches!(
        classify_and_bound(4, gen, num(4), true).verdict,
        Verdict::Inconsistent { .. }
    ));
    // dynamic and algebraic multiplicities disagree
    assert!(matches!(
        classify_and_bound(3, polar, num(5), false).verdict,
        Verdict::Inconsistent { .. }
    ));
    assert!(classify_and_bound(3, polar, FocusEvidence::CenterLike, false).abstained());
    assert!(matches!(
        classify_and_bound(3, polar, FocusEvidence::Asserted, false).verdict,
        Verdict::Focus {
            lower_bound: 2,
            restricted_count: 1,
            bound_is_exact: false
        }
    ));
}

#[test]
fn json_is_deterministic() {
    let a = run("ex4", true).to_json();
    let b = run("ex4", true).to_json();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        [
            "tool",
            "tolerances",
            "input",
            "classification",
            "chart",
            "dynamics",
            "iif",
            "m",
            "m_source",
            "verdict",
            "bifurcation"
        ]
    );
    assert_eq!(v["tool"]["schema"], 1);
    assert_eq!(v["m"], 2);
    assert_eq!(v["verdict"]["verdict"]["kind"], "focus");
}

#[test]
fn direct_chart_on_example5() {
    let p = presets::find("ex5").unwrap();
    let opts = AnalyzeOptions {
        chart: Some(ChartChoice::Direct),
        params: p.param_map(),
        ..Default::default()
    };
    let r = analyze(p.system, &opts).unwrap();
    assert!(matches!(r.chart.chart, Chart::Direct { .. }));
    assert_eq!(r.m, Some(1));
    assert!(r.chart.notes.iter().any(|n| n.contains("backward time")));
}

#[test]
fn genpolar_request_needs_a_nilpotent_point() {
    let p = presets::find("ejfd").unwrap();
    let opts = AnalyzeOptions {
        chart: Some(ChartChoice::GenPolar),
        ..Default::default()
    };
    assert_eq!(analyze(p.system, &opts).unwrap_err().kind(), "usage");
}
