use std::collections::BTreeMap;
use std::f64::consts::PI;

use proptest::prelude::*;

use monodromy::algebra::Poly2;
use monodromy::cylinder::{lift_auto, CylinderEquation};
use monodromy::dynamics::poincare_map_with;
use monodromy::expr::{eval_and_grad, parse_expression};
use monodromy::expr::{parse_system, ParsedSystem};
use monodromy::gentrig;
use monodromy::monodromy::classify_singularity;
use monodromy::ode::Tolerances;
use monodromy::presets::{self, PRESETS};

fn lift(name: &str) -> CylinderEquation {
    let p = presets::find(name).unwrap();
    let sys = p.parse().unwrap();
    lift_auto(&sys, &classify_singularity(&sys).unwrap()).unwrap()
}

fn poly_strategy() -> impl Strategy<Value = Poly2> {
    // no constant term: the origin must be singular
    prop::collection::vec((0u32..5, 0u32..5, -20i64..20), 0..6).prop_map(|terms| {
        let terms: Vec<_> = terms
            .into_iter()
            .map(|(i, j, c)| if i + j == 0 { (1, 0, c) } else { (i, j, c) })
            .collect();
        Poly2::from_int_terms(&terms)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gentrig_relations(n in 1u32..=5, theta in -30.0f64..30.0) {
        let t = gentrig::table(n).unwrap();
        let period = t.period();
        let (c, s) = t.eval(theta);
        prop_assert!((c.powi(2 * n as i32) + f64::from(n) * s * s - 1.0).abs() < 1e-10);
        let (cp, sp) = t.eval(theta + period);
        prop_assert!((cp - c).abs() < 1e-10 && (sp - s).abs() < 1e-10);
        let (cm, sm) = t.eval(-theta);
        prop_assert!((cm - c).abs() < 1e-10 && (sm + s).abs() < 1e-10);
        let (ch, sh) = t.eval(theta + period / 2.0);
        prop_assert!((ch + c).abs() < 1e-10 && (sh + s).abs() < 1e-10);
        // Cs' = -Sn, Sn' = Cs^{2n-1}
        let h = 1e-5;
        let (c1, s1) = t.eval(theta + h);
        let (c0, s0) = t.eval(theta - h);
        prop_assert!(((c1 - c0) / (2.0 * h) + s).abs() < 1e-8);
        prop_assert!(((s1 - s0) / (2.0 * h) - c.powi(2 * n as i32 - 1)).abs() < 1e-8);
    }

    #[test]
    fn chart_symmetry_and_origin(r in -0.2f64..0.2, theta in 0.0f64..10.0, which in 0usize..7) {
        let c = lift(PRESETS[which].name);
        prop_assert!(c.symmetry_residual(&[(r, theta)]) < 1e-9 * (1.0 + c.eval(r, theta).abs()));
        prop_assert!(c.eval(0.0, theta).abs() < 1e-14);
        let t = c.period();
        prop_assert!((c.eval(r, theta + t) - c.eval(r, theta)).abs() < 1e-9);
    }

    #[test]
    fn derivative_of_map_matches_differences(r0 in 0.005f64..0.05, which in 0usize..7) {
        let c = lift(PRESETS[which].name);
        let tol = Tolerances::default();
        let h = 1e-5 * r0;
        let (_, dpi) = poincare_map_with(&c, r0, tol).unwrap();
        let (p1, _) = poincare_map_with(&c, r0 + h, tol).unwrap();
        let (p0, _) = poincare_map_with(&c, r0 - h, tol).unwrap();
        let fd = (p1 - p0) / (2.0 * h);
        prop_assert!((fd - dpi).abs() < 1e-5 * dpi.abs().max(1.0), "{} vs {}", fd, dpi);
    }

    #[test]
    fn system_print_parse_round_trip(p in poly_strategy(), q in poly_strategy()) {
        let sys = ParsedSystem::from_polys(p.clone(), q.clone()).unwrap();
        let text = sys.to_string();
        let again = parse_system(&text, &BTreeMap::new()).unwrap();
        prop_assert_eq!(&again.p, &p);
        prop_assert_eq!(&again.q, &q);
        prop_assert_eq!(again.to_string(), text);
    }

    #[test]
    fn expression_print_parse_round_trip(a in -5i32..5, b in 1i32..5, k in 1u32..4) {
        let text = format!("(({a})*x - y/{b})^{k}*exp(x*y) + (x^2 + {b}*y^2)^({k}/2)");
        let e = parse_expression(&text).unwrap();
        let again = parse_expression(&e.to_string()).unwrap();
        prop_assert_eq!(again.to_string(), e.to_string());
        for &(x, y) in &[(0.3, -0.2), (-0.7, 0.4)] {
            let params = BTreeMap::new();
            let v1 = eval_and_grad(&e, (x, y), &params).unwrap().0;
            let v2 = eval_and_grad(&again, (x, y), &params).unwrap().0;
            prop_assert!((v1 - v2).abs() <= 1e-12 * v1.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_matches_differences(x in -1.0f64..1.0, y in -1.0f64..1.0, a in -3i32..3, k in 1u32..4) {
        prop_assume!(x * x + y * y > 1e-2);
        let text = format!("exp(-({a})*x^2/(x^2+y^2))*(x^2+y^2)^({k}/2) + x^3*y - ({a})*y^2");
        let e = parse_expression(&text).unwrap();
        let params = BTreeMap::new();
        let (_, gx, gy) = eval_and_grad(&e, (x, y), &params).unwrap();
        let h = 1e-6;
        let f = |x: f64, y: f64| eval_and_grad(&e, (x, y), &params).unwrap().0;
        let fx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        let fy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
        prop_assert!((fx - gx).abs() < 1e-5 * (1.0 + gx.abs()), "{} vs {}", fx, gx);
        prop_assert!((fy - gy).abs() < 1e-5 * (1.0 + gy.abs()), "{} vs {}", fy, gy);
    }
}

/// Right-hand sides of both equations and the candidate of every preset.
fn preset_expressions() -> Vec<(
    String,
    monodromy::expr::ExprAst,
    BTreeMap<String, monodromy::algebra::Rational>,
)> {
    let mut out = Vec::new();
    for p in PRESETS {
        let mut texts: Vec<String> = p
            .system
            .split(';')
            .map(|stmt| stmt.split_once('=').unwrap().1.trim().to_string())
            .collect();
        texts.extend(p.iif.map(String::from));
        for t in texts {
            let e = parse_expression(&t).unwrap();
            out.push((format!("{}: {t}", p.name), e, p.param_map()));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn preset_gradients_match_differences(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        prop_assume!(x * x + y * y > 1e-4);
        for (name, e, params) in preset_expressions() {
            let (v, gx, gy) = eval_and_grad(&e, (x, y), &params).unwrap();
            let f = |x: f64, y: f64| eval_and_grad(&e, (x, y), &params).unwrap().0;
            // Richardson-extrapolated central differences, truncation O(h⁴), on a
            // stencil scaled with the distance to the origin, where V may be singular
            let h = 1e-3 * x.hypot(y);
            let central = |g: &dyn Fn(f64) -> f64, h: f64| (g(h) - g(-h)) / (2.0 * h);
            let rich = |g: &dyn Fn(f64) -> f64| (4.0 * central(g, h / 2.0) - central(g, h)) / 3.0;
            let along_x = |t: f64| f(x + t, y);
            let along_y = |t: f64| f(x, y + t);
            let fx = rich(&along_x);
            let fy = rich(&along_y);
            // relative to the gradient magnitude across the stencil (the exact
            // gradient can vanish at the centre), plus the round-off the
            // difference quotient itself carries
            let stencil = [(x - h, y), (x + h, y), (x, y - h), (x, y + h), (x, y)];
            let mut scale = v.abs() / x.hypot(y);
            let mut big = v.abs();
            for &(px, py) in &stencil {
                let (w, wx, wy) = eval_and_grad(&e, (px, py), &params).unwrap();
                scale = scale.max(wx.hypot(wy));
                big = big.max(w.abs());
            }
            let tol = 1e-6 * scale + 10.0 * f64::EPSILON * big / h;
            prop_assert!((fx - gx).abs() <= tol, "{}: ∂x {} vs {}", name, fx, gx);
            prop_assert!((fy - gy).abs() <= tol, "{}: ∂y {} vs {}", name, fy, gy);
        }
    }
}

#[test]
fn polar_chart_is_classical_trig() {
    let t = gentrig::table(1).unwrap();
    for k in 0..100 {
        let th = 2.0 * PI * k as f64 / 100.0;
        let (c, s) = t.eval(th);
        assert!((c - th.cos()).abs() < 1e-12 && (s - th.sin()).abs() < 1e-12);
    }
}
