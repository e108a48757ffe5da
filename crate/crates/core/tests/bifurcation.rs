use std::collections::BTreeMap;

use monodromy::algebra::{parse_rational, Poly2};
use monodromy::bifurcation::{
    build_family, count_limit_cycles, sweep, Coefficients, FamilyParams, FamilyTag, PerturbationFamily,
};
use monodromy::expr::{parse_system, ParsedSystem};
use monodromy::ode::Tolerances;
use monodromy::presets::{self, EX3_FAMILY};

fn preset(name: &str) -> ParsedSystem {
    presets::find(name).unwrap().parse().unwrap()
}

fn family(tag: FamilyTag, name: &str, m: i32, coefficients: Coefficients) -> PerturbationFamily {
    build_family(
        tag,
        &preset(name),
        FamilyParams {
            m,
            coefficients,
            tol: Tolerances::default(),
        },
    )
    .unwrap()
}

fn ex3() -> PerturbationFamily {
    family(
        FamilyTag::Custom {
            text: EX3_FAMILY.into(),
        },
        "ex3",
        1,
        Coefficients::Constructive,
    )
}

#[test]
fn empty_families_leave_the_base_unchanged() {
    for (tag, name, m) in [(FamilyTag::DegP1, "ejfd", 1), (FamilyTag::NilP1, "ex5", 1)] {
        let fam = family(tag, name, m, Coefficients::Alternating);
        assert_eq!(fam.terms, 0);
        let base = fam.perturbed(0.0).unwrap();
        assert_eq!(fam.perturbed(0.3).unwrap(), base);
    }
}

#[test]
fn degp2_on_ejfd_has_one_term() {
    let fam = family(
        FamilyTag::DegP2,
        "ejfd",
        1,
        Coefficients::Explicit { values: vec![2.0] },
    );
    assert_eq!(fam.terms, 1);
    // x' gains b0 ε x and y' gains b0 ε y
    let (p0, q0) = family(
        FamilyTag::DegP2,
        "ejfd",
        1,
        Coefficients::Explicit { values: vec![0.0] },
    )
    .perturbed(0.1)
    .unwrap();
    let (p, q) = fam.perturbed(0.1).unwrap();
    for &(x, y) in &[(0.3, 0.1), (-0.2, 0.5)] {
        assert!((p.eval(x, y) - p0.eval(x, y) - 0.2 * x).abs() < 1e-15);
        assert!((q.eval(x, y) - q0.eval(x, y) - 0.2 * y).abs() < 1e-15);
    }
}

#[test]
fn example3_family_has_invariant_circle() {
    let mut params = BTreeMap::new();
    params.insert("eps".to_string(), parse_rational("1/100").unwrap());
    let sys = parse_system(EX3_FAMILY, &params).unwrap();
    // d/dt (x² + y² - ε) = 2 (x² + y²)(x² + y² - ε)
    let f = &(&Poly2::x() * &Poly2::x()) + &(&Poly2::y() * &Poly2::y());
    let lhs = &(&sys.p * &f.dx()) + &(&sys.q * &f.dy());
    let circle = &f - &Poly2::constant(parse_rational("1/100").unwrap());
    let two_f = f.scale(&parse_rational("2").unwrap());
    assert_eq!(lhs, &two_f * &circle);
}

#[test]
fn example3_family_cycle_at_sqrt_eps() {
    let fam = ex3();
    for eps in [1e-2, 1e-3, 1e-4] {
        let cc = count_limit_cycles(&fam, eps, None).unwrap();
        assert_eq!(cc.count(), 1, "ε = {eps}");
        let c = &cc.cycles[0];
        assert!((c.radius / eps.sqrt() - 1.0).abs() < 1e-6, "ε = {eps}: {}", c.radius);
        assert!(c.hyperbolic);
        // d'(r*) = e^{2π} - 1 on the invariant circle
        assert!((c.d_prime / ((2.0 * std::f64::consts::PI).exp() - 1.0) - 1.0).abs() < 1e-6);
        assert!((c.partner_found.unwrap() + c.radius).abs() < 1e-9);
    }
    assert_eq!(count_limit_cycles(&fam, 0.0, None).unwrap().count(), 0);
}

#[test]
fn degp1_constructive_coefficient_for_ejbh() {
    // r' = r³ needs a0 = -1 for r' = r³ - ε r
    let fam = family(FamilyTag::DegP1, "ejbh", 3, Coefficients::Constructive);
    assert!((fam.coefficients[0] + 1.0).abs() < 1e-3);
}

#[test]
fn degp2_on_ejfd_attains_the_bound() {
    let fam = family(FamilyTag::DegP2, "ejfd", 1, Coefficients::Constructive);
    assert!(fam.coefficients[0] < 0.0, "opposite to the repelling focus");
    let table = sweep(&fam, &[1e-2, 1e-3, 1e-4], None).unwrap();
    assert!(table.rows.iter().all(|r| r.count >= 1 && r.window_ok && r.partners_ok));
    assert!(table.continuous);
}

#[test]
fn restricted_families_respect_the_bound() {
    let fam = family(FamilyTag::NilP1, "ex5", 1, Coefficients::Constructive);
    let table = sweep(&fam, &[1e-2, 1e-3, 1e-4], None).unwrap();
    assert!(table.rows.iter().all(|r| r.count == 0 && !r.exceeds_bound));
    let fam = family(FamilyTag::DegP1, "ex1", 3, Coefficients::Constructive);
    let table = sweep(&fam, &[1e-2, 1e-3], None).unwrap();
    assert!(table.rows.iter().all(|r| r.count == 1 && !r.exceeds_bound));
}

#[test]
fn degp2_on_example1_gives_two_cycles() {
    // (m + d)/2 - 1 = 2 for m = d = 3
    let fam = family(FamilyTag::DegP2, "ex1", 3, Coefficients::Constructive);
    let cc = count_limit_cycles(&fam, 1e-2, None).unwrap();
    assert_eq!(cc.count(), 2);
    assert!(cc.cycles.iter().all(|c| c.hyperbolic && c.partner_found.is_some()));
    assert!(
        cc.cycles[0].d_prime * cc.cycles[1].d_prime < 0.0,
        "alternating stability"
    );
}

#[test]
fn sweep_csv_columns() {
    let table = sweep(&ex3(), &[1e-2, 1e-3], None).unwrap();
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eps,cycle_count,radius_1");
    assert!(lines[1].starts_with("1.0000000000000000e-2,1,9.99999"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn empty_grid_is_an_error() {
    assert!(sweep(&ex3(), &[], None).is_err());
}
