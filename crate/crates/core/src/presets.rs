//! Named example systems with their known inverse integrating factors.

use std::collections::BTreeMap;

use crate::algebra::{parse_rational, Rational};
use crate::expr::{parse_system, ExprError, ParsedSystem};
use crate::iif::{IifCandidate, IifError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub system: &'static str,
    /// `name = value` bindings, values as exact rationals.
    pub params: &'static [(&'static str, &'static str)],
    pub iif: Option<&'static str>,
    pub summary: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "ex1",
        system: "x' = -y*((2*mu+1)*x^2 + y^2) + x^3*(l1*x^2 + l2*(x^2+y^2)); \
                 y' = x*(x^2 + (1-2*mu)*y^2) + x^2*y*(l1*x^2 + l2*(x^2+y^2))",
        params: &[("mu", "1/2"), ("l1", "1"), ("l2", "0")],
        iif: Some("exp(-2*mu*x^2/(x^2+y^2))*(x^2+y^2)^3"),
        summary: "degenerate focus, d = 3, non-analytic inverse integrating factor",
    },
    Preset {
        name: "ex2",
        system: "x' = -y*(x^2+y^2) + x*x^4; y' = x*(x^2+y^2) + y*x^4",
        params: &[],
        iif: Some("(x^2+y^2)^3"),
        summary: "degenerate focus with k = 1, s = 4, R = x^4",
    },
    Preset {
        name: "ex3",
        system: "x' = (x-y)*(x^2+y^2); y' = (x+y)*(x^2+y^2)",
        params: &[],
        iif: Some("(x^2+y^2)^2"),
        summary: "homogeneous cubic focus (same system as ejfd)",
    },
    Preset {
        name: "ex4",
        system: "x' = y + x*x^2; y' = -x^3 + 2*y*x^2",
        params: &[],
        iif: Some("(x^4 + 2*y^2)^(5/4)"),
        summary: "nilpotent, n = 2, R = x^2, m = 2",
    },
    Preset {
        name: "ex5",
        system: "x' = y - nu1*x^3; y' = -x^5 + nu2*x^2*y",
        params: &[("nu1", "1/10"), ("nu2", "1/10")],
        iif: Some("x^6 - (nu2 + 3*nu1)*x^3*y + 3*y^2"),
        summary: "quasihomogeneous nilpotent focus, n = 3",
    },
    Preset {
        name: "ejbh",
        system: "x' = -y + x*(x^2+y^2); y' = x + y*(x^2+y^2)",
        params: &[],
        iif: Some("(x^2+y^2)^2"),
        summary: "weak focus with r' = r^3",
    },
    Preset {
        name: "ejfd",
        system: "x' = (x-y)*(x^2+y^2); y' = (x+y)*(x^2+y^2)",
        params: &[],
        iif: Some("(x^2+y^2)^2"),
        summary: "homogeneous cubic focus with r' = r^3, θ' = r^2",
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

impl Preset {
    pub fn param_map(&self) -> BTreeMap<String, Rational> {
        self.params
            .iter()
            .map(|(k, v)| (k.to_string(), parse_rational(v).expect("preset parameter is rational")))
            .collect()
    }

    /// Parameters with some values replaced.
    pub fn param_map_with(&self, overrides: &BTreeMap<String, Rational>) -> BTreeMap<String, Rational> {
        let mut m = self.param_map();
        m.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
        m
    }

    pub fn parse(&self) -> Result<ParsedSystem, ExprError> {
        parse_system(self.system, &self.param_map())
    }

    pub fn candidate(&self) -> Option<Result<IifCandidate, IifError>> {
        self.iif.map(|t| IifCandidate::parse(t, self.param_map()))
    }
}

/// The perturbed homogeneous focus
/// `x' = (x-y)(x^2+y^2) - eps (x+y)`, `y' = (x+y)(x^2+y^2) + eps (x-y)`,
/// which has the invariant circle `x^2 + y^2 = eps`.
pub const EX3_FAMILY: &str = "x' = (x-y)*(x^2+y^2) - eps*(x+y); y' = (x+y)*(x^2+y^2) + eps*(x-y)";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_parse_with_candidates() {
        for p in PRESETS {
            let sys = p.parse().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            let again = parse_system(&sys.to_string(), &BTreeMap::new()).unwrap();
            assert_eq!((&again.p, &again.q), (&sys.p, &sys.q), "{}", p.name);
            p.candidate().unwrap().unwrap();
        }
    }
}
