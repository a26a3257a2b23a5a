//! Constructors for the explicit families: the counterexample separating
//! pointwise from classical regularity, the non-tempered log-power family and
//! the canonical set.

mod counterexample;
mod piecewise;

pub use counterexample::{
    classical_radii, drop_slope, make_example_510, make_x0_net, make_y_net, net_grid, verify_example_510,
    Branch, Example510Config, CounterexampleOracle, ExampleError, DROP_SLOPE_REL_TOL, M_CAP_MAX, N_CAP_MAX,
};
pub use piecewise::PiecewiseFamily;

use crate::classify::Verdict;
use crate::dsl::Family;

/// Source of the log-power family `(1+|x|²)^{log(1+|x|²)/log(1/ε)}`.
pub const LOG_POWER_SRC: &str = "(1+x1^2)^(log(1+x1^2)/log(1/eps))";

/// Moderate but not tempered: at `|x| = ε^{-m}` it exceeds `ε^{-m²}`.
pub fn make_prop34_family() -> Family {
    Family::parse("prop34", LOG_POWER_SRC, 1).expect("valid source")
}

/// Tests that carry an expected verdict in the canonical set.
pub const CANONICAL_TESTS: [&str; 6] =
    ["moderate", "tau", "schwartz", "slowscale_support", "slowscale_spectrum", "gs_infinity"];

/// A shipped family with its expected verdicts; `None` where a test does not apply.
#[derive(Clone, Debug)]
pub struct CanonicalFamily {
    pub name: &'static str,
    pub source: Option<&'static str>,
    pub description: &'static str,
    pub family: Family,
    pub expected: Vec<(&'static str, Option<Verdict>)>,
}

impl CanonicalFamily {
    pub fn expected(&self, test: &str) -> Option<Verdict> {
        self.expected.iter().find(|(t, _)| *t == test).and_then(|(_, v)| *v)
    }
}

/// Expected verdicts in the order of [`CANONICAL_TESTS`]: `P`ass, `F`ail, `-` not applicable.
fn vector(code: &str) -> Vec<(&'static str, Option<Verdict>)> {
    CANONICAL_TESTS
        .iter()
        .zip(code.chars())
        .map(|(&t, c)| {
            (
                t,
                match c {
                    'P' => Some(Verdict::Pass),
                    'F' => Some(Verdict::Fail),
                    _ => None,
                },
            )
        })
        .collect()
}

/// `(name, source, description, expected)` of the DSL-backed canonical families.
const DSL_FAMILIES: [(&str, &str, &str, &str); 8] = [
    ("bump", "bump(x1)", "fixed bump, ε-independent", "PPPPPP"),
    ("gauss", "gauss(x1)", "fixed Gaussian", "PPPPPP"),
    ("mollifier", "eps^-1*bump(x1/eps)", "mollifier ε^{-1}φ(x/ε)", "PPPPFF"),
    ("modulated_bump", "bump(x1)*exp(i*x1/eps)", "modulated bump φ(x)e^{ix/ε}", "PPPPFF"),
    ("oscillatory_bump", "bump(x1)*sin(x1/eps)", "oscillatory bump φ(x)sin(x/ε)", "PPPPFF"),
    ("shifted_gauss", "gauss(x1 - 1/eps)", "Gaussian centred at ε^{-1}", "PPPFPF"),
    ("x2", "x1^2", "polynomial x²", "PPFF--"),
    ("prop34", LOG_POWER_SRC, "log-power family, moderate but not tempered", "PFFF--"),
];

/// Names accepted by [`builtin`].
pub fn builtin_names() -> Vec<&'static str> {
    let mut v: Vec<&str> = DSL_FAMILIES.iter().map(|d| d.0).collect();
    v.push("example510");
    v
}

/// The canonical families with their expected verdict vectors.
pub fn canonical_families() -> Vec<CanonicalFamily> {
    let mut v: Vec<CanonicalFamily> = DSL_FAMILIES
        .iter()
        .map(|&(name, src, description, code)| CanonicalFamily {
            name,
            source: Some(src),
            description,
            family: Family::parse(name, src, 1).expect("valid source"),
            expected: vector(code),
        })
        .collect();
    let (f, _) = make_example_510(&Example510Config::default()).expect("default config");
    v.push(CanonicalFamily {
        name: "example510",
        source: None,
        description: "piecewise-in-ε family regular at 0 only in the pointwise sense",
        family: f,
        expected: vector("PPFF--"),
    });
    v
}

/// A canonical family by name.
pub fn builtin(name: &str) -> Option<CanonicalFamily> {
    if name == "example510" {
        return canonical_families().pop();
    }
    let &(name, src, description, code) = DSL_FAMILIES.iter().find(|d| d.0 == name)?;
    Some(CanonicalFamily {
        name,
        source: Some(src),
        description,
        family: Family::parse(name, src, 1).expect("valid source"),
        expected: vector(code),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{test_moderate, test_tau, Params};

    #[test]
    fn log_power_family_values() {
        let f = make_prop34_family();
        for eps in [2f64.powi(-6), 2f64.powi(-12)] {
            assert_eq!(f.value(eps, &[0.0]).unwrap().to_c64().re, 1.0);
            for m in 1..=3 {
                let v = f.value(eps, &[eps.powi(-m)]).unwrap().log_abs();
                assert!(v >= (m * m) as f64 * (1.0 / eps).ln());
            }
        }
    }

    #[test]
    fn log_power_family_is_moderate_not_tempered() {
        let f = make_prop34_family();
        let p = Params { k_max: 2, ..Params::default() };
        assert_eq!(test_moderate(&f, &p).unwrap().verdict, Verdict::Pass);
        assert_eq!(test_tau(&f, &p).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn canonical_set_is_complete() {
        let all = canonical_families();
        let names: Vec<&str> = all.iter().map(|c| c.name).collect();
        assert_eq!(names, builtin_names());
        for c in &all {
            assert_eq!(c.expected.len(), CANONICAL_TESTS.len());
            assert_eq!(builtin(c.name).unwrap().name, c.name);
        }
        assert!(builtin("nope").is_none());
        assert_eq!(builtin("modulated_bump").unwrap().expected("gs_infinity"), Some(Verdict::Fail));
        assert_eq!(builtin("shifted_gauss").unwrap().expected("slowscale_support"), Some(Verdict::Fail));
        assert_eq!(builtin("x2").unwrap().expected("gs_infinity"), None);
    }
}
