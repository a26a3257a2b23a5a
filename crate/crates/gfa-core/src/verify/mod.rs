//! Named test dispatch and the acceptance battery.

pub mod corpus;

use crate::classify::{
    ak_sequence, default_radii, test_classical_regular, test_compactum, test_convexity, test_invertible,
    test_moderate, test_negligible, test_pointstar_regular, test_schwartz, test_slowscale_support, test_tau,
    sup_on_region, sweep, ClassifyError, Params, Region, Report, Verdict,
};
use crate::dsl::{Family, FamilyKind};
use crate::examples::{
    builtin, canonical_families, make_example_510, make_prop34_family, verify_example_510, Branch,
    Example510Config, CounterexampleOracle, ExampleError, CANONICAL_TESTS,
};
use crate::fourier::{
    dft_family, inverse_dft, pairing, parseval_check, test_gs_infinity, test_slowscale_spectrum,
    test_tempered_equality, window, FourierError, FourierParams, TestFunction,
};
use crate::scale::{fit_exponent, interleave, EpsGrid, ExactScalar, Idempotent, Scalar, Term};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::time::Instant;
use thiserror::Error;

/// Tests accepted by [`run_test`].
pub const TEST_NAMES: [&str; 10] = [
    "moderate",
    "negligible",
    "tau",
    "schwartz",
    "slowscale_support",
    "invertible",
    "slowscale_spectrum",
    "gs_infinity",
    "tempered_equality",
    "regularity-suite",
];

#[derive(Debug, Error)]
pub enum RunError {
    #[error("unknown test {0:?}")]
    UnknownTest(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Example(#[from] ExampleError),
}

/// Runs one registered test.
pub fn run_test(name: &str, f: &Family, p: &Params, fp: &FourierParams) -> Result<Report, RunError> {
    Ok(match name {
        "moderate" => test_moderate(f, p)?,
        "negligible" => {
            let m = test_moderate(f, p)?;
            if !m.passed() {
                let mut r = Report::new("negligible", Verdict::Fail).witness("moderate", json!(m.verdict));
                r.sub_reports.push(m);
                return Ok(r);
            }
            test_negligible(f, p, &m)?
        }
        "tau" => test_tau(f, p)?,
        "schwartz" => test_schwartz(f, p)?,
        "slowscale_support" => test_slowscale_support(f, p)?,
        "invertible" => test_invertible(f, p)?,
        "slowscale_spectrum" => test_slowscale_spectrum(f, p, fp)?,
        "gs_infinity" => test_gs_infinity(f, p, fp)?,
        "tempered_equality" => test_tempered_equality(f, p, fp)?,
        "regularity-suite" => regularity_suite(f, p)?,
        _ => return Err(RunError::UnknownTest(name.into())),
    })
}

/// The example family runs its own claims; any other family is examined at
/// the origin, where `Ġ∞` and `G∞` should agree.
fn regularity_suite(f: &Family, p: &Params) -> Result<Report, RunError> {
    if f.kind == FamilyKind::Piecewise && f.name == "example510" {
        let config = Example510Config { m_cap: Example510Config::default().m_cap.min(p.k_max.saturating_sub(1)), ..Default::default() };
        let mut r = verify_example_510(&config, p)?;
        r.diagnostics.insert("m_cap".into(), json!(config.m_cap));
        return Ok(r);
    }
    let x0 = vec![0.0; f.dim()];
    let a = ak_sequence(f, &x0, p.k_max, &default_radii(), p)?;
    let star = test_pointstar_regular(&a);
    let classical = test_classical_regular(f, &x0, p.k_max, &default_radii(), p)?;
    let conv = test_convexity(&a);
    let v = match (star.verdict, classical.verdict) {
        (a, b) if a == b => a,
        _ => Verdict::Inconclusive,
    };
    let mut r = Report::new("regularity_suite", v)
        .witness("pointstar_regular", json!(star.verdict))
        .witness("classical_regular", json!(classical.verdict))
        .witness("convexity", json!(conv.verdict))
        .diag("x0", json!(x0));
    r.sub_reports = vec![star, classical, conv];
    Ok(r)
}

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    /// One-line summary of the measured quantities.
    pub summary: String,
    pub details: Value,
    /// Wall-clock seconds; kept out of the serialized report.
    #[serde(skip)]
    pub seconds: f64,
}

/// Identifiers of the battery criteria, in run order.
pub const CRITERIA: [(&str, &str); 12] = [
    ("exact_layer", "exact-layer laws on 10,000 random triples"),
    ("valuation_fit", "valuation estimator on 50 exact scalars"),
    ("log_power", "log-power family: moderate, not tempered"),
    ("hierarchy", "hierarchy and expected verdicts on the canonical set"),
    ("counterexample", "counterexample: derivative oracle and regularity claims"),
    ("convexity", "convexity of -a_k after a drop"),
    ("compacta", "pointwise and classical regularity agree at classical points"),
    ("fourier_engine", "Parseval, inversion and Gaussian transform"),
    ("gs_infinity", "slow-scale support and spectrum"),
    ("tempered_equality", "pairing negligibility agrees with spectral vanishing"),
    ("dsl", "grammar round trip and symbolic derivatives"),
    ("battery", "deterministic battery within the time budget"),
];

/// Tolerances pinned by the battery.
pub mod tol {
    pub const VALUATION: f64 = 0.05;
    pub const VALUATION_LOG: f64 = 0.1;
    pub const EX510_QUADRATURE: f64 = 1e-6;
    pub const EX510_SLOPE_REL: f64 = crate::examples::DROP_SLOPE_REL_TOL;
    pub const CONVEXITY: f64 = 0.15;
    pub const PARSEVAL: f64 = 1e-8;
    pub const INVERSION: f64 = 1e-7;
    pub const GAUSS_TRANSFORM: f64 = 1e-8;
    pub const PEAK_LO: f64 = 0.9;
    pub const PEAK_HI: f64 = 1.1;
    pub const PAIRING_SLOPE: f64 = 8.0;
    pub const BATTERY_SECONDS: f64 = 600.0;
}

/// Parameters of the membership runs in the battery.
pub fn battery_params() -> Params {
    Params { k_max: 4, m_max: 4, points: 2049, ..Params::default() }
}

/// Reduced parameters for the spectral tests.
pub fn fourier_params() -> (Params, FourierParams) {
    (
        Params { k_max: 2, m_max: 3, points: 1025, refine_rounds: 2, grid: EpsGrid::dyadic(4, 16), ..Params::default() },
        FourierParams::default(),
    )
}

fn criterion(id: &'static str, passed: bool, summary: String, details: Value) -> Criterion {
    let title = CRITERIA.iter().find(|c| c.0 == id).map_or("", |c| c.1);
    Criterion { id, title, passed, summary, details, seconds: 0.0 }
}

fn err(id: &'static str, e: impl std::fmt::Display) -> Criterion {
    criterion(id, false, format!("error: {e}"), Value::Null)
}

fn random_scalar(rng: &mut ChaCha8Rng) -> ExactScalar {
    let n = rng.gen_range(0..5);
    let terms = (0..n)
        .map(|_| Term::new(rng.gen_range(-4i32..=4) as f64, rng.gen_range(-8i32..=8) as f64 / 4.0, rng.gen_range(-2..=2)))
        .collect();
    ExactScalar::normalize(terms).expect("finite terms")
}

/// Ultrametric inequality, valuation additivity, distributivity and the
/// idempotent laws, all with zero tolerance.
pub fn exact_layer(triples: usize) -> Criterion {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = EpsGrid::default();
    let mut violations: Vec<String> = Vec::new();
    for i in 0..triples {
        let (a, b, c) = (random_scalar(&mut rng), random_scalar(&mut rng), random_scalar(&mut rng));
        let s = &a + &b;
        if s.sharp_norm() > a.sharp_norm().max(b.sharp_norm()) || s.valuation() < a.valuation().min(b.valuation()) {
            violations.push(format!("ultrametric #{i}"));
        }
        if !a.is_zero() && !b.is_zero() && (&a * &b).valuation() != a.valuation() + b.valuation() {
            violations.push(format!("valuation #{i}"));
        }
        if &a * &(&b + &c) != &(&a * &b) + &(&a * &c) {
            violations.push(format!("distributivity #{i}"));
        }
        let e = Idempotent::Mask((0..g.len()).map(|_| rng.gen_bool(0.5)).collect());
        let es = e.as_sampled(&g);
        let ec = e.complement().as_sampled(&g);
        let sa = a.sample(&g);
        let sb = b.sample(&g);
        let mixed = interleave(&Scalar::Sampled(sa.clone()), &Scalar::Sampled(sb.clone()), &e);
        let direct = sa.mul(&ec).and_then(|x| sb.mul(&es).and_then(|y| x.add(&y)));
        let ok = es.mul(&es).ok() == Some(es.clone())
            && es.mul(&ec).is_ok_and(|z| z.values.iter().all(|v| *v == Complex64::new(0.0, 0.0)))
            && es.add(&ec).is_ok_and(|o| o.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)))
            && matches!((mixed, direct), (Ok(Scalar::Sampled(m)), Ok(d)) if m == d);
        if !ok {
            violations.push(format!("idempotent #{i}"));
        }
    }
    criterion(
        "exact_layer",
        violations.is_empty(),
        format!("{triples} triples, {} violations", violations.len()),
        json!({"triples": triples, "violations": violations.iter().take(10).collect::<Vec<_>>()}),
    )
}

/// Fitted slope against the exact valuation for sampled exact scalars.
pub fn valuation_fit(count: usize) -> Criterion {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = EpsGrid::default();
    let (mut worst, mut worst_log): (f64, f64) = (0.0, 0.0);
    for i in 0..count {
        let a = rng.gen_range(-8i32..=8) as f64 / 4.0;
        let c = rng.gen_range(1..=4) as f64;
        let b = if i % 2 == 0 { 0 } else if rng.gen_bool(0.5) { 1 } else { -1 };
        let x = ExactScalar::monomial(c, a, b) + ExactScalar::monomial(rng.gen_range(-3i32..=3) as f64, a + 0.75, 0);
        let Ok(fit) = fit_exponent(&x.sample(&g)) else { return err("valuation_fit", "fit failed") };
        let d = (fit.slope - x.valuation()).abs();
        if b == 0 {
            worst = worst.max(d);
        } else {
            worst_log = worst_log.max(d);
        }
    }
    criterion(
        "valuation_fit",
        worst <= tol::VALUATION && worst_log <= tol::VALUATION_LOG,
        format!("max |slope - v| = {worst:.4} (plain), {worst_log:.4} (log factor)"),
        json!({"count": count, "max_error": worst, "max_error_log": worst_log}),
    )
}

/// Ball-`m` order-0 exponents at most `-m²`, moderate, not tempered with
/// superlinear `-e(m)/m`.
pub fn log_power() -> Criterion {
    let f = make_prop34_family();
    let p = battery_params();
    let run = || -> Result<Criterion, ClassifyError> {
        let mut exps = Vec::new();
        for m in 1..=3 {
            let fit = sweep(&f, &p, |e| sup_on_region(&f, &[0], e, &Region::Ball { m: m as f64 }, &p))?;
            exps.push(fit.exponent());
        }
        let bound_ok = exps.iter().enumerate().all(|(i, &e)| e <= -(((i + 1) * (i + 1)) as f64));
        let moderate = test_moderate(&f, &p)?;
        let tau = test_tau(&f, &p)?;
        let q: Vec<f64> = exps.iter().enumerate().map(|(i, e)| -e / (i + 1) as f64).collect();
        let superlinear = q.windows(2).all(|w| w[1] > w[0] + 0.5);
        let passed = bound_ok && moderate.passed() && tau.verdict == Verdict::Fail && superlinear;
        Ok(criterion(
            "log_power",
            passed,
            format!("e(m) = {:?}, moderate {}, tau {}", round(&exps), moderate.verdict, tau.verdict),
            json!({"exponents": exps, "neg_e_over_m": q, "moderate": moderate.verdict, "tau": tau.verdict,
                   "tau_witness": tau.witnesses.get("violating")}),
        ))
    };
    run().unwrap_or_else(|e| err("log_power", e))
}

fn round(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

/// Measured verdict vector of a canonical family.
pub fn measure_family(f: &Family, tests: &[&str], quick: bool) -> Vec<(String, Result<Verdict, String>)> {
    let (pf, mut fp) = fourier_params();
    let p = if quick { pf.clone() } else { battery_params() };
    if quick {
        fp.grid = EpsGrid::dyadic(4, 12);
    }
    tests
        .iter()
        .map(|&t| {
            let params = if matches!(t, "slowscale_spectrum" | "gs_infinity") { &pf } else { &p };
            (t.to_string(), run_test(t, f, params, &fp).map(|r| r.verdict).map_err(|e| e.to_string()))
        })
        .collect()
}

/// Every canonical verdict matches its annotation, and the measured
/// verdicts respect slow-scale support ⇒ Schwartz ⇒ τ ⇒ moderate.
pub fn hierarchy(names: Option<&[&str]>) -> Criterion {
    let quick = names.is_some();
    let mut mismatches = Vec::new();
    let mut violations = Vec::new();
    let mut table = serde_json::Map::new();
    for c in canonical_families() {
        if names.is_some_and(|n| !n.contains(&c.name)) {
            continue;
        }
        let tests: Vec<&str> = CANONICAL_TESTS.iter().copied().filter(|t| c.expected(t).is_some()).collect();
        let got = measure_family(&c.family, &tests, quick);
        let pass = |t: &str| got.iter().find(|g| g.0 == t).map(|g| g.1 == Ok(Verdict::Pass));
        let chain = ["slowscale_support", "schwartz", "tau", "moderate"];
        for w in chain.windows(2) {
            if pass(w[0]) == Some(true) && pass(w[1]) == Some(false) {
                violations.push(format!("{}: {} without {}", c.name, w[0], w[1]));
            }
        }
        let mut row = serde_json::Map::new();
        for (t, v) in &got {
            let want = c.expected(t);
            let shown = match v {
                Ok(v) => v.to_string(),
                Err(e) => format!("error: {e}"),
            };
            if v.as_ref().ok() != want.as_ref() {
                mismatches.push(format!("{}/{t}: {shown}, expected {}", c.name, want.map_or("-".into(), |w| w.to_string())));
            }
            row.insert(t.clone(), json!(shown));
        }
        table.insert(c.name.into(), Value::Object(row));
    }
    criterion(
        "hierarchy",
        mismatches.is_empty() && violations.is_empty(),
        format!("{} families, {} mismatches, {} chain violations", table.len(), mismatches.len(), violations.len()),
        json!({"measured": table, "mismatches": mismatches, "violations": violations}),
    )
}

/// Closed form vs quadrature for `m ≤ 3, n ≤ 8, k ≤ 6`; the regularity
/// claims and drop slopes.
pub fn counterexample() -> Criterion {
    let config = Example510Config::default();
    let oracle = CounterexampleOracle { config: config.clone() };
    let mut worst: f64 = 0.0;
    for m in 1..=3 {
        for n in 1..=8 {
            let b = Branch::new(m, n);
            let delta = Example510Config::delta(m, n);
            for k in 0..=6 {
                for sigma in [-0.75, -0.3, 0.3, 0.75, 2.5] {
                    // D^k u · δ^{k+1-m}, formed in log space.
                    let v = b.eval(k, sigma * delta)
                        * crate::Ext::from_log(
                            (k as f64 + 1.0 - m as f64) * -(Example510Config::delta_exponent(m, n) as f64) * std::f64::consts::LN_2,
                        );
                    let got = v.as_real().unwrap_or(f64::NAN);
                    let (want, abs_scale) = oracle.integral_form(m, k, sigma);
                    let denom = if want.abs() > 1e-3 * abs_scale { want.abs() } else { abs_scale };
                    worst = worst.max(if denom == 0.0 { got.abs() } else { (got - want).abs() / denom });
                }
            }
        }
    }
    let quad_ok = worst <= tol::EX510_QUADRATURE;
    let report = match verify_example_510(&config, &Params::default()) {
        Ok(r) => r,
        Err(e) => return err("counterexample", e),
    };
    let claims: Vec<String> =
        report.sub_reports.iter().map(|s| format!("{}={}", s.test, if s.passed() { "ok" } else { "MISMATCH" })).collect();
    criterion(
        "counterexample",
        quad_ok && report.passed(),
        format!("quadrature max rel err {worst:.2e}; {}", claims.join(" ")),
        json!({"quadrature_max_rel_error": worst, "report": report}),
    )
}

/// Second differences of `-a_k` on the families with a confirmed drop.
pub fn convexity() -> Criterion {
    let p = Params::default();
    let mut cases = Vec::new();
    let mut ok = true;
    let mut run = |name: String, f: &Family, x: f64| -> Result<(), ClassifyError> {
        let a = ak_sequence(f, &[x], p.k_max, &default_radii(), &p)?;
        let r = test_convexity(&a);
        let neg: Vec<f64> = a.a_k.iter().map(|v| -v).collect();
        let min2 = neg.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).filter(|d| d.is_finite()).fold(f64::INFINITY, f64::min);
        ok &= r.passed() && min2 >= -tol::CONVEXITY;
        cases.push(json!({"case": name, "verdict": r.verdict, "min_second_difference": min2, "a_k": a.a_k}));
        Ok(())
    };
    let moll = builtin("mollifier").expect("builtin").family;
    let (ex, _) = make_example_510(&Example510Config::default()).expect("default config");
    let res = run("mollifier@0".into(), &moll, 0.0)
        .and_then(|_| (1..=3).try_for_each(|m| run(format!("example510@a_{m}"), &ex, Example510Config::a(m))));
    if let Err(e) = res {
        return err("convexity", e);
    }
    criterion("convexity", ok, format!("{} cases", cases.len()), json!(cases))
}

/// Pointwise vs classical regularity at classical points.
pub fn compacta() -> Criterion {
    let p = Params::default();
    let radii = default_radii();
    let mut disagreements = Vec::new();
    let mut cases = Vec::new();
    let mut run = || -> Result<(), ClassifyError> {
        let bump = builtin("bump").expect("builtin").family;
        let moll = builtin("mollifier").expect("builtin").family;
        let mut points = |name: &str, f: &Family, xs: &[f64], want: Verdict| -> Result<(), ClassifyError> {
            for &x in xs {
                let a = ak_sequence(f, &[x], p.k_max, &radii, &p)?;
                let s = test_pointstar_regular(&a).verdict;
                let c = test_classical_regular(f, &[x], p.k_max, &radii, &p)?.verdict;
                if s != c || s != want {
                    disagreements.push(format!("{name}@{x}: pointstar {s}, classical {c}, expected {want}"));
                }
                cases.push(json!({"family": name, "x": x, "pointstar": s, "classical": c}));
            }
            Ok(())
        };
        points("bump", &bump, &[-1.5, -0.5, 0.0, 0.7, 1.0], Verdict::Pass)?;
        points("mollifier", &moll, &[0.0], Verdict::Fail)?;
        let (ex, _) = make_example_510(&Example510Config::default()).map_err(|e| ClassifyError::Precondition(e.to_string()))?;
        for (lo, hi, want) in [(Example510Config::a(3) / 2.0, 1.0, false), (-1.0, -0.1, true)] {
            let r = test_compactum(&ex, lo, hi, 3, p.k_max, &radii, &p)?;
            let (c, s) = (r.witnesses["classical_regular"] == json!(want), r.witnesses["pointstar_regular"] == json!(want));
            if !(c && s) {
                disagreements.push(format!("example510 on [{lo}, {hi}]: {:?}", r.witnesses));
            }
            cases.push(json!({"family": "example510", "interval": [lo, hi], "classical": r.witnesses["classical_regular"],
                              "pointstar": r.witnesses["pointstar_regular"]}));
        }
        Ok(())
    };
    if let Err(e) = run() {
        return err("compacta", e);
    }
    criterion(
        "compacta",
        disagreements.is_empty(),
        format!("{} cases, {} disagreements", cases.len(), disagreements.len()),
        json!({"cases": cases, "disagreements": disagreements}),
    )
}

/// Parseval against the test-function panel, inversion of the sampled
/// family and the Gaussian transform.
pub fn fourier_engine(names: &[&str], levels: std::ops::RangeInclusive<i32>) -> Criterion {
    let run = || -> Result<Criterion, FourierError> {
        let (mut parseval, mut inversion, mut gauss): (f64, f64, f64) = (0.0, 0.0, 0.0);
        let panel: Vec<Family> = TestFunction::library()
            .iter()
            .map(|t| {
                let src = match t {
                    TestFunction::Gauss => "gauss(x1)".to_string(),
                    TestFunction::Hermite(j) => format!("(-1)^{j}*gauss_{j}(x1)"),
                    TestFunction::Bump => "bump(x1)".to_string(),
                };
                Family::parse(&t.name(), &src, 1).expect("valid source")
            })
            .collect();
        for name in names {
            let f = builtin(name).expect("canonical family").family;
            for j in levels.clone() {
                let eps = 2f64.powi(-j);
                let (l, n) = window(&f, eps)?;
                for v in &panel {
                    parseval = parseval.max(parseval_check(&f, v, eps, l, n)?);
                }
                let s = dft_family(&f, eps, l, n)?;
                let (xs, back) = inverse_dft(&s);
                let interior = xs.iter().zip(&back).filter(|(x, _)| x.abs() <= 0.8 * l);
                for (x, v) in interior {
                    inversion = inversion.max((f.value(eps, &[*x])?.to_c64() - v).norm());
                }
            }
        }
        let g = builtin("gauss").expect("canonical family").family;
        let s = dft_family(&g, 0.1, 16.0, 4096)?;
        for (xi, v) in s.xi.iter().zip(&s.values) {
            gauss = gauss.max((v - TestFunction::Gauss.fourier(*xi).expect("closed form")).norm());
        }
        Ok(criterion(
            "fourier_engine",
            parseval <= tol::PARSEVAL && inversion <= tol::INVERSION && gauss <= tol::GAUSS_TRANSFORM,
            format!("Parseval {parseval:.2e}, inversion {inversion:.2e}, Gaussian {gauss:.2e}"),
            json!({"families": names, "levels": [levels.start(), levels.end()], "parseval": parseval,
                   "inversion": inversion, "gauss": gauss}),
        ))
    };
    run().unwrap_or_else(|e| err("fourier_engine", e))
}

/// Fixed bump passes, modulated bump and mollifier fail on the spectrum side,
/// and the modulated peak follows `ξ ≈ 1/ε`.
pub fn gs_infinity() -> Criterion {
    let (p, fp) = fourier_params();
    let run = || -> Result<Criterion, FourierError> {
        let mut rows = Vec::new();
        let mut ok = true;
        for (name, want, side) in [("bump", Verdict::Pass, json!([])), ("modulated_bump", Verdict::Fail, json!(["spectrum"])),
                                   ("mollifier", Verdict::Fail, json!(["spectrum"]))] {
            let r = test_gs_infinity(&builtin(name).expect("canonical family").family, &p, &fp)?;
            ok &= r.verdict == want && r.witnesses["failing_side"] == side;
            rows.push(json!({"family": name, "verdict": r.verdict, "failing_side": r.witnesses["failing_side"]}));
        }
        let f = builtin("modulated_bump").expect("canonical family").family;
        let mut peaks = Vec::new();
        for j in 6..=14 {
            let eps = 2f64.powi(-j);
            let (l, n) = window(&f, eps)?;
            let s = dft_family(&f, eps, l, n)?;
            let xe = s.peak().0.abs() * eps;
            ok &= (tol::PEAK_LO..=tol::PEAK_HI).contains(&xe);
            peaks.push(json!({"eps": eps, "xi_peak_times_eps": xe}));
        }
        Ok(criterion("gs_infinity", ok, format!("{} verdicts, {} peak points", rows.len(), peaks.len()),
                     json!({"verdicts": rows, "peak_trajectory": peaks})))
    };
    run().unwrap_or_else(|e| err("gs_infinity", e))
}

/// Both sub-verdicts agree for the three families; the oscillatory pairing
/// decays at least like `ε^8`.
pub fn tempered_equality() -> Criterion {
    let (p, fp) = fourier_params();
    let run = || -> Result<Criterion, FourierError> {
        let mut rows = Vec::new();
        let mut ok = true;
        let cases = [
            ("oscillatory_bump", builtin("oscillatory_bump").expect("canonical family").family),
            ("bump", builtin("bump").expect("canonical family").family),
            ("eps_bump", Family::parse("eps_bump", "eps*bump(x1)", 1).expect("valid source")),
        ];
        for (name, f) in &cases {
            let r = test_tempered_equality(f, &p, &fp)?;
            let agree = r.witnesses["pairing_negligible"] == r.witnesses["spectrum_vanishing"];
            ok &= agree && r.passed();
            rows.push(json!({"family": name, "pairing_negligible": r.witnesses["pairing_negligible"],
                             "spectrum_vanishing": r.witnesses["spectrum_vanishing"]}));
        }
        let mut slope = f64::INFINITY;
        for phi in TestFunction::library() {
            let pr = pairing(&cases[0].1, phi, &fp.grid)?;
            slope = slope.min(pr.fit()?.effective());
        }
        ok &= slope >= tol::PAIRING_SLOPE;
        Ok(criterion("tempered_equality", ok, format!("3 families, oscillatory pairing slope {slope:.1}"),
                     json!({"families": rows, "oscillatory_min_slope": slope})))
    };
    run().unwrap_or_else(|e| err("tempered_equality", e))
}

/// Round trip of the grammar corpus and the finite-difference check.
pub fn dsl() -> Criterion {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (src, dim, iv) in corpus::DSL_CORPUS {
        if let Err(e) = corpus::round_trip(src) {
            failures.push(e);
        }
        match corpus::fd_check(src, dim, iv) {
            Ok(r) => {
                worst = worst.max(r.max_rel_error);
                if r.max_rel_error > corpus::FD_TOL {
                    failures.push(format!("{src}: derivative error {:e}", r.max_rel_error));
                }
            }
            Err(e) => failures.push(format!("{src}: {e}")),
        }
    }
    criterion(
        "dsl",
        failures.is_empty(),
        format!("{} cases, max derivative rel err {worst:.2e}", corpus::DSL_CORPUS.len()),
        json!({"cases": corpus::DSL_CORPUS.len(), "probes": corpus::FD_PROBES, "max_rel_error": worst, "failures": failures}),
    )
}

/// Runtime budget of a criterion in seconds, where one is pinned.
pub fn budget(id: &str) -> Option<f64> {
    match id {
        "exact_layer" | "valuation_fit" => Some(5.0),
        "log_power" => Some(30.0),
        "counterexample" => Some(180.0),
        _ => None,
    }
}

fn timed(f: impl FnOnce() -> Criterion) -> Criterion {
    let t = Instant::now();
    let mut c = f();
    c.seconds = t.elapsed().as_secs_f64();
    if let Some(b) = budget(c.id) {
        if c.seconds > b {
            c.passed = false;
            c.summary.push_str(&format!("; over the {b} s budget"));
        }
    }
    c
}

/// Runs one criterion by id; `quick` shrinks the family sets.
pub fn run_criterion(id: &str, quick: bool) -> Option<Criterion> {
    if !CRITERIA.iter().any(|c| c.0 == id && id != "battery") {
        return None;
    }
    Some(timed(|| match id {
        "exact_layer" => exact_layer(10_000),
        "valuation_fit" => valuation_fit(50),
        "log_power" => log_power(),
        "hierarchy" if quick => hierarchy(Some(&["bump", "mollifier", "shifted_gauss", "x2"])),
        "hierarchy" => hierarchy(None),
        "counterexample" => counterexample(),
        "convexity" => convexity(),
        "compacta" => compacta(),
        "fourier_engine" if quick => fourier_engine(&["gauss"], 4..=6),
        "fourier_engine" => fourier_engine(&["bump", "gauss", "mollifier", "modulated_bump", "oscillatory_bump", "shifted_gauss"], 4..=10),
        "gs_infinity" => gs_infinity(),
        "tempered_equality" => tempered_equality(),
        "dsl" => dsl(),
        _ => unreachable!("checked above"),
    }))
}

/// Criteria of the quick subset.
pub const QUICK: [&str; 5] = ["exact_layer", "valuation_fit", "dsl", "hierarchy", "fourier_engine"];

/// The battery report: per-criterion results and the overall flag.
#[derive(Clone, Debug, Serialize)]
pub struct Battery {
    pub quick: bool,
    pub criteria: Vec<Criterion>,
    pub passed: bool,
    pub version: &'static str,
}

/// Runs the battery, calling `progress` after each criterion. The final
/// `battery` criterion checks the total time and reruns the quick subset
/// to compare serialized results.
pub fn run_battery(quick: bool, mut progress: impl FnMut(&Criterion)) -> Battery {
    let start = Instant::now();
    let ids: Vec<&str> =
        if quick { QUICK.to_vec() } else { CRITERIA.iter().map(|c| c.0).filter(|&c| c != "battery").collect() };
    let mut criteria = Vec::new();
    for id in ids {
        let c = run_criterion(id, quick).expect("registered criterion");
        progress(&c);
        criteria.push(c);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let repeat: Vec<String> = criteria
        .iter()
        .filter(|c| QUICK.contains(&c.id))
        .map(|c| serde_json::to_string(&run_criterion(c.id, quick).expect("registered criterion")).expect("serializable"))
        .collect();
    let first: Vec<String> =
        criteria.iter().filter(|c| QUICK.contains(&c.id)).map(|c| serde_json::to_string(c).expect("serializable")).collect();
    let same = repeat == first;
    let in_time = elapsed <= tol::BATTERY_SECONDS;
    let mut b = criterion(
        "battery",
        same && in_time,
        format!("rerun identical: {same}; {:.0} s of {} s", elapsed, tol::BATTERY_SECONDS),
        json!({"rerun_identical": same, "within_budget": in_time}),
    );
    b.seconds = start.elapsed().as_secs_f64();
    progress(&b);
    criteria.push(b);
    let passed = criteria.iter().all(|c| c.passed);
    Battery { quick, criteria, passed, version: env!("CARGO_PKG_VERSION") }
}
