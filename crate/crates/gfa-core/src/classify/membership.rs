//! Membership tests: moderate, negligible, τ, Schwartz, slow-scale support,
//! invertibility.

use super::sample::{extremum_on_region, sup_on_region, Extremum, Region};
use super::{num, nums, sweep, uniform_in_k, ClassifyError, MultiFit, Params, Report, Verdict};
use crate::dsl::Family;
use serde_json::{json, Map, Value};

/// All multi-indices of total order `k` in dimension `d`, lexicographic.
pub(crate) fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![k]];
    }
    let mut out = Vec::new();
    for first in (0..=k).rev() {
        for mut rest in multi_indices(d - 1, k - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

pub(crate) fn alpha_label(a: &[usize]) -> String {
    a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Derivative orders actually tested: capped by the family.
fn order_cap(f: &Family, k: usize) -> usize {
    k.min(f.max_order())
}

fn all_alphas(f: &Family, k: usize) -> Vec<Vec<usize>> {
    (0..=order_cap(f, k)).flat_map(|j| multi_indices(f.dim(), j)).collect()
}

fn ranges(f: &Family, p: &Params, k: usize) -> Value {
    json!({"m_max": p.m_max, "k_max": order_cap(f, k), "k_requested": k, "n_max": p.n_max})
}

/// Fit of the ball-`m` sup of `∂^α u`.
fn region_fit(f: &Family, p: &Params, alpha: &[usize], region: &Region) -> Result<MultiFit, ClassifyError> {
    sweep(f, p, |e| sup_on_region(f, alpha, e, region, p))
}

fn ball(m: usize) -> Region {
    Region::Ball { m: m as f64 }
}

/// Collects per-case exponents and the worst-residual case.
#[derive(Default)]
struct Table {
    exps: Map<String, Value>,
    worst_residual: f64,
    worst_case: Value,
    rows: Vec<super::SweepRow>,
}

impl Table {
    fn add(&mut self, key: String, fit: &MultiFit, region: &str, alpha: &str, m_or_k: f64) {
        self.exps.insert(key.clone(), num(fit.exponent()));
        if fit.residual() > self.worst_residual {
            self.worst_residual = fit.residual();
            self.worst_case = json!(key);
        }
        self.rows.extend(fit.rows(region, alpha, m_or_k));
    }

    fn finish(self, mut r: Report) -> Report {
        r = r
            .diag("exponents", Value::Object(self.exps))
            .diag("max_residual", num(self.worst_residual))
            .diag("max_residual_case", self.worst_case);
        r.rows = self.rows;
        r
    }
}

/// `E_M`: every ball-`m` sup of every derivative grows at most like `ε^{-N}`.
pub fn test_moderate(f: &Family, p: &Params) -> Result<Report, ClassifyError> {
    let mut t = Table::default();
    let mut worst = f64::INFINITY;
    let mut worst_case = Value::Null;
    let mut fail: Option<Value> = None;
    let mut noisy = false;
    for alpha in all_alphas(f, p.k_max) {
        for m in 1..=p.m_max {
            let fit = region_fit(f, p, &alpha, &ball(m))?;
            let key = format!("alpha={};m={m}", alpha_label(&alpha));
            t.add(key, &fit, &ball(m).label(), &alpha_label(&alpha), m as f64);
            if fit.superpolynomial_growth(p) && fail.is_none() {
                fail = Some(json!({"alpha": alpha, "m": m, "exponent": num(fit.exponent())}));
            }
            noisy |= fit.residual() > p.residual_tol;
            if fit.exponent() < worst {
                worst = fit.exponent();
                worst_case = json!({"alpha": alpha, "m": m});
            }
        }
    }
    let r = if let Some(v) = fail {
        Report::new("moderate", Verdict::Fail)
            .witness("violating", v)
            .diag("reason", json!("growth faster than every power of 1/eps"))
    } else if noisy {
        Report::new("moderate", Verdict::Inconclusive)
    } else {
        let n = (-worst - p.tol).ceil().max(0.0);
        Report::new("moderate", Verdict::Pass).witness("N", num(n)).witness("deciding", worst_case)
    };
    Ok(t.finish(r.diag("ranges", ranges(f, p, p.k_max))))
}

/// `N`: the order-0 ball sups decay faster than `ε^n` for every `n ≤ n_max`.
pub fn test_negligible(f: &Family, p: &Params, moderate: &Report) -> Result<Report, ClassifyError> {
    if moderate.verdict != Verdict::Pass {
        return Err(ClassifyError::Precondition("the family must pass test_moderate".into()));
    }
    let zero = vec![0; f.dim()];
    let mut t = Table::default();
    let mut fail: Option<(usize, usize, f64)> = None;
    let mut noisy = false;
    for m in 1..=p.m_max {
        let fit = region_fit(f, p, &zero, &ball(m))?;
        t.add(format!("m={m}"), &fit, &ball(m).label(), "0", m as f64);
        let e = fit.exponent();
        if e >= p.n_max as f64 - p.tol {
            continue;
        }
        noisy |= fit.residual() > p.residual_tol && !fit.superpolynomial_decay(p);
        let n = (1..=p.n_max).find(|&n| e < n as f64 - p.tol).unwrap_or(p.n_max);
        if fail.is_none_or(|(_, n0, _)| n < n0) {
            fail = Some((m, n, e));
        }
    }
    let r = match fail {
        None => Report::new("negligible", Verdict::Pass).witness("n_max", json!(p.n_max)),
        Some(_) if noisy => Report::new("negligible", Verdict::Inconclusive),
        Some((m, n, e)) => Report::new("negligible", Verdict::Fail)
            .witness("n", json!(n))
            .witness("m", json!(m))
            .witness("exponent", num(e)),
    };
    Ok(t.finish(r.diag("ranges", ranges(f, p, 0))))
}

/// `E_τ + N`: ball-`m` sups bounded by `ε^{-mN}` with one `N` per derivative.
pub fn test_tau(f: &Family, p: &Params) -> Result<Report, ClassifyError> {
    let mut t = Table::default();
    let mut per_alpha = Map::new();
    let mut fail: Option<Value> = None;
    let mut noisy = false;
    let mut n_all = f64::NEG_INFINITY;
    let mid = p.m_max.div_ceil(2).max(1);
    for alpha in all_alphas(f, p.k_max) {
        let mut q = Vec::with_capacity(p.m_max);
        let mut n_alpha = f64::NEG_INFINITY;
        for m in 1..=p.m_max {
            let fit = region_fit(f, p, &alpha, &ball(m))?;
            let key = format!("alpha={};m={m}", alpha_label(&alpha));
            t.add(key, &fit, &ball(m).label(), &alpha_label(&alpha), m as f64);
            noisy |= fit.residual() > p.residual_tol;
            if fit.superpolynomial_growth(p) && fail.is_none() {
                fail = Some(json!({"alpha": alpha, "m": m, "reason": "not moderate"}));
            }
            let e = fit.exponent();
            q.push(-e / m as f64);
            n_alpha = n_alpha.max(((-e - p.tol) / m as f64).ceil());
        }
        let growth = q[p.m_max - 1] - q[mid - 1];
        if growth > p.residual_tol && fail.is_none() {
            fail = Some(json!({"alpha": alpha, "q_growth": num(growth), "m_range": [mid, p.m_max]}));
        }
        n_all = n_all.max(n_alpha);
        per_alpha.insert(alpha_label(&alpha), json!({"neg_e_over_m": nums(&q), "N": num(n_alpha.max(0.0))}));
    }
    let r = if let Some(v) = fail {
        Report::new("tau", Verdict::Fail).witness("violating", v)
    } else if noisy {
        Report::new("tau", Verdict::Inconclusive)
    } else {
        Report::new("tau", Verdict::Pass).witness("N", num(n_all.max(0.0)))
    };
    Ok(t.finish(r.witness("per_alpha", Value::Object(per_alpha)).diag("ranges", ranges(f, p, p.k_max))))
}

/// `E_S`: annulus-`m` sups bounded by `ε^{mk-N}` with one `N` per `(α, k)`.
pub fn test_schwartz(f: &Family, p: &Params) -> Result<Report, ClassifyError> {
    let mut t = Table::default();
    let mut fail: Option<Value> = None;
    let mut noisy = false;
    let mut n_all = f64::NEG_INFINITY;
    let mid = p.m_max.div_ceil(2).max(1);
    for alpha in all_alphas(f, p.k_max) {
        let mut ea = Vec::with_capacity(p.m_max);
        for m in 1..=p.m_max {
            let region = Region::Annulus { m: m as f64 };
            let fit = region_fit(f, p, &alpha, &region)?;
            let key = format!("alpha={};m={m}", alpha_label(&alpha));
            t.add(key, &fit, &region.label(), &alpha_label(&alpha), m as f64);
            noisy |= fit.residual() > p.residual_tol;
            ea.push(fit.exponent());
        }
        for k in 0..=p.decay_max {
            let need: Vec<f64> = (1..=p.m_max).map(|m| (m * k) as f64 - ea[m - 1]).collect();
            let growth = need[p.m_max - 1] - need[mid - 1];
            if growth > p.residual_tol && !growth.is_nan() {
                if fail.is_none() {
                    fail = Some(json!({"alpha": alpha, "k": k, "N_by_m": nums(&need)}));
                }
                continue;
            }
            let n = need.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            n_all = n_all.max((n - p.tol).ceil());
        }
    }
    let r = if let Some(v) = fail {
        Report::new("schwartz", Verdict::Fail).witness("violating", v)
    } else if noisy {
        Report::new("schwartz", Verdict::Inconclusive)
    } else {
        Report::new("schwartz", Verdict::Pass).witness("N", num(n_all.max(0.0)))
    };
    Ok(t.finish(r.diag("ranges", ranges(f, p, p.k_max)).diag("decay_max", json!(p.decay_max))))
}

/// Highest derivative order used by the slow-scale sub-reports.
const SUPPORT_ORDER_CAP: usize = 4;

/// Exterior sups `|x| ≥ ε^{-1/m}` of order-≤k derivatives decay like `ε^m`.
fn exterior_condition(f: &Family, p: &Params, k: usize, name: &str) -> Result<Report, ClassifyError> {
    let mut t = Table::default();
    let mut fail: Option<Value> = None;
    let mut noisy = false;
    for alpha in all_alphas(f, k) {
        for m in 1..=p.m_max {
            let region = Region::Exterior { m: m as f64, cap_m: p.m_max as f64 };
            let fit = region_fit(f, p, &alpha, &region)?;
            let key = format!("alpha={};m={m}", alpha_label(&alpha));
            t.add(key, &fit, &region.label(), &alpha_label(&alpha), m as f64);
            let e = fit.exponent();
            if e < m as f64 - p.tol {
                if fit.residual() > p.residual_tol && !fit.superpolynomial_decay(p) {
                    noisy = true;
                } else if fail.is_none() {
                    fail = Some(json!({"alpha": alpha, "m": m, "exponent": num(e)}));
                }
            }
        }
    }
    let r = match fail {
        Some(v) => Report::new(name, Verdict::Fail).witness("violating", v),
        None if noisy => Report::new(name, Verdict::Inconclusive),
        None => Report::new(name, Verdict::Pass).witness("m_max", json!(p.m_max)),
    };
    Ok(t.finish(r.diag("ranges", ranges(f, p, k))))
}

/// Moment bounds `sup |x|^b |∂^α u_ε| ≤ ε^{-N}` with `N` uniform in `b`.
fn moment_condition(f: &Family, p: &Params, k: usize) -> Result<Report, ClassifyError> {
    let mut t = Table::default();
    let mut fail: Option<Value> = None;
    let mut noisy = false;
    let mut n_all = f64::NEG_INFINITY;
    let big = Region::Ball { m: p.m_max as f64 };
    for alpha in all_alphas(f, k) {
        let mut es = Vec::new();
        for b in 0..=k {
            let fit = sweep(f, p, |e| extremum_on_region(f, &alpha, e, &big, Extremum::Sup, b as u32, p))?;
            let key = format!("alpha={};beta={b}", alpha_label(&alpha));
            t.add(key, &fit, &format!("moment(b={b})"), &alpha_label(&alpha), b as f64);
            noisy |= fit.residual() > p.residual_tol;
            es.push(fit.exponent());
        }
        if !uniform_in_k(&es, p.tol) && fail.is_none() {
            fail = Some(json!({"alpha": alpha, "exponents_by_beta": nums(&es)}));
        }
        n_all = n_all.max(es.iter().map(|e| (-e - p.tol).ceil()).fold(f64::NEG_INFINITY, f64::max));
    }
    let r = match fail {
        Some(v) => Report::new("moment_bounds", Verdict::Fail).witness("violating", v),
        None if noisy => Report::new("moment_bounds", Verdict::Inconclusive),
        None => Report::new("moment_bounds", Verdict::Pass).witness("N", num(n_all.max(0.0))),
    };
    Ok(t.finish(r.diag("ranges", ranges(f, p, k))))
}

/// Slow-scale support, decided by the exterior decay condition on `u` itself;
/// the derivative and moment forms are attached as sub-reports.
pub fn test_slowscale_support(f: &Family, p: &Params) -> Result<Report, ClassifyError> {
    let mut main = exterior_condition(f, p, 0, "slowscale_support")?;
    let k = p.k_max.min(SUPPORT_ORDER_CAP);
    main.sub_reports.push(exterior_condition(f, p, k, "exterior_derivatives")?);
    main.sub_reports.push(moment_condition(f, p, k)?);
    Ok(main)
}

/// Invertibility: ball-`m` infima of `|u_ε|` bounded below by `ε^n`.
pub fn test_invertible(f: &Family, p: &Params) -> Result<Report, ClassifyError> {
    let zero = vec![0; f.dim()];
    let mut t = Table::default();
    let mut ns = Map::new();
    let mut fail: Option<Value> = None;
    let mut noisy = false;
    for m in 1..=p.m_max {
        let region = ball(m);
        let fit = sweep(f, p, |e| extremum_on_region(f, &zero, e, &region, Extremum::Inf, 0, p))?;
        t.add(format!("m={m}"), &fit, &format!("inf {}", region.label()), "0", m as f64);
        let zero_at = fit
            .parts
            .iter()
            .flat_map(|s| s.grid.values().iter().zip(&s.logs))
            .find(|(_, l)| **l == f64::NEG_INFINITY);
        if let Some((&eps, _)) = zero_at {
            fail.get_or_insert(json!({"m": m, "eps": eps, "reason": "zero at a sample point"}));
        } else if fit.superpolynomial_decay(p) || fit.exponent().is_infinite() {
            fail.get_or_insert(json!({"m": m, "reason": "decay faster than every power of eps"}));
        } else {
            noisy |= fit.residual() > p.residual_tol;
            ns.insert(m.to_string(), num((fit.exponent() - p.tol).ceil().max(0.0)));
        }
    }
    let r = match fail {
        Some(v) => Report::new("invertible", Verdict::Fail).witness("violating", v),
        None if noisy => Report::new("invertible", Verdict::Inconclusive),
        None => Report::new("invertible", Verdict::Pass).witness("n", Value::Object(ns)),
    };
    Ok(t.finish(r.diag("ranges", ranges(f, p, 0))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(src: &str) -> Family {
        Family::parse(src, src, 1).unwrap()
    }

    fn quick() -> Params {
        Params { k_max: 2, ..Params::default() }
    }

    fn n_of(r: &Report) -> f64 {
        r.witnesses["N"].as_f64().unwrap()
    }

    #[test]
    fn indices() {
        assert_eq!(multi_indices(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(multi_indices(3, 1).len(), 3);
        assert_eq!(multi_indices(1, 5), vec![vec![5]]);
    }

    #[test]
    fn moderate_examples() {
        let p = Params { k_max: 1, ..Params::default() };
        let r = test_moderate(&fam("eps^-1*bump(x1/eps)"), &p).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(n_of(&r), 2.0);
        let r = test_moderate(&fam("exp(1/eps)*bump(x1)"), &p).unwrap();
        assert_eq!(r.verdict, Verdict::Fail, "{:?}", r.diagnostics);
    }

    #[test]
    fn negligible_examples() {
        let p = quick();
        let check = |src: &str| {
            let f = fam(src);
            let m = test_moderate(&f, &p).unwrap();
            test_negligible(&f, &p, &m).unwrap()
        };
        assert_eq!(check("exp(-1/eps)*gauss(x1)").verdict, Verdict::Pass);
        assert_eq!(check("eps^-1*bump(x1/eps)").verdict, Verdict::Fail);
        let r = check("eps^3*bump(x1)");
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.witnesses["n"], json!(4));
        let bad = Report::new("moderate", Verdict::Fail);
        assert!(test_negligible(&fam("x1"), &p, &bad).is_err());
    }

    #[test]
    fn tau_examples() {
        let p = quick();
        let r = test_tau(&fam("x1^2"), &p).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(n_of(&r), 2.0);
        let r = test_tau(&fam("eps^-1*bump(x1/eps)"), &Params { k_max: 0, ..p.clone() }).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(n_of(&r), 1.0);
    }

    #[test]
    fn schwartz_examples() {
        let p = quick();
        assert_eq!(test_schwartz(&fam("bump(x1)"), &p).unwrap().verdict, Verdict::Pass);
        assert_eq!(test_schwartz(&fam("gauss(x1)"), &p).unwrap().verdict, Verdict::Pass);
        let r = test_schwartz(&fam("x1^2"), &p).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn slowscale_examples() {
        let p = quick();
        let r = test_slowscale_support(&fam("bump(x1)"), &p).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.sub_reports.iter().all(|s| s.passed()));
        let r = test_slowscale_support(&fam("bump(x1)*sin(x1/eps)"), &p).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let r = test_slowscale_support(&fam("gauss(x1 - 1/eps)"), &p).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.witnesses["violating"]["m"], json!(1));
        assert_eq!(r.sub_reports[1].verdict, Verdict::Fail);
    }

    #[test]
    fn invertible_examples() {
        let p = quick();
        let r = test_invertible(&fam("x1^2 + eps^2"), &p).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.witnesses["n"].as_object().unwrap().values().all(|v| v == &json!(2.0)));
        assert_eq!(test_invertible(&fam("x1"), &p).unwrap().verdict, Verdict::Fail);
        let r = test_invertible(&fam("1 + x1^2"), &p).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.witnesses["n"].as_object().unwrap().values().all(|v| v == &json!(0.0)));
    }
}
