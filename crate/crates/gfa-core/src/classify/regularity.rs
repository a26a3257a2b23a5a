//! Pointwise regularity: the `a_k` sequence, convexity, `Ġ∞`, `G∞`, the
//! sharp notions at generalized points, and the compactum comparison.

use super::membership::multi_indices;
use super::sample::{sup_on_region, Region};
use super::{num, nums, sweep, uniform_in_k, ClassifyError, MultiFit, Params, Report, Verdict};
use crate::dsl::{Family, FamilyError};
use crate::points::GenPoint;
use serde::Serialize;
use serde_json::{json, Value};

/// Tolerance of the `a_k` convergence flag.
const CONVERGENCE_TOL: f64 = 0.1;
/// Tolerance on the post-drop second differences of `-a_k`.
const CONVEXITY_TOL: f64 = 0.15;

/// Radii `2^{-j}`, `j = 2..=10`.
pub fn default_radii() -> Vec<f64> {
    (2..=10).map(|j| 2f64.powi(-j)).collect()
}

/// Estimated exponents `a_k` of order-`k` derivatives near a classical point.
#[derive(Clone, Debug, Serialize)]
pub struct AkSequence {
    pub x0: Vec<f64>,
    pub radii: Vec<f64>,
    /// `table[k][j]`: raw fitted exponent on the ball of radius `radii[j]`.
    pub table: Vec<Vec<f64>>,
    pub a_k: Vec<f64>,
    pub converged: Vec<bool>,
    pub max_residual: f64,
}

impl AkSequence {
    /// From given values, all marked converged.
    pub fn from_values(a_k: &[f64]) -> AkSequence {
        AkSequence {
            x0: Vec::new(),
            radii: Vec::new(),
            table: a_k.iter().map(|&a| vec![a]).collect(),
            a_k: a_k.to_vec(),
            converged: vec![true; a_k.len()],
            max_residual: 0.0,
        }
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    fn to_json(&self) -> Value {
        json!({
            "x0": nums(&self.x0),
            "radii": nums(&self.radii),
            "a_k": nums(&self.a_k),
            "converged": self.converged,
            "table": self.table.iter().map(|r| nums(r)).collect::<Vec<_>>(),
        })
    }
}

fn check_order(f: &Family, k: usize) -> Result<(), ClassifyError> {
    if k > f.max_order() {
        return Err(FamilyError::OrderCap { order: k, cap: f.max_order() }.into());
    }
    Ok(())
}

/// Worst fit over `|β| = k` of sups over a region.
fn order_fit(f: &Family, p: &Params, k: usize, region: &Region) -> Result<MultiFit, ClassifyError> {
    let mut worst: Option<MultiFit> = None;
    for beta in multi_indices(f.dim(), k) {
        let fit = sweep(f, p, |e| sup_on_region(f, &beta, e, region, p))?;
        if worst.as_ref().is_none_or(|w| fit.exponent() < w.exponent()) {
            worst = Some(fit);
        }
    }
    Ok(worst.expect("at least one multi-index"))
}

/// `a_k(r)` over a decreasing radius schedule; `a_k` is the smallest-radius value
/// of the running maximum over radii.
pub fn ak_sequence(
    f: &Family,
    x0: &[f64],
    k_max: usize,
    radii: &[f64],
    p: &Params,
) -> Result<AkSequence, ClassifyError> {
    check_order(f, k_max)?;
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ClassifyError::Precondition("radius schedule must be nonempty and decreasing".into()));
    }
    let mut table = Vec::with_capacity(k_max + 1);
    let mut max_residual: f64 = 0.0;
    for k in 0..=k_max {
        let mut row = Vec::with_capacity(radii.len());
        for &r in radii {
            let fit = order_fit(f, p, k, &Region::Classical { center: x0.to_vec(), r })?;
            max_residual = max_residual.max(fit.residual());
            row.push(fit.exponent());
        }
        table.push(row);
    }
    // A bound on a ball bounds every smaller ball, so the estimate at each
    // radius is the running maximum of the raw fits.
    let envelope: Vec<Vec<f64>> = table
        .iter()
        .map(|r| r.iter().scan(f64::NEG_INFINITY, |m, &e| { *m = m.max(e); Some(*m) }).collect())
        .collect();
    let a_k: Vec<f64> = envelope.iter().map(|r| *r.last().unwrap()).collect();
    let converged = envelope
        .iter()
        .map(|r| {
            let n = r.len();
            n < 2 || r[n - 1] == r[n - 2] || (r[n - 1] - r[n - 2]).abs() <= CONVERGENCE_TOL
        })
        .collect();
    Ok(AkSequence { x0: x0.to_vec(), radii: radii.to_vec(), table, a_k, converged, max_residual })
}

/// `-a_k` is convex after the first drop of `a_k`.
pub fn test_convexity(a: &AkSequence) -> Report {
    let base = |v| Report::new("convexity", v).diag("ak", a.to_json());
    if !a.all_converged() {
        return base(Verdict::Inconclusive).diag("reason", json!("a_k not converged"));
    }
    let tol = 0.1;
    let Some(drop) = (0..a.a_k.len().saturating_sub(1)).find(|&k| a.a_k[k + 1] < a.a_k[k] - tol) else {
        return base(Verdict::Pass).diag("note", json!("no drop in a_k; convexity not applicable"));
    };
    let d: Vec<f64> = (drop..a.a_k.len() - 1).map(|k| a.a_k[k] - a.a_k[k + 1]).collect();
    let bad = (0..d.len().saturating_sub(1))
        .find(|&i| d[i].is_finite() && d[i + 1].is_finite() && d[i + 1] < d[i] - CONVEXITY_TOL);
    let r = match bad {
        None => base(Verdict::Pass),
        Some(i) => base(Verdict::Fail).witness("k", json!(drop + i + 1)),
    };
    r.witness("drop_at", json!(drop)).witness("differences", nums(&d))
}

/// `Ġ∞_{x0}`: `a_k` non-decreasing in `k`.
pub fn test_pointstar_regular(a: &AkSequence) -> Report {
    let base = |v| Report::new("pointstar_regular", v).diag("ak", a.to_json());
    let bad = (0..a.a_k.len().saturating_sub(1)).find(|&k| a.a_k[k + 1] < a.a_k[k] - CONVERGENCE_TOL);
    match bad {
        _ if !a.all_converged() => base(Verdict::Inconclusive).diag("reason", json!("a_k not converged")),
        None => base(Verdict::Pass).witness("a_k", nums(&a.a_k)),
        Some(k) => base(Verdict::Fail)
            .witness("k", json!(k + 1))
            .witness("a_k", nums(&a.a_k))
            .diag("consequence", json!("a_j -> -inf as j -> inf")),
    }
}

/// `G∞_{x0}`: on some ball, one `N` bounds every derivative order.
pub fn test_classical_regular(
    f: &Family,
    x0: &[f64],
    k_max: usize,
    radii: &[f64],
    p: &Params,
) -> Result<Report, ClassifyError> {
    check_order(f, k_max)?;
    let mut tables = serde_json::Map::new();
    let mut rows = Vec::new();
    let mut noisy = false;
    for &r in radii {
        let region = Region::Classical { center: x0.to_vec(), r };
        let mut e = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let fit = order_fit(f, p, k, &region)?;
            noisy |= fit.residual() > p.residual_tol;
            rows.extend(fit.rows(&region.label(), &k.to_string(), k as f64));
            e.push(fit.exponent());
        }
        tables.insert(format!("{r:e}"), nums(&e));
        if uniform_in_k(&e, p.tol) {
            let n = (-e.iter().copied().fold(f64::INFINITY, f64::min) - p.tol).ceil().max(0.0);
            let mut rep = Report::new("classical_regular", Verdict::Pass)
                .witness("radius", num(r))
                .witness("N", num(n))
                .witness("exponents", nums(&e))
                .diag("k_max", json!(k_max));
            rep.rows = rows;
            return Ok(rep);
        }
    }
    let v = if noisy { Verdict::Inconclusive } else { Verdict::Fail };
    let mut rep = Report::new("classical_regular", v)
        .witness("exponents_by_radius", Value::Object(tables))
        .diag("k_max", json!(k_max));
    rep.rows = rows;
    Ok(rep)
}

/// Verdicts at a generalized point: `Ǧ∞` (along the net) and `G̃∞` (sharp balls).
#[derive(Clone, Debug, Serialize)]
pub struct SharpReport {
    pub pointwise: Report,
    pub sharp: Report,
}

/// Exponents `b_k` of `max_{|β|=k} |∂^β u_ε(x_{0,ε})|` along the net.
fn pointwise_fit(f: &Family, x0: &GenPoint, k: usize, p: &Params) -> Result<MultiFit, ClassifyError> {
    let mut worst: Option<MultiFit> = None;
    for beta in multi_indices(f.dim(), k) {
        let fit = sweep(f, p, |eps| {
            let (hi, lo) = x0
                .value_at(eps)
                .ok_or_else(|| ClassifyError::EmptyRegion(format!("point undefined at eps = {eps:e}")))?;
            Ok(f.deriv_offset(&beta, eps, &hi, &lo)?.log_abs())
        })?;
        if worst.as_ref().is_none_or(|w| fit.exponent() < w.exponent()) {
            worst = Some(fit);
        }
    }
    Ok(worst.expect("at least one multi-index"))
}

/// `Ǧ∞_{x̃0}`: one `N` bounds `|∂^β u(x̃0)|` for every order.
pub fn test_pointwise_regular(f: &Family, x0: &GenPoint, k_max: usize, p: &Params) -> Result<Report, ClassifyError> {
    check_order(f, k_max)?;
    if x0.dim() != f.dim() {
        return Err(ClassifyError::Precondition("point dimension differs from family".into()));
    }
    let mut b = Vec::with_capacity(k_max + 1);
    let mut rows = Vec::new();
    for k in 0..=k_max {
        let fit = pointwise_fit(f, x0, k, p)?;
        rows.extend(fit.rows("point", &k.to_string(), k as f64));
        b.push(fit.exponent());
    }
    let mut pointwise = if uniform_in_k(&b, p.tol) {
        let n = (-b.iter().copied().fold(f64::INFINITY, f64::min) - p.tol).ceil().max(0.0);
        Report::new("pointwise_regular", Verdict::Pass).witness("N", num(n))
    } else {
        Report::new("pointwise_regular", Verdict::Fail)
    }
    .witness("b_k", nums(&b));
    pointwise.rows = rows;
    Ok(pointwise)
}

/// Tests `Ǧ∞_{x̃0}` and `G̃∞_{x̃0}`; the sharp order `n` is searched in
/// `1..=sharp_n_max` unless given.
pub fn test_sharp_regular(
    f: &Family,
    x0: &GenPoint,
    n: Option<usize>,
    k_max: usize,
    p: &Params,
) -> Result<SharpReport, ClassifyError> {
    let pointwise = test_pointwise_regular(f, x0, k_max, p)?;
    let orders: Vec<usize> = match n {
        Some(n) => vec![n],
        None => (1..=p.sharp_n_max).collect(),
    };
    let mut tables = serde_json::Map::new();
    let mut rows = Vec::new();
    let mut found = None;
    for &n in &orders {
        let region = Region::Sharp { center: x0.clone(), n: n as f64 };
        let mut e = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let fit = order_fit(f, p, k, &region)?;
            rows.extend(fit.rows(&region.label(), &k.to_string(), k as f64));
            e.push(fit.exponent());
        }
        tables.insert(n.to_string(), nums(&e));
        if uniform_in_k(&e, p.tol) {
            let big_n = (-e.iter().copied().fold(f64::INFINITY, f64::min) - p.tol).ceil().max(0.0);
            found = Some((n, big_n));
            break;
        }
    }
    let mut sharp = match found {
        Some((n, big_n)) => Report::new("sharp_regular", Verdict::Pass)
            .witness("n", json!(n))
            .witness("N", num(big_n)),
        None => Report::new("sharp_regular", Verdict::Fail),
    }
    .witness("exponents_by_n", Value::Object(tables))
    .diag("n_searched", json!(orders));
    sharp.rows = rows;
    Ok(SharpReport { pointwise, sharp })
}

/// Compares `G∞` and `Ġ∞` at sample points of `[lo, hi]` (d = 1): uniform
/// points plus the family's singular points inside the interval.
pub fn test_compactum(
    f: &Family,
    lo: f64,
    hi: f64,
    samples: usize,
    k_max: usize,
    radii: &[f64],
    p: &Params,
) -> Result<Report, ClassifyError> {
    if f.dim() != 1 || !(lo <= hi) {
        return Err(ClassifyError::Precondition("compactum tests need d = 1 and lo <= hi".into()));
    }
    let mut pts: Vec<f64> = (0..samples.max(1))
        .map(|i| if samples <= 1 { lo } else { lo + (hi - lo) * i as f64 / (samples - 1) as f64 })
        .collect();
    pts.extend(f.singular_points().into_iter().filter(|&s| lo <= s && s <= hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut classical_ok = true;
    let mut pointstar_ok = true;
    let mut inconclusive = false;
    let mut per_point = Vec::new();
    for &x in &pts {
        let c = test_classical_regular(f, &[x], k_max, radii, p)?;
        let a = ak_sequence(f, &[x], k_max, radii, p)?;
        let s = test_pointstar_regular(&a);
        classical_ok &= c.passed();
        pointstar_ok &= s.passed();
        inconclusive |= c.verdict == Verdict::Inconclusive || s.verdict == Verdict::Inconclusive;
        per_point.push(json!({"x": x, "classical": c.verdict, "pointstar": s.verdict}));
    }
    let v = match (classical_ok, pointstar_ok) {
        _ if inconclusive => Verdict::Inconclusive,
        (true, true) => Verdict::Pass,
        (false, false) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    Ok(Report::new("compactum", v)
        .witness("classical_regular", json!(classical_ok))
        .witness("pointstar_regular", json!(pointstar_ok))
        .witness("agree", json!(classical_ok == pointstar_ok))
        .diag("interval", json!([lo, hi]))
        .diag("points", Value::Array(per_point)))
}
