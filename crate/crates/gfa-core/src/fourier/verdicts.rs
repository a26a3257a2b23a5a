use super::{
    check, radius, samples, spectrum_from_samples, transform, weighted_log_sup, window, FourierError,
    TestFunction,
};
use crate::classify::{nums, test_slowscale_support, uniform_in_k, ClassifyError, Params, Report, SweepRow, Verdict};
use crate::dsl::Family;
use crate::ext::Ext;
use crate::scale::{fit_log_values, EpsGrid, ExponentFit, SampledScalar, ScaleError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use std::f64::consts::PI;

const QUAD_RTOL: f64 = 1e-10;
const QUAD_BUDGET: usize = 1 << 22;

/// Ranges of the spectral tests.
#[derive(Clone, Debug)]
pub struct FourierParams {
    pub grid: EpsGrid,
    /// Largest `α` in `sup |ξ|^β |∂^α û_ε|`.
    pub alpha_max: usize,
    pub beta_max: u32,
}

impl Default for FourierParams {
    fn default() -> FourierParams {
        FourierParams { grid: EpsGrid::dyadic(4, 15), alpha_max: 2, beta_max: 4 }
    }
}

impl FourierParams {
    pub fn to_json(&self) -> Value {
        json!({
            "fourier_grid": nums(self.grid.values()),
            "alpha_max": self.alpha_max,
            "beta_max": self.beta_max,
        })
    }
}

struct Quad {
    value: Complex64,
    mass: f64,
    converged: bool,
}

impl Quad {
    /// The value, with results under the quadrature tolerance set to zero.
    fn cleaned(&self) -> Complex64 {
        if self.value.norm() <= QUAD_RTOL * self.mass {
            Complex64::new(0.0, 0.0)
        } else {
            self.value
        }
    }
}

/// Trapezoid rule on `[a, b]`, doubled until two successive refinements
/// change the value by at most `1e-10·∫|g|`.
fn trapezoid(
    g: impl Fn(&[f64]) -> Result<Vec<Complex64>, FourierError>,
    a: f64,
    b: f64,
) -> Result<Quad, FourierError> {
    let zero = Complex64::new(0.0, 0.0);
    if !(b > a) {
        return Ok(Quad { value: zero, mass: 0.0, converged: true });
    }
    let mut n = 64usize;
    let v = g(&(0..=n).map(|j| a + (b - a) * j as f64 / n as f64).collect::<Vec<_>>())?;
    let mut sum = (v[0] + v[n]) * 0.5 + v[1..n].iter().sum::<Complex64>();
    let mut abs = (v[0].norm() + v[n].norm()) * 0.5 + v[1..n].iter().map(|c| c.norm()).sum::<f64>();
    let mut prev = sum * ((b - a) / n as f64);
    let mut agree = 0;
    while n < QUAD_BUDGET {
        let h = (b - a) / (2 * n) as f64;
        let v = g(&(0..n).map(|j| a + (2 * j + 1) as f64 * h).collect::<Vec<_>>())?;
        sum += v.iter().sum::<Complex64>();
        abs += v.iter().map(|c| c.norm()).sum::<f64>();
        n *= 2;
        let (cur, mass) = (sum * h, abs * h);
        if !(cur.re.is_finite() && cur.im.is_finite()) {
            return Err(FourierError::NonFinite(a));
        }
        agree = if (cur - prev).norm() <= QUAD_RTOL * mass { agree + 1 } else { 0 };
        prev = cur;
        if agree >= 2 {
            return Ok(Quad { value: cur, mass, converged: true });
        }
    }
    Ok(Quad { value: prev, mass: abs * (b - a) / n as f64, converged: false })
}

fn family_times<'a>(
    f: &'a Family,
    eps: f64,
    w: impl Fn(f64) -> Complex64 + 'a,
) -> impl Fn(&[f64]) -> Result<Vec<Complex64>, FourierError> + 'a {
    move |xs| {
        let u = f.deriv_many(&[0], eps, xs)?;
        Ok(xs.iter().zip(u).map(|(&x, v)| (v * Ext::complex(w(x))).to_c64()).collect())
    }
}

/// `∫ u_ε φ` per ε.
#[derive(Clone, Debug)]
pub struct Pairing {
    pub phi: TestFunction,
    pub values: SampledScalar,
    /// False where the quadrature hit its budget.
    pub converged: Vec<bool>,
}

impl Pairing {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn fit(&self) -> Result<ExponentFit, ScaleError> {
        fit_log_values(&self.values.grid, &self.values.log_abs())
    }
}

/// `∫ u_ε(x) φ(x) dx` on the common support, by the doubling trapezoid rule.
/// Values below `1e-10·∫|u_ε φ|` are reported as zero.
pub fn pairing(f: &Family, phi: TestFunction, grid: &EpsGrid) -> Result<Pairing, FourierError> {
    if f.dim() != 1 {
        return Err(FourierError::Dimension(f.dim()));
    }
    let res = grid
        .values()
        .par_iter()
        .map(|&eps| {
            let r = match f.support_hint(eps) {
                Some(s) if s.is_finite() => s.min(phi.radius()),
                _ => phi.radius(),
            };
            let q = trapezoid(family_times(f, eps, |x| Complex64::new(phi.eval(x), 0.0)), -r, r)?;
            Ok((q.cleaned(), q.converged))
        })
        .collect::<Result<Vec<_>, FourierError>>()?;
    let (values, converged): (Vec<_>, Vec<_>) = res.into_iter().unzip();
    Ok(Pairing { phi, values: SampledScalar::new(grid.clone(), values)?, converged })
}

/// `û_ε(ξ)` at one frequency by direct quadrature over the window, with the
/// convergence flag. Values under the quadrature tolerance are zero.
pub fn spectrum_at(f: &Family, eps: f64, xi: f64) -> Result<(Complex64, bool), FourierError> {
    let l = radius(f, eps)?;
    let q = trapezoid(family_times(f, eps, |x| Complex64::new(0.0, -x * xi).exp()), -l, l)?;
    Ok((q.cleaned(), q.converged))
}

/// `|∫ û_ε v_ε dξ − ∫ u_ε v̂_ε dx| / (1 + |∫ u_ε v̂_ε dx|)`.
///
/// `v` is sampled on the frequency grid of `u`, whose own transform then lands
/// exactly on the spatial grid of `u`.
pub fn parseval_check(u: &Family, v: &Family, eps: f64, l: f64, npts: usize) -> Result<f64, FourierError> {
    check(u, eps, npts)?;
    check(v, eps, npts)?;
    let h = 2.0 * l / npts as f64;
    let dxi = PI / l;
    let us = samples(u, eps, l, npts)?;
    let uhat = transform(&us, l);
    let lv = PI / h;
    let vs = samples(v, eps, lv, npts)?;
    let vhat = transform(&vs, lv);
    let lhs: Complex64 = uhat.iter().zip(&vs).map(|(a, b)| a * b).sum::<Complex64>() * dxi;
    let rhs: Complex64 = us.iter().zip(&vhat).map(|(a, b)| a * b).sum::<Complex64>() * h;
    Ok((lhs - rhs).norm() / (1.0 + rhs.norm()))
}

/// Per-ε quantities of the spectral pass.
struct EpsSpectrum {
    l: f64,
    npts: usize,
    alias: f64,
    /// `log sup |ξ|^β |∂^α û_ε|`, indexed `[α][β]`.
    moments: Vec<Vec<f64>>,
    /// `log sup_{|ξ| ≥ ε^{-1/m}} |û_ε|` for `m = 1..=m_max`.
    exterior: Vec<f64>,
    peak: (f64, f64),
    /// `log |û_ε|` at the fast-scale frequencies `ε^{-1/2}, ε^{-1}, ε^{-2}`.
    spots: Vec<f64>,
}

fn spectral_pass(f: &Family, p: &Params, fp: &FourierParams, eps: f64) -> Result<EpsSpectrum, FourierError> {
    let (l, n) = window(f, eps)?;
    check(f, eps, n)?;
    let u = samples(f, eps, l, n)?;
    let base = spectrum_from_samples(&u, eps, l)?;
    let h = 2.0 * l / n as f64;
    let mut moments = Vec::with_capacity(fp.alpha_max + 1);
    for a in 0..=fp.alpha_max {
        // ∂^α û is the transform of (-ix)^α u.
        let vals = if a == 0 {
            base.values.clone()
        } else {
            let w: Vec<Complex64> = u
                .iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::new(0.0, -(-l + j as f64 * h)).powi(a as i32))
                .collect();
            transform(&w, l)[1..].to_vec()
        };
        moments.push((0..=fp.beta_max).map(|b| weighted_log_sup(&base.xi, &vals, b, 0.0)).collect());
    }
    let exterior = (1..=p.m_max)
        .map(|m| weighted_log_sup(&base.xi, &base.values, 0, eps.powf(-1.0 / m as f64)))
        .collect();
    let noise = base.noise();
    let spots = [0.5, 1.0, 2.0]
        .iter()
        .map(|&s| {
            let xi = eps.powf(-s);
            [xi, -xi]
                .iter()
                .filter_map(|&x| base.value_near(x))
                .map(|v| if v.norm() > noise { v.norm().ln() } else { f64::NEG_INFINITY })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(EpsSpectrum { l, npts: n, alias: base.alias_ratio, moments, exterior, peak: base.peak(), spots })
}

fn rows_for(grid: &EpsGrid, logs: &[f64], fit: &ExponentFit, region: &str, alpha: &str, k: f64) -> Vec<SweepRow> {
    grid.values()
        .iter()
        .zip(logs)
        .map(|(&eps, &l)| SweepRow {
            eps,
            region: region.into(),
            alpha: alpha.into(),
            m_or_k: k,
            sup_logmag: l,
            fit_slope: fit.effective(),
            residual: fit.max_residual,
        })
        .collect()
}

fn spectrum_report(
    f: &Family,
    p: &Params,
    fp: &FourierParams,
) -> Result<(Report, Vec<EpsSpectrum>), FourierError> {
    if f.dim() != 1 {
        return Err(FourierError::Dimension(f.dim()));
    }
    let grid = &fp.grid;
    let passes = grid
        .values()
        .par_iter()
        .map(|&e| spectral_pass(f, p, fp, e))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut exps = vec![vec![0.0; fp.beta_max as usize + 1]; fp.alpha_max + 1];
    for (a, row) in exps.iter_mut().enumerate() {
        for (b, e) in row.iter_mut().enumerate() {
            let logs: Vec<f64> = passes.iter().map(|s| s.moments[a][b]).collect();
            let fit = fit_log_values(grid, &logs)?;
            *e = fit.effective();
            rows.extend(rows_for(grid, &logs, &fit, "spectrum_moment", &a.to_string(), b as f64));
        }
    }
    let mut ext = Vec::new();
    for m in 1..=p.m_max {
        let logs: Vec<f64> = passes.iter().map(|s| s.exterior[m - 1]).collect();
        let fit = fit_log_values(grid, &logs)?;
        ext.push(fit.effective());
        rows.extend(rows_for(grid, &logs, &fit, "spectrum_exterior", "0", m as f64));
    }
    for (s, &eps) in passes.iter().zip(grid.values()) {
        rows.push(SweepRow {
            eps,
            region: "spectrum_peak".into(),
            alpha: "0".into(),
            m_or_k: s.peak.0,
            sup_logmag: s.peak.1.ln(),
            fit_slope: f64::NAN,
            residual: f64::NAN,
        });
    }
    let failing = exps.iter().position(|e| !uniform_in_k(e, p.tol));
    let verdict = if failing.is_some() { Verdict::Fail } else { Verdict::Pass };
    let mut r = Report::new("slowscale_spectrum", verdict)
        .witness("moment_exponents", Value::Array(exps.iter().map(|e| nums(e)).collect()))
        .diag("exterior_exponents", nums(&ext))
        .diag(
            "exterior_condition",
            json!(ext.iter().enumerate().all(|(i, &e)| e >= (i + 1) as f64 - p.tol)),
        )
        .diag("peak_xi", nums(&passes.iter().map(|s| s.peak.0).collect::<Vec<_>>()))
        .diag("window_l", nums(&passes.iter().map(|s| s.l).collect::<Vec<_>>()))
        .diag("npts", json!(passes.iter().map(|s| s.npts).collect::<Vec<_>>()))
        .diag("max_alias_ratio", json!(passes.iter().map(|s| s.alias).fold(0.0, f64::max)))
        .diag("fourier", fp.to_json());
    if let Some(a) = failing {
        r = r.witness("alpha", json!(a)).witness("beta_exponents", nums(&exps[a]));
    }
    r.rows = rows;
    Ok((r, passes))
}

/// Whether `ξ ↦ û_ε(ξ)` is slow-scale supported, read off discrete spectra on
/// the Fourier grid: `sup |ξ|^β |∂^α û_ε|` must grow like `ε^{-N}` with `N`
/// uniform in `β`. The exterior sups over `|ξ| ≥ ε^{-1/m}` are reported too.
pub fn test_slowscale_spectrum(f: &Family, p: &Params, fp: &FourierParams) -> Result<Report, FourierError> {
    Ok(spectrum_report(f, p, fp)?.0)
}

fn negligible(fit: &ExponentFit, n: f64, p: &Params) -> bool {
    fit.effective() >= n - p.tol
        || fit.zero_run > 0
        || (fit.max_residual > p.residual_tol && fit.late_slope > fit.early_slope + p.residual_tol)
}

/// Slow-scale support on both sides; the report carries both sub-reports and
/// a pointwise spot check at fast-scale points.
pub fn test_gs_infinity(f: &Family, p: &Params, fp: &FourierParams) -> Result<Report, FourierError> {
    if f.dim() != 1 {
        return Err(FourierError::Dimension(f.dim()));
    }
    let support = test_slowscale_support(f, p)?;
    let (spectrum, passes) = spectrum_report(f, p, fp)?;

    let labels = ["eps^-1/2", "eps^-1", "eps^-2"];
    let mut spot = Map::new();
    let mut all = true;
    for (i, s) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let logs = p
            .grid
            .values()
            .par_iter()
            .map(|&eps| {
                let x = eps.powf(-s);
                let a = f.value(eps, &[x])?.log_abs();
                let b = f.value(eps, &[-x])?.log_abs();
                Ok(a.max(b))
            })
            .collect::<Result<Vec<f64>, ClassifyError>>()?;
        let fu = fit_log_values(&p.grid, &logs)?;
        let hat: Vec<f64> = passes.iter().map(|q| q.spots[i]).collect();
        let fh = fit_log_values(&fp.grid, &hat)?;
        let (nu, nh) = (negligible(&fu, p.n_max as f64, p), negligible(&fh, p.n_max as f64, p));
        all &= nu && nh;
        spot.insert(
            labels[i].into(),
            json!({"u_exponent": crate::classify::num(fu.effective()), "u_negligible": nu,
                   "uhat_exponent": crate::classify::num(fh.effective()), "uhat_negligible": nh}),
        );
    }
    let spot = Report::new("fast_scale_spot_check", if all { Verdict::Pass } else { Verdict::Fail })
        .witness("points", Value::Object(spot))
        .diag("note", json!("informational; the verdict comes from the support and spectrum tests"));

    let verdict = match (support.verdict, spectrum.verdict) {
        (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    let failing: Vec<&str> = [("support", &support), ("spectrum", &spectrum)]
        .iter()
        .filter(|(_, r)| r.verdict == Verdict::Fail)
        .map(|(s, _)| *s)
        .collect();
    let mut r = Report::new("gs_infinity", verdict).witness("failing_side", json!(failing));
    r.sub_reports = vec![support, spectrum, spot];
    Ok(r)
}

/// Slow-scale frequency nets `ξ_ε` probed for spectral vanishing.
pub const SLOW_PANEL: [(&str, fn(f64) -> f64); 6] = [
    ("0", |_| 0.0),
    ("1", |_| 1.0),
    ("-1", |_| -1.0),
    ("log(1/eps)", |e| (1.0 / e).ln()),
    ("log(1/eps)^2", |e| (1.0 / e).ln().powi(2)),
    ("min(eps^-1/8, 2log(1/eps))", |e| e.powf(-0.125).min(2.0 * (1.0 / e).ln())),
];

/// Tempered equality at the default threshold `n_max`.
pub fn test_tempered_equality(f: &Family, p: &Params, fp: &FourierParams) -> Result<Report, FourierError> {
    test_tempered_equality_at(f, p, fp, p.n_max as f64)
}

/// (a) every shipped test-function pairing is negligible at order `n`;
/// (b) `û_ε(ξ_ε)` is negligible at order `n` on every slow-scale net of
/// [`SLOW_PANEL`]. Passes when (a) and (b) agree.
pub fn test_tempered_equality_at(
    f: &Family,
    p: &Params,
    fp: &FourierParams,
    n: f64,
) -> Result<Report, FourierError> {
    if f.dim() != 1 {
        return Err(FourierError::Dimension(f.dim()));
    }
    let support = test_slowscale_support(f, p)?;
    if !support.passed() {
        return Err(ClassifyError::Precondition("family is not slow-scale supported".into()).into());
    }
    let grid = &fp.grid;
    let mut converged = true;

    let mut pe = Map::new();
    let mut a = true;
    for phi in TestFunction::library() {
        let pr = pairing(f, phi, grid)?;
        converged &= pr.all_converged();
        let e = pr.fit()?.effective();
        a &= e >= n - p.tol;
        pe.insert(phi.name(), crate::classify::num(e));
    }

    let mut se = Map::new();
    let mut b = true;
    for (name, net) in SLOW_PANEL {
        let vals = grid
            .values()
            .par_iter()
            .map(|&eps| spectrum_at(f, eps, net(eps)))
            .collect::<Result<Vec<_>, _>>()?;
        converged &= vals.iter().all(|v| v.1);
        let logs: Vec<f64> = vals.iter().map(|v| v.0.norm().ln()).collect();
        let e = fit_log_values(grid, &logs)?.effective();
        b &= e >= n - p.tol;
        se.insert(name.into(), crate::classify::num(e));
    }

    let sub = |test: &str, ok: bool, key: &str, m: Map<String, Value>| {
        Report::new(test, if ok { Verdict::Pass } else { Verdict::Fail }).witness(key, Value::Object(m))
    };
    let verdict = if !converged {
        Verdict::Inconclusive
    } else if a == b {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mut r = Report::new("tempered_equality", verdict)
        .witness("pairing_negligible", json!(a))
        .witness("spectrum_vanishing", json!(b))
        .witness("threshold", json!(n))
        .diag("quadrature_converged", json!(converged))
        .diag("fourier", fp.to_json());
    r.sub_reports = vec![
        sub("pairing_negligibility", a, "exponents", pe),
        sub("spectrum_vanishing", b, "exponents", se),
    ];
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::bump_mass;

    fn fam(src: &str) -> Family {
        Family::parse("t", src, 1).unwrap()
    }

    fn quick() -> Params {
        Params { k_max: 2, m_max: 3, points: 1025, refine_rounds: 2, grid: EpsGrid::dyadic(4, 16), ..Params::default() }
    }

    #[test]
    fn parseval_examples() {
        let gauss = fam("gauss(x1)");
        assert!(parseval_check(&fam("bump(x1)"), &gauss, 2f64.powi(-6), 4.0, 4096).unwrap() <= 1e-8);
        assert!(parseval_check(&gauss, &gauss, 0.1, 8.0, 1024).unwrap() <= 1e-10);
        assert_eq!(parseval_check(&fam("0*x1"), &gauss, 0.1, 4.0, 1024).unwrap(), 0.0);
    }

    #[test]
    fn mollifier_pairing_tends_to_point_value() {
        let g = EpsGrid::dyadic(4, 15);
        let pr = pairing(&fam("eps^-1*bump(x1/eps)"), TestFunction::Gauss, &g).unwrap();
        assert!(pr.all_converged());
        let last = pr.values.values.last().unwrap();
        assert!((last.re - bump_mass()).abs() < 1e-6, "{last}");
        assert!(pr.fit().unwrap().effective().abs() < 0.1);
    }

    #[test]
    fn oscillatory_pairing_is_negligible() {
        let g = EpsGrid::dyadic(4, 15);
        let f = fam("bump(x1)*sin(x1/eps)");
        for phi in TestFunction::library() {
            let pr = pairing(&f, phi, &g).unwrap();
            assert!(pr.fit().unwrap().effective() >= 8.0, "{}", phi.name());
        }
        let z = pairing(&fam("0*x1"), TestFunction::Gauss, &g).unwrap();
        assert!(z.values.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn direct_spectrum_matches_closed_form() {
        let f = fam("gauss(x1)");
        for xi in [0.0, 1.5, 4.0] {
            let (v, ok) = spectrum_at(&f, 0.1, xi).unwrap();
            assert!(ok);
            assert!((v - TestFunction::Gauss.fourier(xi).unwrap()).norm() < 1e-9);
        }
        let (v, _) = spectrum_at(&fam("bump(x1)"), 0.1, 0.0).unwrap();
        assert!((v.re - bump_mass()).abs() < 1e-9);
    }

    #[test]
    fn slowscale_spectrum_examples() {
        let (p, fp) = (quick(), FourierParams::default());
        let r = test_slowscale_spectrum(&fam("bump(x1)"), &p, &fp).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.witnesses);
        let r = test_slowscale_spectrum(&fam("bump(x1)*exp(i*x1/eps)"), &p, &fp).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.diagnostics["exterior_exponents"][0].as_f64().unwrap() < 0.9);
        let r = test_slowscale_spectrum(&fam("eps^-1*bump(x1/eps)"), &p, &fp).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn gs_infinity_examples() {
        let (p, fp) = (quick(), FourierParams::default());
        let r = test_gs_infinity(&fam("bump(x1)"), &p, &fp).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let r = test_gs_infinity(&fam("bump(x1)*exp(i*x1/eps)"), &p, &fp).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.witnesses["failing_side"], json!(["spectrum"]));
        let r = test_gs_infinity(&fam("gauss(x1 - 1/eps)"), &p, &fp).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.sub_reports[0].verdict, Verdict::Fail);
    }

    #[test]
    fn tempered_equality_examples() {
        let (p, fp) = (quick(), FourierParams::default());
        let pair = |r: &Report| (r.witnesses["pairing_negligible"].clone(), r.witnesses["spectrum_vanishing"].clone());
        let r = test_tempered_equality(&fam("bump(x1)*sin(x1/eps)"), &p, &fp).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(pair(&r), (json!(true), json!(true)));
        let r = test_tempered_equality(&fam("bump(x1)"), &p, &fp).unwrap();
        assert_eq!(pair(&r), (json!(false), json!(false)));
        let lin = fam("eps*bump(x1)");
        let r = test_tempered_equality(&lin, &p, &fp).unwrap();
        assert_eq!((r.verdict, pair(&r)), (Verdict::Pass, (json!(false), json!(false))));
        let r = test_tempered_equality_at(&lin, &p, &fp, 0.5).unwrap();
        assert_eq!((r.verdict, pair(&r)), (Verdict::Pass, (json!(true), json!(true))));
    }
}
