//! The counterexample separating pointwise from classical
//! regularity at a point.
//!
//! With `a_m = 2^{-m}`, `ε_{m,n} = 2^{-n-1/(m+1)}` and `δ = ε_{m,n}^{m+1}`,
//!
//! ```text
//! u_{ε_{m,n}}(x) = δ^{-1} ∫_0^x (x-t)^{m-1}/(m-1)! · φ((t-a_m)/δ) dt
//! ```
//!
//! and `u_ε = 0` for every other ε. In `σ = (x - a_m)/δ` the derivatives are
//! `D^k u = δ^{-(k-m+1)} φ^{(k-m)}(σ)` for `k ≥ m` and the `(m-1-k)`-fold
//! antiderivative of φ, scaled by `δ^{m-1-k}`, for `k < m`. Since φ vanishes
//! off `[-1, 1]`, `u_ε ≡ 0` left of `a_m - δ`.

use super::piecewise::PiecewiseFamily;
use crate::classify::{
    ak_sequence, default_radii, num, nums, test_classical_regular, test_compactum, test_convexity,
    test_pointstar_regular, test_pointwise_regular, test_sharp_regular, ClassifyError, Params, Report, Verdict,
};
use crate::dsl::{kernel, Family, FamilyError, FamilyKind, FamilyRule, Feature};
use crate::ext::Ext;
use crate::points::GenPoint;
use crate::quad::integrate;
use crate::scale::{EpsGrid, SampledScalar, ScaleError};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use std::f64::consts::LN_2;
use std::sync::{Arc, OnceLock};
use thiserror::Error;

/// Largest supported `m_cap`.
pub const M_CAP_MAX: usize = 6;
/// Relative tolerance on the measured drop slope `-(m+1)`.
pub const DROP_SLOPE_REL_TOL: f64 = 0.05;
/// Largest supported `n_cap`.
pub const N_CAP_MAX: usize = 40;
/// Panels of the primary antiderivative quadrature.
const PANELS: usize = 16;
/// Panels of the oracle quadrature.
const ORACLE_PANELS: usize = 256;

#[derive(Debug, Error)]
pub enum ExampleError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

/// Truncation of the double sequence `ε_{m,n}`.
#[derive(Clone, Debug, Serialize)]
pub struct Example510Config {
    /// Branches `m = 1..=m_cap`.
    pub m_cap: usize,
    /// Branches `n = 1..=n_cap`.
    pub n_cap: usize,
    /// Smallest `n` on the fitting grids.
    pub n_grid_min: usize,
}

impl Default for Example510Config {
    fn default() -> Example510Config {
        Example510Config { m_cap: 6, n_cap: 24, n_grid_min: 6 }
    }
}

impl Example510Config {
    pub fn validate(&self) -> Result<(), ExampleError> {
        if !(1..=M_CAP_MAX).contains(&self.m_cap) {
            return Err(ExampleError::Config(format!("m_cap = {} outside 1..={M_CAP_MAX}", self.m_cap)));
        }
        if !(1..=N_CAP_MAX).contains(&self.n_cap) {
            return Err(ExampleError::Config(format!("n_cap = {} outside 1..={N_CAP_MAX}", self.n_cap)));
        }
        if self.n_grid_min == 0 || self.n_cap + 1 < self.n_grid_min + crate::scale::MIN_TAIL {
            return Err(ExampleError::Config(format!(
                "grid n = {}..={} is shorter than {} points",
                self.n_grid_min,
                self.n_cap,
                crate::scale::MIN_TAIL
            )));
        }
        Ok(())
    }

    pub fn a(m: usize) -> f64 {
        2f64.powi(-(m as i32))
    }

    /// `ε_{m,n} = 2^{-n-1/(m+1)}`.
    pub fn eps(m: usize, n: usize) -> f64 {
        2f64.powf(-(n as f64) - 1.0 / (m + 1) as f64)
    }

    /// `L` with `δ = ε_{m,n}^{m+1} = 2^{-L}`.
    pub fn delta_exponent(m: usize, n: usize) -> i64 {
        ((m + 1) * n + 1) as i64
    }

    pub fn delta(m: usize, n: usize) -> f64 {
        2f64.powi(-(Example510Config::delta_exponent(m, n) as i32))
    }

    /// The fitting grid `ε_{m,n}`, `n = n_grid_min..=n_cap`, of one branch.
    pub fn grid(&self, m: usize) -> EpsGrid {
        let eps: Vec<f64> = (self.n_grid_min..=self.n_cap).map(|n| Example510Config::eps(m, n)).collect();
        let len = eps.len();
        EpsGrid::from_values(eps, len).expect("validated schedule")
    }

    /// Pairwise distinctness of all `ε_{m,n}` in the table, decided on the
    /// integers `(n(m+1) + 1)(m'+1)` rather than on floats.
    pub fn schedule_disjoint(&self) -> bool {
        let key = |m: usize, n: usize| (n * (m + 1) + 1, m + 1);
        let mut all = Vec::new();
        for m in 1..=self.m_cap {
            for n in 1..=self.n_cap {
                all.push(key(m, n));
            }
        }
        all.iter().enumerate().all(|(i, &(p, q))| all[i + 1..].iter().all(|&(r, s)| p * s != r * q))
    }
}

/// `∫ s^i φ(s) ds`.
fn moment(i: usize) -> f64 {
    static M: OnceLock<Vec<f64>> = OnceLock::new();
    M.get_or_init(|| {
        (0..=M_CAP_MAX)
            .map(|i| integrate(|s| s.powi(i as i32) * kernel::bump(0, s).to_c64().re, -1.0, 1.0, 64))
            .collect()
    })[i]
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

fn factorial(n: usize) -> f64 {
    (2..=n).map(|i| i as f64).product()
}

/// `2^{-p L}`.
fn delta_pow(l: i64, p: i64) -> Ext {
    Ext::from_log(-((p * l) as f64) * LN_2)
}

/// The branch `(m, n)` of the family.
#[derive(Clone, Debug)]
pub struct Branch {
    pub m: usize,
    pub n: usize,
    a: f64,
    delta: f64,
    l: i64,
}

impl Branch {
    pub fn new(m: usize, n: usize) -> Branch {
        Branch {
            m,
            n,
            a: Example510Config::a(m),
            delta: Example510Config::delta(m, n),
            l: Example510Config::delta_exponent(m, n),
        }
    }

    /// `D^k u_ε` at `a_m + d`.
    pub fn eval(&self, k: usize, d: f64) -> Ext {
        let m = self.m;
        let sigma = d / self.delta;
        if sigma <= -1.0 {
            return Ext::ZERO;
        }
        if k >= m {
            return kernel::bump(k - m, sigma) * delta_pow(self.l, -((k - m + 1) as i64));
        }
        let j = m - 1 - k;
        if sigma < 1.0 {
            let jf = factorial(j);
            let v = integrate(|s| (sigma - s).powi(j as i32) / jf * kernel::bump(0, s).to_c64().re, -1.0, sigma, PANELS);
            return Ext::real(v) * delta_pow(self.l, j as i64);
        }
        // Beyond the support: Σ_{i even} d^{j-i}/(j-i)! · δ^i/i! · M_i.
        let ld = -(self.l as f64) * LN_2;
        let mut acc = Ext::ZERO;
        for i in (0..=j).step_by(2) {
            let lt = (j - i) as f64 * d.ln() - ln_factorial(j - i) + i as f64 * ld - ln_factorial(i) + moment(i).ln();
            acc = acc + Ext::from_log(lt);
        }
        acc
    }

    fn order(&self, alpha: &[usize]) -> Result<usize, FamilyError> {
        if alpha.len() != 1 {
            return Err(FamilyError::BadIndex { got: alpha.len(), dim: 1 });
        }
        if alpha[0] > self.max_order() {
            return Err(FamilyError::OrderCap { order: alpha[0], cap: self.max_order() });
        }
        Ok(alpha[0])
    }
}

impl FamilyRule for Branch {
    fn dim(&self) -> usize {
        1
    }

    fn max_order(&self) -> usize {
        self.m + kernel::bump_table_len() - 1
    }

    fn deriv(&self, alpha: &[usize], _eps: f64, x: &[f64]) -> Result<Ext, FamilyError> {
        Ok(self.eval(self.order(alpha)?, x[0] - self.a))
    }

    fn deriv_offset(&self, alpha: &[usize], _eps: f64, x: &[f64], dx: &[f64]) -> Result<Ext, FamilyError> {
        Ok(self.eval(self.order(alpha)?, (x[0] - self.a) + dx[0]))
    }

    fn features(&self, _eps: f64) -> Vec<Feature> {
        vec![Feature { center: vec![self.a], width: self.delta }]
    }
}

/// Point values stated for the example, and an independent quadrature of
/// the integral representation.
#[derive(Clone, Debug)]
pub struct CounterexampleOracle {
    pub config: Example510Config,
}

impl CounterexampleOracle {
    /// `D^k u_{ε_{m,n}}(a_m) = ε^{-(m+1)(k-m+1)} φ^{(k-m)}(0)` for `k ≥ m`.
    pub fn at_a(&self, m: usize, n: usize, k: usize) -> Option<Ext> {
        (k >= m).then(|| {
            let eps = Example510Config::eps(m, n);
            kernel::bump(k - m, 0.0) * Ext::from_log(-(((m + 1) * (k - m + 1)) as f64) * eps.ln())
        })
    }

    /// `D^k u_{ε_{m,n}}(a_m + ε^{m+1}) = 0` for `k ≥ m`.
    pub fn at_shifted(&self, m: usize, k: usize) -> Option<Ext> {
        (k >= m).then_some(Ext::ZERO)
    }

    /// `sup_{|x| ≤ R} |D^k u_ε| ≤ e^R ∫|φ|` for `k < m`.
    pub fn low_order_bound(&self, r: f64) -> f64 {
        r.exp() * crate::quad::bump_mass()
    }

    /// `∫_{-1}^{min(σ,1)} (σ-s)^{m-1}/(m-1)! φ^{(k)}(s) ds`, which equals
    /// `δ^{k+1-m} D^k u_ε(a_m + σδ)` for every `k`. Returns the value and the
    /// integral of the absolute integrand.
    pub fn integral_form(&self, m: usize, k: usize, sigma: f64) -> (f64, f64) {
        if sigma <= -1.0 {
            return (0.0, 0.0);
        }
        let top = sigma.min(1.0);
        let mf = factorial(m - 1);
        let g = |s: f64| (sigma - s).powi(m as i32 - 1) / mf * kernel::bump(k, s).to_c64().re;
        (integrate(g, -1.0, top, ORACLE_PANELS), integrate(|s| g(s).abs(), -1.0, top, ORACLE_PANELS))
    }
}

/// The family together with its oracle.
pub fn make_example_510(config: &Example510Config) -> Result<(Family, CounterexampleOracle), ExampleError> {
    config.validate()?;
    let mut branches: Vec<(f64, Arc<dyn FamilyRule>)> = Vec::new();
    for m in 1..=config.m_cap {
        for n in 1..=config.n_cap {
            branches.push((Example510Config::eps(m, n), Arc::new(Branch::new(m, n))));
        }
    }
    let grids = (1..=config.m_cap).map(|m| config.grid(m)).collect();
    let singular = (1..=config.m_cap).map(Example510Config::a).collect();
    let rule = PiecewiseFamily::new(1, branches, grids, singular);
    let f = Family::new("example510", FamilyKind::Piecewise, Arc::new(rule));
    Ok((f, CounterexampleOracle { config: config.clone() }))
}

/// Grid of the nets: every `ε_{m,n}` of the fitting grids plus the
/// off-sequence points `2^{-n}`.
pub fn net_grid(config: &Example510Config) -> Result<EpsGrid, ExampleError> {
    let mut parts: Vec<EpsGrid> = (1..=config.m_cap).map(|m| config.grid(m)).collect();
    parts.push(EpsGrid::dyadic(config.n_grid_min as u32, config.n_cap as u32));
    let len: usize = parts.iter().map(|g| g.len()).sum();
    Ok(EpsGrid::union(&parts, len)?)
}

/// A net on [`net_grid`] given per branch by `(hi, lo)`, zero off the sequences.
fn net(config: &Example510Config, at: impl Fn(usize, usize) -> (f64, f64)) -> Result<GenPoint, ExampleError> {
    let grid = net_grid(config)?;
    let mut hi = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut lo = vec![0.0; grid.len()];
    for m in 1..=config.m_cap {
        for n in config.n_grid_min..=config.n_cap {
            let i = grid.index_of(Example510Config::eps(m, n)).expect("branch on net grid");
            let (h, l) = at(m, n);
            hi[i] = h.into();
            lo[i] = l;
        }
    }
    Ok(GenPoint::sampled(vec![SampledScalar::new(grid, hi)?])?.with_low_parts(vec![lo])?)
}

/// `x̃0`: `a_m + ε_{m,n}^{m+1}` on the sequences, 0 elsewhere.
pub fn make_x0_net(config: &Example510Config) -> Result<GenPoint, ExampleError> {
    config.validate()?;
    net(config, |m, n| (Example510Config::a(m), Example510Config::delta(m, n)))
}

/// `ỹ`: `a_{m0}` on the `m0`-th sequence, `x̃0` elsewhere, so that
/// `|ỹ - x̃0| = ε^{m0+1}` there.
pub fn make_y_net(config: &Example510Config, m0: usize) -> Result<GenPoint, ExampleError> {
    config.validate()?;
    net(config, |m, n| (Example510Config::a(m), if m == m0 { 0.0 } else { Example510Config::delta(m, n) }))
}

/// Radii `2^{-1}..2^{-(m_cap-1)}`: each contains `a_{m_cap}`, the last
/// branch of the truncated family.
pub fn classical_radii(config: &Example510Config) -> Vec<f64> {
    (1..=config.m_cap.saturating_sub(1).max(1)).map(|j| 2f64.powi(-(j as i32))).collect()
}

/// Least-squares slope of `a_k` against `k` over `k = from..`.
pub fn drop_slope(a_k: &[f64], from: usize) -> f64 {
    let pts: Vec<(f64, f64)> = a_k.iter().enumerate().skip(from).map(|(k, &a)| (k as f64, a)).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn expect(name: &str, r: Report, want: Verdict) -> Report {
    let ok = r.verdict == want;
    Report::new(name, if ok { Verdict::Pass } else { Verdict::Fail })
        .witness("measured", json!(r.verdict))
        .witness("expected", json!(want))
        .with_sub(r)
}

trait WithSub {
    fn with_sub(self, r: Report) -> Report;
}

impl WithSub for Report {
    fn with_sub(mut self, r: Report) -> Report {
        self.sub_reports.push(r);
        self
    }
}

/// Runs the five regularity claims of the example. Each sub-report is `Pass`
/// when the measured verdict equals the claimed one; the drop slopes of
/// `a_k` at `a_m`, `m ≤ min(3, m_cap)`, and the compactum comparisons are
/// attached as further checks.
pub fn verify_example_510(config: &Example510Config, p: &Params) -> Result<Report, ExampleError> {
    let (f, _) = make_example_510(config)?;
    let k_max = p.k_max;
    // Branch m first blows up at order m + 1.
    if k_max < config.m_cap + 1 {
        return Err(ExampleError::Config(format!("k_max = {k_max} cannot see branch m_cap = {}", config.m_cap)));
    }
    let mut subs = Vec::new();

    let a0 = ak_sequence(&f, &[0.0], k_max, &default_radii(), p)?;
    subs.push(expect("pointstar_at_0", test_pointstar_regular(&a0), Verdict::Pass));
    let c0 = test_classical_regular(&f, &[0.0], k_max, &classical_radii(config), p)?;
    subs.push(expect("classical_at_0", c0, Verdict::Fail));

    let x0 = make_x0_net(config)?;
    // The truncated family realizes sharp balls of order n only for n <= m_cap + 1.
    let sharp_p = Params { sharp_n_max: p.sharp_n_max.min(config.m_cap + 1), ..p.clone() };
    let sharp = test_sharp_regular(&f, &x0, None, k_max, &sharp_p)?;
    subs.push(expect("pointwise_at_x0", sharp.pointwise, Verdict::Pass));
    let m0 = 1;
    let y = make_y_net(config, m0)?;
    let at_y = test_pointwise_regular(&f, &y, k_max, p)?;
    let sharp_fail = sharp.sharp.verdict == Verdict::Fail && at_y.verdict == Verdict::Fail;
    subs.push(
        Report::new("sharp_at_x0", if sharp_fail { Verdict::Pass } else { Verdict::Fail })
            .witness("measured", json!(sharp.sharp.verdict))
            .witness("expected", json!(Verdict::Fail))
            .witness("perturbed_m0", json!(m0))
            .witness("perturbation_valuation", json!(m0 + 1))
            .witness("pointwise_at_y", json!(at_y.verdict))
            .with_sub(sharp.sharp)
            .with_sub(at_y),
    );

    let mut at_a = Report::new("pointwise_at_a_m", Verdict::Pass);
    let mut per_m = Vec::new();
    for m in 1..=config.m_cap {
        let r = test_pointwise_regular(&f, &GenPoint::classical(&[Example510Config::a(m)]), k_max, p)?;
        if r.verdict != Verdict::Fail {
            at_a.verdict = Verdict::Fail;
        }
        per_m.push(json!({"m": m, "verdict": r.verdict}));
        at_a.sub_reports.push(r);
    }
    subs.push(at_a.witness("per_m", json!(per_m)));

    let mut slopes = Report::new("drop_slope_at_a_m", Verdict::Pass);
    let mut table = Vec::new();
    for m in 1..=config.m_cap.min(3) {
        let a = ak_sequence(&f, &[Example510Config::a(m)], k_max, &default_radii(), p)?;
        let s = drop_slope(&a.a_k, m);
        let want = -((m + 1) as f64);
        let conv = test_convexity(&a);
        if (s / want - 1.0).abs() > DROP_SLOPE_REL_TOL || conv.verdict != Verdict::Pass {
            slopes.verdict = Verdict::Fail;
        }
        table.push(json!({"m": m, "slope": num(s), "expected": want, "a_k": nums(&a.a_k), "convexity": conv.verdict}));
    }
    subs.push(slopes.witness("slopes", json!(table)));

    let radii = default_radii();
    let lo = Example510Config::a(3.min(config.m_cap)) / 2.0;
    let near = test_compactum(&f, lo, 1.0, 3, k_max, &radii, p)?;
    let ok = near.witnesses["classical_regular"] == json!(false) && near.witnesses["pointstar_regular"] == json!(false);
    subs.push(
        Report::new("compactum_near_0", if ok { Verdict::Pass } else { Verdict::Fail })
            .witness("interval", json!([lo, 1.0]))
            .with_sub(near),
    );
    let left = test_compactum(&f, -1.0, -0.1, 3, k_max, &radii, p)?;
    subs.push(expect("compactum_left", left, Verdict::Pass));

    let all = subs.iter().all(|r| r.verdict == Verdict::Pass);
    let mut rep = Report::new("example510", if all { Verdict::Pass } else { Verdict::Fail })
        .witness(
            "claims",
            json!(subs.iter().map(|r| json!({"claim": r.test, "agrees": r.verdict == Verdict::Pass})).collect::<Vec<_>>()),
        )
        .diag("config", serde_json::to_value(config).expect("plain config"))
        .diag("schedule_disjoint", json!(config.schedule_disjoint()));
    rep.sub_reports = subs;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Example510Config {
        Example510Config::default()
    }

    #[test]
    fn schedule_is_disjoint_and_decreasing() {
        let c = Example510Config { m_cap: 6, n_cap: 40, n_grid_min: 1 };
        assert!(c.schedule_disjoint());
        for m in 1..=6 {
            for n in 1..40 {
                assert!(Example510Config::eps(m, n + 1) < Example510Config::eps(m, n));
            }
            assert!(Example510Config::a(m + 1) < Example510Config::a(m));
            let e = Example510Config::eps(m, 7);
            assert!((e.powi(m as i32 + 1) / Example510Config::delta(m, 7) - 1.0).abs() < 1e-13);
        }
        let mut all: Vec<f64> = (1..=6).flat_map(|m| (1..=40).map(move |n| Example510Config::eps(m, n))).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        assert_eq!(all.len(), 240);
    }

    #[test]
    fn config_bounds() {
        assert!(Example510Config { m_cap: 7, ..cfg() }.validate().is_err());
        assert!(Example510Config { n_cap: 8, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn closed_form_matches_integral_representation() {
        let o = CounterexampleOracle { config: cfg() };
        for m in 1..=3 {
            for n in 1..=8 {
                let b = Branch::new(m, n);
                for k in 0..=6 {
                    for sigma in [-0.75, -0.3, 0.3, 0.75, 2.5] {
                        let got = b.eval(k, sigma * b.delta) / delta_pow(b.l, m as i64 - 1 - k as i64);
                        let got = got.as_real().unwrap();
                        let (want, scale) = o.integral_form(m, k, sigma);
                        let tol = 1e-6 * if want.abs() > 1e-3 * scale { want.abs() } else { scale };
                        assert!((got - want).abs() <= tol, "m={m} n={n} k={k} σ={sigma}: {got} vs {want}");
                    }
                }
            }
        }
    }

    #[test]
    fn quadrature_branch_matches_closed_form_at_listed_point() {
        let (f, _) = make_example_510(&cfg()).unwrap();
        let (m, n) = (2, 6);
        let eps = Example510Config::eps(m, n);
        let delta = Example510Config::delta(m, n);
        let a = Example510Config::a(m);
        let closed = kernel::bump(1, 0.3) * Ext::from_log(-6.0 * eps.ln());
        let got = f.deriv_offset(&[3], eps, &[a], &[0.3 * delta]).unwrap();
        assert!(((got / closed).as_real().unwrap() - 1.0).abs() < 1e-12);
        let (q, _) = CounterexampleOracle { config: cfg() }.integral_form(m, 3, 0.3);
        let q = Ext::real(q) * delta_pow(Example510Config::delta_exponent(m, n), -2);
        assert!(((q / closed).as_real().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stated_point_values() {
        let c = cfg();
        let (f, o) = make_example_510(&c).unwrap();
        for m in 1..=4 {
            for n in [6, 12, 24] {
                let eps = Example510Config::eps(m, n);
                let a = Example510Config::a(m);
                for k in m..=m + 6 {
                    let got = f.deriv_offset(&[k], eps, &[a], &[0.0]).unwrap();
                    let want = o.at_a(m, n, k).unwrap();
                    if want.is_zero() {
                        assert!(got.is_zero());
                    } else {
                        assert!(((got / want).as_real().unwrap() - 1.0).abs() < 1e-9, "m={m} n={n} k={k}");
                    }
                    let shifted = f.deriv_offset(&[k], eps, &[a], &[Example510Config::delta(m, n)]).unwrap();
                    assert_eq!(Some(shifted), o.at_shifted(m, k));
                }
            }
        }
        // low orders stay below e^R ∫|φ| on |x| ≤ 1
        for m in 2..=4 {
            let eps = Example510Config::eps(m, 10);
            for k in 0..m {
                for i in 0..=400 {
                    let x = -1.0 + i as f64 / 200.0;
                    let v = f.deriv(&[k], eps, &[x]).unwrap().log_abs();
                    assert!(v <= o.low_order_bound(1.0).ln(), "m={m} k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn vanishes_left_of_the_support_and_off_sequence() {
        let (f, _) = make_example_510(&cfg()).unwrap();
        for m in 1..=6 {
            let eps = Example510Config::eps(m, 9);
            let (a, delta) = (Example510Config::a(m), Example510Config::delta(m, 9));
            for k in 0..=8 {
                for x in [-3.0, -0.5, 0.0, a * 0.999] {
                    assert!(f.deriv(&[k], eps, &[x]).unwrap().is_zero());
                }
                assert!(f.deriv_offset(&[k], eps, &[a], &[-delta]).unwrap().is_zero());
                assert!(!f.deriv_offset(&[k], eps, &[a], &[-0.5 * delta]).unwrap().is_zero());
            }
        }
        for eps in [2f64.powi(-7), 0.3, 2f64.powf(-7.4)] {
            assert!(f.deriv(&[0], eps, &[0.6]).unwrap().is_zero());
        }
        let v = f.deriv(&[0], Example510Config::eps(2, 5), &[1.0]).unwrap();
        assert!(v.as_real().unwrap() > 0.0);
    }

    #[test]
    fn x0_net_values() {
        let c = cfg();
        let x0 = make_x0_net(&c).unwrap();
        let e = Example510Config::eps(1, 6);
        let (hi, lo) = x0.value_at(e).unwrap();
        assert_eq!((hi[0], lo[0]), (0.5, 2f64.powi(-13)));
        let (hi, lo) = x0.value_at(2f64.powi(-9)).unwrap();
        assert_eq!((hi[0], lo[0]), (0.0, 0.0));
        assert_eq!(x0.classify_scale(), crate::points::ScaleClass::Slow);
        assert!(x0.is_compactly_supported(&[(0.0, 1.0)]));
        // the schedule at ε_{1,4}: a_1 + ε^2 = 2^{-1} + 2^{-9}
        assert_eq!(Example510Config::a(1) + Example510Config::delta(1, 4), 0.5 + 2f64.powi(-9));
        let y = make_y_net(&c, 1).unwrap();
        assert_eq!(y.value_at(e).unwrap().1[0], 0.0);
        assert_eq!(y.value_at(Example510Config::eps(2, 6)).unwrap(), x0.value_at(Example510Config::eps(2, 6)).unwrap());
    }

    #[test]
    fn drop_slope_of_exact_sequence() {
        let a: Vec<f64> = (0..=8).map(|k: i32| if k < 2 { 0.0 } else { -3.0 * (k - 1) as f64 }).collect();
        assert!((drop_slope(&a, 2) + 3.0).abs() < 1e-12);
    }
}

