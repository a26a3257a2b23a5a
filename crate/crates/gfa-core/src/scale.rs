//! Generalized numbers: exact term sums `Σ c·ε^a·log(1/ε)^b`, nets sampled on
//! an ε-grid, valuations, the sharp norm, idempotent interleaving and
//! exponent fitting.

use num_complex::Complex64;
use serde::Serialize;
use std::cmp::Ordering;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Values with `|v| < SATURATION_FLOOR` count as zero in fits.
pub const SATURATION_FLOOR: f64 = 1e-300;
/// Default number of trailing grid points used for fitting.
pub const DEFAULT_TAIL: usize = 12;
/// Minimum number of points in a tail window.
pub const MIN_TAIL: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("non-finite coefficient in term list")]
    NonFinite,
    #[error("scalars live on different grids")]
    GridMismatch,
    #[error("tail window is empty")]
    EmptyWindow,
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("exact scalars only interleave with the all/none idempotents")]
    ExactIdempotent,
}

/// One term `coeff · ε^a · log(1/ε)^b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Term {
    pub coeff: Complex64,
    pub a: f64,
    pub b: i32,
}

impl Term {
    pub fn new(coeff: impl Into<Complex64>, a: f64, b: i32) -> Term {
        Term { coeff: coeff.into(), a, b }
    }
}

fn term_order(x: &Term, y: &Term) -> Ordering {
    x.a.total_cmp(&y.a).then(y.b.cmp(&x.b))
}

/// Exact representative of a generalized number.
#[derive(Clone, Debug, PartialEq, Default, Serialize)]
pub struct ExactScalar {
    terms: Vec<Term>,
}

impl ExactScalar {
    pub fn zero() -> ExactScalar {
        ExactScalar { terms: Vec::new() }
    }

    pub fn constant(c: impl Into<Complex64>) -> ExactScalar {
        ExactScalar::monomial(c, 0.0, 0)
    }

    /// `c · ε^a · log(1/ε)^b`; panics on a non-finite coefficient or exponent.
    pub fn monomial(c: impl Into<Complex64>, a: f64, b: i32) -> ExactScalar {
        ExactScalar::normalize(vec![Term::new(c, a, b)]).expect("finite monomial")
    }

    /// `ε^a`.
    pub fn eps_pow(a: f64) -> ExactScalar {
        ExactScalar::monomial(1.0, a, 0)
    }

    /// `log(1/ε)^b`.
    pub fn log_pow(b: i32) -> ExactScalar {
        ExactScalar::monomial(1.0, 0.0, b)
    }

    /// Sort by `(a asc, b desc)`, merge equal exponent pairs, drop zeros.
    pub fn normalize(mut terms: Vec<Term>) -> Result<ExactScalar, ScaleError> {
        if terms
            .iter()
            .any(|t| !t.coeff.re.is_finite() || !t.coeff.im.is_finite() || !t.a.is_finite())
        {
            return Err(ScaleError::NonFinite);
        }
        terms.sort_by(term_order);
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(last) if last.a == t.a && last.b == t.b => last.coeff += t.coeff,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coeff.re != 0.0 || t.coeff.im != 0.0);
        Ok(ExactScalar { terms: out })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Smallest ε-exponent; `+inf` for zero. Log powers do not shift it.
    pub fn valuation(&self) -> f64 {
        self.terms.first().map_or(f64::INFINITY, |t| t.a)
    }

    /// `e^{-v}`, and 0 for the zero scalar.
    pub fn sharp_norm(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            (-self.valuation()).exp()
        }
    }

    /// True iff the net tends to 0 as ε → 0.
    pub fn tends_to_zero(&self) -> bool {
        self.terms.iter().all(|t| t.a > 0.0 || (t.a == 0.0 && t.b < 0))
    }

    /// True iff the net stays bounded as ε → 0.
    pub fn is_bounded(&self) -> bool {
        self.terms.iter().all(|t| t.a > 0.0 || (t.a == 0.0 && t.b <= 0))
    }

    /// `lim_{ε→0}` for bounded scalars.
    pub fn limit(&self) -> Option<Complex64> {
        if !self.is_bounded() {
            return None;
        }
        Some(
            self.terms
                .iter()
                .filter(|t| t.a == 0.0 && t.b == 0)
                .map(|t| t.coeff)
                .sum(),
        )
    }

    pub fn eval(&self, eps: f64) -> Complex64 {
        let l = -eps.ln();
        self.terms
            .iter()
            .map(|t| t.coeff * eps.powf(t.a) * l.powi(t.b))
            .sum()
    }

    pub fn sample(&self, grid: &EpsGrid) -> SampledScalar {
        SampledScalar {
            grid: grid.clone(),
            values: grid.eps.iter().map(|&e| self.eval(e)).collect(),
        }
    }

    /// Coefficient-wise complex conjugate.
    pub fn conj(&self) -> ExactScalar {
        ExactScalar {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: t.coeff.conj(), ..*t })
                .collect(),
        }
    }
}

impl Add for &ExactScalar {
    type Output = ExactScalar;
    fn add(self, o: &ExactScalar) -> ExactScalar {
        let mut t = self.terms.clone();
        t.extend_from_slice(&o.terms);
        ExactScalar::normalize(t).expect("finite terms stay finite")
    }
}

impl Add for ExactScalar {
    type Output = ExactScalar;
    fn add(self, o: ExactScalar) -> ExactScalar {
        &self + &o
    }
}

impl Neg for &ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar {
            terms: self.terms.iter().map(|t| Term { coeff: -t.coeff, ..*t }).collect(),
        }
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        -&self
    }
}

impl Sub for &ExactScalar {
    type Output = ExactScalar;
    fn sub(self, o: &ExactScalar) -> ExactScalar {
        self + &(-o)
    }
}

impl Sub for ExactScalar {
    type Output = ExactScalar;
    fn sub(self, o: ExactScalar) -> ExactScalar {
        &self - &o
    }
}

impl Mul for &ExactScalar {
    type Output = ExactScalar;
    fn mul(self, o: &ExactScalar) -> ExactScalar {
        let mut t = Vec::with_capacity(self.terms.len() * o.terms.len());
        for x in &self.terms {
            for y in &o.terms {
                t.push(Term { coeff: x.coeff * y.coeff, a: x.a + y.a, b: x.b + y.b });
            }
        }
        ExactScalar::normalize(t).expect("finite terms stay finite")
    }
}

impl Mul for ExactScalar {
    type Output = ExactScalar;
    fn mul(self, o: ExactScalar) -> ExactScalar {
        &self * &o
    }
}

/// Strictly decreasing ε values in (0,1) with a trailing fit window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsGrid {
    eps: Vec<f64>,
    tail: usize,
}

impl EpsGrid {
    /// `ε_i = 2^{-i}` for `i = lo..=hi`.
    pub fn dyadic(lo: u32, hi: u32) -> EpsGrid {
        let eps = (lo..=hi).map(|i| 2f64.powi(-(i as i32))).collect::<Vec<_>>();
        let tail = eps.len().min(DEFAULT_TAIL);
        EpsGrid { eps, tail }
    }

    /// `count` geometric points from `start` down to `stop`.
    pub fn geometric(start: f64, stop: f64, count: usize) -> Result<EpsGrid, ScaleError> {
        if !(0.0 < stop && stop < start && start < 1.0) || count < MIN_TAIL {
            return Err(ScaleError::BadGrid(format!(
                "need 0 < stop < start < 1 and count >= {MIN_TAIL}"
            )));
        }
        let r = (stop / start).powf(1.0 / (count - 1) as f64);
        let eps = (0..count)
            .map(|i| if i + 1 == count { stop } else { start * r.powi(i as i32) })
            .collect::<Vec<_>>();
        EpsGrid::from_values(eps, count.min(DEFAULT_TAIL))
    }

    /// Any strictly decreasing list in (0,1); the last `tail` points form the window.
    pub fn from_values(eps: Vec<f64>, tail: usize) -> Result<EpsGrid, ScaleError> {
        if eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(ScaleError::BadGrid("values must lie in (0,1)".into()));
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ScaleError::BadGrid("values must strictly decrease".into()));
        }
        if tail == 0 {
            return Err(ScaleError::EmptyWindow);
        }
        if tail < MIN_TAIL || tail > eps.len() {
            return Err(ScaleError::BadGrid(format!(
                "tail window of {tail} points (need {MIN_TAIL}..={})",
                eps.len()
            )));
        }
        Ok(EpsGrid { eps, tail })
    }

    pub fn values(&self) -> &[f64] {
        &self.eps
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn tail_range(&self) -> std::ops::Range<usize> {
        self.eps.len() - self.tail..self.eps.len()
    }

    /// Constant ratio within `1e-12`.
    pub fn is_geometric(&self) -> bool {
        if self.eps.len() < 3 {
            return true;
        }
        let r0 = self.eps[1] / self.eps[0];
        self.eps.windows(2).all(|w| ((w[1] / w[0]) / r0 - 1.0).abs() <= 1e-12)
    }

    /// Index of a grid value equal to `eps` up to `1e-12` relative.
    pub fn index_of(&self, eps: f64) -> Option<usize> {
        self.eps.iter().position(|&e| ((e - eps) / e).abs() <= 1e-12)
    }

    /// Merge several grids into one decreasing list, tail over the union.
    pub fn union(parts: &[EpsGrid], tail: usize) -> Result<EpsGrid, ScaleError> {
        let mut all: Vec<f64> = parts.iter().flat_map(|g| g.eps.iter().copied()).collect();
        all.sort_by(|a, b| b.total_cmp(a));
        all.dedup_by(|a, b| ((*a - *b) / *b).abs() <= 1e-12);
        let tail = tail.min(all.len());
        EpsGrid::from_values(all, tail)
    }
}

impl Default for EpsGrid {
    fn default() -> EpsGrid {
        EpsGrid::dyadic(4, 24)
    }
}

/// A net sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledScalar {
    pub grid: EpsGrid,
    pub values: Vec<Complex64>,
}

impl SampledScalar {
    pub fn new(grid: EpsGrid, values: Vec<Complex64>) -> Result<SampledScalar, ScaleError> {
        if values.len() != grid.len() {
            return Err(ScaleError::BadGrid("value count differs from grid size".into()));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(ScaleError::NonFinite);
        }
        Ok(SampledScalar { grid, values })
    }

    pub fn from_fn(grid: &EpsGrid, f: impl Fn(f64) -> Complex64) -> SampledScalar {
        SampledScalar { grid: grid.clone(), values: grid.eps.iter().map(|&e| f(e)).collect() }
    }

    fn zip(
        &self,
        o: &SampledScalar,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<SampledScalar, ScaleError> {
        if self.grid != o.grid {
            return Err(ScaleError::GridMismatch);
        }
        Ok(SampledScalar {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, o: &SampledScalar) -> Result<SampledScalar, ScaleError> {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &SampledScalar) -> Result<SampledScalar, ScaleError> {
        self.zip(o, |a, b| a - b)
    }

    pub fn mul(&self, o: &SampledScalar) -> Result<SampledScalar, ScaleError> {
        self.zip(o, |a, b| a * b)
    }

    pub fn abs(&self) -> SampledScalar {
        SampledScalar {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect(),
        }
    }

    pub fn value_at(&self, eps: f64) -> Option<Complex64> {
        self.grid.index_of(eps).map(|i| self.values[i])
    }

    pub fn log_abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm().ln()).collect()
    }
}

/// Least-squares exponent of a sampled net.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    /// Estimated exponent `a` in `|x_ε| ≈ C ε^a`; `+inf` when saturated.
    pub slope: f64,
    pub intercept: f64,
    /// Sup of `|log|x_ε| − fit|` over the tail, natural-log units.
    pub max_residual: f64,
    /// All tail values under [`SATURATION_FLOOR`].
    pub saturated_zero: bool,
    /// Slopes of the first and second half of the tail window.
    pub early_slope: f64,
    pub late_slope: f64,
    /// Number of trailing tail values under the floor.
    pub zero_run: usize,
}

impl ExponentFit {
    /// Exponent used for verdicts: `+inf` when the net is eventually zero
    /// (saturated, or the last three tail values are under the floor).
    pub fn effective(&self) -> f64 {
        if self.saturated_zero || self.zero_run >= 3 {
            f64::INFINITY
        } else {
            self.slope
        }
    }
}

fn lsq(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Fit on natural-log magnitudes (`-inf` allowed for zero values).
pub fn fit_log_values(grid: &EpsGrid, logs: &[f64]) -> Result<ExponentFit, ScaleError> {
    if logs.len() != grid.len() {
        return Err(ScaleError::BadGrid("value count differs from grid size".into()));
    }
    let r = grid.tail_range();
    if r.is_empty() {
        return Err(ScaleError::EmptyWindow);
    }
    let floor = SATURATION_FLOOR.ln();
    let x: Vec<f64> = grid.eps[r.clone()].iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = logs[r].iter().map(|&l| if l.is_nan() || l < floor { floor } else { l }).collect();
    let zero_run = y.iter().rev().take_while(|&&v| v <= floor).count();
    if zero_run == y.len() {
        return Ok(ExponentFit {
            slope: f64::INFINITY,
            intercept: 0.0,
            max_residual: 0.0,
            saturated_zero: true,
            early_slope: f64::INFINITY,
            late_slope: f64::INFINITY,
            zero_run,
        });
    }
    let (slope, intercept) = lsq(&x, &y);
    let max_residual = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - (slope * a + intercept)).abs())
        .fold(0.0, f64::max);
    let h = x.len() / 2;
    let (early_slope, _) = lsq(&x[..h.max(2)], &y[..h.max(2)]);
    let (late_slope, _) = lsq(&x[h.min(x.len() - 2)..], &y[h.min(y.len() - 2)..]);
    Ok(ExponentFit {
        slope,
        intercept,
        max_residual,
        saturated_zero: false,
        early_slope,
        late_slope,
        zero_run,
    })
}

/// Least-squares line of `log|value|` against `log ε` over the tail window.
pub fn fit_exponent(s: &SampledScalar) -> Result<ExponentFit, ScaleError> {
    fit_log_values(&s.grid, &s.log_abs())
}

/// The idempotent `e_S`.
#[derive(Clone, Debug, PartialEq)]
pub enum Idempotent {
    All,
    None,
    /// Membership per grid index.
    Mask(Vec<bool>),
}

impl Idempotent {
    pub fn complement(&self) -> Idempotent {
        match self {
            Idempotent::All => Idempotent::None,
            Idempotent::None => Idempotent::All,
            Idempotent::Mask(m) => Idempotent::Mask(m.iter().map(|b| !b).collect()),
        }
    }

    fn contains(&self, i: usize) -> bool {
        match self {
            Idempotent::All => true,
            Idempotent::None => false,
            Idempotent::Mask(m) => m.get(i).copied().unwrap_or(false),
        }
    }

    /// `e_S` as a sampled 0/1 net.
    pub fn as_sampled(&self, grid: &EpsGrid) -> SampledScalar {
        SampledScalar {
            grid: grid.clone(),
            values: (0..grid.len())
                .map(|i| Complex64::new(if self.contains(i) { 1.0 } else { 0.0 }, 0.0))
                .collect(),
        }
    }
}

/// A scalar on either layer.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(ExactScalar),
    Sampled(SampledScalar),
}

impl Scalar {
    /// Value at `eps`: any ε for exact scalars, grid points only for sampled ones.
    pub fn value_at(&self, eps: f64) -> Option<Complex64> {
        match self {
            Scalar::Exact(x) => Some(x.eval(eps)),
            Scalar::Sampled(s) => s.value_at(eps),
        }
    }

    pub fn to_sampled(&self, grid: &EpsGrid) -> SampledScalar {
        match self {
            Scalar::Exact(x) => x.sample(grid),
            Scalar::Sampled(s) => s.clone(),
        }
    }

    /// Exact valuation, or the effective fitted exponent on the sampled layer.
    pub fn valuation(&self) -> Result<f64, ScaleError> {
        match self {
            Scalar::Exact(x) => Ok(x.valuation()),
            Scalar::Sampled(s) => Ok(fit_exponent(s)?.effective()),
        }
    }
}

/// `a·e_{S^c} + b·e_S`.
pub fn interleave(a: &Scalar, b: &Scalar, e: &Idempotent) -> Result<Scalar, ScaleError> {
    match (a, b, e) {
        (_, _, Idempotent::All) if matches!((a, b), (Scalar::Exact(_), Scalar::Exact(_))) => {
            Ok(b.clone())
        }
        (_, _, Idempotent::None) if matches!((a, b), (Scalar::Exact(_), Scalar::Exact(_))) => {
            Ok(a.clone())
        }
        (Scalar::Exact(_), Scalar::Exact(_), Idempotent::Mask(_)) => {
            Err(ScaleError::ExactIdempotent)
        }
        _ => {
            let grid = match (a, b) {
                (Scalar::Sampled(s), Scalar::Sampled(t)) => {
                    if s.grid != t.grid {
                        return Err(ScaleError::GridMismatch);
                    }
                    s.grid.clone()
                }
                (Scalar::Sampled(s), _) | (_, Scalar::Sampled(s)) => s.grid.clone(),
                _ => unreachable!(),
            };
            if let Idempotent::Mask(m) = e {
                if m.len() != grid.len() {
                    return Err(ScaleError::GridMismatch);
                }
            }
            let (sa, sb) = (a.to_sampled(&grid), b.to_sampled(&grid));
            let values = (0..grid.len())
                .map(|i| if e.contains(i) { sb.values[i] } else { sa.values[i] })
                .collect();
            Ok(Scalar::Sampled(SampledScalar { grid, values }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(c: f64, a: f64, b: i32) -> Term {
        Term::new(c, a, b)
    }

    #[test]
    fn normalize_cancels_and_orders() {
        let x = ExactScalar::normalize(vec![t(1.0, 2.0, 0), t(-1.0, 2.0, 0), t(3.0, 1.0, 0)]).unwrap();
        assert_eq!(x.terms(), &[t(3.0, 1.0, 0)]);
        assert!(ExactScalar::normalize(vec![]).unwrap().is_zero());
        let y = ExactScalar::normalize(vec![t(5.0, 0.0, 0), t(2.0, 0.0, 1)]).unwrap();
        assert_eq!(y.terms(), &[t(2.0, 0.0, 1), t(5.0, 0.0, 0)]);
        assert_eq!(
            ExactScalar::normalize(vec![t(f64::NAN, 0.0, 0)]),
            Err(ScaleError::NonFinite)
        );
    }

    #[test]
    fn ring_examples() {
        let e = ExactScalar::eps_pow(1.0);
        assert!((ExactScalar::monomial(3.0, 2.0, 0) + ExactScalar::monomial(-3.0, 2.0, 0)).is_zero());
        assert_eq!(&e * &ExactScalar::eps_pow(3.0), ExactScalar::eps_pow(4.0));
        let one = ExactScalar::constant(1.0);
        // (1+ε)(1−ε), expanded by hand: 1 − ε².
        let p = (&one + &e) * (&one - &e);
        assert_eq!(p, ExactScalar::normalize(vec![t(1.0, 0.0, 0), t(-1.0, 2.0, 0)]).unwrap());
    }

    #[test]
    fn valuation_and_norm() {
        assert_eq!(ExactScalar::monomial(3.0, 2.0, 0).valuation(), 2.0);
        assert_eq!((ExactScalar::eps_pow(1.0) + ExactScalar::eps_pow(3.0)).valuation(), 1.0);
        assert_eq!(ExactScalar::zero().valuation(), f64::INFINITY);
        assert_eq!(ExactScalar::log_pow(1).valuation(), 0.0);
        assert_eq!(ExactScalar::monomial(3.0, 2.0, 0).sharp_norm(), (-2f64).exp());
        assert_eq!(ExactScalar::zero().sharp_norm(), 0.0);
        assert_eq!(ExactScalar::eps_pow(-1.0).sharp_norm(), 1f64.exp());
    }

    #[test]
    fn log_valuation_sweep() {
        // log(1/ε) ≤ ε^a eventually holds for a < 0 and fails for a > 0.
        let l = ExactScalar::log_pow(1);
        let small = |a: f64| (100..400).all(|k| l.eval(2f64.powi(-k)).re <= 2f64.powi(-k).powf(a));
        assert!(small(-0.1));
        assert!(!small(0.1));
    }

    #[test]
    fn tends_to_zero_examples() {
        assert!(ExactScalar::monomial(1.0, 1.0, 1).tends_to_zero());
        assert!(ExactScalar::monomial(1.0, 0.0, -1).tends_to_zero());
        assert!(!(ExactScalar::constant(5.0) + ExactScalar::eps_pow(1.0)).tends_to_zero());
        // ε·log(1/ε) decreases to zero along the sweep.
        let x = ExactScalar::monomial(1.0, 1.0, 1);
        let v: Vec<f64> = (4..60).map(|k| x.eval(2f64.powi(-k)).re).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]) && v[v.len() - 1] < 1e-15);
    }

    #[test]
    fn fit_examples() {
        let g = EpsGrid::default();
        let f = fit_exponent(&ExactScalar::monomial(3.0, 2.0, 0).sample(&g)).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-9 && f.max_residual < 1e-9);
        let y = ExactScalar::eps_pow(1.0) + ExactScalar::eps_pow(2.0);
        assert!((fit_exponent(&y.sample(&g)).unwrap().slope - 1.0).abs() < 0.01);
        let z = SampledScalar::from_fn(&g, |_| Complex64::new(0.0, 0.0));
        let fz = fit_exponent(&z).unwrap();
        assert!(fz.saturated_zero && fz.slope == f64::INFINITY);
    }

    #[test]
    fn grids() {
        let g = EpsGrid::default();
        assert_eq!(g.len(), 21);
        assert_eq!(g.tail_range(), 9..21);
        assert!(g.is_geometric());
        let h = EpsGrid::geometric(0.1, 1e-6, 16).unwrap();
        assert!(h.is_geometric() && h.values()[15] == 1e-6);
        assert!(EpsGrid::from_values(vec![0.5, 0.25], 2).is_err());
        assert!(EpsGrid::from_values(vec![0.5, 0.6], 2).is_err());
    }

    #[test]
    fn interleave_examples() {
        let g = EpsGrid::default();
        let a = Scalar::Exact(ExactScalar::eps_pow(1.0));
        let b = Scalar::Exact(ExactScalar::eps_pow(2.0));
        assert_eq!(interleave(&a, &b, &Idempotent::All).unwrap(), b);
        assert_eq!(interleave(&a, &b, &Idempotent::None).unwrap(), a);
        let mask = Idempotent::Mask((0..g.len()).map(|i| i % 2 == 0).collect());
        let sa = Scalar::Sampled(ExactScalar::eps_pow(1.0).sample(&g));
        let sb = Scalar::Sampled(ExactScalar::eps_pow(2.0).sample(&g));
        let Scalar::Sampled(r) = interleave(&sa, &sb, &mask).unwrap() else { panic!() };
        for (i, &e) in g.values().iter().enumerate() {
            let want = if i % 2 == 0 { e * e } else { e };
            assert_eq!(r.values[i].re, want);
        }
        // Valuation of the mixture is the smaller piecewise exponent.
        let odd: Vec<f64> = g.tail_range().filter(|i| i % 2 == 1).map(|i| r.values[i].re).collect();
        let v_odd = odd.iter().zip(g.tail_range().filter(|i| i % 2 == 1)).map(|(x, i)| x.ln() / g.values()[i].ln());
        assert!(v_odd.into_iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(interleave(&a, &b, &mask).is_err());
    }

    fn arb_scalar() -> impl Strategy<Value = ExactScalar> {
        prop::collection::vec((-4i32..=4, -8i32..=8, -2i32..=2), 0..5).prop_map(|v| {
            ExactScalar::normalize(
                v.into_iter().map(|(c, a, b)| Term::new(c as f64, a as f64 / 4.0, b)).collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn ultrametric(a in arb_scalar(), b in arb_scalar()) {
            let s = &a + &b;
            prop_assert!(s.valuation() >= a.valuation().min(b.valuation()));
            if a.valuation() != b.valuation() {
                prop_assert_eq!(s.valuation(), a.valuation().min(b.valuation()));
            }
            prop_assert!(s.sharp_norm() <= a.sharp_norm().max(b.sharp_norm()));
        }

        #[test]
        fn valuation_additive(a in arb_scalar(), b in arb_scalar()) {
            prop_assume!(!a.is_zero() && !b.is_zero());
            prop_assert_eq!((&a * &b).valuation(), a.valuation() + b.valuation());
        }

        #[test]
        fn normalized_form(a in arb_scalar(), b in arb_scalar()) {
            let p = &a * &b;
            for w in p.terms().windows(2) {
                prop_assert!(term_order(&w[0], &w[1]) == Ordering::Less);
            }
            prop_assert!(p.terms().iter().all(|t| t.coeff.norm() != 0.0));
        }

        #[test]
        fn fit_tracks_valuation(c in 1i32..5, a in -8i32..=8) {
            let x = ExactScalar::monomial(c as f64, a as f64 / 4.0, 0) + ExactScalar::monomial(1.0, a as f64 / 4.0 + 1.0, 0);
            let f = fit_exponent(&x.sample(&EpsGrid::default())).unwrap();
            prop_assert!((f.slope - x.valuation()).abs() <= 0.05);
        }

        #[test]
        fn idempotent_laws(mask in prop::collection::vec(any::<bool>(), 21), a in arb_scalar(), b in arb_scalar()) {
            let g = EpsGrid::default();
            let e = Idempotent::Mask(mask);
            let es = e.as_sampled(&g);
            prop_assert_eq!(es.mul(&es).unwrap(), es.clone());
            let one = es.add(&e.complement().as_sampled(&g)).unwrap();
            prop_assert!(one.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
            let sa = Scalar::Sampled(a.sample(&g));
            prop_assert_eq!(interleave(&sa, &sa, &e).unwrap(), sa.clone());
            let sb = Scalar::Sampled(b.sample(&g));
            let Scalar::Sampled(m) = interleave(&sa, &sb, &e).unwrap() else { unreachable!() };
            let direct = a.sample(&g).mul(&e.complement().as_sampled(&g)).unwrap()
                .add(&b.sample(&g).mul(&es).unwrap()).unwrap();
            prop_assert_eq!(m, direct);
        }
    }
}
