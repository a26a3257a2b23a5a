//! Generalized points of `ℝ̃^d`: norms, scale classes, compact support,
//! monads and the sharp distance.

use crate::scale::{
    fit_exponent, EpsGrid, ExactScalar, Scalar, SampledScalar, ScaleError, Term,
};
use num_complex::Complex64;
use serde::Serialize;

/// Tolerance on fitted exponents for the fast-scale decision.
pub const FAST_MARGIN: f64 = 0.05;
/// Window-fit disagreement that marks a point as oscillating between scales.
pub const NEITHER_SPREAD: f64 = 0.2;
const NOISY_RESIDUAL: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ScaleClass {
    Slow,
    Fast,
    Neither,
    Inconclusive,
}

/// A point whose coordinates are all exact or all sampled on one grid.
///
/// Sampled coordinates may carry low-order parts so that `hi + lo` resolves
/// offsets far below the spacing of `f64` around `hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenPoint {
    coords: Vec<Scalar>,
    low: Option<Vec<Vec<f64>>>,
}

impl GenPoint {
    pub fn exact(coords: Vec<ExactScalar>) -> GenPoint {
        assert!(!coords.is_empty(), "points have positive dimension");
        GenPoint { coords: coords.into_iter().map(Scalar::Exact).collect(), low: None }
    }

    /// A classical point of `ℝ^d`.
    pub fn classical(x: &[f64]) -> GenPoint {
        GenPoint::exact(x.iter().map(|&v| ExactScalar::constant(v)).collect())
    }

    pub fn sampled(coords: Vec<SampledScalar>) -> Result<GenPoint, ScaleError> {
        if coords.is_empty() {
            return Err(ScaleError::BadGrid("points have positive dimension".into()));
        }
        if coords.iter().any(|c| c.grid != coords[0].grid) {
            return Err(ScaleError::GridMismatch);
        }
        Ok(GenPoint { coords: coords.into_iter().map(Scalar::Sampled).collect(), low: None })
    }

    /// Attach low-order parts (one vector per coordinate, one entry per grid point).
    pub fn with_low_parts(mut self, low: Vec<Vec<f64>>) -> Result<GenPoint, ScaleError> {
        let n = self.grid().map(|g| g.len()).ok_or(ScaleError::GridMismatch)?;
        if low.len() != self.dim() || low.iter().any(|l| l.len() != n) {
            return Err(ScaleError::GridMismatch);
        }
        self.low = Some(low);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Scalar] {
        &self.coords
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.coords[0], Scalar::Exact(_))
    }

    pub fn grid(&self) -> Option<&EpsGrid> {
        match &self.coords[0] {
            Scalar::Sampled(s) => Some(&s.grid),
            Scalar::Exact(_) => None,
        }
    }

    /// `(hi, lo)` real coordinates at `eps`; `None` off the sampled grid.
    pub fn value_at(&self, eps: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let hi = self
            .coords
            .iter()
            .map(|c| c.value_at(eps).map(|z| z.re))
            .collect::<Option<Vec<f64>>>()?;
        let lo = match (&self.low, self.grid()) {
            (Some(low), Some(g)) => {
                let i = g.index_of(eps)?;
                low.iter().map(|l| l[i]).collect()
            }
            _ => vec![0.0; hi.len()],
        };
        Some((hi, lo))
    }

    fn combine(
        &self,
        o: &GenPoint,
        f: impl Fn(&ExactScalar, &ExactScalar) -> ExactScalar,
        g: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<GenPoint, ScaleError> {
        if self.dim() != o.dim() {
            return Err(ScaleError::BadGrid("dimension mismatch".into()));
        }
        match (self.is_exact(), o.is_exact()) {
            (true, true) => Ok(GenPoint::exact(
                self.coords
                    .iter()
                    .zip(&o.coords)
                    .map(|(a, b)| match (a, b) {
                        (Scalar::Exact(x), Scalar::Exact(y)) => f(x, y),
                        _ => unreachable!(),
                    })
                    .collect(),
            )),
            (false, false) => {
                if self.grid() != o.grid() {
                    return Err(ScaleError::GridMismatch);
                }
                let grid = self.grid().unwrap().clone();
                let coords = (0..self.dim())
                    .map(|k| {
                        let (a, b) = (self.coords[k].to_sampled(&grid), o.coords[k].to_sampled(&grid));
                        let lo_a = self.low.as_ref().map(|l| l[k].clone());
                        let lo_b = o.low.as_ref().map(|l| l[k].clone());
                        SampledScalar {
                            grid: grid.clone(),
                            values: (0..grid.len())
                                .map(|i| {
                                    let la = lo_a.as_ref().map_or(0.0, |l| l[i]);
                                    let lb = lo_b.as_ref().map_or(0.0, |l| l[i]);
                                    let d = g(a.values[i], b.values[i]);
                                    d + g(Complex64::new(la, 0.0), Complex64::new(lb, 0.0))
                                })
                                .collect(),
                        }
                    })
                    .collect();
                GenPoint::sampled(coords)
            }
            _ => Err(ScaleError::GridMismatch),
        }
    }

    pub fn sub(&self, o: &GenPoint) -> Result<GenPoint, ScaleError> {
        self.combine(o, |x, y| x - y, |a, b| a - b)
    }

    pub fn add(&self, o: &GenPoint) -> Result<GenPoint, ScaleError> {
        self.combine(o, |x, y| x + y, |a, b| a + b)
    }

    /// Valuation of `|x̃|`: exact on the exact layer, fitted on the sampled layer.
    pub fn norm_valuation(&self) -> Result<f64, ScaleError> {
        match self.point_norm() {
            Scalar::Exact(n) => Ok(n.valuation()),
            _ if self.is_exact() => Ok(self
                .coords
                .iter()
                .map(|c| match c {
                    Scalar::Exact(x) => x.valuation(),
                    _ => unreachable!(),
                })
                .fold(f64::INFINITY, f64::min)),
            Scalar::Sampled(s) => Ok(fit_exponent(&s)?.effective()),
        }
    }

    /// Euclidean norm net `|x_ε|`.
    pub fn point_norm(&self) -> Scalar {
        if self.is_exact() {
            let xs: Vec<&ExactScalar> = self
                .coords
                .iter()
                .map(|c| match c {
                    Scalar::Exact(x) => x,
                    _ => unreachable!(),
                })
                .filter(|x| !x.is_zero())
                .collect();
            if xs.is_empty() {
                return Scalar::Exact(ExactScalar::zero());
            }
            let single = xs.iter().all(|x| x.terms().len() == 1)
                && xs.iter().all(|x| {
                    let (t, u) = (x.terms()[0], xs[0].terms()[0]);
                    t.a == u.a && t.b == u.b
                });
            if single {
                let t0 = xs[0].terms()[0];
                let c: f64 = xs.iter().map(|x| x.terms()[0].coeff.norm_sqr()).sum::<f64>().sqrt();
                return Scalar::Exact(
                    ExactScalar::normalize(vec![Term::new(c, t0.a, t0.b)]).expect("finite"),
                );
            }
            let grid = EpsGrid::default();
            return Scalar::Sampled(SampledScalar::from_fn(&grid, |e| {
                let s: f64 = xs.iter().map(|x| x.eval(e).norm_sqr()).sum();
                Complex64::new(s.sqrt(), 0.0)
            }));
        }
        let grid = self.grid().unwrap().clone();
        let n = grid.len();
        let values = (0..n)
            .map(|i| {
                let s: f64 = self
                    .coords
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let Scalar::Sampled(s) = c else { unreachable!() };
                        let lo = self.low.as_ref().map_or(0.0, |l| l[k][i]);
                        (s.values[i] + lo).norm_sqr()
                    })
                    .sum();
                Complex64::new(s.sqrt(), 0.0)
            })
            .collect();
        Scalar::Sampled(SampledScalar { grid, values })
    }

    /// Slow, fast, or (sampled only) oscillating between scales.
    pub fn classify_scale(&self) -> ScaleClass {
        if self.is_exact() {
            return match self.norm_valuation() {
                Ok(v) if v >= 0.0 => ScaleClass::Slow,
                Ok(_) => ScaleClass::Fast,
                Err(_) => ScaleClass::Inconclusive,
            };
        }
        let Scalar::Sampled(norm) = self.point_norm() else { unreachable!() };
        // A norm that never exceeds its large-ε maximum is bounded on the grid.
        let half = norm.values.len() / 2;
        let peak = |vs: &[Complex64]| vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if half > 0 && peak(&norm.values[half..]) <= peak(&norm.values[..half]) {
            return ScaleClass::Slow;
        }
        let Ok(fit) = fit_exponent(&norm) else { return ScaleClass::Inconclusive };
        if fit.saturated_zero {
            return ScaleClass::Slow;
        }
        let tail = norm.grid.tail_range();
        let local: Vec<f64> = tail
            .clone()
            .filter(|&i| norm.values[i].norm() > 0.0)
            .map(|i| norm.values[i].norm().ln() / norm.grid.values()[i].ln())
            .collect();
        let spread = local.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - local.iter().cloned().fold(f64::INFINITY, f64::min);
        if (fit.early_slope - fit.late_slope).abs() > NEITHER_SPREAD
            || (fit.max_residual > NOISY_RESIDUAL && spread > NEITHER_SPREAD)
        {
            return ScaleClass::Neither;
        }
        if fit.max_residual > NOISY_RESIDUAL {
            return ScaleClass::Inconclusive;
        }
        let envelope = fit.slope.max(fit.early_slope).max(fit.late_slope);
        if envelope < -FAST_MARGIN {
            ScaleClass::Fast
        } else {
            ScaleClass::Slow
        }
    }

    /// Whether every coordinate stays in the closed box `[lo_k, hi_k]`.
    pub fn is_compactly_supported(&self, bbox: &[(f64, f64)]) -> bool {
        assert_eq!(bbox.len(), self.dim(), "box dimension");
        self.coords.iter().enumerate().all(|(k, c)| {
            let (lo, hi) = bbox[k];
            match c {
                Scalar::Exact(x) => {
                    x.is_bounded()
                        && x.limit().is_some_and(|l| l.im == 0.0 && lo <= l.re && l.re <= hi)
                        && x.terms().iter().all(|t| t.coeff.im == 0.0)
                }
                Scalar::Sampled(s) => s.values.iter().enumerate().all(|(i, v)| {
                    let l = self.low.as_ref().map_or(0.0, |l| l[k][i]);
                    let x = v.re + l;
                    v.im == 0.0 && lo <= x && x <= hi
                }),
            }
        })
    }

    /// The exact coordinate scalars, if on the exact layer.
    pub fn exact_coords(&self) -> Option<Vec<ExactScalar>> {
        self.coords
            .iter()
            .map(|c| match c {
                Scalar::Exact(x) => Some(x.clone()),
                _ => None,
            })
            .collect()
    }
}

/// Whether `|a − b|` tends to zero.
pub fn infinitely_close(a: &GenPoint, b: &GenPoint) -> Result<bool, ScaleError> {
    let d = a.sub(b)?;
    match d.exact_coords() {
        Some(xs) => Ok(xs.iter().all(|x| x.tends_to_zero())),
        None => {
            let Scalar::Sampled(n) = d.point_norm() else { unreachable!() };
            let tail = n.grid.tail_range();
            let v: Vec<f64> = n.values[tail].iter().map(|z| z.norm()).collect();
            // Decreasing toward zero over the tail, ending below 1e-3.
            let last = *v.last().unwrap();
            Ok(last < 1e-3 && v.first().is_some_and(|&f| f >= last))
        }
    }
}

/// `|a − b|_e`.
pub fn sharp_distance(a: &GenPoint, b: &GenPoint) -> Result<f64, ScaleError> {
    let d = a.sub(b)?;
    let v = d.norm_valuation()?;
    Ok(if v.is_infinite() { 0.0 } else { (-v).exp() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex(x: Vec<ExactScalar>) -> GenPoint {
        GenPoint::exact(x)
    }

    #[test]
    fn norms() {
        let p = ex(vec![ExactScalar::eps_pow(-1.0), ExactScalar::zero()]);
        assert_eq!(p.point_norm(), Scalar::Exact(ExactScalar::eps_pow(-1.0)));
        let q = GenPoint::classical(&[3.0, 4.0]);
        assert_eq!(q.point_norm(), Scalar::Exact(ExactScalar::constant(5.0)));
        let g = EpsGrid::default();
        let e = ExactScalar::eps_pow(1.0).sample(&g);
        let r = GenPoint::sampled(vec![e.clone(), e]).unwrap();
        let Scalar::Sampled(n) = r.point_norm() else { panic!() };
        for (i, &x) in g.values().iter().enumerate() {
            assert!((n.values[i].re - 2f64.sqrt() * x).abs() <= 1e-15 * x);
        }
        assert!((fit_exponent(&n).unwrap().slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scale_classes() {
        assert_eq!(ex(vec![ExactScalar::log_pow(1), ExactScalar::zero()]).classify_scale(), ScaleClass::Slow);
        assert_eq!(ex(vec![ExactScalar::eps_pow(-0.5)]).classify_scale(), ScaleClass::Fast);
        assert_eq!(GenPoint::classical(&[5.0]).classify_scale(), ScaleClass::Slow);
        let g = EpsGrid::default();
        let s = |x: ExactScalar| GenPoint::sampled(vec![x.sample(&g)]).unwrap().classify_scale();
        assert_eq!(s(ExactScalar::eps_pow(-0.5)), ScaleClass::Fast);
        assert_eq!(s(ExactScalar::constant(5.0)), ScaleClass::Slow);
        assert_eq!(s(ExactScalar::eps_pow(1.0)), ScaleClass::Slow);
        // ε^{-1} on the first half of the tail, constant afterwards.
        let switch = SampledScalar::from_fn(&g, |e| {
            Complex64::new(if e > 2f64.powi(-18) { 1.0 / e } else { 1.0 }, 0.0)
        });
        assert_eq!(GenPoint::sampled(vec![switch]).unwrap().classify_scale(), ScaleClass::Neither);
    }

    #[test]
    fn compact_support() {
        assert!(ex(vec![ExactScalar::eps_pow(1.0)]).is_compactly_supported(&[(-1.0, 1.0)]));
        assert!(!ex(vec![ExactScalar::eps_pow(-1.0)]).is_compactly_supported(&[(-1e9, 1e9)]));
        let p = ex(vec![ExactScalar::constant(1.0) + ExactScalar::monomial(1.0, 1.0, 1)]);
        assert!(p.is_compactly_supported(&[(0.0, 2.0)]));
        // Sweep: 1 + ε log(1/ε) stays in [0,2] and approaches 1.
        let x = ExactScalar::constant(1.0) + ExactScalar::monomial(1.0, 1.0, 1);
        assert!((1..60).all(|k| (0.0..=2.0).contains(&x.eval(2f64.powi(-k)).re)));
    }

    #[test]
    fn monads() {
        let x0 = ExactScalar::constant(0.7);
        let b = ex(vec![x0.clone()]);
        assert!(infinitely_close(&ex(vec![&x0 + &ExactScalar::eps_pow(1.0)]), &b).unwrap());
        let a = ex(vec![&x0 + &ExactScalar::log_pow(-1)]);
        assert!(infinitely_close(&a, &b).unwrap());
        // 1/log(1/ε) has valuation 0 yet decreases to 0 along the sweep.
        let v: Vec<f64> = (4..200).map(|k| ExactScalar::log_pow(-1).eval(2f64.powi(-k)).re).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]) && v[v.len() - 1] < 0.008);
        assert!(!infinitely_close(&ex(vec![&x0 + &ExactScalar::constant(0.1)]), &b).unwrap());
        let g = EpsGrid::default();
        assert!(infinitely_close(&b, &GenPoint::sampled(vec![x0.sample(&g)]).unwrap()).is_err());
    }

    #[test]
    fn distances() {
        let z = GenPoint::classical(&[0.0]);
        assert_eq!(sharp_distance(&ex(vec![ExactScalar::eps_pow(3.0)]), &z).unwrap(), (-3f64).exp());
        assert_eq!(sharp_distance(&z, &z).unwrap(), 0.0);
        let z2 = GenPoint::classical(&[0.0, 0.0]);
        let p = ex(vec![ExactScalar::eps_pow(1.0), ExactScalar::eps_pow(2.0)]);
        assert_eq!(sharp_distance(&p, &z2).unwrap(), (-1f64).exp());
    }

    #[test]
    fn low_parts_resolve_offsets() {
        let g = EpsGrid::dyadic(4, 15);
        let hi = SampledScalar::from_fn(&g, |_| Complex64::new(0.5, 0.0));
        let p = GenPoint::sampled(vec![hi])
            .unwrap()
            .with_low_parts(vec![g.values().iter().map(|e| e.powi(10)).collect()])
            .unwrap();
        let (h, l) = p.value_at(g.values()[11]).unwrap();
        assert_eq!((h[0], l[0]), (0.5, 2f64.powi(-150)));
        let d = p.sub(&GenPoint::sampled(vec![SampledScalar::from_fn(&g, |_| Complex64::new(0.5, 0.0))]).unwrap()).unwrap();
        assert!((d.norm_valuation().unwrap() - 10.0).abs() < 1e-9);
    }

    fn arb_point() -> impl Strategy<Value = GenPoint> {
        prop::collection::vec((-3i32..=3, 0i32..=8, -1i32..=1), 1..3).prop_map(|t| {
            let x = ExactScalar::normalize(
                t.into_iter().map(|(c, a, b)| Term::new(c as f64, a as f64 / 2.0, b)).collect(),
            )
            .unwrap();
            GenPoint::exact(vec![x])
        })
    }

    proptest! {
        #[test]
        fn classes_exclusive(p in arb_point()) {
            let c = p.classify_scale();
            prop_assert!(c == ScaleClass::Slow || c == ScaleClass::Fast);
        }

        #[test]
        fn ultrametric_triangle(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ac = sharp_distance(&a, &c).unwrap();
            let m = sharp_distance(&a, &b).unwrap().max(sharp_distance(&b, &c).unwrap());
            prop_assert!(ac <= m);
        }

        #[test]
        fn monad_relation(a in arb_point(), b in arb_point(), c in arb_point()) {
            prop_assert!(infinitely_close(&a, &a).unwrap());
            prop_assert_eq!(infinitely_close(&a, &b).unwrap(), infinitely_close(&b, &a).unwrap());
            if infinitely_close(&a, &b).unwrap() && infinitely_close(&b, &c).unwrap() {
                prop_assert!(infinitely_close(&a, &c).unwrap());
            }
        }

        #[test]
        fn classical_embedding(x in -5.0f64..5.0) {
            let p = GenPoint::classical(&[x]);
            prop_assert_eq!(p.classify_scale(), ScaleClass::Slow);
            let q = GenPoint::exact(vec![ExactScalar::constant(x) + ExactScalar::eps_pow(1.0)]);
            prop_assert!(infinitely_close(&q, &p).unwrap());
        }
    }
}
