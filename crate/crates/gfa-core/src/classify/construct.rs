//! Family constructions: cutoff gluing at a radius net and truncated Taylor
//! companions at a generalized point.

use super::membership::multi_indices;
use crate::dsl::{kernel, Family, FamilyError, FamilyKind, FamilyRule, Feature, DEFAULT_MAX_ORDER};
use crate::ext::Ext;
use crate::points::GenPoint;
use crate::quad::{bump_cumulative, bump_mass};
use crate::scale::{EpsGrid, Scalar};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// `χ^{(j)}(t)` for the plateau cutoff `χ(t) = S(3 - 2|t|)`, where `S` is the
/// normalized bump primitive: `χ ≡ 1` on `|t| ≤ 1` and `χ ≡ 0` on `|t| ≥ 2`.
pub fn plateau_cutoff(j: usize, t: f64) -> f64 {
    let s = 3.0 - 2.0 * t.abs();
    if j == 0 {
        return bump_cumulative(s) / bump_mass();
    }
    if !(-1.0 < s && s < 1.0) {
        return 0.0;
    }
    let chain = (-2.0 * t.signum()).powi(j as i32);
    chain * kernel::bump(j - 1, s).to_c64().re / bump_mass()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, i| a * i as f64)
}

/// All `γ ≤ α` componentwise.
fn sub_indices(alpha: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &a in alpha {
        out = out
            .into_iter()
            .flat_map(|g| (0..=a).map(move |v| [g.clone(), vec![v]].concat()))
            .collect();
    }
    out
}

fn leibniz_coeff(alpha: &[usize], gamma: &[usize]) -> f64 {
    alpha.iter().zip(gamma).map(|(&a, &g)| binom(a, g)).product()
}

fn radius_at(a: &Scalar, eps: f64) -> Result<f64, FamilyError> {
    match a.value_at(eps) {
        Some(z) if z.re > 0.0 => Ok(z.re),
        Some(_) => Err(FamilyError::Other(format!("cutoff radius not positive at eps = {eps:e}"))),
        None => Err(FamilyError::Other(format!("cutoff radius undefined at eps = {eps:e}"))),
    }
}

/// `∂^γ Π_i χ((x_i - c_i)/r)` from per-axis offsets `t_i = (x_i - c_i)/r`.
fn cutoff_deriv(gamma: &[usize], t: &[f64], r: f64) -> f64 {
    gamma.iter().zip(t).map(|(&g, &ti)| plateau_cutoff(g, ti) * r.powi(-(g as i32))).product()
}

struct Glue {
    inner: Family,
    radius: Scalar,
}

impl Glue {
    fn combine(&self, alpha: &[usize], a: f64, x: &[f64], parts: impl Fn(&[usize]) -> Result<Ext, FamilyError>) -> Result<Ext, FamilyError> {
        let t: Vec<f64> = x.iter().map(|v| v / a).collect();
        if t.iter().any(|v| v.abs() >= 2.0) {
            return Ok(Ext::ZERO);
        }
        let mut acc = Ext::ZERO;
        for gamma in sub_indices(alpha) {
            let c = cutoff_deriv(&gamma, &t, a);
            if c == 0.0 {
                continue;
            }
            let rest: Vec<usize> = alpha.iter().zip(&gamma).map(|(a, g)| a - g).collect();
            acc = acc + parts(&rest)? * Ext::real(leibniz_coeff(alpha, &gamma) * c);
        }
        Ok(acc)
    }
}

impl FamilyRule for Glue {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn max_order(&self) -> usize {
        self.inner.max_order().min(kernel::KERNEL_ORDER_CAP)
    }

    fn deriv(&self, alpha: &[usize], eps: f64, x: &[f64]) -> Result<Ext, FamilyError> {
        let a = radius_at(&self.radius, eps)?;
        self.combine(alpha, a, x, |b| self.inner.deriv(b, eps, x))
    }

    fn deriv_offset(&self, alpha: &[usize], eps: f64, x: &[f64], dx: &[f64]) -> Result<Ext, FamilyError> {
        let a = radius_at(&self.radius, eps)?;
        let y: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + b).collect();
        self.combine(alpha, a, &y, |b| self.inner.deriv_offset(b, eps, x, dx))
    }

    fn deriv_many(&self, alpha: &[usize], eps: f64, xs: &[f64]) -> Result<Vec<Ext>, FamilyError> {
        let a = radius_at(&self.radius, eps)?;
        let d = self.dim();
        let mut batches: HashMap<Vec<usize>, Vec<Ext>> = HashMap::new();
        for gamma in sub_indices(alpha) {
            let rest: Vec<usize> = alpha.iter().zip(&gamma).map(|(a, g)| a - g).collect();
            if !batches.contains_key(&rest) {
                let v = self.inner.deriv_many(&rest, eps, xs)?;
                batches.insert(rest, v);
            }
        }
        xs.chunks(d)
            .enumerate()
            .map(|(i, x)| self.combine(alpha, a, x, |b| Ok(batches[b][i])))
            .collect()
    }

    fn support_hint(&self, eps: f64) -> Option<f64> {
        let a = radius_at(&self.radius, eps).ok()?;
        let r = 2.0 * a * (self.dim() as f64).sqrt();
        Some(self.inner.support_hint(eps).map_or(r, |s| s.min(r)))
    }

    fn features(&self, eps: f64) -> Vec<Feature> {
        self.inner.features(eps)
    }

    fn singular_points(&self) -> Vec<f64> {
        self.inner.singular_points()
    }

    fn grids(&self) -> Option<Vec<EpsGrid>> {
        self.inner.grids()
    }
}

/// `u_ε(x)·Π χ(x_i/a_ε)`: equal to `u` on the cube of side `2a_ε`, zero
/// outside the cube of side `4a_ε`.
pub fn cutoff_glue(f: &Family, radius: Scalar) -> Family {
    let name = format!("glue({})", f.name);
    Family::new(name, FamilyKind::Programmatic, Arc::new(Glue { inner: f.clone(), radius }))
}

/// Degree `m_ε` of a Taylor companion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DegreeRule {
    /// `⌈log₂ log₂(1/ε)⌉`, at least 0.
    LogLog,
    Fixed(usize),
}

impl DegreeRule {
    pub fn degree(&self, eps: f64) -> usize {
        match *self {
            DegreeRule::Fixed(m) => m,
            DegreeRule::LogLog => {
                let l = (1.0 / eps).log2();
                if l <= 1.0 {
                    0
                } else {
                    l.log2().ceil() as usize
                }
            }
        }
    }
}

struct Taylor {
    inner: Family,
    x0: GenPoint,
    rule: DegreeRule,
    radius: f64,
    /// Per ε: the multi-indices up to `m_ε` with their `c_α/α!`.
    coeffs: Mutex<HashMap<u64, Arc<Vec<(Vec<usize>, Ext)>>>>,
}

impl Taylor {
    fn center(&self, eps: f64) -> Result<(Vec<f64>, Vec<f64>), FamilyError> {
        self.x0.value_at(eps).ok_or_else(|| FamilyError::Other(format!("point undefined at eps = {eps:e}")))
    }

    fn coeffs(&self, eps: f64) -> Result<Arc<Vec<(Vec<usize>, Ext)>>, FamilyError> {
        if let Some(c) = self.coeffs.lock().unwrap().get(&eps.to_bits()) {
            return Ok(c.clone());
        }
        let m = self.rule.degree(eps);
        if m > self.inner.max_order() {
            return Err(FamilyError::OrderCap { order: m, cap: self.inner.max_order() });
        }
        let (hi, lo) = self.center(eps)?;
        let mut out = Vec::new();
        for k in 0..=m {
            for alpha in multi_indices(self.dim(), k) {
                let c = self.inner.deriv_offset(&alpha, eps, &hi, &lo)?;
                let fact: f64 = alpha.iter().map(|&a| factorial(a)).product();
                out.push((alpha, c * Ext::real(1.0 / fact)));
            }
        }
        let out = Arc::new(out);
        self.coeffs.lock().unwrap().insert(eps.to_bits(), out.clone());
        Ok(out)
    }

    /// `∂^δ` of the Taylor polynomial at offset `h = x - x_0`.
    fn poly_deriv(coeffs: &[(Vec<usize>, Ext)], delta: &[usize], h: &[f64]) -> Ext {
        let mut acc = Ext::ZERO;
        for (alpha, c) in coeffs {
            if alpha.iter().zip(delta).any(|(a, d)| a < d) {
                continue;
            }
            let mut w = 1.0;
            for ((&a, &d), &hi) in alpha.iter().zip(delta).zip(h) {
                w *= factorial(a) / factorial(a - d) * hi.powi((a - d) as i32);
            }
            if w != 0.0 {
                acc = acc + *c * Ext::real(w);
            }
        }
        acc
    }

    fn eval(&self, alpha: &[usize], eps: f64, h: &[f64]) -> Result<Ext, FamilyError> {
        let t: Vec<f64> = h.iter().map(|v| v / self.radius).collect();
        if t.iter().any(|v| v.abs() >= 2.0) {
            return Ok(Ext::ZERO);
        }
        let coeffs = self.coeffs(eps)?;
        let mut acc = Ext::ZERO;
        for gamma in sub_indices(alpha) {
            let c = cutoff_deriv(&gamma, &t, self.radius);
            if c == 0.0 {
                continue;
            }
            let rest: Vec<usize> = alpha.iter().zip(&gamma).map(|(a, g)| a - g).collect();
            acc = acc + Taylor::poly_deriv(&coeffs, &rest, h) * Ext::real(leibniz_coeff(alpha, &gamma) * c);
        }
        Ok(acc)
    }
}

impl FamilyRule for Taylor {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn max_order(&self) -> usize {
        DEFAULT_MAX_ORDER
    }

    fn deriv(&self, alpha: &[usize], eps: f64, x: &[f64]) -> Result<Ext, FamilyError> {
        self.deriv_offset(alpha, eps, x, &vec![0.0; x.len()])
    }

    fn deriv_offset(&self, alpha: &[usize], eps: f64, x: &[f64], dx: &[f64]) -> Result<Ext, FamilyError> {
        let (hi, lo) = self.center(eps)?;
        let h: Vec<f64> = (0..x.len()).map(|i| (x[i] - hi[i]) + (dx[i] - lo[i])).collect();
        self.eval(alpha, eps, &h)
    }

    fn support_hint(&self, eps: f64) -> Option<f64> {
        let (hi, lo) = self.center(eps).ok()?;
        let c: f64 = hi.iter().zip(&lo).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        Some(c + 2.0 * self.radius * (self.dim() as f64).sqrt())
    }

    fn features(&self, eps: f64) -> Vec<Feature> {
        self.inner.features(eps)
    }

    fn grids(&self) -> Option<Vec<EpsGrid>> {
        self.inner.grids()
    }
}

/// `v_ε = (Σ_{|α| ≤ m_ε} ∂^α u_ε(x_{0,ε})/α! (x - x_{0,ε})^α)·Π χ((x_i - x_{0,ε,i})/r)`.
///
/// The plateau cutoff is `≡ 1` near `x̃0`, so every derivative of order
/// `≤ m_ε` at `x_{0,ε}` equals that of `u_ε`.
pub fn taylor_companion(
    f: &Family,
    x0: &GenPoint,
    rule: DegreeRule,
    cutoff_radius: f64,
) -> Result<Family, FamilyError> {
    if x0.dim() != f.dim() {
        return Err(FamilyError::BadIndex { got: x0.dim(), dim: f.dim() });
    }
    if !(cutoff_radius > 0.0) {
        return Err(FamilyError::Other("cutoff radius must be positive".into()));
    }
    let rule = Taylor { inner: f.clone(), x0: x0.clone(), rule, radius: cutoff_radius, coeffs: Mutex::new(HashMap::new()) };
    Ok(Family::new(format!("taylor({})", f.name), FamilyKind::Programmatic, Arc::new(rule)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::ExactScalar;

    fn fam(src: &str) -> Family {
        Family::parse(src, src, 1).unwrap()
    }

    #[test]
    fn plateau_shape_and_derivatives() {
        for &t in &[0.0, 0.5, 1.0, -1.0] {
            assert_eq!(plateau_cutoff(0, t), 1.0);
        }
        for &t in &[2.0, -2.5, 3.0] {
            assert_eq!(plateau_cutoff(0, t), 0.0);
        }
        assert!((plateau_cutoff(0, 1.5) - 0.5).abs() < 1e-14);
        // 5-point central differences
        let h = 1e-3;
        for j in 0..4 {
            for &t in &[1.2, 1.5, -1.7, 1.9] {
                let fd = (-plateau_cutoff(j, t + 2.0 * h) + 8.0 * plateau_cutoff(j, t + h)
                    - 8.0 * plateau_cutoff(j, t - h)
                    + plateau_cutoff(j, t - 2.0 * h))
                    / (12.0 * h);
                let d = plateau_cutoff(j + 1, t);
                assert!((fd - d).abs() < 1e-6 * (1.0 + d.abs()), "j={j} t={t} fd={fd} d={d}");
            }
        }
    }

    #[test]
    fn glue_gauss_cuts_support() {
        let g = fam("gauss(x1)");
        let glued = cutoff_glue(&g, Scalar::Exact(ExactScalar::eps_pow(-0.25)));
        let eps = 2f64.powi(-8);
        let a = eps.powf(-0.25);
        assert_eq!(glued.support_hint(eps), Some(2.0 * a));
        assert!(glued.value(eps, &[2.0 * a + 1e-9]).unwrap().is_zero());
        let x = 0.7;
        assert_eq!(glued.d1(2, eps, x).unwrap().to_c64(), g.d1(2, eps, x).unwrap().to_c64());
    }

    #[test]
    fn glue_bump_unchanged_on_support() {
        let b = fam("bump(x1)");
        let glued = cutoff_glue(&b, Scalar::Exact(ExactScalar::constant(2.0)));
        for i in 0..=20 {
            let x = -1.0 + 0.1 * i as f64;
            for k in 0..3 {
                let (u, v) = (b.d1(k, 0.1, x).unwrap().to_c64(), glued.d1(k, 0.1, x).unwrap().to_c64());
                assert!((u - v).norm() <= 1e-15 * (1.0 + u.norm()));
            }
        }
    }

    #[test]
    fn glue_matches_product_derivatives() {
        // independent oracle: finite differences of the glued value
        let f = fam("sin(3*x1)*eps^-1");
        let glued = cutoff_glue(&f, Scalar::Exact(ExactScalar::constant(1.0)));
        let h = 1e-3;
        for &x in &[1.1, 1.45, -1.8] {
            let v = |y: f64| glued.value(0.5, &[y]).unwrap().to_c64().re;
            let fd = (-v(x + 2.0 * h) + 8.0 * v(x + h) - 8.0 * v(x - h) + v(x - 2.0 * h)) / (12.0 * h);
            let d = glued.d1(1, 0.5, x).unwrap().to_c64().re;
            assert!((fd - d).abs() < 1e-6 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn degree_rule() {
        assert_eq!(DegreeRule::LogLog.degree(2f64.powi(-16)), 4);
        assert_eq!(DegreeRule::LogLog.degree(2f64.powi(-17)), 5);
        assert_eq!(DegreeRule::LogLog.degree(0.5), 0);
        assert_eq!(DegreeRule::Fixed(3).degree(1e-9), 3);
    }

    #[test]
    fn companion_matches_point_derivatives() {
        let x0 = GenPoint::classical(&[0.0]);
        for src in ["bump(x1)", "eps^-1*bump(x1/eps)"] {
            let u = fam(src);
            let v = taylor_companion(&u, &x0, DegreeRule::LogLog, 0.5).unwrap();
            for &eps in &[2f64.powi(-4), 2f64.powi(-10)] {
                let m = DegreeRule::LogLog.degree(eps);
                for k in 0..=m {
                    let (a, b) = (u.d1(k, eps, 0.0).unwrap().to_c64(), v.d1(k, eps, 0.0).unwrap().to_c64());
                    assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()), "{src} k={k}");
                }
            }
        }
        // mollifier coefficients are ε^{-1-k} φ^{(k)}(0)
        let eps = 2f64.powi(-6);
        let v = taylor_companion(&fam("eps^-1*bump(x1/eps)"), &x0, DegreeRule::Fixed(2), 0.5).unwrap();
        let want = eps.powi(-3) * kernel::bump(2, 0.0).to_c64().re;
        assert!((v.d1(2, eps, 0.0).unwrap().to_c64().re / want - 1.0).abs() < 1e-12);
        // degree 0: u(x0)·cutoff
        let u = fam("gauss(x1 - 0.1)");
        let c = taylor_companion(&u, &x0, DegreeRule::Fixed(0), 1.0).unwrap();
        let u0 = u.value(0.1, &[0.0]).unwrap().to_c64().re;
        assert!((c.value(0.1, &[0.3]).unwrap().to_c64().re - u0).abs() < 1e-15);
        assert!(c.d1(1, 0.1, 0.0).unwrap().is_zero());
    }
}
