//! Gauss–Legendre quadrature and integrals of the bump kernel.

use crate::dsl::kernel;
use num_complex::Complex64;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn rule16() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(16))
}

/// Composite 16-point Gauss–Legendre over `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    integrate_c(|t| Complex64::new(f(t), 0.0), a, b, panels).re
}

pub fn integrate_c(f: impl Fn(f64) -> Complex64, a: f64, b: f64, panels: usize) -> Complex64 {
    let (x, w) = rule16();
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            acc += f(c + 0.5 * h * xi) * (wi * 0.5 * h);
        }
    }
    acc
}

fn phi(t: f64) -> f64 {
    kernel::bump(0, t).to_c64().re
}

/// `∫_{-1}^{s} φ(t) dt` for the bump `φ(t) = e^{-1/(1-t²)}`.
pub fn bump_cumulative(s: f64) -> f64 {
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return bump_mass();
    }
    // Integrate from the nearer end for accuracy.
    if s <= 0.0 {
        integrate(phi, -1.0, s, 12)
    } else {
        bump_mass() - integrate(phi, s, 1.0, 12)
    }
}

/// `∫ φ = 0.44399381616807943...`.
pub fn bump_mass() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| integrate(phi, -1.0, 1.0, 64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        for p in 0..32 {
            let got: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(p)).sum();
            let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "p={p}");
        }
        let (_, w1) = gauss_legendre(1);
        assert!((w1[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bump_integrals() {
        // independent oracle: fine trapezoid rule, spectrally accurate for φ
        let n = 20000;
        let h = 2.0 / n as f64;
        let trap: f64 = (1..n).map(|i| phi(-1.0 + i as f64 * h)).sum::<f64>() * h;
        assert!((bump_mass() - trap).abs() < 1e-14);
        assert!((bump_mass() - 0.443_993_816_168_079_4).abs() < 1e-15);
        assert!((bump_cumulative(0.0) - bump_mass() / 2.0).abs() < 1e-15);
        let s = 0.3;
        let m = (s + 1.0) / h;
        let part: f64 = (1..m.round() as usize).map(|i| phi(-1.0 + i as f64 * h)).sum::<f64>() * h
            + 0.5 * h * phi(s);
        assert!((bump_cumulative(s) - part).abs() < 1e-9);
    }
}
