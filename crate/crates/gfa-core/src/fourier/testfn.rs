use crate::dsl::kernel;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Schwartz test functions used to probe tempered equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TestFunction {
    Gauss,
    /// `H_j(x) e^{-x²}` with the physicists' Hermite polynomial, `1 ≤ j ≤ 4`.
    Hermite(u8),
    Bump,
}

impl TestFunction {
    pub fn library() -> Vec<TestFunction> {
        let mut v = vec![TestFunction::Gauss];
        v.extend((1..=4).map(TestFunction::Hermite));
        v.push(TestFunction::Bump);
        v
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Gauss => "gauss".into(),
            TestFunction::Hermite(j) => format!("h{j}_gauss"),
            TestFunction::Bump => "bump".into(),
        }
    }

    pub fn parse(s: &str) -> Option<TestFunction> {
        TestFunction::library().into_iter().find(|t| t.name() == s)
    }

    fn hermite(j: u8, x: f64) -> f64 {
        let (mut h0, mut h1) = (1.0, 2.0 * x);
        if j == 0 {
            return h0;
        }
        for k in 1..j {
            let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
            h0 = h1;
            h1 = h2;
        }
        h1
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Gauss => (-x * x).exp(),
            TestFunction::Hermite(j) => TestFunction::hermite(j, x) * (-x * x).exp(),
            TestFunction::Bump => kernel::bump(0, x).to_c64().re,
        }
    }

    /// `∫ φ(x) e^{-ixξ} dx` in closed form, for the Gaussian family:
    /// `√π (-iξ)^j e^{-ξ²/4}`.
    pub fn fourier(&self, xi: f64) -> Option<Complex64> {
        let j = match *self {
            TestFunction::Gauss => 0,
            TestFunction::Hermite(j) => j as i32,
            TestFunction::Bump => return None,
        };
        Some(Complex64::new(0.0, -xi).powi(j) * (PI.sqrt() * (-xi * xi / 4.0).exp()))
    }

    /// Radius outside which `|φ|` underflows.
    pub fn radius(&self) -> f64 {
        match self {
            TestFunction::Bump => 1.0,
            _ => 28.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_c;

    #[test]
    fn rapid_decay_on_grid() {
        for t in TestFunction::library() {
            let sup = (-4000..=4000)
                .map(|i| i as f64 / 100.0)
                .map(|x| x.powi(8) * t.eval(x).abs())
                .fold(0.0, f64::max);
            assert!(sup.is_finite() && sup < 1e4, "{}: {sup}", t.name());
        }
    }

    #[test]
    fn closed_form_transforms_match_quadrature() {
        for t in TestFunction::library() {
            let Some(_) = t.fourier(0.0) else { continue };
            for xi in [0.0, 0.7, 2.5, -3.0] {
                let q = integrate_c(|x| t.eval(x) * Complex64::new(0.0, -x * xi).exp(), -12.0, 12.0, 96);
                assert!((q - t.fourier(xi).unwrap()).norm() < 1e-12, "{} at {xi}", t.name());
            }
        }
    }

    #[test]
    fn bump_value_and_names() {
        assert!((TestFunction::Bump.eval(0.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(TestFunction::Bump.eval(1.0), 0.0);
        assert_eq!(TestFunction::parse("h3_gauss"), Some(TestFunction::Hermite(3)));
        assert_eq!(TestFunction::library().len(), 6);
    }
}
