//! Extended-range complex numbers `m · 2^e`.
//!
//! Families such as the log-power net reach magnitudes like `e^{1000}` at
//! small ε, far beyond `f64`. Evaluators fall back to [`Ext`] so that sups
//! and fits can operate on log-magnitudes directly.

use num_complex::Complex64;
use std::f64::consts::LN_2;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// `m · 2^e` with an integral exponent `e` (stored as `f64` so that
/// astronomically small tails such as `e^{-10^{24}}` stay representable).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ext {
    m: Complex64,
    e: f64,
}

const HI: f64 = 1.0e120;
const LO: f64 = 1.0e-120;

/// Exact `2^k` for integral `k ≥ -1074`, split in two factors when subnormal.
fn scale2(x: Complex64, k: f64) -> Complex64 {
    if k > 1023.0 {
        return x * f64::INFINITY;
    }
    if k < -1022.0 {
        if k < -2000.0 {
            return Complex64::new(0.0, 0.0);
        }
        return scale2(scale2(x, -1000.0), k + 1000.0);
    }
    x * f64::from_bits(((k as i64 + 1023) as u64) << 52)
}

impl Ext {
    pub const ZERO: Ext = Ext { m: Complex64 { re: 0.0, im: 0.0 }, e: 0.0 };
    pub const ONE: Ext = Ext { m: Complex64 { re: 1.0, im: 0.0 }, e: 0.0 };

    /// `m · e^s`.
    pub fn new(m: Complex64, s: f64) -> Ext {
        Ext::complex(m) * Ext::from_log(s)
    }

    pub fn real(x: f64) -> Ext {
        Ext { m: Complex64::new(x, 0.0), e: 0.0 }.renorm()
    }

    pub fn complex(z: Complex64) -> Ext {
        Ext { m: z, e: 0.0 }.renorm()
    }

    /// `e^l` for real `l`.
    pub fn from_log(l: f64) -> Ext {
        Ext::polar_log(l, 0.0)
    }

    /// `sign · e^l` for real `l`.
    pub fn signed_from_log(sign: f64, l: f64) -> Ext {
        if sign == 0.0 {
            return Ext::ZERO;
        }
        let v = Ext::from_log(l);
        Ext { m: v.m * sign.signum(), e: v.e }
    }

    /// `e^{l + iθ}`.
    fn polar_log(l: f64, theta: f64) -> Ext {
        if l == f64::NEG_INFINITY {
            return Ext::ZERO;
        }
        if l.is_nan() || l == f64::INFINITY {
            return Ext { m: Complex64::new(l, 0.0), e: 0.0 };
        }
        if l.abs() > 1e15 {
            return Ext { m: Complex64::from_polar(1.0, theta), e: (l / LN_2).round() };
        }
        let q = (l / LN_2).floor();
        let r = l - q * LN_2;
        let a = r.exp();
        let m = if theta == 0.0 { Complex64::new(a, 0.0) } else { Complex64::from_polar(a, theta) };
        Ext { m, e: q }
    }

    fn renorm(self) -> Ext {
        let a = self.m.re.abs().max(self.m.im.abs());
        if a == 0.0 {
            return Ext::ZERO;
        }
        if (LO..=HI).contains(&a) || !a.is_finite() {
            return self;
        }
        if a < f64::MIN_POSITIVE {
            let m = scale2(self.m, 600.0);
            return Ext { m, e: self.e - 600.0 }.renorm();
        }
        let k = ((a.to_bits() >> 52) & 0x7ff) as f64 - 1023.0;
        Ext { m: scale2(self.m, -k), e: self.e + k }
    }

    pub fn is_zero(&self) -> bool {
        self.m.re == 0.0 && self.m.im == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.m.re.is_finite() && self.m.im.is_finite() && self.e.is_finite()
    }

    /// Natural log of the magnitude; `-inf` for zero.
    pub fn log_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.m.norm().ln() + self.e * LN_2
        }
    }

    /// Conversion to `Complex64`, overflowing to infinity when out of range.
    pub fn to_c64(&self) -> Complex64 {
        if self.is_zero() {
            return self.m;
        }
        scale2(self.m, self.e)
    }

    /// Real value when the number is (numerically) real.
    pub fn as_real(&self) -> Option<f64> {
        if self.m.im == 0.0 || self.m.im.abs() <= 1e-14 * self.m.re.abs() {
            Some(scale2(Complex64::new(self.m.re, 0.0), self.e).re)
        } else {
            None
        }
    }

    /// Sign of the real part, `0` for zero.
    pub fn re_signum(&self) -> f64 {
        if self.m.re == 0.0 {
            0.0
        } else {
            self.m.re.signum()
        }
    }

    /// Multiply by `e^l`.
    pub fn scale_log(self, l: f64) -> Ext {
        if self.is_zero() {
            self
        } else {
            self * Ext::from_log(l)
        }
    }

    pub fn exp(self) -> Ext {
        let z = self.to_c64();
        Ext::polar_log(z.re, z.im)
    }

    /// Principal logarithm; `None` at zero.
    pub fn ln(self) -> Option<Ext> {
        if self.is_zero() {
            return None;
        }
        Some(Ext::complex(Complex64::new(self.log_abs(), self.m.arg())))
    }

    pub fn sin(self) -> Ext {
        let z = self.to_c64();
        if z.im.abs() < 600.0 {
            return Ext::complex(z.sin());
        }
        let iz = Ext::complex(Complex64::new(-z.im, z.re));
        (iz.exp() - (-iz).exp()) / Ext::complex(Complex64::new(0.0, 2.0))
    }

    pub fn cos(self) -> Ext {
        let z = self.to_c64();
        if z.im.abs() < 600.0 {
            return Ext::complex(z.cos());
        }
        let iz = Ext::complex(Complex64::new(-z.im, z.re));
        (iz.exp() + (-iz).exp()) * Ext::real(0.5)
    }

    pub fn powi(self, n: i64) -> Ext {
        if n == 0 {
            return Ext::ONE;
        }
        if self.is_zero() {
            return if n > 0 { Ext::ZERO } else { Ext::real(f64::INFINITY) };
        }
        let mut acc = Ext::ONE;
        let mut base = self;
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        if n < 0 {
            Ext::ONE / acc
        } else {
            acc
        }
    }

    /// `self^p` for real `p` on the principal branch.
    pub fn powf(self, p: f64) -> Ext {
        if self.is_zero() {
            return if p > 0.0 { Ext::ZERO } else { Ext::real(f64::INFINITY) };
        }
        Ext::polar_log(p * self.log_abs(), p * self.m.arg())
    }

    pub fn abs(self) -> Ext {
        Ext { m: Complex64::new(self.m.norm(), 0.0), e: self.e }.renorm()
    }
}

impl From<f64> for Ext {
    fn from(x: f64) -> Ext {
        Ext::real(x)
    }
}

impl From<Complex64> for Ext {
    fn from(z: Complex64) -> Ext {
        Ext::complex(z)
    }
}

impl Add for Ext {
    type Output = Ext;
    fn add(self, o: Ext) -> Ext {
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        let (big, small) = if self.e >= o.e { (self, o) } else { (o, self) };
        let d = small.e - big.e;
        if d < -1100.0 {
            return big;
        }
        Ext { m: big.m + scale2(small.m, d), e: big.e }.renorm()
    }
}

impl Sub for Ext {
    type Output = Ext;
    fn sub(self, o: Ext) -> Ext {
        self + (-o)
    }
}

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext { m: -self.m, e: self.e }
    }
}

impl Mul for Ext {
    type Output = Ext;
    fn mul(self, o: Ext) -> Ext {
        if self.is_zero() || o.is_zero() {
            return Ext::ZERO;
        }
        Ext { m: self.m * o.m, e: self.e + o.e }.renorm()
    }
}

impl Div for Ext {
    type Output = Ext;
    fn div(self, o: Ext) -> Ext {
        if self.is_zero() && !o.is_zero() {
            return Ext::ZERO;
        }
        Ext { m: self.m / o.m, e: self.e - o.e }.renorm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn arithmetic_matches_complex_in_range() {
        let a = Ext::complex(Complex64::new(1.5, -2.0));
        let b = Ext::complex(Complex64::new(-0.25, 3.0));
        let (za, zb) = (a.to_c64(), b.to_c64());
        assert!(close((a + b).to_c64(), za + zb, 1e-15));
        assert!(close((a - b).to_c64(), za - zb, 1e-15));
        assert!(close((a * b).to_c64(), za * zb, 1e-15));
        assert!(close((a / b).to_c64(), za / zb, 1e-15));
        assert!(close(a.exp().to_c64(), za.exp(), 1e-14));
        assert!(close(a.sin().to_c64(), za.sin(), 1e-14));
        assert!(close(a.cos().to_c64(), za.cos(), 1e-14));
        assert!(close(a.powi(-3).to_c64(), za.powi(-3), 1e-14));
        assert!(close(b.powf(0.5).to_c64(), zb.powf(0.5), 1e-14));
        assert_eq!(Ext::real(3.0).to_c64().re, 3.0);
    }

    #[test]
    fn survives_overflow() {
        let big = Ext::from_log(5000.0);
        let sq = big * big;
        assert!((sq.log_abs() - 10000.0).abs() < 1e-9);
        assert!(((big + big).log_abs() - (5000.0 + 2f64.ln())).abs() < 1e-9);
        assert_eq!((big / big).to_c64(), Complex64::new(1.0, 0.0));
        let e = Ext::real(-3000.0).exp();
        assert!((e.log_abs() + 3000.0).abs() < 1e-9);
        let tiny = Ext::from_log(-1e24);
        assert!(tiny.is_finite() && (tiny.log_abs() / -1e24 - 1.0).abs() < 1e-12);
        let s = Ext::from_log(900.0) + Ext::ONE - Ext::from_log(900.0);
        assert!(s.is_finite());
    }

    #[test]
    fn zero_handling() {
        assert!(Ext::ZERO.log_abs().is_infinite());
        assert!((Ext::ZERO * Ext::from_log(900.0)).is_zero());
        assert!(Ext::ZERO.ln().is_none());
        assert_eq!(Ext::ZERO.powi(3), Ext::ZERO);
        assert!((Ext::real(1e-310) * Ext::real(1e10)).as_real().unwrap() > 0.0);
    }
}
