//! Expression trees.

use std::fmt;
use std::sync::Arc;

/// Exact rational `num/den` with `den > 0` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Option<Rational> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Some(Rational { num: s * num / g, den: s * den / g })
    }

    pub fn int(n: i64) -> Rational {
        Rational { num: n, den: 1 }
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn add(self, o: Rational) -> Option<Rational> {
        let n = self.num.checked_mul(o.den)?.checked_add(o.num.checked_mul(self.den)?)?;
        Rational::new(n, self.den.checked_mul(o.den)?)
    }

    pub fn mul(self, o: Rational) -> Option<Rational> {
        Rational::new(self.num.checked_mul(o.num)?, self.den.checked_mul(o.den)?)
    }

    pub fn recip(self) -> Option<Rational> {
        Rational::new(self.den, self.num)
    }

    /// Exact rational equal to a finite `f64` with denominator at most `10^6`.
    pub fn from_f64(v: f64) -> Option<Rational> {
        if !v.is_finite() || v.abs() > 1e15 {
            return None;
        }
        if v.fract() == 0.0 {
            return Some(Rational::int(v as i64));
        }
        let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
        let mut x = v;
        for _ in 0..40 {
            let a = x.floor();
            let ai = a as i64;
            let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
            let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
            if k2 > 1_000_000 {
                return None;
            }
            if h2 as f64 / k2 as f64 == v {
                return Rational::new(h2, k2);
            }
            (h0, h1, k0, k1) = (h1, h2, k1, k2);
            let f = x - a;
            if f == 0.0 {
                break;
            }
            x = 1.0 / f;
        }
        None
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Variables: `eps` and the coordinates `x1..xd` (stored zero-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    Eps,
    X(usize),
}

/// Unary builtins. Kernels carry their derivative order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Log,
    Sqrt,
    /// `φ^{(k)}` for `φ(t) = e^{-1/(1-t²)}` on `|t| < 1`.
    Bump(u32),
    /// `k`-th derivative of `e^{-t²}`.
    Gauss(u32),
}

impl Func {
    pub fn name(&self) -> String {
        match self {
            Func::Exp => "exp".into(),
            Func::Sin => "sin".into(),
            Func::Cos => "cos".into(),
            Func::Log => "log".into(),
            Func::Sqrt => "sqrt".into(),
            Func::Bump(0) => "bump".into(),
            Func::Bump(k) => format!("bump_{k}"),
            Func::Gauss(0) => "gauss".into(),
            Func::Gauss(k) => format!("gauss_{k}"),
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        let kernel = |prefix: &str| -> Option<u32> {
            if s == prefix {
                Some(0)
            } else {
                s.strip_prefix(prefix)?.strip_prefix('_')?.parse().ok()
            }
        };
        Some(match s {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => {
                if let Some(k) = kernel("bump") {
                    Func::Bump(k)
                } else {
                    Func::Gauss(kernel("gauss")?)
                }
            }
        })
    }
}

pub type E = Arc<Expr>;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// The imaginary unit `i`.
    Imag,
    Var(Var),
    Neg(E),
    Add(E, E),
    Sub(E, E),
    Mul(E, E),
    Div(E, E),
    /// Power with a constant rational exponent.
    Pow(E, Rational),
    /// `f^g = exp(g·log f)` for a non-constant exponent.
    PowE(E, E),
    Call(Func, E),
}

impl Expr {
    pub fn num(v: f64) -> E {
        Arc::new(Expr::Num(v))
    }

    pub fn var(v: Var) -> E {
        Arc::new(Expr::Var(v))
    }

    /// Visit every node, parents before children.
    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Imag | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.walk(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::PowE(a, b) => {
                a.walk(f);
                b.walk(f);
            }
        }
    }

    /// Largest coordinate index used, plus one.
    pub fn coord_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |e| {
            if let Expr::Var(Var::X(k)) = e {
                n = n.max(k + 1);
            }
        });
        n
    }

    pub fn uses_var(&self, v: Var) -> bool {
        let mut hit = false;
        self.walk(&mut |e| {
            if *e == Expr::Var(v) {
                hit = true;
            }
        });
        hit
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Value of a variable-free real expression.
    pub fn const_value(&self) -> Option<f64> {
        Some(match self {
            Expr::Num(v) => *v,
            Expr::Imag | Expr::Var(_) => return None,
            Expr::Neg(a) => -a.const_value()?,
            Expr::Add(a, b) => a.const_value()? + b.const_value()?,
            Expr::Sub(a, b) => a.const_value()? - b.const_value()?,
            Expr::Mul(a, b) => a.const_value()? * b.const_value()?,
            Expr::Div(a, b) => a.const_value()? / b.const_value()?,
            Expr::Pow(a, r) => a.const_value()?.powf(r.value()),
            Expr::PowE(a, b) => a.const_value()?.powf(b.const_value()?),
            Expr::Call(f, a) => {
                let x = a.const_value()?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Log => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Bump(_) | Func::Gauss(_) => return None,
                }
            }
        })
    }

    /// Exact rational value of a variable-free arithmetic expression.
    pub fn const_rational(&self) -> Option<Rational> {
        match self {
            Expr::Num(v) => Rational::from_f64(*v),
            Expr::Neg(a) => a.const_rational()?.mul(Rational::int(-1)),
            Expr::Add(a, b) => a.const_rational()?.add(b.const_rational()?),
            Expr::Sub(a, b) => a.const_rational()?.add(b.const_rational()?.mul(Rational::int(-1))?),
            Expr::Mul(a, b) => a.const_rational()?.mul(b.const_rational()?),
            Expr::Div(a, b) => {
                let d = b.const_rational()?;
                if d.num == 0 {
                    return None;
                }
                a.const_rational()?.mul(d.recip()?)
            }
            Expr::Pow(a, r) if r.is_integer() && r.num.abs() <= 16 => {
                let base = a.const_rational()?;
                let mut acc = Rational::int(1);
                for _ in 0..r.num.abs() {
                    acc = acc.mul(base)?;
                }
                if r.num < 0 {
                    if acc.num == 0 {
                        return None;
                    }
                    acc = acc.recip()?;
                }
                Some(acc)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(Rational::new(4, -6), Some(Rational { num: -2, den: 3 }));
        assert_eq!(Rational::from_f64(0.5), Rational::new(1, 2));
        assert_eq!(Rational::from_f64(-2.0), Some(Rational::int(-2)));
        assert_eq!(Rational::from_f64(0.001), Rational::new(1, 1000));
        assert_eq!(Rational::from_f64(std::f64::consts::PI), None);
    }

    #[test]
    fn func_names() {
        for f in [Func::Exp, Func::Bump(0), Func::Bump(3), Func::Gauss(11), Func::Sqrt] {
            assert_eq!(Func::from_name(&f.name()), Some(f));
        }
        assert_eq!(Func::from_name("bump_x"), None);
        assert_eq!(Func::from_name("tan"), None);
    }
}
