//! Straight-line evaluation of expression DAGs.
//!
//! Each tape runs first in plain `Complex64`; if any intermediate leaves
//! `[1e-280, 1e280]` in magnitude the whole evaluation is redone in [`Ext`].

use super::ast::{Expr, Func, Rational, Var, E};
use super::diff::Builder;
use super::kernel;
use super::parse::print;
use crate::ext::Ext;
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain error in `{site}`: {msg}")]
    Domain { site: String, msg: &'static str },
    #[error("expression uses x{0} but only {1} coordinate(s) were given")]
    MissingCoord(usize, usize),
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(Complex64),
    Eps,
    X(usize),
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32, u32),
    PowI(u32, i64),
    PowR(u32, Rational),
    PowE(u32, u32, u32),
    Exp(u32),
    Sin(u32),
    Cos(u32),
    Log(u32, u32),
    Sqrt(u32, u32),
    Bump(u32, u32),
    Gauss(u32, u32),
}

/// A compiled expression: one register per distinct subexpression.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    /// Whether each register depends on `x`.
    varying: Vec<bool>,
    sites: Vec<String>,
    coords: usize,
}

const SITE_LEN: usize = 80;
/// Lanes per block in batched evaluation.
const LANES: usize = 64;

/// Outcome of one operation on the fast path.
enum Fast {
    Val(Complex64),
    Fallback,
    Err(EvalError),
}

impl Tape {
    pub fn compile(e: &E) -> Tape {
        let mut b = Builder::new();
        let e = b.intern(e);
        let mut t = Tape { ops: Vec::new(), varying: Vec::new(), sites: Vec::new(), coords: e.coord_count() };
        let mut regs = HashMap::new();
        t.emit(&e, &mut regs);
        t
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn site(&mut self, e: &Expr) -> u32 {
        let mut s = print(e);
        if s.len() > SITE_LEN {
            let cut = (0..=SITE_LEN).rev().find(|&i| s.is_char_boundary(i)).unwrap_or(0);
            s.truncate(cut);
            s.push_str("...");
        }
        self.sites.push(s);
        (self.sites.len() - 1) as u32
    }

    fn emit(&mut self, e: &E, regs: &mut HashMap<usize, u32>) -> u32 {
        let key = Arc::as_ptr(e) as usize;
        if let Some(&r) = regs.get(&key) {
            return r;
        }
        let op = match &**e {
            Expr::Num(v) => Op::Const(Complex64::new(*v, 0.0)),
            Expr::Imag => Op::Const(Complex64::new(0.0, 1.0)),
            Expr::Var(Var::Eps) => Op::Eps,
            Expr::Var(Var::X(k)) => Op::X(*k),
            Expr::Neg(a) => Op::Neg(self.emit(a, regs)),
            Expr::Add(a, b) => Op::Add(self.emit(a, regs), self.emit(b, regs)),
            Expr::Sub(a, b) => Op::Sub(self.emit(a, regs), self.emit(b, regs)),
            Expr::Mul(a, b) => Op::Mul(self.emit(a, regs), self.emit(b, regs)),
            Expr::Div(a, b) => {
                let (ra, rb) = (self.emit(a, regs), self.emit(b, regs));
                Op::Div(ra, rb, self.site(e))
            }
            Expr::Pow(a, r) if r.is_integer() => Op::PowI(self.emit(a, regs), r.num),
            Expr::Pow(a, r) => Op::PowR(self.emit(a, regs), *r),
            Expr::PowE(a, b) => {
                let (ra, rb) = (self.emit(a, regs), self.emit(b, regs));
                Op::PowE(ra, rb, self.site(e))
            }
            Expr::Call(f, a) => {
                let ra = self.emit(a, regs);
                match f {
                    Func::Exp => Op::Exp(ra),
                    Func::Sin => Op::Sin(ra),
                    Func::Cos => Op::Cos(ra),
                    Func::Log => Op::Log(ra, self.site(e)),
                    Func::Sqrt => Op::Sqrt(ra, self.site(e)),
                    Func::Bump(k) => Op::Bump(ra, *k),
                    Func::Gauss(k) => Op::Gauss(ra, *k),
                }
            }
        };
        let v = |r: u32| self.varying[r as usize];
        let varying = match op {
            Op::Const(_) | Op::Eps => false,
            Op::X(_) => true,
            Op::Neg(a) | Op::PowI(a, _) | Op::PowR(a, _) | Op::Exp(a) | Op::Sin(a) | Op::Cos(a) => v(a),
            Op::Log(a, _) | Op::Sqrt(a, _) | Op::Bump(a, _) | Op::Gauss(a, _) => v(a),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b, _) | Op::PowE(a, b, _) => v(a) || v(b),
        };
        self.ops.push(op);
        self.varying.push(varying);
        let r = (self.ops.len() - 1) as u32;
        regs.insert(key, r);
        r
    }

    fn domain(&self, site: u32, msg: &'static str) -> EvalError {
        EvalError::Domain { site: self.sites[site as usize].clone(), msg }
    }

    /// Evaluate at `(ε, x)`.
    pub fn eval(&self, eps: f64, x: &[f64]) -> Result<Ext, EvalError> {
        if x.len() < self.coords {
            return Err(EvalError::MissingCoord(self.coords, x.len()));
        }
        match self.eval_fast(eps, x) {
            Some(r) => r.map(Ext::complex),
            None => self.eval_ext(eps, x),
        }
    }

    /// Evaluate at many points, stored as consecutive `dim`-tuples.
    ///
    /// Subexpressions of `ε` alone are computed once; the rest runs in
    /// blocks of lanes, and lanes leaving double range are redone in [`Ext`].
    pub fn eval_many(&self, eps: f64, xs: &[f64], dim: usize) -> Result<Vec<Ext>, EvalError> {
        if dim < self.coords {
            return Err(EvalError::MissingCoord(self.coords, dim));
        }
        let n = xs.len() / dim.max(1);
        let n_ops = self.ops.len();
        let mut reg = vec![Complex64::new(0.0, 0.0); n_ops * LANES];
        for (i, op) in self.ops.iter().enumerate() {
            if self.varying[i] {
                continue;
            }
            match self.fast_op(op, |r| reg[r as usize * LANES], eps, &[]) {
                Fast::Val(v) => reg[i * LANES..(i + 1) * LANES].fill(v),
                Fast::Fallback => {
                    return xs.chunks(dim.max(1)).take(n).map(|x| self.eval_ext(eps, x)).collect();
                }
                Fast::Err(e) => return Err(e),
            }
        }
        let mut out = Vec::with_capacity(n);
        let mut state: [u8; LANES] = [0; LANES];
        for start in (0..n).step_by(LANES) {
            let lanes = LANES.min(n - start);
            let point = |l: usize| &xs[(start + l) * dim..(start + l + 1) * dim];
            state[..lanes].fill(0);
            let mut first_err: Option<(usize, EvalError)> = None;
            for (i, op) in self.ops.iter().enumerate() {
                if !self.varying[i] {
                    continue;
                }
                for l in 0..lanes {
                    if state[l] != 0 {
                        continue;
                    }
                    match self.fast_op(op, |r| reg[r as usize * LANES + l], eps, point(l)) {
                        Fast::Val(v) => reg[i * LANES + l] = v,
                        Fast::Fallback => state[l] = 1,
                        Fast::Err(e) => {
                            state[l] = 2;
                            if first_err.as_ref().is_none_or(|(j, _)| l < *j) {
                                first_err = Some((l, e));
                            }
                        }
                    }
                }
            }
            let last = (n_ops - 1) * LANES;
            for l in 0..lanes {
                match state[l] {
                    0 => out.push(Ext::complex(reg[last + l])),
                    1 => out.push(self.eval_ext(eps, point(l))?),
                    // the first failing lane holds the smallest index
                    _ => return Err(first_err.take().expect("error recorded").1),
                }
            }
        }
        Ok(out)
    }

    fn eval_fast(&self, eps: f64, x: &[f64]) -> Option<Result<Complex64, EvalError>> {
        let mut reg: Vec<Complex64> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            match self.fast_op(op, |r| reg[r as usize], eps, x) {
                Fast::Val(v) => reg.push(v),
                Fast::Fallback => return None,
                Fast::Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(*reg.last().unwrap()))
    }

    #[inline]
    fn fast_op(&self, op: &Op, g: impl Fn(u32) -> Complex64, eps: f64, x: &[f64]) -> Fast {
        let zero = Complex64::new(0.0, 0.0);
        let v = match *op {
            Op::Const(c) => c,
            Op::Eps => Complex64::new(eps, 0.0),
            Op::X(k) => Complex64::new(x[k], 0.0),
            Op::Neg(a) => -g(a),
            Op::Add(a, b) => g(a) + g(b),
            Op::Sub(a, b) => g(a) - g(b),
            Op::Mul(a, b) => {
                let (p, q) = (g(a), g(b));
                let z = p * q;
                if z == zero && p != zero && q != zero {
                    return Fast::Fallback;
                }
                z
            }
            Op::Div(a, b, s) => {
                let (p, q) = (g(a), g(b));
                if q == zero {
                    return Fast::Err(self.domain(s, "division by zero"));
                }
                let z = p / q;
                if z == zero && p != zero {
                    return Fast::Fallback;
                }
                z
            }
            Op::PowI(a, n) => {
                let p = g(a);
                if p == zero && n < 0 {
                    return Fast::Fallback;
                }
                p.powi(n as i32)
            }
            Op::PowR(a, r) => {
                let p = g(a);
                if p == zero {
                    if r.num < 0 {
                        return Fast::Fallback;
                    }
                    zero
                } else {
                    real_root(p, r).unwrap_or_else(|| p.powf(r.value()))
                }
            }
            Op::PowE(a, b, s) => {
                let (f, e) = (g(a), g(b));
                let Some(l) = positive_log(f) else {
                    return Fast::Err(self.domain(s, "non-positive base of a general power"));
                };
                let w = e * l;
                if w.re.abs() > 600.0 {
                    return Fast::Fallback;
                }
                w.exp()
            }
            Op::Exp(a) => {
                let p = g(a);
                if p.re.abs() > 600.0 {
                    return Fast::Fallback;
                }
                p.exp()
            }
            Op::Sin(a) => g(a).sin(),
            Op::Cos(a) => g(a).cos(),
            Op::Log(a, s) => match positive_log(g(a)) {
                Some(l) => l,
                None => return Fast::Err(self.domain(s, "log of a non-positive value")),
            },
            Op::Sqrt(a, s) => {
                let p = g(a);
                if p.im == 0.0 && p.re < 0.0 {
                    return Fast::Err(self.domain(s, "sqrt of a negative value"));
                }
                p.sqrt()
            }
            Op::Bump(a, k) | Op::Gauss(a, k) => {
                let t = g(a);
                if t.im != 0.0 {
                    return Fast::Err(EvalError::Domain {
                        site: "kernel".into(),
                        msg: "kernel applied to a complex argument",
                    });
                }
                let v = if matches!(op, Op::Bump(..)) {
                    kernel::bump(k as usize, t.re)
                } else {
                    kernel::gauss(k as usize, t.re)
                };
                if !v.is_zero() && v.log_abs().abs() > 640.0 {
                    return Fast::Fallback;
                }
                v.to_c64()
            }
        };
        let size = v.re.abs() + v.im.abs();
        if !size.is_finite() || (size != 0.0 && !(1e-280..=1e280).contains(&size)) {
            return Fast::Fallback;
        }
        Fast::Val(v)
    }

    fn eval_ext(&self, eps: f64, x: &[f64]) -> Result<Ext, EvalError> {
        let mut reg: Vec<Ext> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let g = |r: u32| reg[r as usize];
            let v = match *op {
                Op::Const(c) => Ext::complex(c),
                Op::Eps => Ext::real(eps),
                Op::X(k) => Ext::real(x[k]),
                Op::Neg(a) => -g(a),
                Op::Add(a, b) => g(a) + g(b),
                Op::Sub(a, b) => g(a) - g(b),
                Op::Mul(a, b) => g(a) * g(b),
                Op::Div(a, b, s) => {
                    if g(b).is_zero() {
                        return Err(self.domain(s, "division by zero"));
                    }
                    g(a) / g(b)
                }
                Op::PowI(a, n) => g(a).powi(n),
                Op::PowR(a, r) => {
                    let p = g(a);
                    match p.as_real() {
                        Some(re) if re < 0.0 && r.den % 2 == 1 => {
                            let m = (-p).powf(r.value());
                            if r.num % 2 == 0 {
                                m
                            } else {
                                -m
                            }
                        }
                        _ => p.powf(r.value()),
                    }
                }
                Op::PowE(a, b, s) => {
                    let f = g(a);
                    match f.as_real() {
                        Some(re) if re > 0.0 => {
                            let l = Ext::real(f.log_abs());
                            (g(b) * l).exp()
                        }
                        _ => return Err(self.domain(s, "non-positive base of a general power")),
                    }
                }
                Op::Exp(a) => g(a).exp(),
                Op::Sin(a) => g(a).sin(),
                Op::Cos(a) => g(a).cos(),
                Op::Log(a, s) => {
                    let p = g(a);
                    match p.as_real() {
                        Some(re) if re > 0.0 => Ext::real(p.log_abs()),
                        _ => return Err(self.domain(s, "log of a non-positive value")),
                    }
                }
                Op::Sqrt(a, s) => {
                    let p = g(a);
                    match p.as_real() {
                        Some(re) if re < 0.0 => return Err(self.domain(s, "sqrt of a negative value")),
                        _ => p.powf(0.5),
                    }
                }
                Op::Bump(a, k) | Op::Gauss(a, k) => {
                    let Some(t) = g(a).as_real() else {
                        return Err(EvalError::Domain {
                            site: "kernel".into(),
                            msg: "kernel applied to a complex argument",
                        });
                    };
                    if matches!(op, Op::Bump(..)) {
                        kernel::bump(k as usize, t)
                    } else {
                        kernel::gauss(k as usize, t)
                    }
                }
            };
            reg.push(v);
        }
        Ok(*reg.last().unwrap())
    }
}

fn positive_log(z: Complex64) -> Option<Complex64> {
    if z.re > 0.0 && z.im.abs() <= 1e-14 * z.re {
        Some(Complex64::new(z.re.ln(), 0.0))
    } else {
        None
    }
}

/// Real odd root of a negative real, e.g. `(-8)^(1/3) = -2`.
fn real_root(p: Complex64, r: Rational) -> Option<Complex64> {
    if p.im == 0.0 && p.re < 0.0 && r.den % 2 == 1 {
        let m = (-p.re).powf(r.value());
        Some(Complex64::new(if r.num % 2 == 0 { m } else { -m }, 0.0))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse;
    use super::*;

    fn ev(src: &str, eps: f64, x: &[f64]) -> Result<Ext, EvalError> {
        Tape::compile(&parse(src).unwrap()).eval(eps, x)
    }

    #[test]
    fn basic_values() {
        let m = ev("eps^-1 * bump(x1/eps)", 1.0 / 16.0, &[0.0]).unwrap();
        assert!((m.to_c64().re - 16.0 * (-1f64).exp()).abs() < 1e-14);
        assert!(ev("bump(x1)", 0.5, &[2.0]).unwrap().is_zero());
        assert_eq!(ev("gauss(x1)", 0.5, &[0.0]).unwrap().to_c64().re, 1.0);
        assert!((ev("(-8)^(1/3)", 0.5, &[]).unwrap().to_c64().re + 2.0).abs() < 1e-15);
        let z = ev("exp(i*x1)", 0.5, &[1.0]).unwrap().to_c64();
        assert!((z.im - 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn domain_errors_name_the_site() {
        match ev("1 + log(x1 - 2)", 0.5, &[1.0]) {
            Err(EvalError::Domain { site, .. }) => assert_eq!(site, "log(x1-2)"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ev("1/x1", 0.5, &[0.0]), Err(EvalError::Domain { .. })));
        assert!(matches!(ev("x2", 0.5, &[0.0]), Err(EvalError::MissingCoord(2, 1))));
    }

    #[test]
    fn extended_range_fallback() {
        // (1 + x²)^(log(1+x²)/log(1/ε)) at x = ε^-3, ε = 2^-20
        let eps = 2f64.powi(-20);
        let x = eps.powi(-3);
        let v = ev("(1+x1^2)^(log(1+x1^2)/log(1/eps))", eps, &[x]).unwrap();
        let want = (1.0 + x * x).ln().powi(2) / (1.0 / eps).ln();
        assert!((v.log_abs() - want).abs() < 1e-9 * want);
        let tiny = ev("exp(-2000) * exp(1990)", 0.5, &[]).unwrap();
        assert!((tiny.log_abs() + 10.0).abs() < 1e-9);
    }

    #[test]
    fn batched_matches_pointwise() {
        let srcs = [
            "(1+x1^2)^(log(1+x1^2)/log(1/eps))",
            "eps^-1 * bump(x1/eps) + exp(1/eps)*x1",
            "sin(x1/eps)*gauss(x1) + i*x1^3",
            "log(x1)",
        ];
        let eps = 2f64.powi(-12);
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 - 37.5) * 1e3).collect();
        for src in srcs {
            let t = Tape::compile(&parse(src).unwrap());
            let one: Result<Vec<Ext>, _> = xs.iter().map(|&x| t.eval(eps, &[x])).collect();
            assert_eq!(t.eval_many(eps, &xs, 1), one, "{src}");
        }
        let t = Tape::compile(&parse("x1*x2 + eps").unwrap());
        let v = t.eval_many(0.5, &[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(v.iter().map(|e| e.to_c64().re).collect::<Vec<_>>(), vec![2.5, 12.5]);
    }

    #[test]
    fn common_subexpressions_share_registers() {
        let t = Tape::compile(&parse("sin(x1)*sin(x1) + sin(x1)").unwrap());
        // x1, sin, mul, add
        assert_eq!(t.len(), 4);
    }
}
