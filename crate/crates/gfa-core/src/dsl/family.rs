//! ε-parametrized families `u_ε(x)` and their derivative rules.

use super::ast::{Expr, Func, Var, E};
use super::diff::Builder;
use super::parse::FamilyDef;
use super::tape::{EvalError, Tape};
use crate::ext::Ext;
use crate::scale::EpsGrid;
use serde::Serialize;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, RwLock};
use thiserror::Error;

/// Default cap on the total order of symbolic derivatives.
pub const DEFAULT_MAX_ORDER: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("derivative order {order} exceeds the family's cap of {cap}")]
    OrderCap { order: usize, cap: usize },
    #[error("multi-index has {got} entries but the family has dimension {dim}")]
    BadIndex { got: usize, dim: usize },
    #[error("expression uses x{used} but the family has dimension {dim}")]
    TooManyCoords { used: usize, dim: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Other(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    Dsl,
    Piecewise,
    Programmatic,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Dsl => "dsl",
            FamilyKind::Piecewise => "piecewise",
            FamilyKind::Programmatic => "programmatic",
        })
    }
}

/// A location where a family varies on a scale much finer than the region,
/// e.g. the peak of `bump(x/ε)` at 0 with width ε.
#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub center: Vec<f64>,
    pub width: f64,
}

/// Value and derivative rule of a family.
pub trait FamilyRule: Send + Sync {
    fn dim(&self) -> usize;

    fn max_order(&self) -> usize;

    /// `∂^α u_ε(x)`.
    fn deriv(&self, alpha: &[usize], eps: f64, x: &[f64]) -> Result<Ext, FamilyError>;

    /// `∂^α u_ε(x + dx)` for a point carried as a sum of two doubles.
    fn deriv_offset(&self, alpha: &[usize], eps: f64, x: &[f64], dx: &[f64]) -> Result<Ext, FamilyError> {
        let y: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + b).collect();
        self.deriv(alpha, eps, &y)
    }

    /// `∂^α u_ε` at many points, stored as consecutive `dim`-tuples.
    fn deriv_many(&self, alpha: &[usize], eps: f64, xs: &[f64]) -> Result<Vec<Ext>, FamilyError> {
        xs.chunks(self.dim()).map(|x| self.deriv(alpha, eps, x)).collect()
    }

    /// Radius `R(ε)` outside of which `u_ε` vanishes.
    fn support_hint(&self, _eps: f64) -> Option<f64> {
        None
    }

    fn features(&self, _eps: f64) -> Vec<Feature> {
        Vec::new()
    }

    /// Fixed points (d = 1) where the family concentrates for small ε.
    fn singular_points(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Subsequences of ε on which the family is nonzero, if it is not all of (0,1).
    fn grids(&self) -> Option<Vec<EpsGrid>> {
        None
    }

    fn expr(&self) -> Option<E> {
        None
    }
}

/// Memo of region sups, keyed by a description of `(α, ε, region)`.
pub type SupCache = Mutex<HashMap<String, f64>>;

/// A named family with a shared sup memo.
#[derive(Clone)]
pub struct Family {
    pub name: String,
    pub kind: FamilyKind,
    rule: Arc<dyn FamilyRule>,
    cache: Arc<SupCache>,
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Family")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("dim", &self.dim())
            .finish()
    }
}

impl Family {
    pub fn new(name: impl Into<String>, kind: FamilyKind, rule: Arc<dyn FamilyRule>) -> Family {
        Family { name: name.into(), kind, rule, cache: Arc::new(Mutex::new(HashMap::new())) }
    }

    /// DSL family with symbolic derivatives up to [`DEFAULT_MAX_ORDER`].
    pub fn from_expr(name: impl Into<String>, expr: &E, dim: usize) -> Result<Family, FamilyError> {
        Family::from_expr_with_order(name, expr, dim, DEFAULT_MAX_ORDER)
    }

    pub fn from_expr_with_order(
        name: impl Into<String>,
        expr: &E,
        dim: usize,
        max_order: usize,
    ) -> Result<Family, FamilyError> {
        let rule = DslFamily::new(expr, dim, max_order)?;
        Ok(Family::new(name, FamilyKind::Dsl, Arc::new(rule)))
    }

    pub fn from_def(def: &FamilyDef) -> Result<Family, FamilyError> {
        Family::from_expr(def.name.clone(), &def.expr, def.dim)
    }

    /// Parse and build a DSL family in one step.
    pub fn parse(name: &str, src: &str, dim: usize) -> Result<Family, String> {
        let e = super::parse::parse(src).map_err(|e| e.to_string())?;
        Family::from_expr(name, &e, dim).map_err(|e| e.to_string())
    }

    pub fn rule(&self) -> &Arc<dyn FamilyRule> {
        &self.rule
    }

    pub fn dim(&self) -> usize {
        self.rule.dim()
    }

    pub fn max_order(&self) -> usize {
        self.rule.max_order()
    }

    pub fn value(&self, eps: f64, x: &[f64]) -> Result<Ext, FamilyError> {
        self.rule.deriv(&vec![0; self.dim()], eps, x)
    }

    pub fn deriv(&self, alpha: &[usize], eps: f64, x: &[f64]) -> Result<Ext, FamilyError> {
        self.rule.deriv(alpha, eps, x)
    }

    pub fn deriv_offset(&self, alpha: &[usize], eps: f64, x: &[f64], dx: &[f64]) -> Result<Ext, FamilyError> {
        self.rule.deriv_offset(alpha, eps, x, dx)
    }

    pub fn deriv_many(&self, alpha: &[usize], eps: f64, xs: &[f64]) -> Result<Vec<Ext>, FamilyError> {
        self.rule.deriv_many(alpha, eps, xs)
    }

    /// One-dimensional `u_ε^{(k)}(x)`.
    pub fn d1(&self, k: usize, eps: f64, x: f64) -> Result<Ext, FamilyError> {
        self.rule.deriv(&[k], eps, &[x])
    }

    pub fn support_hint(&self, eps: f64) -> Option<f64> {
        self.rule.support_hint(eps)
    }

    pub fn features(&self, eps: f64) -> Vec<Feature> {
        self.rule.features(eps)
    }

    pub fn singular_points(&self) -> Vec<f64> {
        self.rule.singular_points()
    }

    pub fn grids(&self) -> Option<Vec<EpsGrid>> {
        self.rule.grids()
    }

    pub fn expr(&self) -> Option<E> {
        self.rule.expr()
    }

    /// Look up or compute a memoized sup.
    pub fn memo(&self, key: String, f: impl FnOnce() -> f64) -> f64 {
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return *v;
        }
        let v = f();
        self.cache.lock().unwrap().entry(key).or_insert(v);
        v
    }

    /// [`Family::memo`] for fallible computations; errors are not cached.
    pub fn try_memo<Er>(&self, key: String, f: impl FnOnce() -> Result<f64, Er>) -> Result<f64, Er> {
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = f()?;
        self.cache.lock().unwrap().entry(key).or_insert(v);
        Ok(v)
    }

    /// Drop all memoized sups.
    pub fn clear_memo(&self) {
        self.cache.lock().unwrap().clear();
    }
}

/// Affine kernel argument `c(ε)·x + b(ε)` found in a one-dimensional expression.
struct AffineKernel {
    is_bump: bool,
    at_zero: Tape,
    slope: Tape,
    top_level: bool,
}

/// Symbolically differentiated family with per-multi-index memoized tapes.
pub struct DslFamily {
    dim: usize,
    max_order: usize,
    root: E,
    builder: Mutex<Builder>,
    exprs: Mutex<HashMap<Vec<usize>, E>>,
    tapes: RwLock<HashMap<Vec<usize>, Arc<Tape>>>,
    kernels: Vec<AffineKernel>,
}

impl DslFamily {
    pub fn new(expr: &E, dim: usize, max_order: usize) -> Result<DslFamily, FamilyError> {
        let used = expr.coord_count();
        if used > dim {
            return Err(FamilyError::TooManyCoords { used, dim });
        }
        let mut b = Builder::new();
        let root = b.simplify(expr);
        let kernels = if dim == 1 { affine_kernels(&mut b, &root) } else { Vec::new() };
        let mut exprs = HashMap::new();
        exprs.insert(vec![0; dim], root.clone());
        Ok(DslFamily {
            dim,
            max_order,
            root,
            builder: Mutex::new(b),
            exprs: Mutex::new(exprs),
            tapes: RwLock::new(HashMap::new()),
            kernels,
        })
    }

    /// Symbolic `∂^α u`, built from the nearest memoized lower order.
    pub fn derivative_expr(&self, alpha: &[usize]) -> Result<E, FamilyError> {
        self.check(alpha)?;
        if let Some(e) = self.exprs.lock().unwrap().get(alpha) {
            return Ok(e.clone());
        }
        let i = alpha.iter().position(|&a| a > 0).expect("order-0 expression is always present");
        let mut parent = alpha.to_vec();
        parent[i] -= 1;
        let pe = self.derivative_expr(&parent)?;
        let d = self.builder.lock().unwrap().diff(&pe, Var::X(i));
        Ok(self.exprs.lock().unwrap().entry(alpha.to_vec()).or_insert(d).clone())
    }

    fn check(&self, alpha: &[usize]) -> Result<(), FamilyError> {
        if alpha.len() != self.dim {
            return Err(FamilyError::BadIndex { got: alpha.len(), dim: self.dim });
        }
        let order: usize = alpha.iter().sum();
        if order > self.max_order {
            return Err(FamilyError::OrderCap { order, cap: self.max_order });
        }
        Ok(())
    }

    fn tape(&self, alpha: &[usize]) -> Result<Arc<Tape>, FamilyError> {
        if let Some(t) = self.tapes.read().unwrap().get(alpha) {
            return Ok(t.clone());
        }
        let e = self.derivative_expr(alpha)?;
        let t = Arc::new(Tape::compile(&e));
        Ok(self.tapes.write().unwrap().entry(alpha.to_vec()).or_insert(t).clone())
    }

    fn kernel_geometry(&self, k: &AffineKernel, eps: f64) -> Option<(f64, f64)> {
        let b = k.at_zero.eval(eps, &[0.0]).ok()?.as_real()?;
        let c = k.slope.eval(eps, &[0.0]).ok()?.as_real()?;
        if c == 0.0 || !c.is_finite() || !b.is_finite() {
            return None;
        }
        Some((-b / c, 1.0 / c.abs()))
    }
}

impl FamilyRule for DslFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        self.max_order
    }

    fn deriv(&self, alpha: &[usize], eps: f64, x: &[f64]) -> Result<Ext, FamilyError> {
        Ok(self.tape(alpha)?.eval(eps, x)?)
    }

    fn deriv_many(&self, alpha: &[usize], eps: f64, xs: &[f64]) -> Result<Vec<Ext>, FamilyError> {
        Ok(self.tape(alpha)?.eval_many(eps, xs, self.dim)?)
    }

    fn support_hint(&self, eps: f64) -> Option<f64> {
        self.kernels
            .iter()
            .filter(|k| k.is_bump && k.top_level)
            .filter_map(|k| self.kernel_geometry(k, eps))
            .map(|(c, w)| c.abs() + w)
            .reduce(f64::min)
    }

    fn features(&self, eps: f64) -> Vec<Feature> {
        self.kernels
            .iter()
            .filter_map(|k| self.kernel_geometry(k, eps))
            .map(|(c, w)| Feature { center: vec![c], width: w })
            .collect()
    }

    fn expr(&self) -> Option<E> {
        Some(self.root.clone())
    }
}

fn top_factors(e: &E, out: &mut Vec<E>) {
    match &**e {
        Expr::Mul(a, b) => {
            top_factors(a, out);
            top_factors(b, out);
        }
        Expr::Div(a, _) | Expr::Neg(a) => top_factors(a, out),
        _ => out.push(e.clone()),
    }
}

fn affine_kernels(b: &mut Builder, root: &E) -> Vec<AffineKernel> {
    let mut top = Vec::new();
    top_factors(root, &mut top);
    let mut calls: Vec<E> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    collect_kernel_calls(root, &mut calls, &mut seen);
    let mut out = Vec::new();
    for call in calls {
        let Expr::Call(f, arg) = &*call else { continue };
        let d1 = b.diff(arg, Var::X(0));
        let d2 = b.diff(&d1, Var::X(0));
        if !matches!(*b.simplify(&d2), Expr::Num(v) if v == 0.0) || d1.uses_var(Var::X(0)) {
            continue;
        }
        out.push(AffineKernel {
            is_bump: matches!(f, Func::Bump(_)),
            at_zero: Tape::compile(arg),
            slope: Tape::compile(&d1),
            top_level: top.iter().any(|t| Arc::ptr_eq(t, &call)),
        });
    }
    out
}

fn collect_kernel_calls(e: &E, out: &mut Vec<E>, seen: &mut std::collections::HashSet<usize>) {
    if !seen.insert(Arc::as_ptr(e) as usize) {
        return;
    }
    match &**e {
        Expr::Call(Func::Bump(_) | Func::Gauss(_), a) => {
            out.push(e.clone());
            collect_kernel_calls(a, out, seen);
        }
        Expr::Num(_) | Expr::Imag | Expr::Var(_) => {}
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => collect_kernel_calls(a, out, seen),
        Expr::Add(a, c) | Expr::Sub(a, c) | Expr::Mul(a, c) | Expr::Div(a, c) | Expr::PowE(a, c) => {
            collect_kernel_calls(a, out, seen);
            collect_kernel_calls(c, out, seen);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(src: &str) -> Family {
        Family::parse("t", src, 1).unwrap()
    }

    #[test]
    fn mollifier_chain_rule() {
        let f = fam("eps^-1 * bump(x1/eps)");
        let eps = 2f64.powi(-5);
        for k in 0..6 {
            for &x in &[0.0, 0.3 * eps, -0.55 * eps] {
                let got = f.d1(k, eps, x).unwrap().to_c64().re;
                let want = eps.powi(-1 - k as i32) * super::super::kernel::bump(k, x / eps).to_c64().re;
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300), "k={k} x={x}");
            }
        }
        assert_eq!(f.support_hint(eps), Some(eps));
        assert_eq!(f.features(eps), vec![Feature { center: vec![0.0], width: eps }]);
    }

    #[test]
    fn constant_family_has_vanishing_derivatives() {
        let f = fam("1");
        assert_eq!(f.value(0.1, &[3.0]).unwrap().to_c64().re, 1.0);
        for k in 1..5 {
            assert!(f.d1(k, 0.1, 3.0).unwrap().is_zero());
        }
    }

    #[test]
    fn order_cap_is_explicit() {
        let f = Family::from_expr_with_order("t", &super::super::parse::parse("sin(x1)").unwrap(), 1, 3).unwrap();
        assert!(f.d1(3, 0.1, 0.2).is_ok());
        assert_eq!(f.d1(4, 0.1, 0.2), Err(FamilyError::OrderCap { order: 4, cap: 3 }));
        assert!(Family::parse("t", "x2", 1).is_err());
    }

    #[test]
    fn log_power_value_at_fast_radius() {
        let f = fam("(1+x1^2)^(log(1+x1^2)/log(1/eps))");
        let eps = 2f64.powi(-8);
        for m in 1..=3 {
            let x = eps.powi(-m);
            let got = f.value(eps, &[x]).unwrap().log_abs();
            let want = (1.0 + x * x).ln().powi(2) / (1.0 / eps).ln();
            assert!((got - want).abs() < 1e-10 * want);
            assert!(got >= (m * m) as f64 * (1.0 / eps).ln());
        }
        assert_eq!(f.value(eps, &[0.0]).unwrap().to_c64().re, 1.0);
    }

    #[test]
    fn features_of_shifted_and_scaled_kernels() {
        let f = fam("gauss(x1 - 1/eps)");
        assert_eq!(f.features(0.25), vec![Feature { center: vec![4.0], width: 1.0 }]);
        assert_eq!(f.support_hint(0.25), None);
        let g = fam("bump(x1) * sin(x1/eps)");
        assert_eq!(g.support_hint(0.1), Some(1.0));
        assert_eq!(fam("bump(x1) + 1").support_hint(0.1), None);
    }

    #[test]
    fn multivariate_mixed_partials_numerically_equal() {
        let e = super::super::parse::parse("exp(x1*x2) * sin(x1 + 2*x2) / (1 + x1^2)").unwrap();
        let f = Family::from_expr("t", &e, 2).unwrap();
        for &(a, b) in &[(0.1, 0.2), (-0.7, 0.4), (1.3, -0.9)] {
            let xy = f.deriv(&[1, 2], 0.1, &[a, b]).unwrap().to_c64();
            let rule = f.rule().clone();
            let dsl = rule.expr().unwrap();
            let mut bd = Builder::new();
            let d = bd.diff(&dsl, Var::X(1));
            let d = bd.diff(&d, Var::X(1));
            let d = bd.diff(&d, Var::X(0));
            let yx = Tape::compile(&d).eval(0.1, &[a, b]).unwrap().to_c64();
            assert!((xy - yx).norm() <= 1e-12 * xy.norm().max(1.0));
        }
    }
}
