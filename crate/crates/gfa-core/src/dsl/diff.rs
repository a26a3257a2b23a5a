//! Hash-consed construction and symbolic differentiation.
//!
//! A [`Builder`] interns every node, so structurally equal subtrees share one
//! allocation and derivatives of shared subtrees are computed once.

use super::ast::{Expr, Func, Rational, Var, E};
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Num(u64),
    Imag,
    Var(Var),
    Neg(usize),
    Bin(u8, usize, usize),
    Pow(usize, Rational),
    Call(Func, usize),
}

fn id(e: &E) -> usize {
    Arc::as_ptr(e) as usize
}

/// Interner and simplifying constructors (constant folding, 0/1 identities).
#[derive(Default)]
pub struct Builder {
    nodes: HashMap<Key, E>,
    /// Source node (kept alive so its address stays unique) to interned node.
    interned: HashMap<usize, (E, E)>,
    derivs: HashMap<(usize, Var), E>,
}

impl Builder {
    pub fn new() -> Builder {
        Builder::default()
    }

    fn make(&mut self, e: Expr) -> E {
        let key = match &e {
            Expr::Num(v) => Key::Num(if *v == 0.0 { 0 } else { v.to_bits() }),
            Expr::Imag => Key::Imag,
            Expr::Var(v) => Key::Var(*v),
            Expr::Neg(a) => Key::Neg(id(a)),
            Expr::Add(a, b) => Key::Bin(0, id(a), id(b)),
            Expr::Sub(a, b) => Key::Bin(1, id(a), id(b)),
            Expr::Mul(a, b) => Key::Bin(2, id(a), id(b)),
            Expr::Div(a, b) => Key::Bin(3, id(a), id(b)),
            Expr::PowE(a, b) => Key::Bin(4, id(a), id(b)),
            Expr::Pow(a, r) => Key::Pow(id(a), *r),
            Expr::Call(f, a) => Key::Call(*f, id(a)),
        };
        self.nodes.entry(key).or_insert_with(|| Arc::new(e)).clone()
    }

    /// Intern an arbitrary tree without simplifying it.
    pub fn intern(&mut self, e: &E) -> E {
        if let Some((_, x)) = self.interned.get(&id(e)) {
            return x.clone();
        }
        let out = match &**e {
            Expr::Num(_) | Expr::Imag | Expr::Var(_) => self.make((**e).clone()),
            Expr::Neg(a) => {
                let a = self.intern(a);
                self.make(Expr::Neg(a))
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::PowE(a, b) => {
                let (a, b) = (self.intern(a), self.intern(b));
                self.make(match &**e {
                    Expr::Add(..) => Expr::Add(a, b),
                    Expr::Sub(..) => Expr::Sub(a, b),
                    Expr::Mul(..) => Expr::Mul(a, b),
                    Expr::Div(..) => Expr::Div(a, b),
                    _ => Expr::PowE(a, b),
                })
            }
            Expr::Pow(a, r) => {
                let a = self.intern(a);
                self.make(Expr::Pow(a, *r))
            }
            Expr::Call(f, a) => {
                let a = self.intern(a);
                self.make(Expr::Call(*f, a))
            }
        };
        self.interned.insert(id(e), (e.clone(), out.clone()));
        self.interned.insert(id(&out), (out.clone(), out.clone()));
        out
    }

    pub fn num(&mut self, v: f64) -> E {
        self.make(Expr::Num(v))
    }

    pub fn var(&mut self, v: Var) -> E {
        self.make(Expr::Var(v))
    }

    pub fn neg(&mut self, a: E) -> E {
        match &*a {
            Expr::Num(v) => self.num(-v),
            Expr::Neg(b) => b.clone(),
            _ => self.make(Expr::Neg(a)),
        }
    }

    pub fn add(&mut self, a: E, b: E) -> E {
        match (&*a, &*b) {
            (Expr::Num(x), Expr::Num(y)) => self.num(x + y),
            (Expr::Num(x), _) if *x == 0.0 => b,
            (_, Expr::Num(y)) if *y == 0.0 => a,
            (_, Expr::Neg(c)) => {
                let c = c.clone();
                self.sub(a, c)
            }
            _ => self.make(Expr::Add(a, b)),
        }
    }

    pub fn sub(&mut self, a: E, b: E) -> E {
        if Arc::ptr_eq(&a, &b) {
            return self.num(0.0);
        }
        match (&*a, &*b) {
            (Expr::Num(x), Expr::Num(y)) => self.num(x - y),
            (_, Expr::Num(y)) if *y == 0.0 => a,
            (Expr::Num(x), _) if *x == 0.0 => self.neg(b),
            _ => self.make(Expr::Sub(a, b)),
        }
    }

    pub fn mul(&mut self, a: E, b: E) -> E {
        match (&*a, &*b) {
            (Expr::Num(x), Expr::Num(y)) => self.num(x * y),
            (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => self.num(0.0),
            (Expr::Num(x), _) if *x == 1.0 => b,
            (_, Expr::Num(y)) if *y == 1.0 => a,
            (Expr::Num(x), _) if *x == -1.0 => self.neg(b),
            (_, Expr::Num(y)) if *y == -1.0 => self.neg(a),
            _ => self.make(Expr::Mul(a, b)),
        }
    }

    pub fn div(&mut self, a: E, b: E) -> E {
        match (&*a, &*b) {
            (Expr::Num(x), Expr::Num(y)) if *y != 0.0 => self.num(x / y),
            (Expr::Num(x), _) if *x == 0.0 => self.num(0.0),
            (_, Expr::Num(y)) if *y == 1.0 => a,
            _ => self.make(Expr::Div(a, b)),
        }
    }

    pub fn pow(&mut self, a: E, r: Rational) -> E {
        if r.num == 0 {
            return self.num(1.0);
        }
        if r == Rational::int(1) {
            return a;
        }
        match &*a {
            Expr::Num(x) if *x > 0.0 || (r.is_integer() && *x != 0.0) => self.num(x.powf(r.value())),
            _ => self.make(Expr::Pow(a, r)),
        }
    }

    pub fn powe(&mut self, a: E, g: E) -> E {
        match g.const_rational() {
            Some(r) => self.pow(a, r),
            None => self.make(Expr::PowE(a, g)),
        }
    }

    pub fn call(&mut self, f: Func, a: E) -> E {
        if let Expr::Num(x) = *a {
            let folded = match f {
                Func::Exp => Some(x.exp()),
                Func::Sin => Some(x.sin()),
                Func::Cos => Some(x.cos()),
                Func::Log if x > 0.0 => Some(x.ln()),
                Func::Sqrt if x >= 0.0 => Some(x.sqrt()),
                _ => None,
            };
            if let Some(v) = folded {
                return self.num(v);
            }
        }
        self.make(Expr::Call(f, a))
    }

    /// Re-simplify an interned tree bottom-up.
    pub fn simplify(&mut self, e: &E) -> E {
        let e = self.intern(e);
        match &*e {
            Expr::Num(_) | Expr::Imag | Expr::Var(_) => e.clone(),
            Expr::Neg(a) => {
                let a = self.simplify(a);
                self.neg(a)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::PowE(a, b) => {
                let (a, b) = (self.simplify(a), self.simplify(b));
                match &*e {
                    Expr::Add(..) => self.add(a, b),
                    Expr::Sub(..) => self.sub(a, b),
                    Expr::Mul(..) => self.mul(a, b),
                    Expr::Div(..) => self.div(a, b),
                    _ => self.powe(a, b),
                }
            }
            Expr::Pow(a, r) => {
                let a = self.simplify(a);
                self.pow(a, *r)
            }
            Expr::Call(f, a) => {
                let a = self.simplify(a);
                self.call(*f, a)
            }
        }
    }

    /// `∂e/∂v`, memoized per interned node.
    pub fn diff(&mut self, e: &E, v: Var) -> E {
        let e = self.intern(e);
        if let Some(d) = self.derivs.get(&(id(&e), v)) {
            return d.clone();
        }
        let d = match &*e {
            Expr::Num(_) | Expr::Imag => self.num(0.0),
            Expr::Var(w) => self.num(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => {
                let da = self.diff(a, v);
                self.neg(da)
            }
            Expr::Add(a, b) => {
                let (da, db) = (self.diff(a, v), self.diff(b, v));
                self.add(da, db)
            }
            Expr::Sub(a, b) => {
                let (da, db) = (self.diff(a, v), self.diff(b, v));
                self.sub(da, db)
            }
            Expr::Mul(a, b) => {
                let (da, db) = (self.diff(a, v), self.diff(b, v));
                let l = self.mul(da, b.clone());
                let r = self.mul(a.clone(), db);
                self.add(l, r)
            }
            Expr::Div(a, b) => {
                // (a' - (a/b)·b')/b keeps the denominator from squaring at each order
                let (da, db) = (self.diff(a, v), self.diff(b, v));
                let qdb = self.mul(e.clone(), db);
                let num = self.sub(da, qdb);
                self.div(num, b.clone())
            }
            Expr::Pow(a, r) => {
                let da = self.diff(a, v);
                let c = self.num(r.value());
                let lower = self.pow(a.clone(), r.add(Rational::int(-1)).expect("exponent overflow"));
                let f = self.mul(c, lower);
                self.mul(f, da)
            }
            Expr::PowE(f, g) => {
                let (df, dg) = (self.diff(f, v), self.diff(g, v));
                let lf = self.call(Func::Log, f.clone());
                let t1 = self.mul(dg, lf);
                let gdf = self.mul(g.clone(), df);
                let t2 = self.div(gdf, f.clone());
                let s = self.add(t1, t2);
                self.mul(e.clone(), s)
            }
            Expr::Call(func, a) => {
                let da = self.diff(a, v);
                let outer = match func {
                    Func::Exp => e.clone(),
                    Func::Sin => self.call(Func::Cos, a.clone()),
                    Func::Cos => {
                        let s = self.call(Func::Sin, a.clone());
                        self.neg(s)
                    }
                    Func::Log => {
                        let one = self.num(1.0);
                        self.div(one, a.clone())
                    }
                    Func::Sqrt => {
                        let half = self.num(0.5);
                        self.div(half, e.clone())
                    }
                    Func::Bump(k) => self.call(Func::Bump(k + 1), a.clone()),
                    Func::Gauss(k) => self.call(Func::Gauss(k + 1), a.clone()),
                };
                self.mul(outer, da)
            }
        };
        self.derivs.insert((id(&e), v), d.clone());
        d
    }
}

/// `∂e/∂v` of a single expression with a fresh builder.
pub fn differentiate(e: &E, v: Var) -> E {
    let mut b = Builder::new();
    let s = b.simplify(e);
    b.diff(&s, v)
}

#[cfg(test)]
mod tests {
    use super::super::parse::{parse, print};
    use super::*;

    fn d(src: &str) -> String {
        print(&differentiate(&parse(src).unwrap(), Var::X(0)))
    }

    #[test]
    fn textbook_rules() {
        assert_eq!(d("x1^2"), "2*x1");
        assert_eq!(d("bump(x1/eps)"), "bump_1(x1/eps)*(1/eps)");
        assert_eq!(d("gauss(x1)"), "gauss_1(x1)");
        assert_eq!(d("3"), "0");
        assert_eq!(d("eps^2"), "0");
        assert_eq!(d("sin(2*x1)"), "cos(2*x1)*2");
        assert_eq!(d("exp(x1)"), "exp(x1)");
        assert_eq!(d("log(x1)"), "1/x1");
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let mut b = Builder::new();
        let e1 = b.intern(&parse("sin(x1)*sin(x1)").unwrap());
        if let Expr::Mul(l, r) = &*e1 {
            assert!(Arc::ptr_eq(l, r));
        } else {
            panic!("expected product");
        }
        let e2 = b.intern(&parse("sin(x1)*sin(x1)").unwrap());
        assert!(Arc::ptr_eq(&e1, &e2));
    }

    #[test]
    fn mixed_partials_structurally_equal() {
        // Products are not reordered, so only these coincide structurally; the
        // numeric check of mixed partials lives in the family tests.
        for src in ["x1*x2", "x1^2*x2^3 + x2", "sin(x1)*cos(x2)"] {
            let mut b = Builder::new();
            let e = b.simplify(&parse(src).unwrap());
            let d1 = b.diff(&e, Var::X(0));
            let xy = b.diff(&d1, Var::X(1));
            let d2 = b.diff(&e, Var::X(1));
            let yx = b.diff(&d2, Var::X(0));
            let (xy, yx) = (b.simplify(&xy), b.simplify(&yx));
            assert!(Arc::ptr_eq(&xy, &yx), "{src}: {} vs {}", print(&xy), print(&yx));
        }
    }
}
