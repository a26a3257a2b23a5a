//! Grammar corpus for the family language and the finite-difference check
//! of symbolic derivatives.

use crate::dsl::{parse, print, Family};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// `(source, dim, probe interval per axis)`.
pub const DSL_CORPUS: [(&str, usize, (f64, f64)); 40] = [
    ("x1", 1, (-2.0, 2.0)),
    ("eps*x1", 1, (-2.0, 2.0)),
    ("3.5 + x1", 1, (-2.0, 2.0)),
    ("-x1", 1, (-2.0, 2.0)),
    ("x1 + 2*x1^2 - 3", 1, (-2.0, 2.0)),
    ("x1^3 - x1/eps", 1, (-2.0, 2.0)),
    ("x1^(1/2)", 1, (0.5, 2.0)),
    ("x1^-2", 1, (0.5, 2.0)),
    ("eps^-1*bump(x1/eps)", 1, (-0.5, 0.5)),
    ("bump(x1)*exp(i*x1/eps)", 1, (-1.2, 1.2)),
    ("bump(x1)*sin(x1/eps)", 1, (-1.2, 1.2)),
    ("gauss(x1 - 1/eps)", 1, (0.0, 6.0)),
    ("(1+x1^2)^(log(1+x1^2)/log(1/eps))", 1, (-2.0, 2.0)),
    ("exp(-x1^2/eps)", 1, (-2.0, 2.0)),
    ("cos(x1)*sin(2*x1)", 1, (-2.0, 2.0)),
    ("log(1 + x1^2)", 1, (-2.0, 2.0)),
    ("sqrt(1 + x1^2)", 1, (-2.0, 2.0)),
    ("1/(1 + x1^2)", 1, (-2.0, 2.0)),
    ("bump_2(x1)", 1, (-1.2, 1.2)),
    ("gauss_3(x1)", 1, (-2.0, 2.0)),
    ("x1*x2", 2, (-2.0, 2.0)),
    ("gauss(x1)*gauss(x2 - 1)", 2, (-2.0, 2.0)),
    ("exp(i*(x1 + x2)/eps)*bump(x1)*bump(x2)", 2, (-1.2, 1.2)),
    ("(x1 - x2)^2 + eps", 2, (-2.0, 2.0)),
    ("-(x1 + 1)^3", 1, (-2.0, 2.0)),
    ("eps^2*x1^4 - eps*x1^2", 1, (-2.0, 2.0)),
    ("sin(x1/eps)/(1 + x1^2)", 1, (-2.0, 2.0)),
    ("log(1/eps)*x1", 1, (-2.0, 2.0)),
    ("x1^2*exp(-x1)", 1, (-2.0, 2.0)),
    ("cos(sin(x1))", 1, (-2.0, 2.0)),
    ("exp(exp(-x1^2))", 1, (-2.0, 2.0)),
    ("bump(2*x1 - 1) + bump(2*x1 + 1)", 1, (-1.2, 1.2)),
    ("i*x1 + 1", 1, (-2.0, 2.0)),
    ("(x1 + i)^2", 1, (-2.0, 2.0)),
    ("eps^(1/3)*x1", 1, (-2.0, 2.0)),
    ("sqrt(eps)*gauss(x1*sqrt(eps))", 1, (-2.0, 2.0)),
    ("1 - x1 + x1^2/2 - x1^3/6", 1, (-2.0, 2.0)),
    ("x1/(eps + x1^2)", 1, (-2.0, 2.0)),
    ("gauss(x1)^3", 1, (-2.0, 2.0)),
    ("x1^2*x2 - x2^3/eps + cos(x1*x2)", 2, (-2.0, 2.0)),
];

/// Probe points per family in the derivative check.
pub const FD_PROBES: usize = 100;
/// Relative tolerance of the derivative check.
pub const FD_TOL: f64 = 1e-6;
/// ε used by the derivative check.
pub const FD_EPS: f64 = 0.3;
const FD_SEED: u64 = 0x6766_6164;

/// Whether `src` survives `parse → print → parse` with an identical tree and
/// printing is a fixed point.
pub fn round_trip(src: &str) -> Result<(), String> {
    let e = parse(src).map_err(|err| format!("{src}: {err}"))?;
    let printed = print(&e);
    let back = parse(&printed).map_err(|err| format!("{src} printed as {printed}: {err}"))?;
    if back != e {
        return Err(format!("{src}: reparse of {printed} differs"));
    }
    if print(&back) != printed {
        return Err(format!("{src}: printing is not idempotent"));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct FdResult {
    pub source: String,
    pub probes: usize,
    pub max_rel_error: f64,
}

/// Compares `∂_i ∂^α u` with a twice Richardson-extrapolated central difference of
/// the symbolic `∂^α u`, for every axis `i` and `|α| ≤ 2`, at `FD_PROBES`
/// seeded points. Errors are relative to `max(|∂_i ∂^α u(x)|, 10^{-3} M)`,
/// `M` the largest magnitude of that derivative over the probes.
pub fn fd_check(src: &str, dim: usize, interval: (f64, f64)) -> Result<FdResult, String> {
    let f = Family::parse("corpus", src, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(FD_SEED);
    let probes: Vec<Vec<f64>> =
        (0..FD_PROBES).map(|_| (0..dim).map(|_| rng.gen_range(interval.0..interval.1)).collect()).collect();
    let h = 2.5e-4 * (interval.1 - interval.0);
    let mut worst: f64 = 0.0;
    for base in lower_orders(dim) {
        for axis in 0..dim {
            let mut up = base.clone();
            up[axis] += 1;
            let value = |x: &[f64]| f.deriv(&base, FD_EPS, x).map(|v| v.to_c64()).map_err(|e| e.to_string());
            let mut pairs = Vec::with_capacity(FD_PROBES);
            for x in &probes {
                let sym = f.deriv(&up, FD_EPS, x).map_err(|e| e.to_string())?.to_c64();
                let d = |h: f64| -> Result<num_complex::Complex64, String> {
                    let (mut a, mut b) = (x.clone(), x.clone());
                    a[axis] += h;
                    b[axis] -= h;
                    Ok((value(&a)? - value(&b)?) / (2.0 * h))
                };
                let (d1, d2, d4) = (d(h)?, d(h / 2.0)?, d(h / 4.0)?);
                let (r1, r2) = ((d2 * 4.0 - d1) / 3.0, (d4 * 4.0 - d2) / 3.0);
                let fd = (r2 * 16.0 - r1) / 15.0;
                pairs.push((sym, fd));
            }
            let m = pairs.iter().map(|p| p.0.norm()).fold(0.0, f64::max);
            for (sym, fd) in pairs {
                let denom = sym.norm().max(1e-3 * m).max(f64::MIN_POSITIVE);
                worst = worst.max((sym - fd).norm() / denom);
            }
        }
    }
    Ok(FdResult { source: src.into(), probes: FD_PROBES, max_rel_error: worst })
}

/// Multi-indices of order 0, 1 and 2.
fn lower_orders(dim: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; dim]];
    for i in 0..dim {
        let mut a = vec![0; dim];
        a[i] = 1;
        out.push(a.clone());
        for j in i..dim {
            let mut b = a.clone();
            b[j] += 1;
            out.push(b);
        }
    }
    out
}
