//! Deterministic extremum search of `|∂^α u_ε|` over regions.
//!
//! Each region is sampled on a uniform grid, a geometric grid when it spans
//! many scales, and dense local grids around the family's features; the
//! best samples are then refined by local subdivision.

use super::{ClassifyError, Params};
use crate::dsl::Family;
use crate::points::GenPoint;

/// Regions of `ℝ^d`, parametrized by ε.
#[derive(Clone, Debug)]
pub enum Region {
    /// `|x| ≤ ε^{-m}`.
    Ball { m: f64 },
    /// `ε^{-m} ≤ |x| ≤ ε^{-m-1}`.
    Annulus { m: f64 },
    /// `|x - center| ≤ r`.
    Classical { center: Vec<f64>, r: f64 },
    /// `|x - x_ε| ≤ ε^n` around a generalized point.
    Sharp { center: GenPoint, n: f64 },
    /// `ε^{-1/m} ≤ |x| ≤ ε^{-cap_m}`, further cut at the support hint.
    Exterior { m: f64, cap_m: f64 },
    /// A fixed box `lo ≤ x ≤ hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Region {
    /// Short label used in CSV rows.
    pub fn label(&self) -> String {
        match self {
            Region::Ball { m } => format!("ball(m={m})"),
            Region::Annulus { m } => format!("annulus(m={m})"),
            Region::Classical { center, r } => format!("classical(x0={center:?},r={r:e})"),
            Region::Sharp { n, .. } => format!("sharp(n={n})"),
            Region::Exterior { m, cap_m } => format!("exterior(m={m},cap={cap_m})"),
            Region::Box { lo, hi } => format!("box({lo:?},{hi:?})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Sup,
    Inf,
}

/// Region resolved at one ε: offsets from `base_hi + base_lo`.
struct Geometry {
    base_hi: Vec<f64>,
    base_lo: Vec<f64>,
    /// Per-axis offset box.
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// One-dimensional pieces (two for annuli and exteriors).
    pieces: Vec<(f64, f64)>,
    /// Allowed norm range of the offset (d > 1 only).
    norm: Option<(f64, f64)>,
}

const LOCAL_POINTS: usize = 257;
const GEOMETRIC_PER_OCTAVE: f64 = 4.0;
const REFINE_TOP: usize = 8;
const REFINE_SPLIT: usize = 16;

fn resolve(f: &Family, eps: f64, region: &Region, mode: Extremum) -> Result<Option<Geometry>, ClassifyError> {
    let d = f.dim();
    let zero = vec![0.0; d];
    let hint = if mode == Extremum::Sup { f.support_hint(eps) } else { None };
    let sym = |r1: f64, r2: f64| -> Geometry {
        let pieces = if r1 <= 0.0 { vec![(-r2, r2)] } else { vec![(-r2, -r1), (r1, r2)] };
        Geometry {
            base_hi: zero.clone(),
            base_lo: zero.clone(),
            lo: vec![-r2; d],
            hi: vec![r2; d],
            pieces,
            norm: Some((r1, r2)),
        }
    };
    let clip = |r2: f64| hint.map_or(r2, |s| r2.min(s));
    Ok(match region {
        Region::Ball { m } => Some(sym(0.0, clip(eps.powf(-m)))),
        Region::Annulus { m } => {
            let (r1, r2) = (eps.powf(-m), clip(eps.powf(-m - 1.0)));
            (r2 >= r1).then(|| sym(r1, r2))
        }
        Region::Exterior { m, cap_m } => {
            if *m <= 0.0 {
                return Err(ClassifyError::EmptyRegion(format!("exterior with m = {m}")));
            }
            let (r1, r2) = (eps.powf(-1.0 / m), clip(eps.powf(-cap_m)));
            (r2 >= r1).then(|| sym(r1, r2))
        }
        Region::Classical { center, r } => {
            if !(*r > 0.0) || center.len() != d {
                return Err(ClassifyError::EmptyRegion(format!("classical ball r = {r}")));
            }
            let mut g = sym(0.0, *r);
            g.base_hi = center.clone();
            Some(g)
        }
        Region::Sharp { center, n } => {
            let (hi, lo) = center
                .value_at(eps)
                .ok_or_else(|| ClassifyError::EmptyRegion(format!("point undefined at eps = {eps:e}")))?;
            if hi.len() != d {
                return Err(ClassifyError::EmptyRegion("point dimension mismatch".into()));
            }
            let mut g = sym(0.0, eps.powf(*n));
            g.base_hi = hi;
            g.base_lo = lo;
            Some(g)
        }
        Region::Box { lo, hi } => {
            if lo.len() != d || hi.len() != d || lo.iter().zip(hi).any(|(a, b)| a > b) {
                return Err(ClassifyError::EmptyRegion(format!("box {lo:?}..{hi:?}")));
            }
            Some(Geometry {
                base_hi: zero.clone(),
                base_lo: zero.clone(),
                lo: lo.clone(),
                hi: hi.clone(),
                pieces: vec![(lo[0], hi[0])],
                norm: None,
            })
        }
    })
}

fn linspace(a: f64, b: f64, n: usize, out: &mut Vec<f64>) {
    if n == 1 || a == b {
        out.push(a);
        return;
    }
    let h = (b - a) / (n - 1) as f64;
    out.extend((0..n).map(|i| if i + 1 == n { b } else { a + i as f64 * h }));
}

/// Geometric points `±2^{j/4}` inside `[a, b]` when it spans many scales.
fn geometric(a: f64, b: f64, out: &mut Vec<f64>) {
    for (lo, hi, sign) in [(a.max(0.0), b, 1.0), ((-b).max(0.0), -a, -1.0)] {
        if hi <= 0.0 {
            continue;
        }
        let lo = lo.max(hi * 1e-12).max(2f64.powi(-10));
        if hi / lo < 64.0 {
            continue;
        }
        let (j0, j1) = (
            (lo.log2() * GEOMETRIC_PER_OCTAVE).ceil() as i64,
            (hi.log2() * GEOMETRIC_PER_OCTAVE).floor() as i64,
        );
        out.extend((j0..=j1).map(|j| sign * 2f64.powf(j as f64 / GEOMETRIC_PER_OCTAVE)));
    }
}

fn eval_logs(
    f: &Family,
    alpha: &[usize],
    eps: f64,
    g: &Geometry,
    weight: u32,
    offsets: &[f64],
) -> Result<Vec<f64>, ClassifyError> {
    let d = f.dim();
    let plain = g.base_hi.iter().chain(&g.base_lo).all(|&v| v == 0.0);
    let vals = if plain {
        f.deriv_many(alpha, eps, offsets)?
    } else {
        offsets
            .chunks(d)
            .map(|t| {
                let dx: Vec<f64> = g.base_lo.iter().zip(t).map(|(l, t)| l + t).collect();
                f.deriv_offset(alpha, eps, &g.base_hi, &dx)
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(vals
        .iter()
        .zip(offsets.chunks(d))
        .map(|(v, t)| {
            let l = v.log_abs();
            if weight == 0 || l == f64::NEG_INFINITY {
                return l;
            }
            let r2: f64 = t.iter().zip(g.base_hi.iter().zip(&g.base_lo)).map(|(t, (h, lo))| (h + lo + t).powi(2)).sum();
            l + weight as f64 * 0.5 * r2.ln()
        })
        .collect())
}

/// `log sup |∂^α u_ε|` over the region (`-inf` when it vanishes there).
pub fn sup_on_region(
    f: &Family,
    alpha: &[usize],
    eps: f64,
    region: &Region,
    p: &Params,
) -> Result<f64, ClassifyError> {
    extremum_on_region(f, alpha, eps, region, Extremum::Sup, 0, p)
}

/// `log` of the sup or inf of `|x|^weight · |∂^α u_ε(x)|` over the region.
pub fn extremum_on_region(
    f: &Family,
    alpha: &[usize],
    eps: f64,
    region: &Region,
    mode: Extremum,
    weight: u32,
    p: &Params,
) -> Result<f64, ClassifyError> {
    let geo = match resolve(f, eps, region, mode)? {
        Some(g) => g,
        None => return Ok(f64::NEG_INFINITY),
    };
    let key = format!(
        "{mode:?}|{alpha:?}|{eps:e}|{weight}|{}|{:?}|{:?}|{}|{}",
        region.label(),
        geo.base_hi,
        geo.base_lo,
        p.points,
        p.refine_rounds
    );
    f.try_memo(key, || search(f, alpha, eps, &geo, mode, weight, p))
}

fn better(mode: Extremum, a: f64, b: f64) -> bool {
    match mode {
        Extremum::Sup => a > b,
        Extremum::Inf => a < b,
    }
}

fn search(
    f: &Family,
    alpha: &[usize],
    eps: f64,
    g: &Geometry,
    mode: Extremum,
    weight: u32,
    p: &Params,
) -> Result<f64, ClassifyError> {
    if f.dim() == 1 {
        search_1d(f, alpha, eps, g, mode, weight, p)
    } else {
        search_nd(f, alpha, eps, g, mode, weight, p)
    }
}

fn search_1d(
    f: &Family,
    alpha: &[usize],
    eps: f64,
    g: &Geometry,
    mode: Extremum,
    weight: u32,
    p: &Params,
) -> Result<f64, ClassifyError> {
    let features = f.features(eps);
    let mut best = match mode {
        Extremum::Sup => f64::NEG_INFINITY,
        Extremum::Inf => f64::INFINITY,
    };
    let mut keep = |v: f64| {
        if better(mode, v, best) || (mode == Extremum::Inf && v == f64::NEG_INFINITY) {
            best = v;
        }
    };
    for &(a, b) in &g.pieces {
        let mut ts = Vec::with_capacity(p.points + 1024);
        linspace(a, b, p.points, &mut ts);
        geometric(a, b, &mut ts);
        if a <= 0.0 && 0.0 <= b {
            ts.push(0.0);
        }
        for v in scan(f, alpha, eps, g, ts, mode, weight, p)? {
            keep(v);
        }
        // Feature windows are rescanned in coordinates centred on the feature,
        // which resolves widths far below the spacing of doubles at the base.
        for ft in &features {
            let shift = (g.base_hi[0] - ft.center[0]) + g.base_lo[0];
            let w = 4.0 * ft.width;
            let (lo, hi) = ((a + shift).max(-w), (b + shift).min(w));
            if !(lo <= hi) {
                continue;
            }
            let local = Geometry {
                base_hi: ft.center.clone(),
                base_lo: vec![0.0],
                lo: vec![lo],
                hi: vec![hi],
                pieces: vec![(lo, hi)],
                norm: None,
            };
            let mut ts = Vec::with_capacity(LOCAL_POINTS + 1);
            linspace(lo, hi, LOCAL_POINTS, &mut ts);
            if lo <= 0.0 && 0.0 <= hi {
                ts.push(0.0);
            }
            for v in scan(f, alpha, eps, &local, ts, mode, weight, p)? {
                keep(v);
            }
        }
    }
    Ok(best)
}

/// Evaluates at the offsets `ts` and refines around the best local extrema.
#[allow(clippy::too_many_arguments)]
fn scan(
    f: &Family,
    alpha: &[usize],
    eps: f64,
    g: &Geometry,
    mut ts: Vec<f64>,
    mode: Extremum,
    weight: u32,
    p: &Params,
) -> Result<Vec<f64>, ClassifyError> {
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut vs = eval_logs(f, alpha, eps, g, weight, &ts)?;
    for _ in 0..p.refine_rounds {
        let score = |v: f64| if mode == Extremum::Sup { v } else { -v };
        let n = ts.len();
        let mut cand: Vec<usize> = (0..n)
            .filter(|&i| {
                let s = score(vs[i]);
                s.is_finite() && (i == 0 || s >= score(vs[i - 1])) && (i + 1 == n || s >= score(vs[i + 1]))
            })
            .collect();
        cand.sort_by(|&i, &j| score(vs[j]).total_cmp(&score(vs[i])).then(i.cmp(&j)));
        cand.truncate(REFINE_TOP);
        let mut new = Vec::new();
        for &i in &cand {
            let lo = if i > 0 { ts[i - 1] } else { ts[i] };
            let hi = if i + 1 < n { ts[i + 1] } else { ts[i] };
            if hi > lo {
                let h = (hi - lo) / REFINE_SPLIT as f64;
                new.extend((1..REFINE_SPLIT).map(|j| lo + j as f64 * h).filter(|&t| t != ts[i]));
            }
        }
        if new.is_empty() {
            break;
        }
        new.sort_by(f64::total_cmp);
        new.dedup();
        let nv = eval_logs(f, alpha, eps, g, weight, &new)?;
        let mut merged: Vec<(f64, f64)> = ts.into_iter().zip(vs).chain(new.into_iter().zip(nv)).collect();
        merged.sort_by(|x, y| x.0.total_cmp(&y.0));
        merged.dedup_by(|x, y| x.0 == y.0);
        (ts, vs) = merged.into_iter().unzip();
    }
    Ok(vs)
}

fn search_nd(
    f: &Family,
    alpha: &[usize],
    eps: f64,
    g: &Geometry,
    mode: Extremum,
    weight: u32,
    p: &Params,
) -> Result<f64, ClassifyError> {
    let d = f.dim();
    let mut n = ((p.points as f64).powf(1.0 / d as f64).round() as usize).max(17);
    if n % 2 == 0 {
        n += 1;
    }
    let inside = |t: &[f64]| -> bool {
        match g.norm {
            Some((r1, r2)) => {
                let r = t.iter().map(|v| v * v).sum::<f64>().sqrt();
                r >= r1 * (1.0 - 1e-12) && r <= r2 * (1.0 + 1e-12)
            }
            None => true,
        }
    };
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut v = Vec::new();
            linspace(g.lo[i], g.hi[i], n, &mut v);
            v
        })
        .collect();
    let mut pts: Vec<f64> = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let t: Vec<f64> = (0..d).map(|i| axes[i][idx[i]]).collect();
        if inside(&t) {
            pts.extend(&t);
        }
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    // points along each axis at geometric radii
    for i in 0..d {
        let mut radial = Vec::new();
        geometric(g.lo[i], g.hi[i], &mut radial);
        for r in radial {
            let mut t = vec![0.0; d];
            t[i] = r;
            if inside(&t) {
                pts.extend(&t);
            }
        }
    }
    if pts.is_empty() {
        return Err(ClassifyError::EmptyRegion("no sample points inside the region".into()));
    }
    let mut vs = eval_logs(f, alpha, eps, g, weight, &pts)?;
    let mut h: Vec<f64> = (0..d).map(|i| (g.hi[i] - g.lo[i]) / (n - 1).max(1) as f64).collect();
    for _ in 0..p.refine_rounds {
        let score = |v: f64| if mode == Extremum::Sup { v } else { -v };
        let mut order: Vec<usize> = (0..vs.len()).filter(|&i| score(vs[i]).is_finite()).collect();
        order.sort_by(|&i, &j| score(vs[j]).total_cmp(&score(vs[i])).then(i.cmp(&j)));
        order.truncate(4);
        let mut new = Vec::new();
        for &c in &order {
            let center: Vec<f64> = pts[c * d..(c + 1) * d].to_vec();
            let mut idx = vec![0usize; d];
            loop {
                let t: Vec<f64> = (0..d).map(|i| center[i] + (idx[i] as f64 - 2.0) * h[i] / 2.0).collect();
                if inside(&t) && t.iter().zip(g.lo.iter().zip(&g.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b) {
                    new.extend(t);
                }
                let mut k = 0;
                while k < d {
                    idx[k] += 1;
                    if idx[k] < 5 {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
        }
        if new.is_empty() {
            break;
        }
        let nv = eval_logs(f, alpha, eps, g, weight, &new)?;
        pts.extend(new);
        vs.extend(nv);
        h.iter_mut().for_each(|v| *v /= 2.0);
    }
    let init = if mode == Extremum::Sup { f64::NEG_INFINITY } else { f64::INFINITY };
    Ok(vs.into_iter().fold(init, |b, v| if better(mode, v, b) || (mode == Extremum::Inf && v == f64::NEG_INFINITY) { v } else { b }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(src: &str) -> Family {
        Family::parse("t", src, 1).unwrap()
    }

    #[test]
    fn mollifier_peak_is_found() {
        let f = fam("eps^-1 * bump(x1/eps)");
        let p = Params::default();
        for &eps in &[2f64.powi(-4), 2f64.powi(-20)] {
            let s = sup_on_region(&f, &[0], eps, &Region::Ball { m: 1.0 }, &p).unwrap();
            assert!((s - ((1.0 / eps).ln() - 1.0)).abs() < 1e-12);
            // |φ'| peaks away from 0; refinement must reach the true max
            let s1 = sup_on_region(&f, &[1], eps, &Region::Ball { m: 1.0 }, &p).unwrap();
            let fine = (1..200000)
                .map(|i| crate::dsl::kernel::bump(1, -1.0 + i as f64 * 1e-5).log_abs())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((s1 - (fine - 2.0 * eps.ln())).abs() < 1e-6, "eps={eps}");
        }
    }

    #[test]
    fn exterior_of_fixed_bump_is_zero() {
        let f = fam("bump(x1)");
        let p = Params::default();
        let s = sup_on_region(&f, &[0], 0.25, &Region::Exterior { m: 1.0, cap_m: 4.0 }, &p).unwrap();
        assert_eq!(s, f64::NEG_INFINITY);
    }

    #[test]
    fn log_power_ball_sup_between_bounds() {
        let f = fam("(1+x1^2)^(log(1+x1^2)/log(1/eps))");
        let p = Params::default();
        let eps = 2f64.powi(-8);
        let s = sup_on_region(&f, &[0], eps, &Region::Ball { m: 2.0 }, &p).unwrap();
        let l = (1.0 / eps).ln();
        assert!(s >= 16.0 * l && s <= 17.0 * l, "{}", s / l);
    }

    #[test]
    fn infimum_and_weights() {
        let p = Params::default();
        let f = fam("x1^2 + eps^2");
        let eps = 2f64.powi(-10);
        let s = extremum_on_region(&f, &[0], eps, &Region::Ball { m: 1.0 }, Extremum::Inf, 0, &p).unwrap();
        assert!((s - 2.0 * eps.ln()).abs() < 1e-12);
        let g = fam("gauss(x1)");
        // sup |x|·e^{-x²} = e^{-1/2}/√2
        let w = extremum_on_region(&g, &[0], eps, &Region::Ball { m: 1.0 }, Extremum::Sup, 1, &p).unwrap();
        assert!((w - (-0.5 - 0.5 * 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn two_dimensional_ball() {
        let f = Family::parse("t", "gauss(x1) * gauss(x2 - 1)", 2).unwrap();
        let p = Params::default();
        let s = sup_on_region(&f, &[0, 0], 0.1, &Region::Ball { m: 1.0 }, &p).unwrap();
        assert!(s.abs() < 1e-6);
    }
}
