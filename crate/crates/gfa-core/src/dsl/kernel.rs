//! The named kernels `bump` and `gauss` and their derivatives.
//!
//! `φ^{(k)}(t) = P_k(t) / (1-t²)^{2k} · φ(t)` with integer polynomials
//! `P_{k+1} = P_k'·(1-t²)² + P_k·(4kt(1-t²) - 2t)`, `P_0 = 1`.
//! Gaussian derivatives use `(d/dt)^k e^{-t²} = (-1)^k H_k(t) e^{-t²}`.

use crate::ext::Ext;
use std::sync::OnceLock;

/// Highest kernel derivative order with an exact polynomial table.
pub const KERNEL_ORDER_CAP: usize = 24;

fn table() -> &'static [Vec<i128>] {
    static TABLE: OnceLock<Vec<Vec<i128>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut polys: Vec<Vec<i128>> = vec![vec![1]];
        for k in 0..KERNEL_ORDER_CAP {
            match next_bump_poly(&polys[k], k as i128) {
                Some(p) => polys.push(p),
                None => break,
            }
        }
        polys
    })
}

/// Coefficients of `P_k`, lowest degree first.
pub fn bump_poly(k: usize) -> &'static [i128] {
    let t = table();
    assert!(k < t.len(), "bump derivative order {k} exceeds the exact table ({})", t.len() - 1);
    &t[k]
}

/// Number of orders available from [`bump_poly`].
pub fn bump_table_len() -> usize {
    table().len()
}

fn next_bump_poly(p: &[i128], k: i128) -> Option<Vec<i128>> {
    let deg = p.len() - 1;
    let mut out = vec![0i128; deg + 4];
    let mut add = |i: usize, v: i128| -> Option<()> {
        out[i] = out[i].checked_add(v)?;
        Some(())
    };
    // P' (1 - 2t² + t⁴)
    for (i, &c) in p.iter().enumerate().skip(1) {
        let d = c.checked_mul(i as i128)?;
        add(i - 1, d)?;
        add(i + 1, d.checked_mul(-2)?)?;
        add(i + 3, d)?;
    }
    // P (4kt - 4kt³ - 2t)
    for (i, &c) in p.iter().enumerate() {
        add(i + 1, c.checked_mul(4 * k - 2)?)?;
        add(i + 3, c.checked_mul(-4 * k)?)?;
    }
    while out.len() > 1 && *out.last().unwrap() == 0 {
        out.pop();
    }
    Some(out)
}

fn horner(coeffs: &[i128], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c as f64)
}

/// `φ^{(k)}(t)`, zero for `|t| ≥ 1`, evaluated in log space.
pub fn bump(k: usize, t: f64) -> Ext {
    if !(t.abs() < 1.0) {
        return Ext::ZERO;
    }
    let p = horner(bump_poly(k), t);
    if p == 0.0 {
        return Ext::ZERO;
    }
    let q = (1.0 - t) * (1.0 + t);
    Ext::signed_from_log(p.signum(), p.abs().ln() - 1.0 / q - 2.0 * k as f64 * q.ln())
}

/// `(d/dt)^k e^{-t²}`.
pub fn gauss(k: usize, t: f64) -> Ext {
    // Scaled Hermite recurrence keeps H_k(t) representable for huge t.
    let (mut h0, mut h1) = (Ext::ONE, Ext::real(2.0 * t));
    if k == 0 {
        h1 = h0;
    } else {
        for j in 1..k {
            let h2 = Ext::real(2.0 * t) * h1 - Ext::real(2.0 * j as f64) * h0;
            h0 = h1;
            h1 = h2;
        }
    }
    let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
    h1 * Ext::signed_from_log(sign, -t * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_polynomials() {
        assert_eq!(bump_poly(0), &[1]);
        assert_eq!(bump_poly(1), &[0, -2]);
        // φ'' = (6t⁴ - 2) / (1-t²)⁴ · φ
        assert_eq!(bump_poly(2), &[-2, 0, 0, 0, 6]);
        assert!(bump_table_len() > 16);
    }

    #[test]
    fn bump_values_and_support() {
        assert!((bump(0, 0.0).to_c64().re - (-1f64).exp()).abs() < 1e-16);
        assert!(bump(0, 1.0).is_zero() && bump(3, -2.0).is_zero());
        // φ''(0) = -2/e
        assert!((bump(2, 0.0).to_c64().re + 2.0 * (-1f64).exp()).abs() < 1e-15);
        assert!(bump(1, 0.0).is_zero());
        let near = bump(6, 0.99999);
        assert!(near.is_finite() && near.log_abs() < -40000.0);
    }

    fn fd(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for k in 0..12 {
            for &t in &[-0.7, -0.3, 0.1, 0.45, 0.6] {
                let num = fd(|s| bump(k, s).to_c64().re, t, 1e-4);
                let sym = bump(k + 1, t).to_c64().re;
                assert!((num - sym).abs() <= 1e-6 * sym.abs().max(1.0) * 10f64.powi(k as i32 / 3), "k={k} t={t}");
                let num = fd(|s| gauss(k, s).to_c64().re, t, 1e-4);
                let sym = gauss(k + 1, t).to_c64().re;
                assert!((num - sym).abs() <= 1e-7 * sym.abs().max(1.0) * 10f64.powi(k as i32 / 3), "k={k} t={t}");
            }
        }
    }

    #[test]
    fn gauss_far_tail_stays_finite() {
        let g = gauss(4, 1e12);
        assert!(g.is_finite());
        assert!((g.log_abs() - (-1e24 + (16.0 * 1e48f64).ln())).abs() / 1e24 < 1e-12);
        assert_eq!(gauss(0, 0.0).to_c64().re, 1.0);
    }
}
