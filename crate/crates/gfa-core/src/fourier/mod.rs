//! Discrete spectra of one-dimensional families and the tests read off them.
//!
//! `û_ε(ξ) = ∫ u_ε(x) e^{-ixξ} dx` is approximated by the trapezoid rule on
//! `[-L, L]` evaluated with an FFT, which is spectrally accurate for smooth
//! families that are negligible at the window edge.

mod testfn;
mod verdicts;

pub use testfn::TestFunction;
pub use verdicts::{
    pairing, parseval_check, spectrum_at, test_gs_infinity, test_slowscale_spectrum,
    test_tempered_equality, test_tempered_equality_at, FourierParams, Pairing, SLOW_PANEL,
};

use crate::classify::ClassifyError;
use crate::dsl::{Family, FamilyError};
use crate::scale::ScaleError;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

pub const MAX_NPTS: usize = 1 << 22;
pub const MIN_NPTS: usize = 1 << 10;
/// Smallest ε the Fourier path accepts (`2^-18`).
pub const EPS_FLOOR: f64 = 1.0 / 262_144.0;
/// Largest tolerated share of spectral energy in the top sixteenth of the band.
pub const ALIAS_TOL: f64 = 1e-6;
/// Spectral values under this fraction of the peak are rounding noise.
pub const NOISE_REL: f64 = 1e-12;
const MAX_WINDOW: f64 = 2_097_152.0;
const CHUNK: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FourierError {
    #[error("the numerical Fourier path is one-dimensional, got d = {0}")]
    Dimension(usize),
    #[error("point count {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("budget exceeded: {npts} points on [-{l}, {l}] (cap {MAX_NPTS})")]
    Budget { npts: usize, l: f64 },
    #[error("aliasing at eps = {eps}: {ratio:.3e} of the energy sits near Nyquist")]
    Aliasing { eps: f64, ratio: f64 },
    #[error("eps = {0} is below the Fourier-path floor 2^-18")]
    EpsFloor(f64),
    #[error("non-finite sample at x = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// `û_ε` on the symmetric grid `ξ_k = kπ/L`, `|k| < Npts/2`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSample {
    pub eps: f64,
    pub l: f64,
    pub npts: usize,
    pub xi: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Max difference against the spectrum at twice the point count.
    pub accuracy: Option<f64>,
    /// Share of energy in the top sixteenth of the band.
    pub alias_ratio: f64,
    /// The unpaired bin `k = -Npts/2`, kept for inversion.
    pub edge: Complex64,
}

impl SpectrumSample {
    pub fn step(&self) -> f64 {
        PI / self.l
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.npts as f64 / (2.0 * self.l)
    }

    /// Frequency and modulus of the largest value.
    pub fn peak(&self) -> (f64, f64) {
        self.xi
            .iter()
            .zip(&self.values)
            .map(|(&x, v)| (x, v.norm()))
            .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a })
    }

    /// Nearest-bin value; `None` outside the resolved band.
    pub fn value_near(&self, xi: f64) -> Option<Complex64> {
        let k = (xi / self.step()).round();
        let half = (self.values.len() / 2) as f64;
        (k.abs() <= half).then(|| self.values[(k + half) as usize])
    }

    pub fn noise(&self) -> f64 {
        NOISE_REL * self.peak().1
    }
}

/// Weighted log-sup `log sup |ξ|^β |v(ξ)|` over `|ξ| ≥ from`, ignoring bins
/// at the noise level. `-inf` when nothing is left.
pub(crate) fn weighted_log_sup(xi: &[f64], values: &[Complex64], beta: u32, from: f64) -> f64 {
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let noise = NOISE_REL * peak;
    xi.iter()
        .zip(values)
        .filter(|(x, v)| x.abs() >= from && v.norm() > noise)
        .map(|(x, v)| beta as f64 * x.abs().ln() + v.norm().ln())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Samples `u_ε(x_j)` at `x_j = -L + j·2L/N`, `j = 0..=N`.
pub(crate) fn samples(f: &Family, eps: f64, l: f64, n: usize) -> Result<Vec<Complex64>, FourierError> {
    let h = 2.0 * l / n as f64;
    let starts: Vec<usize> = (0..=n).step_by(CHUNK).collect();
    let parts = starts
        .par_iter()
        .map(|&s| {
            let xs: Vec<f64> = (s..(s + CHUNK).min(n + 1)).map(|j| -l + j as f64 * h).collect();
            let vals = f.deriv_many(&[0], eps, &xs)?;
            xs.iter()
                .zip(vals)
                .map(|(&x, v)| {
                    let c = v.to_c64();
                    if c.re.is_finite() && c.im.is_finite() {
                        Ok(c)
                    } else {
                        Err(FourierError::NonFinite(x))
                    }
                })
                .collect::<Result<Vec<_>, FourierError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.concat())
}

/// Trapezoid transform of `N + 1` samples on `[-L, L]`; returns the `N` bins
/// `k = -N/2 .. N/2 - 1` at `ξ_k = kπ/L`.
pub(crate) fn transform(u: &[Complex64], l: f64) -> Vec<Complex64> {
    let n = u.len() - 1;
    let h = 2.0 * l / n as f64;
    let mut buf = u[..n].to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // e^{-i x_j ξ_k} = (-1)^k e^{-2πi jk/N}; the endpoint term completes the trapezoid.
    let corr = (u[n] - u[0]) * (h / 2.0);
    let half = (n / 2) as i64;
    (0..n as i64)
        .map(|i| {
            let k = i - half;
            let v = buf[k.rem_euclid(n as i64) as usize] * h + corr;
            if k % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Share of energy in bins with `|k| ≥ 7N/16`.
fn alias_ratio(bins: &[Complex64]) -> f64 {
    let n = bins.len();
    let half = (n / 2) as i64;
    let cut = (7 * n / 16) as i64;
    let (mut top, mut total) = (0.0, 0.0);
    for (i, v) in bins.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        if (i as i64 - half).abs() >= cut {
            top += e;
        }
    }
    if total > 0.0 {
        top / total
    } else {
        0.0
    }
}

fn check(f: &Family, eps: f64, npts: usize) -> Result<(), FourierError> {
    if f.dim() != 1 {
        return Err(FourierError::Dimension(f.dim()));
    }
    if !npts.is_power_of_two() || npts < 4 {
        return Err(FourierError::NotPowerOfTwo(npts));
    }
    if npts > MAX_NPTS {
        return Err(FourierError::Budget { npts, l: 0.0 });
    }
    if !(eps >= EPS_FLOOR) {
        return Err(FourierError::EpsFloor(eps));
    }
    Ok(())
}

/// Spectrum from `N + 1` samples, aliasing-checked, without the accuracy pass.
pub(crate) fn spectrum_from_samples(
    u: &[Complex64],
    eps: f64,
    l: f64,
) -> Result<SpectrumSample, FourierError> {
    let n = u.len() - 1;
    let bins = transform(u, l);
    let ratio = alias_ratio(&bins);
    if ratio > ALIAS_TOL {
        return Err(FourierError::Aliasing { eps, ratio });
    }
    let step = PI / l;
    let half = (n / 2) as i64;
    Ok(SpectrumSample {
        eps,
        l,
        npts: n,
        xi: (1 - half..half).map(|k| k as f64 * step).collect(),
        values: bins[1..].to_vec(),
        accuracy: None,
        alias_ratio: ratio,
        edge: bins[0],
    })
}

/// Spectrum of `u_ε` on `[-L, L]` with `npts` points. The accuracy is the max
/// difference against `2·npts` points, skipped when that would pass the cap.
pub fn dft_family(f: &Family, eps: f64, l: f64, npts: usize) -> Result<SpectrumSample, FourierError> {
    check(f, eps, npts)?;
    let mut s = spectrum_from_samples(&samples(f, eps, l, npts)?, eps, l)?;
    if 2 * npts <= MAX_NPTS {
        let fine = spectrum_from_samples(&samples(f, eps, l, 2 * npts)?, eps, l)?;
        // Same frequency step; the coarse band sits in the middle of the fine one.
        let off = npts / 2;
        let acc = s
            .values
            .iter()
            .zip(&fine.values[off..])
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        s.accuracy = Some(acc);
    }
    Ok(s)
}

/// Window and point count by the resolution policy: `L = max(support, 4)`
/// (or the probed extent when there is no support hint) and a step of at
/// most `1/(8r)`, `r` the probed `|u'|/|u|` ratio.
pub fn window(f: &Family, eps: f64) -> Result<(f64, usize), FourierError> {
    let l = radius(f, eps)?;
    let r = oscillation_rate(f, eps, l)?;
    let mut h = l / 256.0;
    if r > 0.0 {
        h = h.min(1.0 / (8.0 * r));
    }
    let want = ((2.0 * l / h).ceil() as usize).next_power_of_two().max(MIN_NPTS);
    // Past the cap the aliasing check decides whether the clamped grid is enough.
    if want > 4 * MAX_NPTS {
        return Err(FourierError::Budget { npts: want, l });
    }
    Ok((l, want.min(MAX_NPTS)))
}

/// Truncation radius: `max(support, 4)`, or the probed extent.
pub(crate) fn radius(f: &Family, eps: f64) -> Result<f64, FourierError> {
    if f.dim() != 1 {
        return Err(FourierError::Dimension(f.dim()));
    }
    match f.support_hint(eps) {
        Some(s) if s.is_finite() => Ok(s.max(4.0)),
        _ => extent(f, eps),
    }
}

fn probe_points(f: &Family, eps: f64, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect();
    for ft in f.features(eps) {
        for j in -32..=32 {
            let x = ft.center[0] + ft.width * j as f64 / 4.0;
            if x >= lo && x <= hi {
                xs.push(x);
            }
        }
    }
    xs
}

/// Smallest dyadic `L ≥ 4` outside of which `|u_ε|` is below `1e-16` of its max.
fn extent(f: &Family, eps: f64) -> Result<f64, FourierError> {
    let mut l = 4.0;
    loop {
        let xs = probe_points(f, eps, -2.0 * l, 2.0 * l, 4097);
        let vals = f.deriv_many(&[0], eps, &xs)?;
        let (mut inner, mut outer) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, v) in xs.iter().zip(&vals) {
            let lg = v.log_abs();
            if x.abs() <= l {
                inner = inner.max(lg);
            } else {
                outer = outer.max(lg);
            }
        }
        if outer == f64::NEG_INFINITY || outer < inner - 16.0 * std::f64::consts::LN_10 {
            return Ok(l);
        }
        l *= 2.0;
        if l > MAX_WINDOW {
            return Err(FourierError::Budget { npts: MAX_NPTS, l });
        }
    }
}

/// `max|u'| / max|u|` over a probe of the window.
fn oscillation_rate(f: &Family, eps: f64, l: f64) -> Result<f64, FourierError> {
    if f.max_order() == 0 {
        return Ok(0.0);
    }
    let xs = probe_points(f, eps, -l, l, 4097);
    let lmax = |a: &[usize]| -> Result<f64, FourierError> {
        Ok(f.deriv_many(a, eps, &xs)?.iter().map(|v| v.log_abs()).fold(f64::NEG_INFINITY, f64::max))
    };
    let (u, du) = (lmax(&[0])?, lmax(&[1])?);
    Ok(if u == f64::NEG_INFINITY || du == f64::NEG_INFINITY { 0.0 } else { (du - u).exp() })
}

/// Inverse transform of a spectrum back onto `x_j = -L + jh`, `j < N`.
pub fn inverse_dft(s: &SpectrumSample) -> (Vec<f64>, Vec<Complex64>) {
    let n = s.npts;
    let h = 2.0 * s.l / n as f64;
    let half = (n / 2) as i64;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let edge_sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
    buf[n / 2] = s.edge * (edge_sign / h);
    for (i, v) in s.values.iter().enumerate() {
        let k = i as i64 + 1 - half;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        buf[k.rem_euclid(n as i64) as usize] = v * (sign / h);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let xs = (0..n).map(|j| -s.l + j as f64 * h).collect();
    (xs, buf.into_iter().map(|v| v / n as f64).collect())
}
