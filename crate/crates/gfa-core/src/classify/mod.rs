//! Membership and regularity tests over a family and an ε-grid.
//!
//! Every quantified growth condition is reduced to fitted ε-exponents of
//! sups over regions, checked over finite ranges of `m`, `α`, `n`. Verdicts
//! hold up to the tested range, which every report records.

mod construct;
mod membership;
mod regularity;
mod sample;
#[cfg(test)]
mod laws;

pub use construct::{cutoff_glue, plateau_cutoff, taylor_companion, DegreeRule};
pub use membership::{
    test_invertible, test_moderate, test_negligible, test_schwartz, test_slowscale_support, test_tau,
};
pub use regularity::{
    ak_sequence, default_radii, test_classical_regular, test_compactum, test_convexity,
    test_pointstar_regular, test_pointwise_regular, test_sharp_regular, AkSequence, SharpReport,
};
pub use sample::{sup_on_region, Extremum, Region};

use crate::dsl::{Family, FamilyError};
use crate::scale::{fit_log_values, EpsGrid, ExponentFit, ScaleError};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("precondition unmet: {0}")]
    Precondition(String),
}

/// One row of a sup sweep, for CSV output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub region: String,
    pub alpha: String,
    pub m_or_k: f64,
    pub sup_logmag: f64,
    pub fit_slope: f64,
    pub residual: f64,
}

/// Structured verdict with deciding witnesses.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub test: String,
    pub verdict: Verdict,
    pub witnesses: BTreeMap<String, Value>,
    pub diagnostics: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sub_reports: Vec<Report>,
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
}

impl Report {
    pub fn new(test: &str, verdict: Verdict) -> Report {
        Report {
            test: test.into(),
            verdict,
            witnesses: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            sub_reports: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn witness(mut self, k: &str, v: Value) -> Report {
        self.witnesses.insert(k.into(), v);
        self
    }

    pub fn diag(mut self, k: &str, v: Value) -> Report {
        self.diagnostics.insert(k.into(), v);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// All sweep rows of this report and its sub-reports.
    pub fn all_rows(&self) -> Vec<SweepRow> {
        let mut out = self.rows.clone();
        for s in &self.sub_reports {
            out.extend(s.all_rows());
        }
        out
    }
}

/// JSON number, with infinities and NaN spelled out so output stays valid.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Test ranges and tolerances.
#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub m_max: usize,
    pub k_max: usize,
    pub n_max: usize,
    /// Largest spatial decay order `k` in the Schwartz test.
    pub decay_max: usize,
    /// Largest sharp-ball order searched by the G̃ test.
    pub sharp_n_max: usize,
    pub tol: f64,
    pub residual_tol: f64,
    pub points: usize,
    pub refine_rounds: usize,
    pub grid: EpsGrid,
}

impl Default for Params {
    fn default() -> Params {
        Params {
            m_max: 4,
            k_max: 8,
            n_max: 8,
            decay_max: 4,
            sharp_n_max: 6,
            tol: 0.1,
            residual_tol: 0.5,
            points: 4097,
            refine_rounds: 3,
            grid: EpsGrid::default(),
        }
    }
}

impl Params {
    pub fn to_json(&self) -> Value {
        json!({
            "m_max": self.m_max,
            "k_max": self.k_max,
            "n_max": self.n_max,
            "decay_max": self.decay_max,
            "sharp_n_max": self.sharp_n_max,
            "tol": self.tol,
            "residual_tol": self.residual_tol,
            "points": self.points,
            "refine_rounds": self.refine_rounds,
            "grid": nums(self.grid.values()),
            "tail": self.grid.tail_range().len(),
        })
    }
}

/// A log-magnitude series on one grid and its fit.
#[derive(Clone, Debug)]
pub struct Series {
    pub grid: EpsGrid,
    pub logs: Vec<f64>,
    pub fit: ExponentFit,
}

/// Fits over every ε-subsequence of a family; the exponent is the worst one.
#[derive(Clone, Debug)]
pub struct MultiFit {
    pub parts: Vec<Series>,
    pub worst: usize,
}

impl MultiFit {
    pub fn exponent(&self) -> f64 {
        self.parts[self.worst].fit.effective()
    }

    pub fn fit(&self) -> &ExponentFit {
        &self.parts[self.worst].fit
    }

    pub fn residual(&self) -> f64 {
        let f = self.fit();
        if f.effective().is_infinite() {
            0.0
        } else {
            f.max_residual
        }
    }

    /// Noisy fit whose tail bends downward (growth faster than any power).
    pub fn superpolynomial_growth(&self, p: &Params) -> bool {
        let f = self.fit();
        f.max_residual > p.residual_tol && f.late_slope < f.early_slope - p.residual_tol
    }

    /// Noisy fit whose tail bends upward (decay faster than any power).
    pub fn superpolynomial_decay(&self, p: &Params) -> bool {
        let f = self.fit();
        f.zero_run > 0 || (f.max_residual > p.residual_tol && f.late_slope > f.early_slope + p.residual_tol)
    }

    pub fn rows(&self, region: &str, alpha: &str, m_or_k: f64) -> Vec<SweepRow> {
        self.parts
            .iter()
            .flat_map(|s| {
                s.grid.values().iter().zip(&s.logs).map(move |(&eps, &l)| SweepRow {
                    eps,
                    region: region.into(),
                    alpha: alpha.into(),
                    m_or_k,
                    sup_logmag: l,
                    fit_slope: s.fit.effective(),
                    residual: s.fit.max_residual,
                })
            })
            .collect()
    }
}

/// The ε-grids a family is tested on.
pub fn family_grids(f: &Family, p: &Params) -> Vec<EpsGrid> {
    f.grids().unwrap_or_else(|| vec![p.grid.clone()])
}

/// Evaluate `g(ε)` (a log-magnitude) on every grid of the family and fit.
pub fn sweep(
    f: &Family,
    p: &Params,
    g: impl Fn(f64) -> Result<f64, ClassifyError> + Sync,
) -> Result<MultiFit, ClassifyError> {
    sweep_on(&family_grids(f, p), g)
}

pub fn sweep_on(
    grids: &[EpsGrid],
    g: impl Fn(f64) -> Result<f64, ClassifyError> + Sync,
) -> Result<MultiFit, ClassifyError> {
    let mut parts = Vec::with_capacity(grids.len());
    for grid in grids {
        let logs = grid.values().par_iter().map(|&e| g(e)).collect::<Result<Vec<f64>, _>>()?;
        let fit = fit_log_values(grid, &logs)?;
        parts.push(Series { grid: grid.clone(), logs, fit });
    }
    let worst = (0..parts.len())
        .min_by(|&a, &b| parts[a].fit.effective().total_cmp(&parts[b].fit.effective()))
        .ok_or(ClassifyError::Scale(ScaleError::EmptyWindow))?;
    Ok(MultiFit { parts, worst })
}

/// Exponents `e_k` are bounded below uniformly in `k` when the top half of
/// the range does not sit lower than the bottom half.
pub fn uniform_in_k(e: &[f64], tol: f64) -> bool {
    if e.len() < 2 {
        return true;
    }
    let h = e.len() / 2;
    let lo = e[..h].iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e[h..].iter().copied().fold(f64::INFINITY, f64::min);
    hi >= lo - tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_rule() {
        assert!(uniform_in_k(&[0.0, 0.0, -0.05, 0.0], 0.1));
        assert!(!uniform_in_k(&[-1.0, -2.0, -3.0, -4.0], 0.1));
        assert!(uniform_in_k(&[0.0, -1.0, f64::INFINITY, f64::INFINITY], 0.1));
    }

    #[test]
    fn json_numbers() {
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(num(1.5), json!(1.5));
    }
}
