use crate::dsl::{FamilyError, FamilyRule, Feature};
use crate::ext::Ext;
use crate::scale::EpsGrid;
use std::sync::Arc;

/// Relative tolerance when matching ε against the branch table.
const MATCH_RTOL: f64 = 1e-12;

/// A family defined branchwise in ε: listed ε values carry their own rule,
/// every other ε gives the zero function.
pub struct PiecewiseFamily {
    dim: usize,
    /// `(ε, branch)`, sorted by ε.
    table: Vec<(f64, usize)>,
    branches: Vec<Arc<dyn FamilyRule>>,
    grids: Vec<EpsGrid>,
    singular: Vec<f64>,
}

impl PiecewiseFamily {
    pub fn new(
        dim: usize,
        branches: Vec<(f64, Arc<dyn FamilyRule>)>,
        grids: Vec<EpsGrid>,
        singular: Vec<f64>,
    ) -> PiecewiseFamily {
        let mut table: Vec<(f64, usize)> = branches.iter().enumerate().map(|(i, b)| (b.0, i)).collect();
        table.sort_by(|a, b| a.0.total_cmp(&b.0));
        PiecewiseFamily { dim, table, branches: branches.into_iter().map(|b| b.1).collect(), grids, singular }
    }

    /// Branch index for `ε`, if any.
    pub fn dispatch(&self, eps: f64) -> Option<usize> {
        let i = self.table.partition_point(|&(e, _)| e < eps * (1.0 - MATCH_RTOL));
        self.table
            .get(i)
            .filter(|&&(e, _)| (e - eps).abs() <= MATCH_RTOL * eps)
            .map(|&(_, b)| b)
    }

    fn branch(&self, eps: f64) -> Option<&Arc<dyn FamilyRule>> {
        self.dispatch(eps).map(|i| &self.branches[i])
    }
}

impl FamilyRule for PiecewiseFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        self.branches.iter().map(|b| b.max_order()).min().unwrap_or(usize::MAX)
    }

    fn deriv(&self, alpha: &[usize], eps: f64, x: &[f64]) -> Result<Ext, FamilyError> {
        match self.branch(eps) {
            Some(b) => b.deriv(alpha, eps, x),
            None => Ok(Ext::ZERO),
        }
    }

    fn deriv_offset(&self, alpha: &[usize], eps: f64, x: &[f64], dx: &[f64]) -> Result<Ext, FamilyError> {
        match self.branch(eps) {
            Some(b) => b.deriv_offset(alpha, eps, x, dx),
            None => Ok(Ext::ZERO),
        }
    }

    fn deriv_many(&self, alpha: &[usize], eps: f64, xs: &[f64]) -> Result<Vec<Ext>, FamilyError> {
        match self.branch(eps) {
            Some(b) => b.deriv_many(alpha, eps, xs),
            None => Ok(vec![Ext::ZERO; xs.len() / self.dim.max(1)]),
        }
    }

    fn support_hint(&self, eps: f64) -> Option<f64> {
        match self.branch(eps) {
            Some(b) => b.support_hint(eps),
            None => Some(0.0),
        }
    }

    fn features(&self, eps: f64) -> Vec<Feature> {
        self.branch(eps).map(|b| b.features(eps)).unwrap_or_default()
    }

    fn singular_points(&self) -> Vec<f64> {
        self.singular.clone()
    }

    fn grids(&self) -> Option<Vec<EpsGrid>> {
        (!self.grids.is_empty()).then(|| self.grids.clone())
    }
}
