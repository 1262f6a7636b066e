use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::heckman::{ols, AugmentedDesign};
use crate::linalg::least_squares;
use crate::model::{Multiplier, Notion};

use super::{fair_method, group_moments, QuadraticForm};

/// Training mean difference as the linear form `dᵀβ` with
/// `d = mean(x | a = 0) − mean(x | a = 1)`.
pub fn md_form(design: &AugmentedDesign) -> Result<QuadraticForm> {
    let g = group_moments(design)?;
    Ok(QuadraticForm::linear(&g.mean[0] - &g.mean[1], 0.0))
}

/// Least squares subject to `dᵀβ = 0`, solved on the null space of `dᵀ`:
/// `β = Zθ` with `Z` an orthonormal basis orthogonal to `d`, so the normal
/// equations are never formed. The multiplier satisfies
/// `Gβ = Xᵀy − λd` with `G = XᵀX + ridge·I`.
pub fn solve_md_closed_form(design: &AugmentedDesign, ridge: f64) -> Result<crate::model::FittedModel> {
    let d = md_form(design)?.l;
    let scale = design.x.amax().max(1.0);
    let (beta, lambda) = if d.amax() <= 1e-14 * scale {
        (ols(&design.x, &design.y, ridge)?, 0.0)
    } else {
        let z = null_basis(&d);
        let theta = least_squares(&(&design.x * &z), &design.y, ridge)?;
        let beta = z * theta;
        let resid = design.x.transpose() * (&design.y - &design.x * &beta) - &beta * ridge;
        let lambda = d.dot(&resid) / d.norm_squared();
        (beta, lambda)
    };
    let multipliers = vec![Multiplier {
        constraint: Notion::MD.to_string(),
        value: lambda,
    }];
    Ok(design.to_model(fair_method(design), &beta, None, multipliers))
}

/// Columns `1..p` of the Householder reflection mapping `e₀` onto `d`.
fn null_basis(d: &DVector<f64>) -> DMatrix<f64> {
    let p = d.len();
    let mut v = d / d.norm();
    v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
    let h = DMatrix::identity(p, p) - &v * v.transpose() * (2.0 / v.norm_squared());
    h.columns(1, p - 1).into_owned()
}
