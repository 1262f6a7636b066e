use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heckman::{ols, AugmentedDesign};
use crate::model::{FittedModel, Multiplier, Notion};

use super::{fair_method, group_moments, QuadraticForm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RootConfig {
    /// Largest half-width of the symmetric bracket `[−b, b]`; `b` doubles from 1.
    pub bracket_max: f64,
    /// Required `|MSED|` at the returned multiplier.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig {
            bracket_max: 65_536.0,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsedFit {
    pub model: FittedModel,
    pub lambda: f64,
    /// Training MSED at `lambda`.
    pub residual: f64,
    /// Multipliers at which the normal matrix was singular or indefinite.
    pub skipped: Vec<f64>,
}

/// Training MSED as a quadratic form in `β`.
pub fn msed_form(design: &AugmentedDesign) -> Result<QuadraticForm> {
    let g = group_moments(design)?;
    Ok(QuadraticForm {
        q: (&g.xtx[0] - &g.xtx[1]) * 2.0,
        l: (&g.xty[0] - &g.xty[1]) * -2.0,
        c: g.yty[0] - g.yty[1],
    })
}

struct Path<'a> {
    design: &'a AugmentedDesign,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    dg: DMatrix<f64>,
    dc: DVector<f64>,
    groups: [&'a [usize]; 2],
}

impl Path<'_> {
    /// `β(λ)`, or `None` when `XᵀX + λ(G0 − G1)` is not positive definite.
    fn beta(&self, lambda: f64) -> Option<DVector<f64>> {
        let a = &self.gram + &self.dg * lambda;
        let chol = a.cholesky()?;
        let b = chol.solve(&(&self.xty + &self.dc * lambda));
        b.iter().all(|v| v.is_finite()).then_some(b)
    }

    fn psi(&self, beta: &DVector<f64>) -> f64 {
        let r = &self.design.x * beta - &self.design.y;
        let mse = |rows: &[usize]| rows.iter().map(|&i| r[i] * r[i]).sum::<f64>() / rows.len() as f64;
        mse(self.groups[0]) - mse(self.groups[1])
    }
}

enum Probe {
    Value(f64),
    Singular,
}

/// Least squares subject to zero training MSED.
///
/// `β(λ) = (XᵀX + λ(G0 − G1))⁻¹(Xᵀy + λ(c0 − c1))` with `G_g = X_gᵀX_g/m_g`,
/// `c_g = X_gᵀy_g/m_g`. The residual `ψ(λ) = MSED(Xβ(λ))` is the derivative
/// of the concave dual, hence decreasing on the interval where the matrix is
/// positive definite; the root is bracketed and bisected there. Probes
/// outside that interval count as lying beyond the root.
pub fn solve_msed(design: &AugmentedDesign, ridge: f64, config: &RootConfig) -> Result<MsedFit> {
    let g = group_moments(design)?;
    let (g0, g1) = design.binary_groups()?;
    let p = design.x.ncols();
    let path = Path {
        design,
        gram: design.x.transpose() * &design.x + DMatrix::identity(p, p) * ridge,
        xty: design.x.transpose() * &design.y,
        dg: &g.xtx[0] - &g.xtx[1],
        dc: &g.xty[0] - &g.xty[1],
        groups: [g0, g1],
    };
    let mut skipped = Vec::new();
    let probe = |lambda: f64, skipped: &mut Vec<f64>| match path.beta(lambda) {
        Some(b) => Probe::Value(path.psi(&b)),
        None => {
            skipped.push(lambda);
            Probe::Singular
        }
    };
    // Positive when the root lies above `lambda`.
    let side = |probe: &Probe, lambda: f64| match probe {
        Probe::Value(v) => *v,
        Probe::Singular if lambda > 0.0 => f64::NEG_INFINITY,
        Probe::Singular => f64::INFINITY,
    };

    let beta0 = ols(&design.x, &design.y, ridge)?;
    let psi0 = path.psi(&beta0);
    let finish = |beta: DVector<f64>, lambda: f64, residual: f64, skipped: Vec<f64>| {
        let multipliers = vec![Multiplier {
            constraint: Notion::MSED.to_string(),
            value: lambda,
        }];
        MsedFit {
            model: design.to_model(fair_method(design), &beta, None, multipliers),
            lambda,
            residual,
            skipped,
        }
    };
    if psi0 == 0.0 {
        return Ok(finish(beta0, 0.0, 0.0, skipped));
    }

    let mut b = 1.0;
    let (mut lo, mut hi) = loop {
        let s_lo = side(&probe(-b, &mut skipped), -b);
        let s_hi = side(&probe(b, &mut skipped), b);
        if s_lo > 0.0 && s_hi < 0.0 {
            break if psi0 > 0.0 { (0.0, b) } else { (-b, 0.0) };
        }
        if b >= config.bracket_max {
            return Err(Error::NoBracket {
                lo: -b,
                hi: b,
                psi_lo: s_lo,
                psi_hi: s_hi,
            });
        }
        b *= 2.0;
    };

    for _ in 0..config.max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * mid.abs().max(1.0) {
            break;
        }
        let s = side(&probe(mid, &mut skipped), mid);
        if s > 0.0 {
            lo = mid;
        } else if s < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
            break;
        }
    }

    let candidates = [0.5 * (lo + hi), lo, hi];
    let mut best: Option<(f64, DVector<f64>, f64)> = None;
    for &lambda in &candidates {
        if let Some(beta) = path.beta(lambda) {
            let r = path.psi(&beta);
            if best.as_ref().is_none_or(|(_, _, br)| r.abs() < br.abs()) {
                best = Some((lambda, beta, r));
            }
        }
    }
    match best {
        Some((lambda, beta, r)) if r.abs() < config.tol => Ok(finish(beta, lambda, r, skipped)),
        Some((lambda, ..)) => Err(Error::SingularAtLambda(lambda)),
        None => Err(Error::SingularAtLambda(candidates[0])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{grouped, msed};
    use crate::model::AttributeKind;
    use crate::solvers::fixtures::binary_design;

    fn coef(model: &FittedModel) -> DVector<f64> {
        let mut v = model.beta.clone();
        v.extend(model.beta_alpha);
        DVector::from_vec(v)
    }

    #[test]
    fn symmetric_groups_need_no_multiplier() {
        let mut design = binary_design(31, 8, 2);
        for i in (0..8).step_by(2) {
            let row = design.x.row(i).into_owned();
            design.x.set_row(i + 1, &row);
            design.y[i + 1] = design.y[i];
        }
        let fit = solve_msed(&design, 0.0, &RootConfig::default()).unwrap();
        assert_eq!(fit.lambda, 0.0);
        assert_eq!(coef(&fit.model), ols(&design.x, &design.y, 0.0).unwrap());
    }

    #[test]
    fn zero_multiplier_path_is_ols() {
        let design = binary_design(32, 10, 3);
        let g = group_moments(&design).unwrap();
        let path = Path {
            design: &design,
            gram: design.x.transpose() * &design.x,
            xty: design.x.transpose() * &design.y,
            dg: &g.xtx[0] - &g.xtx[1],
            dc: &g.xty[0] - &g.xty[1],
            groups: [&[], &[]],
        };
        let b = path.beta(0.0).unwrap();
        assert!((b - ols(&design.x, &design.y, 0.0).unwrap()).amax() < 1e-10);
    }

    /// Independent ψ from an explicit inverse of the unscaled group matrices.
    fn oracle_psi(design: &AugmentedDesign, lambda: f64) -> Option<f64> {
        let [g0, g1] = design.groups.clone().unwrap();
        let x = &design.x;
        let sub = |rows: &[usize]| {
            (
                crate::linalg::select_rows(x, rows),
                crate::linalg::select_entries(&design.y, rows),
            )
        };
        let ((x0, y0), (x1, y1)) = (sub(&g0), sub(&g1));
        let (m0, m1) = (g0.len() as f64, g1.len() as f64);
        let a = x.transpose() * x + x0.transpose() * &x0 * (lambda / m0) - x1.transpose() * &x1 * (lambda / m1);
        a.clone().cholesky()?;
        let rhs = x.transpose() * &design.y + x0.transpose() * &y0 * (lambda / m0) - x1.transpose() * &y1 * (lambda / m1);
        let beta = a.try_inverse()? * rhs;
        let e0 = (&x0 * &beta - y0).norm_squared() / m0;
        let e1 = (&x1 * &beta - y1).norm_squared() / m1;
        Some(e0 - e1)
    }

    fn oracle_root(design: &AugmentedDesign) -> f64 {
        // Scan for a sign change on a grid, then bisect to 1e-10.
        let step = 0.01;
        let psi0 = oracle_psi(design, 0.0).unwrap();
        let dir = psi0.signum();
        let mut lo = 0.0;
        let mut hi = loop {
            let next = lo + dir * step;
            match oracle_psi(design, next) {
                Some(v) if v.signum() == dir => lo = next,
                _ => break next,
            }
        };
        while (hi - lo).abs() > 1e-10 {
            let mid = 0.5 * (lo + hi);
            match oracle_psi(design, mid) {
                Some(v) if v.signum() == dir => lo = mid,
                _ => hi = mid,
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn root_matches_bisection_oracle() {
        let design = binary_design(33, 8, 2);
        let fit = solve_msed(&design, 0.0, &RootConfig::default()).unwrap();
        assert!((fit.lambda - oracle_root(&design)).abs() < 1e-6, "{}", fit.lambda);
        let y_hat = &design.x * coef(&fit.model);
        let gp = grouped(&y_hat, &design.y, &design.a, AttributeKind::Binary).unwrap();
        assert!(msed(&gp).unwrap().abs() < 1e-6);
    }

    #[test]
    fn form_matches_metric() {
        let design = binary_design(34, 12, 3);
        let beta = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let gp = grouped(&(&design.x * &beta), &design.y, &design.a, AttributeKind::Binary).unwrap();
        let form = msed_form(&design).unwrap();
        assert!((form.value(&beta) - msed(&gp).unwrap()).abs() < 1e-10);
    }
}
