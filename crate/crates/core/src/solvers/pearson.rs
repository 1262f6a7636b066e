use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::heckman::AugmentedDesign;
use crate::linalg::{column_means, least_squares};
use crate::model::{FittedModel, Multiplier, Notion};

use super::{
    dual_ascent, fair_method, Constraint, DualConfig, DualTrace, LeastSquaresLoss,
    QuadraticConstraint, QuadraticForm,
};

/// Features with their linear dependence on the centered attribute removed.
#[derive(Debug, Clone, PartialEq)]
pub struct DecorrelatedDesign {
    pub a_center: f64,
    /// `a − ā`.
    pub a_c: DVector<f64>,
    /// Per-column slope of the features on `a − ā`.
    pub b_hat: DVector<f64>,
    /// `X − (a − ā)·b̂ᵀ`.
    pub u: DMatrix<f64>,
    pub var_a: f64,
    /// Covariance of the rows of `u`.
    pub v_u: DMatrix<f64>,
}

pub fn decorrelate(x: &DMatrix<f64>, a: &DVector<f64>) -> Result<DecorrelatedDesign> {
    let m = a.len();
    if x.nrows() != m {
        return Err(Error::ShapeMismatch {
            what: "decorrelation attribute".into(),
            expected: x.nrows(),
            found: m,
        });
    }
    let a_center = a.mean();
    let a_c = a.add_scalar(-a_center);
    let saa = a_c.norm_squared();
    if !(saa > 1e-300) {
        return Err(Error::ZeroVariance("sensitive attribute"));
    }
    let b_hat = x.transpose() * &a_c / saa;
    let u = x - &a_c * b_hat.transpose();
    let mut centered = u.clone();
    let means = column_means(&u);
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let v_u = centered.transpose() * &centered / m as f64;
    Ok(DecorrelatedDesign {
        a_center,
        a_c,
        b_hat,
        u,
        var_a: saa / m as f64,
        v_u,
    })
}

/// `ρ(ŷ, a) = β_a·√Var(a) / √(β_a²·Var(a) + β_uᵀV_uβ_u)` for `ŷ = a·β_a + u·β_u`.
pub fn pearson_of_coeffs(beta_a: f64, beta_u: &DVector<f64>, var_a: f64, v_u: &DMatrix<f64>) -> Result<f64> {
    let var_pred = beta_a * beta_a * var_a + beta_u.dot(&(v_u * beta_u));
    if !(var_pred > 0.0) {
        return Err(Error::ZeroVariance("prediction"));
    }
    Ok((beta_a * var_a.sqrt() / var_pred.sqrt()).clamp(-1.0, 1.0))
}

/// Least squares on `ŷ = (a − ā)·β_a + U·β_u` subject to `ρ²(ŷ, a) ≤ ε`,
/// written as `(1 − ε)·Var(a)·β_a² − ε·β_uᵀV_uβ_u ≤ 0`.
///
/// The constraint is a single quadratic inequality and `β = 0` is strictly
/// feasible for `ε > 0`, so there is no duality gap and dual ascent recovers
/// the primal optimum. `ε = 0` forces `β_a = 0` and is solved directly.
pub fn solve_pearson(
    design: &AugmentedDesign,
    epsilon: f64,
    ridge: f64,
    config: &DualConfig,
) -> Result<(FittedModel, DualTrace)> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!("pearson bound must lie in [0, 1], got {epsilon}")));
    }
    let dd = decorrelate(&design.x, &design.a)?;
    let p = dd.u.ncols();
    let (theta, lambda, trace) = if epsilon == 0.0 {
        let beta_u = least_squares(&dd.u, &design.y, ridge)?;
        let theta = DVector::from_iterator(p + 1, std::iter::once(0.0).chain(beta_u.iter().copied()));
        let trace = DualTrace {
            converged: true,
            ..DualTrace::default()
        };
        (theta, f64::INFINITY, trace)
    } else {
        let mut z = DMatrix::zeros(dd.u.nrows(), p + 1);
        z.set_column(0, &dd.a_c);
        z.view_mut((0, 1), (dd.u.nrows(), p)).copy_from(&dd.u);
        let mut q = DMatrix::zeros(p + 1, p + 1);
        q[(0, 0)] = 2.0 * (1.0 - epsilon) * dd.var_a;
        q.view_mut((1, 1), (p, p)).copy_from(&(&dd.v_u * (-2.0 * epsilon)));
        let constraint = Constraint::inequality(QuadraticConstraint {
            name: Notion::Pearson.to_string(),
            form: QuadraticForm {
                q,
                l: DVector::zeros(p + 1),
                c: 0.0,
            },
        });
        let loss = LeastSquaresLoss {
            x: z,
            y: design.y.clone(),
            ridge,
        };
        let sol = dual_ascent(&loss, &[constraint], config)?;
        (sol.beta, sol.lambda[0], sol.trace)
    };
    let beta_u = theta.rows(1, p).into_owned();
    // Dual ascent stops within `tol` of the constraint. `a − ā` is orthogonal
    // to `U`, so clipping `β_a` into its feasible interval is the best exactly
    // feasible point for this `β_u`.
    let beta_a = if epsilon < 1.0 {
        let reach = (epsilon * beta_u.dot(&(&dd.v_u * &beta_u)) / ((1.0 - epsilon) * dd.var_a)).max(0.0).sqrt();
        theta[0].clamp(-reach, reach)
    } else {
        theta[0]
    };
    let multipliers = vec![Multiplier {
        constraint: Notion::Pearson.to_string(),
        value: lambda,
    }];
    let mut model = design.to_model(fair_method(design), &beta_u, None, multipliers);
    model.sensitive_coef = Some(beta_a - dd.b_hat.dot(&beta_u));
    model.sensitive_center = dd.a_center;
    Ok((model, trace))
}
