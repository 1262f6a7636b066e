use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::heckman::AugmentedDesign;
use crate::metrics::{correlation, partial_from_columns};
use crate::model::{ConstraintForm, FittedModel, Multiplier, Notion};

use super::{
    dual_ascent, fair_method, Constraint, ConstraintFn, DualConfig, DualTrace, LeastSquaresLoss,
    QuadraticConstraint, QuadraticForm,
};

const DEGENERATE: f64 = 1e-12;

/// Partial correlation of `xβ` with `a` given `y`, evaluated through the
/// metric itself with finite-difference gradients: the signed value for an
/// equality, or its square minus `ε` for a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCorrelationConstraint {
    pub x: DMatrix<f64>,
    pub a: Vec<f64>,
    pub y: Vec<f64>,
    pub epsilon: f64,
    pub squared: bool,
}

impl ConstraintFn for PartialCorrelationConstraint {
    fn name(&self) -> &str {
        "partial"
    }

    fn value(&self, beta: &DVector<f64>) -> Result<f64> {
        let y_hat = &self.x * beta;
        let r = partial_from_columns(y_hat.as_slice(), &self.a, &self.y)?;
        Ok(if self.squared {
            r * r - self.epsilon
        } else {
            r
        })
    }
}

/// Removes the projection onto `[1, y]`.
fn residualize(v: &DVector<f64>, y_c: &DVector<f64>) -> DVector<f64> {
    let centered = v.add_scalar(-v.mean());
    let slope = centered.dot(y_c) / y_c.norm_squared();
    centered - y_c * slope
}

/// The partial correlation is the correlation of `Mxβ` and `Ma`, where `M`
/// removes the projection onto `[1, y]`. With `c = XᵀMa` and `S = XᵀMX`,
/// `ρ = cᵀβ / √(βᵀSβ · ‖Ma‖²)`, so
///
/// * `ρ = 0` is the linear constraint `cᵀβ / (m·sd(Ma)) = 0`, and
/// * `ρ² ≤ ε` is `((cᵀβ)²/‖Ma‖² − ε·βᵀSβ) / m ≤ 0`, i.e. the residual
///   prediction variance times `ρ² − ε`.
fn partial_form(design: &AugmentedDesign, epsilon: f64, squared: bool) -> Result<QuadraticForm> {
    let (a, y) = (&design.a, &design.y);
    correlation(a.as_slice(), y.as_slice(), "attribute, target").and_then(|r| {
        if r.abs() >= 1.0 - DEGENERATE {
            Err(Error::DegenerateConditioning("attribute, target"))
        } else {
            Ok(())
        }
    })?;
    let m = design.m() as f64;
    let y_c = y.add_scalar(-y.mean());
    let r_a = residualize(a, &y_c);
    let ra2 = r_a.norm_squared();
    let mx = DMatrix::from_columns(
        &design
            .x
            .column_iter()
            .map(|col| residualize(&col.into_owned(), &y_c))
            .collect::<Vec<_>>(),
    );
    let c = mx.transpose() * &r_a;
    let p = c.len();
    if squared {
        let s = mx.transpose() * &mx;
        Ok(QuadraticForm {
            q: (&c * c.transpose() / ra2 - s * epsilon) * (2.0 / m),
            l: DVector::zeros(p),
            c: 0.0,
        })
    } else {
        Ok(QuadraticForm::linear(c / (m * (ra2 / m).sqrt()), 0.0))
    }
}

/// Least squares on the design subject to a partial-correlation constraint.
pub fn solve_partial(
    design: &AugmentedDesign,
    form: ConstraintForm,
    ridge: f64,
    config: &DualConfig,
) -> Result<(FittedModel, DualTrace)> {
    let (epsilon, squared) = match form {
        ConstraintForm::Equality => (0.0, false),
        ConstraintForm::Threshold(e) if (0.0..=1.0).contains(&e) => (e, true),
        ConstraintForm::Threshold(e) => {
            return Err(Error::InvalidConfig(format!("partial bound must lie in [0, 1], got {e}")))
        }
    };
    let f = QuadraticConstraint {
        name: Notion::Partial.to_string(),
        form: partial_form(design, epsilon, squared)?,
    };
    let constraint = if squared {
        Constraint::inequality(f)
    } else {
        Constraint::equality(f)
    };
    let loss = LeastSquaresLoss {
        x: design.x.clone(),
        y: design.y.clone(),
        ridge,
    };
    let sol = dual_ascent(&loss, &[constraint], config)?;
    let value = sol.lambda.first().or(sol.upsilon.first()).copied().unwrap_or(0.0);
    let multipliers = vec![Multiplier {
        constraint: Notion::Partial.to_string(),
        value,
    }];
    let model = design.to_model(fair_method(design), &sol.beta, None, multipliers);
    Ok((model, sol.trace))
}
