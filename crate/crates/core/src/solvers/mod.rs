//! Fairness-constrained least squares on the (optionally IMR-augmented)
//! selected design.
//!
//! Mean difference and MSE difference equalities have closed forms up to a
//! scalar multiplier; correlation constraints and threshold forms go through
//! [`dual_ascent`].

mod dual;
mod md;
mod msed;
mod partial;
mod pearson;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::heckman::AugmentedDesign;
use crate::linalg::{select_entries, select_rows};
use crate::model::{ConstraintForm, FairnessConstraint, FittedModel, Method, Notion};

pub use dual::{
    dual_ascent, Constraint, ConstraintFn, ConstraintKind, DualConfig, DualIterate, DualSolution,
    DualTrace, LeastSquaresLoss, QuadraticConstraint, QuadraticForm, RejectedProbe, StepRule,
    FD_STEP,
};
pub use md::{md_form, solve_md_closed_form};
pub use msed::{msed_form, solve_msed, MsedFit, RootConfig};
pub use partial::{solve_partial, PartialCorrelationConstraint};
pub use pearson::{decorrelate, pearson_of_coeffs, solve_pearson, DecorrelatedDesign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub ridge: f64,
    pub root: RootConfig,
    pub dual: DualConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            ridge: 0.0,
            root: RootConfig::default(),
            dual: DualConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub model: FittedModel,
    pub trace: Option<DualTrace>,
}

/// FairLR* on an augmented design, FairLR on a plain one.
pub(crate) fn fair_method(design: &AugmentedDesign) -> Method {
    if design.is_augmented() {
        Method::FairLRStar
    } else {
        Method::FairLR
    }
}

/// Solves the constrained problem with the most specific solver available.
pub fn solve(
    design: &AugmentedDesign,
    constraint: &FairnessConstraint,
    config: &SolverConfig,
) -> Result<Solution> {
    let with_constraint = |mut model: FittedModel, trace| {
        model.constraint = Some(*constraint);
        Solution { model, trace }
    };
    match (constraint.notion, constraint.form) {
        (Notion::MD, ConstraintForm::Equality) => {
            Ok(with_constraint(solve_md_closed_form(design, config.ridge)?, None))
        }
        (Notion::MSED, ConstraintForm::Equality) => {
            let fit = solve_msed(design, config.ridge, &config.root)?;
            Ok(with_constraint(fit.model, None))
        }
        (Notion::MD | Notion::MSED, ConstraintForm::Threshold(tau)) => {
            let form = match constraint.notion {
                Notion::MD => md_form(design)?,
                _ => msed_form(design)?,
            };
            let name = constraint.notion.to_string();
            let constraints = [
                Constraint::inequality(QuadraticConstraint {
                    name: format!("{name}+"),
                    form: form.shifted(-tau),
                }),
                Constraint::inequality(QuadraticConstraint {
                    name: format!("{name}-"),
                    form: form.negated().shifted(-tau),
                }),
            ];
            let loss = LeastSquaresLoss {
                x: design.x.clone(),
                y: design.y.clone(),
                ridge: config.ridge,
            };
            let sol = dual_ascent(&loss, &constraints, &config.dual)?;
            let multipliers = constraints
                .iter()
                .zip(&sol.lambda)
                .map(|(c, &value)| crate::model::Multiplier {
                    constraint: c.function.name().to_string(),
                    value,
                })
                .collect();
            let model = design.to_model(fair_method(design), &sol.beta, None, multipliers);
            Ok(with_constraint(model, Some(sol.trace)))
        }
        (Notion::Pearson, form) => {
            let (model, trace) = solve_pearson(design, bound(form), config.ridge, &config.dual)?;
            Ok(with_constraint(model, Some(trace)))
        }
        (Notion::Partial, form) => {
            let (model, trace) = solve_partial(design, form, config.ridge, &config.dual)?;
            Ok(with_constraint(model, Some(trace)))
        }
    }
}

fn bound(form: ConstraintForm) -> f64 {
    match form {
        ConstraintForm::Equality => 0.0,
        ConstraintForm::Threshold(e) => e,
    }
}

/// Per-group second moments of the design, each scaled by `1/m_g`.
pub(crate) struct GroupMoments {
    pub mean: [DVector<f64>; 2],
    pub xtx: [DMatrix<f64>; 2],
    pub xty: [DVector<f64>; 2],
    pub yty: [f64; 2],
}

pub(crate) fn group_moments(design: &AugmentedDesign) -> Result<GroupMoments> {
    let (g0, g1) = design.binary_groups()?;
    let one = |rows: &[usize]| {
        let m = rows.len() as f64;
        let x = select_rows(&design.x, rows);
        let y = select_entries(&design.y, rows);
        let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / m));
        (
            mean,
            x.transpose() * &x / m,
            x.transpose() * &y / m,
            y.norm_squared() / m,
        )
    };
    let (m0, a0, b0, c0) = one(g0);
    let (m1, a1, b1, c1) = one(g1);
    Ok(GroupMoments {
        mean: [m0, m1],
        xtx: [a0, a1],
        xty: [b0, b1],
        yty: [c0, c1],
    })
}
