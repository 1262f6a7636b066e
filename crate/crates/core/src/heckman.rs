//! Second stage of the two-step estimator: the IMR-augmented design, the
//! corrected and naive least-squares fits, and prediction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, select_entries, select_rows};
use crate::model::{AttributeKind, Dataset, FairnessConstraint, FittedModel, Method, Multiplier};
use crate::normal::inverse_mills;
use crate::probit::{fit_probit, imr_column, ProbitConfig, ProbitFit};

/// Name given to the inverse Mills ratio column.
pub const IMR_COLUMN: &str = "imr";

/// Selected rows of the prediction design, optionally augmented with the
/// inverse Mills ratio as the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDesign {
    /// `m × (d2 + 1)` with the IMR last, or `m × d2` for the plain design.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub a: DVector<f64>,
    /// Column names of `x`.
    pub layout: Vec<String>,
    /// Source row of every design row.
    pub rows: Vec<usize>,
    /// Design rows with `a = 0` and `a = 1`; binary attributes only.
    pub groups: Option<[Vec<usize>; 2]>,
    pub gamma: Option<DVector<f64>>,
}

impl AugmentedDesign {
    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_augmented(&self) -> bool {
        self.gamma.is_some()
    }

    /// Both binary groups, failing when either is empty.
    pub fn binary_groups(&self) -> Result<(&[usize], &[usize])> {
        let g = self
            .groups
            .as_ref()
            .ok_or(Error::InvalidConfig("group statistics need a binary attribute".into()))?;
        if g[0].is_empty() {
            return Err(Error::EmptyGroup(0));
        }
        if g[1].is_empty() {
            return Err(Error::EmptyGroup(1));
        }
        Ok((&g[0], &g[1]))
    }

    /// Wraps coefficients over this design into a model, splitting off the
    /// IMR coefficient when the design is augmented.
    pub fn to_model(
        &self,
        method: Method,
        coef: &DVector<f64>,
        constraint: Option<FairnessConstraint>,
        multipliers: Vec<Multiplier>,
    ) -> FittedModel {
        let d2 = if self.is_augmented() {
            coef.len() - 1
        } else {
            coef.len()
        };
        FittedModel {
            method,
            beta: coef.rows(0, d2).iter().copied().collect(),
            beta_alpha: self.is_augmented().then(|| coef[d2]),
            gamma: self.gamma.as_ref().map(|g| g.iter().copied().collect()),
            sensitive_coef: None,
            sensitive_center: 0.0,
            constraint,
            multipliers,
            layout: self.layout[..d2].to_vec(),
        }
    }
}

fn build(dataset: &Dataset, imr: Option<(&DVector<f64>, DVector<f64>)>) -> Result<AugmentedDesign> {
    let rows = dataset.selected_rows();
    if rows.is_empty() {
        return Err(Error::EmptySplit("selected rows"));
    }
    let y = rows
        .iter()
        .map(|&i| dataset.y.get(i))
        .collect::<Result<Vec<_>>>()?;
    let x2 = select_rows(&dataset.x2, &rows);
    let mut layout = dataset.prediction_columns.clone();
    let (x, gamma) = match imr {
        Some((gamma, alpha)) => {
            let d2 = x2.ncols();
            let x = x2.insert_column(d2, 0.0);
            let mut x = x;
            x.set_column(d2, &select_entries(&alpha, &rows));
            layout.push(IMR_COLUMN.to_string());
            (x, Some(gamma.clone()))
        }
        None => (x2, None),
    };
    let a = select_entries(&dataset.a, &rows);
    let groups = (dataset.attribute_kind == AttributeKind::Binary).then(|| {
        let mut g: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (k, &v) in a.iter().enumerate() {
            g[usize::from(v == 1.0)].push(k);
        }
        g
    });
    Ok(AugmentedDesign {
        x,
        y: DVector::from_vec(y),
        a,
        layout,
        rows,
        groups,
        gamma,
    })
}

/// Selected rows of `x2` with `α_i = φ(x1_i·γ̂)/Φ(x1_i·γ̂)` appended.
pub fn augment(dataset: &Dataset, probit: &ProbitFit) -> Result<AugmentedDesign> {
    if dataset.x1.ncols() != probit.gamma.len() {
        return Err(Error::LayoutMismatch(format!(
            "probit fitted on {} selection columns, dataset has {}",
            probit.gamma.len(),
            dataset.x1.ncols()
        )));
    }
    let alpha = imr_column(probit, &dataset.x1)?;
    build(dataset, Some((&probit.gamma, alpha)))
}

/// Selected rows of `x2` without correction.
pub fn plain_design(dataset: &Dataset) -> Result<AugmentedDesign> {
    build(dataset, None)
}

/// `argmin ‖xβ − y‖² + ridge·‖β‖²`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    least_squares(x, y, ridge)
}

pub fn fit_heckman(dataset: &Dataset, probit_config: &ProbitConfig, ridge: f64) -> Result<FittedModel> {
    dataset.validate()?;
    let probit = fit_probit(&dataset.x1, &dataset.s, probit_config)?;
    let design = augment(dataset, &probit)?;
    let coef = ols(&design.x, &design.y, ridge)?;
    Ok(design.to_model(Method::Heckman, &coef, None, Vec::new()))
}

pub fn fit_lr(dataset: &Dataset, ridge: f64) -> Result<FittedModel> {
    dataset.validate()?;
    let design = plain_design(dataset)?;
    let coef = ols(&design.x, &design.y, ridge)?;
    Ok(design.to_model(Method::LR, &coef, None, Vec::new()))
}

/// Predictions `x2·β`, plus `(a − ā)·β_a` for models that regress on the
/// sensitive attribute.
///
/// Passing `x1` requests the in-sample prediction conditional on selection,
/// which adds `α_i·β_α` for corrected models; population prediction leaves
/// it out.
pub fn predict(
    model: &FittedModel,
    x2: &DMatrix<f64>,
    a: Option<&DVector<f64>>,
    x1: Option<&DMatrix<f64>>,
) -> Result<DVector<f64>> {
    if x2.ncols() != model.beta.len() {
        return Err(Error::LayoutMismatch(format!(
            "model has {} prediction coefficients, x2 has {} columns",
            model.beta.len(),
            x2.ncols()
        )));
    }
    let mut y_hat = x2 * model.beta_vector();
    if let Some(coef) = model.sensitive_coef {
        let a = a.ok_or_else(|| {
            Error::LayoutMismatch("model uses the sensitive attribute but none was supplied".into())
        })?;
        if a.len() != x2.nrows() {
            return Err(Error::ShapeMismatch {
                what: "sensitive attribute".into(),
                expected: x2.nrows(),
                found: a.len(),
            });
        }
        y_hat += a.map(|v| (v - model.sensitive_center) * coef);
    }
    if let (Some(x1), Some(gamma), Some(beta_alpha)) = (x1, &model.gamma, model.beta_alpha) {
        if x1.ncols() != gamma.len() || x1.nrows() != x2.nrows() {
            return Err(Error::LayoutMismatch(format!(
                "selection features are {}x{}, expected {}x{}",
                x1.nrows(),
                x1.ncols(),
                x2.nrows(),
                gamma.len()
            )));
        }
        let t = x1 * DVector::from_column_slice(gamma);
        y_hat += t.map(|t| inverse_mills(t) * beta_alpha);
    }
    Ok(y_hat)
}
