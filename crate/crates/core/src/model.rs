//! Domain types shared across the crate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Binary,
    Numeric,
}

/// Target column with an explicit observation mask.
///
/// Values of unobserved rows are never handed out. The pipeline may keep
/// them privately (so a training split can be re-partitioned at a different
/// selection ratio), but equality and serialization only see observed rows.
#[derive(Debug, Clone)]
pub struct Targets {
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl Targets {
    pub fn from_options(values: &[Option<f64>]) -> Self {
        Targets {
            values: values.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            observed: values.iter().map(Option::is_some).collect(),
        }
    }

    pub fn fully_observed(values: Vec<f64>) -> Self {
        let observed = vec![true; values.len()];
        Targets { values, observed }
    }

    /// Masks the rows where `observed` is false but remembers their values.
    pub(crate) fn withheld(values: Vec<f64>, observed: Vec<bool>) -> Self {
        debug_assert_eq!(values.len(), observed.len());
        Targets { values, observed }
    }

    /// Same underlying values under a new mask. Fails if a row becomes
    /// observed whose value was never known.
    pub(crate) fn remask(&self, observed: Vec<bool>) -> Option<Self> {
        let known = observed
            .iter()
            .zip(&self.values)
            .all(|(&o, v)| !o || !v.is_nan());
        known.then(|| Targets {
            values: self.values.clone(),
            observed,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_observed(&self, row: usize) -> bool {
        self.observed[row]
    }

    pub fn mask(&self) -> &[bool] {
        &self.observed
    }

    pub fn get(&self, row: usize) -> Result<f64> {
        if self.observed[row] {
            Ok(self.values[row])
        } else {
            Err(Error::MaskedTarget(row))
        }
    }

    pub fn to_options(&self) -> Vec<Option<f64>> {
        self.observed
            .iter()
            .zip(&self.values)
            .map(|(&o, &v)| o.then_some(v))
            .collect()
    }

    /// `(row, value)` for every observed row.
    pub fn observed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.observed
            .iter()
            .zip(&self.values)
            .enumerate()
            .filter_map(|(i, (&o, &v))| o.then_some((i, v)))
    }
}

impl PartialEq for Targets {
    fn eq(&self, other: &Self) -> bool {
        self.observed == other.observed
            && self
                .observed()
                .zip(other.observed())
                .all(|((_, a), (_, b))| a.to_bits() == b.to_bits())
    }
}

/// Per-column affine transform applied to the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Selection features, `n × d1`.
    pub x1: DMatrix<f64>,
    /// Prediction features, `n × d2`; every column also appears in `x1`.
    pub x2: DMatrix<f64>,
    /// Sensitive attribute.
    pub a: DVector<f64>,
    pub y: Targets,
    /// Selection indicator, 1 when the target is observed.
    pub s: DVector<f64>,
    pub selection_columns: Vec<String>,
    pub prediction_columns: Vec<String>,
    pub attribute_kind: AttributeKind,
    /// Score of the biasing split rule (larger = more eligible for selection).
    pub selection_score: Option<Vec<f64>>,
    pub standardization: Option<Standardization>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x1.nrows()
    }

    pub fn selected_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.s[i] == 1.0).collect()
    }

    pub fn selected_count(&self) -> usize {
        self.s.iter().filter(|&&v| v == 1.0).count()
    }

    /// Position of every prediction column inside the selection layout.
    pub fn prediction_in_selection(&self) -> Result<Vec<usize>> {
        self.prediction_columns
            .iter()
            .map(|name| {
                self.selection_columns
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::NotASubset(name.clone()))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        validate(self)
    }
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            what: what.to_string(),
            expected,
            found,
        })
    }
}

fn check_finite(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if !x[(i, j)].is_finite() {
                return Err(Error::NonFiniteValue {
                    row: i,
                    column: names.get(j).cloned().unwrap_or_else(|| j.to_string()),
                });
            }
        }
    }
    Ok(())
}

/// Checks every structural invariant of a [`Dataset`].
pub fn validate(d: &Dataset) -> Result<()> {
    let n = d.x1.nrows();
    if n == 0 {
        return Err(Error::EmptySplit("dataset"));
    }
    check_len("x2 rows", n, d.x2.nrows())?;
    check_len("a length", n, d.a.len())?;
    check_len("y length", n, d.y.len())?;
    check_len("s length", n, d.s.len())?;
    check_len("selection column names", d.x1.ncols(), d.selection_columns.len())?;
    check_len("prediction column names", d.x2.ncols(), d.prediction_columns.len())?;
    if let Some(score) = &d.selection_score {
        check_len("selection score length", n, score.len())?;
    }
    d.prediction_in_selection()?;
    check_finite(&d.x1, &d.selection_columns)?;
    check_finite(&d.x2, &d.prediction_columns)?;
    for i in 0..n {
        let s = d.s[i];
        if s != 0.0 && s != 1.0 {
            return Err(Error::NonBinaryIndicator {
                row: i,
                column: "s".into(),
                value: s,
            });
        }
        let selected = s == 1.0;
        let has_target = d.y.is_observed(i);
        if selected != has_target {
            return Err(Error::MissingTargetOnSelected {
                row: i,
                selected,
                has_target,
            });
        }
        if has_target && !d.y.get(i)?.is_finite() {
            return Err(Error::NonFiniteValue {
                row: i,
                column: "y".into(),
            });
        }
        let a = d.a[i];
        if !a.is_finite() {
            return Err(Error::NonFiniteValue {
                row: i,
                column: "a".into(),
            });
        }
        if d.attribute_kind == AttributeKind::Binary && a != 0.0 && a != 1.0 {
            return Err(Error::NonBinaryIndicator {
                row: i,
                column: "a".into(),
                value: a,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    LR,
    Heckman,
    FairLR,
    FairLRStar,
}

impl Method {
    pub fn uses_correction(self) -> bool {
        matches!(self, Method::Heckman | Method::FairLRStar)
    }

    pub fn is_fair(self) -> bool {
        matches!(self, Method::FairLR | Method::FairLRStar)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::LR => "LR",
            Method::Heckman => "Heckman",
            Method::FairLR => "FairLR",
            Method::FairLRStar => "FairLRStar",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Notion {
    MD,
    MSED,
    Pearson,
    Partial,
}

impl fmt::Display for Notion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Notion::MD => "md",
            Notion::MSED => "msed",
            Notion::Pearson => "pearson",
            Notion::Partial => "partial",
        };
        f.write_str(s)
    }
}

impl FromStr for Notion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" => Ok(Notion::MD),
            "msed" => Ok(Notion::MSED),
            "pearson" => Ok(Notion::Pearson),
            "partial" => Ok(Notion::Partial),
            other => Err(Error::InvalidConfig(format!("unknown fairness notion `{other}`"))),
        }
    }
}

/// Equality (`notion = 0`) or threshold form of a constraint.
///
/// For MD and MSED the threshold bounds the absolute value; for Pearson and
/// Partial it bounds the squared correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintForm {
    Equality,
    Threshold(f64),
}

impl FromStr for ConstraintForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "eq" {
            return Ok(ConstraintForm::Equality);
        }
        let value = s
            .strip_prefix("thresh:")
            .ok_or_else(|| Error::InvalidConfig(format!("constraint form `{s}`: expected eq or thresh:<v>")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("threshold `{value}` is not a number")))?;
        let form = ConstraintForm::Threshold(v);
        form.check()?;
        Ok(form)
    }
}

impl ConstraintForm {
    fn check(&self) -> Result<()> {
        match *self {
            ConstraintForm::Threshold(v) if !(v >= 0.0 && v.is_finite()) => Err(
                Error::InvalidConfig(format!("threshold must be finite and nonnegative, got {v}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessConstraint {
    pub notion: Notion,
    pub form: ConstraintForm,
}

impl FairnessConstraint {
    pub fn new(notion: Notion, form: ConstraintForm) -> Result<Self> {
        form.check()?;
        if let (Notion::Pearson | Notion::Partial, ConstraintForm::Threshold(e)) = (notion, form) {
            if e > 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "squared-correlation bound must lie in [0, 1], got {e}"
                )));
            }
        }
        Ok(FairnessConstraint { notion, form })
    }

    pub fn equality(notion: Notion) -> Self {
        FairnessConstraint {
            notion,
            form: ConstraintForm::Equality,
        }
    }

    /// Threshold value, with equality read as a zero bound.
    pub fn bound(&self) -> f64 {
        match self.form {
            ConstraintForm::Equality => 0.0,
            ConstraintForm::Threshold(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub constraint: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub method: Method,
    /// Coefficients over `layout`.
    pub beta: Vec<f64>,
    /// Coefficient of the inverse Mills ratio column (estimates `ρσ_ε`).
    pub beta_alpha: Option<f64>,
    pub gamma: Option<Vec<f64>>,
    /// Coefficient on the centered sensitive attribute, present for models
    /// fitted on the decorrelated design.
    #[serde(default)]
    pub sensitive_coef: Option<f64>,
    #[serde(default)]
    pub sensitive_center: f64,
    pub constraint: Option<FairnessConstraint>,
    pub multipliers: Vec<Multiplier>,
    pub layout: Vec<String>,
}

impl FittedModel {
    pub fn validate(&self) -> Result<()> {
        check_len("model layout", self.beta.len(), self.layout.len())?;
        let corrected = self.method.uses_correction();
        if corrected != self.beta_alpha.is_some() || corrected != self.gamma.is_some() {
            return Err(Error::LayoutMismatch(format!(
                "method {} {} a bias-correction term",
                self.method,
                if corrected { "requires" } else { "must not carry" }
            )));
        }
        let all = self
            .beta
            .iter()
            .chain(self.beta_alpha.iter())
            .chain(self.gamma.iter().flatten())
            .chain(self.sensitive_coef.iter());
        for (i, v) in all.enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: i,
                    column: "coefficients".into(),
                });
            }
        }
        Ok(())
    }

    pub fn beta_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slice {
    TrainSelected,
    Test,
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slice::TrainSelected => "TrainSelected",
            Slice::Test => "Test",
        })
    }
}

/// MSE plus the fairness metrics applicable to the attribute kind.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub slice: Slice,
    pub mse: f64,
    pub md: Option<f64>,
    pub msed: Option<f64>,
    pub pearson: Option<f64>,
    pub partial: Option<f64>,
    pub sp_max_departure: Option<f64>,
    pub bgl_per_group: Option<BTreeMap<u8, f64>>,
}

impl MetricsReport {
    pub fn notion_value(&self, notion: Notion) -> Option<f64> {
        match notion {
            Notion::MD => self.md,
            Notion::MSED => self.msed,
            Notion::Pearson => self.pearson,
            Notion::Partial => self.partial,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FlatReport {
    slice: Slice,
    mse: f64,
    md: Option<f64>,
    msed: Option<f64>,
    pearson: Option<f64>,
    partial: Option<f64>,
    sp: Option<f64>,
    bgl_0: Option<f64>,
    bgl_1: Option<f64>,
}

impl Serialize for MetricsReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let bgl = |g: u8| self.bgl_per_group.as_ref().and_then(|m| m.get(&g).copied());
        FlatReport {
            slice: self.slice,
            mse: self.mse,
            md: self.md,
            msed: self.msed,
            pearson: self.pearson,
            partial: self.partial,
            sp: self.sp_max_departure,
            bgl_0: bgl(0),
            bgl_1: bgl(1),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MetricsReport {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let f = FlatReport::deserialize(deserializer)?;
        let mut bgl = BTreeMap::new();
        if let Some(v) = f.bgl_0 {
            bgl.insert(0, v);
        }
        if let Some(v) = f.bgl_1 {
            bgl.insert(1, v);
        }
        Ok(MetricsReport {
            slice: f.slice,
            mse: f.mse,
            md: f.md,
            msed: f.msed,
            pearson: f.pearson,
            partial: f.partial,
            sp_max_departure: f.sp,
            bgl_per_group: (!bgl.is_empty()).then_some(bgl),
        })
    }
}
