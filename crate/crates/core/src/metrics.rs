//! Fairness notions for regression: group mean and loss differences for a
//! binary attribute, (partial) correlations for a numeric one, statistical
//! parity of the prediction distribution and bounded group loss.
//!
//! All moments are sample moments with denominator `n`.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::heckman::predict;
use crate::linalg::{select_entries, select_rows};
use crate::model::{AttributeKind, Dataset, FittedModel, MetricsReport, Slice};

/// Default number of evenly spaced thresholds in `[0, 1]` for statistical parity.
pub const SP_GRID_POINTS: usize = 101;

const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedPredictions {
    pub y_hat: Vec<f64>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub kind: AttributeKind,
}

impl GroupedPredictions {
    pub fn new(y_hat: Vec<f64>, y: Vec<f64>, a: Vec<f64>, kind: AttributeKind) -> Result<Self> {
        for (what, len) in [("targets", y.len()), ("sensitive attribute", a.len())] {
            if len != y_hat.len() {
                return Err(Error::ShapeMismatch {
                    what: what.into(),
                    expected: y_hat.len(),
                    found: len,
                });
            }
        }
        if kind == AttributeKind::Binary {
            if let Some((row, &value)) = a.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
                return Err(Error::NonBinaryIndicator {
                    row,
                    column: "a".into(),
                    value,
                });
            }
        }
        Ok(GroupedPredictions { y_hat, y, a, kind })
    }

    pub fn len(&self) -> usize {
        self.y_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_hat.is_empty()
    }

    fn require(&self, kind: AttributeKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "metric needs a {kind:?} attribute, data has {:?}",
                self.kind
            )))
        }
    }

    /// Group means of `f(i)` for `a = 0` and `a = 1`.
    fn group_means(&self, f: impl Fn(usize) -> f64) -> Result<[f64; 2]> {
        self.require(AttributeKind::Binary)?;
        let mut sum = [0.0; 2];
        let mut count = [0usize; 2];
        for i in 0..self.len() {
            let g = usize::from(self.a[i] == 1.0);
            sum[g] += f(i);
            count[g] += 1;
        }
        for g in 0..2 {
            if count[g] == 0 {
                return Err(Error::EmptyGroup(g as u8));
            }
        }
        Ok([sum[0] / count[0] as f64, sum[1] / count[1] as f64])
    }

    fn squared_error(&self, i: usize) -> f64 {
        let e = self.y[i] - self.y_hat[i];
        e * e
    }
}

/// `E[ŷ | a = 0] − E[ŷ | a = 1]`.
pub fn mean_difference(gp: &GroupedPredictions) -> Result<f64> {
    let m = gp.group_means(|i| gp.y_hat[i])?;
    Ok(m[0] - m[1])
}

/// `E[(y − ŷ)² | a = 0] − E[(y − ŷ)² | a = 1]`.
pub fn msed(gp: &GroupedPredictions) -> Result<f64> {
    let m = gp.group_means(|i| gp.squared_error(i))?;
    Ok(m[0] - m[1])
}

/// Per-group mean squared error.
pub fn bounded_group_loss(gp: &GroupedPredictions) -> Result<BTreeMap<u8, f64>> {
    let m = gp.group_means(|i| gp.squared_error(i))?;
    Ok(BTreeMap::from([(0, m[0]), (1, m[1])]))
}

pub fn mse(gp: &GroupedPredictions) -> Result<f64> {
    if gp.is_empty() {
        return Err(Error::EmptySplit("predictions"));
    }
    Ok((0..gp.len()).map(|i| gp.squared_error(i)).sum::<f64>() / gp.len() as f64)
}

/// Sample Pearson correlation; `what` names the pair in the error.
pub fn correlation(x: &[f64], y: &[f64], what: &'static str) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&u, &v) in x.iter().zip(y) {
        let (du, dv) = (u - mx, v - my);
        sxy += du * dv;
        sxx += du * du;
        syy += dv * dv;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::ZeroVariance(what));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `ρ(ŷ, a)`.
pub fn pearson(gp: &GroupedPredictions) -> Result<f64> {
    gp.require(AttributeKind::Numeric)?;
    correlation(&gp.y_hat, &gp.a, "prediction, attribute")
}

/// `ρ_{ŷa·y} = (ρ_{ŷa} − ρ_{ŷy}·ρ_{ay}) / √((1 − ρ²_{ŷy})(1 − ρ²_{ay}))`.
pub fn partial_correlation(gp: &GroupedPredictions) -> Result<f64> {
    gp.require(AttributeKind::Numeric)?;
    partial_from_columns(&gp.y_hat, &gp.a, &gp.y)
}

pub(crate) fn partial_from_columns(y_hat: &[f64], a: &[f64], y: &[f64]) -> Result<f64> {
    let r_pa = correlation(y_hat, a, "prediction, attribute")?;
    let r_py = correlation(y_hat, y, "prediction, target")?;
    let r_ay = correlation(a, y, "attribute, target")?;
    if r_py.abs() >= 1.0 - DEGENERATE {
        return Err(Error::DegenerateConditioning("prediction, target"));
    }
    if r_ay.abs() >= 1.0 - DEGENERATE {
        return Err(Error::DegenerateConditioning("attribute, target"));
    }
    Ok((r_pa - r_py * r_ay) / ((1.0 - r_py * r_py).sqrt() * (1.0 - r_ay * r_ay).sqrt()))
}

/// `z` values `0, 1/(k−1), …, 1`.
pub fn default_sp_grid() -> Vec<f64> {
    let k = SP_GRID_POINTS;
    (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
}

/// `max_{a, z} |P[f ≥ z | A = a] − P[f ≥ z]|` over predictions min-max
/// rescaled to `[0, 1]`. Constant predictions rescale to 0.
pub fn statistical_parity(gp: &GroupedPredictions, z_grid: &[f64]) -> Result<f64> {
    gp.require(AttributeKind::Binary)?;
    if z_grid.is_empty() {
        return Err(Error::InvalidConfig("statistical parity grid is empty".into()));
    }
    let count = [
        gp.a.iter().filter(|&&v| v == 0.0).count(),
        gp.a.iter().filter(|&&v| v == 1.0).count(),
    ];
    for (g, &c) in count.iter().enumerate() {
        if c == 0 {
            return Err(Error::EmptyGroup(g as u8));
        }
    }
    let f = min_max(&gp.y_hat);
    let n = f.len() as f64;
    let mut worst: f64 = 0.0;
    for &z in z_grid {
        let mut above = [0usize; 2];
        for (&v, &a) in f.iter().zip(&gp.a) {
            if v >= z {
                above[usize::from(a == 1.0)] += 1;
            }
        }
        let overall = (above[0] + above[1]) as f64 / n;
        for g in 0..2 {
            worst = worst.max((above[g] as f64 / count[g] as f64 - overall).abs());
        }
    }
    Ok(worst)
}

fn min_max(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// MSE and every metric applicable to the attribute kind.
///
/// `TrainSelected` evaluates the selected rows with the in-sample prediction
/// (including the correction term for corrected models); `Test` evaluates
/// every row with the population prediction.
pub fn full_report(model: &FittedModel, dataset: &Dataset, slice: Slice) -> Result<MetricsReport> {
    let (y_hat, rows) = match slice {
        Slice::TrainSelected => {
            let rows = dataset.selected_rows();
            let x1 = select_rows(&dataset.x1, &rows);
            let x2 = select_rows(&dataset.x2, &rows);
            let a = select_entries(&dataset.a, &rows);
            (predict(model, &x2, Some(&a), Some(&x1))?, rows)
        }
        Slice::Test => (
            predict(model, &dataset.x2, Some(&dataset.a), None)?,
            (0..dataset.n()).collect(),
        ),
    };
    if rows.is_empty() {
        return Err(Error::EmptySplit("evaluation rows"));
    }
    let y = rows
        .iter()
        .map(|&i| dataset.y.get(i))
        .collect::<Result<Vec<_>>>()?;
    let a = rows.iter().map(|&i| dataset.a[i]).collect();
    let gp = GroupedPredictions::new(y_hat.iter().copied().collect(), y, a, dataset.attribute_kind)?;
    report_from(&gp, slice)
}

pub fn report_from(gp: &GroupedPredictions, slice: Slice) -> Result<MetricsReport> {
    let mut report = MetricsReport {
        slice,
        mse: mse(gp)?,
        md: None,
        msed: None,
        pearson: None,
        partial: None,
        sp_max_departure: None,
        bgl_per_group: None,
    };
    match gp.kind {
        AttributeKind::Binary => {
            report.md = Some(mean_difference(gp)?);
            report.msed = Some(msed(gp)?);
            report.sp_max_departure = Some(statistical_parity(gp, &default_sp_grid())?);
            report.bgl_per_group = Some(bounded_group_loss(gp)?);
        }
        AttributeKind::Numeric => {
            report.pearson = Some(pearson(gp)?);
            report.partial = Some(partial_correlation(gp)?);
        }
    }
    Ok(report)
}

/// Convenience wrapper for vectors.
pub fn grouped(y_hat: &DVector<f64>, y: &DVector<f64>, a: &DVector<f64>, kind: AttributeKind) -> Result<GroupedPredictions> {
    GroupedPredictions::new(
        y_hat.iter().copied().collect(),
        y.iter().copied().collect(),
        a.iter().copied().collect(),
        kind,
    )
}
