//! Experiment runner: fits the four methods on one split, sweeps the
//! selection ratio, and writes the result tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, ingest, ratio_split, DatasetConfig, SyntheticConfig};
use crate::error::{Error, Result};
use crate::heckman::{augment, fit_heckman, fit_lr, plain_design};
use crate::metrics::full_report;
use crate::model::{AttributeKind, Dataset, FairnessConstraint, FittedModel, Method, MetricsReport, Notion, Slice};
use crate::probit::{fit_probit, ProbitConfig};
use crate::solvers::{solve, DualTrace, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Csv(DatasetConfig),
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DataSource,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub constraint: Option<FairnessConstraint>,
    #[serde(default)]
    pub ratio_sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub probit: ProbitConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.methods.is_empty() {
            return bad("no methods requested");
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return bad("methods must not repeat");
        }
        if self.methods.iter().any(|m| m.is_fair()) && self.constraint.is_none() {
            return bad("FairLR and FairLRStar need a constraint");
        }
        if let Some(c) = &self.constraint {
            FairnessConstraint::new(c.notion, c.form)?;
        }
        if let Some(rs) = &self.ratio_sweep {
            if rs.is_empty() || rs.iter().any(|&r| !(r > 0.0 && r < 0.9)) {
                return bad("ratio_sweep values must lie in (0, 0.9)");
            }
            if rs.windows(2).any(|w| w[0] >= w[1]) {
                return bad("ratio_sweep must be strictly increasing");
            }
        }
        match &self.dataset {
            DataSource::Csv(c) => c.validate(),
            DataSource::Synthetic(c) => c.validate(),
        }
    }

    /// Reads a JSON spec; relative CSV and output paths resolve against the
    /// spec's directory.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut spec: ExperimentSpec =
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            if let DataSource::Csv(c) = &mut spec.dataset {
                if c.csv_path.is_relative() {
                    c.csv_path = dir.join(&c.csv_path);
                }
            }
            if let Some(out) = spec.output_dir.as_mut().filter(|o| o.is_relative()) {
                *out = dir.join(&*out);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn seed(&self) -> u64 {
        match &self.dataset {
            DataSource::Csv(c) => c.seed,
            DataSource::Synthetic(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match &mut self.dataset {
            DataSource::Csv(c) => c.seed = seed,
            DataSource::Synthetic(c) => c.seed = seed,
        }
    }
}

/// Training and test splits of the spec's data source.
pub fn load(spec: &ExperimentSpec) -> Result<(Dataset, Dataset)> {
    match &spec.dataset {
        DataSource::Csv(c) => ingest(c).map(|s| (s.train, s.test)),
        DataSource::Synthetic(c) => generate_synthetic(c).map(|s| (s.train, s.test)),
    }
}

/// Fits one method on the training split.
pub fn fit_method(
    method: Method,
    train: &Dataset,
    constraint: Option<&FairnessConstraint>,
    solver: &SolverConfig,
    probit: &ProbitConfig,
) -> Result<(FittedModel, Option<DualTrace>)> {
    train.validate()?;
    let fair = |design| {
        let c = constraint.ok_or_else(|| Error::InvalidConfig(format!("{method} needs a constraint")))?;
        solve(&design, c, solver).map(|s| (s.model, s.trace))
    };
    match method {
        Method::LR => Ok((fit_lr(train, solver.ridge)?, None)),
        Method::Heckman => Ok((fit_heckman(train, probit, solver.ridge)?, None)),
        Method::FairLR => fair(plain_design(train)?),
        Method::FairLRStar => {
            let fit = fit_probit(&train.x1, &train.s, probit)?;
            fair(augment(train, &fit)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    #[serde(flatten)]
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub rows: Vec<ResultRow>,
    pub models: Vec<FittedModel>,
    pub traces: Vec<(Method, DualTrace)>,
}

/// Fits every requested method and reports both slices, in method order.
pub fn run_fit(spec: &ExperimentSpec) -> Result<FitOutput> {
    spec.validate()?;
    let (train, test) = load(spec)?;
    fit_split(spec, &train, &test)
}

pub fn fit_split(spec: &ExperimentSpec, train: &Dataset, test: &Dataset) -> Result<FitOutput> {
    let fitted = spec
        .methods
        .par_iter()
        .map(|&m| fit_method(m, train, spec.constraint.as_ref(), &spec.solver, &spec.probit))
        .collect::<Result<Vec<_>>>()?;
    let mut out = FitOutput {
        rows: Vec::new(),
        models: Vec::new(),
        traces: Vec::new(),
    };
    for (&method, (model, trace)) in spec.methods.iter().zip(fitted) {
        for (slice, data) in [(Slice::TrainSelected, train), (Slice::Test, test)] {
            out.rows.push(ResultRow {
                method,
                report: full_report(&model, data, slice)?,
            });
        }
        if let Some(t) = trace {
            out.traces.push((method, t));
        }
        out.models.push(model);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub method: Method,
    pub test_mse: f64,
    pub test_fairness: f64,
}

/// The notion reported as `test_fairness`: the constrained one, else MD for
/// a binary attribute and Pearson for a numeric one.
pub fn sweep_notion(spec: &ExperimentSpec, kind: AttributeKind) -> Notion {
    match (&spec.constraint, kind) {
        (Some(c), _) => c.notion,
        (None, AttributeKind::Binary) => Notion::MD,
        (None, AttributeKind::Numeric) => Notion::Pearson,
    }
}

/// One row per `(r, method)`, ordered by `r` then method. Sweep points run
/// in parallel.
pub fn run_ratio_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let ratios = spec
        .ratio_sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("spec has no ratio_sweep".into()))?;
    let (train, test) = load(spec)?;
    let notion = sweep_notion(spec, train.attribute_kind);
    let per_ratio = ratios
        .par_iter()
        .map(|&r| -> Result<Vec<SweepRow>> {
            let split = ratio_split(&train, r, spec.seed())?;
            spec.methods
                .iter()
                .map(|&method| {
                    let (model, _) = fit_method(method, &split, spec.constraint.as_ref(), &spec.solver, &spec.probit)?;
                    let report = full_report(&model, &test, Slice::Test)?;
                    let fairness = report.notion_value(notion).ok_or_else(|| {
                        Error::InvalidConfig(format!("{notion} is not defined for this attribute kind"))
                    })?;
                    Ok(SweepRow {
                        r,
                        method,
                        test_mse: report.mse,
                        test_fairness: fairness,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_ratio.into_iter().flatten().collect())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from("method,slice,mse,md,msed,pearson,partial,sp,bgl_0,bgl_1\n");
    for row in rows {
        let r = &row.report;
        let bgl = |g: u8| r.bgl_per_group.as_ref().and_then(|m| m.get(&g).copied());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            row.method,
            r.slice,
            r.mse,
            cell(r.md),
            cell(r.msed),
            cell(r.pearson),
            cell(r.partial),
            cell(r.sp_max_departure),
            cell(bgl(0)),
            cell(bgl(1)),
        );
    }
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("r,method,test_mse,test_fairness\n");
    for row in rows {
        let _ = writeln!(s, "{},{},{},{}", row.r, row.method, row.test_mse, row.test_fairness);
    }
    s
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Io(e.to_string()))
}

/// Writes `results.json`, `results.csv` and `models.json`.
pub fn write_fit(out: &FitOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.json"), json(&out.rows)?)?;
    std::fs::write(dir.join("results.csv"), results_csv(&out.rows))?;
    std::fs::write(dir.join("models.json"), json(&out.models)?)?;
    Ok(())
}

/// Writes `sweep.csv`.
pub fn write_sweep(rows: &[SweepRow], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("sweep.csv"), sweep_csv(rows))?;
    Ok(())
}
