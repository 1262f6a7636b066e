use std::collections::HashMap;
use std::io::Read;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{AttributeKind, Dataset, Standardization, Targets, INTERCEPT};
use crate::random::Sampler;

use super::config::{DatasetConfig, SensitiveKind};
use super::ratio::top_ranked;

/// Train/test pair produced by [`ingest`].
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// Rows dropped for a missing value in a referenced column.
    pub dropped_rows: usize,
}

const MISSING: [&str; 4] = ["", "?", "NA", "NaN"];

pub fn ingest(config: &DatasetConfig) -> Result<Split> {
    let file = std::fs::File::open(&config.csv_path)
        .map_err(|e| Error::Io(format!("{}: {e}", config.csv_path.display())))?;
    ingest_reader(file, config)
}

/// [`ingest`] on an already opened CSV source.
pub fn ingest_reader<R: Read>(reader: R, config: &DatasetConfig) -> Result<Split> {
    config.validate()?;
    let features = feature_columns(config);
    let mut referenced: Vec<&str> = features.iter().map(String::as_str).collect();
    for c in [&config.sensitive_column, &config.target_column, &config.split_rule.column] {
        if !referenced.contains(&c.as_str()) {
            referenced.push(c);
        }
    }

    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let positions = referenced
        .iter()
        .map(|c| index.get(c).copied().ok_or_else(|| Error::MissingColumn(c.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut dropped_rows = 0;
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row = Vec::with_capacity(positions.len());
        let mut missing = false;
        for (&pos, name) in positions.iter().zip(&referenced) {
            let field = record.get(pos).unwrap_or("");
            if MISSING.contains(&field) {
                missing = true;
                break;
            }
            let v = field.parse::<f64>().map_err(|e| Error::ParseError {
                row: line,
                column: name.to_string(),
                message: format!("`{field}`: {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::ParseError {
                    row: line,
                    column: name.to_string(),
                    message: format!("`{field}` is not finite"),
                });
            }
            row.push(v);
        }
        if missing {
            dropped_rows += 1;
        } else {
            table.push(row);
        }
    }

    let n = table.len();
    let n_train = ((1.0 - config.test_fraction) * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit("train"));
    }
    if n_train == n {
        return Err(Error::EmptySplit("test"));
    }
    let mut order = Sampler::new(config.seed).permutation(n);
    let train_rows = order.split_off(n - n_train);
    let test_rows = order;

    let col = |name: &str| referenced.iter().position(|c| *c == name).expect("referenced column");
    let gather = |rows: &[usize], name: &str| -> Vec<f64> {
        let j = col(name);
        rows.iter().map(|&i| table[i][j]).collect()
    };

    let stats = standardization(&features, |c| gather(&train_rows, c))?;
    let build = |rows: &[usize]| -> RawSplit {
        let columns = features.iter().map(|c| gather(rows, c)).collect();
        let sensitive = gather(rows, &config.sensitive_column);
        RawSplit {
            columns,
            a: match config.sensitive_kind {
                SensitiveKind::Binary(t) => sensitive.iter().map(|&v| f64::from(u8::from(t.holds(v)))).collect(),
                SensitiveKind::Numeric => sensitive,
            },
            y: gather(rows, &config.target_column),
            score: gather(rows, &config.split_rule.column)
                .iter()
                .map(|&v| config.split_rule.score(v))
                .collect(),
            rule: gather(rows, &config.split_rule.column)
                .iter()
                .map(|&v| config.split_rule.holds(v))
                .collect(),
        }
    };
    let (train_raw, test_raw) = (build(&train_rows), build(&test_rows));

    let selected = match config.selected_fraction {
        Some(f) => top_ranked(&train_raw.score, (f * n_train as f64 + 1e-9).floor() as usize, config.seed),
        None => train_raw.rule.clone(),
    };
    if !selected.iter().any(|&s| s) {
        return Err(Error::EmptySplit("selected training rows"));
    }

    let kind = match config.sensitive_kind {
        SensitiveKind::Binary(_) => AttributeKind::Binary,
        SensitiveKind::Numeric => AttributeKind::Numeric,
    };
    let test_mask = vec![true; test_rows.len()];
    let train = assemble(config, &features, &stats, kind, train_raw, selected);
    let test = assemble(config, &features, &stats, kind, test_raw, test_mask);
    train.validate()?;
    test.validate()?;
    Ok(Split {
        train,
        test,
        dropped_rows,
    })
}

struct RawSplit {
    columns: Vec<Vec<f64>>,
    a: Vec<f64>,
    y: Vec<f64>,
    score: Vec<f64>,
    rule: Vec<bool>,
}

/// Selection features in order, the sensitive column if requested, without
/// the intercept.
fn feature_columns(config: &DatasetConfig) -> Vec<String> {
    let mut cols = config.selection_columns.clone();
    if config.include_sensitive_in_features && !cols.contains(&config.sensitive_column) {
        cols.push(config.sensitive_column.clone());
    }
    cols
}

fn prediction_layout(config: &DatasetConfig) -> Vec<String> {
    let mut cols = config.prediction_columns.clone();
    if config.include_sensitive_in_features && !cols.contains(&config.sensitive_column) {
        cols.push(config.sensitive_column.clone());
    }
    cols.push(INTERCEPT.into());
    cols
}

/// Column means and population standard deviations.
fn standardization(features: &[String], column: impl Fn(&str) -> Vec<f64>) -> Result<Standardization> {
    let mut mean = Vec::with_capacity(features.len());
    let mut std = Vec::with_capacity(features.len());
    for c in features {
        let v = column(c);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        if !(s > 0.0) {
            return Err(Error::InvalidConfig(format!("feature `{c}` is constant on the training split")));
        }
        mean.push(m);
        std.push(s);
    }
    Ok(Standardization {
        columns: features.to_vec(),
        mean,
        std,
    })
}

fn assemble(
    config: &DatasetConfig,
    features: &[String],
    stats: &Standardization,
    kind: AttributeKind,
    raw: RawSplit,
    selected: Vec<bool>,
) -> Dataset {
    let n = raw.y.len();
    let z: Vec<Vec<f64>> = raw
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| c.iter().map(|v| (v - stats.mean[j]) / stats.std[j]).collect())
        .collect();
    let design = |names: &[String]| {
        DMatrix::from_fn(n, names.len(), |i, j| {
            let name = &names[j];
            if name == INTERCEPT {
                1.0
            } else {
                z[features.iter().position(|c| c == name).expect("feature column")][i]
            }
        })
    };
    let mut selection_columns = features.to_vec();
    selection_columns.push(INTERCEPT.into());
    let prediction_columns = prediction_layout(config);
    Dataset {
        x1: design(&selection_columns),
        x2: design(&prediction_columns),
        a: DVector::from_vec(raw.a),
        s: DVector::from_iterator(n, selected.iter().map(|&s| f64::from(u8::from(s)))),
        y: Targets::withheld(raw.y, selected),
        selection_columns,
        prediction_columns,
        attribute_kind: kind,
        selection_score: Some(raw.score),
        standardization: Some(stats.clone()),
    }
}
