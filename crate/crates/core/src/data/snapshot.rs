use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeKind, Dataset, Standardization, Targets};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    rows: usize,
    selection_columns: Vec<String>,
    prediction_columns: Vec<String>,
    attribute_kind: AttributeKind,
    has_selection_score: bool,
    /// Selection mask, one flag per row.
    observed: Vec<bool>,
    standardization: Option<Standardization>,
}

fn write_matrix(path: &Path, names: &[String], x: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for row in x.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix(path: &Path, names: &[String], rows: usize) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(names.iter().map(String::as_str)) {
        return Err(Error::LayoutMismatch(format!("{} header differs from the manifest", path.display())));
    }
    let mut values = Vec::with_capacity(rows * names.len());
    for (i, record) in r.records().enumerate() {
        for (field, name) in record?.iter().zip(names) {
            values.push(parse(field, i + 2, name)?);
        }
    }
    if values.len() != rows * names.len() {
        return Err(Error::ShapeMismatch {
            what: path.display().to_string(),
            expected: rows * names.len(),
            found: values.len(),
        });
    }
    Ok(DMatrix::from_row_slice(rows, names.len(), &values))
}

fn parse(field: &str, row: usize, column: &str) -> Result<f64> {
    field.parse().map_err(|e| Error::ParseError {
        row,
        column: column.to_string(),
        message: format!("`{field}`: {e}"),
    })
}

/// Writes `manifest.json`, `x1.csv`, `x2.csv` and `rows.csv` (columns
/// `a, s, y[, score]`, with `y` empty on unselected rows) into `dir`.
pub fn write_snapshot(dataset: &Dataset, dir: &Path) -> Result<()> {
    dataset.validate()?;
    std::fs::create_dir_all(dir)?;
    let manifest = Manifest {
        rows: dataset.n(),
        selection_columns: dataset.selection_columns.clone(),
        prediction_columns: dataset.prediction_columns.clone(),
        attribute_kind: dataset.attribute_kind,
        has_selection_score: dataset.selection_score.is_some(),
        observed: dataset.y.mask().to_vec(),
        standardization: dataset.standardization.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    write_matrix(&dir.join("x1.csv"), &dataset.selection_columns, &dataset.x1)?;
    write_matrix(&dir.join("x2.csv"), &dataset.prediction_columns, &dataset.x2)?;

    let mut w = csv::Writer::from_path(dir.join("rows.csv"))?;
    let mut header = vec!["a", "s", "y"];
    if dataset.selection_score.is_some() {
        header.push("score");
    }
    w.write_record(&header)?;
    for (i, y) in dataset.y.to_options().into_iter().enumerate() {
        let mut rec = vec![
            dataset.a[i].to_string(),
            dataset.s[i].to_string(),
            y.map(|v| v.to_string()).unwrap_or_default(),
        ];
        if let Some(score) = &dataset.selection_score {
            rec.push(score[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(dir: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let x1 = read_matrix(&dir.join("x1.csv"), &m.selection_columns, m.rows)?;
    let x2 = read_matrix(&dir.join("x2.csv"), &m.prediction_columns, m.rows)?;
    let mut r = csv::Reader::from_path(dir.join("rows.csv"))?;
    let (mut a, mut s, mut y, mut score) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let field = |k: usize| record.get(k).unwrap_or("");
        a.push(parse(field(0), i + 2, "a")?);
        s.push(parse(field(1), i + 2, "s")?);
        y.push(match field(2) {
            "" => None,
            v => Some(parse(v, i + 2, "y")?),
        });
        if m.has_selection_score {
            score.push(parse(field(3), i + 2, "score")?);
        }
    }
    let y = Targets::from_options(&y);
    if y.mask() != m.observed.as_slice() {
        return Err(Error::LayoutMismatch("target mask differs from the manifest".into()));
    }
    let d = Dataset {
        x1,
        x2,
        a: DVector::from_vec(a),
        y,
        s: DVector::from_vec(s),
        selection_columns: m.selection_columns,
        prediction_columns: m.prediction_columns,
        attribute_kind: m.attribute_kind,
        selection_score: m.has_selection_score.then_some(score),
        standardization: m.standardization,
    };
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{generate_synthetic, SyntheticConfig};

    #[test]
    fn round_trip_preserves_dataset() {
        let s = generate_synthetic(&SyntheticConfig {
            n: 60,
            n_test: 5,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_snapshot(&s.train, dir.path()).unwrap();
        let back = read_snapshot(dir.path()).unwrap();
        assert_eq!(back, s.train);
    }

    #[test]
    fn masked_targets_are_not_written() {
        let s = generate_synthetic(&SyntheticConfig {
            n: 40,
            n_test: 5,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_snapshot(&s.train, dir.path()).unwrap();
        let rows = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        for (line, i) in rows.lines().skip(1).zip(0..) {
            let y = line.split(',').nth(2).unwrap();
            assert_eq!(y.is_empty(), s.train.s[i] == 0.0);
        }
    }
}
