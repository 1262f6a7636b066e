use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CompareOp {
    fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Eq => "==",
        }
    }
}

impl FromStr for CompareOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "<" => CompareOp::Lt,
            "<=" => CompareOp::Le,
            ">" => CompareOp::Gt,
            ">=" => CompareOp::Ge,
            "==" => CompareOp::Eq,
            other => return Err(Error::InvalidConfig(format!("unknown comparison `{other}`"))),
        })
    }
}

/// `<op> <number>`, e.g. `> 0.5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub op: CompareOp,
    pub value: f64,
}

impl Threshold {
    pub fn holds(&self, x: f64) -> bool {
        match self.op {
            CompareOp::Lt => x < self.value,
            CompareOp::Le => x <= self.value,
            CompareOp::Gt => x > self.value,
            CompareOp::Ge => x >= self.value,
            CompareOp::Eq => x == self.value,
        }
    }

    /// Signed margin by which `x` satisfies the comparison; larger is more
    /// comfortably inside.
    pub fn margin(&self, x: f64) -> f64 {
        match self.op {
            CompareOp::Lt | CompareOp::Le => self.value - x,
            CompareOp::Gt | CompareOp::Ge => x - self.value,
            CompareOp::Eq => -(x - self.value).abs(),
        }
    }
}

fn number(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidConfig(format!("`{s}` is not a finite number")))
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        match parts.as_slice() {
            [op, v] => Ok(Threshold {
                op: op.parse()?,
                value: number(v)?,
            }),
            _ => Err(Error::InvalidConfig(format!("threshold `{s}`: expected `<op> <number>`"))),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.op.symbol(), self.value)
    }
}

/// `<column> <op> <number>`; rows satisfying it are eligible for selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRule {
    pub column: String,
    pub threshold: Threshold,
}

impl SplitRule {
    pub fn holds(&self, x: f64) -> bool {
        self.threshold.holds(x)
    }

    pub fn score(&self, x: f64) -> f64 {
        self.threshold.margin(x)
    }
}

impl FromStr for SplitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        match parts.as_slice() {
            [column, op, v] => Ok(SplitRule {
                column: column.to_string(),
                threshold: Threshold {
                    op: op.parse()?,
                    value: number(v)?,
                },
            }),
            _ => Err(Error::InvalidConfig(format!(
                "split rule `{s}`: expected `<column> <op> <number>`"
            ))),
        }
    }
}

impl fmt::Display for SplitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.column, self.threshold)
    }
}

macro_rules! serde_via_str {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_str!(Threshold);
serde_via_str!(SplitRule);

/// How the sensitive column becomes the attribute `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitiveKind {
    /// `a = 1` where the raw value satisfies the threshold.
    Binary(Threshold),
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub csv_path: PathBuf,
    pub selection_columns: Vec<String>,
    pub prediction_columns: Vec<String>,
    pub sensitive_column: String,
    pub sensitive_kind: SensitiveKind,
    pub target_column: String,
    pub split_rule: SplitRule,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub include_sensitive_in_features: bool,
    #[serde(default)]
    pub seed: u64,
    /// When set, the `⌊f·|D|⌋` rows ranked highest by the split rule are
    /// selected instead of exactly those satisfying it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_fraction: Option<f64>,
}

fn default_test_fraction() -> f64 {
    0.3
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if let Some(f) = self.selected_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidConfig(format!("selected_fraction must lie in (0, 1), got {f}")));
            }
        }
        for c in &self.prediction_columns {
            if !self.selection_columns.contains(c) {
                return Err(Error::NotASubset(c.clone()));
            }
        }
        if self.selection_columns.is_empty() {
            return Err(Error::InvalidConfig("no selection columns".into()));
        }
        Ok(())
    }

    /// Reads a JSON config; a relative `csv_path` resolves against the
    /// config's directory.
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config: DatasetConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if config.csv_path.is_relative() {
            if let Some(dir) = path.parent() {
                config.csv_path = dir.join(&config.csv_path);
            }
        }
        config.validate()?;
        Ok(config)
    }
}
