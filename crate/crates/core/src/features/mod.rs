//! Fixed-width numeric encoding of levels.
//!
//! Every registry kind contributes a `count` column; value-bearing kinds add
//! `value_sum`, `value_mean` and `value_max`. With the default registry this
//! yields 25 + 12 x 3 = 61 columns, interleaved per kind in registry order.

mod matrix_file;

pub use matrix_file::{parse_matrix_csv, write_mask_csv, write_matrix_csv};

use std::collections::HashMap;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::level::{ElementRegistry, FeatureGroup, GameLevel};
use crate::scalar::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Count,
    ValueSum,
    ValueMean,
    ValueMax,
}

impl Stat {
    pub fn suffix(self) -> &'static str {
        match self {
            Stat::Count => "count",
            Stat::ValueSum => "value_sum",
            Stat::ValueMean => "value_mean",
            Stat::ValueMax => "value_max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub group: FeatureGroup,
    pub kind_id: String,
    pub stat: Stat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
    pub registry_version: u32,
}

impl FeatureSchema {
    pub fn from_registry(registry: &ElementRegistry) -> Self {
        let mut columns = Vec::new();
        for kind in registry.kinds() {
            let stats: &[Stat] = if kind.value_bearing {
                &[Stat::Count, Stat::ValueSum, Stat::ValueMean, Stat::ValueMax]
            } else {
                &[Stat::Count]
            };
            for &stat in stats {
                columns.push(Column {
                    name: format!("{}.{}", kind.id, stat.suffix()),
                    group: kind.group,
                    kind_id: kind.id.clone(),
                    stat,
                });
            }
        }
        Self {
            columns,
            registry_version: registry.version(),
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Short content hash over registry version and column layout.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.registry_version.to_le_bytes());
        for c in &self.columns {
            h.update(c.name.as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn check_registry(&self, registry_version: u32) -> Result<()> {
        if registry_version != self.registry_version {
            return Err(Error::version(
                "registry",
                self.registry_version,
                registry_version,
            ));
        }
        Ok(())
    }
}

/// One encoded level. Missing cells hold `NaN` until imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub level_id: String,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

pub fn extract_features(level: &GameLevel, schema: &FeatureSchema) -> Result<FeatureVector> {
    schema.check_registry(level.registry_version)?;

    #[derive(Default)]
    struct Acc {
        count: usize,
        sum: f64,
        max: Option<f64>,
    }
    let mut acc: HashMap<&str, Acc> = HashMap::new();
    for el in &level.elements {
        let a = acc.entry(el.kind.as_str()).or_default();
        a.count += 1;
        // A value-bearing element without a value contributes 0.
        let v = el.value.unwrap_or(0) as f64;
        a.sum += v;
        a.max = Some(a.max.map_or(v, |m| m.max(v)));
    }

    let n = schema.len();
    let mut values = vec![0.0; n];
    let mut missing = vec![false; n];
    for (i, col) in schema.columns.iter().enumerate() {
        let a = acc.get(col.kind_id.as_str());
        let count = a.map_or(0, |a| a.count);
        match col.stat {
            Stat::Count => values[i] = count as f64,
            _ if count == 0 => {
                values[i] = f64::NAN;
                missing[i] = true;
            }
            Stat::ValueSum => values[i] = a.unwrap().sum,
            Stat::ValueMean => values[i] = a.unwrap().sum / count as f64,
            Stat::ValueMax => values[i] = a.unwrap().max.unwrap(),
        }
    }
    Ok(FeatureVector {
        level_id: level.level_id.clone(),
        values,
        missing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputePolicy {
    /// Missing value statistics become 0; the mask is kept.
    #[default]
    ZeroFill,
}

impl fmt::Display for ImputePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImputePolicy::ZeroFill => f.write_str("missing value statistics zero-filled"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub schema: FeatureSchema,
    pub rows: Vec<FeatureVector>,
    /// `true` = selected (positive). Aligned with `rows` when present.
    pub labels: Option<Vec<bool>>,
}

impl DataMatrix {
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<FeatureVector>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::Data(format!(
                    "{} labels for {} rows",
                    l.len(),
                    rows.len()
                )));
            }
        }
        if let Some(r) = rows.iter().find(|r| r.values.len() != schema.len()) {
            return Err(Error::Data(format!(
                "row `{}` has {} values, schema has {}",
                r.level_id,
                r.values.len(),
                schema.len()
            )));
        }
        Ok(Self {
            schema,
            rows,
            labels,
        })
    }

    /// Extracts every level. Labels are attached when every level has one.
    pub fn from_levels(levels: &[GameLevel], schema: &FeatureSchema) -> Result<Self> {
        let rows = levels
            .iter()
            .map(|l| extract_features(l, schema))
            .collect::<Result<Vec<_>>>()?;
        let labels = levels
            .iter()
            .map(|l| l.label.map(|x| x.is_positive()))
            .collect::<Option<Vec<_>>>();
        Self::new(schema.clone(), rows, labels.filter(|_| !levels.is_empty()))
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn has_missing_values(&self) -> bool {
        self.rows
            .iter()
            .any(|r| r.values.iter().any(|v| v.is_nan()))
    }

    pub fn labels(&self) -> Result<&[bool]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Data("matrix has no labels".into()))
    }

    /// Dense feature array; fails if any cell is still missing.
    pub fn to_array<F: Float>(&self) -> Result<Array2<F>> {
        if self.has_missing_values() {
            return Err(Error::Data(
                "matrix contains missing values; impute first".into(),
            ));
        }
        let mut out = Array2::zeros((self.n_rows(), self.n_cols()));
        for (i, r) in self.rows.iter().enumerate() {
            for (j, &v) in r.values.iter().enumerate() {
                out[[i, j]] = F::cst(v);
            }
        }
        Ok(out)
    }

    /// Content hash over schema, ids, values and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.schema.fingerprint().as_bytes());
        for (i, r) in self.rows.iter().enumerate() {
            h.update(r.level_id.as_bytes());
            h.update([0u8]);
            for v in &r.values {
                h.update(v.to_bits().to_le_bytes());
            }
            if let Some(l) = &self.labels {
                h.update([u8::from(l[i])]);
            }
        }
        hex::encode(&h.finalize()[..8])
    }
}

pub fn impute_and_encode(matrix: &DataMatrix, policy: ImputePolicy) -> DataMatrix {
    let mut out = matrix.clone();
    match policy {
        ImputePolicy::ZeroFill => {
            for row in &mut out.rows {
                for v in &mut row.values {
                    if v.is_nan() {
                        *v = 0.0;
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnCoverage {
    pub name: String,
    pub nonzero_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: FeatureGroup,
    pub columns: Vec<ColumnCoverage>,
}

/// Per-group column listing with the fraction of rows holding a present,
/// nonzero value in each column.
pub fn group_summary(matrix: &DataMatrix) -> Vec<GroupSummary> {
    let n = matrix.n_rows();
    FeatureGroup::ALL
        .iter()
        .map(|&group| GroupSummary {
            group,
            columns: matrix
                .schema
                .columns
                .iter()
                .enumerate()
                .filter(|(_, c)| c.group == group)
                .map(|(j, c)| {
                    let nz = matrix
                        .rows
                        .iter()
                        .filter(|r| !r.missing[j] && r.values[j] != 0.0)
                        .count();
                    ColumnCoverage {
                        name: c.name.clone(),
                        nonzero_rate: if n == 0 { 0.0 } else { nz as f64 / n as f64 },
                    }
                })
                .collect(),
        })
        .collect()
}

pub fn format_group_summary(summary: &[GroupSummary]) -> String {
    let mut out = String::new();
    for g in summary {
        out.push_str(&format!("{} ({} columns)\n", g.group, g.columns.len()));
        for c in &g.columns {
            out.push_str(&format!("  {:<32} {:>6.1}%\n", c.name, 100.0 * c.nonzero_rate));
        }
    }
    out
}
