//! Columnar storage of a generated database.

use serde::{Deserialize, Serialize};

use crate::schema::{SchemaGraph, TableKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "dtype")]
pub enum ColumnType {
    Numeric,
    Categorical { num_categories: usize },
}

impl ColumnType {
    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnType::Categorical { .. })
    }
}

/// A feature column. Categories are stored as exact integers `1..=C`; NULLs
/// live in a separate mask; the value slot underneath holds 0.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub dtype: ColumnType,
    pub values: Vec<f64>,
    pub nulls: Vec<bool>,
}

impl FeatureColumn {
    pub fn new(name: String, dtype: ColumnType, values: Vec<f64>) -> Self {
        let nulls = vec![false; values.len()];
        Self {
            name,
            dtype,
            values,
            nulls,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of 0-based `row`, `None` when NULL.
    pub fn get(&self, row: usize) -> Option<f64> {
        (!self.nulls[row]).then(|| self.values[row])
    }

    pub fn cell(&self, row: usize) -> CellValue {
        match (self.get(row), self.dtype) {
            (None, _) => CellValue::Null,
            (Some(v), ColumnType::Numeric) => CellValue::Numeric(v),
            (Some(v), ColumnType::Categorical { .. }) => CellValue::Categorical(v as u32),
        }
    }

    pub fn null_count(&self) -> usize {
        self.nulls.iter().filter(|&&n| n).count()
    }

    /// Non-NULL values in row order.
    pub fn present(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.nulls)
            .filter(|(_, &n)| !n)
            .map(|(&v, _)| v)
    }
}

/// `values[i]` is the 1-based parent row referenced by child row `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForeignKeyColumn {
    pub name: String,
    pub parent: usize,
    pub values: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedTable {
    pub name: String,
    pub kind: TableKind,
    pub num_rows: usize,
    pub foreign_keys: Vec<ForeignKeyColumn>,
    pub features: Vec<FeatureColumn>,
    /// Unix seconds, activity tables only.
    pub timestamps: Option<Vec<i64>>,
}

impl GeneratedTable {
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|c| c.name == name)
    }

    pub fn timestamp(&self, row: usize) -> Option<i64> {
        self.timestamps.as_ref().map(|ts| ts[row])
    }

    pub fn feature_cell_count(&self) -> usize {
        self.num_rows * self.features.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellValue {
    Numeric(f64),
    Categorical(u32),
    Timestamp(i64),
    Null,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationalDatabase {
    pub schema: SchemaGraph,
    pub tables: Vec<GeneratedTable>,
    pub null_fraction: f64,
}

impl RelationalDatabase {
    pub fn feature_cell_count(&self) -> usize {
        self.tables.iter().map(GeneratedTable::feature_cell_count).sum()
    }

    pub fn null_count(&self) -> usize {
        self.tables
            .iter()
            .flat_map(|t| &t.features)
            .map(FeatureColumn::null_count)
            .sum()
    }

    /// Number of foreign-key cells that do not name an existing parent row.
    pub fn fk_violations(&self) -> usize {
        self.tables
            .iter()
            .flat_map(|t| &t.foreign_keys)
            .map(|fk| {
                let parent_rows = self.tables.get(fk.parent).map_or(0, |p| p.num_rows);
                fk.values
                    .iter()
                    .filter(|&&v| v == 0 || v as usize > parent_rows)
                    .count()
            })
            .sum()
    }
}
