//! On-disk layout: `db_<i>/schema.json`, `db_<i>/meta.json` and one CSV per
//! table under `db_<i>/tables/`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use crate::config::GenConfig;
use crate::db::{ColumnType, FeatureColumn, ForeignKeyColumn, GeneratedTable, RelationalDatabase};
use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::schema::{SchemaGraph, TableKind, TableMeta, PRIMARY_KEY_COLUMN, TIMESTAMP_COLUMN};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn db_dir(&self, index: usize) -> PathBuf {
        self.root.join(format!("db_{index}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Pk,
    Fk,
    Feature,
    Timestamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnEntry {
    pub name: String,
    pub role: ColumnRole,
    /// `int`, `numeric`, `categorical` or `timestamp`.
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fk_target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_categories: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    pub kind: TableKind,
    pub num_rows: usize,
    pub columns: Vec<ColumnEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub tables: Vec<TableEntry>,
    /// `[parent, child]` table names.
    pub edges: Vec<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbMeta {
    pub index: usize,
    pub master_seed: u64,
    pub db_seed: u64,
    pub null_fraction: f64,
    pub config: GenConfig,
}

fn feature_dtype(dtype: ColumnType) -> (&'static str, Option<usize>) {
    match dtype {
        ColumnType::Numeric => ("numeric", None),
        ColumnType::Categorical { num_categories } => ("categorical", Some(num_categories)),
    }
}

impl SchemaFile {
    pub fn from_database(db: &RelationalDatabase) -> Self {
        let names: Vec<&str> = db.tables.iter().map(|t| t.name.as_str()).collect();
        let tables = db
            .tables
            .iter()
            .map(|t| {
                let mut columns = vec![ColumnEntry {
                    name: PRIMARY_KEY_COLUMN.into(),
                    role: ColumnRole::Pk,
                    dtype: "int".into(),
                    fk_target: None,
                    num_categories: None,
                }];
                columns.extend(t.foreign_keys.iter().map(|fk| ColumnEntry {
                    name: fk.name.clone(),
                    role: ColumnRole::Fk,
                    dtype: "int".into(),
                    fk_target: Some(names[fk.parent].to_string()),
                    num_categories: None,
                }));
                columns.extend(t.features.iter().map(|f| {
                    let (dtype, num_categories) = feature_dtype(f.dtype);
                    ColumnEntry {
                        name: f.name.clone(),
                        role: ColumnRole::Feature,
                        dtype: dtype.into(),
                        fk_target: None,
                        num_categories,
                    }
                }));
                if t.timestamps.is_some() {
                    columns.push(ColumnEntry {
                        name: TIMESTAMP_COLUMN.into(),
                        role: ColumnRole::Timestamp,
                        dtype: "timestamp".into(),
                        fk_target: None,
                        num_categories: None,
                    });
                }
                TableEntry {
                    name: t.name.clone(),
                    kind: t.kind,
                    num_rows: t.num_rows,
                    columns,
                }
            })
            .collect();
        let edges = db
            .schema
            .dag
            .edges()
            .iter()
            .map(|&(p, c)| [names[p].to_string(), names[c].to_string()])
            .collect();
        Self { tables, edges }
    }

    /// Rebuilds the schema graph; the file must be internally consistent.
    pub fn to_schema(&self, path: &Path) -> Result<SchemaGraph> {
        let index = |name: &str| {
            self.tables
                .iter()
                .position(|t| t.name == name)
                .ok_or_else(|| Error::format(path, format!("unknown table {name}")))
        };
        let edges = self
            .edges
            .iter()
            .map(|[p, c]| Ok((index(p)?, index(c)?)))
            .collect::<Result<Vec<_>>>()?;
        let dag = Dag::new(self.tables.len(), edges)?;
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let fk_parents = t
                    .columns
                    .iter()
                    .filter(|c| c.role == ColumnRole::Fk)
                    .map(|c| index(c.fk_target.as_deref().unwrap_or_default()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(TableMeta {
                    name: t.name.clone(),
                    kind: t.kind,
                    num_rows: t.num_rows,
                    num_feature_columns: t.columns.iter().filter(|c| c.role == ColumnRole::Feature).count(),
                    fk_parents,
                    has_timestamp: t.columns.iter().any(|c| c.role == ColumnRole::Timestamp),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let schema = SchemaGraph { dag, tables };
        schema.validate()?;
        Ok(schema)
    }
}

pub fn format_timestamp(secs: i64) -> String {
    DateTime::from_timestamp(secs, 0)
        .map(|t| t.format(TIMESTAMP_FORMAT).to_string())
        .unwrap_or_default()
}

pub fn parse_timestamp(text: &str) -> Option<i64> {
    DateTime::parse_from_str(&text.replace('Z', "+0000"), "%Y-%m-%dT%H:%M:%S%z")
        .ok()
        .map(|t| t.timestamp())
}

/// Shortest round-trip text of a feature value.
pub fn format_feature(value: f64, dtype: ColumnType) -> String {
    match dtype {
        ColumnType::Numeric => value.to_string(),
        ColumnType::Categorical { .. } => (value as u32).to_string(),
    }
}

pub fn write_table_csv(table: &GeneratedTable, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    let mut header = vec![PRIMARY_KEY_COLUMN.to_string()];
    header.extend(table.foreign_keys.iter().map(|f| f.name.clone()));
    header.extend(table.features.iter().map(|f| f.name.clone()));
    if table.timestamps.is_some() {
        header.push(TIMESTAMP_COLUMN.into());
    }
    writer.write_record(&header).map_err(|e| Error::format(path, e))?;
    let mut record = Vec::with_capacity(header.len());
    for r in 0..table.num_rows {
        record.clear();
        record.push((r + 1).to_string());
        record.extend(table.foreign_keys.iter().map(|f| f.values[r].to_string()));
        record.extend(
            table
                .features
                .iter()
                .map(|f| f.get(r).map(|v| format_feature(v, f.dtype)).unwrap_or_default()),
        );
        if let Some(ts) = table.timestamp(r) {
            record.push(format_timestamp(ts));
        }
        writer.write_record(&record).map_err(|e| Error::format(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// Writes `db` into `dir`, creating it if needed.
pub fn write_database(db: &RelationalDatabase, meta: &DbMeta, dir: &Path) -> Result<()> {
    let tables_dir = dir.join("tables");
    fs::create_dir_all(&tables_dir).map_err(|e| Error::io(&tables_dir, e))?;
    write_json(&SchemaFile::from_database(db), &dir.join("schema.json"))?;
    write_json(meta, &dir.join("meta.json"))?;
    for table in &db.tables {
        write_table_csv(table, &tables_dir.join(format!("{}.csv", table.name)))?;
    }
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<DbMeta> {
    read_json(&dir.join("meta.json"))
}

fn read_table(entry: &TableEntry, meta: &TableMeta, path: &Path) -> Result<GeneratedTable> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::format(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected: Vec<&str> = entry.columns.iter().map(|c| c.name.as_str()).collect();
    if header != expected {
        return Err(Error::format(path, format!("header {header:?} does not match schema {expected:?}")));
    }
    let mut foreign_keys: Vec<ForeignKeyColumn> = Vec::new();
    let mut features: Vec<FeatureColumn> = Vec::new();
    let mut timestamps = meta.has_timestamp.then(Vec::new);
    for c in &entry.columns {
        match c.role {
            ColumnRole::Fk => foreign_keys.push(ForeignKeyColumn {
                name: c.name.clone(),
                parent: meta.fk_parents[foreign_keys.len()],
                values: Vec::with_capacity(entry.num_rows),
            }),
            ColumnRole::Feature => {
                let dtype = match (c.dtype.as_str(), c.num_categories) {
                    ("numeric", _) => ColumnType::Numeric,
                    ("categorical", Some(n)) => ColumnType::Categorical { num_categories: n },
                    (other, _) => return Err(Error::format(path, format!("bad feature dtype {other}"))),
                };
                features.push(FeatureColumn::new(c.name.clone(), dtype, Vec::new()));
            }
            ColumnRole::Pk | ColumnRole::Timestamp => {}
        }
    }
    let bad = |row: usize, col: &str, v: &str| Error::format(path, format!("row {row}, column {col}: bad value {v:?}"));
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e))?;
        let (mut f, mut x) = (0, 0);
        for (c, field) in entry.columns.iter().zip(record.iter()) {
            match c.role {
                ColumnRole::Pk => {
                    if field.parse::<usize>().ok() != Some(r + 1) {
                        return Err(bad(r + 1, &c.name, field));
                    }
                }
                ColumnRole::Fk => {
                    foreign_keys[f].values.push(field.parse().map_err(|_| bad(r + 1, &c.name, field))?);
                    f += 1;
                }
                ColumnRole::Feature => {
                    let col = &mut features[x];
                    if field.is_empty() {
                        col.values.push(0.0);
                        col.nulls.push(true);
                    } else {
                        col.values.push(field.parse().map_err(|_| bad(r + 1, &c.name, field))?);
                        col.nulls.push(false);
                    }
                    x += 1;
                }
                ColumnRole::Timestamp => {
                    let ts = parse_timestamp(field).ok_or_else(|| bad(r + 1, &c.name, field))?;
                    timestamps.as_mut().expect("timestamp column declared").push(ts);
                }
            }
        }
    }
    let rows = features
        .first()
        .map(FeatureColumn::len)
        .or(foreign_keys.first().map(|f| f.values.len()))
        .unwrap_or(entry.num_rows);
    if rows != entry.num_rows {
        return Err(Error::format(path, format!("{rows} rows, schema says {}", entry.num_rows)));
    }
    Ok(GeneratedTable {
        name: entry.name.clone(),
        kind: entry.kind,
        num_rows: entry.num_rows,
        foreign_keys,
        features,
        timestamps,
    })
}

/// Loads a database written by [`write_database`].
pub fn read_database(dir: &Path) -> Result<RelationalDatabase> {
    let schema_path = dir.join("schema.json");
    let file: SchemaFile = read_json(&schema_path)?;
    let schema = file.to_schema(&schema_path)?;
    let null_fraction = read_meta(dir).map(|m| m.null_fraction).unwrap_or(0.0);
    let tables = file
        .tables
        .iter()
        .zip(&schema.tables)
        .map(|(entry, meta)| read_table(entry, meta, &dir.join("tables").join(format!("{}.csv", entry.name))))
        .collect::<Result<Vec<_>>>()?;
    Ok(RelationalDatabase {
        schema,
        tables,
        null_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::generate_database;
    use crate::prior::Prior;

    #[test]
    fn timestamp_text_round_trips() {
        assert_eq!(format_timestamp(631_152_000), "1990-01-01T00:00:00Z");
        assert_eq!(parse_timestamp("1990-01-01T00:00:00Z"), Some(631_152_000));
        assert_eq!(parse_timestamp("garbage"), None);
    }

    #[test]
    fn database_round_trips() {
        let config = GenConfig {
            num_tables: Prior::range(3, 6),
            ..GenConfig::default()
        };
        let db = generate_database(&config, 17).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let meta = DbMeta {
            index: 0,
            master_seed: 17,
            db_seed: 17,
            null_fraction: db.null_fraction,
            config,
        };
        write_database(&db, &meta, dir.path()).unwrap();
        assert_eq!(read_database(dir.path()).unwrap(), db);
        assert_eq!(read_meta(dir.path()).unwrap(), meta);
    }
}
