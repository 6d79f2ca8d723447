//! End-to-end database generation (Algorithms 1 to 3).
//!
//! Seed layout for master seed `s`: the schema uses `split(s, 0)`, table `t`
//! uses `split(split(s, 1), t)`, NULL injection `split(s, 2)` and timestamps
//! `split(s, 3)`. Each table job therefore depends only on its parents'
//! values and its own stream.

use chrono::NaiveTime;

use crate::config::GenConfig;
use crate::db::{ColumnType, FeatureColumn, ForeignKeyColumn, GeneratedTable, RelationalDatabase};
use crate::error::{Error, Result};
use crate::fk::{populate_foreign_keys, FkPlan};
use crate::neural::MlpScratch;
use crate::rng::{split_seed, SeededRng};
use crate::schema::{sample_schema, topological_order, SchemaGraph, TableKind, TableMeta};
use crate::scm::{RowScratch, Scm};

const SCHEMA_STREAM: u64 = 0;
const TABLE_STREAM: u64 = 1;
const NULL_STREAM: u64 = 2;
const TIMESTAMP_STREAM: u64 = 3;

/// Fork indices inside a table stream.
const FK_FORK: u64 = 0;
const SCM_FORK: u64 = 1;
const ROW_FORK: u64 = 2;

/// Row-major feature values of a generated parent, in column order.
struct ParentRows {
    width: usize,
    values: Vec<f64>,
}

impl ParentRows {
    fn new(table: &GeneratedTable) -> Self {
        let width = table.features.len();
        let mut values = vec![0.0; table.num_rows * width];
        for (c, col) in table.features.iter().enumerate() {
            for (r, &v) in col.values.iter().enumerate() {
                values[r * width + c] = v;
            }
        }
        Self { width, values }
    }

    /// Features of 1-based `row`.
    fn row(&self, row: u32) -> &[f64] {
        let start = (row as usize - 1) * self.width;
        &self.values[start..start + self.width]
    }
}

/// Generates the rows of `meta` given its already generated parents.
/// `parents[k]` must be the table `meta.fk_parents[k]`.
pub fn generate_table(
    meta: &TableMeta,
    parents: &[Option<&GeneratedTable>],
    config: &GenConfig,
    rng: &SeededRng,
) -> Result<GeneratedTable> {
    if parents.len() != meta.fk_parents.len() {
        return Err(Error::Orchestration(format!(
            "{}: {} parents expected, {} supplied",
            meta.name,
            meta.fk_parents.len(),
            parents.len()
        )));
    }
    let parents = parents
        .iter()
        .zip(&meta.fk_parents)
        .map(|(p, &idx)| p.ok_or_else(|| Error::Orchestration(format!("{}: parent table {idx} not generated", meta.name))))
        .collect::<Result<Vec<_>>>()?;

    let fk_rng = rng.fork(FK_FORK);
    let mut foreign_keys = Vec::with_capacity(parents.len());
    for (t, (parent, &parent_idx)) in parents.iter().zip(&meta.fk_parents).enumerate() {
        let mut pair_rng = fk_rng.fork(t as u64);
        let plan = FkPlan::sample(meta.num_rows, parent.num_rows, config, &mut pair_rng)?;
        foreign_keys.push(ForeignKeyColumn {
            name: TableMeta::fk_column_name(t + 1),
            parent: parent_idx,
            values: populate_foreign_keys(&plan, &mut pair_rng)?,
        });
    }

    let foreign_types: Vec<Vec<ColumnType>> = parents
        .iter()
        .map(|p| p.features.iter().map(|c| c.dtype).collect())
        .collect();
    let scm = Scm::sample(
        meta.kind,
        meta.num_rows,
        meta.num_feature_columns,
        &foreign_types,
        config,
        &mut rng.fork(SCM_FORK),
    )?;

    let parent_rows: Vec<ParentRows> = parents.iter().map(|p| ParentRows::new(p)).collect();
    // Foreign latents depend only on the parent row; compute each once.
    let mut cache: Vec<Vec<Option<Vec<f64>>>> = parents.iter().map(|p| vec![None; p.num_rows]).collect();
    let width = meta.num_feature_columns;
    let mut values = vec![vec![0.0; meta.num_rows]; width];
    let mut row_rng = rng.fork(ROW_FORK);
    let mut scratch = RowScratch::default();
    let mut mlp = MlpScratch::default();
    let mut out = vec![0.0; width];
    for i in 0..meta.num_rows {
        for (t, (rows, fk)) in parent_rows.iter().zip(&foreign_keys).enumerate() {
            let j = fk.values[i];
            if cache[t][j as usize - 1].is_none() {
                let mut buf = Vec::new();
                scm.foreign_latents(t, rows.row(j), &mut mlp, &mut buf);
                cache[t][j as usize - 1] = Some(buf);
            }
        }
        let latents: Vec<&[f64]> = foreign_keys
            .iter()
            .zip(&cache)
            .map(|(fk, c)| c[fk.values[i] as usize - 1].as_deref().expect("filled above"))
            .collect();
        scm.realize_row_with_latents(&latents, i + 1, &mut row_rng, &mut scratch, &mut out)?;
        for (col, &v) in values.iter_mut().zip(&out) {
            col[i] = v;
        }
    }
    Ok(assemble(meta, foreign_keys, &scm, values))
}

/// Same rows as [`generate_table`] for a parentless table, realized through
/// the source-only mechanism path.
pub fn generate_parentless_table(meta: &TableMeta, config: &GenConfig, rng: &SeededRng) -> Result<GeneratedTable> {
    if !meta.fk_parents.is_empty() {
        return Err(Error::Usage(format!("{} has parents", meta.name)));
    }
    let scm = Scm::sample(
        meta.kind,
        meta.num_rows,
        meta.num_feature_columns,
        &[],
        config,
        &mut rng.fork(SCM_FORK),
    )?;
    let width = meta.num_feature_columns;
    let mut values = vec![vec![0.0; meta.num_rows]; width];
    let mut row_rng = rng.fork(ROW_FORK);
    let mut scratch = RowScratch::default();
    let mut out = vec![0.0; width];
    for i in 0..meta.num_rows {
        scm.realize_row_isolated(i + 1, &mut row_rng, &mut scratch, &mut out)?;
        for (col, &v) in values.iter_mut().zip(&out) {
            col[i] = v;
        }
    }
    Ok(assemble(meta, Vec::new(), &scm, values))
}

fn assemble(meta: &TableMeta, foreign_keys: Vec<ForeignKeyColumn>, scm: &Scm, values: Vec<Vec<f64>>) -> GeneratedTable {
    let features = values
        .into_iter()
        .zip(scm.feature_types())
        .enumerate()
        .map(|(i, (v, dtype))| FeatureColumn::new(TableMeta::feature_column_name(i + 1), dtype, v))
        .collect();
    GeneratedTable {
        name: meta.name.clone(),
        kind: meta.kind,
        num_rows: meta.num_rows,
        foreign_keys,
        features,
        timestamps: None,
    }
}

/// Uniformly spaced instants in `[min, max]` with jitter below half a
/// spacing, so the sequence is non-decreasing in the row index.
pub fn timestamps(num_rows: usize, min: i64, max: i64, rng: &mut SeededRng) -> Vec<i64> {
    let spacing = (max - min) as f64 / num_rows.max(1) as f64;
    (0..num_rows)
        .map(|i| {
            let jitter = rng.uniform_range(-0.49, 0.49) * spacing;
            let t = min as f64 + (i as f64 + 0.5) * spacing + jitter;
            (t.floor() as i64).clamp(min, max)
        })
        .collect()
}

/// Independently NULLs each feature cell with probability `fraction`. The
/// value slot under a NULL is zeroed.
pub fn inject_nulls(db: &mut RelationalDatabase, fraction: f64, rng: &mut SeededRng) {
    for table in &mut db.tables {
        for col in &mut table.features {
            for (n, v) in col.nulls.iter_mut().zip(col.values.iter_mut()) {
                *n = rng.bernoulli(fraction);
                if *n {
                    *v = 0.0;
                }
            }
        }
    }
    db.null_fraction = fraction;
}

fn unix_seconds(date: chrono::NaiveDate) -> i64 {
    date.and_time(NaiveTime::MIN).and_utc().timestamp()
}

/// Generates every table of `schema` in topological order.
pub fn generate_tables(schema: &SchemaGraph, config: &GenConfig, seed: u64) -> Result<Vec<GeneratedTable>> {
    let tables_seed = split_seed(seed, TABLE_STREAM);
    let mut ts_rng = SeededRng::new(split_seed(seed, TIMESTAMP_STREAM));
    let ts_min = unix_seconds(config.timestamp_min.draw(&mut ts_rng)?);
    let ts_max = unix_seconds(config.timestamp_max.draw(&mut ts_rng)?);
    if ts_min >= ts_max {
        return Err(Error::Config("timestamp min must precede max".into()));
    }
    let mut done: Vec<Option<GeneratedTable>> = vec![None; schema.num_tables()];
    for t in topological_order(schema)? {
        let meta = &schema.tables[t];
        let parents: Vec<Option<&GeneratedTable>> = meta.fk_parents.iter().map(|&p| done[p].as_ref()).collect();
        let rng = SeededRng::new(split_seed(tables_seed, t as u64));
        let mut table = generate_table(meta, &parents, config, &rng)?;
        if meta.has_timestamp {
            let mut rng = ts_rng.fork(t as u64);
            table.timestamps = Some(timestamps(meta.num_rows, ts_min, ts_max, &mut rng));
        }
        done[t] = Some(table);
    }
    done.into_iter()
        .enumerate()
        .map(|(i, t)| t.ok_or_else(|| Error::Orchestration(format!("table {i} was never generated"))))
        .collect()
}

/// Schema, keys, features and NULLs; a pure function of `(config, seed)`.
pub fn generate_database(config: &GenConfig, seed: u64) -> Result<RelationalDatabase> {
    config.validate()?;
    let schema = sample_schema(config, &mut SeededRng::new(split_seed(seed, SCHEMA_STREAM)))?;
    let tables = generate_tables(&schema, config, seed)?;
    let mut db = RelationalDatabase {
        schema,
        tables,
        null_fraction: 0.0,
    };
    let mut null_rng = SeededRng::new(split_seed(seed, NULL_STREAM));
    let fraction = config.null_fraction.draw(&mut null_rng)?;
    inject_nulls(&mut db, fraction, &mut null_rng);
    Ok(db)
}

impl TableKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TableKind::Entity => "entity",
            TableKind::Activity => "activity",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::Prior;

    fn small_config() -> GenConfig {
        GenConfig {
            num_tables: Prior::range(3, 5),
            ..GenConfig::default()
        }
    }

    #[test]
    fn timestamps_are_monotone_and_bounded() {
        let mut rng = SeededRng::new(1);
        let ts = timestamps(2000, 631_152_000, 1_735_689_600, &mut rng);
        assert_eq!(ts.len(), 2000);
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
        assert!(ts.iter().all(|&t| (631_152_000..=1_735_689_600).contains(&t)));
    }

    #[test]
    fn zero_fraction_means_no_nulls() {
        let mut db = generate_database(&small_config(), 3).unwrap();
        inject_nulls(&mut db, 0.0, &mut SeededRng::new(0));
        assert_eq!(db.null_count(), 0);
    }

    #[test]
    fn database_shape_follows_schema() {
        let db = generate_database(&small_config(), 5).unwrap();
        assert_eq!(db.fk_violations(), 0);
        for (table, meta) in db.tables.iter().zip(&db.schema.tables) {
            assert_eq!(table.num_rows, meta.num_rows);
            assert_eq!(table.features.len(), meta.num_feature_columns);
            assert_eq!(table.foreign_keys.len(), meta.fk_parents.len());
            assert_eq!(table.timestamps.is_some(), meta.kind == TableKind::Activity);
            let range = match meta.kind {
                TableKind::Entity => 500..=1000,
                TableKind::Activity => 2000..=5000,
            };
            assert!(range.contains(&table.num_rows));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate_database(&small_config(), 9).unwrap(), generate_database(&small_config(), 9).unwrap());
        assert_ne!(generate_database(&small_config(), 9).unwrap(), generate_database(&small_config(), 10).unwrap());
    }

    #[test]
    fn missing_parent_is_an_orchestration_error() {
        let db = generate_database(&small_config(), 7).unwrap();
        let child = db.schema.tables.iter().find(|t| !t.fk_parents.is_empty());
        if let Some(meta) = child {
            let parents = vec![None; meta.fk_parents.len()];
            let err = generate_table(meta, &parents, &small_config(), &SeededRng::new(0)).unwrap_err();
            assert!(matches!(err, Error::Orchestration(_)));
        }
    }

    #[test]
    fn parentless_paths_agree() {
        let config = small_config();
        let meta = TableMeta {
            name: "table_1".into(),
            kind: TableKind::Activity,
            num_rows: 300,
            num_feature_columns: 7,
            fk_parents: Vec::new(),
            has_timestamp: true,
        };
        let rng = SeededRng::new(21);
        assert_eq!(
            generate_table(&meta, &[], &config, &rng).unwrap(),
            generate_parentless_table(&meta, &config, &rng).unwrap()
        );
    }
}
