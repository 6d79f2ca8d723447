//! Masked-cell prediction contexts built by bounded, relation-aware BFS.
//!
//! A context starts at the row of a seed feature cell, always follows links
//! from a row to its parents and subsamples links to children. Rows are added
//! whole until the next row would overflow the token budget. Rows later than
//! the seed row are never admitted; rows without a timestamp count as `-inf`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::db::{CellValue, ColumnType, RelationalDatabase};
use crate::error::{Error, Result};
use crate::io::format_timestamp;
use crate::rng::{split_seed, SeededRng};
use crate::schema::TIMESTAMP_COLUMN;

pub const DEFAULT_CONTEXT_LEN: usize = 1024;
pub const DEFAULT_WIDTH: usize = 128;

/// `(table, 0-based row)`.
pub type RowRef = (usize, usize);

/// `(child table, key column, child rows per parent row)`.
type ChildLinks = (usize, usize, Vec<Vec<u32>>);

/// Child rows of every parent row, per (child table, key column).
#[derive(Clone, Debug)]
pub struct RelationIndex {
    children: Vec<Vec<ChildLinks>>,
}

impl RelationIndex {
    pub fn new(db: &RelationalDatabase) -> Self {
        let mut children: Vec<Vec<ChildLinks>> = vec![Vec::new(); db.tables.len()];
        for (c, table) in db.tables.iter().enumerate() {
            for (k, fk) in table.foreign_keys.iter().enumerate() {
                let mut per_parent = vec![Vec::new(); db.tables[fk.parent].num_rows];
                for (i, &p) in fk.values.iter().enumerate() {
                    per_parent[p as usize - 1].push(i as u32);
                }
                children[fk.parent].push((c, k, per_parent));
            }
        }
        Self { children }
    }

    /// Distinct child rows of `(table, row)` in `(table, row)` order.
    pub fn children_of(&self, (table, row): RowRef) -> Vec<RowRef> {
        let mut out: Vec<RowRef> = self.children[table]
            .iter()
            .flat_map(|(c, _, per_parent)| per_parent[row].iter().map(move |&i| (*c, i as usize)))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Distinct parent rows of `(table, row)` in `(table, row)` order.
pub fn parents_of(db: &RelationalDatabase, (table, row): RowRef) -> Vec<RowRef> {
    let mut out: Vec<RowRef> = db.tables[table]
        .foreign_keys
        .iter()
        .map(|fk| (fk.parent, fk.values[row] as usize - 1))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Column of a cell token: a feature column index or the timestamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellColumn {
    Feature(usize),
    Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellToken {
    pub table: usize,
    pub column: CellColumn,
    pub row: usize,
    pub value: CellValue,
    pub masked: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedCell {
    pub table: usize,
    pub column: usize,
    pub row: usize,
}

/// A foreign-key link between two included rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub child: RowRef,
    pub key_column: usize,
    pub parent: RowRef,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextExample {
    pub db_id: usize,
    pub seed: SeedCell,
    pub tokens: Vec<CellToken>,
    pub target: CellValue,
    /// Included rows in BFS order.
    pub rows: Vec<RowRef>,
    pub links: Vec<Link>,
}

impl ContextExample {
    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }
}

/// Sort key of a row's timestamp; rows without one are `-inf`.
fn row_time(db: &RelationalDatabase, (table, row): RowRef) -> i64 {
    db.tables[table].timestamp(row).unwrap_or(i64::MIN)
}

/// Tokens one row contributes: all feature cells plus its timestamp.
pub fn row_tokens(db: &RelationalDatabase, table: usize) -> usize {
    let t = &db.tables[table];
    t.features.len() + usize::from(t.timestamps.is_some())
}

/// Builds the context of `seed` with budget `budget` and fan-out `width`.
pub fn bfs_context(
    db: &RelationalDatabase,
    index: &RelationIndex,
    db_id: usize,
    seed: SeedCell,
    budget: usize,
    width: usize,
    rng: &mut SeededRng,
) -> Result<ContextExample> {
    let table = db
        .tables
        .get(seed.table)
        .ok_or_else(|| Error::Usage(format!("no table {}", seed.table)))?;
    let column = table
        .features
        .get(seed.column)
        .ok_or_else(|| Error::Usage(format!("column {} of {} is not a feature column", seed.column, table.name)))?;
    if seed.row >= table.num_rows {
        return Err(Error::Usage(format!("row {} outside {}", seed.row + 1, table.name)));
    }
    if row_tokens(db, seed.table) > budget {
        return Err(Error::Usage(format!("budget {budget} cannot hold the seed row")));
    }
    if width == 0 {
        return Err(Error::Usage("fan-out width must be positive".into()));
    }
    let target = column.cell(seed.row);
    let seed_row = (seed.table, seed.row);
    let horizon = row_time(db, seed_row);

    let mut queue = VecDeque::from([seed_row]);
    let mut seen: HashSet<RowRef> = HashSet::from([seed_row]);
    let mut child_count: HashMap<RowRef, usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut tokens = Vec::new();
    while let Some(row) = queue.pop_front() {
        let size = row_tokens(db, row.0);
        if tokens.len() + size > budget {
            break;
        }
        let parents = parents_of(db, row);
        if parents.iter().any(|p| child_count.get(p).copied().unwrap_or(0) >= width) {
            continue;
        }
        for p in &parents {
            *child_count.entry(*p).or_default() += 1;
        }
        push_row_tokens(db, row, seed, &mut tokens);
        rows.push(row);

        for p in parents {
            if row_time(db, p) <= horizon && seen.insert(p) {
                queue.push_back(p);
            }
        }
        let capacity = width - child_count.get(&row).copied().unwrap_or(0).min(width);
        let candidates: Vec<RowRef> = index
            .children_of(row)
            .into_iter()
            .filter(|c| !seen.contains(c) && row_time(db, *c) <= horizon)
            .collect();
        let mut picked: Vec<RowRef> = if candidates.len() > capacity {
            rng.sample_indices(candidates.len(), capacity)
                .into_iter()
                .map(|i| candidates[i])
                .collect()
        } else {
            candidates
        };
        picked.sort_unstable();
        for c in picked {
            seen.insert(c);
            queue.push_back(c);
        }
    }

    let included: HashSet<RowRef> = rows.iter().copied().collect();
    let mut links = Vec::new();
    for &(t, r) in &rows {
        for (k, fk) in db.tables[t].foreign_keys.iter().enumerate() {
            let parent = (fk.parent, fk.values[r] as usize - 1);
            if included.contains(&parent) {
                links.push(Link {
                    child: (t, r),
                    key_column: k,
                    parent,
                });
            }
        }
    }
    Ok(ContextExample {
        db_id,
        seed,
        tokens,
        target,
        rows,
        links,
    })
}

fn push_row_tokens(db: &RelationalDatabase, (t, r): RowRef, seed: SeedCell, tokens: &mut Vec<CellToken>) {
    let table = &db.tables[t];
    for (c, col) in table.features.iter().enumerate() {
        let masked = t == seed.table && r == seed.row && c == seed.column;
        tokens.push(CellToken {
            table: t,
            column: CellColumn::Feature(c),
            row: r,
            value: if masked { CellValue::Null } else { col.cell(r) },
            masked,
        });
    }
    if let Some(ts) = table.timestamp(r) {
        tokens.push(CellToken {
            table: t,
            column: CellColumn::Timestamp,
            row: r,
            value: CellValue::Timestamp(ts),
            masked: false,
        });
    }
}

/// Samples `(database, non-NULL feature cell)` pairs uniformly with
/// replacement and yields contexts until `target_tokens` tokens are emitted.
pub struct CorpusBuilder<'a> {
    dbs: &'a [RelationalDatabase],
    indexes: Vec<RelationIndex>,
    /// Databases with at least one non-NULL feature cell.
    usable: Vec<usize>,
    budget: usize,
    width: usize,
    seed: u64,
    target_tokens: usize,
    emitted: usize,
    examples: u64,
}

pub fn build_corpus(
    dbs: &[RelationalDatabase],
    target_tokens: usize,
    budget: usize,
    width: usize,
    seed: u64,
) -> Result<CorpusBuilder<'_>> {
    let usable: Vec<usize> = (0..dbs.len())
        .filter(|&i| dbs[i].feature_cell_count() > dbs[i].null_count())
        .collect();
    if usable.is_empty() {
        return Err(Error::Config("no database has a non-NULL feature cell".into()));
    }
    Ok(CorpusBuilder {
        dbs,
        indexes: dbs.iter().map(RelationIndex::new).collect(),
        usable,
        budget,
        width,
        seed,
        target_tokens,
        emitted: 0,
        examples: 0,
    })
}

impl CorpusBuilder<'_> {
    pub fn emitted_tokens(&self) -> usize {
        self.emitted
    }

    fn sample_seed(&self, db: &RelationalDatabase, rng: &mut SeededRng) -> SeedCell {
        let total = db.feature_cell_count();
        loop {
            let mut k = rng.index(total);
            for (t, table) in db.tables.iter().enumerate() {
                let cells = table.feature_cell_count();
                if k < cells {
                    let (row, column) = (k / table.features.len(), k % table.features.len());
                    if !table.features[column].nulls[row] {
                        return SeedCell { table: t, column, row };
                    }
                    break;
                }
                k -= cells;
            }
        }
    }

    fn next_example(&mut self) -> Result<ContextExample> {
        let mut rng = SeededRng::new(split_seed(self.seed, self.examples));
        self.examples += 1;
        let db_id = self.usable[rng.index(self.usable.len())];
        let db = &self.dbs[db_id];
        let seed = self.sample_seed(db, &mut rng);
        bfs_context(db, &self.indexes[db_id], db_id, seed, self.budget, self.width, &mut rng)
    }
}

impl Iterator for CorpusBuilder<'_> {
    type Item = Result<ContextExample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.emitted >= self.target_tokens {
            return None;
        }
        let example = self.next_example();
        match &example {
            Ok(e) => self.emitted += e.num_tokens(),
            Err(_) => self.emitted = self.target_tokens,
        }
        Some(example)
    }
}

#[derive(Serialize)]
struct WireSeed<'a> {
    table: &'a str,
    column: &'a str,
    row: usize,
}

#[derive(Serialize)]
struct WireToken<'a> {
    t: &'a str,
    c: &'a str,
    r: usize,
    v: Value,
    #[serde(rename = "type")]
    kind: &'static str,
    masked: bool,
}

#[derive(Serialize)]
struct WireTarget {
    v: Value,
    #[serde(rename = "type")]
    kind: &'static str,
}

#[derive(Serialize)]
struct WireLink<'a> {
    child: (&'a str, usize),
    column: &'a str,
    parent: (&'a str, usize),
}

#[derive(Serialize)]
struct WireExample<'a> {
    db_id: usize,
    seed: WireSeed<'a>,
    tokens: Vec<WireToken<'a>>,
    target: WireTarget,
    n_tokens: usize,
    rows: Vec<(&'a str, usize)>,
    links: Vec<WireLink<'a>>,
}

/// JSON value of a cell: numerics as decimal strings, categories as
/// integers, timestamps as ISO-8601 and NULL as `null`.
pub fn wire_value(value: CellValue) -> Value {
    match value {
        CellValue::Numeric(v) => Value::String(v.to_string()),
        CellValue::Categorical(c) => Value::from(c),
        CellValue::Timestamp(ts) => Value::String(format_timestamp(ts)),
        CellValue::Null => Value::Null,
    }
}

fn type_name(dtype: ColumnType) -> &'static str {
    match dtype {
        ColumnType::Numeric => "numeric",
        ColumnType::Categorical { .. } => "categorical",
    }
}

impl ContextExample {
    /// One JSON line (without the trailing newline).
    pub fn to_json_line(&self, db: &RelationalDatabase) -> Result<String> {
        let name = |t: usize| db.tables[t].name.as_str();
        let seed_col = &db.tables[self.seed.table].features[self.seed.column];
        let tokens = self
            .tokens
            .iter()
            .map(|tok| {
                let (c, kind) = match tok.column {
                    CellColumn::Feature(i) => {
                        let col = &db.tables[tok.table].features[i];
                        (col.name.as_str(), type_name(col.dtype))
                    }
                    CellColumn::Timestamp => (TIMESTAMP_COLUMN, "timestamp"),
                };
                WireToken {
                    t: name(tok.table),
                    c,
                    r: tok.row + 1,
                    v: wire_value(tok.value),
                    kind,
                    masked: tok.masked,
                }
            })
            .collect();
        let wire = WireExample {
            db_id: self.db_id,
            seed: WireSeed {
                table: name(self.seed.table),
                column: &seed_col.name,
                row: self.seed.row + 1,
            },
            tokens,
            target: WireTarget {
                v: wire_value(self.target),
                kind: type_name(seed_col.dtype),
            },
            n_tokens: self.num_tokens(),
            rows: self.rows.iter().map(|&(t, r)| (name(t), r + 1)).collect(),
            links: self
                .links
                .iter()
                .map(|l| WireLink {
                    child: (name(l.child.0), l.child.1 + 1),
                    column: &db.tables[l.child.0].foreign_keys[l.key_column].name,
                    parent: (name(l.parent.0), l.parent.1 + 1),
                })
                .collect(),
        };
        serde_json::to_string(&wire).map_err(|e| Error::Usage(format!("cannot encode context: {e}")))
    }
}

/// Streams a corpus as JSON lines and returns the emitted token count.
pub fn write_corpus<W: Write>(builder: CorpusBuilder<'_>, out: &mut W) -> Result<usize> {
    let dbs = builder.dbs;
    let mut total = 0;
    for example in builder {
        let example = example?;
        total += example.num_tokens();
        let line = example.to_json_line(&dbs[example.db_id])?;
        writeln!(out, "{line}").map_err(|e| Error::io("<corpus>", e))?;
    }
    Ok(total)
}
