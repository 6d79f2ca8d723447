//! Stage 1: the schema graph and per-table metadata.

use serde::{Deserialize, Serialize};

use crate::config::GenConfig;
use crate::error::{Error, Result};
use crate::graphs::{sample_dag, Dag, DagParams};
use crate::rng::SeededRng;

pub const PRIMARY_KEY_COLUMN: &str = "row_idx";
pub const TIMESTAMP_COLUMN: &str = "timestamp";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    /// Referenced by at least one other table.
    Entity,
    Activity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableMeta {
    pub name: String,
    pub kind: TableKind,
    pub num_rows: usize,
    pub num_feature_columns: usize,
    /// Parent table indices, ascending. Foreign key `t` (1-based) references
    /// `fk_parents[t - 1]`.
    pub fk_parents: Vec<usize>,
    pub has_timestamp: bool,
}

impl TableMeta {
    pub fn feature_column_name(i: usize) -> String {
        format!("feature_{i}")
    }

    pub fn fk_column_name(t: usize) -> String {
        format!("foreign_row_{t}")
    }

    pub fn table_name(index: usize) -> String {
        format!("table_{}", index + 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemaGraph {
    pub dag: Dag,
    pub tables: Vec<TableMeta>,
}

impl SchemaGraph {
    pub fn num_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name == name)
    }

    /// Checks every structural invariant of a completed schema.
    pub fn validate(&self) -> Result<()> {
        if self.tables.len() != self.dag.num_nodes() {
            return Err(Error::Structural("table count does not match graph".into()));
        }
        self.dag.topological_order()?;
        for (i, t) in self.tables.iter().enumerate() {
            if t.fk_parents != self.dag.predecessors(i) {
                return Err(Error::Structural(format!("{}: foreign keys differ from predecessors", t.name)));
            }
            let expected = if self.dag.out_degree(i) >= 1 {
                TableKind::Entity
            } else {
                TableKind::Activity
            };
            if t.kind != expected {
                return Err(Error::Structural(format!("{}: kind contradicts out-degree", t.name)));
            }
            if t.has_timestamp != (t.kind == TableKind::Activity) {
                return Err(Error::Structural(format!("{}: timestamp flag contradicts kind", t.name)));
            }
            if t.num_rows == 0 {
                return Err(Error::Structural(format!("{}: no rows", t.name)));
            }
        }
        Ok(())
    }
}

/// Samples the schema DAG (edges only).
pub fn sample_schema_graph(config: &GenConfig, rng: &mut SeededRng) -> Result<Dag> {
    let n = config.num_tables.draw(rng)?;
    let family = config.schema_graph_prior.draw(rng)?;
    let params = DagParams::draw(config, rng)?;
    sample_dag(family, n, &params, rng)
}

/// Classifies tables and draws their row and column counts, visiting tables
/// in generation order.
pub fn assign_table_metadata(dag: Dag, config: &GenConfig, rng: &mut SeededRng) -> Result<SchemaGraph> {
    let n = dag.num_nodes();
    let mut tables: Vec<Option<TableMeta>> = vec![None; n];
    for v in dag.topological_order()? {
        let fk_parents = dag.predecessors(v);
        let num_feature_columns = config.num_columns.draw(rng)?;
        let kind = if dag.out_degree(v) >= 1 {
            TableKind::Entity
        } else {
            TableKind::Activity
        };
        let num_rows = match kind {
            TableKind::Entity => config.rows_entity.draw(rng)?,
            TableKind::Activity => config.rows_activity.draw(rng)?,
        };
        tables[v] = Some(TableMeta {
            name: TableMeta::table_name(v),
            kind,
            num_rows,
            num_feature_columns,
            fk_parents,
            has_timestamp: kind == TableKind::Activity,
        });
    }
    Ok(SchemaGraph {
        dag,
        tables: tables.into_iter().map(|t| t.expect("every node visited")).collect(),
    })
}

/// Parents before children; ties broken by table index.
pub fn topological_order(schema: &SchemaGraph) -> Result<Vec<usize>> {
    schema.dag.topological_order()
}

pub fn sample_schema(config: &GenConfig, rng: &mut SeededRng) -> Result<SchemaGraph> {
    let dag = sample_schema_graph(config, rng)?;
    assign_table_metadata(dag, config, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::GraphFamily;
    use crate::prior::Prior;

    #[test]
    fn metadata_follows_degrees() {
        // 0 -> 1, 0 -> 2, 1 -> 3, 2 -> 3, 4 -> 3
        let dag = Dag::new(5, [(0, 1), (0, 2), (1, 3), (2, 3), (4, 3)]).unwrap();
        let schema = assign_table_metadata(dag, &GenConfig::default(), &mut SeededRng::new(0)).unwrap();
        schema.validate().unwrap();
        assert_eq!(schema.tables[0].kind, TableKind::Entity);
        let sink = &schema.tables[3];
        assert_eq!(sink.kind, TableKind::Activity);
        assert!((2000..=5000).contains(&sink.num_rows));
        assert_eq!(sink.fk_parents, vec![1, 2, 4]);
        let names: Vec<String> = (1..=sink.fk_parents.len()).map(TableMeta::fk_column_name).collect();
        assert_eq!(names, ["foreign_row_1", "foreign_row_2", "foreign_row_3"]);
        for t in &schema.tables {
            assert!((3..=40).contains(&t.num_feature_columns));
            if t.kind == TableKind::Entity {
                assert!((500..=1000).contains(&t.num_rows));
                assert!(!t.has_timestamp);
            }
        }
    }

    #[test]
    fn sampled_schemas_hold_invariants() {
        let config = GenConfig::default();
        let mut rng = SeededRng::new(77);
        for _ in 0..1000 {
            let schema = sample_schema(&config, &mut rng).unwrap();
            schema.validate().unwrap();
            assert!((3..=20).contains(&schema.num_tables()));
            for t in &schema.tables {
                assert!((3..=40).contains(&t.num_feature_columns));
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let config = GenConfig::default();
        let a = sample_schema(&config, &mut SeededRng::new(5)).unwrap();
        let b = sample_schema(&config, &mut SeededRng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ba_schema_edge_count_matches_dropout() {
        // Oracle: star on 3 nodes plus 2 edges for each of the 7 later nodes
        // gives 16 edges before dropout; each survives with probability 0.6.
        let config = GenConfig {
            num_tables: Prior::constant(10),
            schema_graph_prior: Prior::constant(GraphFamily::BarabasiAlbert),
            ..GenConfig::default()
        };
        let mut rng = SeededRng::new(13);
        let trials = 1000;
        let total: usize = (0..trials)
            .map(|_| sample_schema_graph(&config, &mut rng).unwrap().edges().len())
            .sum();
        let mean = total as f64 / trials as f64;
        let expected = 16.0 * 0.6;
        assert!((mean - expected).abs() < 0.1 * expected, "mean edges {mean}");
    }
}
