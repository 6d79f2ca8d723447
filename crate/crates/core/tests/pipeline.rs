//! End-to-end properties of the public pipeline on small configs.

use proptest::prelude::*;
use relsynth::io::{read_database, write_database, DbMeta, SchemaFile};
use relsynth::schema::{sample_schema, TableKind};
use relsynth::{generate_database, GenConfig, Prior, SeededRng};

fn small(tables: usize) -> GenConfig {
    GenConfig {
        num_tables: Prior::constant(tables),
        rows_entity: Prior::range(20, 80),
        rows_activity: Prior::range(50, 200),
        ..GenConfig::default()
    }
}

#[test]
fn thousand_default_schemas_satisfy_invariants() {
    let config = GenConfig::default();
    for seed in 0..1000u64 {
        let schema = sample_schema(&config, &mut SeededRng::new(seed)).unwrap();
        schema.validate().unwrap();
        let n = schema.num_tables();
        assert!((3..=20).contains(&n));
        let order = schema.dag.topological_order().unwrap();
        let mut position = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            position[v] = i;
        }
        for &(p, c) in schema.dag.edges() {
            assert!(position[p] < position[c], "seed {seed}");
        }
        for (t, meta) in schema.tables.iter().enumerate() {
            let entity = schema.dag.out_degree(t) >= 1;
            assert_eq!(meta.kind == TableKind::Entity, entity);
            assert_eq!(meta.has_timestamp, !entity);
            let mut parents = meta.fk_parents.clone();
            parents.sort_unstable();
            assert_eq!(parents, schema.dag.predecessors(t));
        }
    }
}

#[test]
fn disk_round_trip_preserves_every_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small(5);
    let db = generate_database(&config, 77).unwrap();
    let meta = DbMeta {
        index: 0,
        master_seed: 1,
        db_seed: 77,
        null_fraction: db.null_fraction,
        config: config.clone(),
    };
    write_database(&db, &meta, tmp.path()).unwrap();
    let back = read_database(tmp.path()).unwrap();
    assert_eq!(SchemaFile::from_database(&back), SchemaFile::from_database(&db));
    for (a, b) in db.tables.iter().zip(&back.tables) {
        assert_eq!(a.timestamps, b.timestamps);
        for (x, y) in a.foreign_keys.iter().zip(&b.foreign_keys) {
            assert_eq!(x.values, y.values);
        }
        for (x, y) in a.features.iter().zip(&b.features) {
            assert_eq!(x.nulls, y.nulls);
            let bits = |c: &relsynth::db::FeatureColumn| c.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(x), bits(y));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_databases_are_well_formed(seed in any::<u64>(), tables in 3usize..7) {
        let db = generate_database(&small(tables), seed).unwrap();
        prop_assert_eq!(db.tables.len(), tables);
        prop_assert_eq!(db.fk_violations(), 0);
        for t in &db.tables {
            for c in &t.features {
                prop_assert_eq!(c.values.len(), t.num_rows);
                prop_assert!(c.values.iter().all(|v| v.is_finite()));
            }
            if let Some(ts) = &t.timestamps {
                prop_assert!(ts.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>()) {
        let a = generate_database(&small(4), seed).unwrap();
        let b = generate_database(&small(4), seed).unwrap();
        prop_assert_eq!(SchemaFile::from_database(&a), SchemaFile::from_database(&b));
        for (x, y) in a.tables.iter().zip(&b.tables) {
            prop_assert_eq!(&x.timestamps, &y.timestamps);
            for (p, q) in x.features.iter().zip(&y.features) {
                prop_assert!(p.values.iter().zip(&q.values).all(|(u, v)| u.to_bits() == v.to_bits()));
                prop_assert_eq!(&p.nulls, &q.nulls);
            }
        }
    }
}
