//! Synthetic relational database generation.
//!
//! A database is produced in three stages: a random DAG of tables, foreign
//! keys drawn from a hierarchical stochastic block model, and feature values
//! from one structural causal model per table whose source nodes follow
//! temporal signals of the row index. Everything is a pure function of a
//! [`GenConfig`] and a 64-bit seed.
//!
//! ```
//! use relsynth::{generate_database, GenConfig, Prior};
//!
//! let config = GenConfig { num_tables: Prior::constant(3), ..GenConfig::default() };
//! let db = generate_database(&config, 42).unwrap();
//! assert_eq!(db.tables.len(), 3);
//! assert_eq!(db.fk_violations(), 0);
//! ```

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod db;
pub mod error;
pub mod fk;
pub mod generate;
pub mod graphs;
pub mod io;
pub mod linalg;
pub mod neural;
pub mod prior;
pub mod rng;
mod scalar;
pub mod schema;
pub mod scm;
pub mod temporal;

pub use config::GenConfig;
pub use db::RelationalDatabase;
pub use error::{Error, Result};
pub use generate::generate_database;
pub use prior::Prior;
pub use rng::{split_seed, SeededRng};
pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type Mlp = neural::TinyMlp<f64>;
pub type Mlp32 = neural::TinyMlp<f32>;
pub type Embedding = neural::EmbeddingMatrix<f64>;
pub type Embedding32 = neural::EmbeddingMatrix<f32>;
pub type BlockMatrices = fk::BlockMatrixStack<f64>;
pub type BlockMatrices32 = fk::BlockMatrixStack<f32>;
pub type Temporal = temporal::TemporalParams<f64>;
pub type Temporal32 = temporal::TemporalParams<f32>;
pub type PowerLaw = analysis::powerlaw::PowerLawFit<f64>;
pub type PowerLaw32 = analysis::powerlaw::PowerLawFit<f32>;
pub type Moments = analysis::diversity::Moments<f64>;
