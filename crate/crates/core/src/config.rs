//! Generator hyperparameters.
//!
//! [`GenConfig::default`] is the reference prior table. A config file is TOML
//! keyed by the table's row names; rows that are left out keep their default.
//!
//! ```toml
//! ["Num tables"]
//! kind = "range-uniform"
//! range = [3, 20]
//! ```

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::GraphFamily;
use crate::neural::{Activation, InitScheme};
use crate::prior::{Prior, PriorValue, DEFAULT_POWER_LAW_EXPONENT};

/// Beta(alpha, beta) parameters, written `[alpha, beta]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPair(pub f64, pub f64);

impl BetaPair {
    pub fn alpha(&self) -> f64 {
        self.0
    }

    pub fn beta(&self) -> f64 {
        self.1
    }
}

impl PriorValue for BetaPair {}
impl PriorValue for GraphFamily {}
impl PriorValue for InitScheme {}
impl PriorValue for Activation {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    // Database level.
    #[serde(rename = "Schema graph priors")]
    pub schema_graph_prior: Prior<GraphFamily>,
    #[serde(rename = "Num tables")]
    pub num_tables: Prior<usize>,
    #[serde(rename = "Num rows (entity tables)")]
    pub rows_entity: Prior<usize>,
    #[serde(rename = "Num rows (activity tables)")]
    pub rows_activity: Prior<usize>,
    #[serde(rename = "Num columns")]
    pub num_columns: Prior<usize>,
    #[serde(rename = "Min timestamp")]
    pub timestamp_min: Prior<NaiveDate>,
    #[serde(rename = "Max timestamp")]
    pub timestamp_max: Prior<NaiveDate>,
    #[serde(rename = "NULL cells (fraction)")]
    pub null_fraction: Prior<f64>,

    // Table / SCM level.
    #[serde(rename = "SCM causal graph prior")]
    pub scm_graph_prior: Prior<GraphFamily>,
    #[serde(rename = "SCM feature node fraction")]
    pub feature_node_fraction: Prior<f64>,
    #[serde(rename = "Num categories")]
    pub num_categories: Prior<usize>,
    #[serde(rename = "MLP initializations")]
    pub mlp_init: Prior<InitScheme>,
    #[serde(rename = "MLP activations")]
    pub mlp_activation: Prior<Activation>,
    #[serde(rename = "MLP input dimension")]
    pub mlp_input_dim: Prior<usize>,
    #[serde(rename = "MLP hidden dimension")]
    pub mlp_hidden_dim: Prior<usize>,
    #[serde(rename = "MLP output dimension")]
    pub mlp_output_dim: Prior<usize>,
    #[serde(rename = "MLP depth")]
    pub mlp_depth: Prior<usize>,
    #[serde(rename = "Exogenous input prior")]
    pub exogenous_prior: Prior<BetaPair>,
    #[serde(rename = "HSBM levels")]
    pub hsbm_levels: Prior<usize>,
    #[serde(rename = "HSBM clusters per level")]
    pub hsbm_clusters_per_level: Prior<usize>,

    // Temporal exogenous inputs.
    #[serde(rename = "Temporal trend exponent")]
    pub trend_exponent: Prior<f64>,
    #[serde(rename = "Temporal trend scale (activity table)")]
    pub trend_scale_activity: Prior<f64>,
    #[serde(rename = "Temporal trend scale (entity table)")]
    pub trend_scale_entity: Prior<f64>,
    #[serde(rename = "Temporal trend offset")]
    pub trend_offset: Prior<f64>,
    #[serde(rename = "Temporal trend upper bound")]
    pub trend_upper: Prior<f64>,
    #[serde(rename = "Temporal cycle frequency")]
    pub cycle_frequency: Prior<f64>,
    #[serde(rename = "Temporal cycle scale (activity table)")]
    pub cycle_scale_activity: Prior<f64>,
    #[serde(rename = "Temporal cycle scale (entity table)")]
    pub cycle_scale_entity: Prior<f64>,
    #[serde(rename = "Temporal cycle lower bound")]
    pub cycle_lower: Prior<f64>,
    #[serde(rename = "Temporal cycle upper bound")]
    pub cycle_upper: Prior<f64>,
    #[serde(rename = "Temporal noise scale (activity table)")]
    pub noise_scale_activity: Prior<f64>,
    #[serde(rename = "Temporal noise scale (entity table)")]
    pub noise_scale_entity: Prior<f64>,
    #[serde(rename = "Temporal noise lower bound")]
    pub noise_lower: Prior<f64>,
    #[serde(rename = "Temporal noise upper bound")]
    pub noise_upper: Prior<f64>,

    // DAG family parameters.
    #[serde(rename = "Barabasi-Albert: edge dropout")]
    pub ba_edge_dropout: Prior<f64>,
    #[serde(rename = "Barabasi-Albert: node attachment edges")]
    pub ba_attachment: Prior<usize>,
    #[serde(rename = "Erdos-Renyi: edge probability")]
    pub er_edge_prob: Prior<f64>,
    #[serde(rename = "Watts-Strogatz: rewire probability")]
    pub ws_rewire_prob: Prior<f64>,
    #[serde(rename = "Watts-Strogatz: ring degree")]
    pub ws_ring_degree: Prior<usize>,
    #[serde(rename = "Layered: number of levels (depth)")]
    pub layered_depth: Prior<usize>,
    #[serde(rename = "Layered: edge dropout")]
    pub layered_edge_dropout: Prior<f64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        use GraphFamily::*;
        let date = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date");
        Self {
            schema_graph_prior: Prior::set([BarabasiAlbert, ReverseRandomTree, WattsStrogatz]),
            num_tables: Prior::range(3, 20),
            rows_entity: Prior::range(500, 1000),
            rows_activity: Prior::range(2000, 5000),
            num_columns: Prior::RangePowerLaw {
                range: [3, 40],
                exponent: DEFAULT_POWER_LAW_EXPONENT,
            },
            timestamp_min: Prior::constant(date(1990, 1, 1)),
            timestamp_max: Prior::constant(date(2025, 1, 1)),
            null_fraction: Prior::range(0.01, 0.1),

            scm_graph_prior: Prior::set([
                Layered,
                ErdosRenyi,
                BarabasiAlbert,
                RandomTree,
                ReverseRandomTree,
            ]),
            feature_node_fraction: Prior::range(0.3, 0.9),
            num_categories: Prior::range(2, 10),
            mlp_init: Prior::set([
                InitScheme::KaimingNormal,
                InitScheme::KaimingUniform,
                InitScheme::XavierNormal,
                InitScheme::XavierUniform,
                InitScheme::TruncNormal,
                InitScheme::Sparse(0.5),
            ]),
            mlp_activation: Prior::set([
                Activation::Relu,
                Activation::Elu,
                Activation::Silu,
                Activation::Softsign,
                Activation::Tanh,
            ]),
            mlp_input_dim: Prior::constant(1),
            mlp_hidden_dim: Prior::constant(32),
            mlp_output_dim: Prior::constant(1),
            mlp_depth: Prior::constant(2),
            exogenous_prior: Prior::set([
                BetaPair(0.5, 0.5),
                BetaPair(2.0, 2.0),
                BetaPair(2.0, 3.0),
                BetaPair(2.0, 4.0),
                BetaPair(4.0, 1.0),
            ]),
            hsbm_levels: Prior::range(1, 5),
            hsbm_clusters_per_level: Prior::range(1, 3),

            trend_exponent: Prior::range(0.0, 2.0),
            trend_scale_activity: Prior::range(-1.0, 1.0),
            trend_scale_entity: Prior::constant(0.0),
            trend_offset: Prior::constant(0.0),
            trend_upper: Prior::constant(3.0),
            cycle_frequency: Prior::set((1..=10).map(|k| k as f64 / 10.0)),
            cycle_scale_activity: Prior::range(-1.0, 1.0),
            cycle_scale_entity: Prior::constant(0.0),
            cycle_lower: Prior::constant(-1.0),
            cycle_upper: Prior::constant(1.0),
            noise_scale_activity: Prior::constant(0.05),
            noise_scale_entity: Prior::constant(1.0),
            noise_lower: Prior::constant(-3.0),
            noise_upper: Prior::constant(3.0),

            ba_edge_dropout: Prior::constant(0.4),
            ba_attachment: Prior::constant(2),
            er_edge_prob: Prior::range(0.3, 0.8),
            ws_rewire_prob: Prior::range(0.1, 0.3),
            ws_ring_degree: Prior::constant(2),
            layered_depth: Prior::range(2, 8),
            layered_edge_dropout: Prior::constant(0.1),
        }
    }
}

fn check<T: PriorValue>(name: &str, prior: &Prior<T>) -> Result<()> {
    prior
        .validate()
        .map_err(|e| Error::Config(format!("{name}: {e}")))
}

fn check_within(name: &str, prior: &Prior<f64>, lo: f64, hi: f64) -> Result<()> {
    check(name, prior)?;
    match prior.bounds() {
        Some((a, b)) if a >= lo && b <= hi => Ok(()),
        _ => Err(Error::Config(format!("{name}: support must lie within [{lo}, {hi}]"))),
    }
}

fn check_at_least(name: &str, prior: &Prior<usize>, min: usize) -> Result<()> {
    check(name, prior)?;
    match prior.bounds() {
        Some((a, _)) if a >= min => Ok(()),
        _ => Err(Error::Config(format!("{name}: every value must be at least {min}"))),
    }
}

impl GenConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: GenConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check("Schema graph priors", &self.schema_graph_prior)?;
        check_at_least("Num tables", &self.num_tables, 1)?;
        check_at_least("Num rows (entity tables)", &self.rows_entity, 1)?;
        check_at_least("Num rows (activity tables)", &self.rows_activity, 1)?;
        check_at_least("Num columns", &self.num_columns, 1)?;
        check("Min timestamp", &self.timestamp_min)?;
        check("Max timestamp", &self.timestamp_max)?;
        if let (Some(mins), Some(maxs)) = (self.timestamp_min.choices(), self.timestamp_max.choices()) {
            let latest_min = mins.iter().max();
            let earliest_max = maxs.iter().min();
            if let (Some(a), Some(b)) = (latest_min, earliest_max) {
                if a >= b {
                    return Err(Error::Config(format!(
                        "Min timestamp {a} must precede Max timestamp {b}"
                    )));
                }
            }
        }
        check_within("NULL cells (fraction)", &self.null_fraction, 0.0, 1.0)?;

        check("SCM causal graph prior", &self.scm_graph_prior)?;
        check_within("SCM feature node fraction", &self.feature_node_fraction, 1e-6, 1.0)?;
        check_at_least("Num categories", &self.num_categories, 2)?;
        check("MLP initializations", &self.mlp_init)?;
        check("MLP activations", &self.mlp_activation)?;
        check_at_least("MLP input dimension", &self.mlp_input_dim, 1)?;
        check_at_least("MLP hidden dimension", &self.mlp_hidden_dim, 1)?;
        check_at_least("MLP output dimension", &self.mlp_output_dim, 1)?;
        check_at_least("MLP depth", &self.mlp_depth, 1)?;
        check("Exogenous input prior", &self.exogenous_prior)?;
        if let Some(pairs) = self.exogenous_prior.choices() {
            if let Some(bad) = pairs.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
                return Err(Error::Config(format!(
                    "Exogenous input prior: Beta{bad:?} needs positive parameters"
                )));
            }
        }
        check_at_least("HSBM levels", &self.hsbm_levels, 1)?;
        check_at_least("HSBM clusters per level", &self.hsbm_clusters_per_level, 1)?;

        check("Temporal trend exponent", &self.trend_exponent)?;
        check("Temporal trend scale (activity table)", &self.trend_scale_activity)?;
        check("Temporal trend scale (entity table)", &self.trend_scale_entity)?;
        check("Temporal trend offset", &self.trend_offset)?;
        check("Temporal trend upper bound", &self.trend_upper)?;
        check_within("Temporal cycle frequency", &self.cycle_frequency, 1e-9, f64::MAX)?;
        check("Temporal cycle scale (activity table)", &self.cycle_scale_activity)?;
        check("Temporal cycle scale (entity table)", &self.cycle_scale_entity)?;
        check("Temporal cycle lower bound", &self.cycle_lower)?;
        check("Temporal cycle upper bound", &self.cycle_upper)?;
        check("Temporal noise scale (activity table)", &self.noise_scale_activity)?;
        check("Temporal noise scale (entity table)", &self.noise_scale_entity)?;
        check("Temporal noise lower bound", &self.noise_lower)?;
        check("Temporal noise upper bound", &self.noise_upper)?;
        for (name, lower, upper) in [
            ("Temporal cycle", &self.cycle_lower, &self.cycle_upper),
            ("Temporal noise", &self.noise_lower, &self.noise_upper),
        ] {
            if let (Some((_, l)), Some((u, _))) = (lower.bounds(), upper.bounds()) {
                if l > u {
                    return Err(Error::Config(format!("{name}: lower bound exceeds upper bound")));
                }
            }
        }

        check_within("Barabasi-Albert: edge dropout", &self.ba_edge_dropout, 0.0, 1.0)?;
        check_at_least("Barabasi-Albert: node attachment edges", &self.ba_attachment, 1)?;
        check_within("Erdos-Renyi: edge probability", &self.er_edge_prob, 0.0, 1.0)?;
        check_within("Watts-Strogatz: rewire probability", &self.ws_rewire_prob, 0.0, 1.0)?;
        check_at_least("Watts-Strogatz: ring degree", &self.ws_ring_degree, 2)?;
        check_at_least("Layered: number of levels (depth)", &self.layered_depth, 1)?;
        check_within("Layered: edge dropout", &self.layered_edge_dropout, 0.0, 1.0)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let config = GenConfig::default();
        config.validate().unwrap();
        let text = config.to_toml_string();
        assert_eq!(GenConfig::from_toml_str(&text).unwrap(), config);
    }

    #[test]
    fn reference_values() {
        let c = GenConfig::default();
        assert_eq!(c.num_tables, Prior::range(3, 20));
        assert_eq!(c.rows_entity, Prior::range(500, 1000));
        assert_eq!(c.rows_activity, Prior::range(2000, 5000));
        assert_eq!(
            c.timestamp_min,
            Prior::constant(NaiveDate::from_ymd_opt(1990, 1, 1).unwrap())
        );
        assert_eq!(
            c.timestamp_max,
            Prior::constant(NaiveDate::from_ymd_opt(2025, 1, 1).unwrap())
        );
        assert_eq!(c.mlp_hidden_dim, Prior::constant(32));
        assert_eq!(c.mlp_depth, Prior::constant(2));
        assert_eq!(c.ba_edge_dropout, Prior::constant(0.4));
        assert_eq!(c.ba_attachment, Prior::constant(2));
        assert_eq!(c.layered_edge_dropout, Prior::constant(0.1));
        assert_eq!(c.exogenous_prior.choices().unwrap().len(), 5);
        assert_eq!(c.cycle_frequency.choices().unwrap().len(), 10);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let text = r#"
            ["Num tables"]
            kind = "constant"
            value = 4
        "#;
        let c = GenConfig::from_toml_str(text).unwrap();
        assert_eq!(c.num_tables, Prior::constant(4));
        assert_eq!(c.rows_entity, GenConfig::default().rows_entity);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let bad_range = r#"
            ["Num tables"]
            kind = "range-uniform"
            range = [20, 3]
        "#;
        assert!(matches!(GenConfig::from_toml_str(bad_range), Err(Error::Config(_))));
        assert!(GenConfig::from_toml_str("[\"No such row\"]\nkind = \"constant\"\nvalue = 1").is_err());
        let bad_null = r#"
            ["NULL cells (fraction)"]
            kind = "range-uniform"
            range = [0.5, 1.5]
        "#;
        assert!(GenConfig::from_toml_str(bad_null).is_err());
        let bad_dates = r#"
            ["Min timestamp"]
            kind = "constant"
            value = "2030-01-01"
        "#;
        assert!(GenConfig::from_toml_str(bad_dates).is_err());
        let bad_init = r#"
            ["MLP initializations"]
            kind = "set-uniform"
            choices = ["he-magic"]
        "#;
        assert!(GenConfig::from_toml_str(bad_init).is_err());
    }
}
