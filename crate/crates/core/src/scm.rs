//! Stage 3: per-table structural causal models.
//!
//! Source nodes read temporal exogenous signals of the row index. Every other
//! node projects its inputs (in-table predecessors and all feature nodes of
//! the linked parent rows) into a latent space, aggregates them with a random
//! exogenous vector and reconstructs a value of its own type.

use rand_distr::{Beta, Distribution};

use crate::config::{BetaPair, GenConfig};
use crate::db::ColumnType;
use crate::error::{Error, Result};
use crate::graphs::{sample_dag, Dag, DagParams, GraphFamily};
use crate::neural::{EmbeddingMatrix, MlpScratch, TinyMlp};
use crate::rng::SeededRng;
use crate::schema::TableKind;
use crate::temporal::{sample_softmax, temporal_signal, TemporalParams};

#[derive(Clone, Debug, PartialEq)]
pub struct CausalGraph {
    pub family: GraphFamily,
    pub dag: Dag,
    pub node_types: Vec<ColumnType>,
    /// Ascending node ids; feature column `i` is `feature_nodes[i]`.
    pub feature_nodes: Vec<usize>,
    /// `N(0, 1)` weight per edge, aligned with `dag.edges()`.
    pub edge_weights: Vec<f64>,
}

impl CausalGraph {
    pub fn num_nodes(&self) -> usize {
        self.dag.num_nodes()
    }

    pub fn feature_types(&self) -> Vec<ColumnType> {
        self.feature_nodes.iter().map(|&v| self.node_types[v]).collect()
    }
}

/// Total node count for `num_features` feature nodes at fraction `fraction`.
pub fn scm_node_count(num_features: usize, fraction: f64) -> usize {
    let n = (num_features as f64 / fraction - 1e-9).ceil() as usize;
    n.max(3).max(num_features)
}

pub fn sample_causal_graph(num_features: usize, config: &GenConfig, rng: &mut SeededRng) -> Result<CausalGraph> {
    if num_features == 0 {
        return Err(Error::Usage("a causal graph needs at least one feature node".into()));
    }
    let family = config.scm_graph_prior.draw(rng)?;
    let fraction = config.feature_node_fraction.draw(rng)?;
    let n = scm_node_count(num_features, fraction);
    let params = DagParams::draw(config, rng)?;
    let dag = sample_dag(family, n, &params, rng)?;

    let node_types = (0..n)
        .map(|_| {
            Ok(if rng.bernoulli(0.5) {
                ColumnType::Numeric
            } else {
                ColumnType::Categorical {
                    num_categories: config.num_categories.draw(rng)?,
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Prefer non-source nodes as features so columns depend on the graph.
    let (mut sources, mut inner): (Vec<usize>, Vec<usize>) = (0..n).partition(|&v| dag.in_degree(v) == 0);
    rng.shuffle(&mut inner);
    rng.shuffle(&mut sources);
    inner.extend(sources);
    let mut feature_nodes = inner[..num_features].to_vec();
    feature_nodes.sort_unstable();

    let edge_weights = dag.edges().iter().map(|_| rng.normal()).collect();
    Ok(CausalGraph {
        family,
        dag,
        node_types,
        feature_nodes,
        edge_weights,
    })
}

/// Maps one input value into the latent space.
#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    Numeric(TinyMlp<f64>),
    /// `mlp(E_proj[c])` precomputed for each category `c`.
    Categorical(Vec<Vec<f64>>),
}

impl Projection {
    fn sample(dtype: ColumnType, dims: &MlpDims, config: &GenConfig, rng: &mut SeededRng) -> Result<Self> {
        match dtype {
            ColumnType::Numeric => Ok(Projection::Numeric(dims.mlp(1, dims.hidden, config, rng)?)),
            ColumnType::Categorical { num_categories } => {
                let embedding = EmbeddingMatrix::<f64>::random(num_categories, dims.hidden, rng);
                let mlp = dims.mlp(dims.hidden, dims.hidden, config, rng)?;
                let table = (1..=num_categories)
                    .map(|c| mlp.forward(embedding.embed(c)?))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Projection::Categorical(table))
            }
        }
    }

    /// Adds `weight * project(value)` into `acc`.
    #[inline]
    fn accumulate(&self, value: f64, weight: f64, acc: &mut [f64], scratch: &mut MlpScratch<f64>) {
        let e: &[f64] = match self {
            Projection::Numeric(mlp) => mlp.forward_with(&[value], scratch),
            Projection::Categorical(table) => &table[value as usize - 1],
        };
        for (a, v) in acc.iter_mut().zip(e) {
            *a += weight * v;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reconstruction {
    Numeric(TinyMlp<f64>),
    Categorical { mlp: TinyMlp<f64>, decoder: EmbeddingMatrix<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derived {
    /// `(predecessor node, edge weight, projection)`.
    pub inputs: Vec<(usize, f64, Projection)>,
    /// Per foreign-key column, one projection per parent feature column.
    pub foreign: Vec<Vec<Projection>>,
    pub exogenous: BetaPair,
    exogenous_dist: Beta<f64>,
    pub exogenous_weight: f64,
    pub reconstruction: Reconstruction,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mechanism {
    NumericSource(TemporalParams<f64>),
    CategoricalSource(Vec<TemporalParams<f64>>),
    Derived(Box<Derived>),
}

#[derive(Clone, Copy, Debug)]
struct MlpDims {
    hidden: usize,
    depth: usize,
}

impl MlpDims {
    fn mlp(&self, input: usize, output: usize, config: &GenConfig, rng: &mut SeededRng) -> Result<TinyMlp<f64>> {
        let init = config.mlp_init.draw(rng)?;
        let activation = config.mlp_activation.draw(rng)?;
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(self.hidden, self.depth.saturating_sub(1)));
        dims.push(output);
        TinyMlp::random(&dims, init, activation, rng)
    }
}

/// A sampled SCM for one table.
#[derive(Clone, Debug, PartialEq)]
pub struct Scm {
    pub graph: CausalGraph,
    pub mechanisms: Vec<Mechanism>,
    order: Vec<usize>,
    latent_dim: usize,
    foreign_arity: Vec<usize>,
    /// Position of each derived node among the derived nodes.
    derived_slot: Vec<usize>,
}

/// Reusable buffers for row realization.
#[derive(Clone, Debug, Default)]
pub struct RowScratch {
    nodes: Vec<f64>,
    latent: Vec<f64>,
    exogenous: Vec<f64>,
    mlp: MlpScratch<f64>,
}

impl Scm {
    /// `foreign[t]` lists the feature column types of the parent behind
    /// foreign-key column `t`.
    pub fn sample(
        kind: TableKind,
        num_rows: usize,
        num_features: usize,
        foreign: &[Vec<ColumnType>],
        config: &GenConfig,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let graph = sample_causal_graph(num_features, config, rng)?;
        let dims = MlpDims {
            hidden: config.mlp_hidden_dim.draw(rng)?,
            depth: config.mlp_depth.draw(rng)?,
        };
        let edges = graph.dag.edges();
        let mut mechanisms = Vec::with_capacity(graph.num_nodes());
        for v in 0..graph.num_nodes() {
            let preds: Vec<(usize, f64)> = edges
                .iter()
                .zip(&graph.edge_weights)
                .filter(|((_, child), _)| *child == v)
                .map(|(&(parent, _), &w)| (parent, w))
                .collect();
            let mechanism = match (preds.is_empty(), graph.node_types[v]) {
                (true, ColumnType::Numeric) => {
                    Mechanism::NumericSource(TemporalParams::sample(kind, num_rows, config, rng)?)
                }
                (true, ColumnType::Categorical { num_categories }) => Mechanism::CategoricalSource(
                    (0..num_categories)
                        .map(|_| TemporalParams::sample(kind, num_rows, config, rng))
                        .collect::<Result<_>>()?,
                ),
                (false, dtype) => {
                    let inputs = preds
                        .into_iter()
                        .map(|(p, w)| Ok((p, w, Projection::sample(graph.node_types[p], &dims, config, rng)?)))
                        .collect::<Result<Vec<_>>>()?;
                    let foreign = foreign
                        .iter()
                        .map(|types| {
                            types
                                .iter()
                                .map(|&t| Projection::sample(t, &dims, config, rng))
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let exogenous = config.exogenous_prior.draw(rng)?;
                    let exogenous_dist = Beta::new(exogenous.alpha(), exogenous.beta())
                        .map_err(|e| Error::Config(format!("exogenous prior {exogenous:?}: {e}")))?;
                    let exogenous_weight = rng.normal();
                    let reconstruction = match dtype {
                        ColumnType::Numeric => Reconstruction::Numeric(dims.mlp(dims.hidden, 1, config, rng)?),
                        ColumnType::Categorical { num_categories } => Reconstruction::Categorical {
                            mlp: dims.mlp(dims.hidden, dims.hidden, config, rng)?,
                            decoder: EmbeddingMatrix::random(num_categories, dims.hidden, rng),
                        },
                    };
                    Mechanism::Derived(Box::new(Derived {
                        inputs,
                        foreign,
                        exogenous,
                        exogenous_dist,
                        exogenous_weight,
                        reconstruction,
                    }))
                }
            };
            mechanisms.push(mechanism);
        }
        let order = graph.dag.topological_order()?;
        let mut next = 0;
        let derived_slot = mechanisms
            .iter()
            .map(|m| {
                let slot = next;
                if matches!(m, Mechanism::Derived(_)) {
                    next += 1;
                }
                slot
            })
            .collect();
        Ok(Self {
            graph,
            mechanisms,
            order,
            latent_dim: dims.hidden,
            foreign_arity: foreign.iter().map(Vec::len).collect(),
            derived_slot,
        })
    }

    pub fn num_features(&self) -> usize {
        self.graph.feature_nodes.len()
    }

    pub fn feature_types(&self) -> Vec<ColumnType> {
        self.graph.feature_types()
    }

    /// One realization of the SCM for 1-based row `r`. `foreign[t]`
    /// holds the feature values of the parent row linked by key column `t`.
    /// Feature values are written to `out` in column order.
    pub fn realize_row(
        &self,
        foreign: &[&[f64]],
        r: usize,
        rng: &mut SeededRng,
        scratch: &mut RowScratch,
        out: &mut [f64],
    ) -> Result<()> {
        if foreign.len() != self.foreign_arity.len()
            || foreign.iter().zip(&self.foreign_arity).any(|(f, &n)| f.len() != n)
        {
            return Err(Error::Usage(format!(
                "expected parent values of shape {:?}",
                self.foreign_arity
            )));
        }
        let mut latents = vec![Vec::new(); foreign.len()];
        for (t, (values, buf)) in foreign.iter().zip(&mut latents).enumerate() {
            self.foreign_latents(t, values, &mut scratch.mlp, buf);
        }
        let views: Vec<&[f64]> = latents.iter().map(Vec::as_slice).collect();
        self.realize_row_with_latents(&views, r, rng, scratch, out)
    }

    /// Foreign part of the node update for key column `t` and one parent row: for each
    /// derived node in id order, `sum_f proj_f(x_f) / |V^F|` (`latent_dim`
    /// values per node). Depends only on the parent row, so callers may cache.
    pub fn foreign_latents(&self, t: usize, values: &[f64], mlp: &mut MlpScratch<f64>, out: &mut Vec<f64>) {
        out.clear();
        for m in &self.mechanisms {
            if let Mechanism::Derived(d) = m {
                let start = out.len();
                out.resize(start + self.latent_dim, 0.0);
                let projections = &d.foreign[t];
                let weight = 1.0 / projections.len() as f64;
                for (p, &x) in projections.iter().zip(values) {
                    p.accumulate(x, weight, &mut out[start..], mlp);
                }
            }
        }
    }

    /// [`Scm::realize_row`] with the foreign terms precomputed by
    /// [`Scm::foreign_latents`], one slice per key column.
    pub fn realize_row_with_latents(
        &self,
        latents: &[&[f64]],
        r: usize,
        rng: &mut SeededRng,
        scratch: &mut RowScratch,
        out: &mut [f64],
    ) -> Result<()> {
        if latents.len() != self.foreign_arity.len() {
            return Err(Error::Usage(format!("expected {} foreign latents", self.foreign_arity.len())));
        }
        self.prepare(scratch);
        for &v in &self.order {
            let value = match &self.mechanisms[v] {
                Mechanism::Derived(d) => {
                    self.aggregate(d, scratch, rng);
                    let start = self.derived_slot[v] * self.latent_dim;
                    for f in latents {
                        for (l, x) in scratch.latent.iter_mut().zip(&f[start..start + self.latent_dim]) {
                            *l += x;
                        }
                    }
                    self.reconstruct(d, scratch)
                }
                source => self.source_value(source, r, rng)?,
            };
            scratch.nodes[v] = value;
        }
        self.collect(scratch, out);
        Ok(())
    }

    /// Parentless realization: `z_i = H_i(Pr(v_i), u_i)` with no foreign
    /// inputs at all. Agrees with `realize_row(&[], ..)` bit for bit.
    pub fn realize_row_isolated(
        &self,
        r: usize,
        rng: &mut SeededRng,
        scratch: &mut RowScratch,
        out: &mut [f64],
    ) -> Result<()> {
        if !self.foreign_arity.is_empty() {
            return Err(Error::Usage("table has foreign-key inputs".into()));
        }
        self.prepare(scratch);
        for &v in &self.order {
            let value = match &self.mechanisms[v] {
                Mechanism::Derived(d) => {
                    self.aggregate(d, scratch, rng);
                    self.reconstruct(d, scratch)
                }
                source => self.source_value(source, r, rng)?,
            };
            scratch.nodes[v] = value;
        }
        self.collect(scratch, out);
        Ok(())
    }

    fn prepare(&self, scratch: &mut RowScratch) {
        scratch.nodes.clear();
        scratch.nodes.resize(self.graph.num_nodes(), 0.0);
        scratch.latent.resize(self.latent_dim, 0.0);
        scratch.exogenous.resize(self.latent_dim, 0.0);
    }

    fn source_value(&self, mechanism: &Mechanism, r: usize, rng: &mut SeededRng) -> Result<f64> {
        Ok(match mechanism {
            Mechanism::NumericSource(params) => temporal_signal(r as f64, params, rng),
            Mechanism::CategoricalSource(per_category) => {
                let logits: Vec<f64> = per_category
                    .iter()
                    .map(|p| temporal_signal(r as f64, p, rng))
                    .collect();
                sample_softmax(&logits, rng)? as f64
            }
            Mechanism::Derived(_) => unreachable!("derived nodes are handled by the caller"),
        })
    }

    /// Node update over the in-table inputs: `w_u u_i + sum_k w_k e_k`.
    fn aggregate(&self, d: &Derived, scratch: &mut RowScratch, rng: &mut SeededRng) {
        let RowScratch {
            nodes,
            latent,
            exogenous,
            mlp,
        } = scratch;
        for u in exogenous.iter_mut() {
            *u = d.exogenous_dist.sample(rng);
        }
        aggregate_latent(exogenous, d.exogenous_weight, latent);
        for (p, w, projection) in &d.inputs {
            projection.accumulate(nodes[*p], *w, latent, mlp);
        }
    }

    fn reconstruct(&self, d: &Derived, scratch: &mut RowScratch) -> f64 {
        let RowScratch { latent, mlp, .. } = scratch;
        match &d.reconstruction {
            Reconstruction::Numeric(net) => net.forward_with(latent, mlp)[0],
            Reconstruction::Categorical { mlp: net, decoder } => decoder.decode(net.forward_with(latent, mlp)) as f64,
        }
    }

    fn collect(&self, scratch: &RowScratch, out: &mut [f64]) {
        for (slot, &v) in out.iter_mut().zip(&self.graph.feature_nodes) {
            *slot = scratch.nodes[v];
        }
    }
}

/// Writes `w_u * u` into `latent`; projected inputs are added on top.
pub fn aggregate_latent(u: &[f64], w_u: f64, latent: &mut [f64]) {
    for (l, &x) in latent.iter_mut().zip(u) {
        *l = w_u * x;
    }
}
