//! Random DAG families shared by schema sampling and causal-graph sampling.
//!
//! Undirected families (Barabási–Albert, Watts–Strogatz, Erdős–Rényi) are
//! oriented from lower to higher rank of a uniform random node permutation.
//! Trees are oriented relative to a uniformly chosen root.

use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::cmp::Reverse;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::GenConfig;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFamily {
    BarabasiAlbert,
    /// Tree edges point from the root towards the leaves.
    ReverseRandomTree,
    /// Tree edges point from the leaves towards the root.
    RandomTree,
    WattsStrogatz,
    ErdosRenyi,
    Layered,
}

impl GraphFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            GraphFamily::BarabasiAlbert => "barabasi-albert",
            GraphFamily::ReverseRandomTree => "reverse-random-tree",
            GraphFamily::RandomTree => "random-tree",
            GraphFamily::WattsStrogatz => "watts-strogatz",
            GraphFamily::ErdosRenyi => "erdos-renyi",
            GraphFamily::Layered => "layered",
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "barabasialbert" | "ba" => GraphFamily::BarabasiAlbert,
            "reverserandomtree" | "rrt" => GraphFamily::ReverseRandomTree,
            "randomtree" => GraphFamily::RandomTree,
            "wattsstrogatz" | "ws" => GraphFamily::WattsStrogatz,
            "erdosrenyi" | "er" => GraphFamily::ErdosRenyi,
            "layered" => GraphFamily::Layered,
            _ => return Err(Error::Config(format!("unknown graph family '{s}'"))),
        })
    }
}

/// Directed graph on nodes `0..num_nodes` with sorted, duplicate-free edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Dag {
    /// Builds the graph, rejecting self-loops, out-of-range endpoints and cycles.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let set: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        for &(u, v) in &set {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Structural(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::Structural(format!("self-loop on node {u}")));
            }
        }
        let dag = Dag {
            num_nodes,
            edges: set.into_iter().collect(),
        };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn predecessors(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect()
    }

    pub fn successors(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == v).map(|e| e.1).collect()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == v).count()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == v).count()
    }

    pub fn sources(&self) -> Vec<usize> {
        (0..self.num_nodes).filter(|&v| self.in_degree(v) == 0).collect()
    }

    /// Kahn's algorithm, always releasing the smallest ready index first.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        topological_order(self.num_nodes, &self.edges)
    }
}

pub(crate) fn topological_order(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut indeg = vec![0usize; num_nodes];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
    for &(u, v) in edges {
        indeg[v] += 1;
        out[u].push(v);
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..num_nodes).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(num_nodes);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &v in &out[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    if order.len() != num_nodes {
        return Err(Error::Structural("graph contains a cycle".into()));
    }
    Ok(order)
}

/// Family-specific knobs, drawn once per sampled graph.
#[derive(Clone, Debug, PartialEq)]
pub struct DagParams {
    pub ba_attachment: usize,
    pub ba_dropout: f64,
    pub er_edge_prob: f64,
    pub ws_ring_degree: usize,
    pub ws_rewire_prob: f64,
    pub layered_depth: usize,
    pub layered_dropout: f64,
}

impl DagParams {
    pub fn draw(config: &GenConfig, rng: &mut SeededRng) -> Result<Self> {
        Ok(Self {
            ba_attachment: config.ba_attachment.draw(rng)?,
            ba_dropout: config.ba_edge_dropout.draw(rng)?,
            er_edge_prob: config.er_edge_prob.draw(rng)?,
            ws_ring_degree: config.ws_ring_degree.draw(rng)?,
            ws_rewire_prob: config.ws_rewire_prob.draw(rng)?,
            layered_depth: config.layered_depth.draw(rng)?,
            layered_dropout: config.layered_edge_dropout.draw(rng)?,
        })
    }
}

/// Samples a DAG of the given family on `n` nodes.
pub fn sample_dag(family: GraphFamily, n: usize, params: &DagParams, rng: &mut SeededRng) -> Result<Dag> {
    let edges = match family {
        GraphFamily::BarabasiAlbert => {
            let base = barabasi_albert(n, params.ba_attachment, rng);
            let kept = drop_edges(base, params.ba_dropout, rng);
            orient_by_permutation(n, &kept, rng)
        }
        GraphFamily::WattsStrogatz => {
            let base = watts_strogatz(n, params.ws_ring_degree, params.ws_rewire_prob, rng);
            orient_by_permutation(n, &base, rng)
        }
        GraphFamily::ErdosRenyi => {
            let base = erdos_renyi(n, params.er_edge_prob, rng);
            orient_by_permutation(n, &base, rng)
        }
        GraphFamily::ReverseRandomTree | GraphFamily::RandomTree => {
            let tree = random_tree(n, rng);
            if n == 0 {
                Vec::new()
            } else {
                let root = rng.index(n);
                orient_tree(n, &tree, root, family == GraphFamily::ReverseRandomTree)
            }
        }
        GraphFamily::Layered => layered(n, params.layered_depth, params.layered_dropout, rng),
    };
    Dag::new(n, edges)
}

/// Undirected preferential-attachment graph, edges as `(min, max)` pairs.
///
/// Starts from a star on `m + 1` nodes; every later node attaches to `m`
/// distinct earlier nodes with probability proportional to degree.
pub fn barabasi_albert(n: usize, m: usize, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let m = m.max(1);
    let mut edges = Vec::new();
    let seed_nodes = (m + 1).min(n);
    // Endpoint multiset: node v appears deg(v) times.
    let mut endpoints: Vec<usize> = Vec::new();
    for leaf in 1..seed_nodes {
        edges.push((0, leaf));
        endpoints.extend([0, leaf]);
    }
    for v in seed_nodes..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m.min(v) {
            targets.insert(endpoints[rng.index(endpoints.len())]);
        }
        for t in targets {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    edges
}

/// Removes each edge independently with probability `p`.
pub fn drop_edges(edges: Vec<(usize, usize)>, p: f64, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    edges.into_iter().filter(|_| !rng.bernoulli(p)).collect()
}

/// Ring lattice joining each node to its `k / 2` nearest neighbours per side,
/// then rewiring each lattice edge's far endpoint with probability `p`.
pub fn watts_strogatz(n: usize, k: usize, p: f64, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut set = BTreeSet::new();
    if n < 2 {
        return Vec::new();
    }
    let half = (k / 2).max(1);
    for j in 1..=half {
        for u in 0..n {
            let v = (u + j) % n;
            if u != v {
                set.insert(key(u, v));
            }
        }
    }
    for j in 1..=half {
        for u in 0..n {
            let v = (u + j) % n;
            if u == v || !set.contains(&key(u, v)) || !rng.bernoulli(p) {
                continue;
            }
            let degree = set.iter().filter(|e| e.0 == u || e.1 == u).count();
            if degree >= n - 1 {
                continue;
            }
            let mut w = rng.index(n);
            while w == u || set.contains(&key(u, w)) {
                w = rng.index(n);
            }
            set.remove(&key(u, v));
            set.insert(key(u, w));
        }
    }
    set.into_iter().collect()
}

pub fn erdos_renyi(n: usize, p: f64, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Uniform labelled tree on `n` nodes, decoded from a random Prüfer sequence.
pub fn random_tree(n: usize, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => return Vec::new(),
        2 => return vec![(0, 1)],
        _ => {}
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.index(n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let Reverse(leaf) = leaves.pop().expect("a Prüfer decode always has a leaf");
        edges.push((leaf.min(c), leaf.max(c)));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.push(Reverse(c));
        }
    }
    let Reverse(a) = leaves.pop().expect("two leaves remain");
    let Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.push((a.min(b), a.max(b)));
    edges
}

/// Orients an undirected edge list from lower to higher rank of a random
/// permutation.
pub fn orient_by_permutation(n: usize, edges: &[(usize, usize)], rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let mut rank: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut rank);
    edges
        .iter()
        .map(|&(u, v)| if rank[u] < rank[v] { (u, v) } else { (v, u) })
        .collect()
}

/// Orients tree edges away from `root` when `away` is set, towards it otherwise.
pub fn orient_tree(n: usize, edges: &[(usize, usize)], root: usize, away: bool) -> Vec<(usize, usize)> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut depth = vec![usize::MAX; n];
    depth[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    edges
        .iter()
        .map(|&(u, v)| {
            let (near, far) = if depth[u] < depth[v] { (u, v) } else { (v, u) };
            if away {
                (near, far)
            } else {
                (far, near)
            }
        })
        .collect()
}

/// Nodes split into `depth` non-empty layers; consecutive layers fully
/// connected, then each edge dropped with probability `dropout`.
pub fn layered(n: usize, depth: usize, dropout: f64, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    if n == 0 {
        return Vec::new();
    }
    let depth = depth.clamp(1, n);
    let mut nodes: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut nodes);
    let mut layer_of = vec![0usize; n];
    for (i, &v) in nodes.iter().enumerate() {
        layer_of[v] = if i < depth { i } else { rng.index(depth) };
    }
    let mut layers = vec![Vec::new(); depth];
    for v in 0..n {
        layers[layer_of[v]].push(v);
    }
    let mut edges = Vec::new();
    for pair in layers.windows(2) {
        for &u in &pair[0] {
            for &v in &pair[1] {
                if !rng.bernoulli(dropout) {
                    edges.push((u, v));
                }
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DagParams {
        DagParams::draw(&GenConfig::default(), &mut SeededRng::new(0)).unwrap()
    }

    #[test]
    fn topological_order_examples() {
        let chain = Dag::new(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(chain.topological_order().unwrap(), vec![0, 1, 2]);
        let diamond = Dag::new(4, [(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let order = diamond.topological_order().unwrap();
        assert_eq!(order.first(), Some(&0));
        assert_eq!(order.last(), Some(&3));
        let isolated = Dag::new(3, []).unwrap();
        assert_eq!(isolated.topological_order().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn cycles_and_self_loops_rejected() {
        assert!(matches!(Dag::new(2, [(0, 1), (1, 0)]), Err(Error::Structural(_))));
        assert!(matches!(Dag::new(2, [(1, 1)]), Err(Error::Structural(_))));
        assert!(topological_order(2, &[(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn prufer_trees_are_spanning() {
        let mut rng = SeededRng::new(4);
        for n in 1..30 {
            let edges = random_tree(n, &mut rng);
            assert_eq!(edges.len(), n.saturating_sub(1));
            // Connected: BFS from 0 reaches everything.
            let oriented = orient_tree(n, &edges, 0, true);
            let dag = Dag::new(n, oriented).unwrap();
            assert!(n == 0 || dag.sources() == vec![0]);
        }
    }

    #[test]
    fn labelled_trees_on_three_nodes_are_uniform() {
        // Exactly 3 labelled trees on 3 nodes, one per choice of middle vertex.
        let mut rng = SeededRng::new(8);
        let mut counts = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            let edges = random_tree(3, &mut rng);
            let mut deg = [0; 3];
            for (u, v) in edges {
                deg[u] += 1;
                deg[v] += 1;
            }
            counts[deg.iter().position(|&d| d == 2).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.015);
        }
    }

    #[test]
    fn ba_edge_count() {
        let mut rng = SeededRng::new(1);
        // Star on m + 1 nodes, then m edges per extra node.
        assert_eq!(barabasi_albert(10, 2, &mut rng).len(), 2 + 7 * 2);
        assert_eq!(barabasi_albert(3, 2, &mut rng).len(), 2);
    }

    #[test]
    fn ws_keeps_edge_count_and_simplicity() {
        let mut rng = SeededRng::new(2);
        for n in 3..20 {
            let edges = watts_strogatz(n, 2, 0.3, &mut rng);
            assert_eq!(edges.len(), n);
            assert!(edges.iter().all(|(u, v)| u < v));
        }
    }

    #[test]
    fn every_family_yields_a_dag() {
        let mut rng = SeededRng::new(3);
        let p = params();
        for family in [
            GraphFamily::BarabasiAlbert,
            GraphFamily::ReverseRandomTree,
            GraphFamily::RandomTree,
            GraphFamily::WattsStrogatz,
            GraphFamily::ErdosRenyi,
            GraphFamily::Layered,
        ] {
            for n in [1, 2, 3, 7, 25] {
                let dag = sample_dag(family, n, &p, &mut rng).unwrap();
                assert_eq!(dag.topological_order().unwrap().len(), n);
            }
        }
    }

    #[test]
    fn reverse_tree_has_single_root() {
        let mut rng = SeededRng::new(5);
        let p = params();
        for _ in 0..200 {
            let dag = sample_dag(GraphFamily::ReverseRandomTree, 3, &p, &mut rng).unwrap();
            assert_eq!(dag.edges().len(), 2);
            assert_eq!(dag.sources().len(), 1);
            let sinks = (0..3).filter(|&v| dag.out_degree(v) == 0).count();
            let chain = (0..3).all(|v| dag.out_degree(v) <= 1);
            assert!(chain == (sinks == 1));
        }
    }

    #[test]
    fn family_names_parse() {
        assert_eq!("Barabasi-Albert".parse::<GraphFamily>().unwrap(), GraphFamily::BarabasiAlbert);
        assert_eq!("Reverse Random-Tree".parse::<GraphFamily>().unwrap(), GraphFamily::ReverseRandomTree);
        assert!("hypercube".parse::<GraphFamily>().is_err());
    }
}
