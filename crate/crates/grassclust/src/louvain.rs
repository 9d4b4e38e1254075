//! Weighted modularity and Louvain community detection.
//!
//! Standard two-phase scheme: greedy local moving of nodes between
//! communities (visited in seeded-shuffled order), then aggregation of
//! communities into supernodes, repeated while the modularity objective
//! keeps improving. The cluster count is emergent, never an input.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const GAIN_TOL: f64 = 1e-9;

/// Symmetric nonnegative affinity matrix with zero diagonal.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    weights: DMatrix<f64>,
}

impl WeightedGraph {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() || weights.nrows() == 0 {
            return Err(Error::input("affinity matrix must be square and non-empty"));
        }
        let n = weights.nrows();
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::input(format!("diagonal entry ({i},{i}) must be zero")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::input(format!("weight ({i},{j}) = {w} invalid")));
                }
                if (w - weights[(j, i)]).abs() > 1e-12 {
                    return Err(Error::input(format!("asymmetry at ({i},{j})")));
                }
            }
        }
        Ok(WeightedGraph { weights })
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Weighted degree of one node.
    pub fn degree(&self, i: usize) -> f64 {
        self.weights.row(i).iter().sum()
    }

    /// Total weight counting both directions (2m).
    pub fn two_m(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// A hard partition with contiguous labels 0..k, each occurring at least
/// once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::input("empty label vector"));
        }
        let k = labels.iter().max().unwrap() + 1;
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::input("labels must use every value in 0..k at least once"));
        }
        Ok(ClusterAssignment { labels, k })
    }

    /// Relabels arbitrary ids to 0..k in first-occurrence order.
    pub fn from_raw(raw: &[usize]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::input("empty label vector"));
        }
        let mut map = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &r in raw {
            let next = map.len();
            let l = *map.entry(r).or_insert(next);
            labels.push(l);
        }
        Ok(ClusterAssignment { labels, k: map.len() })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_clusters(&self) -> usize {
        self.k
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

/// Newman weighted modularity of a partition.
pub fn modularity(g: &WeightedGraph, a: &ClusterAssignment) -> Result<f64> {
    modularity_at_resolution(g, a.labels(), 1.0)
}

fn modularity_at_resolution(g: &WeightedGraph, labels: &[usize], resolution: f64) -> Result<f64> {
    if labels.len() != g.num_nodes() {
        return Err(Error::input("label count must match node count"));
    }
    let two_m = g.two_m();
    if two_m <= 0.0 {
        return Err(Error::degenerate("graph has no edge weight"));
    }
    let k = labels.iter().max().unwrap() + 1;
    let mut w_in = vec![0.0f64; k];
    let mut deg_sum = vec![0.0f64; k];
    let n = g.num_nodes();
    for i in 0..n {
        deg_sum[labels[i]] += g.degree(i);
        for j in 0..n {
            if labels[i] == labels[j] {
                w_in[labels[i]] += g.weights()[(i, j)];
            }
        }
    }
    let mut q = 0.0;
    for c in 0..k {
        q += w_in[c] / two_m - resolution * (deg_sum[c] / two_m).powi(2);
    }
    Ok(q)
}

/// Louvain output: the partition plus the modularity recorded after each
/// level (at the requested resolution), starting from the all-singletons
/// value.
#[derive(Debug, Clone)]
pub struct LouvainResult {
    pub assignment: ClusterAssignment,
    pub level_modularity: Vec<f64>,
}

/// One level of the hierarchy: adjacency lists plus per-node self-loops
/// accumulated by aggregation.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
}

impl Level {
    fn from_graph(g: &WeightedGraph) -> Level {
        let n = g.num_nodes();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let w = g.weights()[(i, j)];
                if j != i && w > 0.0 {
                    adj[i].push((j, w));
                }
            }
        }
        let degree = (0..n).map(|i| g.degree(i)).collect();
        Level { adj, self_loop: vec![0.0; n], degree }
    }

    fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    fn modularity(&self, labels: &[usize], two_m: f64, resolution: f64) -> f64 {
        let k = labels.iter().max().unwrap() + 1;
        let mut w_in = vec![0.0f64; k];
        let mut deg_sum = vec![0.0f64; k];
        for u in 0..self.num_nodes() {
            let c = labels[u];
            deg_sum[c] += self.degree[u];
            w_in[c] += self.self_loop[u];
            for &(v, w) in &self.adj[u] {
                if labels[v] == c {
                    w_in[c] += w;
                }
            }
        }
        (0..k).map(|c| w_in[c] / two_m - resolution * (deg_sum[c] / two_m).powi(2)).sum()
    }

    /// Greedy local moving. Returns the node-to-community map (contiguous)
    /// or None when nothing moved.
    fn local_moving(&self, two_m: f64, resolution: f64, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
        let n = self.num_nodes();
        let mut community: Vec<usize> = (0..n).collect();
        let mut comm_degree: Vec<f64> = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();

        // Scratch: community -> accumulated neighbor weight for the node at
        // hand, plus the list of touched communities in encounter order.
        let mut nbr_weight = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();

        let mut any_move = false;
        loop {
            let mut moved_this_pass = false;
            order.shuffle(rng);
            for &u in &order {
                let old = community[u];
                comm_degree[old] -= self.degree[u];

                touched.clear();
                for &(v, w) in &self.adj[u] {
                    let c = community[v];
                    if nbr_weight[c] == 0.0 && !touched.contains(&c) {
                        touched.push(c);
                    }
                    nbr_weight[c] += w;
                }

                // Gain of joining community c, relative to staying alone;
                // constant terms drop out of the comparison.
                let gain = |c: usize, nw: f64| -> f64 {
                    nw / two_m - resolution * self.degree[u] * comm_degree[c] / (two_m * two_m)
                };
                let old_gain = gain(old, nbr_weight[old]);
                let mut best_comm = old;
                let mut best_gain = old_gain;
                for &c in &touched {
                    if c == old {
                        continue;
                    }
                    let g = gain(c, nbr_weight[c]);
                    if g > best_gain + GAIN_TOL {
                        best_gain = g;
                        best_comm = c;
                    }
                }

                for &c in &touched {
                    nbr_weight[c] = 0.0;
                }

                community[u] = best_comm;
                comm_degree[best_comm] += self.degree[u];
                if best_comm != old {
                    moved_this_pass = true;
                    any_move = true;
                }
            }
            if !moved_this_pass {
                break;
            }
        }

        if !any_move {
            return None;
        }
        let mut relabel = std::collections::HashMap::new();
        let compact: Vec<usize> = community
            .iter()
            .map(|&c| {
                let next = relabel.len();
                *relabel.entry(c).or_insert(next)
            })
            .collect();
        Some(compact)
    }

    /// Merges communities into supernodes.
    fn aggregate(&self, labels: &[usize]) -> Level {
        let k = labels.iter().max().unwrap() + 1;
        let mut self_loop = vec![0.0f64; k];
        let mut degree = vec![0.0f64; k];
        let mut maps: Vec<std::collections::HashMap<usize, f64>> =
            vec![std::collections::HashMap::new(); k];
        for u in 0..self.num_nodes() {
            let cu = labels[u];
            degree[cu] += self.degree[u];
            self_loop[cu] += self.self_loop[u];
            for &(v, w) in &self.adj[u] {
                let cv = labels[v];
                if cv == cu {
                    self_loop[cu] += w;
                } else {
                    *maps[cu].entry(cv).or_insert(0.0) += w;
                }
            }
        }
        let adj = maps
            .into_iter()
            .map(|m| {
                let mut edges: Vec<(usize, f64)> = m.into_iter().collect();
                edges.sort_by_key(|&(v, _)| v);
                edges
            })
            .collect();
        Level { adj, self_loop, degree }
    }
}

/// Louvain community detection at the given resolution. Deterministic for a
/// fixed seed.
pub fn louvain(g: &WeightedGraph, resolution: f64, seed: u64) -> Result<LouvainResult> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::config("resolution must be positive"));
    }
    let two_m = g.two_m();
    if two_m <= 0.0 {
        return Err(Error::degenerate("graph has no edge weight"));
    }
    let n = g.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut level = Level::from_graph(g);
    // node -> community at the finest level, refined as levels stack up.
    let mut node_labels: Vec<usize> = (0..n).collect();
    let singleton: Vec<usize> = (0..n).collect();
    let mut q = level.modularity(&singleton, two_m, resolution);
    let mut level_modularity = vec![q];

    loop {
        let moved = match level.local_moving(two_m, resolution, &mut rng) {
            Some(m) => m,
            None => break,
        };
        let new_q = level.modularity(&moved, two_m, resolution);
        for l in node_labels.iter_mut() {
            *l = moved[*l];
        }
        level_modularity.push(new_q);
        if new_q - q <= GAIN_TOL {
            q = new_q.max(q);
            break;
        }
        q = new_q;
        level = level.aggregate(&moved);
        if level.num_nodes() <= 1 {
            break;
        }
    }

    // Greedy moving can in principle stall below the trivial partitions;
    // fall back when one of them scores higher.
    let all_in_one = vec![0usize; n];
    let q_one = modularity_at_resolution(g, &all_in_one, resolution)?;
    let q_singletons = level_modularity[0];
    let (labels, final_q) = if q >= q_one && q >= q_singletons {
        (node_labels, q)
    } else if q_one >= q_singletons {
        (all_in_one, q_one)
    } else {
        (singleton, q_singletons)
    };
    if final_q > *level_modularity.last().unwrap() {
        level_modularity.push(final_q);
    }

    Ok(LouvainResult {
        assignment: ClusterAssignment::from_raw(&labels)?,
        level_modularity,
    })
}
