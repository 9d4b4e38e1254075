//! Partition scoring (matching accuracy, normalized mutual information)
//! and the K-means baseline.
//!
//! Accuracy matches predicted clusters to true clusters by maximum-weight
//! injective matching on the contingency table, so an emergent cluster
//! count different from the ground truth's is handled without fuss.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::louvain::ClusterAssignment;

/// Cross-tabulation of two partitions over the same items.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    /// counts[p][t] = items with predicted label p and true label t.
    pub counts: Vec<Vec<usize>>,
    pub total: usize,
}

impl ContingencyTable {
    pub fn new(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<Self> {
        if pred.labels().len() != truth.labels().len() {
            return Err(Error::input(format!(
                "partitions cover {} vs {} items",
                pred.labels().len(),
                truth.labels().len()
            )));
        }
        let mut counts = vec![vec![0usize; truth.num_clusters()]; pred.num_clusters()];
        for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
            counts[p][t] += 1;
        }
        Ok(ContingencyTable { counts, total: pred.labels().len() })
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let k_t = self.counts[0].len();
        (0..k_t).map(|t| self.counts.iter().map(|r| r[t]).sum()).collect()
    }
}

/// Best injective matching value by brute force over permutations of the
/// larger side. Only viable for small tables; kept as the oracle for the
/// Hungarian route.
fn exhaustive_match(counts: &[Vec<usize>]) -> usize {
    let k_p = counts.len();
    let k_t = counts[0].len();
    // Recurse over predicted clusters, tracking which true clusters are
    // taken. Leaving a predicted cluster unmatched is always allowed.
    fn go(counts: &[Vec<usize>], row: usize, used: u32) -> usize {
        if row == counts.len() {
            return 0;
        }
        // Leave this predicted cluster unmatched.
        let mut best = go(counts, row + 1, used);
        for t in 0..counts[0].len() {
            if used & (1 << t) == 0 {
                best = best.max(counts[row][t] + go(counts, row + 1, used | (1 << t)));
            }
        }
        best
    }
    debug_assert!(k_p.max(k_t) <= 8);
    go(counts, 0, 0)
}

/// Maximum-weight assignment on a square cost matrix via the O(n^3)
/// shortest-augmenting-path Hungarian algorithm (potentials form).
fn hungarian_match(counts: &[Vec<usize>]) -> usize {
    let k_p = counts.len();
    let k_t = counts[0].len();
    let n = k_p.max(k_t);
    // Minimize (max_entry - weight); padding rows/cols carry weight 0.
    let max_entry = counts.iter().flatten().copied().max().unwrap_or(0) as f64;
    let cost = |i: usize, j: usize| -> f64 {
        let w = if i < k_p && j < k_t { counts[i][j] as f64 } else { 0.0 };
        max_entry - w
    };

    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut matched = 0usize;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i - 1 < k_p && j - 1 < k_t {
            matched += counts[i - 1][j - 1];
        }
    }
    matched
}

fn matched_count(table: &ContingencyTable) -> usize {
    let k_p = table.counts.len();
    let k_t = table.counts[0].len();
    if k_p.max(k_t) <= 8 {
        exhaustive_match(&table.counts)
    } else {
        hungarian_match(&table.counts)
    }
}

/// Fraction of items placed in the correctly-matched cluster, maximized
/// over injective cluster matchings.
pub fn accuracy(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    Ok(matched_count(&table) as f64 / table.total as f64)
}

fn entropy(sums: &[usize], n: usize) -> f64 {
    sums.iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with square-root normalization. Identical
/// partitions score 1 even when both are a single cluster; otherwise a
/// zero-entropy side forces 0.
pub fn nmi(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let canon_p = ClusterAssignment::from_raw(pred.labels())?;
    let canon_t = ClusterAssignment::from_raw(truth.labels())?;
    if canon_p == canon_t {
        return Ok(1.0);
    }
    let n = table.total;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let h_p = entropy(&rows, n);
    let h_t = entropy(&cols, n);
    if h_p == 0.0 || h_t == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (p, row) in table.counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c > 0 {
                let joint = c as f64 / n as f64;
                mi += joint * (joint / (rows[p] as f64 / n as f64 * cols[t] as f64 / n as f64)).ln();
            }
        }
    }
    Ok((mi / (h_p * h_t).sqrt()).clamp(0.0, 1.0))
}

/// One Lloyd run from k-means++ starts. Returns labels, the final
/// within-cluster sum of squares, and the per-iteration WCSS trace.
fn lloyd_run(
    vectors: &[DVector<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, f64, Vec<f64>) {
    let n = vectors.len();

    // k-means++ seeding: each new center drawn with probability
    // proportional to squared distance from the chosen set.
    let mut centers: Vec<DVector<f64>> = vec![vectors[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = vectors.iter().map(|v| (v - &centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut draw = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                draw -= w;
                if draw <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centers.push(vectors[idx].clone());
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min((v - centers.last().unwrap()).norm_squared());
        }
    }

    let mut labels = vec![0usize; n];
    let mut trace = Vec::new();
    for _ in 0..200 {
        let mut changed = false;
        let mut wcss = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            let (best, dist) = centers
                .iter()
                .enumerate()
                .map(|(c, ctr)| (c, (v - ctr).norm_squared()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
                .unwrap();
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
            wcss += dist;
        }
        trace.push(wcss);
        if !changed && trace.len() > 1 {
            break;
        }
        let dim = vectors[0].len();
        let mut sums = vec![DVector::zeros(dim); k];
        let mut sizes = vec![0usize; k];
        for (i, v) in vectors.iter().enumerate() {
            sums[labels[i]] += v;
            sizes[labels[i]] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centers[c] = &sums[c] / sizes[c] as f64;
            }
            // An emptied cluster keeps its previous center.
        }
    }
    let wcss = *trace.last().unwrap();
    (labels, wcss, trace)
}

/// Seeded K-means (k-means++ starts, Lloyd refinement, best of `restarts`
/// by within-cluster sum of squares).
pub fn kmeans_baseline(
    vectors: &[DVector<f64>],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterAssignment> {
    if vectors.is_empty() {
        return Err(Error::input("no vectors to cluster"));
    }
    if k == 0 || k > vectors.len() {
        return Err(Error::input(format!("k = {k} out of range for {} vectors", vectors.len())));
    }
    if restarts == 0 {
        return Err(Error::input("need at least one restart"));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::input("vectors must share one dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts {
        let (labels, wcss, _) = lloyd_run(vectors, k, &mut rng);
        if best.as_ref().map_or(true, |(_, b)| wcss < *b) {
            best = Some((labels, wcss));
        }
    }
    ClusterAssignment::from_raw(&best.unwrap().0)
}
