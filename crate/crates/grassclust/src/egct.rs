//! Geodesic clustering by tangent spaces, extended with sparse-code and
//! angular affinities.
//!
//! For each subspace feature: find its nearest neighbors on the manifold,
//! lift them into the tangent space at the feature, sparse-code the origin
//! against the lifted neighbors, estimate the local principal subspace of
//! the neighborhood, and measure how far each neighbor tilts out of it.
//! Sparse weights and tilt angles combine into an affinity graph that
//! Louvain partitions; the number of clusters is emergent.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grassmann::{self, GrassmannPoint};
use crate::louvain::{self, ClusterAssignment, WeightedGraph};
use crate::sparse::{self, SparseCodingProblem};

/// Knobs for the affinity construction and the final Louvain pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EgctParams {
    /// Neighborhood size on the manifold.
    pub k_nn: usize,
    /// Bandwidth of the distance-dependent sparsity penalties.
    pub sigma_alpha: f64,
    /// Bandwidth of the angular affinity term.
    pub sigma_theta: f64,
    /// Cumulative eigenvalue mass the local principal subspace must capture.
    pub pca_energy: f64,
    /// Resolution handed to Louvain.
    pub louvain_resolution: f64,
    /// Seed for the Louvain node order.
    pub seed: u64,
}

impl Default for EgctParams {
    fn default() -> Self {
        EgctParams {
            k_nn: 8,
            sigma_alpha: 1.0,
            sigma_theta: 1.0,
            pca_energy: 0.9,
            louvain_resolution: 1.0,
            seed: 0,
        }
    }
}

impl EgctParams {
    pub fn validate(&self, num_features: usize) -> Result<()> {
        if self.k_nn < 2 {
            return Err(Error::config("k_nn must be at least 2"));
        }
        if self.k_nn >= num_features {
            return Err(Error::config(format!(
                "k_nn = {} needs more than {} features",
                self.k_nn, num_features
            )));
        }
        if !(self.sigma_alpha.is_finite() && self.sigma_alpha > 0.0) {
            return Err(Error::config("sigma_alpha must be positive"));
        }
        if !(self.sigma_theta.is_finite() && self.sigma_theta > 0.0) {
            return Err(Error::config("sigma_theta must be positive"));
        }
        if !(self.pca_energy > 0.0 && self.pca_energy <= 1.0) {
            return Err(Error::config("pca_energy must lie in (0, 1]"));
        }
        if !(self.louvain_resolution.is_finite() && self.louvain_resolution > 0.0) {
            return Err(Error::config("louvain_resolution must be positive"));
        }
        Ok(())
    }
}

/// Everything computed around one feature: usable neighbors, their tangent
/// lifts, sparse weights, the local principal subspace, and tilt angles.
#[derive(Debug, Clone)]
pub struct NeighborhoodStats {
    pub feature: usize,
    /// Neighbors that survived the tangent lift, in ascending-distance order.
    pub neighbor_ids: Vec<usize>,
    /// Neighbors dropped because the log map is undefined for them.
    pub dropped: Vec<usize>,
    /// Flattened tangent vectors, aligned with `neighbor_ids`.
    pub tangents: Vec<DVector<f64>>,
    /// Sparse weights, aligned with `neighbor_ids`.
    pub alpha: Vec<f64>,
    /// Tilt angles out of the principal subspace, in [0, pi/2].
    pub theta: Vec<f64>,
    /// Mean-centered neighborhood covariance of the tangent lifts.
    pub covariance: DMatrix<f64>,
    /// Orthonormal basis of the dominant eigenspace of `covariance`.
    pub eigenbasis: DMatrix<f64>,
    /// True when the sparse code fell back to uniform weights.
    pub degenerate_code: bool,
}

/// Indices of the `k_nn` features closest to feature `i` by geodesic
/// distance, ascending; ties prefer the lower index, and pairs with an
/// undefined log map rank at the manifold diameter.
pub fn knn(features: &[GrassmannPoint], i: usize, k_nn: usize) -> Result<Vec<usize>> {
    if features.len() < k_nn + 1 {
        return Err(Error::input(format!(
            "k_nn = {k_nn} needs at least {} features, got {}",
            k_nn + 1,
            features.len()
        )));
    }
    let diameter = grassmann::diameter(features[i].subspace_dim());
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(features.len() - 1);
    for j in 0..features.len() {
        if j == i {
            continue;
        }
        let d = if grassmann::near_cut_locus(&features[i], &features[j], grassmann::ANGLE_TOL)? {
            diameter
        } else {
            grassmann::geodesic_distance(&features[i], &features[j])?
        };
        ranked.push((d, j));
    }
    ranked.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ranked.into_iter().take(k_nn).map(|(_, j)| j).collect())
}

/// Angle between a vector and a subspace with orthonormal basis columns.
/// Numerically-zero vectors have no meaningful direction and count as zero
/// tilt.
fn subspace_angle(v: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    let norm = v.norm();
    if norm <= 1e-12 {
        return 0.0;
    }
    let ratio = ((basis.transpose() * v).norm() / norm).clamp(0.0, 1.0);
    ratio.acos()
}

/// Tangent-space statistics of one feature's neighborhood.
pub fn neighborhood_stats(
    features: &[GrassmannPoint],
    i: usize,
    p: &EgctParams,
) -> Result<NeighborhoodStats> {
    p.validate(features.len())?;
    let ids = knn(features, i, p.k_nn)?;

    let mut neighbor_ids = Vec::with_capacity(ids.len());
    let mut dropped = Vec::new();
    let mut tangents = Vec::with_capacity(ids.len());
    for j in ids {
        match grassmann::log_map(&features[i], &features[j]) {
            Ok(t) => {
                neighbor_ids.push(j);
                tangents.push(DVector::from_vec(t.flatten()));
            }
            Err(Error::CutLocus { .. }) => dropped.push(j),
            Err(e) => return Err(e),
        }
    }
    if neighbor_ids.len() < 2 {
        return Err(Error::degenerate(format!(
            "neighborhood of feature {i} has {} usable neighbors after dropping {:?}",
            neighbor_ids.len(),
            dropped
        )));
    }

    // Sparse-code the tangent-space origin (the feature itself) against the
    // lifted neighbors; penalties grow with geodesic distance.
    let dim = tangents[0].len();
    let problem =
        SparseCodingProblem::from_neighborhood(DVector::zeros(dim), tangents.clone(), p.sigma_alpha)?;
    let solution = sparse::solve_default(&problem)?;

    let k = tangents.len();
    let mean = tangents.iter().fold(DVector::zeros(dim), |acc, t| acc + t) / k as f64;
    let mut covariance = DMatrix::zeros(dim, dim);
    for t in &tangents {
        let c = t - &mean;
        covariance.syger(1.0 / (k - 1) as f64, &c, &c, 1.0);
    }
    covariance.fill_upper_triangle_with_lower_triangle();

    let eigen = SymmetricEigen::new(covariance.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].partial_cmp(&eigen.eigenvalues[a]).unwrap());
    let total: f64 = eigen.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    let mut keep = 1;
    if total > 0.0 {
        let mut mass = eigen.eigenvalues[order[0]].max(0.0);
        while mass < p.pca_energy * total - 1e-15 && keep < dim {
            mass += eigen.eigenvalues[order[keep]].max(0.0);
            keep += 1;
        }
    }
    let mut eigenbasis = DMatrix::zeros(dim, keep);
    for (col, &idx) in order[..keep].iter().enumerate() {
        eigenbasis.set_column(col, &eigen.eigenvectors.column(idx));
    }

    let theta = tangents.iter().map(|t| subspace_angle(t, &eigenbasis)).collect();

    Ok(NeighborhoodStats {
        feature: i,
        neighbor_ids,
        dropped,
        tangents,
        alpha: solution.alpha,
        theta,
        covariance,
        eigenbasis,
        degenerate_code: solution.degenerate,
    })
}

/// Affinity between one ordered pair, given both directions' sparse weight
/// and tilt angle (zero when that direction is absent).
fn pair_weight(a_ij: f64, a_ji: f64, t_ij: f64, t_ji: f64, sigma_theta: f64) -> f64 {
    (a_ij.abs() + a_ji.abs()).exp() * (-(t_ij + t_ji) / sigma_theta).exp()
}

/// Assembles the symmetric affinity graph from per-feature statistics.
/// Pairs with no surviving direction get weight zero, which keeps the graph
/// as sparse as the neighborhoods.
pub fn build_affinity(
    stats: &[NeighborhoodStats],
    p: &EgctParams,
) -> Result<(WeightedGraph, DMatrix<f64>, DMatrix<f64>)> {
    let n = stats.len();
    let mut alpha = DMatrix::zeros(n, n);
    let mut theta = DMatrix::zeros(n, n);
    let mut present = vec![vec![false; n]; n];
    for s in stats {
        for (idx, &j) in s.neighbor_ids.iter().enumerate() {
            alpha[(s.feature, j)] = s.alpha[idx];
            theta[(s.feature, j)] = s.theta[idx];
            present[s.feature][j] = true;
        }
    }
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if present[i][j] || present[j][i] {
                let v = pair_weight(alpha[(i, j)], alpha[(j, i)], theta[(i, j)], theta[(j, i)], p.sigma_theta);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    Ok((WeightedGraph::new(w)?, alpha, theta))
}

/// Full clustering output, with the affinity and its ingredients kept for
/// diagnostics.
#[derive(Debug, Clone)]
pub struct EgctResult {
    pub assignment: ClusterAssignment,
    pub affinity: WeightedGraph,
    pub alpha: DMatrix<f64>,
    pub theta: DMatrix<f64>,
    pub level_modularity: Vec<f64>,
    /// Features whose sparse code fell back to uniform weights.
    pub degenerate_codes: Vec<usize>,
    /// Ordered (feature, neighbor) pairs dropped from tangent statistics.
    pub cut_locus_drops: Vec<(usize, usize)>,
}

/// Clusters subspace features end to end. Deterministic for a fixed seed.
pub fn egct(features: &[GrassmannPoint], p: &EgctParams) -> Result<EgctResult> {
    p.validate(features.len())?;
    let stats: Vec<NeighborhoodStats> = (0..features.len())
        .into_par_iter()
        .map(|i| neighborhood_stats(features, i, p))
        .collect::<Result<_>>()?;

    let (affinity, alpha, theta) = build_affinity(&stats, p)?;
    let louv = louvain::louvain(&affinity, p.louvain_resolution, p.seed)?;

    let degenerate_codes = stats.iter().filter(|s| s.degenerate_code).map(|s| s.feature).collect();
    let cut_locus_drops = stats
        .iter()
        .flat_map(|s| s.dropped.iter().map(|&j| (s.feature, j)))
        .collect();
    Ok(EgctResult {
        assignment: louv.assignment,
        affinity,
        alpha,
        theta,
        level_modularity: louv.level_modularity,
        degenerate_codes,
        cut_locus_drops,
    })
}
